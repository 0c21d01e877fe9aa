//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LCAK"
//! 4       4     u32 format version (1)
//! 8       4     u32 checkpoint kind (1 = Part A, 2 = Part B)
//! 12      4     u32 block count
//! 16      ...   blocks, each:
//!                 4      tag (ASCII)
//!                 4      u32 width count W
//!                 4*W    u32 layer widths
//!                 1      u8 hidden activation (0 none, 1 relu, 2 tanh)
//!                 1      u8 flags
//!                 2      u16 reserved, zero
//!                 4      u32 payload length L
//!                 4*L    f32 payload
//! end-4   4     u32 CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Part A holds blocks `ENCD` (encoder), `HYPA` (hypernetwork), `TRGT`
//! (target network shape, no payload) and `PRIR` (latent prior: widths
//! `[d]`, flag bit 0 set when fitted, payload mean then variance). Part B
//! holds `HYPB` (hypernetwork) and `PHIN` (patch network shape, flag bit 0
//! for residual output).

use std::fs;
use std::path::Path;

use atlas_core::atlas::ModelB;
use atlas_core::hypermodel::{LatentPrior, ModelA};
use atlas_core::nn::{Activation, MlpSpec, ParamVector};

use crate::error::{CheckpointError, CliError, Result};
use crate::formats::write_file;

pub const MAGIC: [u8; 4] = *b"LCAK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    PartA = 1,
    PartB = 2,
}

/// One tagged section of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub tag: [u8; 4],
    pub widths: Vec<usize>,
    pub activation: Option<Activation>,
    pub flags: u8,
    pub payload: Vec<f32>,
}

impl Block {
    fn network(tag: &[u8; 4], spec: &MlpSpec, params: Option<&ParamVector>) -> Self {
        Self {
            tag: *tag,
            widths: spec.widths().to_vec(),
            activation: Some(spec.hidden()),
            flags: 0,
            payload: params.map(|p| p.values().iter().map(|&v| v as f32).collect()).unwrap_or_default(),
        }
    }

    fn spec(&self) -> Result<MlpSpec, CheckpointError> {
        let act = self.activation.ok_or_else(|| malformed(&self.tag, "has no activation"))?;
        MlpSpec::new(self.widths.clone(), act).map_err(|e| malformed(&self.tag, &e.to_string()))
    }

    fn params(&self, spec: &MlpSpec) -> Result<ParamVector, CheckpointError> {
        let values = self.payload.iter().map(|&v| v as f64).collect();
        ParamVector::from_values(spec, values).map_err(|e| malformed(&self.tag, &e.to_string()))
    }
}

fn malformed(tag: &[u8; 4], what: &str) -> CheckpointError {
    CheckpointError::Malformed(format!("block {}: {what}", String::from_utf8_lossy(tag)))
}

pub fn encode(kind: CheckpointKind, blocks: &[Block]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(kind as u32).to_le_bytes());
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in blocks {
        out.extend_from_slice(&b.tag);
        out.extend_from_slice(&(b.widths.len() as u32).to_le_bytes());
        for &w in &b.widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.push(match b.activation {
            None => 0,
            Some(Activation::Relu) => 1,
            Some(Activation::Tanh) => 2,
        });
        out.push(b.flags);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(b.payload.len() as u32).to_le_bytes());
        for &v in &b.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Validates magic, version and CRC, in that order, then splits the blocks.
pub fn decode(bytes: &[u8]) -> Result<(CheckpointKind, Vec<Block>), CheckpointError> {
    let magic: [u8; 4] =
        bytes.get(..4).ok_or(CheckpointError::Truncated("magic"))?.try_into().unwrap();
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let mut header = Reader { bytes, pos: 4 };
    let version = header.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    if bytes.len() < 20 {
        return Err(CheckpointError::Truncated("header"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::CrcMismatch { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 8 };
    let kind = match r.u32("kind")? {
        1 => CheckpointKind::PartA,
        2 => CheckpointKind::PartB,
        k => return Err(CheckpointError::Malformed(format!("unknown checkpoint kind {k}"))),
    };
    let count = r.u32("block count")?;
    let mut blocks = Vec::new();
    for _ in 0..count {
        let tag: [u8; 4] = r.take(4, "block tag")?.try_into().unwrap();
        let w = r.u32("width count")? as usize;
        let widths = (0..w).map(|_| r.u32("widths").map(|v| v as usize)).collect::<Result<_, _>>()?;
        let head = r.take(4, "block header")?;
        let activation = match head[0] {
            0 => None,
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            a => return Err(malformed(&tag, &format!("unknown activation code {a}"))),
        };
        let len = r.u32("payload length")? as usize;
        let raw = r.take(len.checked_mul(4).ok_or(CheckpointError::Truncated("payload"))?, "payload")?;
        let payload = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        blocks.push(Block { tag, widths, activation, flags: head[1], payload });
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes after the last block",
            body.len() - r.pos
        )));
    }
    Ok((kind, blocks))
}

fn find<'a>(blocks: &'a [Block], tag: &[u8; 4]) -> Result<&'a Block, CheckpointError> {
    blocks.iter().find(|b| &b.tag == tag).ok_or_else(|| malformed(tag, "missing"))
}

fn read_checkpoint(path: &Path, expected: CheckpointKind) -> Result<Vec<Block>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let wrap = |kind| CliError::Checkpoint { path: path.to_path_buf(), kind };
    let (kind, blocks) = decode(&bytes).map_err(wrap)?;
    if kind != expected {
        return Err(wrap(CheckpointError::Malformed(format!(
            "expected a {expected:?} checkpoint, found {kind:?}"
        ))));
    }
    Ok(blocks)
}

pub fn encode_part_a(model: &ModelA, prior: &LatentPrior) -> Vec<u8> {
    let prior_block = match (prior.mean(), prior.variance()) {
        (Some(mean), Some(var)) => Block {
            tag: *b"PRIR",
            widths: vec![mean.len()],
            activation: None,
            flags: 1,
            payload: mean.iter().chain(var).map(|&v| v as f32).collect(),
        },
        _ => Block { tag: *b"PRIR", widths: vec![], activation: None, flags: 0, payload: vec![] },
    };
    encode(
        CheckpointKind::PartA,
        &[
            Block::network(b"ENCD", model.encoder_spec(), Some(model.encoder())),
            Block::network(b"HYPA", model.hyper_spec(), Some(model.hyper())),
            Block::network(b"TRGT", model.target_spec(), None),
            prior_block,
        ],
    )
}

fn part_a_from_blocks(blocks: &[Block]) -> Result<(ModelA, LatentPrior), CheckpointError> {
    let enc = find(blocks, b"ENCD")?;
    let hyp = find(blocks, b"HYPA")?;
    let trg = find(blocks, b"TRGT")?;
    let (enc_spec, hyp_spec, trg_spec) = (enc.spec()?, hyp.spec()?, trg.spec()?);
    let model = ModelA::from_parts(
        enc_spec.clone(),
        enc.params(&enc_spec)?,
        hyp_spec.clone(),
        hyp.params(&hyp_spec)?,
        trg_spec,
    )
    .map_err(|e| CheckpointError::Malformed(e.to_string()))?;

    let pr = find(blocks, b"PRIR")?;
    let prior = if pr.flags & 1 == 1 {
        let d = *pr.widths.first().ok_or_else(|| malformed(&pr.tag, "missing dimension"))?;
        if pr.payload.len() != 2 * d {
            return Err(malformed(&pr.tag, "payload does not hold mean and variance"));
        }
        let values: Vec<f64> = pr.payload.iter().map(|&v| v as f64).collect();
        LatentPrior::from_moments(values[..d].to_vec(), values[d..].to_vec())
            .map_err(|e| malformed(&pr.tag, &e.to_string()))?
    } else {
        LatentPrior::unfitted()
    };
    Ok((model, prior))
}

pub fn save_part_a(path: &Path, model: &ModelA, prior: &LatentPrior) -> Result<()> {
    write_file(path, &encode_part_a(model, prior))
}

pub fn load_part_a(path: &Path) -> Result<(ModelA, LatentPrior)> {
    let blocks = read_checkpoint(path, CheckpointKind::PartA)?;
    part_a_from_blocks(&blocks).map_err(|kind| CliError::Checkpoint { path: path.to_path_buf(), kind })
}

pub fn encode_part_b(model: &ModelB) -> Vec<u8> {
    let mut phi = Block::network(b"PHIN", model.phi_spec(), None);
    phi.flags = u8::from(model.residual());
    encode(CheckpointKind::PartB, &[Block::network(b"HYPB", model.hyper_spec(), Some(model.hyper())), phi])
}

fn part_b_from_blocks(blocks: &[Block]) -> Result<ModelB, CheckpointError> {
    let hyp = find(blocks, b"HYPB")?;
    let phi = find(blocks, b"PHIN")?;
    let hyp_spec = hyp.spec()?;
    ModelB::from_parts(hyp_spec.clone(), hyp.params(&hyp_spec)?, phi.spec()?, phi.flags & 1 == 1)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))
}

pub fn save_part_b(path: &Path, model: &ModelB) -> Result<()> {
    write_file(path, &encode_part_b(model))
}

pub fn load_part_b(path: &Path) -> Result<ModelB> {
    let blocks = read_checkpoint(path, CheckpointKind::PartB)?;
    part_b_from_blocks(&blocks).map_err(|kind| CliError::Checkpoint { path: path.to_path_buf(), kind })
}
