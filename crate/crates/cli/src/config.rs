//! Pipeline configuration: a flat TOML table with one key per setting.
//!
//! Every key is optional and falls back to the library default. Unknown
//! keys, type mismatches and out-of-range values are all collected and
//! reported together.

use std::path::{Path, PathBuf};

use atlas_core::atlas::{
    AssembleConfig, AssemblyMode, DiscreteAtlasConfig, FillConfig, ModelBConfig, NeighborSource,
    TrainBConfig,
};
use atlas_core::hypermodel::{ModelAConfig, TrainAConfig};
use atlas_core::metrics::{DistanceKind, DEFAULT_JSD_GRID};
use atlas_core::nn::Activation;
use atlas_core::synth::SyntheticShape;
use atlas_core::watertight::{RayOrigin, WtConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::read_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,

    pub shapes: Vec<String>,
    pub clouds_per_shape: usize,
    pub points: usize,
    pub synth_seed: u64,
    pub normalize: bool,

    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub hyper_hidden: Vec<usize>,
    pub target_hidden: Vec<usize>,
    pub activation: String,
    pub a_epochs: usize,
    pub a_batch_size: usize,
    pub a_lr: f64,
    pub a_prior_samples: usize,
    pub a_seed: u64,
    pub a_loss: String,

    pub b_k: usize,
    pub b_lambda: f64,
    pub b_uv_samples: usize,
    pub b_patches: usize,
    pub b_epochs: usize,
    pub b_lr: f64,
    pub b_final_lr_fraction: f64,
    pub b_seed: u64,
    pub b_neighbors: String,
    pub b_hyper_hidden: Vec<usize>,
    pub b_hyper_activation: String,
    pub phi_hidden: Vec<usize>,
    pub phi_activation: String,
    pub phi_residual: bool,

    pub mesh_mode: String,
    pub sphere_resolution: usize,
    pub patch_resolution: usize,
    pub soup_patches: usize,
    pub weld_epsilon: f64,
    pub mesh_seed: u64,
    pub reconstruct_points: usize,
    pub generate_count: usize,
    pub generate_seed: u64,
    pub interpolate_steps: usize,

    pub fill_tau: f64,
    pub fill_max_patches: usize,
    pub fill_reference_points: usize,

    pub wt_rays: usize,
    pub wt_seed: u64,
    pub wt_perturbation: f64,
    pub wt_origin_offset: f64,
    pub wt_max_retries: usize,
    pub wt_origin: String,

    pub jsd_grid: usize,

    pub atlas_k_patches: usize,
    pub atlas_patch_resolution: usize,
    pub atlas_samples_per_patch: usize,
    pub atlas_epochs: usize,
    pub atlas_lr: f64,
    pub atlas_hidden: Vec<usize>,
    pub atlas_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let a = TrainAConfig::default();
        let b = TrainBConfig::default();
        let mesh = AssembleConfig::default();
        let fill = FillConfig::default();
        let wt = WtConfig::default();
        let atlas = DiscreteAtlasConfig::default();
        Self {
            data_dir: "data".into(),
            out_dir: "out".into(),

            shapes: vec!["torus".into()],
            clouds_per_shape: 4,
            points: 2048,
            synth_seed: 0,
            normalize: true,

            latent_dim: a.model.latent_dim,
            encoder_hidden: a.model.encoder_hidden.clone(),
            hyper_hidden: a.model.hyper_hidden.clone(),
            target_hidden: a.model.target_hidden.clone(),
            activation: a.model.activation.name().into(),
            a_epochs: a.epochs,
            a_batch_size: a.batch_size,
            a_lr: a.lr,
            a_prior_samples: a.prior_samples,
            a_seed: a.seed,
            a_loss: loss_name(a.loss).into(),

            b_k: b.k,
            b_lambda: b.lambda,
            b_uv_samples: b.uv_samples,
            b_patches: b.patches,
            b_epochs: b.epochs,
            b_lr: b.lr,
            b_final_lr_fraction: b.final_lr_fraction,
            b_seed: b.seed,
            b_neighbors: b.neighbors.name().into(),
            b_hyper_hidden: b.model.hyper_hidden.clone(),
            b_hyper_activation: b.model.hyper_activation.name().into(),
            phi_hidden: b.model.phi_hidden.clone(),
            phi_activation: b.model.phi_activation.name().into(),
            phi_residual: b.model.residual,

            mesh_mode: mesh.mode.name().into(),
            sphere_resolution: mesh.sphere_resolution,
            patch_resolution: mesh.patch_resolution,
            soup_patches: mesh.patches,
            weld_epsilon: mesh.weld_epsilon,
            mesh_seed: mesh.seed,
            reconstruct_points: 2048,
            generate_count: 4,
            generate_seed: 0,
            interpolate_steps: 5,

            fill_tau: fill.tau,
            fill_max_patches: fill.max_patches,
            fill_reference_points: fill.reference_points,

            wt_rays: wt.rays,
            wt_seed: wt.seed,
            wt_perturbation: wt.perturbation,
            wt_origin_offset: wt.origin_offset,
            wt_max_retries: wt.max_retries,
            wt_origin: origin_name(wt.origin).into(),

            jsd_grid: DEFAULT_JSD_GRID,

            atlas_k_patches: atlas.k_patches,
            atlas_patch_resolution: atlas.patch_resolution,
            atlas_samples_per_patch: atlas.samples_per_patch,
            atlas_epochs: atlas.epochs,
            atlas_lr: atlas.lr,
            atlas_hidden: atlas.hidden.clone(),
            atlas_seed: atlas.seed,
        }
    }
}

/// Every config key with a one-line description, in the order `--help`
/// and `--dump-config` list them.
pub const KEYS: &[(&str, &str)] = &[
    ("data_dir", "directory of input point clouds (written by synth)"),
    ("out_dir", "directory for checkpoints, logs, meshes and metrics"),
    ("shapes", "synthetic shapes: sphere, torus, box, cylinder"),
    ("clouds_per_shape", "clouds sampled per synthetic shape"),
    ("points", "points per synthetic cloud"),
    ("synth_seed", "base seed for synthetic sampling"),
    ("normalize", "center clouds and scale them into the 0.9 ball"),
    ("latent_dim", "embedding size"),
    ("encoder_hidden", "hidden widths of the per-point encoder"),
    ("hyper_hidden", "hidden widths of the Part A hypernetwork"),
    ("target_hidden", "hidden widths of the Part A target network"),
    ("activation", "Part A hidden activation: relu or tanh"),
    ("a_epochs", "Part A training epochs"),
    ("a_batch_size", "Part A clouds per step"),
    ("a_lr", "Part A Adam learning rate"),
    ("a_prior_samples", "sphere samples decoded per cloud and step"),
    ("a_seed", "Part A initialization and shuffling seed"),
    ("a_loss", "Part A reconstruction loss: cd or emd"),
    ("b_k", "neighbors per condition point"),
    ("b_lambda", "weight of the edge-length regularizer"),
    ("b_uv_samples", "random UV samples per patch"),
    ("b_patches", "patches per step"),
    ("b_epochs", "Part B training epochs"),
    ("b_lr", "Part B initial Adam learning rate"),
    ("b_final_lr_fraction", "Part B final learning rate as a fraction of b_lr"),
    ("b_seed", "Part B initialization and sampling seed"),
    ("b_neighbors", "neighborhood source: input or reconstruction"),
    ("b_hyper_hidden", "hidden widths of the Part B hypernetwork"),
    ("b_hyper_activation", "Part B hypernetwork activation: relu or tanh"),
    ("phi_hidden", "hidden widths of the patch network"),
    ("phi_activation", "patch network activation: relu or tanh"),
    ("phi_residual", "patch network outputs an offset from the condition point"),
    ("mesh_mode", "assembly mode: closed or soup"),
    ("sphere_resolution", "quad sphere resolution in closed mode"),
    ("patch_resolution", "UV grid resolution per quad or patch"),
    ("soup_patches", "patches in soup mode"),
    ("weld_epsilon", "soup weld tolerance; 0 leaves the soup unwelded"),
    ("mesh_seed", "seed for soup condition points"),
    ("reconstruct_points", "points decoded by reconstruct"),
    ("generate_count", "shapes sampled by generate"),
    ("generate_seed", "base seed for latent sampling"),
    ("interpolate_steps", "meshes emitted by interpolate, endpoints included"),
    ("fill_tau", "gap tolerance for adaptive fill"),
    ("fill_max_patches", "patch budget for adaptive fill"),
    ("fill_reference_points", "reconstructed points used to find gaps"),
    ("wt_rays", "rays per watertightness estimate"),
    ("wt_seed", "seed for ray sampling"),
    ("wt_perturbation", "largest re-cast rotation in radians for degenerate rays"),
    ("wt_origin_offset", "ray origin distance beyond the bounding sphere, in radii"),
    ("wt_max_retries", "re-casts before a degenerate ray counts as failed"),
    ("wt_origin", "ray origin: exterior or surface"),
    ("jsd_grid", "occupancy grid resolution for JSD"),
    ("atlas_k_patches", "patches of the discrete atlas baseline"),
    ("atlas_patch_resolution", "UV grid resolution of baseline patches"),
    ("atlas_samples_per_patch", "UV samples per baseline patch and step"),
    ("atlas_epochs", "baseline training epochs"),
    ("atlas_lr", "baseline Adam learning rate"),
    ("atlas_hidden", "hidden widths of each baseline patch network"),
    ("atlas_seed", "baseline initialization seed"),
];

fn loss_name(kind: DistanceKind) -> &'static str {
    match kind {
        DistanceKind::Cd => "cd",
        DistanceKind::Emd => "emd",
    }
}

fn origin_name(origin: RayOrigin) -> &'static str {
    match origin {
        RayOrigin::Exterior => "exterior",
        RayOrigin::Surface => "surface",
    }
}

fn default_table() -> toml::Table {
    toml::Table::try_from(Config::default()).expect("default config serializes")
}

/// `key = default  # description` for every key.
pub fn keys_help() -> String {
    let defaults = default_table();
    let mut out = String::from("Config keys (TOML, all optional):\n");
    for (key, desc) in KEYS {
        let value = defaults.get(*key).map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("  {key} = {value}\n      {desc}\n"));
    }
    out
}

/// Splits a `key=value` override. The value is read as a TOML value, or as
/// a bare string when it does not parse as one.
fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{item}' is not of the form key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

impl Config {
    /// Parses TOML text plus `key=value` overrides and validates the result.
    pub fn from_sources(text: &str, overrides: &[String]) -> Result<Self> {
        let mut user: toml::Table = toml::from_str(text)
            .map_err(|e| CliError::Config(vec![format!("not valid TOML: {}", e.message())]))?;
        for item in overrides {
            let (key, value) = parse_override(item)?;
            user.insert(key, value);
        }

        let defaults = default_table();
        let mut errors = Vec::new();
        let mut merged = defaults.clone();
        for (key, value) in &user {
            if !defaults.contains_key(key) {
                errors.push(format!("unknown key '{key}'"));
                continue;
            }
            let mut probe = defaults.clone();
            probe.insert(key.clone(), value.clone());
            match probe.try_into::<Config>() {
                Ok(_) => {
                    merged.insert(key.clone(), value.clone());
                }
                Err(e) => errors.push(format!("{key}: {}", e.message())),
            }
        }
        let cfg: Config = merged.try_into().map_err(|e: toml::de::Error| {
            CliError::Config(vec![e.message().to_string()])
        })?;
        errors.extend(cfg.problems());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Config(errors))
        }
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => read_text(p)?,
            None => String::new(),
        };
        Self::from_sources(&text, overrides)
    }

    /// The config as TOML; parsing it back yields an equal config.
    pub fn dump(&self) -> String {
        let table = toml::Table::try_from(self).expect("config serializes");
        let mut out = String::new();
        for (key, _) in KEYS {
            if let Some(v) = table.get(*key) {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }

    /// Range and enum-name problems, one message per problem.
    fn problems(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };
        for s in &self.shapes {
            check(SyntheticShape::from_name(s).is_ok(), format!("shapes: unknown shape '{s}'"));
        }
        check(!self.shapes.is_empty(), "shapes: list is empty".into());
        check(self.clouds_per_shape > 0, "clouds_per_shape must be > 0".into());
        check(self.points > 0, "points must be > 0".into());
        check(self.latent_dim > 0, "latent_dim must be > 0".into());
        for (key, widths) in [
            ("encoder_hidden", &self.encoder_hidden),
            ("hyper_hidden", &self.hyper_hidden),
            ("target_hidden", &self.target_hidden),
            ("b_hyper_hidden", &self.b_hyper_hidden),
            ("phi_hidden", &self.phi_hidden),
            ("atlas_hidden", &self.atlas_hidden),
        ] {
            check(widths.iter().all(|&w| w > 0), format!("{key}: widths must be > 0"));
        }
        for (key, value) in [
            ("activation", &self.activation),
            ("b_hyper_activation", &self.b_hyper_activation),
            ("phi_activation", &self.phi_activation),
        ] {
            check(
                value.parse::<Activation>().is_ok(),
                format!("{key}: expected relu or tanh, got '{value}'"),
            );
        }
        check(
            matches!(self.a_loss.as_str(), "cd" | "emd"),
            format!("a_loss: expected cd or emd, got '{}'", self.a_loss),
        );
        check(
            self.b_neighbors.parse::<NeighborSource>().is_ok(),
            format!("b_neighbors: expected input or reconstruction, got '{}'", self.b_neighbors),
        );
        check(
            self.mesh_mode.parse::<AssemblyMode>().is_ok(),
            format!("mesh_mode: expected closed or soup, got '{}'", self.mesh_mode),
        );
        check(
            matches!(self.wt_origin.as_str(), "exterior" | "surface"),
            format!("wt_origin: expected exterior or surface, got '{}'", self.wt_origin),
        );
        check(self.a_loss != "emd" || self.a_prior_samples == self.points,
            format!(
                "a_loss = emd needs a_prior_samples ({}) equal to points ({})",
                self.a_prior_samples, self.points
            ),
        );
        if let Some(a) = self.train_a_unchecked() {
            if let Err(e) = a.validate() {
                errors.push(format!("Part A: {e}"));
            }
        }
        if let Some(b) = self.train_b_unchecked() {
            if let Err(e) = b.validate() {
                errors.push(format!("Part B: {e}"));
            }
        }
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errors.push(msg.to_string());
            }
        };
        check(self.sphere_resolution >= 1, "sphere_resolution must be >= 1");
        check(self.patch_resolution >= 2, "patch_resolution must be >= 2");
        check(self.soup_patches > 0, "soup_patches must be > 0");
        check(self.weld_epsilon.is_finite() && self.weld_epsilon >= 0.0, "weld_epsilon must be >= 0");
        check(self.reconstruct_points > 0, "reconstruct_points must be > 0");
        check(self.generate_count > 0, "generate_count must be > 0");
        check(self.interpolate_steps >= 2, "interpolate_steps must be >= 2");
        check(self.fill_tau.is_finite() && self.fill_tau > 0.0, "fill_tau must be > 0");
        check(self.fill_reference_points > 0, "fill_reference_points must be > 0");
        check(self.wt_rays > 0, "wt_rays must be > 0");
        check(
            self.wt_perturbation.is_finite() && self.wt_perturbation >= 0.0,
            "wt_perturbation must be >= 0",
        );
        check(
            self.wt_origin_offset.is_finite() && self.wt_origin_offset > 0.0,
            "wt_origin_offset must be > 0",
        );
        check(self.jsd_grid > 0, "jsd_grid must be > 0");
        check(self.atlas_k_patches > 0, "atlas_k_patches must be > 0");
        check(self.atlas_patch_resolution >= 2, "atlas_patch_resolution must be >= 2");
        check(self.atlas_samples_per_patch > 0, "atlas_samples_per_patch must be > 0");
        check(self.atlas_epochs > 0, "atlas_epochs must be > 0");
        check(self.atlas_lr.is_finite() && self.atlas_lr > 0.0, "atlas_lr must be > 0");
        errors
    }

    fn train_a_unchecked(&self) -> Option<TrainAConfig> {
        Some(TrainAConfig {
            epochs: self.a_epochs,
            batch_size: self.a_batch_size,
            lr: self.a_lr,
            prior_samples: self.a_prior_samples,
            seed: self.a_seed,
            loss: if self.a_loss == "emd" { DistanceKind::Emd } else { DistanceKind::Cd },
            model: ModelAConfig {
                latent_dim: self.latent_dim,
                encoder_hidden: self.encoder_hidden.clone(),
                hyper_hidden: self.hyper_hidden.clone(),
                target_hidden: self.target_hidden.clone(),
                activation: self.activation.parse().ok()?,
            },
        })
    }

    fn train_b_unchecked(&self) -> Option<TrainBConfig> {
        Some(TrainBConfig {
            k: self.b_k,
            lambda: self.b_lambda,
            uv_samples: self.b_uv_samples,
            patches: self.b_patches,
            epochs: self.b_epochs,
            lr: self.b_lr,
            final_lr_fraction: self.b_final_lr_fraction,
            seed: self.b_seed,
            neighbors: self.b_neighbors.parse().ok()?,
            model: ModelBConfig {
                hyper_hidden: self.b_hyper_hidden.clone(),
                hyper_activation: self.b_hyper_activation.parse().ok()?,
                phi_hidden: self.phi_hidden.clone(),
                phi_activation: self.phi_activation.parse().ok()?,
                residual: self.phi_residual,
            },
        })
    }

    // The accessors below assume a validated config.

    pub fn train_a(&self) -> TrainAConfig {
        self.train_a_unchecked().expect("validated config")
    }

    pub fn train_b(&self) -> TrainBConfig {
        self.train_b_unchecked().expect("validated config")
    }

    pub fn assemble(&self) -> AssembleConfig {
        AssembleConfig {
            mode: self.mesh_mode.parse().expect("validated config"),
            sphere_resolution: self.sphere_resolution,
            patch_resolution: self.patch_resolution,
            patches: self.soup_patches,
            weld_epsilon: self.weld_epsilon,
            seed: self.mesh_seed,
        }
    }

    pub fn fill(&self) -> FillConfig {
        FillConfig {
            tau: self.fill_tau,
            max_patches: self.fill_max_patches,
            patch_resolution: self.patch_resolution,
            weld_epsilon: self.weld_epsilon,
            reference_points: self.fill_reference_points,
            seed: self.mesh_seed,
        }
    }

    pub fn wt(&self) -> WtConfig {
        WtConfig {
            rays: self.wt_rays,
            seed: self.wt_seed,
            perturbation: self.wt_perturbation,
            origin_offset: self.wt_origin_offset,
            max_retries: self.wt_max_retries,
            origin: if self.wt_origin == "surface" { RayOrigin::Surface } else { RayOrigin::Exterior },
        }
    }

    pub fn discrete_atlas(&self) -> DiscreteAtlasConfig {
        DiscreteAtlasConfig {
            k_patches: self.atlas_k_patches,
            patch_resolution: self.atlas_patch_resolution,
            samples_per_patch: self.atlas_samples_per_patch,
            epochs: self.atlas_epochs,
            lr: self.atlas_lr,
            hidden: self.atlas_hidden.clone(),
            activation: self.phi_activation.parse().expect("validated config"),
            seed: self.atlas_seed,
        }
    }

    pub fn part_a_checkpoint(&self) -> PathBuf {
        self.out_dir.join("part_a.ckpt")
    }

    pub fn part_b_checkpoint(&self) -> PathBuf {
        self.out_dir.join("part_b.ckpt")
    }
}
