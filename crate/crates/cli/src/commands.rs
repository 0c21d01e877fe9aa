use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use atlas_core::atlas::{
    adaptive_fill, assemble_mesh, discrete_atlas, soup_patches, train_part_b, AssembleConfig,
    AssemblyMode, ModelB,
};
use atlas_core::hypermodel::{
    interpolate, train_part_a, Embedding, LatentPrior, ModelA, NORMALIZED_RADIUS,
};
use atlas_core::metrics::{chamfer, emd, jsd, mmd_and_cov, CloudSet, DistanceKind};
use atlas_core::synth::SyntheticShape;
use atlas_core::watertight::watertightness_with;
use atlas_core::PointCloud;
use clap::Subcommand;

use crate::checkpoint::{load_part_a, load_part_b, save_part_a, save_part_b};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::formats::{
    cloud_files, load_cloud_auto, load_mesh_auto, save_cloud, save_mesh, write_text, CloudFormat,
    MeshFormat,
};

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Sample synthetic shapes into `data_dir`.
    Synth,
    /// Train the Part A autoencoder on the clouds in `data_dir`.
    TrainA,
    /// Train the Part B patch network against a trained Part A model.
    TrainB,
    /// Encode and decode each input cloud.
    Reconstruct {
        /// Directory of clouds to process instead of `data_dir`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Assemble a mesh for each input cloud.
    Mesh {
        /// closed or soup; overrides `mesh_mode`.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Also write each soup patch as its own OBJ with a JSON sidecar.
        #[arg(long)]
        dump_patches: bool,
    },
    /// Sample embeddings from the fitted prior and mesh them.
    Generate {
        /// Overrides `generate_count`.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Mesh a linear path between the embeddings of two clouds.
    Interpolate {
        from: PathBuf,
        to: PathBuf,
        /// Overrides `interpolate_steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Build a soup and add patches where it leaves gaps.
    Fill {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Estimate the watertightness of mesh files.
    Wt {
        #[arg(required = true)]
        meshes: Vec<PathBuf>,
        /// Write one CSV row per ray here.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Summary CSV path; defaults to `out_dir/wt.csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Chamfer and EMD between clouds with matching file names.
    EvalRec {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// JSD, MMD and COV between two sets of clouds.
    EvalGen {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Fit the fixed-patch atlas baseline to each input cloud.
    BaselineAtlas {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// A number with 9 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn say(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

struct Input {
    name: String,
    cloud: PointCloud,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn prepare(cloud: PointCloud, cfg: &Config) -> PointCloud {
    if cfg.normalize {
        cloud.normalized(NORMALIZED_RADIUS)
    } else {
        cloud
    }
}

fn load_inputs(dir: &Path, cfg: &Config) -> Result<Vec<Input>> {
    let files = cloud_files(dir)?;
    if files.is_empty() {
        return Err(CliError::State(format!(
            "no point clouds in {}; run synth first or pass --input",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|f| Ok(Input { name: stem(f), cloud: prepare(load_cloud_auto(f)?, cfg) }))
        .collect()
}

fn dataset(cfg: &Config) -> Result<CloudSet> {
    let inputs = load_inputs(&cfg.data_dir, cfg)?;
    Ok(CloudSet::new(inputs.into_iter().map(|i| i.cloud).collect())?)
}

fn require(path: &Path, what: &str, producer: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::State(format!(
            "no {what} checkpoint at {}; run {producer} first",
            path.display()
        )))
    }
}

fn models(cfg: &Config) -> Result<(ModelA, LatentPrior, ModelB)> {
    let a_path = cfg.part_a_checkpoint();
    let b_path = cfg.part_b_checkpoint();
    require(&a_path, "Part A", "train-a")?;
    require(&b_path, "Part B", "train-b")?;
    let (a, prior) = load_part_a(&a_path)?;
    let b = load_part_b(&b_path)?;
    if b.latent_dim() != a.latent_dim() {
        return Err(CliError::State(format!(
            "Part B expects {}-dimensional embeddings, Part A produces {}",
            b.latent_dim(),
            a.latent_dim()
        )));
    }
    Ok((a, prior, b))
}

fn input_dir<'a>(input: &'a Option<PathBuf>, cfg: &'a Config) -> &'a Path {
    input.as_deref().unwrap_or(&cfg.data_dir)
}

pub fn run(command: &Command, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Synth => synth(cfg, out),
        Command::TrainA => train_a(cfg, out),
        Command::TrainB => train_b(cfg, out),
        Command::Reconstruct { input } => reconstruct(input_dir(input, cfg), cfg, out),
        Command::Mesh { mode, input, dump_patches } => {
            let mut mesh_cfg = cfg.assemble();
            if let Some(m) = mode {
                mesh_cfg.mode = m.parse()?;
            }
            mesh(input_dir(input, cfg), &mesh_cfg, *dump_patches, cfg, out)
        }
        Command::Generate { count } => generate(count.unwrap_or(cfg.generate_count), cfg, out),
        Command::Interpolate { from, to, steps } => {
            let steps = steps.unwrap_or(cfg.interpolate_steps);
            if steps < 2 {
                return Err(CliError::Usage("--steps must be at least 2".into()));
            }
            interpolate_cmd(from, to, steps, cfg, out)
        }
        Command::Fill { input } => fill(input_dir(input, cfg), cfg, out),
        Command::Wt { meshes, records, csv } => wt(meshes, records.as_deref(), csv.as_deref(), cfg, out),
        Command::EvalRec { gen, reference } => eval_rec(gen, reference, cfg, out),
        Command::EvalGen { gen, reference } => eval_gen(gen, reference, cfg, out),
        Command::BaselineAtlas { input } => baseline(input_dir(input, cfg), cfg, out),
    }
}

fn synth(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let mut written = 0;
    for (si, name) in cfg.shapes.iter().enumerate() {
        let shape = SyntheticShape::from_name(name)?;
        for i in 0..cfg.clouds_per_shape {
            let seed = cfg.synth_seed.wrapping_add((si * cfg.clouds_per_shape + i) as u64);
            let cloud = prepare(shape.sample(cfg.points, seed)?, cfg);
            let path = cfg.data_dir.join(format!("{}_{i:03}.xyz", shape.name()));
            save_cloud(&cloud, &path, CloudFormat::Xyz)?;
            written += 1;
        }
    }
    say(out, &format!("wrote {written} clouds to {}", cfg.data_dir.display()))
}

fn train_a(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let data = dataset(cfg)?;
    let trained = train_part_a(&data, &cfg.train_a())?;
    save_part_a(&cfg.part_a_checkpoint(), &trained.model, &trained.prior)?;
    let r = &trained.report;
    let mut log = String::from("epoch,loss,best_loss\n");
    for (e, (l, b)) in r.epoch_losses.iter().zip(&r.best_losses).enumerate() {
        let _ = writeln!(log, "{e},{},{}", num(*l), num(*b));
    }
    write_text(&cfg.out_dir.join("train_a_log.csv"), &log)?;
    say(
        out,
        &format!(
            "Part A: {} clouds, loss {} -> {} (best {} at epoch {})",
            data.len(),
            num(r.initial_loss()),
            num(r.final_loss()),
            num(r.best_losses.last().copied().unwrap_or(f64::NAN)),
            r.best_epoch
        ),
    )
}

fn train_b(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let a_path = cfg.part_a_checkpoint();
    require(&a_path, "Part A", "train-a")?;
    let (a, _) = load_part_a(&a_path)?;
    let data = dataset(cfg)?;
    let trained = train_part_b(&a, &data, &cfg.train_b())?;
    save_part_b(&cfg.part_b_checkpoint(), &trained.model)?;
    let r = &trained.report;
    let mut log = String::from("epoch,loss,chamfer,edge\n");
    for e in 0..r.epoch_losses.len() {
        let _ = writeln!(
            log,
            "{e},{},{},{}",
            num(r.epoch_losses[e]),
            num(r.epoch_chamfer[e]),
            num(r.epoch_edge[e])
        );
    }
    write_text(&cfg.out_dir.join("train_b_log.csv"), &log)?;
    say(out, &format!("Part B: loss {} -> {}", num(r.initial_loss()), num(r.final_loss())))
}

fn reconstruct(dir: &Path, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let a_path = cfg.part_a_checkpoint();
    require(&a_path, "Part A", "train-a")?;
    let (a, _) = load_part_a(&a_path)?;
    let mut csv = String::from("name,cd\n");
    for input in load_inputs(dir, cfg)? {
        let rec = a.reconstruct(&input.cloud, cfg.reconstruct_points, cfg.mesh_seed)?;
        save_cloud(&rec, &cfg.out_dir.join("recon").join(format!("{}.xyz", input.name)), CloudFormat::Xyz)?;
        let _ = writeln!(csv, "{},{}", input.name, num(chamfer(&rec, &input.cloud)?));
    }
    write_text(&cfg.out_dir.join("reconstruct.csv"), &csv)?;
    say(out, &csv)
}

fn mesh(
    dir: &Path,
    mesh_cfg: &AssembleConfig,
    dump_patches: bool,
    cfg: &Config,
    out: &mut dyn Write,
) -> Result<()> {
    let (a, _, b) = models(cfg)?;
    let mut csv = String::from("name,mode,vertices,faces,euler,closed_manifold\n");
    for input in load_inputs(dir, cfg)? {
        let z = a.encode(&input.cloud);
        let m = assemble_mesh(&a, &b, &z, mesh_cfg)?;
        save_mesh(&m, &cfg.out_dir.join("mesh").join(format!("{}.obj", input.name)), MeshFormat::Obj)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            input.name,
            mesh_cfg.mode.name(),
            m.vertices().len(),
            m.faces().len(),
            m.euler_characteristic(),
            m.is_closed_manifold()
        );
        if dump_patches {
            dump_patch_files(&a, &b, &z, mesh_cfg, &input.name, cfg)?;
        }
    }
    write_text(&cfg.out_dir.join("mesh.csv"), &csv)?;
    say(out, &csv)
}

fn dump_patch_files(
    a: &ModelA,
    b: &ModelB,
    z: &Embedding,
    mesh_cfg: &AssembleConfig,
    name: &str,
    cfg: &Config,
) -> Result<()> {
    let dir = cfg.out_dir.join("patches").join(name);
    let soup_cfg = AssembleConfig { mode: AssemblyMode::Soup, ..mesh_cfg.clone() };
    for (i, patch) in soup_patches(a, b, z, &soup_cfg)?.iter().enumerate() {
        save_mesh(&patch.mesh, &dir.join(format!("patch_{i:03}.obj")), MeshFormat::Obj)?;
        let sidecar = serde_json::json!({
            "shape": name,
            "index": i,
            "condition_point": [patch.p.x, patch.p.y, patch.p.z],
            "resolution": patch.resolution,
        });
        let text = serde_json::to_string_pretty(&sidecar).expect("json value serializes");
        write_text(&dir.join(format!("patch_{i:03}.json")), &text)?;
    }
    Ok(())
}

fn generate(count: usize, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let (a, prior, b) = models(cfg)?;
    if !prior.is_fitted() {
        return Err(CliError::State("Part A checkpoint has no fitted latent prior".into()));
    }
    let dir = cfg.out_dir.join("generated");
    let mesh_cfg = cfg.assemble();
    for i in 0..count {
        let z = prior.sample(cfg.generate_seed.wrapping_add(i as u64))?;
        let cloud = a.decode(&z, cfg.reconstruct_points, cfg.mesh_seed)?;
        save_cloud(&cloud, &dir.join(format!("gen_{i:03}.xyz")), CloudFormat::Xyz)?;
        let m = assemble_mesh(&a, &b, &z, &mesh_cfg)?;
        save_mesh(&m, &dir.join(format!("gen_{i:03}.obj")), MeshFormat::Obj)?;
    }
    say(out, &format!("wrote {count} generated shapes to {}", dir.display()))
}

fn interpolate_cmd(from: &Path, to: &Path, steps: usize, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let (a, _, b) = models(cfg)?;
    let z0 = a.encode(&prepare(load_cloud_auto(from)?, cfg));
    let z1 = a.encode(&prepare(load_cloud_auto(to)?, cfg));
    let dir = cfg.out_dir.join("interp");
    let mesh_cfg = cfg.assemble();
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let z = interpolate(&z0, &z1, t)?;
        let cloud = a.decode(&z, cfg.reconstruct_points, cfg.mesh_seed)?;
        save_cloud(&cloud, &dir.join(format!("step_{k:03}.xyz")), CloudFormat::Xyz)?;
        let m = assemble_mesh(&a, &b, &z, &mesh_cfg)?;
        save_mesh(&m, &dir.join(format!("step_{k:03}.obj")), MeshFormat::Obj)?;
    }
    say(out, &format!("wrote {steps} interpolation steps to {}", dir.display()))
}

fn fill(dir: &Path, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let (a, _, b) = models(cfg)?;
    let soup_cfg = AssembleConfig { mode: AssemblyMode::Soup, ..cfg.assemble() };
    let fill_cfg = cfg.fill();
    let mut csv = String::from("name,added,max_gap,vertices,faces\n");
    for input in load_inputs(dir, cfg)? {
        let z = a.encode(&input.cloud);
        let soup = assemble_mesh(&a, &b, &z, &soup_cfg)?;
        let report = adaptive_fill(&soup, &a, &b, &z, &fill_cfg)?;
        save_mesh(&report.mesh, &cfg.out_dir.join("fill").join(format!("{}.obj", input.name)), MeshFormat::Obj)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            input.name,
            report.added.len(),
            num(report.max_gap),
            report.mesh.vertices().len(),
            report.mesh.faces().len()
        );
    }
    write_text(&cfg.out_dir.join("fill.csv"), &csv)?;
    say(out, &csv)
}

fn wt(
    meshes: &[PathBuf],
    records: Option<&Path>,
    csv_path: Option<&Path>,
    cfg: &Config,
    out: &mut dyn Write,
) -> Result<()> {
    let wt_cfg = cfg.wt();
    let mut summary = String::from("mesh,wt,rays,passed,degenerate,unresolved\n");
    let mut rays = String::from("mesh,sample_x,sample_y,sample_z,face,crossings,attempts,passed\n");
    for path in meshes {
        let m = load_mesh_auto(path)?;
        let report = watertightness_with(&m, &wt_cfg, records.is_some())?;
        let name = path.display().to_string();
        if meshes.len() == 1 {
            say(out, &format!("WT {:.6}", report.ratio))?;
        } else {
            say(out, &format!("WT {:.6}  {name}", report.ratio))?;
        }
        say(
            out,
            &format!(
                "  rays {}, degenerate {}, unresolved {}",
                report.rays, report.degenerate_rays, report.unresolved_rays
            ),
        )?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{}",
            stem(path),
            num(report.ratio),
            report.rays,
            report.passed,
            report.degenerate_rays,
            report.unresolved_rays
        );
        for r in &report.records {
            let _ = writeln!(
                rays,
                "{},{},{},{},{},{},{},{}",
                stem(path),
                num(r.sample.x),
                num(r.sample.y),
                num(r.sample.z),
                r.face,
                r.crossings,
                r.attempts,
                u8::from(r.passed)
            );
        }
    }
    let default_csv = cfg.out_dir.join("wt.csv");
    write_text(csv_path.unwrap_or(&default_csv), &summary)?;
    if let Some(p) = records {
        write_text(p, &rays)?;
    }
    Ok(())
}

fn named_clouds(dir: &Path) -> Result<Vec<(String, PointCloud)>> {
    let files = cloud_files(dir)?;
    if files.is_empty() {
        return Err(CliError::State(format!("no point clouds in {}", dir.display())));
    }
    files.iter().map(|f| Ok((stem(f), load_cloud_auto(f)?))).collect()
}

fn eval_rec(gen: &Path, reference: &Path, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let refs = named_clouds(reference)?;
    let mut csv = String::from("name,cd,emd\n");
    let mut matched = 0;
    for (name, g) in named_clouds(gen)? {
        let Some((_, r)) = refs.iter().find(|(n, _)| *n == name) else {
            continue;
        };
        let _ = writeln!(csv, "{name},{},{}", num(chamfer(&g, r)?), num(emd(&g, r)?));
        matched += 1;
    }
    if matched == 0 {
        return Err(CliError::State(format!(
            "no file names in {} match {}",
            gen.display(),
            reference.display()
        )));
    }
    write_text(&cfg.out_dir.join("eval_rec.csv"), &csv)?;
    say(out, &csv)
}

fn eval_gen(gen: &Path, reference: &Path, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let set = |dir| -> Result<CloudSet> {
        Ok(CloudSet::new(named_clouds(dir)?.into_iter().map(|(_, c)| c).collect())?)
    };
    let (g, r) = (set(gen)?, set(reference)?);
    let j = jsd(&g, &r, cfg.jsd_grid);
    let (mmd_cd, cov_cd) = mmd_and_cov(&g, &r, DistanceKind::Cd)?;
    let (mmd_emd, cov_emd) = mmd_and_cov(&g, &r, DistanceKind::Emd)?;
    let mut csv = String::from("metric,value\n");
    for (name, v) in
        [("jsd", j.value), ("mmd_cd", mmd_cd), ("cov_cd", cov_cd), ("mmd_emd", mmd_emd), ("cov_emd", cov_emd)]
    {
        let _ = writeln!(csv, "{name},{}", num(v));
    }
    write_text(&cfg.out_dir.join("eval_gen.csv"), &csv)?;
    say(out, &csv)
}

fn baseline(dir: &Path, cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let atlas_cfg = cfg.discrete_atlas();
    let base = cfg.out_dir.join("baseline");
    let mut csv = String::from("name,initial_loss,final_loss,vertices,faces\n");
    for input in load_inputs(dir, cfg)? {
        let fit = discrete_atlas(&input.cloud, &atlas_cfg)?;
        save_mesh(&fit.soup, &base.join(format!("{}.obj", input.name)), MeshFormat::Obj)?;
        let mut log = String::from("epoch,loss\n");
        for (e, l) in fit.epoch_losses.iter().enumerate() {
            let _ = writeln!(log, "{e},{}", num(*l));
        }
        write_text(&base.join(format!("{}_log.csv", input.name)), &log)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            input.name,
            num(fit.epoch_losses[0]),
            num(*fit.epoch_losses.last().expect("at least one epoch")),
            fit.soup.vertices().len(),
            fit.soup.faces().len()
        );
    }
    write_text(&cfg.out_dir.join("baseline.csv"), &csv)?;
    say(out, &csv)
}
