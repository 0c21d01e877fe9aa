use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn atlas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlas"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn wt_on_icosphere() {
    let tmp = tempfile::tempdir().unwrap();
    let ico = fixture("icosphere.obj");
    let o = atlas(tmp.path(), &["wt", ico.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("WT 1.000000"));
    let csv = fs::read_to_string(tmp.path().join("out/wt.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("mesh,wt,rays,passed,degenerate,unresolved"));
    assert!(csv.lines().nth(1).unwrap().starts_with("icosphere,1.00000000e0,100000,100000,"));
}

#[test]
fn wt_records_one_row_per_ray() {
    let tmp = tempfile::tempdir().unwrap();
    let ico = fixture("icosphere.obj");
    let o = atlas(
        tmp.path(),
        &["wt", ico.to_str().unwrap(), "--records", "rays.csv", "--set", "wt_rays=50"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rays = fs::read_to_string(tmp.path().join("rays.csv")).unwrap();
    assert_eq!(rays.lines().count(), 51);
    assert!(rays.lines().skip(1).all(|l| l.ends_with(",1")));
}

#[test]
fn eval_rec_identical_dirs_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("clouds");
    fs::create_dir_all(&data).unwrap();
    fs::write(data.join("a.xyz"), "0 0 0\n1 0 0\n0 1 0\n").unwrap();
    fs::write(data.join("b.xyz"), "0.5 0.5 0.5\n-1 2 0.25\n").unwrap();
    let o = atlas(tmp.path(), &["eval-rec", "--gen", "clouds", "--reference", "clouds"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/eval_rec.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines, vec!["name,cd,emd", "a,0.00000000e0,0.00000000e0", "b,0.00000000e0,0.00000000e0"]);
}

#[test]
fn eval_gen_self_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(
        tmp.path(),
        &["synth", "--set", "shapes=[\"sphere\",\"box\"]", "--set", "clouds_per_shape=2", "--set", "points=64"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = atlas(tmp.path(), &["eval-gen", "--gen", "data", "--reference", "data"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/eval_gen.csv")).unwrap();
    assert_eq!(
        csv.lines().collect::<Vec<_>>(),
        vec![
            "metric,value",
            "jsd,0.00000000e0",
            "mmd_cd,0.00000000e0",
            "cov_cd,1.00000000e0",
            "mmd_emd,0.00000000e0",
            "cov_emd,1.00000000e0"
        ]
    );
}

#[test]
fn train_b_needs_part_a() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(tmp.path(), &["train-b"]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).contains("run train-a first"), "{}", stderr(&o));
}

#[test]
fn mesh_needs_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(tmp.path(), &["mesh"]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn config_errors_are_listed_together() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "colour = 1\nb_k = \"x\"\nmesh_mode = \"blob\"\n").unwrap();
    let o = atlas(tmp.path(), &["--config", "bad.toml", "synth"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("unknown key 'colour'"), "{err}");
    assert!(err.contains("b_k"), "{err}");
    assert!(err.contains("blob"), "{err}");
}

#[test]
fn help_lists_every_key_with_default() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(tmp.path(), &["--help"]);
    assert!(o.status.success());
    let help = stdout(&o);
    for (key, _) in atlas_cli::config::KEYS {
        assert!(help.contains(&format!("  {key} = ")), "{key} missing from --help");
    }
}

#[test]
fn dump_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "b_lambda = 0.0\nshapes = [\"box\"]\nweld_epsilon = 0.01\n").unwrap();
    let first = atlas(tmp.path(), &["--config", "c.toml", "--set", "wt_rays=123", "--dump-config"]);
    assert!(first.status.success(), "{}", stderr(&first));
    fs::write(tmp.path().join("dumped.toml"), first.stdout.clone()).unwrap();
    let second = atlas(tmp.path(), &["--config", "dumped.toml", "--dump-config"]);
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).contains("wt_rays = 123"));
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["synth", "--set", "shapes=[\"torus\",\"cylinder\"]", "--set", "points=100"];
    assert!(atlas(a.path(), &args).status.success());
    assert!(atlas(b.path(), &args).status.success());
    let names: Vec<_> = fs::read_dir(a.path().join("data")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 8);
    for n in names {
        let x = fs::read(a.path().join("data").join(&n)).unwrap();
        let y = fs::read(b.path().join("data").join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn parse_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir_all(tmp.path().join("g")).unwrap();
    fs::write(tmp.path().join("g/a.xyz"), "0 0 0\n1 1 1\n2 oops 2\n").unwrap();
    let o = atlas(tmp.path(), &["eval-rec", "--gen", "g", "--reference", "g"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("a.xyz:3:"), "{}", stderr(&o));
}

#[test]
fn no_command_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(atlas(tmp.path(), &[]).status.code(), Some(2));
}
