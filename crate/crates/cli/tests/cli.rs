use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nslift"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
[grid]
n_space = [9, 9, 9]
t_final = 0.5
n_time = 5

[physics]
mu = 0.5
tau = 1.0

[omega]
theta = 0.5
alpha = 0.5

[iteration]
lambda = 0.5
max_iters = 4

[sweep]
seed = 3
probes = 1
symbol_points = 10

[output]
dir = "out"
"#;

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn theta_out_of_range_exits_with_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &SMALL.replace("theta = 0.5", "theta = 1.5"));
    let out = bin().args(["bounds", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < theta < 1"));
}

#[test]
fn unknown_stage_and_zero_threads_are_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL);
    let out = bin().args(["all", "--stages", "bounds,plot", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["bounds", "--threads", "0", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_without_run_outputs_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL);
    let out = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn zero_forcing_pipeline_writes_a_hashed_manifest() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL);
    let out_dir = d.path().join("elsewhere");
    let out = bin()
        .args(["all", "--stages", "symbol-check,bounds,run,verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let m = manifest(&out_dir);
    assert_eq!(m["stages"].as_array().unwrap().len(), 4);
    for a in m["artifacts"].as_array().unwrap() {
        let bytes = std::fs::read(out_dir.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), nslift_cli::pipeline::sha256_hex(&bytes));
    }
    let iters = std::fs::read_to_string(out_dir.join("iterations.csv")).unwrap();
    assert_eq!(iters.lines().next().unwrap(), "iter,sup_norm,holder_quotient,change,admissible");
    assert_eq!(iters.lines().count(), 2);
    let res: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("residuals.json")).unwrap()).unwrap();
    for key in ["div_sup", "div_l2", "momentum_sup", "momentum_l2", "fixed_point_defect", "boundary_jump", "margin", "grid"] {
        assert!(!res["report"][key].is_null(), "missing {key}");
    }
    assert_eq!(res["report"]["momentum_sup"], serde_json::json!([0.0, 0.0, 0.0]));
    assert!(out_dir.join("fields/h1_9.bin").exists() && out_dir.join("fields/h2_1.json").exists());
}

#[test]
fn same_config_and_seed_give_identical_reports() {
    let d = tempfile::tempdir().unwrap();
    let forced = format!(
        "{SMALL}\n[forcing]\nkind = \"polynomial_bump\"\ncenter = [0.5, 0.5, 0.5]\nradius = 0.3\namplitude = [0.01, 0.0, -0.01]\n"
    );
    let cfg = write_config(d.path(), &forced);
    let mut hashes = Vec::new();
    for run in ["a", "b"] {
        let o = d.path().join(run);
        let out = bin().args(["all", "--stages", "symbol-check,bounds,run,verify", "--config"]).arg(&cfg).arg("--out").arg(&o).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        hashes.push(manifest(&o)["artifacts"].clone());
    }
    assert_eq!(hashes[0], hashes[1]);
    let other = d.path().join("c");
    bin().args(["symbol-check", "--seed", "99", "--config"]).arg(&cfg).arg("--out").arg(&other).output().unwrap();
    let a = std::fs::read(d.path().join("a/symbol_check.json")).unwrap();
    let c = std::fs::read(other.join("symbol_check.json")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn symbol_check_reads_frequencies_from_csv() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("xi.csv"), "xi0,xi1,xi2,xi3\n0.5,1.0,0.0,0.0\n-2.0,0.3,-0.7,1.1\n1.0,0.0,0.0,0.0\n").unwrap();
    let cfg = write_config(d.path(), &SMALL.replace("symbol_points = 10", "symbol_csv = \"xi.csv\""));
    let out = bin().args(["symbol-check", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("out/symbol_check.json")).unwrap()).unwrap();
    let pts = r["points"].as_array().unwrap();
    assert_eq!(pts.len(), 3);
    assert_eq!(pts[0]["rank"], 46);
    assert_eq!(pts[0]["residual_eta"].as_array().unwrap().len(), 9);
    // Spatially zero frequency: reported, closed forms refused, not asserted.
    assert!(pts[2]["residual_Y1"].is_null());
}

#[test]
fn shipped_configs_parse() {
    for name in ["desk.toml", "zero.toml"] {
        nslift_cli::RunConfig::load(&repo_config(name)).unwrap();
    }
}
