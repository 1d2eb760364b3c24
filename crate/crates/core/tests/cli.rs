use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gaugelab");

const HOLONOMY: &str = r#"
task = "holonomy"

[domain]
outer = { kind = "circle", center = [0.0, 0.0], radius = 1.0 }
obstacles = [{ kind = "circle", center = [0.3, 0.1], radius = 0.25 }]

[potential]
name = "ab_vortex"
alpha = 0.5
center = [0.3, 0.1]

[path]
kind = "generator_loops"
base_s = 0.0
"#;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env("GAUGELAB_THREADS", "2").output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn holonomy_run_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "h.toml", HOLONOMY);
    let mut results = vec![];
    for out in ["a", "b"] {
        let o = run(&["run", &cfg, "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        results.push(std::fs::read(tmp.path().join(out).join("holonomy.json")).unwrap());
        let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join(out).join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["threads"], 2);
    }
    assert_eq!(results[0], results[1]);
    let v: serde_json::Value = serde_json::from_slice(&results[0]).unwrap();
    let h = &v["holonomies"][0][0][0];
    assert!((h[0].as_f64().unwrap() + 1.0).abs() < 1e-8, "{v}");
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &HOLONOMY.replace("alpha = 0.5", "alpha = 0.5\nflux = 1.0"));
    let o = run(&["validate-config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("flux"));
    let good = write(tmp.path(), "good.toml", HOLONOMY);
    assert_eq!(run(&["validate-config", &good], tmp.path()).status.code(), Some(0));
}

#[test]
fn coarse_grid_is_a_numerical_guard() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
task = "dtn"

[domain]
outer = { kind = "circle", center = [0.0, 0.0], radius = 1.0 }
obstacles = [{ kind = "circle", center = [0.3, 0.1], radius = 0.25 }]

[potential]
name = "zero"
m = 1

[numerics]
h_grid = 0.5
"#;
    let cfg = write(tmp.path(), "coarse.toml", body);
    assert_eq!(run(&["run", &cfg], tmp.path()).status.code(), Some(3));
}

#[test]
fn missing_files_exit_with_io_status() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "no-such-file.toml"], tmp.path()).status.code(), Some(1));
}

#[test]
fn emit_plotdata_reads_the_kind_or_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let ray = write(tmp.path(), "ray.json", r#"{"kind": "broken_ray", "vertices": [[-1.0, 0.0], [0.0, 0.5], [1.0, 0.0]]}"#);
    let o = run(&["emit-plotdata", &ray], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 4);
    let other = write(tmp.path(), "other.json", r#"{"kind": "spectrum"}"#);
    assert_eq!(run(&["emit-plotdata", &other], tmp.path()).status.code(), Some(2));
}
