use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mimetic-swe"));
    c.env("RUST_LOG", "warn");
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("mswe-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn metric(m: &Value, name: &str) -> f64 {
    m["metrics"].as_array().unwrap().iter().find(|x| x["name"] == name).unwrap()["value"].as_f64().unwrap()
}

#[test]
fn fplane_run_passes_and_writes_a_manifest() {
    let out = scratch("fplane");
    let o = run(&["run", "fplane-steady", "--seed", "7"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert!(metric(&m, "steadiness_error") < 1e-12);
    assert_eq!(m["passed"], true);
    assert_eq!(m["config"]["seed"], "7");
    assert_eq!(m["meshes"][0]["sha256"].as_str().unwrap().len(), 64);
    for f in ["metrics.csv", "diagnostics.csv", "snapshots/initial.vtk", "snapshots/final.vtk"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn commuting_suite_passes_on_periodic_mesh() {
    let out = scratch("commuting");
    let o = run(&["verify", "commuting", "--mesh", "periodic:4", "--samples", "20"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn rossby_sizes_give_third_order_slope() {
    let out = scratch("rossby");
    let o = run(&["run", "rossby", "--sizes", "8,16"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let slope = metric(&manifest(&out), "convergence_slope");
    assert!((slope - 3.0).abs() <= 0.3, "slope {slope}");
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn usage_errors_exit_2() {
    let out = scratch("usage");
    for args in [
        vec!["run", "bogus"],
        vec!["run", "rossby", "--mesh", "periodic:4"],
        vec!["run", "kelvin", "--set", "nonsense"],
        vec!["verify", "commuting", "--mesh", "hexagon:3"],
        vec!["verify", "census", "--seed", "3"],
        vec!["run", "fplane-steady", "--config", "/nonexistent/config.txt"],
    ] {
        let o = run(&args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn threshold_failure_names_the_metric() {
    let out = scratch("census");
    let o = run(&["verify", "census", "--mesh", "cylinder:6,2"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold failed: cylinder:6,2_s_minus_2v"));
    assert_eq!(manifest(&out)["passed"], false);
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn identical_invocations_give_identical_csv() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for d in [&a, &b] {
        let o = bin().args(["--threads", "1", "run", "fplane-steady", "--seed", "11", "--set", "steps=20", "--out"]).arg(d).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["metrics.csv", "diagnostics.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    std::fs::remove_dir_all(&a).unwrap();
    std::fs::remove_dir_all(&b).unwrap();
}

#[test]
fn config_file_and_matrix_dump() {
    let out = scratch("config");
    std::fs::create_dir_all(&out).unwrap();
    let cfg = out.join("kelvin.cfg");
    std::fs::write(&cfg, "# short run\nt_end = 0.1\nsnapshot_every = 5\n").unwrap();
    let o = bin().args(["run", "kelvin", "--mesh", "disk:4", "--dump-matrices", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["config"]["t_end"], "0.1");
    assert!(out.join("matrices/M_S.mtx").is_file());
    assert!(out.join("snapshots/step10.vtk").is_file());
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn output_root_comes_from_the_environment() {
    let root = scratch("env");
    let o = bin().env("MIMETIC_SWE_OUT", &root).args(["verify", "steady", "--mesh", "plane:3", "--steps", "5"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(root.join("verify-steady/manifest.json").is_file());
    std::fs::remove_dir_all(&root).unwrap();
}

#[test]
fn mesh_generate_convert_validate() {
    let dir = scratch("mesh");
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.mesh"), dir.join("b.mesh"));
    assert!(bin().args(["mesh", "generate", "cylinder:6,2", "-o"]).arg(&a).status().unwrap().success());
    assert!(bin().args(["mesh", "convert"]).arg(&a).arg(&b).status().unwrap().success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = bin().args(["mesh", "validate"]).arg(&b).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("cells: 24") && text.contains("boundary edges: 12"), "{text}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn spectrum_reports_the_mode_census() {
    let out = scratch("spectrum");
    let o = run(&["spectrum", "--mesh", "periodic:2"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(metric(&manifest(&out), "periodic:2:zero_modes"), 24.0);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("pair,mesh,quantity,value\n"));
    std::fs::remove_dir_all(&out).unwrap();
}
