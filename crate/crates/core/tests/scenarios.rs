use mimetic_swe::output::{vtk_string, write_diagnostics, write_metrics};
use mimetic_swe::scenarios::{
    run_beta_tube, run_fplane_steady, run_kelvin, run_rossby_convergence, run_solid_rotation, BetaTubeParams,
    FplaneParams, FplaneSurface, KelvinParams, MeshSpec, RossbyParams, ScenarioConfig, SolidRotationParams,
};
use mimetic_swe::SolverKind;

fn all_zero(r: &mimetic_swe::scenarios::ScenarioResult) {
    for m in &r.metrics {
        assert_eq!(m.value, 0.0, "{} = {}", m.name, m.value);
    }
}

#[test]
fn zero_stream_fplane_is_exactly_steady() {
    let p = FplaneParams { amplitude: 0.0, steps: 5, ..FplaneParams::new(FplaneSurface::Plane, 3) };
    let r = run_fplane_steady(&p).unwrap();
    all_zero(&r);
    assert!(r.passed());
}

#[test]
fn zero_kelvin_wave_gives_zero_metrics() {
    let p = KelvinParams { amplitude: 0.0, t_end: 0.05, mesh: Some(MeshSpec::Disk(4)), ..KelvinParams::default() };
    all_zero(&run_kelvin(&p).unwrap());
}

#[test]
fn zero_solid_rotation_gives_zero_error() {
    let p = SolidRotationParams { amplitude: 0.0, level: 1, days: 0.25, ..SolidRotationParams::default() };
    let r = run_solid_rotation(&p).unwrap();
    all_zero(&r);
}

#[test]
fn short_kelvin_run_conserves() {
    let p = KelvinParams { t_end: 0.5, mesh: Some(MeshSpec::Disk(6)), snapshot_every: 10, ..KelvinParams::default() };
    let r = run_kelvin(&p).unwrap();
    assert!(r.passed(), "{:?}", r.failures());
    assert_eq!(r.fields.as_ref().unwrap().snapshots.len(), 6);
}

#[test]
fn hybridized_fplane_run_is_steady() {
    let p = FplaneParams { steps: 20, solver: SolverKind::Hybridized, ..FplaneParams::new(FplaneSurface::Plane, 5) };
    let r = run_fplane_steady(&p).unwrap();
    assert!(r.metric("steadiness_error").unwrap() < 1e-12);
    assert!(r.passed(), "{:?}", r.failures());
}

#[test]
fn f_sphere_on_a_coarse_mesh_is_steady() {
    let p = FplaneParams { steps: 20, mesh: Some(MeshSpec::Icosa(2)), ..FplaneParams::new(FplaneSurface::Sphere, 8) };
    assert!(run_fplane_steady(&p).unwrap().passed());
}

#[test]
fn beta_tube_with_constant_f_is_steady() {
    let p = BetaTubeParams {
        mesh: Some(MeshSpec::Cylinder(12, 6)),
        steps: 40,
        snapshot_steps: vec![20, 40],
        constant_f: true,
        ..BetaTubeParams::default()
    };
    let r = run_beta_tube(&p).unwrap();
    assert!(r.metric("steadiness_error").unwrap() < 1e-12);
    assert!(r.passed(), "{:?}", r.failures());
}

#[test]
fn short_beta_tube_stays_balanced() {
    let p = BetaTubeParams { mesh: Some(MeshSpec::Cylinder(12, 6)), steps: 50, snapshot_steps: vec![25, 50], ..BetaTubeParams::default() };
    let r = run_beta_tube(&p).unwrap();
    assert!(r.metric("divergence_vorticity_ratio").unwrap() < 10.0 * p.ro);
    assert!(r.passed(), "{:?}", r.failures());
}

#[test]
fn short_rossby_run_reports_every_size() {
    let p = RossbyParams { sizes: vec![4, 8], t_end: 0.4, ..RossbyParams::default() };
    let r = run_rossby_convergence(&p).unwrap();
    for name in ["l2_error_n4", "l2_error_n8", "linf_error_n4", "linf_error_n8", "convergence_slope"] {
        assert!(r.metric(name).unwrap().is_finite(), "{name}");
    }
    assert!(r.metric("l2_error_n8").unwrap() < r.metric("l2_error_n4").unwrap());
    for m in r.metrics.iter().filter(|m| m.name.contains("drift") || m.name.contains("residual")) {
        assert!(m.passed(), "{} = {}", m.name, m.value);
    }
}

#[test]
fn configs_drive_the_runs() {
    let c = ScenarioConfig::parse("# short plane run\nsurface = plane\nseed = 4\nsteps = 10\nsolver = hybrid\nmesh = plane:5\n").unwrap();
    let p = FplaneParams::from_config(&c).unwrap();
    assert_eq!(p.steps, 10);
    assert_eq!(p.solver, SolverKind::Hybridized);
    assert!(run_fplane_steady(&p).unwrap().passed());

    let bad = ScenarioConfig::parse("stepz = 10\n").unwrap();
    assert!(FplaneParams::from_config(&bad).is_err());
    let c = ScenarioConfig::parse("sizes = 4,8\nt_end = 0.1\n").unwrap();
    assert_eq!(RossbyParams::from_config(&c).unwrap().sizes, vec![4, 8]);
}

#[test]
fn results_write_to_csv_and_vtk() {
    let p = FplaneParams { steps: 3, mesh: Some(MeshSpec::Plane(3)), ..FplaneParams::new(FplaneSurface::Plane, 1) };
    let r = run_fplane_steady(&p).unwrap();
    let dir = std::env::temp_dir().join(format!("mswe-scenarios-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    write_diagnostics(&dir.join("diagnostics.csv"), &r.diagnostics).unwrap();
    write_metrics(&dir.join("metrics.csv"), &r.metrics).unwrap();
    let diag = std::fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 1 + r.diagnostics.len());
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.lines().any(|l| l.starts_with("steadiness_error,") && l.ends_with(",true")));
    let fields = r.fields.as_ref().unwrap();
    let vtk = vtk_string(&fields.snapshots[1].state, &fields.ops, "final").unwrap();
    assert!(vtk.contains(&format!("CELLS {} {}", 18, 7 * 18)));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn identical_seeds_give_identical_results() {
    let run = || run_fplane_steady(&FplaneParams { steps: 5, ..FplaneParams::new(FplaneSurface::Plane, 42) }).unwrap();
    let (a, b) = (run(), run());
    let bits = |r: &mimetic_swe::scenarios::ScenarioResult| r.metrics.iter().map(|m| m.value.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}
