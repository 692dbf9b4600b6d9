use crate::manifest::{MeshRecord, RunManifest};
use crate::{Common, MeshAction, Scenario, Suite};
use clap::ValueEnum;
use mimetic_swe::analysis::{
    branch_rows, census_rows, generator_spectrum, lowest_wave_frequency, spurious_branch_probe, write_report,
    ReportRow,
};
use mimetic_swe::mesh::io::{read_mesh, write_native};
use mimetic_swe::output::{write_atomic, write_diagnostics, write_metrics, write_vtk};
use mimetic_swe::scenarios::suites::{self, census_suite, commuting_suite, conservation_suite, steady_suite};
use mimetic_swe::scenarios::{
    run_beta_tube, run_fplane_steady, run_kelvin, run_rossby_convergence, run_solid_rotation, BetaTubeParams,
    FplaneParams, KelvinParams, MeshSpec, Metric, RossbyParams, ScenarioConfig, ScenarioResult, SolidRotationParams,
    Threshold,
};
use mimetic_swe::{ElementPair, Error, Mesh, ModelConfig, OperatorSet, SolverKind};
use std::path::{Path, PathBuf};

pub enum Status {
    Passed,
    Failed(Vec<String>),
}

pub enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Parse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type Outcome = Result<Status, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn name_of(v: impl ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn parse_spec(s: &str) -> Result<MeshSpec, Failure> {
    if !s.contains(':') && Path::new(s).exists() {
        return Ok(MeshSpec::File(PathBuf::from(s)));
    }
    s.parse::<MeshSpec>().map_err(|e| usage(e.to_string()))
}

fn build(spec: &MeshSpec) -> Result<Mesh, Failure> {
    spec.build().map_err(|e| match e {
        Error::Io(io) => usage(format!("{spec}: {io}")),
        other => other.into(),
    })
}

fn load_meshes(specs: &[String], defaults: &[&str]) -> Result<Vec<(String, Mesh)>, Failure> {
    let list: Vec<String> =
        if specs.is_empty() { defaults.iter().map(|s| s.to_string()).collect() } else { specs.to_vec() };
    list.iter()
        .map(|s| {
            let spec = parse_spec(s)?;
            Ok((spec.to_string(), build(&spec)?))
        })
        .collect()
}

fn output_dir(common: &Common, label: &str) -> Result<PathBuf, Failure> {
    let dir = match &common.out {
        Some(d) => d.clone(),
        None => std::env::var_os("MIMETIC_SWE_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from).join(label),
    };
    std::fs::create_dir_all(&dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn fplane_ops(mesh: &Mesh, c2: f64, f: f64) -> Result<(OperatorSet, ModelConfig), Failure> {
    let cfg = ModelConfig::with_coriolis(mesh, c2, 0.1, |_| f)?;
    Ok((OperatorSet::assemble(mesh, &cfg)?, cfg))
}

fn safe_label(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn dump_all(dir: &Path, meshes: &[(String, Mesh)]) -> Result<(), Failure> {
    for (name, mesh) in meshes {
        let (ops, _) = fplane_ops(mesh, 1.0, 1.0)?;
        let d = dir.join("matrices").join(safe_label(name));
        std::fs::create_dir_all(&d)?;
        ops.dump_matrix_market(&d)?;
    }
    Ok(())
}

fn finish(mut manifest: RunManifest, metrics: &[Metric], dir: &Path) -> Outcome {
    write_metrics(&dir.join("metrics.csv"), metrics)?;
    manifest.add_metrics(metrics);
    manifest.write(&dir.join("manifest.json"))?;
    for m in metrics {
        log::info!("{} = {:e} ({}){}", m.name, m.value, m.threshold, if m.passed() { "" } else { "  FAILED" });
    }
    log::info!("results in {}", dir.display());
    Ok(if manifest.passed { Status::Passed } else { Status::Failed(manifest.failed) })
}

pub fn mesh(action: MeshAction) -> Outcome {
    match action {
        MeshAction::Generate { spec, output } => {
            let mesh = build(&parse_spec(&spec)?)?;
            let text = write_native(&mesh);
            match output {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        MeshAction::Validate { spec } => {
            let mesh = build(&parse_spec(&spec)?)?;
            mesh.validate()?;
            println!("geometry: {:?}", mesh.geometry_kind());
            println!("vertices: {}", mesh.n_vertices());
            println!("edges: {}", mesh.n_edges());
            println!("cells: {}", mesh.n_cells());
            println!("boundary edges: {}", mesh.boundary_edges().len());
            println!("euler characteristic: {}", mesh.euler_characteristic());
            println!("sha256: {}", crate::manifest::checksum(write_native(&mesh).as_bytes()));
        }
        MeshAction::Convert { input, output } => {
            let mesh: Mesh = read_mesh(&input).map_err(|e| match e {
                Error::Io(io) => usage(format!("{}: {io}", input.display())),
                other => other.into(),
            })?;
            write_atomic(&output, write_native(&mesh).as_bytes())?;
        }
    }
    Ok(Status::Passed)
}

pub fn run(scenario: Scenario, common: &Common, config: Option<PathBuf>, sizes: Option<String>, set: &[String]) -> Outcome {
    let mut cfg = match &config {
        Some(p) => ScenarioConfig::read(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => ScenarioConfig::default(),
    };
    for kv in set {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim());
    }
    match common.mesh.as_slice() {
        [] => {}
        [m] => cfg.set("mesh", m),
        _ => return Err(usage("run takes at most one --mesh")),
    }
    if let Some(s) = common.seed {
        cfg.set("seed", s);
    }
    if let Some(s) = sizes {
        cfg.set("sizes", s);
    }

    let name = name_of(scenario);
    let (parameters, outcome) = match scenario {
        Scenario::FplaneSteady => {
            let p = FplaneParams::from_config(&cfg)?;
            (format!("{p:?}"), run_fplane_steady(&p))
        }
        Scenario::Kelvin => {
            let p = KelvinParams::from_config(&cfg)?;
            (format!("{p:?}"), run_kelvin(&p))
        }
        Scenario::Rossby => {
            let p = RossbyParams::from_config(&cfg)?;
            (format!("{p:?}"), run_rossby_convergence(&p))
        }
        Scenario::BetaTube => {
            let p = BetaTubeParams::from_config(&cfg)?;
            (format!("{p:?}"), run_beta_tube(&p))
        }
        Scenario::SolidRotation => {
            let p = SolidRotationParams::from_config(&cfg)?;
            (format!("{p:?}"), run_solid_rotation(&p))
        }
    };
    let dir = output_dir(common, &format!("run-{name}"))?;
    log::info!("running {name}");
    let result = outcome?;

    let mut manifest = RunManifest::new(format!("run {name}"));
    manifest.set_config(&cfg);
    manifest.parameters = parameters;
    write_fields(&result, &dir, common.dump_matrices, &mut manifest)?;
    if !result.diagnostics.is_empty() {
        write_diagnostics(&dir.join("diagnostics.csv"), &result.diagnostics)?;
    }
    finish(manifest, &result.metrics, &dir)
}

fn write_fields(result: &ScenarioResult, dir: &Path, dump: bool, manifest: &mut RunManifest) -> Result<(), Failure> {
    let Some(fields) = &result.fields else {
        return Ok(());
    };
    manifest.meshes.push(MeshRecord::new(&result.name, fields.ops.mesh()));
    let snaps = dir.join("snapshots");
    std::fs::create_dir_all(&snaps)?;
    for s in &fields.snapshots {
        let title = format!("{} {} t={}", result.name, s.label, s.state.t);
        write_vtk(&snaps.join(format!("{}.vtk", safe_label(&s.label))), &s.state, &fields.ops, &title)?;
    }
    if dump {
        let d = dir.join("matrices");
        std::fs::create_dir_all(&d)?;
        fields.ops.dump_matrix_market(&d)?;
    }
    Ok(())
}

const CLOSED_MESHES: &[&str] = &[
    "periodic:2",
    "periodic:3",
    "periodic:4",
    "periodic:5",
    "periodic:6",
    "periodic:7",
    "periodic:8",
    "icosa:0",
    "icosa:1",
    "icosa:2",
    "icosa:3",
];

fn prefixed(r: ScenarioResult, prefix: Option<&str>) -> Vec<Metric> {
    r.metrics
        .into_iter()
        .map(|m| match prefix {
            Some(p) => Metric { name: format!("{p}:{}", m.name), ..m },
            None => m,
        })
        .collect()
}

pub fn verify(suite: Suite, common: &Common, samples: Option<usize>, steps: Option<usize>) -> Outcome {
    let name = name_of(suite);
    let seed = common.seed.unwrap_or(1);
    let takes = |what: &str, given: bool, ok: bool| if given && !ok { Err(usage(format!("{name} does not take --{what}"))) } else { Ok(()) };
    let defaults: &[&str] = match suite {
        Suite::Commuting | Suite::Conservation => &["periodic:4"],
        Suite::Steady => &["plane:8", "icosa:2"],
        Suite::Census => CLOSED_MESHES,
    };
    takes("samples", samples.is_some(), matches!(suite, Suite::Commuting | Suite::Conservation))?;
    takes("steps", steps.is_some(), matches!(suite, Suite::Conservation | Suite::Steady))?;
    takes("seed", common.seed.is_some(), !matches!(suite, Suite::Census))?;
    let meshes = load_meshes(&common.mesh, defaults)?;
    let dir = output_dir(common, &format!("verify-{name}"))?;
    log::info!("verifying {name} on {} mesh(es)", meshes.len());

    let mut metrics = Vec::new();
    if let Suite::Census = suite {
        metrics = census_suite(&meshes)?.metrics;
    } else {
        let many = meshes.len() > 1;
        for (label, mesh) in &meshes {
            let r = match suite {
                Suite::Commuting => commuting_suite(mesh, samples.unwrap_or(100), seed)?,
                Suite::Conservation => conservation_suite(mesh, samples.unwrap_or(20), steps.unwrap_or(1000), seed)?,
                Suite::Steady => steady_suite(mesh, steps.unwrap_or(100), seed, SolverKind::Monolithic)?,
                Suite::Census => unreachable!(),
            };
            metrics.extend(prefixed(r, many.then_some(label.as_str())));
        }
    }
    if common.dump_matrices {
        dump_all(&dir, &meshes)?;
    }
    let mut manifest = RunManifest::new(format!("verify {name}"));
    manifest.parameters = format!("seed {seed}, samples {samples:?}, steps {steps:?}");
    manifest.meshes = meshes.iter().map(|(n, m)| MeshRecord::new(n, m)).collect();
    finish(manifest, &metrics, &dir)
}

pub fn spectrum(common: &Common, c2: f64, f: f64) -> Outcome {
    if common.seed.is_some() {
        return Err(usage("spectrum does not take --seed"));
    }
    if !(c2 > 0.0 && f > 0.0) {
        return Err(usage("--c2 and --f must be positive"));
    }
    let meshes = load_meshes(&common.mesh, &["periodic:2", "periodic:3"])?;
    let dir = output_dir(common, "spectrum")?;
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut metrics = Vec::new();
    for (label, mesh) in &meshes {
        let (ops, cfg) = fplane_ops(mesh, c2, f)?;
        let pair = ElementPair::BDFM1_P1DG.name();
        if !mesh.has_boundary() && ops.dim_s() + ops.dim_v() <= suites::DENSE_LIMIT {
            let c = generator_spectrum(&ops, &cfg)?;
            rows.extend(census_rows(&c, &pair, label));
            metrics.push(Metric {
                name: format!("{label}:zero_modes"),
                value: c.zero_modes as f64,
                threshold: Threshold::Within { target: c.expected_zero as f64, tol: 0.0 },
            });
            metrics.push(Metric::below(format!("{label}:max_real_part"), c.max_real_part, 1e-8));
            metrics.push(Metric::below(format!("{label}:pairing_defect"), c.pairing_defect, 1e-8));
        } else {
            log::info!("{label}: skipping the dense spectrum");
        }
        if let Ok(MeshSpec::Periodic(_)) = label.parse::<MeshSpec>() {
            let w = lowest_wave_frequency(&ops, &cfg, 1.0)?;
            let exact = (f * f + c2 * (2.0 * std::f64::consts::PI).powi(2)).sqrt();
            rows.push(ReportRow::new(&pair, label, "lowest_frequency", w));
            metrics.push(Metric::report(format!("{label}:lowest_frequency_error"), (w - exact).abs() / exact));
        }
    }
    let named: Vec<(String, Mesh)> = meshes.iter().map(|(n, m)| (n.clone(), m.clone())).collect();
    for pair in [ElementPair::BDFM1_P1DG, ElementPair::RT0_P0] {
        for r in spurious_branch_probe(pair, &named)? {
            rows.extend(branch_rows(&r));
            if let Some(k) = r.kernel_pv_pe {
                metrics.push(Metric::report(format!("{}:{}:kernel_pv_pe", r.mesh, pair.name()), k as f64));
            }
        }
    }
    write_report(&dir.join("report.csv"), &rows)?;
    if common.dump_matrices {
        dump_all(&dir, &meshes)?;
    }
    let mut manifest = RunManifest::new("spectrum");
    manifest.parameters = format!("c2 {c2}, f {f}");
    manifest.meshes = meshes.iter().map(|(n, m)| MeshRecord::new(n, m)).collect();
    finish(manifest, &metrics, &dir)
}
