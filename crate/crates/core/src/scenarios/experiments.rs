use super::config::{MeshSpec, ScenarioConfig};
use super::{integrate, log_slope, max_abs, FieldSeries, Metric, ScenarioResult, Snapshot, Threshold, Tracker};
use crate::dynamics::{divergence_vorticity_ratio, geostrophic_init, ModelConfig, SolverKind, State};
use crate::elements::{project_pi_e, project_pi_s, project_pi_v, ProjectionRules, SpaceKind};
use crate::error::{Error, Result};
use crate::linalg::{self, matvec};
use crate::mesh::{build_disk, build_icosahedral_sphere, GeometryKind, Mesh, StructuredPlane};
use crate::operators::OperatorSet;
use crate::scalar::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

const STEADY_BOUND: f64 = 1e-12;

fn assemble(mesh: &Mesh, c2: f64, dt: f64, f: impl Fn(Vec3<f64>) -> f64, solver: SolverKind) -> Result<(OperatorSet, ModelConfig)> {
    let cfg = ModelConfig::with_coriolis(mesh, c2, dt, f)?.solver(solver);
    let ops = OperatorSet::assemble(mesh, &cfg)?;
    Ok((ops, cfg))
}

/// Uniform random coefficients in E, zero on boundary vertices and edges.
pub(crate) fn random_stream(ops: &OperatorSet, seed: u64, amplitude: f64) -> Vec<f64> {
    let mesh = ops.mesh();
    let (nv, ne) = (mesh.n_vertices(), mesh.n_edges());
    let on_boundary = mesh.boundary_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ops.dim_e())
        .map(|k| {
            let x = amplitude * rng.gen_range(-1.0..1.0);
            let pinned = if k < nv {
                on_boundary[k]
            } else if k < nv + ne {
                mesh.is_boundary_edge(k - nv)
            } else {
                false
            };
            if pinned {
                0.0
            } else {
                x
            }
        })
        .collect()
}

fn require_stream_e(ops: &OperatorSet) -> Result<()> {
    if ops.dof_e().space() != SpaceKind::StreamE {
        return Err(Error::param("scenario requires the BDFM1-P1DG pair"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FplaneSurface {
    Plane,
    Sphere,
}

impl std::str::FromStr for FplaneSurface {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(Self::Plane),
            "sphere" | "f-sphere" => Ok(Self::Sphere),
            _ => Err(Error::param(format!("unknown surface `{s}`"))),
        }
    }
}

/// Random balanced state with `c² = f = 1`.
///
/// Keys: `surface` (plane | sphere), `mesh`, `seed`, `steps`, `dt`,
/// `amplitude`, `jitter`, `solver`.
#[derive(Debug, Clone)]
pub struct FplaneParams {
    pub surface: FplaneSurface,
    pub mesh: Option<MeshSpec>,
    pub seed: u64,
    pub steps: usize,
    pub dt: f64,
    pub amplitude: f64,
    /// Vertex jitter of the default planar mesh.
    pub jitter: f64,
    pub solver: SolverKind,
}

impl FplaneParams {
    pub const KEYS: &'static [&'static str] = &["surface", "mesh", "seed", "steps", "dt", "amplitude", "jitter", "solver"];

    pub fn new(surface: FplaneSurface, seed: u64) -> Self {
        Self { surface, mesh: None, seed, steps: 100, dt: 0.1, amplitude: 1.0, jitter: 0.2, solver: SolverKind::Monolithic }
    }

    pub fn from_config(c: &ScenarioConfig) -> Result<Self> {
        c.check_keys(Self::KEYS)?;
        let d = Self::new(c.value_or("surface", FplaneSurface::Plane)?, c.value_or("seed", 0)?);
        Ok(Self {
            mesh: c.get("mesh").map(str::parse).transpose()?,
            steps: c.value_or("steps", d.steps)?,
            dt: c.value_or("dt", d.dt)?,
            amplitude: c.value_or("amplitude", d.amplitude)?,
            jitter: c.value_or("jitter", d.jitter)?,
            solver: c.value_or("solver", d.solver)?,
            ..d
        })
    }

    fn build_mesh(&self) -> Result<Mesh> {
        match (&self.mesh, self.surface) {
            (Some(spec), _) => spec.build(),
            (None, FplaneSurface::Plane) => StructuredPlane::new(8, 8, 1.0, 1.0).jitter(self.jitter, self.seed).build(),
            (None, FplaneSurface::Sphere) => build_icosahedral_sphere(3, 1.0),
        }
    }
}

pub fn run_fplane_steady(p: &FplaneParams) -> Result<ScenarioResult> {
    let mesh = p.build_mesh()?;
    let (ops, cfg) = assemble(&mesh, 1.0, p.dt, |_| 1.0, p.solver)?;
    require_stream_e(&ops)?;
    let psi = random_stream(&ops, p.seed, p.amplitude);
    let s0 = geostrophic_init(&psi, &ops, &cfg)?;
    let mut tracker = Tracker::new("fplane", &s0, &ops, &cfg, 1)?;
    let mut steadiness = 0.0f64;
    let end = integrate(&ops, &cfg, s0.clone(), p.steps, &mut tracker, |_, s| {
        steadiness = steadiness.max(s.relative_difference(&s0));
        Ok(())
    })?;
    let mut r = ScenarioResult::new("fplane-steady");
    r.metrics.push(Metric::below("steadiness_error", steadiness, STEADY_BOUND));
    r.metrics.extend(tracker.metrics(""));
    r.diagnostics = tracker.rows;
    r.fields = Some(FieldSeries {
        snapshots: vec![Snapshot { label: "initial".into(), state: s0 }, Snapshot { label: "final".into(), state: end }],
        ops,
    });
    Ok(r)
}

/// Coastal Kelvin wave in the unit disk.
///
/// Keys: `mesh`, `ro`, `fr`, `dt`, `t_end`, `amplitude`, `mode`,
/// `snapshot_every`, `solver`.
#[derive(Debug, Clone)]
pub struct KelvinParams {
    pub mesh: Option<MeshSpec>,
    pub ro: f64,
    pub fr: f64,
    pub dt: f64,
    pub t_end: f64,
    pub amplitude: f64,
    /// Azimuthal wavenumber.
    pub mode: u32,
    pub snapshot_every: usize,
    pub solver: SolverKind,
}

impl Default for KelvinParams {
    fn default() -> Self {
        Self {
            mesh: None,
            ro: 0.1,
            fr: 1.0,
            dt: 0.01,
            t_end: 10.0,
            amplitude: 1.0,
            mode: 1,
            snapshot_every: 100,
            solver: SolverKind::Monolithic,
        }
    }
}

impl KelvinParams {
    pub const KEYS: &'static [&'static str] =
        &["mesh", "ro", "fr", "dt", "t_end", "amplitude", "mode", "snapshot_every", "solver"];

    pub fn from_config(c: &ScenarioConfig) -> Result<Self> {
        c.check_keys(Self::KEYS)?;
        let d = Self::default();
        Ok(Self {
            mesh: c.get("mesh").map(str::parse).transpose()?,
            ro: c.value_or("ro", d.ro)?,
            fr: c.value_or("fr", d.fr)?,
            dt: c.value_or("dt", d.dt)?,
            t_end: c.value_or("t_end", d.t_end)?,
            amplitude: c.value_or("amplitude", d.amplitude)?,
            mode: c.value_or("mode", d.mode)?,
            snapshot_every: c.value_or("snapshot_every", d.snapshot_every)?,
            solver: c.value_or("solver", d.solver)?,
        })
    }
}

fn steps_for(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= 0.0 && dt > 0.0) {
        return Err(Error::param("need t_end >= 0 and dt > 0"));
    }
    Ok((t_end / dt).round() as usize)
}

/// Largest `|η|` over P1DG nodes lying in the disk `r < radius`.
fn max_eta_inside(eta: &[f64], ops: &OperatorSet, radius: f64) -> f64 {
    let mesh = ops.mesh();
    let mut out = 0.0f64;
    for c in 0..mesh.n_cells() {
        for (i, p) in mesh.corners(c).iter().enumerate() {
            if p[0].hypot(p[1]) < radius {
                out = out.max(eta[3 * c + i].abs());
            }
        }
    }
    out
}

pub fn run_kelvin(p: &KelvinParams) -> Result<ScenarioResult> {
    let mesh = match &p.mesh {
        Some(spec) => spec.build()?,
        None => build_disk(18, 1.0, super::config::DISK_GRADING)?,
    };
    if !mesh.geometry_kind().is_planar() {
        return Err(Error::param("Kelvin scenario needs a planar mesh"));
    }
    let f = 1.0 / p.ro;
    let c2 = 1.0 / (p.fr * p.fr);
    let c = c2.sqrt();
    let rd = c / f;
    let (ops, cfg) = assemble(&mesh, c2, p.dt, |_| f, p.solver)?;
    require_stream_e(&ops)?;
    let m = f64::from(p.mode);
    let profile = |x: Vec3<f64>| {
        let r = x[0].hypot(x[1]);
        p.amplitude * ((r - 1.0) / rd).exp() * (m * x[1].atan2(x[0])).cos()
    };
    let rules = ProjectionRules::smooth();
    let eta = project_pi_v(&mesh, ops.dof_v().space(), profile, &rules)?;
    let u = project_pi_s(
        &mesh,
        |x| {
            let r = x[0].hypot(x[1]);
            if r == 0.0 {
                return [0.0; 3];
            }
            let s = c * profile(x) / r;
            [-s * x[1], s * x[0], 0.0]
        },
        &rules,
    )?;
    let s0 = State { u, eta, t: 0.0 };
    let boundary_amp = max_abs(&s0.eta);
    let mut interior = max_eta_inside(&s0.eta, &ops, 0.5);
    let mut tracker = Tracker::new("kelvin", &s0, &ops, &cfg, 10)?;
    let mut snaps = vec![Snapshot { label: "t0".into(), state: s0.clone() }];
    let every = p.snapshot_every.max(1);
    integrate(&ops, &cfg, s0, steps_for(p.t_end, p.dt)?, &mut tracker, |k, s| {
        interior = interior.max(max_eta_inside(&s.eta, &ops, 0.5));
        if k % every == 0 {
            snaps.push(Snapshot { label: format!("step{k}"), state: s.clone() });
        }
        Ok(())
    })?;
    let ratio = if boundary_amp > 0.0 { interior / boundary_amp } else { 0.0 };
    let mut r = ScenarioResult::new("kelvin");
    r.metrics.push(Metric::below("radiation_ratio", ratio, 0.1));
    r.metrics.extend(tracker.metrics(""));
    r.diagnostics = tracker.rows;
    r.fields = Some(FieldSeries { ops, snapshots: snaps });
    Ok(r)
}

/// Rossby wave in a channel periodic in x, walls at `y = 0, 1`.
///
/// Keys: `sizes`, `ro`, `dt`, `t_end`, `amplitude`, `solver`.
#[derive(Debug, Clone)]
pub struct RossbyParams {
    pub sizes: Vec<usize>,
    pub ro: f64,
    pub dt: f64,
    pub t_end: f64,
    pub amplitude: f64,
    pub solver: SolverKind,
}

/// `γ = 2π / (1 + 8π²)`.
pub fn rossby_gamma() -> f64 {
    TAU / (1.0 + 8.0 * PI * PI)
}

impl Default for RossbyParams {
    fn default() -> Self {
        Self {
            sizes: vec![8, 16, 32],
            ro: 1e-3,
            dt: 0.007996,
            t_end: PI / rossby_gamma(),
            amplitude: 1.0,
            solver: SolverKind::Monolithic,
        }
    }
}

impl RossbyParams {
    pub const KEYS: &'static [&'static str] = &["sizes", "ro", "dt", "t_end", "amplitude", "solver"];

    pub fn from_config(c: &ScenarioConfig) -> Result<Self> {
        c.check_keys(Self::KEYS)?;
        let d = Self::default();
        Ok(Self {
            sizes: c.list_or("sizes", d.sizes)?,
            ro: c.value_or("ro", d.ro)?,
            dt: c.value_or("dt", d.dt)?,
            t_end: c.value_or("t_end", d.t_end)?,
            amplitude: c.value_or("amplitude", d.amplitude)?,
            solver: c.value_or("solver", d.solver)?,
        })
    }
}

/// Errors of one mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RossbyError {
    pub n: usize,
    pub l2: f64,
    pub linf: f64,
}

/// Slopes fall below this once the finite-Ro error dominates.
const SATURATED_SLOPE: f64 = 2.0;

/// Number of leading sizes before the local slope drops below
/// [`SATURATED_SLOPE`], at least two.
pub fn pre_saturation(errs: &[RossbyError]) -> usize {
    let mut k = 1;
    while k < errs.len() {
        let local = log_slope(&[1.0 / errs[k - 1].n as f64, 1.0 / errs[k].n as f64], &[errs[k - 1].l2, errs[k].l2]);
        if local < SATURATED_SLOPE {
            break;
        }
        k += 1;
    }
    k.max(2).min(errs.len())
}

fn rossby_single(p: &RossbyParams, n: usize) -> Result<(RossbyError, Tracker, OperatorSet, State, State)> {
    let mesh = StructuredPlane::new(n, n, 1.0, 1.0).periodic(true, false).build()?;
    let ro = p.ro;
    let (ops, cfg) = assemble(&mesh, 1.0 / (ro * ro), p.dt, |x| (1.0 + ro * x[1]) / ro, p.solver)?;
    let a = p.amplitude;
    let psi = project_pi_e(&mesh, SpaceKind::StreamE, |x| a * (TAU * x[0]).sin() * (TAU * x[1]).sin(), &ProjectionRules::smooth())?;
    let s0 = geostrophic_init(&psi, &ops, &cfg)?;
    let mut tracker = Tracker::new(format!("n{n}"), &s0, &ops, &cfg, 50)?;
    let steps = steps_for(p.t_end, p.dt)?;
    let end = integrate(&ops, &cfg, s0.clone(), steps, &mut tracker, |_, _| Ok(()))?;
    let g = rossby_gamma();
    let t = end.t;
    let exact = project_pi_v(
        &mesh,
        SpaceKind::PressureP1dg,
        |x| a * ro * (TAU * x[0] + g * t).sin() * (TAU * x[1]).sin(),
        &ProjectionRules::smooth(),
    )?;
    let diff: Vec<f64> = end.eta.iter().zip(&exact).map(|(x, y)| x - y).collect();
    let l2 = linalg::dot(&diff, &matvec(ops.m_v(), &diff)).sqrt();
    Ok((RossbyError { n, l2, linf: max_abs(&diff) }, tracker, ops, s0, end))
}

pub fn run_rossby_convergence(p: &RossbyParams) -> Result<ScenarioResult> {
    let mut sizes = p.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() || sizes[0] < 2 {
        return Err(Error::param("rossby needs mesh sizes >= 2"));
    }
    let mut r = ScenarioResult::new("rossby");
    let mut errs = Vec::new();
    let mut fields = None;
    let mut drift = [0.0f64; 3];
    for &n in &sizes {
        let (e, tracker, ops, s0, end) = rossby_single(p, n)?;
        log::info!("rossby n = {n}: l2 {:.3e}, linf {:.3e}", e.l2, e.linf);
        r.metrics.push(Metric::report(format!("l2_error_n{n}"), e.l2));
        r.metrics.push(Metric::report(format!("linf_error_n{n}"), e.linf));
        drift[0] = drift[0].max(tracker.energy_drift);
        drift[1] = drift[1].max(tracker.mass_drift);
        drift[2] = drift[2].max(tracker.mass_residual);
        r.diagnostics.extend(tracker.rows);
        errs.push(e);
        fields = Some(FieldSeries {
            ops,
            snapshots: vec![Snapshot { label: "initial".into(), state: s0 }, Snapshot { label: "final".into(), state: end }],
        });
    }
    if errs.len() >= 2 {
        let k = pre_saturation(&errs);
        let h: Vec<f64> = errs[..k].iter().map(|e| 1.0 / e.n as f64).collect();
        let l2: Vec<f64> = errs[..k].iter().map(|e| e.l2).collect();
        let linf: Vec<f64> = errs[..k].iter().map(|e| e.linf).collect();
        let within = Threshold::Within { target: 3.0, tol: 0.3 };
        r.metrics.push(Metric { name: "convergence_slope".into(), value: log_slope(&h, &l2), threshold: within });
        r.metrics.push(Metric { name: "convergence_slope_linf".into(), value: log_slope(&h, &linf), threshold: within });
        r.metrics.push(Metric::report("fit_sizes", k as f64));
    }
    let finest = errs[errs.len() - 1];
    r.metrics.push(Metric::report("finest_l2_error", finest.l2));
    r.metrics.push(Metric::report("plateau_over_ro2", finest.l2 / (p.amplitude.abs() * p.ro * p.ro)));
    if let [.., a, b] = errs[..] {
        r.metrics.push(Metric::report(
            "last_local_slope",
            log_slope(&[1.0 / a.n as f64, 1.0 / b.n as f64], &[a.l2, b.l2]),
        ));
    }
    r.metrics.push(Metric::below("energy_drift", drift[0], super::ENERGY_DRIFT_BOUND));
    r.metrics.push(Metric::below("mass_drift", drift[1], super::MASS_DRIFT_BOUND));
    r.metrics.push(Metric::below("mass_residual", drift[2], super::MASS_RESIDUAL_BOUND));
    r.fields = fields;
    Ok(r)
}

/// Rossby waves on a cylinder with `f = (1 + Ro z)/Ro`.
///
/// Keys: `mesh`, `ro`, `dt`, `steps`, `snapshot_steps`, `constant_f`,
/// `amplitude`, `solver`.
#[derive(Debug, Clone)]
pub struct BetaTubeParams {
    pub mesh: Option<MeshSpec>,
    pub ro: f64,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_steps: Vec<usize>,
    /// Drop the z-dependence of f.
    pub constant_f: bool,
    pub amplitude: f64,
    pub solver: SolverKind,
}

impl Default for BetaTubeParams {
    fn default() -> Self {
        Self {
            mesh: None,
            ro: 1e-3,
            dt: 0.007996,
            steps: 10000,
            snapshot_steps: vec![100, 2500, 5000, 7500, 10000],
            constant_f: false,
            amplitude: 1.0,
            solver: SolverKind::Monolithic,
        }
    }
}

impl BetaTubeParams {
    pub const KEYS: &'static [&'static str] =
        &["mesh", "ro", "dt", "steps", "snapshot_steps", "constant_f", "amplitude", "solver"];

    pub fn from_config(c: &ScenarioConfig) -> Result<Self> {
        c.check_keys(Self::KEYS)?;
        let d = Self::default();
        Ok(Self {
            mesh: c.get("mesh").map(str::parse).transpose()?,
            ro: c.value_or("ro", d.ro)?,
            dt: c.value_or("dt", d.dt)?,
            steps: c.value_or("steps", d.steps)?,
            snapshot_steps: c.list_or("snapshot_steps", d.snapshot_steps)?,
            constant_f: c.value_or("constant_f", d.constant_f)?,
            amplitude: c.value_or("amplitude", d.amplitude)?,
            solver: c.value_or("solver", d.solver)?,
        })
    }
}

pub fn run_beta_tube(p: &BetaTubeParams) -> Result<ScenarioResult> {
    let mesh = match &p.mesh {
        Some(spec) => spec.build()?,
        None => MeshSpec::Cylinder(24, 16).build()?,
    };
    if mesh.geometry_kind() != GeometryKind::Cylinder {
        return Err(Error::param("beta tube needs a cylinder mesh"));
    }
    let ro = p.ro;
    let beta = if p.constant_f { 0.0 } else { ro };
    let (ops, cfg) = assemble(&mesh, 1.0 / (ro * ro), p.dt, |x| (1.0 + beta * x[2]) / ro, p.solver)?;
    let a = p.amplitude;
    let psi = project_pi_e(
        &mesh,
        SpaceKind::StreamE,
        |x| {
            let r = x[0].hypot(x[1]);
            a * x[1] / r * (0.5 * PI * x[2]).cos()
        },
        &ProjectionRules::smooth(),
    )?;
    let s0 = geostrophic_init(&psi, &ops, &cfg)?;
    let mut tracker = Tracker::new("beta-tube", &s0, &ops, &cfg, 50)?;
    let mut snaps = vec![Snapshot { label: "step0".into(), state: s0.clone() }];
    let mut ratio = 0.0f64;
    let mut steadiness = 0.0f64;
    integrate(&ops, &cfg, s0.clone(), p.steps, &mut tracker, |k, s| {
        if p.constant_f {
            steadiness = steadiness.max(s.relative_difference(&s0));
        }
        if p.snapshot_steps.contains(&k) {
            ratio = ratio.max(divergence_vorticity_ratio(&s.u, &ops)?);
            snaps.push(Snapshot { label: format!("step{k}"), state: s.clone() });
        }
        Ok(())
    })?;
    let mut r = ScenarioResult::new("beta-tube");
    r.metrics.push(Metric::below("divergence_vorticity_ratio", ratio, 10.0 * ro));
    if p.constant_f {
        r.metrics.push(Metric::below("steadiness_error", steadiness, STEADY_BOUND));
    }
    r.metrics.extend(tracker.metrics(""));
    r.diagnostics = tracker.rows;
    r.fields = Some(FieldSeries { ops, snapshots: snaps });
    Ok(r)
}

/// Solid-body rotation on the Earth-sized sphere.
///
/// Keys: `level`, `radius`, `g`, `depth`, `day`, `dt`, `days`,
/// `amplitude`, `depth_check`, `solver`.
#[derive(Debug, Clone)]
pub struct SolidRotationParams {
    pub level: u32,
    pub radius: f64,
    pub g: f64,
    /// Mean layer depth H, with `c² = gH`.
    pub depth: f64,
    pub day: f64,
    pub dt: f64,
    pub days: f64,
    /// Multiplies `u₀`.
    pub amplitude: f64,
    /// Repeat with `10 H` and report that run as well.
    pub depth_check: bool,
    pub solver: SolverKind,
}

impl Default for SolidRotationParams {
    fn default() -> Self {
        Self {
            level: 3,
            radius: 6.37122e6,
            g: 9.8,
            depth: 1e4,
            day: 86400.0,
            dt: 3600.0,
            days: 10.0,
            amplitude: 1.0,
            depth_check: true,
            solver: SolverKind::Monolithic,
        }
    }
}

impl SolidRotationParams {
    pub const KEYS: &'static [&'static str] =
        &["level", "mesh", "radius", "g", "depth", "day", "dt", "days", "amplitude", "depth_check", "solver"];

    pub fn from_config(c: &ScenarioConfig) -> Result<Self> {
        c.check_keys(Self::KEYS)?;
        let d = Self::default();
        let level = match c.get("mesh").map(str::parse::<MeshSpec>).transpose()? {
            Some(MeshSpec::Icosa(l)) => l,
            Some(other) => return Err(Error::param(format!("solid rotation needs an icosa mesh, got {other}"))),
            None => c.value_or("level", d.level)?,
        };
        Ok(Self {
            level,
            radius: c.value_or("radius", d.radius)?,
            g: c.value_or("g", d.g)?,
            depth: c.value_or("depth", d.depth)?,
            day: c.value_or("day", d.day)?,
            dt: c.value_or("dt", d.dt)?,
            days: c.value_or("days", d.days)?,
            amplitude: c.value_or("amplitude", d.amplitude)?,
            depth_check: c.value_or("depth_check", d.depth_check)?,
            solver: c.value_or("solver", d.solver)?,
        })
    }
}

/// `max|η(T) − η(0)| / max|η(0)|`, or the raw deviation when `η(0) = 0`.
fn eta_deviation(end: &State, start: &State) -> f64 {
    let dev = end.eta.iter().zip(&start.eta).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let scale = max_abs(&start.eta);
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

/// Integrates in units of the radius and one day, where the equations
/// keep their form with `f' = f·day`, `c'² = c²·day²/R²`.
pub fn run_solid_rotation(p: &SolidRotationParams) -> Result<ScenarioResult> {
    if !(p.radius > 0.0 && p.day > 0.0) {
        return Err(Error::param("radius and day must be positive"));
    }
    let mesh = build_icosahedral_sphere(p.level, 1.0)?;
    let omega = 1.0;
    let u0 = p.amplitude * TAU / 12.0;
    let dt = p.dt / p.day;
    let steps = steps_for(p.days, dt)?;
    let mut r = ScenarioResult::new("solid-rotation");
    let depths: &[(f64, &str)] = if p.depth_check { &[(1.0, ""), (10.0, "h10_")] } else { &[(1.0, "")] };
    for &(factor, prefix) in depths {
        let c2 = p.g * p.depth * factor * (p.day / p.radius).powi(2);
        let (ops, cfg) = assemble(&mesh, c2, dt, |x| 2.0 * omega * x[2], p.solver)?;
        let psi = project_pi_e(&mesh, SpaceKind::StreamE, |x| -u0 * x[2], &ProjectionRules::polynomial())?;
        let s0 = geostrophic_init(&psi, &ops, &cfg)?;
        let mut tracker = Tracker::new(format!("{prefix}rotation"), &s0, &ops, &cfg, 1)?;
        let end = integrate(&ops, &cfg, s0.clone(), steps, &mut tracker, |_, _| Ok(()))?;
        r.metrics.push(Metric::below(format!("{prefix}steadiness_error"), eta_deviation(&end, &s0), 1e-11));
        r.metrics.extend(tracker.metrics(prefix));
        r.diagnostics.extend(tracker.rows);
        if prefix.is_empty() {
            r.fields = Some(FieldSeries {
                ops,
                snapshots: vec![Snapshot { label: "initial".into(), state: s0 }, Snapshot { label: "final".into(), state: end }],
            });
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_value() {
        approx::assert_relative_eq!(rossby_gamma() * (1.0 + 8.0 * PI * PI), TAU, epsilon = 1e-14);
        approx::assert_relative_eq!(rossby_gamma(), 0.078582, epsilon = 1e-6);
    }

    #[test]
    fn random_stream_vanishes_on_walls() {
        let mesh = StructuredPlane::new(3, 3, 1.0, 1.0).build().unwrap();
        let (ops, _) = assemble(&mesh, 1.0, 0.1, |_| 1.0, SolverKind::Monolithic).unwrap();
        let psi = random_stream(&ops, 3, 1.0);
        let bv = mesh.boundary_vertices();
        for (v, &b) in bv.iter().enumerate() {
            assert_eq!(b, psi[v] == 0.0, "vertex {v}");
        }
        assert_eq!(psi, random_stream(&ops, 3, 1.0));
        assert_ne!(psi, random_stream(&ops, 4, 1.0));
    }

    #[test]
    fn zero_stream_gives_zero_error() {
        let mut p = FplaneParams::new(FplaneSurface::Plane, 1);
        p.amplitude = 0.0;
        p.steps = 3;
        let r = run_fplane_steady(&p).unwrap();
        assert_eq!(r.metric("steadiness_error"), Some(0.0));
        assert!(r.passed());
    }

    #[test]
    fn short_fplane_run_is_steady() {
        let mut p = FplaneParams::new(FplaneSurface::Plane, 7);
        p.steps = 10;
        let r = run_fplane_steady(&p).unwrap();
        assert!(r.passed(), "{:?}", r.failures());
    }

    #[test]
    fn saturation_cut() {
        let e = |n, l2| RossbyError { n, l2, linf: l2 };
        let errs = [e(4, 1e-2), e(8, 1.25e-3), e(16, 1.6e-4), e(32, 1.0e-4)];
        assert_eq!(pre_saturation(&errs), 3);
        assert_eq!(pre_saturation(&errs[2..]), 2);
    }

    #[test]
    fn config_keys_are_checked() {
        let c = ScenarioConfig::parse("sizes = 4, 8\nro = 0.01").unwrap();
        let p = RossbyParams::from_config(&c).unwrap();
        assert_eq!(p.sizes, vec![4, 8]);
        assert_eq!(p.ro, 0.01);
        assert!(KelvinParams::from_config(&c).is_err());
    }
}
