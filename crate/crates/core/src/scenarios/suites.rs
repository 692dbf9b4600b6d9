//! Property suites behind `verify`: commuting diagrams, conservation,
//! steady states and the DOF/mode census.

use super::{integrate, max_abs, Metric, ScenarioResult, Tracker};
use crate::analysis::{generator_spectrum, projection_kernels};
use crate::dynamics::{geostrophic_init, ModelConfig, SolverKind, State, Stepper, TraceSystem};
use crate::elements::{dof_census, project_pi_e, project_pi_s, project_pi_v, ElementPair, ProjectionRules, SpaceKind};
use crate::error::{Error, Result};
use crate::linalg::{self, matvec};
use crate::mesh::Mesh;
use crate::operators::OperatorSet;
use crate::scalar::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub const COMMUTING_BOUND: f64 = 1e-10;
pub const ENERGY_STEP_BOUND: f64 = 1e-11;
pub const STEADY_BOUND: f64 = 1e-12;
pub const REVERSAL_BOUND: f64 = 1e-10;
pub const HYBRID_BOUND: f64 = 1e-10;

/// Largest state dimension handed to the dense eigensolver.
pub const DENSE_LIMIT: usize = 2000;

/// `sin(2π k·x + φ)` with integer wavenumbers, so it is periodic on the
/// unit square.
#[derive(Debug, Clone, Copy)]
pub struct Wave {
    pub k: [f64; 2],
    pub phase: f64,
    pub amp: f64,
}

impl Wave {
    pub fn random(rng: &mut impl Rng, kmax: i32) -> Self {
        let mut k = [0.0; 2];
        while k == [0.0; 2] {
            k = [f64::from(rng.gen_range(-kmax..=kmax)), f64::from(rng.gen_range(-kmax..=kmax))];
        }
        Self { k, phase: rng.gen_range(0.0..TAU), amp: rng.gen_range(-1.0..1.0) }
    }

    fn arg(&self, x: Vec3<f64>) -> f64 {
        TAU * (self.k[0] * x[0] + self.k[1] * x[1]) + self.phase
    }

    pub fn value(&self, x: Vec3<f64>) -> f64 {
        self.amp * self.arg(x).sin()
    }

    pub fn gradient(&self, x: Vec3<f64>) -> Vec3<f64> {
        let c = self.amp * TAU * self.arg(x).cos();
        [c * self.k[0], c * self.k[1], 0.0]
    }
}

fn m_norm(m: &linalg::Sparse, x: &[f64]) -> f64 {
    linalg::dot(x, &matvec(m, x)).sqrt()
}

fn relative_gap(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let d = a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

/// Worst residuals of `div Π^S = Π^V div` and `∇⊥ Π^E = Π^S ∇⊥` over
/// `fields` random trigonometric fields on a planar mesh.
pub fn commuting_suite(mesh: &Mesh, fields: usize, seed: u64) -> Result<ScenarioResult> {
    if !mesh.geometry_kind().is_planar() {
        return Err(Error::param("commuting suite needs a planar mesh"));
    }
    let ops = OperatorSet::assemble_pair(mesh, ElementPair::BDFM1_P1DG, &vec![0.0; mesh.n_vertices() + mesh.n_edges() + mesh.n_cells()])?;
    let rules = ProjectionRules::smooth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut div_res, mut curl_res) = (0.0f64, 0.0f64);
    for _ in 0..fields {
        let (a, b) = (Wave::random(&mut rng, 3), Wave::random(&mut rng, 3));
        let u = project_pi_s(mesh, |x| [a.value(x), b.value(x), 0.0], &rules)?;
        let div_h = ops.mv_solver()?.solve(&matvec(ops.b_div(), &u))?;
        let div = project_pi_v(mesh, SpaceKind::PressureP1dg, |x| a.gradient(x)[0] + b.gradient(x)[1], &rules)?;
        let diff: Vec<f64> = div_h.iter().zip(&div).map(|(p, q)| p - q).collect();
        let scale = m_norm(ops.m_v(), &div);
        div_res = div_res.max(if scale > 0.0 { m_norm(ops.m_v(), &diff) / scale } else { m_norm(ops.m_v(), &diff) });

        let psi = project_pi_e(mesh, SpaceKind::StreamE, |x| a.value(x), &rules)?;
        let curl_h = ops.curl_apply(&psi)?;
        let curl = project_pi_s(
            mesh,
            |x| {
                let g = a.gradient(x);
                [-g[1], g[0], 0.0]
            },
            &rules,
        )?;
        curl_res = curl_res.max(relative_gap(&curl_h, &curl, max_abs(&curl)));
    }
    let mut r = ScenarioResult::new("commuting");
    r.metrics.push(Metric::below("divergence_commuting_residual", div_res, COMMUTING_BOUND));
    r.metrics.push(Metric::below("curl_commuting_residual", curl_res, COMMUTING_BOUND));
    Ok(r)
}

/// A random state with every coefficient uniform in `[-1, 1]`.
pub fn random_state(ops: &OperatorSet, rng: &mut impl Rng) -> State {
    State {
        u: (0..ops.dim_s()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        eta: (0..ops.dim_v()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        t: 0.0,
    }
}

/// Variable Coriolis parameter used by the conservation checks.
fn test_coriolis(x: Vec3<f64>) -> f64 {
    1.0 + 0.3 * (TAU * x[0]).sin() + 0.2 * x[1] + 0.1 * x[2]
}

/// Energy and mass conservation for `states` random states over `steps`
/// steps, time reversal over ten steps, and hybridized against monolithic
/// over ten steps on the first state.
pub fn conservation_suite(mesh: &Mesh, states: usize, steps: usize, seed: u64) -> Result<ScenarioResult> {
    let cfg = ModelConfig::with_coriolis(mesh, 1.0, 0.05, test_coriolis)?;
    let ops = OperatorSet::assemble(mesh, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut e_step, mut m_drift, mut m_res) = (0.0f64, 0.0f64, 0.0f64);
    let mut first = None;
    for i in 0..states {
        let s0 = random_state(&ops, &mut rng);
        first.get_or_insert_with(|| s0.clone());
        let mut tracker = Tracker::new(format!("state{i}"), &s0, &ops, &cfg, 0)?;
        integrate(&ops, &cfg, s0, steps, &mut tracker, |_, _| Ok(()))?;
        e_step = e_step.max(tracker.energy_step);
        m_drift = m_drift.max(tracker.mass_drift);
        m_res = m_res.max(tracker.mass_residual);
    }
    let mut r = ScenarioResult::new("conservation");
    r.metrics.push(Metric::below("energy_step_change", e_step, ENERGY_STEP_BOUND));
    r.metrics.push(Metric::below("mass_drift", m_drift, super::MASS_DRIFT_BOUND));
    r.metrics.push(Metric::below("mass_residual", m_res, super::MASS_RESIDUAL_BOUND));
    if let Some(s0) = first {
        r.metrics.push(Metric::below("time_reversal_error", time_reversal_error(&ops, &cfg, &s0, 10)?, REVERSAL_BOUND));
        r.metrics.push(Metric::below("hybrid_difference", hybrid_difference(&ops, &cfg, &s0, 10)?, HYBRID_BOUND));
    }
    Ok(r)
}

/// `‖back^n(forward^n(s)) − s‖ / ‖s‖`.
pub fn time_reversal_error(ops: &OperatorSet, cfg: &ModelConfig, s0: &State, steps: usize) -> Result<f64> {
    let fwd = Stepper::new(ops, cfg)?;
    let back = Stepper::backward(ops, cfg)?;
    let mut s = s0.clone();
    for _ in 0..steps {
        s = fwd.step(&s)?;
    }
    for _ in 0..steps {
        s = back.step(&s)?;
    }
    Ok(s.relative_difference(s0))
}

/// Largest relative gap between hybridized and monolithic trajectories.
pub fn hybrid_difference(ops: &OperatorSet, cfg: &ModelConfig, s0: &State, steps: usize) -> Result<f64> {
    let mono = Stepper::new(ops, cfg)?;
    let hyb = TraceSystem::new(ops, cfg)?;
    let (mut a, mut b) = (s0.clone(), s0.clone());
    let mut worst = 0.0f64;
    for _ in 0..steps {
        a = mono.step(&a)?;
        b = hyb.step(&b)?;
        worst = worst.max(b.relative_difference(&a));
    }
    Ok(worst)
}

/// Random balanced state on an f-plane (`c² = f = 1`), `ψ` zero on the
/// boundary; reports the largest relative change over `steps` steps.
pub fn steady_suite(mesh: &Mesh, steps: usize, seed: u64, solver: SolverKind) -> Result<ScenarioResult> {
    let cfg = ModelConfig::with_coriolis(mesh, 1.0, 0.1, |_| 1.0)?.solver(solver);
    let ops = OperatorSet::assemble(mesh, &cfg)?;
    let psi = super::experiments::random_stream(&ops, seed, 1.0);
    let s0 = geostrophic_init(&psi, &ops, &cfg)?;
    let mut tracker = Tracker::new("steady", &s0, &ops, &cfg, 0)?;
    let mut worst = 0.0f64;
    integrate(&ops, &cfg, s0.clone(), steps, &mut tracker, |_, s| {
        worst = worst.max(s.relative_difference(&s0));
        Ok(())
    })?;
    let mut r = ScenarioResult::new("steady");
    r.metrics.push(Metric::below("steadiness_error", worst, STEADY_BOUND));
    r.metrics.extend(tracker.metrics(""));
    Ok(r)
}

/// DOF identities on every mesh; mode census and projection kernels on
/// the meshes small enough for dense linear algebra.
pub fn census_suite(meshes: &[(String, Mesh)]) -> Result<ScenarioResult> {
    let mut r = ScenarioResult::new("census");
    for (name, mesh) in meshes {
        let c = dof_census(mesh, ElementPair::BDFM1_P1DG);
        r.metrics.push(Metric::below(format!("{name}_s_minus_2v"), c.s_minus_2v.unsigned_abs() as f64, 0.5));
        r.metrics.push(Metric::below(
            format!("{name}_e_plus_v_minus_s_minus_chi"),
            c.e_plus_v_minus_s_minus_chi.unsigned_abs() as f64,
            0.5,
        ));
        if !mesh.geometry_kind().is_closed() || c.dim_s + c.dim_v > DENSE_LIMIT {
            continue;
        }
        let cfg = ModelConfig::with_coriolis(mesh, 1.0, 0.1, |_| 1.0)?;
        let ops = OperatorSet::assemble(mesh, &cfg)?;
        let census = generator_spectrum(&ops, &cfg)?;
        r.metrics.push(Metric::below(
            format!("{name}_zero_mode_excess"),
            (census.zero_modes as f64 - census.expected_zero as f64).abs(),
            0.5,
        ));
        r.metrics.push(Metric::below(format!("{name}_max_real_part"), census.max_real_part, 1e-8));
        r.metrics.push(Metric::below(format!("{name}_pairing_defect"), census.pairing_defect, 1e-8));
        let (pv_pe, pe_pv) = projection_kernels(&ops)?;
        r.metrics.push(Metric::report(format!("{name}_kernel_pv_pe"), pv_pe as f64));
        r.metrics.push(Metric::report(format!("{name}_kernel_pe_pv"), pe_pv as f64));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_periodic_square, StructuredPlane};

    #[test]
    fn commuting_on_small_square() {
        let mesh = build_periodic_square(3, 1.0, 1.0).unwrap();
        let r = commuting_suite(&mesh, 5, 1).unwrap();
        assert!(r.passed(), "{:?}", r.metrics);
    }

    #[test]
    fn commuting_rejects_sphere() {
        let mesh = crate::mesh::build_icosahedral_sphere(1, 1.0).unwrap();
        assert!(commuting_suite(&mesh, 1, 1).is_err());
    }

    #[test]
    fn conservation_on_walled_plane() {
        let mesh = StructuredPlane::new(3, 3, 1.0, 1.0).jitter(0.2, 5).build().unwrap();
        let r = conservation_suite(&mesh, 2, 20, 9).unwrap();
        assert!(r.passed(), "{:?}", r.metrics);
    }

    #[test]
    fn census_on_two_by_two() {
        let mesh = build_periodic_square(2, 1.0, 1.0).unwrap();
        let r = census_suite(&[("periodic2".into(), mesh)]).unwrap();
        assert!(r.passed(), "{:?}", r.failures());
        assert_eq!(r.metric("periodic2_zero_mode_excess"), Some(0.0));
    }
}
