//! Reproducible experiments. Each run returns named metrics, each with its
//! own pass threshold, plus diagnostics and optional field snapshots.

mod config;
mod experiments;
pub mod suites;

pub use config::{MeshSpec, ScenarioConfig};
pub use experiments::{
    run_beta_tube, run_fplane_steady, run_kelvin, run_rossby_convergence, run_solid_rotation, BetaTubeParams,
    FplaneParams, FplaneSurface, KelvinParams, RossbyParams, SolidRotationParams,
};

use crate::dynamics::{self, Integrator, ModelConfig, State};
use crate::error::Result;
use crate::operators::OperatorSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Passes when `value < bound`.
    Below(f64),
    /// Passes when `|value - target| <= tol`.
    Within { target: f64, tol: f64 },
    /// Informational; passes when finite.
    Report,
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Below(b) => write!(f, "< {b:e}"),
            Self::Within { target, tol } => write!(f, "{target} ± {tol}"),
            Self::Report => write!(f, "report"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub threshold: Threshold,
}

impl Metric {
    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, threshold: Threshold::Below(bound) }
    }

    pub fn report(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, threshold: Threshold::Report }
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite()
            && match self.threshold {
                Threshold::Below(b) => self.value < b,
                Threshold::Within { target, tol } => (self.value - target).abs() <= tol,
                Threshold::Report => true,
            }
    }
}

/// One row of the time series written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub run: String,
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub total_mass: f64,
    pub max_abs_eta: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub label: String,
    pub state: State,
}

/// Snapshots together with the operators needed to evaluate them.
pub struct FieldSeries {
    pub ops: OperatorSet,
    pub snapshots: Vec<Snapshot>,
}

impl std::fmt::Debug for FieldSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSeries").field("snapshots", &self.snapshots.len()).finish()
    }
}

#[derive(Debug)]
pub struct ScenarioResult {
    pub name: String,
    pub metrics: Vec<Metric>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub fields: Option<FieldSeries>,
}

impl ScenarioResult {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), metrics: Vec::new(), diagnostics: Vec::new(), fields: None }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn passed(&self) -> bool {
        self.metrics.iter().all(Metric::passed)
    }

    pub fn failures(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| !m.passed()).collect()
    }
}

/// Drift bounds every trajectory must meet.
pub const ENERGY_DRIFT_BOUND: f64 = 1e-10;
pub const MASS_DRIFT_BOUND: f64 = 1e-10;
pub const MASS_RESIDUAL_BOUND: f64 = 1e-11;

/// Conservation bookkeeping along one trajectory.
#[derive(Debug, Clone)]
pub struct Tracker {
    label: String,
    e0: f64,
    m0: f64,
    mass_scale: f64,
    pub energy_drift: f64,
    pub energy_step: f64,
    pub mass_drift: f64,
    pub mass_residual: f64,
    last_energy: f64,
    every: usize,
    pub rows: Vec<DiagnosticRow>,
}

fn relative(change: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        change / scale
    } else {
        change
    }
}

impl Tracker {
    /// `every` is the diagnostic row cadence in steps (0 keeps none).
    pub fn new(label: impl Into<String>, state: &State, ops: &OperatorSet, config: &ModelConfig, every: usize) -> Result<Self> {
        let e0 = dynamics::energy(state, ops, config);
        let m0 = dynamics::total_mass(state, ops);
        let mass_scale = dynamics::cell_mass(state, ops)?.iter().map(|m| m.abs()).sum();
        let mut t = Self {
            label: label.into(),
            e0,
            m0,
            mass_scale,
            energy_drift: 0.0,
            energy_step: 0.0,
            mass_drift: 0.0,
            mass_residual: 0.0,
            last_energy: e0,
            every,
            rows: Vec::new(),
        };
        if every > 0 {
            t.push_row(0, state, e0, m0);
        }
        Ok(t)
    }

    fn push_row(&mut self, step: usize, s: &State, energy: f64, mass: f64) {
        let max_abs_eta = max_abs(&s.eta);
        self.rows.push(DiagnosticRow { run: self.label.clone(), step, t: s.t, energy, total_mass: mass, max_abs_eta });
    }

    pub fn record(&mut self, step: usize, before: &State, after: &State, ops: &OperatorSet, config: &ModelConfig) -> Result<()> {
        let e = dynamics::energy(after, ops, config);
        let m = dynamics::total_mass(after, ops);
        self.energy_drift = self.energy_drift.max(relative((e - self.e0).abs(), self.e0));
        self.energy_step = self.energy_step.max(relative((e - self.last_energy).abs(), self.last_energy));
        self.mass_drift = self.mass_drift.max(relative((m - self.m0).abs(), self.mass_scale));
        self.mass_residual = self.mass_residual.max(dynamics::mass_balance_residual(before, after, ops)?);
        self.last_energy = e;
        if self.every > 0 && step % self.every == 0 {
            self.push_row(step, after, e, m);
        }
        Ok(())
    }

    /// The universal conservation metrics, names prefixed by `prefix`.
    pub fn metrics(&self, prefix: &str) -> Vec<Metric> {
        vec![
            Metric::below(format!("{prefix}energy_drift"), self.energy_drift, ENERGY_DRIFT_BOUND),
            Metric::below(format!("{prefix}mass_drift"), self.mass_drift, MASS_DRIFT_BOUND),
            Metric::below(format!("{prefix}mass_residual"), self.mass_residual, MASS_RESIDUAL_BOUND),
        ]
    }
}

/// Integrates `steps` steps, feeding every step to the tracker and to
/// `observe(step, state)`.
pub fn integrate(
    ops: &OperatorSet,
    config: &ModelConfig,
    initial: State,
    steps: usize,
    tracker: &mut Tracker,
    mut observe: impl FnMut(usize, &State) -> Result<()>,
) -> Result<State> {
    let integrator = Integrator::new(ops, config)?;
    let mut state = initial;
    for k in 1..=steps {
        let next = integrator.step(&state)?;
        tracker.record(k, &state, &next, ops, config)?;
        observe(k, &next)?;
        state = next;
    }
    Ok(state)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn log_slope(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert!(Metric::below("a", 1e-13, 1e-12).passed());
        assert!(!Metric::below("a", 1e-11, 1e-12).passed());
        assert!(!Metric::below("a", f64::NAN, 1.0).passed());
        assert!(!Metric::report("a", f64::INFINITY).passed());
        let m = Metric { name: "s".into(), value: 2.8, threshold: Threshold::Within { target: 3.0, tol: 0.3 } };
        assert!(m.passed());
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|x: &f64| 7.0 * x.powi(3)).collect();
        approx::assert_relative_eq!(log_slope(&h, &e), 3.0, epsilon = 1e-12);
    }
}
