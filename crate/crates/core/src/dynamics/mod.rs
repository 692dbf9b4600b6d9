//! Implicit midpoint time stepping of
//!
//! ```text
//! u_t + f u⊥ + c² ∇η = 0,    η_t + ∇·u = 0
//! ```
//!
//! in the mixed weak form, with balanced initialisation and conservation
//! diagnostics.

mod hybrid;

pub use hybrid::TraceSystem;

use crate::elements::{project_pi_e, ProjectionRules, SpaceKind};
use crate::error::{Error, Result};
use crate::linalg::{self, matvec, matvec_t, DirectSolver, Sparse};
use crate::mesh::Mesh;
use crate::operators::OperatorSet;
use crate::scalar::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Monolithic,
    Hybridized,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monolithic" => Ok(Self::Monolithic),
            "hybridized" | "hybrid" => Ok(Self::Hybridized),
            _ => Err(Error::param(format!("unknown solver `{s}`"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Monolithic => "monolithic",
            Self::Hybridized => "hybridized",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    /// Gravity wave speed squared, `c² = gH`.
    pub c2: f64,
    /// Coriolis parameter as coefficients in E.
    pub f_coeffs: Vec<f64>,
    pub dt: f64,
    pub solver: SolverKind,
}

impl ModelConfig {
    pub fn new(c2: f64, f_coeffs: Vec<f64>, dt: f64) -> Result<Self> {
        let cfg = Self { c2, f_coeffs, dt, solver: SolverKind::Monolithic };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with `f` given pointwise and projected into E.
    pub fn with_coriolis(mesh: &Mesh, c2: f64, dt: f64, f: impl Fn(Vec3<f64>) -> f64) -> Result<Self> {
        let fc = project_pi_e(mesh, SpaceKind::StreamE, f, &ProjectionRules::smooth())?;
        Self::new(c2, fc, dt)
    }

    pub fn solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::param(format!("c2 must be positive, got {}", self.c2)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if self.f_coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("Coriolis coefficients must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub eta: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(ops: &OperatorSet) -> Self {
        Self { u: vec![0.0; ops.dim_s()], eta: vec![0.0; ops.dim_v()], t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.eta).all(|x| x.is_finite())
    }

    /// Euclidean norm of the stacked coefficient vector.
    pub fn norm(&self) -> f64 {
        (linalg::dot(&self.u, &self.u) + linalg::dot(&self.eta, &self.eta)).sqrt()
    }

    /// `‖self − other‖ / ‖other‖` on the stacked coefficients.
    pub fn relative_difference(&self, other: &State) -> f64 {
        let d: f64 = self
            .u
            .iter()
            .zip(&other.u)
            .chain(self.eta.iter().zip(&other.eta))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let n = other.norm();
        if n == 0.0 {
            d.sqrt()
        } else {
            d.sqrt() / n
        }
    }
}

/// Midpoint stepper with the block system factored once.
///
/// ```text
/// [M_S + θC   -θc²Bᵀ] [u₁]   [M_S - θC   θc²Bᵀ] [u₀]
/// [θB          M_V  ] [η₁] = [-θB         M_V  ] [η₀],   θ = dt/2
/// ```
pub struct Stepper<'a> {
    ops: &'a OperatorSet,
    dt: f64,
    lhs: DirectSolver,
    rhs: Sparse,
}

impl std::fmt::Debug for Stepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper").field("dt", &self.dt).field("n", &self.lhs.dim()).finish()
    }
}

fn block_system(ops: &OperatorSet, c2: f64, theta: f64) -> Result<Sparse> {
    let ns = ops.dim_s();
    let n = ns + ops.dim_v();
    let mut t = linalg::entries(ops.m_s());
    t.extend(linalg::entries(ops.c_f()).into_iter().map(|(i, j, v)| (i, j, theta * v)));
    for (i, j, v) in linalg::entries(ops.b_div()) {
        t.push((j, ns + i, -theta * c2 * v));
        t.push((ns + i, j, theta * v));
    }
    t.extend(linalg::entries(ops.m_v()).into_iter().map(|(i, j, v)| (ns + i, ns + j, v)));
    linalg::from_triplets(n, n, &t)
}

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a OperatorSet, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Self::with_dt(ops, config.c2, config.dt)
    }

    /// Stepper running backwards in time with step `-config.dt`.
    pub fn backward(ops: &'a OperatorSet, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Self::with_dt(ops, config.c2, -config.dt)
    }

    fn with_dt(ops: &'a OperatorSet, c2: f64, dt: f64) -> Result<Self> {
        let theta = 0.5 * dt;
        let lhs = DirectSolver::new("midpoint system", block_system(ops, c2, theta)?)?;
        let rhs = block_system(ops, c2, -theta)?;
        Ok(Self { ops, dt, lhs, rhs })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, state: &State) -> Result<State> {
        let ns = self.ops.dim_s();
        let x0: Vec<f64> = state.u.iter().chain(&state.eta).copied().collect();
        let x1 = self.lhs.solve(&matvec(&self.rhs, &x0))?;
        Ok(State { u: x1[..ns].to_vec(), eta: x1[ns..].to_vec(), t: state.t + self.dt })
    }
}

/// One midpoint step. Builds and factors the system on every call; use
/// [`Stepper`] or [`TraceSystem`] for trajectories.
pub fn step(state: &State, ops: &OperatorSet, config: &ModelConfig) -> Result<State> {
    match config.solver {
        SolverKind::Monolithic => Stepper::new(ops, config)?.step(state),
        SolverKind::Hybridized => TraceSystem::new(ops, config)?.step(state),
    }
}

/// Either solver behind one interface.
#[derive(Debug)]
pub enum Integrator<'a> {
    Monolithic(Stepper<'a>),
    Hybridized(TraceSystem),
}

impl<'a> Integrator<'a> {
    pub fn new(ops: &'a OperatorSet, config: &ModelConfig) -> Result<Self> {
        Ok(match config.solver {
            SolverKind::Monolithic => Self::Monolithic(Stepper::new(ops, config)?),
            SolverKind::Hybridized => Self::Hybridized(TraceSystem::new(ops, config)?),
        })
    }

    pub fn step(&self, state: &State) -> Result<State> {
        match self {
            Self::Monolithic(s) => s.step(state),
            Self::Hybridized(s) => s.step(state),
        }
    }
}

/// Balanced state from a streamfunction: `u = ∇⊥ψ` and `η` solving
/// `c² B M_S⁻¹ Bᵀ η = B M_S⁻¹ C_f u` with `c² ∫η = ∫ f ψ`.
pub fn geostrophic_init(psi: &[f64], ops: &OperatorSet, config: &ModelConfig) -> Result<State> {
    config.validate()?;
    if psi.len() != ops.dim_e() {
        return Err(Error::param(format!("ψ has {} coefficients, E has {}", psi.len(), ops.dim_e())));
    }
    let u = ops.curl_apply(psi)?;
    let rhs = matvec(ops.b_div(), &ops.ms_solver()?.solve(&matvec(ops.c_f(), &u))?);
    let mut eta = ops.mixed_poisson(&rhs)?;
    let target = linalg::dot(psi, &matvec(ops.m_e(), ops.coriolis())) / config.c2;
    let area = ops.integral_v(ops.constant_v());
    eta.iter_mut().for_each(|e| *e /= config.c2);
    let shift = (target - ops.integral_v(&eta)) / area;
    eta.iter_mut().zip(ops.constant_v()).for_each(|(e, k)| *e += shift * k);
    Ok(State { u, eta, t: 0.0 })
}

/// `½(uᵀ M_S u + c² ηᵀ M_V η)`.
pub fn energy(state: &State, ops: &OperatorSet, config: &ModelConfig) -> f64 {
    0.5 * (linalg::dot(&state.u, &matvec(ops.m_s(), &state.u))
        + config.c2 * linalg::dot(&state.eta, &matvec(ops.m_v(), &state.eta)))
}

/// `∫_K η` for every cell.
pub fn cell_mass(state: &State, ops: &OperatorSet) -> Result<Vec<f64>> {
    let mesh = ops.mesh();
    let dof = ops.dof_v();
    let mut local = vec![0.0; dof.space().local_dim()];
    (0..mesh.n_cells())
        .map(|c| {
            let area = mesh.cell_geometry(c)?.area();
            dof.gather(c, &state.eta, &mut local);
            Ok(match dof.space() {
                SpaceKind::PressureP1dg => area / 3.0 * local.iter().sum::<f64>(),
                _ => area * local[0],
            })
        })
        .collect()
}

pub fn total_mass(state: &State, ops: &OperatorSet) -> f64 {
    ops.integral_v(&state.eta)
}

/// Outward flux `∮_{∂K} u·n` of every cell, from the normal traces of the
/// local velocity basis.
pub fn cell_outflux(u: &[f64], ops: &OperatorSet) -> Result<Vec<f64>> {
    let mesh = ops.mesh();
    let dof = ops.dof_s();
    let space = dof.space();
    let mut local = vec![0.0; space.local_dim()];
    (0..mesh.n_cells())
        .map(|c| {
            let g = mesh.cell_geometry(c)?;
            dof.gather(c, u, &mut local);
            Ok((0..3)
                .map(|i| match space {
                    SpaceKind::VelocityRt0 => local[i],
                    _ => 0.5 * g.edge_length[i] * (local[2 * i] + local[2 * i + 1]),
                })
                .sum())
        })
        .collect()
}

/// Worst per-cell imbalance of `Δ∫_K η / dt + ∮ u*·n` over one step,
/// relative to the largest cell-level mass or flux magnitude.
pub fn mass_balance_residual(before: &State, after: &State, ops: &OperatorSet) -> Result<f64> {
    let dt = after.t - before.t;
    if dt == 0.0 {
        return Err(Error::param("states are at the same time"));
    }
    let m0 = cell_mass(before, ops)?;
    let m1 = cell_mass(after, ops)?;
    let mid: Vec<f64> = before.u.iter().zip(&after.u).map(|(a, b)| 0.5 * (a + b)).collect();
    let flux = cell_outflux(&mid, ops)?;
    let flux_scale = cell_abs_flux(&mid, ops)?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for c in 0..m0.len() {
        let dm = (m1[c] - m0[c]) / dt;
        worst = worst.max((dm + flux[c]).abs());
        scale = scale.max(dm.abs() + flux_scale[c]);
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

fn cell_abs_flux(u: &[f64], ops: &OperatorSet) -> Result<Vec<f64>> {
    let mesh = ops.mesh();
    let dof = ops.dof_s();
    let space = dof.space();
    let mut local = vec![0.0; space.local_dim()];
    (0..mesh.n_cells())
        .map(|c| {
            let g = mesh.cell_geometry(c)?;
            dof.gather(c, u, &mut local);
            Ok((0..3)
                .map(|i| match space {
                    SpaceKind::VelocityRt0 => local[i].abs(),
                    _ => (0.5 * g.edge_length[i] * (local[2 * i] + local[2 * i + 1])).abs(),
                })
                .sum())
        })
        .collect()
}

/// `‖B u‖ / ‖W u‖`-style diagnostic: `M_V`-norm of the divergence over the
/// `M_E`-norm of the vorticity.
pub fn divergence_vorticity_ratio(u: &[f64], ops: &OperatorSet) -> Result<f64> {
    let div = ops.mv_solver()?.solve(&matvec(ops.b_div(), u))?;
    let xi = ops.vorticity(u)?;
    let dn = linalg::dot(&div, &matvec(ops.m_v(), &div)).sqrt();
    let vn = linalg::dot(&xi, &matvec(ops.m_e(), &xi)).sqrt();
    Ok(if vn > 0.0 { dn / vn } else { dn })
}

/// Residual of the midpoint equations for a computed step, relative to
/// the size of their terms.
pub fn midpoint_residual(before: &State, after: &State, ops: &OperatorSet, config: &ModelConfig) -> f64 {
    let dt = after.t - before.t;
    let um: Vec<f64> = before.u.iter().zip(&after.u).map(|(a, b)| 0.5 * (a + b)).collect();
    let em: Vec<f64> = before.eta.iter().zip(&after.eta).map(|(a, b)| 0.5 * (a + b)).collect();
    let du: Vec<f64> = after.u.iter().zip(&before.u).map(|(a, b)| a - b).collect();
    let de: Vec<f64> = after.eta.iter().zip(&before.eta).map(|(a, b)| a - b).collect();
    let a = matvec(ops.m_s(), &du);
    let b = matvec(ops.c_f(), &um);
    let c = matvec_t(ops.b_div(), &em);
    let d = matvec(ops.m_v(), &de);
    let e = matvec(ops.b_div(), &um);
    let r1: Vec<f64> = (0..a.len()).map(|k| a[k] + dt * (b[k] - config.c2 * c[k])).collect();
    let r2: Vec<f64> = (0..d.len()).map(|k| d[k] + dt * e[k]).collect();
    let num = (linalg::dot(&r1, &r1) + linalg::dot(&r2, &r2)).sqrt();
    let scale = linalg::norm(&a) + dt.abs() * (linalg::norm(&b) + config.c2 * linalg::norm(&c)) + linalg::norm(&d)
        + dt.abs() * linalg::norm(&e);
    if scale > 0.0 {
        num / scale
    } else {
        num
    }
}
