//! Hybridized midpoint solve.
//!
//! Velocity is broken into independent per-cell copies. Continuity of the
//! normal component is restored by one multiplier per shared normal
//! degree of freedom (two per interior edge), the cell unknowns are
//! eliminated, and the condensed multiplier system is solved globally.
//! Cell states are then recovered one element at a time.

use super::{ModelConfig, State};
use crate::elements::DofMap;
use crate::error::{Error, Result};
use crate::linalg::{self, DirectSolver, SmallLu};
use crate::operators::{local_blocks, OperatorSet};
use crate::quadrature::TriangleRule;
use rayon::prelude::*;

/// Relative normal-velocity jump above which a recovered step is rejected.
pub const JUMP_TOLERANCE: f64 = 1e-10;

struct CellSystem {
    lu: SmallLu<f64>,
    /// Row-major explicit-side matrix, `r_K = R_K x₀_K`.
    rhs: Vec<f64>,
    /// `(local index, multiplier)` for every shared normal DOF.
    interface: Vec<(usize, usize)>,
}

/// Condensed multiplier system plus per-cell factorizations for one
/// `(mesh, config)` pair.
pub struct TraceSystem {
    dt: f64,
    ns: usize,
    nv: usize,
    dof_s: DofMap,
    dof_v: DofMap,
    cells: Vec<CellSystem>,
    n_multipliers: usize,
    condensed: DirectSolver,
    symmetric: bool,
}

impl std::fmt::Debug for TraceSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceSystem")
            .field("dt", &self.dt)
            .field("cells", &self.cells.len())
            .field("multipliers", &self.n_multipliers)
            .finish()
    }
}

impl TraceSystem {
    pub fn new(ops: &OperatorSet, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mesh = ops.mesh();
        let dof_s = ops.dof_s().clone();
        let dof_v = ops.dof_v().clone();
        let ls = dof_s.space().local_dim();
        let lv = dof_v.space().local_dim();
        let n = ls + lv;

        let mut owners = vec![0u8; dof_s.n_dofs()];
        for c in 0..mesh.n_cells() {
            for &(g, _) in dof_s.cell(c).iter().flatten() {
                owners[g] += 1;
            }
        }
        let mut multiplier = vec![None; dof_s.n_dofs()];
        let mut n_multipliers = 0;
        for (g, &k) in owners.iter().enumerate() {
            if k == 2 {
                multiplier[g] = Some(n_multipliers);
                n_multipliers += 1;
            }
        }

        let theta = 0.5 * config.dt;
        let c2 = config.c2;
        let rule = TriangleRule::degree6();
        let pair = ops.pair();
        let cells: Vec<CellSystem> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let l = local_blocks(mesh, pair, ops.dof_e(), ops.coriolis(), &rule, c)?;
                let mut a = vec![0.0; n * n];
                let mut r = vec![0.0; n * n];
                for i in 0..ls {
                    for j in 0..ls {
                        a[i * n + j] = l.m_s[i * ls + j] + theta * l.c_f[i * ls + j];
                        r[i * n + j] = l.m_s[i * ls + j] - theta * l.c_f[i * ls + j];
                    }
                }
                for k in 0..lv {
                    for j in 0..ls {
                        let b = l.b_div[k * ls + j];
                        a[j * n + ls + k] = -theta * c2 * b;
                        r[j * n + ls + k] = theta * c2 * b;
                        a[(ls + k) * n + j] = theta * b;
                        r[(ls + k) * n + j] = -theta * b;
                    }
                    for m in 0..lv {
                        a[(ls + k) * n + ls + m] = l.m_v[k * lv + m];
                        r[(ls + k) * n + ls + m] = l.m_v[k * lv + m];
                    }
                }
                let map = dof_s.cell(c);
                let mut interface = Vec::new();
                for (i, e) in map.iter().enumerate() {
                    match e {
                        None => {
                            for j in 0..n {
                                a[i * n + j] = 0.0;
                                a[j * n + i] = 0.0;
                                r[i * n + j] = 0.0;
                            }
                            a[i * n + i] = 1.0;
                        }
                        Some((g, _)) => {
                            if let Some(m) = multiplier[*g] {
                                interface.push((i, m));
                            }
                        }
                    }
                }
                Ok(CellSystem { lu: SmallLu::new(n, a)?, rhs: r, interface })
            })
            .collect::<Result<_>>()?;

        let mut t = Vec::new();
        for cs in &cells {
            let inv = cs.lu.inverse();
            for &(i, mi) in &cs.interface {
                for &(j, mj) in &cs.interface {
                    t.push((mi, mj, inv[i * n + j]));
                }
            }
        }
        let k = linalg::from_triplets(n_multipliers, n_multipliers, &t)?;
        let symmetric = {
            let d = linalg::to_sparse_sum(&k, &linalg::transpose(&k), -1.0);
            let scale = linalg::entries(&k).iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
            linalg::entries(&d).iter().all(|e| e.2.abs() <= 1e-12 * scale)
        };
        let condensed = DirectSolver::new("trace system", k)?;
        Ok(Self {
            dt: config.dt,
            ns: dof_s.n_dofs(),
            nv: dof_v.n_dofs(),
            dof_s,
            dof_v,
            cells,
            n_multipliers,
            condensed,
            symmetric,
        })
    }

    pub fn n_multipliers(&self) -> usize {
        self.n_multipliers
    }

    /// Whether the condensed matrix is symmetric (it is when `f = 0`).
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn condensed_matrix(&self) -> &linalg::Sparse {
        self.condensed.matrix()
    }

    pub fn step(&self, state: &State) -> Result<State> {
        let (s, jump) = self.step_with_jump(state)?;
        if jump > JUMP_TOLERANCE {
            return Err(Error::invariant(format!("normal velocity jump {jump:e} after trace solve")));
        }
        Ok(s)
    }

    /// One step, also returning the largest normal-velocity jump across
    /// interior edges relative to the largest velocity coefficient.
    pub fn step_with_jump(&self, state: &State) -> Result<(State, f64)> {
        if state.u.len() != self.ns || state.eta.len() != self.nv {
            return Err(Error::param("state does not match the trace system"));
        }
        let ls = self.dof_s.space().local_dim();
        let lv = self.dof_v.space().local_dim();
        let n = ls + lv;

        let local_rhs: Vec<(Vec<f64>, Vec<f64>)> = self
            .cells
            .par_iter()
            .enumerate()
            .map(|(c, cs)| {
                let mut x0 = vec![0.0; n];
                self.dof_s.gather(c, &state.u, &mut x0[..ls]);
                self.dof_v.gather(c, &state.eta, &mut x0[ls..]);
                let r: Vec<f64> = (0..n).map(|i| (0..n).map(|j| cs.rhs[i * n + j] * x0[j]).sum()).collect();
                let y = cs.lu.solve(&r);
                (r, y)
            })
            .collect();

        let mut g = vec![0.0; self.n_multipliers];
        for (cs, (_, y)) in self.cells.iter().zip(&local_rhs) {
            for &(i, m) in &cs.interface {
                g[m] += y[i];
            }
        }
        let lambda = self.condensed.solve(&g)?;

        let local: Vec<Vec<f64>> = self
            .cells
            .par_iter()
            .zip(local_rhs)
            .map(|(cs, (mut r, _))| {
                for &(i, m) in &cs.interface {
                    r[i] -= lambda[m];
                }
                cs.lu.solve(&r)
            })
            .collect();

        let mut u = vec![0.0; self.ns];
        let mut seen: Vec<Option<f64>> = vec![None; self.ns];
        let mut eta = vec![0.0; self.nv];
        let mut jump = 0.0f64;
        for (c, x) in local.iter().enumerate() {
            for (i, e) in self.dof_s.cell(c).iter().enumerate() {
                if let Some((gi, s)) = e {
                    let v = s * x[i];
                    match seen[*gi] {
                        None => {
                            seen[*gi] = Some(v);
                            u[*gi] = v;
                        }
                        Some(w) => {
                            jump = jump.max((v - w).abs());
                            u[*gi] = 0.5 * (v + w);
                        }
                    }
                }
            }
            for (i, e) in self.dof_v.cell(c).iter().enumerate() {
                if let Some((gi, s)) = e {
                    eta[*gi] = s * x[ls + i];
                }
            }
        }
        let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rel = if scale > 0.0 { jump / scale } else { jump };
        Ok((State { u, eta, t: state.t + self.dt }, rel))
    }
}
