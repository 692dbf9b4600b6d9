//! Global operators of the weak form and the discrete operators derived
//! from them.
//!
//! | matrix   | shape | entry                          |
//! |----------|-------|--------------------------------|
//! | `M_S`    | S×S   | `∫ φ_i·φ_j`                    |
//! | `M_V`    | V×V   | `∫ α_i α_j`                    |
//! | `M_E`    | E×E   | `∫ γ_i γ_j`                    |
//! | `K_E`    | E×E   | `∫ ∇γ_i·∇γ_j`                  |
//! | `B`      | V×S   | `∫ α_i ∇·φ_j`                  |
//! | `C_f`    | S×S   | `∫ f φ_i·(k×φ_j)`              |
//! | `W`      | E×S   | `∫ ∇⊥γ_i·φ_j`                  |
//! | `G`      | E×S   | `∫ ∇γ_i·φ_j`                   |
//! | `P_VE`   | V×E   | `∫ α_i γ_j`                    |
//! | `CURL`   | S×E   | coefficients of `∇⊥γ_j` in S   |

mod derived;

pub use derived::HelmholtzParts;

use crate::dynamics::ModelConfig;
use crate::elements::{tabulate_on, CurlMap, DofMap, ElementPair, SpaceKind};
use crate::error::{Error, Result};
use crate::linalg::{self, DirectSolver, NullspaceSolver, Sparse};
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;
use crate::scalar;
use rayon::prelude::*;
use std::path::Path;
use std::sync::OnceLock;

pub struct OperatorSet {
    mesh: Mesh,
    pair: ElementPair,
    dof_e: DofMap,
    dof_s: DofMap,
    dof_v: DofMap,
    f: Vec<f64>,
    m_s: Sparse,
    m_v: Sparse,
    m_e: Sparse,
    k_e: Sparse,
    b_div: Sparse,
    c_f: Sparse,
    w_curl: Sparse,
    g_grad: Sparse,
    p_ve: Sparse,
    curl: Option<Sparse>,
    const_e: Vec<f64>,
    const_v: Vec<f64>,
    ms_solver: OnceLock<DirectSolver>,
    me_solver: OnceLock<DirectSolver>,
    mv_solver: OnceLock<DirectSolver>,
    ke_solver: OnceLock<NullspaceSolver>,
    mixed_solver: OnceLock<NullspaceSolver>,
}

impl std::fmt::Debug for OperatorSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorSet")
            .field("pair", &self.pair.name())
            .field("dim_e", &self.dim_e())
            .field("dim_s", &self.dim_s())
            .field("dim_v", &self.dim_v())
            .finish()
    }
}

fn cached<'a, S>(cell: &'a OnceLock<S>, build: impl FnOnce() -> Result<S>) -> Result<&'a S> {
    if let Some(s) = cell.get() {
        return Ok(s);
    }
    let s = build()?;
    Ok(cell.get_or_init(|| s))
}

#[derive(Default)]
pub(crate) struct Local {
    pub m_s: Vec<f64>,
    pub m_v: Vec<f64>,
    pub m_e: Vec<f64>,
    pub k_e: Vec<f64>,
    pub b_div: Vec<f64>,
    pub c_f: Vec<f64>,
    pub w_curl: Vec<f64>,
    pub g_grad: Vec<f64>,
    pub p_ve: Vec<f64>,
}

pub(crate) fn local_blocks(mesh: &Mesh, pair: ElementPair, dof_e: &DofMap, f: &[f64], rule: &TriangleRule, c: usize) -> Result<Local> {
    let g = mesh.cell_geometry(c)?;
    let ts = tabulate_on(pair.velocity, &g, rule);
    let tv = tabulate_on(pair.pressure, &g, rule);
    let te = tabulate_on(pair.stream, &g, rule);
    let (ns, nv, ne) = (ts.dim(), tv.dim(), te.dim());
    let mut fl = vec![0.0; ne];
    dof_e.gather(c, f, &mut fl);
    let mut l = Local {
        m_s: vec![0.0; ns * ns],
        m_v: vec![0.0; nv * nv],
        m_e: vec![0.0; ne * ne],
        k_e: vec![0.0; ne * ne],
        b_div: vec![0.0; nv * ns],
        c_f: vec![0.0; ns * ns],
        w_curl: vec![0.0; ne * ns],
        g_grad: vec![0.0; ne * ns],
        p_ve: vec![0.0; nv * ne],
    };
    for p in 0..ts.n_points() {
        let w = ts.weights[p];
        let fq: f64 = (0..ne).map(|j| fl[j] * te.value(p, j)).sum();
        for a in 0..ns {
            let pa = ts.vector(p, a);
            for b in 0..ns {
                let pb = ts.vector(p, b);
                l.m_s[a * ns + b] += w * scalar::dot(pa, pb);
                l.c_f[a * ns + b] += w * fq * scalar::dot(pa, g.perp(pb));
            }
        }
        for a in 0..nv {
            let al = tv.value(p, a);
            for b in 0..nv {
                l.m_v[a * nv + b] += w * al * tv.value(p, b);
            }
            for b in 0..ns {
                l.b_div[a * ns + b] += w * al * ts.divergence(p, b);
            }
            for b in 0..ne {
                l.p_ve[a * ne + b] += w * al * te.value(p, b);
            }
        }
        for a in 0..ne {
            let ga = te.gradient(p, a);
            let curl = g.perp(ga);
            for b in 0..ne {
                l.m_e[a * ne + b] += w * te.value(p, a) * te.value(p, b);
                l.k_e[a * ne + b] += w * scalar::dot(ga, te.gradient(p, b));
            }
            for b in 0..ns {
                l.w_curl[a * ns + b] += w * scalar::dot(curl, ts.vector(p, b));
                l.g_grad[a * ns + b] += w * scalar::dot(ga, ts.vector(p, b));
            }
        }
    }
    Ok(l)
}

fn scatter(out: &mut Vec<(usize, usize, f64)>, rows: &[Option<(usize, f64)>], cols: &[Option<(usize, f64)>], block: &[f64]) {
    let nc = cols.len();
    for (a, r) in rows.iter().enumerate() {
        let Some((i, si)) = r else { continue };
        for (b, c) in cols.iter().enumerate() {
            let Some((j, sj)) = c else { continue };
            let v = block[a * nc + b];
            if v != 0.0 {
                out.push((*i, *j, si * sj * v));
            }
        }
    }
}

/// Coefficient vector in the stream space of `pair` of the constant 1.
pub fn constant_stream(mesh: &Mesh, space: SpaceKind) -> Vec<f64> {
    let d = DofMap::new(space, mesh);
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    (0..d.n_dofs())
        .map(|k| match space {
            SpaceKind::StreamE => {
                if k < nv + ne {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 1.0,
        })
        .collect()
}

impl OperatorSet {
    /// BDFM1-P1DG operators for the Coriolis field of `config`.
    pub fn assemble(mesh: &Mesh, config: &ModelConfig) -> Result<Self> {
        Self::assemble_pair(mesh, ElementPair::BDFM1_P1DG, &config.f_coeffs)
    }

    /// Operators of any supported pair, with `f` given as coefficients in
    /// the pair's stream space.
    pub fn assemble_pair(mesh: &Mesh, pair: ElementPair, f: &[f64]) -> Result<Self> {
        let dof_e = DofMap::new(pair.stream, mesh);
        let dof_s = DofMap::new(pair.velocity, mesh);
        let dof_v = DofMap::new(pair.pressure, mesh);
        if f.len() != dof_e.n_dofs() {
            return Err(Error::param(format!(
                "Coriolis field has {} coefficients, stream space has {}",
                f.len(),
                dof_e.n_dofs()
            )));
        }
        let rule = TriangleRule::degree6();
        let locals: Vec<Local> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| local_blocks(mesh, pair, &dof_e, f, &rule, c))
            .collect::<Result<_>>()?;

        let mut t: [Vec<(usize, usize, f64)>; 9] = Default::default();
        for (c, l) in locals.iter().enumerate() {
            let (rs, rv, re) = (dof_s.cell(c), dof_v.cell(c), dof_e.cell(c));
            scatter(&mut t[0], rs, rs, &l.m_s);
            scatter(&mut t[1], rv, rv, &l.m_v);
            scatter(&mut t[2], re, re, &l.m_e);
            scatter(&mut t[3], re, re, &l.k_e);
            scatter(&mut t[4], rv, rs, &l.b_div);
            scatter(&mut t[5], rs, rs, &l.c_f);
            scatter(&mut t[6], re, rs, &l.w_curl);
            scatter(&mut t[7], re, rs, &l.g_grad);
            scatter(&mut t[8], rv, re, &l.p_ve);
        }
        let (ns, nv, ne) = (dof_s.n_dofs(), dof_v.n_dofs(), dof_e.n_dofs());
        let build = |k: usize, r: usize, c: usize| linalg::from_triplets(r, c, &t[k]);
        let curl = if pair == ElementPair::BDFM1_P1DG {
            let cm = CurlMap::new(mesh)?;
            Some(linalg::from_triplets(ns, ne, &cm.triplets())?)
        } else {
            None
        };
        let const_e = constant_stream(mesh, pair.stream);
        let const_v = vec![1.0; nv];
        Ok(Self {
            mesh: mesh.clone(),
            pair,
            f: f.to_vec(),
            m_s: build(0, ns, ns)?,
            m_v: build(1, nv, nv)?,
            m_e: build(2, ne, ne)?,
            k_e: build(3, ne, ne)?,
            b_div: build(4, nv, ns)?,
            c_f: build(5, ns, ns)?,
            w_curl: build(6, ne, ns)?,
            g_grad: build(7, ne, ns)?,
            p_ve: build(8, nv, ne)?,
            curl,
            const_e,
            const_v,
            dof_e,
            dof_s,
            dof_v,
            ms_solver: OnceLock::new(),
            me_solver: OnceLock::new(),
            mv_solver: OnceLock::new(),
            ke_solver: OnceLock::new(),
            mixed_solver: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn pair(&self) -> ElementPair {
        self.pair
    }

    pub fn coriolis(&self) -> &[f64] {
        &self.f
    }

    pub fn dof_e(&self) -> &DofMap {
        &self.dof_e
    }

    pub fn dof_s(&self) -> &DofMap {
        &self.dof_s
    }

    pub fn dof_v(&self) -> &DofMap {
        &self.dof_v
    }

    pub fn dim_e(&self) -> usize {
        self.dof_e.n_dofs()
    }

    pub fn dim_s(&self) -> usize {
        self.dof_s.n_dofs()
    }

    pub fn dim_v(&self) -> usize {
        self.dof_v.n_dofs()
    }

    pub fn m_s(&self) -> &Sparse {
        &self.m_s
    }

    pub fn m_v(&self) -> &Sparse {
        &self.m_v
    }

    pub fn m_e(&self) -> &Sparse {
        &self.m_e
    }

    pub fn k_e(&self) -> &Sparse {
        &self.k_e
    }

    pub fn b_div(&self) -> &Sparse {
        &self.b_div
    }

    pub fn c_f(&self) -> &Sparse {
        &self.c_f
    }

    pub fn w_curl(&self) -> &Sparse {
        &self.w_curl
    }

    pub fn g_grad(&self) -> &Sparse {
        &self.g_grad
    }

    pub fn p_ve(&self) -> &Sparse {
        &self.p_ve
    }

    /// The exact curl map, available for the BDFM1 pair.
    pub fn curl(&self) -> Option<&Sparse> {
        self.curl.as_ref()
    }

    /// Coefficients of the constant function in E.
    pub fn constant_e(&self) -> &[f64] {
        &self.const_e
    }

    /// Coefficients of the constant function in V.
    pub fn constant_v(&self) -> &[f64] {
        &self.const_v
    }

    pub fn ms_solver(&self) -> Result<&DirectSolver> {
        cached(&self.ms_solver, || DirectSolver::new("M_S", self.m_s.clone()))
    }

    pub fn me_solver(&self) -> Result<&DirectSolver> {
        cached(&self.me_solver, || DirectSolver::new("M_E", self.m_e.clone()))
    }

    pub fn mv_solver(&self) -> Result<&DirectSolver> {
        cached(&self.mv_solver, || DirectSolver::new("M_V", self.m_v.clone()))
    }

    /// Mean-zero Poisson solver on E.
    pub fn ke_solver(&self) -> Result<&NullspaceSolver> {
        cached(&self.ke_solver, || {
            let w = linalg::matvec(&self.m_e, &self.const_e);
            NullspaceSolver::new("K_E", &self.k_e, self.const_e.clone(), w)
        })
    }

    /// Mean-zero mixed Poisson solver `[M_S Bᵀ; B 0]` on S × V.
    pub fn mixed_solver(&self) -> Result<&NullspaceSolver> {
        cached(&self.mixed_solver, || {
            let ns = self.dim_s();
            let nv = self.dim_v();
            let mut t = linalg::entries(&self.m_s);
            for (i, j, v) in linalg::entries(&self.b_div) {
                t.push((ns + i, j, v));
                t.push((j, ns + i, v));
            }
            let a = linalg::from_triplets(ns + nv, ns + nv, &t)?;
            let mut kernel = vec![0.0; ns + nv];
            kernel[ns..].copy_from_slice(&self.const_v);
            let mut weight = vec![0.0; ns + nv];
            weight[ns..].copy_from_slice(&linalg::matvec(&self.m_v, &self.const_v));
            NullspaceSolver::new("mixed Poisson", &a, kernel, weight)
        })
    }

    /// `∫ x` for a coefficient vector in V.
    pub fn integral_v(&self, x: &[f64]) -> f64 {
        linalg::dot(&linalg::matvec(&self.m_v, &self.const_v), x)
    }

    /// `∫ x` for a coefficient vector in E.
    pub fn integral_e(&self, x: &[f64]) -> f64 {
        linalg::dot(&linalg::matvec(&self.m_e, &self.const_e), x)
    }

    /// Write every operator in Matrix Market format into `dir`.
    pub fn dump_matrix_market(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut all = vec![
            ("M_S", &self.m_s),
            ("M_V", &self.m_v),
            ("M_E", &self.m_e),
            ("K_E", &self.k_e),
            ("B_div", &self.b_div),
            ("C_f", &self.c_f),
            ("W_curl", &self.w_curl),
            ("G_grad", &self.g_grad),
            ("P_VE", &self.p_ve),
        ];
        if let Some(c) = &self.curl {
            all.push(("CURL", c));
        }
        for (name, m) in all {
            linalg::write_matrix_market(&dir.join(format!("{name}.mtx")), m)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosahedral_sphere, build_periodic_square, io::parse_native};

    fn ops(mesh: &Mesh, f: f64) -> OperatorSet {
        let e = constant_stream(mesh, SpaceKind::StreamE);
        OperatorSet::assemble_pair(mesh, ElementPair::BDFM1_P1DG, &e.iter().map(|v| v * f).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn total_area_from_mass() {
        let m = build_icosahedral_sphere::<f64>(2, 1.0).unwrap();
        let o = ops(&m, 1.0);
        let area = o.integral_v(o.constant_v());
        assert!((area - m.total_area()).abs() < 1e-12 * area);
        let e_area = o.integral_e(o.constant_e());
        assert!((e_area - area).abs() < 1e-12 * area);
    }

    #[test]
    fn coriolis_is_skew() {
        let m = build_periodic_square::<f64>(3, 1.0, 1.0).unwrap();
        let o = ops(&m, 1.3);
        assert!(linalg::skew_defect(o.c_f()) < 1e-12);
        let u: Vec<f64> = (0..o.dim_s()).map(|k| (k as f64 * 0.7).sin()).collect();
        assert!(linalg::dot(&u, &linalg::matvec(o.c_f(), &u)).abs() < 1e-12);
    }

    #[test]
    fn mass_matrices_are_symmetric() {
        let m = build_periodic_square::<f64>(3, 1.0, 1.0).unwrap();
        let o = ops(&m, 1.0);
        for a in [o.m_s(), o.m_v(), o.m_e(), o.k_e()] {
            let d = linalg::to_sparse_sum(a, &linalg::transpose(a), -1.0);
            assert!(linalg::entries(&d).iter().all(|e| e.2.abs() < 1e-13));
        }
    }

    /// On the reference triangle the outward fluxes of N(i,a) are ±half
    /// the edge length, so ∫ div against the constant is the total flux.
    #[test]
    fn divergence_entries_on_one_cell() {
        let m = parse_native::<f64>("mesh v1\ncounts 3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 2\n").unwrap();
        let f = vec![0.0; DofMap::new(SpaceKind::StreamE, &m).n_dofs()];
        let o = OperatorSet::assemble_pair(&m, ElementPair::BDFM1_P1DG, &f).unwrap();
        // all normal DOFs sit on boundary edges, so only augmentations remain
        assert_eq!(o.dim_s(), 3);
        let b = linalg::to_dense(o.b_div());
        // ∫ λ_k div A_i = -∫ ∇λ_k · A_i = -(4/24)(2·area)·t_i·∇λ_k·...; hand values
        let l = [[-1.0f64, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let t = [[-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()], [0.0, -1.0], [1.0, 0.0]];
        for i in 0..3 {
            let s = match i {
                // global edge direction lower→higher vertex id
                0 => 1.0,
                1 => -1.0,
                _ => 1.0,
            };
            for k in 0..3 {
                // ∫ A_i = 4 t_i ∫ λ_{i+1} λ_{i+2} = 4 t_i (area / 12) = t_i / 6
                let expect = -(t[i][0] * l[k][0] + t[i][1] * l[k][1]) / 6.0 * s;
                assert!((b[(k, i)] - expect).abs() < 1e-14, "k={k} i={i}: {} vs {expect}", b[(k, i)]);
            }
        }
    }
}
