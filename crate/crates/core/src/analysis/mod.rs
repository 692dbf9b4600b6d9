//! Spectral checks of the discrete wave operator: steady-mode counts,
//! kernels of the double projections and the lowest wave frequency.

use crate::dynamics::ModelConfig;
use crate::elements::{dof_census, ElementPair, SpaceKind};
use crate::error::{Error, Result};
use crate::linalg::{self, congruence, matvec, DirectSolver, Sparse};
use crate::mesh::Mesh;
use crate::operators::{constant_stream, OperatorSet};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;

/// Eigenvalue census of the linear generator on an f-plane.
#[derive(Debug, Clone)]
pub struct ModeCensus {
    pub zero_modes: usize,
    /// Modes with `|ω| ≥ f`.
    pub ig_modes: usize,
    /// `|ω|`, ascending.
    pub spectrum: Vec<f64>,
    /// Signed `ω`, ascending.
    pub frequencies: Vec<f64>,
    pub expected_zero: usize,
    pub tol_zero: f64,
    /// Largest `|Re λ|` relative to the largest `|λ|`.
    pub max_real_part: f64,
    /// Largest `|ω_k + ω_{N-1-k}|` relative to the largest `|ω|`.
    pub pairing_defect: f64,
}

impl ModeCensus {
    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    pub fn nonzero_modes(&self) -> usize {
        self.dim() - self.zero_modes
    }

    /// Exactly `dim(E)` zero modes and a purely imaginary, `±`-paired rest.
    pub fn is_consistent(&self) -> bool {
        self.zero_modes == self.expected_zero && self.max_real_part < 1e-8 && self.pairing_defect < 1e-8
    }
}

/// Value of a constant Coriolis field, or an error if `f` is not constant.
pub fn constant_coriolis(ops: &OperatorSet, config: &ModelConfig) -> Result<f64> {
    let k = ops.constant_e();
    let f0 = config.f_coeffs.iter().zip(k).find(|(_, &k)| k != 0.0).map_or(0.0, |(f, k)| f / k);
    let off = config.f_coeffs.iter().zip(k).map(|(f, k)| (f - f0 * k).abs()).fold(0.0, f64::max);
    if off > 1e-12 * f0.abs().max(1.0) {
        return Err(Error::param("generator spectrum needs a constant Coriolis parameter"));
    }
    Ok(f0)
}

/// `J = [-C, c²Bᵀ; -c²B, 0]` and `M = diag(M_S, c² M_V)`, so that the
/// dynamics read `M ẋ = J x` and `J` is skew.
pub fn generator(ops: &OperatorSet, c2: f64) -> Result<(Sparse, Sparse)> {
    let ns = ops.dim_s();
    let n = ns + ops.dim_v();
    let mut j: Vec<_> = linalg::entries(ops.c_f()).into_iter().map(|(r, c, v)| (r, c, -v)).collect();
    for (r, c, v) in linalg::entries(ops.b_div()) {
        j.push((c, ns + r, c2 * v));
        j.push((ns + r, c, -c2 * v));
    }
    let mut m = linalg::entries(ops.m_s());
    m.extend(linalg::entries(ops.m_v()).into_iter().map(|(r, c, v)| (ns + r, ns + c, c2 * v)));
    Ok((linalg::from_triplets(n, n, &j)?, linalg::from_triplets(n, n, &m)?))
}

/// Largest `|xᵀ J x| / (xᵀ M x)` over `samples` random states.
pub fn generator_skewness(ops: &OperatorSet, c2: f64, samples: usize, seed: u64) -> Result<f64> {
    let (j, m) = generator(ops, c2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x: Vec<f64> = (0..j.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = linalg::dot(&x, &matvec(&j, &x));
        let e = linalg::dot(&x, &matvec(&m, &x));
        worst = worst.max(q.abs() / e);
    }
    Ok(worst)
}

/// Dense eigenvalues `iω` of `M⁻¹ J` on a constant-f closed mesh.
pub fn generator_spectrum(ops: &OperatorSet, config: &ModelConfig) -> Result<ModeCensus> {
    config.validate()?;
    if !ops.mesh().geometry_kind().is_closed() {
        return Err(Error::param("generator spectrum needs a closed mesh"));
    }
    let f = constant_coriolis(ops, config)?;
    let (j, m) = generator(ops, config.c2)?;
    let a = congruence(&linalg::to_dense(&j), &linalg::to_dense(&m))?;
    let ev = a.eigenvalues().map_err(|e| Error::EigensolverFailure(format!("{e:?}")))?;
    let top = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let max_real_part = if top > 0.0 { ev.iter().map(|z| z.re.abs()).fold(0.0, f64::max) / top } else { 0.0 };
    let mut frequencies: Vec<f64> = ev.iter().map(|z| z.im).collect();
    frequencies.sort_by(|a, b| a.total_cmp(b));
    let n = frequencies.len();
    let pairing = (0..n).map(|k| (frequencies[k] + frequencies[n - 1 - k]).abs()).fold(0.0, f64::max);
    let mut spectrum: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
    spectrum.sort_by(|a, b| a.total_cmp(b));
    let tol_zero = if f != 0.0 { 1e-8 * f.abs() } else { 1e-8 * top };
    let zero_modes = spectrum.iter().filter(|&&w| w < tol_zero).count();
    let ig_modes = if f != 0.0 { spectrum.iter().filter(|&&w| w >= f.abs() * (1.0 - 1e-8)).count() } else { n - zero_modes };
    Ok(ModeCensus {
        zero_modes,
        ig_modes,
        spectrum,
        frequencies,
        expected_zero: ops.dim_e(),
        tol_zero,
        max_real_part,
        pairing_defect: if top > 0.0 { pairing / top } else { 0.0 },
    })
}

/// Frequency of the discrete wave mode nearest to `ω² = f² + ¾ c² k²`,
/// `k = 2π / L`, on a constant-f mesh. On the unit periodic square this is
/// the lowest inertia-gravity mode, to compare with `√(f² + c² k²)`.
///
/// Uses shift-and-invert subspace iteration on `Jᵀ M⁻¹ J x = ω² M x`,
/// so only sparse factorisations are needed.
pub fn lowest_wave_frequency(ops: &OperatorSet, config: &ModelConfig, length: f64) -> Result<f64> {
    config.validate()?;
    let f = constant_coriolis(ops, config)?;
    let k = 2.0 * std::f64::consts::PI / length;
    let shift = f * f + 0.75 * config.c2 * k * k;
    let (j, m) = generator(ops, config.c2)?;
    let n = j.nrows();
    // [M  -J; Jᵀ  -sM] [z; x] = [0; M b]
    let mut t = linalg::entries(&m);
    for (r, c, v) in linalg::entries(&j) {
        t.push((r, n + c, -v));
        t.push((n + c, r, v));
    }
    t.extend(linalg::entries(&m).into_iter().map(|(r, c, v)| (n + r, n + c, -shift * v)));
    let solver = DirectSolver::new("shift-invert", linalg::from_triplets(2 * n, 2 * n, &t)?)?;
    let apply = |b: &[f64]| -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; 2 * n];
        rhs[n..].copy_from_slice(&matvec(&m, b));
        Ok(solver.solve(&rhs)?[n..].to_vec())
    };

    let p = 16.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut basis: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    m_orthonormalize(&mut basis, &m)?;
    let mut last = f64::NAN;
    for _ in 0..300 {
        let w: Vec<Vec<f64>> = basis.iter().map(|v| apply(v)).collect::<Result<_>>()?;
        let mw: Vec<Vec<f64>> = w.iter().map(|x| matvec(&m, x)).collect();
        let h = Mat::from_fn(p, p, |a, b| 0.5 * (linalg::dot(&basis[a], &mw[b]) + linalg::dot(&basis[b], &mw[a])));
        let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::EigensolverFailure(format!("{e:?}")))?;
        let s = eig.S();
        let u = eig.U();
        let theta = (0..p).map(|i| s[i]).max_by(|a, b| a.abs().total_cmp(&b.abs())).expect("p > 0");
        let omega2 = shift + 1.0 / theta;
        let mut next: Vec<Vec<f64>> = (0..p)
            .map(|c| {
                let mut v = vec![0.0; n];
                for (r, wr) in w.iter().enumerate() {
                    let q = u[(r, c)];
                    v.iter_mut().zip(wr).for_each(|(vi, x)| *vi += q * x);
                }
                v
            })
            .collect();
        m_orthonormalize(&mut next, &m)?;
        basis = next;
        if (omega2 - last).abs() < 1e-12 * omega2.abs() {
            return Ok(omega2.max(0.0).sqrt());
        }
        last = omega2;
    }
    Err(Error::EigensolverFailure("subspace iteration did not converge".into()))
}

fn m_orthonormalize(basis: &mut [Vec<f64>], m: &Sparse) -> Result<()> {
    for i in 0..basis.len() {
        for _ in 0..2 {
            let mv = matvec(m, &basis[i]);
            for k in 0..i {
                let c = linalg::dot(&basis[k], &mv);
                let (head, tail) = basis.split_at_mut(i);
                tail[0].iter_mut().zip(&head[k]).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nrm = linalg::dot(&basis[i], &matvec(m, &basis[i])).sqrt();
        if !(nrm > 0.0) {
            return Err(Error::EigensolverFailure("subspace collapsed".into()));
        }
        basis[i].iter_mut().for_each(|x| *x /= nrm);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchVerdict {
    /// `dim V = dim E` and both double projections are injective off the constants.
    NoSpuriousBranches,
    /// `P^V∘P^E` has a kernel: extra inertia-gravity branches.
    SpuriousInertiaGravity,
    /// `dim V < dim E`: extra Rossby branches.
    SpuriousRossby,
}

#[derive(Debug, Clone)]
pub struct BranchReport {
    pub pair: ElementPair,
    pub mesh: String,
    pub dim_e: usize,
    pub dim_s: usize,
    pub dim_v: usize,
    /// Kernel dimension of `P^V∘P^E` on mean-zero V; `None` for census-only pairs.
    pub kernel_pv_pe: Option<usize>,
    /// Kernel dimension of `P^E∘P^V` on mean-zero E.
    pub kernel_pe_pv: Option<usize>,
    pub verdict: BranchVerdict,
}

impl BranchReport {
    pub fn v_minus_e(&self) -> i64 {
        self.dim_v as i64 - self.dim_e as i64
    }
}

fn kernel_dim(columns: &[Vec<f64>], rows: usize) -> Result<usize> {
    let a = Mat::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    let sv = a.singular_values().map_err(|e| Error::EigensolverFailure(format!("{e:?}")))?;
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top).count();
    Ok(columns.len() - rank)
}

/// Kernel dimensions of the double projections of one pair on one mesh.
/// The constants are in both kernels by construction and are not counted.
pub fn projection_kernels(ops: &OperatorSet) -> Result<(usize, usize)> {
    let (nv, ne) = (ops.dim_v(), ops.dim_e());
    let unit = |n: usize, k: usize| {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        e
    };
    let cols_v: Vec<Vec<f64>> =
        (0..nv).map(|k| ops.projection_pv(&ops.projection_pe(&unit(nv, k))?)).collect::<Result<_>>()?;
    let cols_e: Vec<Vec<f64>> =
        (0..ne).map(|k| ops.projection_pe(&ops.projection_pv(&unit(ne, k))?)).collect::<Result<_>>()?;
    Ok((kernel_dim(&cols_v, nv)? - 1, kernel_dim(&cols_e, ne)? - 1))
}

/// Dimension comparison and double-projection kernels for `pair` on each
/// named mesh. BDM1-P0 is reported from the census only.
pub fn spurious_branch_probe(pair: ElementPair, meshes: &[(String, Mesh)]) -> Result<Vec<BranchReport>> {
    meshes
        .par_iter()
        .map(|(name, mesh)| {
            let census = dof_census(mesh, pair);
            let (dim_e, dim_s, dim_v) = if mesh.has_boundary() {
                let d = |s: SpaceKind| crate::elements::DofMap::new(s, mesh).n_dofs();
                (d(pair.stream), d(pair.velocity), d(pair.pressure))
            } else {
                (census.dim_e, census.dim_s, census.dim_v)
            };
            let (kv, ke) = if pair == ElementPair::BDM1_P0 {
                (None, None)
            } else {
                let f = vec![0.0; constant_stream(mesh, pair.stream).len()];
                let ops = OperatorSet::assemble_pair(mesh, pair, &f)?;
                let (a, b) = projection_kernels(&ops)?;
                (Some(a), Some(b))
            };
            let verdict = if dim_v < dim_e {
                BranchVerdict::SpuriousRossby
            } else if kv.unwrap_or(dim_v - dim_e) > 0 {
                BranchVerdict::SpuriousInertiaGravity
            } else {
                BranchVerdict::NoSpuriousBranches
            };
            Ok(BranchReport {
                pair,
                mesh: name.clone(),
                dim_e,
                dim_s,
                dim_v,
                kernel_pv_pe: kv,
                kernel_pe_pv: ke,
                verdict,
            })
        })
        .collect()
}

/// One row of the analysis CSV.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub pair: String,
    pub mesh: String,
    pub quantity: String,
    pub value: f64,
}

impl ReportRow {
    pub fn new(pair: impl Into<String>, mesh: impl Into<String>, quantity: impl Into<String>, value: f64) -> Self {
        Self { pair: pair.into(), mesh: mesh.into(), quantity: quantity.into(), value }
    }
}

pub fn census_rows(c: &ModeCensus, pair: &str, mesh: &str) -> Vec<ReportRow> {
    vec![
        ReportRow::new(pair, mesh, "zero_modes", c.zero_modes as f64),
        ReportRow::new(pair, mesh, "expected_zero", c.expected_zero as f64),
        ReportRow::new(pair, mesh, "ig_modes", c.ig_modes as f64),
        ReportRow::new(pair, mesh, "max_real_part", c.max_real_part),
        ReportRow::new(pair, mesh, "pairing_defect", c.pairing_defect),
    ]
}

pub fn branch_rows(r: &BranchReport) -> Vec<ReportRow> {
    let p = r.pair.name();
    let mut rows = vec![
        ReportRow::new(&p, &r.mesh, "dim_e", r.dim_e as f64),
        ReportRow::new(&p, &r.mesh, "dim_s", r.dim_s as f64),
        ReportRow::new(&p, &r.mesh, "dim_v", r.dim_v as f64),
        ReportRow::new(&p, &r.mesh, "dim_v_minus_dim_e", r.v_minus_e() as f64),
    ];
    if let Some(k) = r.kernel_pv_pe {
        rows.push(ReportRow::new(&p, &r.mesh, "kernel_pv_pe", k as f64));
    }
    if let Some(k) = r.kernel_pe_pv {
        rows.push(ReportRow::new(&p, &r.mesh, "kernel_pe_pv", k as f64));
    }
    rows
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["pair", "mesh", "quantity", "value"]).map_err(csv_error)?;
    for r in rows {
        w.write_record([r.pair.as_str(), r.mesh.as_str(), r.quantity.as_str(), &format!("{:e}", r.value)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
