use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{ColRef, Mat};

pub type Sparse = SparseColMat<usize, f64>;

/// Relative residual a direct solve must reach after refinement.
pub const SOLVE_TOLERANCE: f64 = 1e-11;

pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Sparse> {
    let t: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(nrows, ncols, &t)
        .map_err(|e| Error::invariant(format!("sparse assembly failed: {e:?}")))
}

pub fn matvec(a: &Sparse, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len(), "matvec dimension");
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

pub fn matvec_t(a: &Sparse, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), x.len(), "matvec_t dimension");
    let y = a.transpose() * ColRef::from_slice(x);
    y.iter().copied().collect()
}

pub fn transpose(a: &Sparse) -> Sparse {
    a.transpose().to_col_major().expect("transpose")
}

/// Nonzero entries as `(row, col, value)`.
pub fn entries(a: &Sparse) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(a.compute_nnz());
    for j in 0..a.ncols() {
        let rows = a.row_idx_of_col_raw(j);
        let vals = a.val_of_col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            out.push((i, j, v));
        }
    }
    out
}

pub fn to_dense(a: &Sparse) -> Mat<f64> {
    let mut m = Mat::zeros(a.nrows(), a.ncols());
    for (i, j, v) in entries(a) {
        m[(i, j)] += v;
    }
    m
}

/// Largest |a_ij + a_ji|, zero for a skew matrix.
pub fn skew_defect(a: &Sparse) -> f64 {
    let d = to_sparse_sum(a, &transpose(a), 1.0);
    entries(&d).iter().fold(0.0, |m, e| m.max(e.2.abs()))
}

/// `a + s b`.
pub fn to_sparse_sum(a: &Sparse, b: &Sparse, s: f64) -> Sparse {
    let mut t = entries(a);
    t.extend(entries(b).into_iter().map(|(i, j, v)| (i, j, s * v)));
    from_triplets(a.nrows(), a.ncols(), &t).expect("same shape")
}

/// Matrix Market coordinate format, 1-based.
pub fn write_matrix_market(path: &std::path::Path, a: &Sparse) -> Result<()> {
    use std::io::Write;
    let e = entries(a);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), e.len())?;
    for (i, j, v) in e {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse LU with one step of iterative refinement and a residual check.
pub struct DirectSolver {
    what: String,
    a: Sparse,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver").field("what", &self.what).field("n", &self.a.nrows()).finish()
    }
}

impl DirectSolver {
    pub fn new(what: impl Into<String>, a: Sparse) -> Result<Self> {
        let what = what.into();
        if a.nrows() != a.ncols() {
            return Err(Error::param(format!("{what}: matrix is not square")));
        }
        let lu = a
            .sp_lu()
            .map_err(|e| Error::SolverFailure { what: format!("{what}: factorisation {e:?}"), residual: f64::NAN })?;
        Ok(Self { what, a, lu })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &Sparse {
        &self.a
    }

    fn raw(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve(ColRef::from_slice(b)).iter().copied().collect()
    }

    /// Solve `A x = b`, reporting failure if the relative residual exceeds
    /// [`SOLVE_TOLERANCE`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.raw(b);
        let r: Vec<f64> = b.iter().zip(matvec(&self.a, &x)).map(|(bi, ax)| bi - ax).collect();
        let dx = self.raw(&r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        let res = self.residual(&x, b);
        if !(res < SOLVE_TOLERANCE) {
            return Err(Error::SolverFailure { what: self.what.clone(), residual: res });
        }
        Ok(x)
    }

    /// `‖b - A x‖ / (‖A x‖ + ‖b‖)`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = matvec(&self.a, x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
        norm(&r) / (norm(&ax) + norm(b)).max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddle_system_solves() {
        let a = from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (0, 2, 1.0), (2, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let s = DirectSolver::new("saddle", a.clone()).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = s.solve(&b).unwrap();
        let ax = matvec(&a, &x);
        for (p, q) in ax.iter().zip(b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicates_are_summed_and_transpose_works() {
        let a = from_triplets(2, 3, &[(0, 1, 1.0), (0, 1, 2.0), (1, 2, -1.0)]).unwrap();
        assert_eq!(matvec(&a, &[0.0, 1.0, 1.0]), vec![3.0, -1.0]);
        assert_eq!(matvec_t(&a, &[1.0, 1.0]), vec![0.0, 3.0, -1.0]);
        assert_eq!(transpose(&a).nrows(), 3);
        assert_eq!(skew_defect(&from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap()), 0.0);
    }
}
