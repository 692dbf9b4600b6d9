use super::sparse::{dot, entries, from_triplets, DirectSolver, Sparse};
use crate::error::{Error, Result};

/// Copy of `a` with row and column `p` replaced by the identity.
pub fn pinned(a: &Sparse, p: usize) -> Result<Sparse> {
    let mut t: Vec<_> = entries(a).into_iter().filter(|&(i, j, _)| i != p && j != p).collect();
    t.push((p, p, 1.0));
    from_triplets(a.nrows(), a.ncols(), &t)
}

/// Solver for a singular system whose kernel is spanned by `kernel`.
///
/// The right-hand side is deflated against `weight` (the mass-weighted
/// kernel vector), one entry where the kernel is nonzero is pinned, and the
/// solution is shifted to have zero weighted mean.
#[derive(Debug)]
pub struct NullspaceSolver {
    inner: DirectSolver,
    pin: usize,
    kernel: Vec<f64>,
    weight: Vec<f64>,
    kw: f64,
}

impl NullspaceSolver {
    pub fn new(what: &str, a: &Sparse, kernel: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        let pin = kernel
            .iter()
            .position(|&k| k != 0.0)
            .ok_or_else(|| Error::param(format!("{what}: kernel vector is zero")))?;
        let kw = dot(&kernel, &weight);
        if !(kw.abs() > 0.0) {
            return Err(Error::param(format!("{what}: kernel has zero weighted norm")));
        }
        let inner = DirectSolver::new(what, pinned(a, pin)?)?;
        Ok(Self { inner, pin, kernel, weight, kw })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Remove the component of `x` along the kernel in the weighted sense.
    pub fn remove_mean(&self, x: &mut [f64]) {
        let m = dot(&self.weight, x) / self.kw;
        x.iter_mut().zip(&self.kernel).for_each(|(xi, k)| *xi -= m * k);
    }

    /// Project `b` onto the range: `b - (kᵀb / kᵀw) w`.
    pub fn deflate(&self, b: &mut [f64]) {
        let m = dot(&self.kernel, b) / self.kw;
        b.iter_mut().zip(&self.weight).for_each(|(bi, w)| *bi -= m * w);
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = b.to_vec();
        self.deflate(&mut rhs);
        rhs[self.pin] = 0.0;
        let mut x = self.inner.solve(&rhs)?;
        self.remove_mean(&mut x);
        Ok(x)
    }
}
