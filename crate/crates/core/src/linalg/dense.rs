//! Small dense LU with partial pivoting for element-local systems.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major LU factors of an `n × n` matrix.
#[derive(Debug, Clone)]
pub struct SmallLu<T: Scalar = f64> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> SmallLu<T> {
    pub fn new(n: usize, mut a: Vec<T>) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix size");
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > T::epsilon() * T::of(16.0) * scale) {
                return Err(Error::invariant(format!("singular {n}x{n} local system")));
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let m = a[r * n + k] / d;
                a[r * n + k] = m;
                for c in k + 1..n {
                    let v = a[k * n + c];
                    a[r * n + c] -= m * v;
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for c in 0..r {
                let v = x[c];
                x[r] -= self.lu[r * n + c] * v;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let v = x[c];
                x[r] -= self.lu[r * n + c] * v;
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }

    /// Solve with the transposed matrix.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for r in 0..n {
            for c in 0..r {
                let v = y[c];
                y[r] -= self.lu[c * n + r] * v;
            }
            y[r] /= self.lu[r * n + r];
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let v = y[c];
                y[r] -= self.lu[c * n + r] * v;
            }
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Dense inverse, row-major.
    pub fn inverse(&self) -> Vec<T> {
        let n = self.n;
        let mut inv = vec![T::zero(); n * n];
        let mut e = vec![T::zero(); n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[c] = T::one();
            let col = self.solve(&e);
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = SmallLu::new(3, a.clone()).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        for r in 0..3 {
            let ax: f64 = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
            assert!((ax - b[r]).abs() < 1e-14);
        }
        let y = lu.solve_transpose(&b);
        for c in 0..3 {
            let aty: f64 = (0..3).map(|r| a[r * 3 + c] * y[r]).sum();
            assert!((aty - b[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        assert!(SmallLu::new(2, vec![1.0, 2.0, 2.0, 4.0]).is_err());
    }
}
