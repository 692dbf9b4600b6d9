use crate::error::{Error, Result};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};

/// `R⁻¹ A R⁻ᵀ` where `M = R Rᵀ` is the Cholesky factorisation of an SPD `M`.
///
/// Eigenvalues of the result are those of the pencil `A x = λ M x`.
pub fn congruence(a: &Mat<f64>, m: &Mat<f64>) -> Result<Mat<f64>> {
    let chol = m.llt(Side::Lower).map_err(|e| Error::EigensolverFailure(format!("Cholesky of mass matrix: {e:?}")))?;
    let r = chol.L();
    let par = Par::rayon(0);
    let mut x = a.clone();
    solve_lower_triangular_in_place(r, x.as_mut(), par);
    let mut y = x.transpose().to_owned();
    solve_lower_triangular_in_place(r, y.as_mut(), par);
    Ok(y.transpose().to_owned())
}

/// Block-diagonal dense matrix.
pub fn block_diag(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut m = Mat::zeros(na + nb, na + nb);
    for j in 0..na {
        for i in 0..na {
            m[(i, j)] = a[(i, j)];
        }
    }
    for j in 0..nb {
        for i in 0..nb {
            m[(na + i, na + j)] = b[(i, j)];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pencil_eigenvalues() {
        // A = diag(2, 6), M = diag(1, 3): pencil eigenvalues 2, 2
        let a = Mat::from_fn(2, 2, |i, j| if i == j { [2.0, 6.0][i] } else { 0.0 });
        let m = Mat::from_fn(2, 2, |i, j| if i == j { [1.0, 3.0][i] } else { 0.0 });
        let c = congruence(&a, &m).unwrap();
        assert!((c[(0, 0)] - 2.0).abs() < 1e-14 && (c[(1, 1)] - 2.0).abs() < 1e-14);
        let full = Mat::from_fn(2, 2, |i, j| [[4.0, 1.0], [1.0, 3.0]][i][j]);
        let c = congruence(&full, &full).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-14 && c[(0, 1)].abs() < 1e-14);
    }
}
