use super::OperatorSet;
use crate::error::{Error, Result};
use crate::linalg::{self, matvec, matvec_t};
use crate::mesh::GeometryKind;
use faer::{Mat, Side};

/// `u = ∇⊥ψ + Dφ + h` with the three parts mutually `M_S`-orthogonal.
#[derive(Debug, Clone)]
pub struct HelmholtzParts {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub harmonic: Vec<f64>,
}

fn neg(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = -*x);
    v
}

impl OperatorSet {
    /// `Dφ = -M_S⁻¹ Bᵀ φ`.
    pub fn discrete_gradient(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.ms_solver()?.solve(&neg(matvec_t(self.b_div(), phi)))
    }

    /// `ξ = -M_E⁻¹ W u`.
    pub fn vorticity(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.me_solver()?.solve(&neg(matvec(self.w_curl(), u)))
    }

    /// `∇⊥ψ` as exact coefficients in S.
    pub fn curl_apply(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let c = self
            .curl()
            .ok_or_else(|| Error::param(format!("no exact curl map for {}", self.pair().name())))?;
        Ok(matvec(c, psi))
    }

    /// Solve `L x = r` on mean-zero V, where `L = B M_S⁻¹ Bᵀ`.
    pub fn mixed_poisson(&self, r: &[f64]) -> Result<Vec<f64>> {
        let ns = self.dim_s();
        let mut rhs = vec![0.0; ns + self.dim_v()];
        for (dst, v) in rhs[ns..].iter_mut().zip(r) {
            *dst = -v;
        }
        let x = self.mixed_solver()?.solve(&rhs)?;
        Ok(x[ns..].to_vec())
    }

    /// Streamfunction `ψ` (mean zero) of the divergence-free part of `u`.
    pub fn streamfunction(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.ke_solver()?.solve(&matvec(self.w_curl(), u))
    }

    /// Velocity potential `φ` (mean zero) of the irrotational part of `u`.
    pub fn velocity_potential(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.mixed_poisson(&neg(matvec(self.b_div(), u)))
    }

    pub fn helmholtz_decompose(&self, u: &[f64]) -> Result<HelmholtzParts> {
        let psi = self.streamfunction(u)?;
        let phi = self.velocity_potential(u)?;
        let rot = self.curl_apply(&psi)?;
        let grad = self.discrete_gradient(&phi)?;
        let harmonic: Vec<f64> = (0..u.len()).map(|k| u[k] - rot[k] - grad[k]).collect();
        if self.mesh().geometry_kind() == GeometryKind::Sphere {
            let hn = linalg::dot(&harmonic, &matvec(self.m_s(), &harmonic)).sqrt();
            let un = linalg::dot(u, &matvec(self.m_s(), u)).sqrt();
            if hn > 1e-9 * un.max(f64::MIN_POSITIVE) {
                return Err(Error::invariant(format!("harmonic part {hn:e} on the sphere")));
            }
        }
        Ok(HelmholtzParts { psi, phi, harmonic })
    }

    /// `P^E φ`: mean-zero `x ∈ E` with `K_E x = G Dφ`.
    pub fn projection_pe(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut phi = phi.to_vec();
        self.remove_mean_v(&mut phi);
        let d = self.discrete_gradient(&phi)?;
        self.ke_solver()?.solve(&matvec(self.g_grad(), &d))
    }

    /// `P^V ψ`: mean-zero `x ∈ V` with `L x = -B M_S⁻¹ Gᵀ ψ`.
    pub fn projection_pv(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let mut psi = psi.to_vec();
        self.remove_mean_e(&mut psi);
        let g = self.ms_solver()?.solve(&matvec_t(self.g_grad(), &psi))?;
        self.mixed_poisson(&neg(matvec(self.b_div(), &g)))
    }

    pub fn remove_mean_v(&self, x: &mut [f64]) {
        let w = matvec(self.m_v(), self.constant_v());
        let m = linalg::dot(&w, x) / linalg::dot(&w, self.constant_v());
        x.iter_mut().zip(self.constant_v()).for_each(|(xi, k)| *xi -= m * k);
    }

    pub fn remove_mean_e(&self, x: &mut [f64]) {
        let w = matvec(self.m_e(), self.constant_e());
        let m = linalg::dot(&w, x) / linalg::dot(&w, self.constant_e());
        x.iter_mut().zip(self.constant_e()).for_each(|(xi, k)| *xi -= m * k);
    }

    /// Dense `L = B M_S⁻¹ Bᵀ`.
    pub fn dense_mixed_laplacian(&self) -> Result<Mat<f64>> {
        let nv = self.dim_v();
        let bt = linalg::transpose(self.b_div());
        let ms = self.ms_solver()?;
        let mut l = Mat::zeros(nv, nv);
        let mut e = vec![0.0; nv];
        for j in 0..nv {
            e[j] = 1.0;
            let y = ms.solve(&matvec(&bt, &e))?;
            let col = matvec(self.b_div(), &y);
            for i in 0..nv {
                l[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        Ok(l)
    }

    /// Generalised eigenvalues of `L η = μ M_V η`, ascending.
    pub fn mixed_laplacian_eigenvalues(&self) -> Result<Vec<f64>> {
        let l = self.dense_mixed_laplacian()?;
        let at = linalg::congruence(&l, &linalg::to_dense(self.m_v()))?;
        let n = l.nrows();
        let sym = Mat::from_fn(n, n, |i, j| 0.5 * (at[(i, j)] + at[(j, i)]));
        let ev = sym
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::EigensolverFailure(format!("{e:?}")))?;
        let mut v: Vec<f64> = ev.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        Ok(v)
    }

    /// Discrete inf-sup constant on mean-zero V: square root of the smallest
    /// nonzero generalised eigenvalue of `L η = μ M_V η`.
    pub fn inf_sup_estimate(&self) -> Result<f64> {
        let ev = self.mixed_laplacian_eigenvalues()?;
        let top = ev.last().copied().unwrap_or(0.0);
        let kernel = ev.iter().filter(|&&x| x.abs() <= 1e-10 * top).count();
        if kernel != 1 {
            return Err(Error::EigensolverFailure(format!(
                "expected a one-dimensional pressure kernel, found {kernel}"
            )));
        }
        Ok(ev[1].max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use crate::elements::{ElementPair, SpaceKind};
    use crate::linalg::{dot, matvec};
    use crate::mesh::{build_icosahedral_sphere, build_periodic_square, Mesh};
    use crate::operators::{constant_stream, OperatorSet};

    fn ops(mesh: &Mesh) -> OperatorSet {
        let f = constant_stream(mesh, SpaceKind::StreamE);
        OperatorSet::assemble_pair(mesh, ElementPair::BDFM1_P1DG, &f).unwrap()
    }

    fn wave(n: usize, seed: f64) -> Vec<f64> {
        (0..n).map(|k| ((k as f64 + 1.0) * seed).sin()).collect()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let m = build_periodic_square::<f64>(3, 1.0, 1.0).unwrap();
        let o = ops(&m);
        let d = o.discrete_gradient(o.constant_v()).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-11));
        let d = o.discrete_gradient(&wave(o.dim_v(), 0.37)).unwrap();
        assert!(d.iter().any(|x| x.abs() > 1e-3));
    }

    #[test]
    fn curl_and_gradient_ranges_are_orthogonal() {
        let m = build_periodic_square::<f64>(3, 1.0, 1.0).unwrap();
        let o = ops(&m);
        let u = o.curl_apply(&wave(o.dim_e(), 0.61)).unwrap();
        let g = o.discrete_gradient(&wave(o.dim_v(), 0.23)).unwrap();
        assert!(dot(&u, &matvec(o.m_s(), &g)).abs() < 1e-10);
        let xi = o.vorticity(&g).unwrap();
        assert!(xi.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn curl_of_constant_vanishes_and_divergence_of_curl_is_zero() {
        let m = build_icosahedral_sphere::<f64>(1, 1.0).unwrap();
        let o = ops(&m);
        assert!(o.curl_apply(o.constant_e()).unwrap().iter().all(|x| x.abs() < 1e-12));
        let u = o.curl_apply(&wave(o.dim_e(), 0.9)).unwrap();
        assert!(matvec(o.b_div(), &u).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn helmholtz_on_sphere_has_no_harmonic_part() {
        let m = build_icosahedral_sphere::<f64>(1, 1.0).unwrap();
        let o = ops(&m);
        let u = wave(o.dim_s(), 0.41);
        let h = o.helmholtz_decompose(&u).unwrap();
        let rot = o.curl_apply(&h.psi).unwrap();
        let grad = o.discrete_gradient(&h.phi).unwrap();
        for k in 0..u.len() {
            assert!((rot[k] + grad[k] - u[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_velocity_is_harmonic_on_the_torus() {
        let m = build_periodic_square::<f64>(4, 1.0, 1.0).unwrap();
        let o = ops(&m);
        let u = crate::elements::project_pi_s(&m, |_| [1.0, 0.5, 0.0], &Default::default()).unwrap();
        let h = o.helmholtz_decompose(&u).unwrap();
        assert!(h.psi.iter().all(|x| x.abs() < 1e-10));
        assert!(h.phi.iter().all(|x| x.abs() < 1e-10));
        for k in 0..u.len() {
            assert!((h.harmonic[k] - u[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn inf_sup_is_positive() {
        let m = build_periodic_square::<f64>(2, 1.0, 1.0).unwrap();
        let o = ops(&m);
        assert!(o.inf_sup_estimate().unwrap() > 0.1);
    }
}
