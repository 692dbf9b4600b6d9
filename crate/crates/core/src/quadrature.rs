//! Quadrature on the reference triangle and the unit interval.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2;
//! points are stored in barycentric form `(λ0, λ1, λ2)` with `λ1 = ξ`,
//! `λ2 = η`. All assembly uses the 12-point degree-6 symmetric rule.
//! Projections of non-polynomial fields use a collapsed Gauss product rule
//! of much higher degree.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest polynomial degree any rule here is built for.
pub const MAX_DEGREE: usize = 40;

#[derive(Debug, Clone)]
pub struct TriangleRule<T = f64> {
    pub points: Vec<[T; 3]>,
    /// Reference-area weights, summing to 1/2.
    pub weights: Vec<T>,
    pub degree: usize,
}

#[derive(Debug, Clone)]
pub struct LineRule<T = f64> {
    /// Abscissae in [0, 1].
    pub points: Vec<T>,
    /// Weights summing to 1.
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Scalar> TriangleRule<T> {
    /// Symmetric 12-point rule exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        // (weight, orbit generator) with weights normalised to sum 1
        const S21: [(f64, f64); 2] = [
            (0.116_786_275_726_379_366_03, 0.249_286_745_170_910_421_136),
            (0.050_844_906_370_206_816_921, 0.063_089_014_491_502_228_340),
        ];
        const S111: (f64, f64, f64, f64) = (
            0.082_851_075_618_373_575_194,
            0.053_145_049_844_816_947_353,
            0.310_352_451_033_784_405_416,
            0.636_502_499_121_398_647_231,
        );
        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        for &(w, a) in &S21 {
            let b = 1.0 - 2.0 * a;
            for p in [[b, a, a], [a, b, a], [a, a, b]] {
                points.push(p.map(T::of));
                weights.push(T::of(0.5 * w));
            }
        }
        let (w, a, b, c) = S111;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            points.push(p.map(T::of));
            weights.push(T::of(0.5 * w));
        }
        Self { points, weights, degree: 6 }
    }

    /// Stroud conical product rule: Gauss-Legendre in each direction of the
    /// collapsed square, exact for degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = 0.5 * (x[i] + 1.0);
            let wu = 0.5 * w[i];
            for j in 0..n {
                let v = 0.5 * (x[j] + 1.0);
                let wv = 0.5 * w[j];
                let xi = u;
                let eta = v * (1.0 - u);
                points.push([1.0 - xi - eta, xi, eta].map(T::of));
                weights.push(T::of(wu * wv * (1.0 - u)));
            }
        }
        Self { points, weights, degree: 2 * n - 2 }
    }

    /// Rule exact for at least `degree`. Degrees up to 6 share the
    /// 12-point rule.
    pub fn with_degree(degree: usize) -> Result<Self> {
        if degree <= 6 {
            Ok(Self::degree6())
        } else if degree <= MAX_DEGREE {
            Ok(Self::collapsed_gauss(degree.div_ceil(2) + 1))
        } else {
            Err(Error::UnsupportedDegree(degree))
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl<T: Scalar> LineRule<T> {
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self {
            points: x.iter().map(|&t| T::of(0.5 * (t + 1.0))).collect(),
            weights: w.iter().map(|&t| T::of(0.5 * t)).collect(),
            degree: 2 * n - 1,
        }
    }

    pub fn with_degree(degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        Ok(Self::gauss(degree / 2 + 1))
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, p_prev) = legendre(n, z);
            dp = n as f64 * (z * p - p_prev) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre(n, z);
        dp = if p.is_finite() { n as f64 * (z * p - p_prev) / (z * z - 1.0) } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}
