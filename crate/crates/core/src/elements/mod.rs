//! Local bases of the streamfunction, velocity and pressure spaces.
//!
//! Basis functions are evaluated directly on each flat physical cell from
//! barycentric coordinates. For an affine cell this is the contravariant
//! Piola image of the reference basis, rescaled so every degree of freedom
//! keeps its nodal meaning (unit normal component at an edge node, unit
//! tangential component at an edge midpoint).
//!
//! Local numbering, with edge `i` opposite vertex `i` and running from
//! vertex `i+1` to vertex `i+2`:
//!
//! * `StreamE`: `[V0, V1, V2, E0, E1, E2, B]`, vertex quadratics, edge
//!   quadratics and the bubble `B = 27 λ0 λ1 λ2`.
//! * `VelocityBdfm1`: `[N(0,0), N(0,1), N(1,0), N(1,1), N(2,0), N(2,1), A0, A1, A2]`
//!   where `N(i,a)` has unit outward normal component at vertex
//!   `i+1+a` of edge `i` and `A_i = 4 t_i λ_{i+1} λ_{i+2}`.
//! * `VelocityBdm1`: the six `N(i,a)`.
//! * `VelocityRt0`: `φ_i = (x - x_i) / det`, unit outward flux through edge `i`.

mod dofmap;
mod projection;

pub use dofmap::{dof_census, DofCensus, DofMap, ElementPair};
pub use projection::{
    curl_matrix_local, project_pi_e, project_pi_s, project_pi_v, pi_s_local_matrix, CurlMap, ProjectionRules,
};

use crate::error::Result;
use crate::mesh::CellGeometry;
use crate::quadrature::TriangleRule;
use crate::scalar::{self, Scalar, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Continuous P2 plus cubic bubble.
    StreamE,
    /// Continuous P1, the streamfunction space paired with RT0-P0.
    StreamP1,
    /// Continuous P2, the streamfunction space paired with BDM1-P0.
    StreamP2,
    VelocityBdfm1,
    VelocityBdm1,
    VelocityRt0,
    PressureP1dg,
    PressureP0,
}

impl SpaceKind {
    pub fn local_dim(self) -> usize {
        match self {
            SpaceKind::StreamE => 7,
            SpaceKind::StreamP1 => 3,
            SpaceKind::StreamP2 => 6,
            SpaceKind::VelocityBdfm1 => 9,
            SpaceKind::VelocityBdm1 => 6,
            SpaceKind::VelocityRt0 => 3,
            SpaceKind::PressureP1dg => 3,
            SpaceKind::PressureP0 => 1,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, SpaceKind::VelocityBdfm1 | SpaceKind::VelocityBdm1 | SpaceKind::VelocityRt0)
    }

    /// Highest polynomial degree of the local functions.
    pub fn degree(self) -> usize {
        match self {
            SpaceKind::StreamE => 3,
            SpaceKind::StreamP2 | SpaceKind::VelocityBdfm1 => 2,
            SpaceKind::StreamP1 | SpaceKind::VelocityBdm1 | SpaceKind::VelocityRt0 | SpaceKind::PressureP1dg => 1,
            SpaceKind::PressureP0 => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::StreamE => "E(P2+B)",
            SpaceKind::StreamP1 => "P1",
            SpaceKind::StreamP2 => "P2",
            SpaceKind::VelocityBdfm1 => "BDFM1",
            SpaceKind::VelocityBdm1 => "BDM1",
            SpaceKind::VelocityRt0 => "RT0",
            SpaceKind::PressureP1dg => "P1DG",
            SpaceKind::PressureP0 => "P0",
        }
    }
}

/// Values and first derivatives of a scalar basis at one point.
pub fn eval_scalar<T: Scalar>(space: SpaceKind, g: &CellGeometry<T>, l: [T; 3], vals: &mut [T], grads: &mut [Vec3<T>]) {
    let gl = &g.grad_lambda;
    let two = T::of(2.0);
    let four = T::of(4.0);
    let vertex_quadratics = |vals: &mut [T], grads: &mut [Vec3<T>]| {
        for i in 0..3 {
            vals[i] = l[i] * (two * l[i] - T::one());
            grads[i] = scalar::scale(four * l[i] - T::one(), gl[i]);
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            vals[3 + i] = four * l[a] * l[b];
            grads[3 + i] = scalar::scale(four, scalar::add(scalar::scale(l[b], gl[a]), scalar::scale(l[a], gl[b])));
        }
    };
    match space {
        SpaceKind::StreamE => {
            vertex_quadratics(vals, grads);
            let c = T::of(27.0);
            vals[6] = c * l[0] * l[1] * l[2];
            let mut gb = scalar::scale(l[1] * l[2], gl[0]);
            gb = scalar::add(gb, scalar::scale(l[0] * l[2], gl[1]));
            gb = scalar::add(gb, scalar::scale(l[0] * l[1], gl[2]));
            grads[6] = scalar::scale(c, gb);
        }
        SpaceKind::StreamP2 => vertex_quadratics(vals, grads),
        SpaceKind::StreamP1 | SpaceKind::PressureP1dg => {
            for i in 0..3 {
                vals[i] = l[i];
                grads[i] = gl[i];
            }
        }
        SpaceKind::PressureP0 => {
            vals[0] = T::one();
            grads[0] = scalar::zero3();
        }
        _ => panic!("{} is not a scalar space", space.name()),
    }
}

/// Values and divergences of a vector basis at one point.
pub fn eval_vector<T: Scalar>(space: SpaceKind, g: &CellGeometry<T>, l: [T; 3], vals: &mut [Vec3<T>], divs: &mut [T]) {
    let gl = &g.grad_lambda;
    match space {
        SpaceKind::VelocityBdfm1 | SpaceKind::VelocityBdm1 => {
            for i in 0..3 {
                for a in 0..2 {
                    let v = (i + 1 + a) % 3;
                    let w = 3 - i - v;
                    let t = g.edge_tangent[w];
                    let s = T::one() / scalar::dot(t, g.edge_normal[i]);
                    vals[2 * i + a] = scalar::scale(s * l[v], t);
                    divs[2 * i + a] = s * scalar::dot(t, gl[v]);
                }
            }
            if space == SpaceKind::VelocityBdfm1 {
                let four = T::of(4.0);
                for i in 0..3 {
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    let t = g.edge_tangent[i];
                    vals[6 + i] = scalar::scale(four * l[a] * l[b], t);
                    let grad = scalar::add(scalar::scale(l[b], gl[a]), scalar::scale(l[a], gl[b]));
                    divs[6 + i] = four * scalar::dot(t, grad);
                }
            }
        }
        SpaceKind::VelocityRt0 => {
            let x = g.point(l);
            let inv = T::one() / g.det_factor;
            for i in 0..3 {
                vals[i] = scalar::scale(inv, scalar::sub(x, g.corners[i]));
                divs[i] = T::of(2.0) * inv;
            }
        }
        _ => panic!("{} is not a vector space", space.name()),
    }
}

/// Basis values and derivatives at the points of a quadrature rule.
/// Arrays are indexed `[point * local_dim + basis]`.
#[derive(Debug, Clone)]
pub struct ElementTabulation<T: Scalar = f64> {
    pub space: SpaceKind,
    pub points: Vec<[T; 3]>,
    /// Physical weights (reference weights times `det_factor`).
    pub weights: Vec<T>,
    /// Scalar spaces: values. Empty for vector spaces.
    pub values: Vec<T>,
    /// Scalar spaces: gradients. Empty for vector spaces.
    pub gradients: Vec<Vec3<T>>,
    /// Vector spaces: values. Empty for scalar spaces.
    pub vectors: Vec<Vec3<T>>,
    /// Vector spaces: divergences. Empty for scalar spaces.
    pub divergences: Vec<T>,
}

impl<T: Scalar> ElementTabulation<T> {
    pub fn dim(&self) -> usize {
        self.space.local_dim()
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn value(&self, p: usize, j: usize) -> T {
        self.values[p * self.dim() + j]
    }

    #[inline]
    pub fn gradient(&self, p: usize, j: usize) -> Vec3<T> {
        self.gradients[p * self.dim() + j]
    }

    #[inline]
    pub fn vector(&self, p: usize, j: usize) -> Vec3<T> {
        self.vectors[p * self.dim() + j]
    }

    #[inline]
    pub fn divergence(&self, p: usize, j: usize) -> T {
        self.divergences[p * self.dim() + j]
    }
}

/// Tabulate `space` on a physical cell.
pub fn tabulate_on<T: Scalar>(space: SpaceKind, g: &CellGeometry<T>, rule: &TriangleRule<T>) -> ElementTabulation<T> {
    let n = space.local_dim();
    let np = rule.len();
    let mut tab = ElementTabulation {
        space,
        points: rule.points.clone(),
        weights: rule.weights.iter().map(|&w| w * g.det_factor).collect(),
        values: Vec::new(),
        gradients: Vec::new(),
        vectors: Vec::new(),
        divergences: Vec::new(),
    };
    if space.is_vector() {
        tab.vectors = vec![scalar::zero3(); np * n];
        tab.divergences = vec![T::zero(); np * n];
        for (p, l) in rule.points.iter().enumerate() {
            eval_vector(space, g, *l, &mut tab.vectors[p * n..(p + 1) * n], &mut tab.divergences[p * n..(p + 1) * n]);
        }
    } else {
        tab.values = vec![T::zero(); np * n];
        tab.gradients = vec![scalar::zero3(); np * n];
        for (p, l) in rule.points.iter().enumerate() {
            eval_scalar(space, g, *l, &mut tab.values[p * n..(p + 1) * n], &mut tab.gradients[p * n..(p + 1) * n]);
        }
    }
    tab
}

/// Tabulate `space` on the reference triangle with a rule exact for
/// `degree`, which must be at least 6.
pub fn tabulate<T: Scalar>(space: SpaceKind, degree: usize) -> Result<ElementTabulation<T>> {
    if degree < 6 {
        return Err(crate::Error::UnsupportedDegree(degree));
    }
    let rule = TriangleRule::with_degree(degree)?;
    Ok(tabulate_on(space, &CellGeometry::reference(), &rule))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed() -> CellGeometry<f64> {
        CellGeometry::from_corners([[0.2, 0.1, 0.0], [1.3, 0.4, 0.2], [0.5, 1.1, -0.3]]).unwrap()
    }

    fn eval_vec(space: SpaceKind, g: &CellGeometry<f64>, l: [f64; 3]) -> (Vec<Vec3<f64>>, Vec<f64>) {
        let n = space.local_dim();
        let mut v = vec![[0.0; 3]; n];
        let mut d = vec![0.0; n];
        eval_vector(space, g, l, &mut v, &mut d);
        (v, d)
    }

    fn edge_point(i: usize, s: f64) -> [f64; 3] {
        let mut l = [0.0; 3];
        l[(i + 1) % 3] = 1.0 - s;
        l[(i + 2) % 3] = s;
        l
    }

    #[test]
    fn bdfm_normal_nodes() {
        for g in [CellGeometry::reference(), skewed()] {
            let (_, _) = eval_vec(SpaceKind::VelocityBdfm1, &g, [1.0 / 3.0; 3]);
            for i in 0..3 {
                for a in 0..2 {
                    let at = edge_point(i, a as f64);
                    let (v, _) = eval_vec(SpaceKind::VelocityBdfm1, &g, at);
                    for j in 0..9 {
                        let expect = if j == 2 * i + a { 1.0 } else { 0.0 };
                        assert!((scalar::dot(v[j], g.edge_normal[i]) - expect).abs() < 1e-13, "edge {i} node {a} basis {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn augmentation_is_tangential() {
        let g = skewed();
        for i in 0..3 {
            let (v, _) = eval_vec(SpaceKind::VelocityBdfm1, &g, edge_point(i, 0.5));
            assert!((scalar::dot(v[6 + i], g.edge_tangent[i]) - 1.0).abs() < 1e-14);
            for e in 0..3 {
                for s in [0.0, 0.13, 0.5, 0.77, 1.0] {
                    let (v, _) = eval_vec(SpaceKind::VelocityBdfm1, &g, edge_point(e, s));
                    assert!(scalar::dot(v[6 + i], g.edge_normal[e]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn bubble_values() {
        let g = skewed();
        let mut v = [0.0; 7];
        let mut gr = [[0.0; 3]; 7];
        eval_scalar(SpaceKind::StreamE, &g, [1.0 / 3.0; 3], &mut v, &mut gr);
        assert!((v[6] - 1.0).abs() < 1e-14);
        for (p, q) in gr[6].iter().zip([0.0; 3]) {
            assert!((p - q).abs() < 1e-13);
        }
        eval_scalar(SpaceKind::StreamE, &g, edge_point(1, 0.3), &mut v, &mut gr);
        assert_eq!(v[6], 0.0);
    }

    #[test]
    fn rt0_unit_flux() {
        let g = skewed();
        for i in 0..3 {
            let (v, d) = eval_vec(SpaceKind::VelocityRt0, &g, edge_point(i, 0.4));
            for j in 0..3 {
                let flux = scalar::dot(v[j], g.edge_normal[i]) * g.edge_length[i];
                assert!((flux - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
            assert!((d[0] - 2.0 / g.det_factor).abs() < 1e-14);
        }
    }

    /// Divergence by central differences in the cell plane.
    #[test]
    fn divergences_match_finite_differences() {
        let g = skewed();
        let l0 = [0.3, 0.45, 0.25];
        let h = 1e-6;
        for space in [SpaceKind::VelocityBdfm1, SpaceKind::VelocityRt0] {
            let (_, d) = eval_vec(space, &g, l0);
            for j in 0..space.local_dim() {
                let t1 = g.edge_tangent[0];
                let t2 = scalar::cross(g.normal, t1);
                let mut total = 0.0;
                for dir in [t1, t2] {
                    let shift = |s: f64| {
                        let mut l = l0;
                        for k in 0..3 {
                            l[k] += scalar::dot(g.grad_lambda[k], dir) * s;
                        }
                        eval_vec(space, &g, l).0[j]
                    };
                    let dv = scalar::scale(0.5 / h, scalar::sub(shift(h), shift(-h)));
                    total += scalar::dot(dv, dir);
                }
                assert!((total - d[j]).abs() < 1e-6, "{} basis {j}: {total} vs {}", space.name(), d[j]);
            }
        }
    }

    #[test]
    fn tabulation_weights_and_dims() {
        for space in [
            SpaceKind::StreamE,
            SpaceKind::VelocityBdfm1,
            SpaceKind::PressureP1dg,
            SpaceKind::VelocityRt0,
            SpaceKind::PressureP0,
        ] {
            let t = tabulate::<f64>(space, 6).unwrap();
            let w: f64 = t.weights.iter().sum();
            assert!((w - 0.5).abs() < 1e-15);
            assert_eq!(t.dim(), space.local_dim());
        }
        assert!(tabulate::<f64>(SpaceKind::StreamE, 4).is_err());
    }

    /// Gram matrices of the local bases are nonsingular.
    #[test]
    fn local_bases_are_independent() {
        let g = skewed();
        let rule = TriangleRule::degree6();
        for space in [SpaceKind::StreamE, SpaceKind::VelocityBdfm1, SpaceKind::PressureP1dg] {
            let t = tabulate_on(space, &g, &rule);
            let n = space.local_dim();
            let mut gram = vec![0.0; n * n];
            for p in 0..t.n_points() {
                for a in 0..n {
                    for b in 0..n {
                        gram[a * n + b] += t.weights[p]
                            * if space.is_vector() {
                                scalar::dot(t.vector(p, a), t.vector(p, b))
                            } else {
                                t.value(p, a) * t.value(p, b)
                            };
                    }
                }
            }
            assert!(crate::linalg::SmallLu::new(n, gram).is_ok(), "{}", space.name());
        }
    }
}
