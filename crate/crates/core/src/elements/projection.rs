//! Commuting projections onto the element spaces and the exact curl map.

use super::{eval_scalar, eval_vector, DofMap, SpaceKind};
use crate::error::{Error, Result};
use crate::linalg::SmallLu;
use crate::mesh::{CellGeometry, Mesh};
use crate::quadrature::{LineRule, TriangleRule};
use crate::scalar::{self, Scalar, Vec3};

/// Quadrature used when projecting fields.
#[derive(Debug, Clone)]
pub struct ProjectionRules<T: Scalar = f64> {
    pub cell: TriangleRule<T>,
    pub line: LineRule<T>,
}

impl<T: Scalar> ProjectionRules<T> {
    /// Exact for the polynomial data of the discrete spaces.
    pub fn polynomial() -> Self {
        Self { cell: TriangleRule::degree6(), line: LineRule::gauss(4) }
    }

    /// High-order rules for smooth non-polynomial data.
    pub fn smooth() -> Self {
        Self { cell: TriangleRule::collapsed_gauss(16), line: LineRule::gauss(16) }
    }
}

impl<T: Scalar> Default for ProjectionRules<T> {
    fn default() -> Self {
        Self::smooth()
    }
}

fn edge_lambda<T: Scalar>(i: usize, s: T) -> [T; 3] {
    let mut l = [T::zero(); 3];
    l[(i + 1) % 3] = T::one() - s;
    l[(i + 2) % 3] = s;
    l
}

/// `k × (x - x_c)`: constant tangential trace on every edge and constant
/// rotation, so its moment of `∇⊥ψ` only sees edge and cell averages of `ψ`.
fn rotation_field<T: Scalar>(g: &CellGeometry<T>, l: [T; 3]) -> Vec3<T> {
    let third = T::one() / T::of(3.0);
    g.perp(scalar::sub(g.point(l), g.point([third; 3])))
}

/// The nine degrees of freedom defining the velocity projection: two
/// linear moments of the outward normal component on each edge, the
/// moments against `∇λ1` and `∇λ2`, and the moment against `k × (x - x_c)`.
fn pi_s_functionals<T: Scalar>(
    g: &CellGeometry<T>,
    rules: &ProjectionRules<T>,
    field: &dyn Fn([T; 3]) -> Vec3<T>,
) -> [T; 9] {
    let mut out = [T::zero(); 9];
    for i in 0..3 {
        for (&s, &w) in rules.line.points.iter().zip(&rules.line.weights) {
            let l = edge_lambda(i, s);
            let un = scalar::dot(field(l), g.edge_normal[i]) * w * g.edge_length[i];
            out[2 * i] += (T::one() - s) * un;
            out[2 * i + 1] += s * un;
        }
    }
    for (l, &w) in rules.cell.points.iter().zip(&rules.cell.weights) {
        let u = field(*l);
        let w = w * g.det_factor;
        out[6] += w * scalar::dot(g.grad_lambda[1], u);
        out[7] += w * scalar::dot(g.grad_lambda[2], u);
        out[8] += w * scalar::dot(rotation_field(g, *l), u);
    }
    out
}

/// Factorised 9×9 matrix of the velocity DOF functionals applied to the
/// local BDFM1 basis.
pub fn pi_s_local_matrix<T: Scalar>(g: &CellGeometry<T>) -> Result<SmallLu<T>> {
    let rules = ProjectionRules::polynomial();
    let mut a = vec![T::zero(); 81];
    for j in 0..9 {
        let col = pi_s_functionals(g, &rules, &|l| {
            let mut v = [scalar::zero3(); 9];
            let mut d = [T::zero(); 9];
            eval_vector(SpaceKind::VelocityBdfm1, g, l, &mut v, &mut d);
            v[j]
        });
        for k in 0..9 {
            a[k * 9 + j] = col[k];
        }
    }
    SmallLu::new(9, a)
}

/// Local BDFM1 coefficients (row-major 9×7) of `∇⊥` applied to each local
/// E basis function.
pub fn curl_matrix_local<T: Scalar>(g: &CellGeometry<T>) -> Result<Vec<T>> {
    let lu = pi_s_local_matrix(g)?;
    let rules = ProjectionRules::polynomial();
    let mut out = vec![T::zero(); 63];
    for j in 0..7 {
        let rhs = pi_s_functionals(g, &rules, &|l| {
            let mut v = [T::zero(); 7];
            let mut gr = [scalar::zero3(); 7];
            eval_scalar(SpaceKind::StreamE, g, l, &mut v, &mut gr);
            g.perp(gr[j])
        });
        let c = lu.solve(&rhs);
        for k in 0..9 {
            out[k * 7 + j] = c[k];
        }
    }
    Ok(out)
}

/// The exact map `ψ ↦ ∇⊥ψ` from E into BDFM1. Each shared normal DOF is
/// taken from the first cell incident on its edge.
#[derive(Debug, Clone)]
pub struct CurlMap {
    dof_e: DofMap,
    dof_s: DofMap,
    local: Vec<Vec<f64>>,
    owner: Vec<[bool; 3]>,
}

impl CurlMap {
    pub fn new(mesh: &Mesh<f64>) -> Result<Self> {
        let dof_e = DofMap::new(SpaceKind::StreamE, mesh);
        let dof_s = DofMap::new(SpaceKind::VelocityBdfm1, mesh);
        let mut local = Vec::with_capacity(mesh.n_cells());
        let mut owner = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            local.push(curl_matrix_local(&mesh.cell_geometry(c)?)?);
            let mut own = [false; 3];
            for (i, &(e, _)) in mesh.cell_to_edge()[c].iter().enumerate() {
                own[i] = mesh.edge_cells(e)[0].map(|ec| ec.cell) == Some(c);
            }
            owner.push(own);
        }
        Ok(Self { dof_e, dof_s, local, owner })
    }

    pub fn n_rows(&self) -> usize {
        self.dof_s.n_dofs()
    }

    pub fn n_cols(&self) -> usize {
        self.dof_e.n_dofs()
    }

    /// `(row, col, value)` entries of the global matrix.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for c in 0..self.local.len() {
            let rows = self.dof_s.cell(c);
            let cols = self.dof_e.cell(c);
            for (k, row) in rows.iter().enumerate() {
                let Some((r, s)) = row else { continue };
                if k < 6 && !self.owner[c][k / 2] {
                    continue;
                }
                for (j, col) in cols.iter().enumerate() {
                    let (col, _) = col.expect("E dofs are never dropped");
                    let v = self.local[c][k * 7 + j];
                    if v != 0.0 {
                        out.push((*r, col, s * v));
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_rows()];
        for (r, c, v) in self.triplets() {
            u[r] += v * psi[c];
        }
        u
    }
}

/// `Π^S u` for a vector field given in Cartesian components. Normal DOFs
/// shared by two cells are averaged.
pub fn project_pi_s(
    mesh: &Mesh<f64>,
    field: impl Fn(Vec3<f64>) -> Vec3<f64>,
    rules: &ProjectionRules<f64>,
) -> Result<Vec<f64>> {
    let dofs = DofMap::new(SpaceKind::VelocityBdfm1, mesh);
    let mut sum = vec![0.0; dofs.n_dofs()];
    let mut count = vec![0u32; dofs.n_dofs()];
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_geometry(c)?;
        let lu = pi_s_local_matrix(&g)?;
        let rhs = pi_s_functionals(&g, rules, &|l| field(g.point(l)));
        let coeffs = lu.solve(&rhs);
        for (k, e) in dofs.cell(c).iter().enumerate() {
            if let Some((r, s)) = e {
                sum[*r] += s * coeffs[k];
                count[*r] += 1;
            }
        }
    }
    Ok(sum.iter().zip(&count).map(|(s, &n)| if n > 0 { s / f64::from(n) } else { 0.0 }).collect())
}

/// `Π^E ψ`: matches vertex values, edge averages and (with the bubble) cell
/// averages. Also handles the continuous P1 and P2 streamfunction spaces.
pub fn project_pi_e(
    mesh: &Mesh<f64>,
    space: SpaceKind,
    psi: impl Fn(Vec3<f64>) -> f64,
    rules: &ProjectionRules<f64>,
) -> Result<Vec<f64>> {
    if !matches!(space, SpaceKind::StreamE | SpaceKind::StreamP1 | SpaceKind::StreamP2) {
        return Err(Error::param(format!("{} is not a streamfunction space", space.name())));
    }
    let dofs = DofMap::new(space, mesh);
    let mut out = vec![0.0; dofs.n_dofs()];
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_geometry(c)?;
        let map = dofs.cell(c);
        let mut vertex = [0.0; 3];
        for i in 0..3 {
            vertex[i] = psi(g.corners[i]);
            out[map[i].expect("vertex dof").0] = vertex[i];
        }
        if space == SpaceKind::StreamP1 {
            continue;
        }
        let mut edge_coeff = [0.0; 3];
        for i in 0..3 {
            let avg: f64 =
                rules.line.points.iter().zip(&rules.line.weights).map(|(&s, &w)| w * psi(g.point(edge_lambda(i, s)))).sum();
            edge_coeff[i] = 1.5 * (avg - (vertex[(i + 1) % 3] + vertex[(i + 2) % 3]) / 6.0);
            let (e, _) = mesh.cell_to_edge()[c][i];
            if mesh.edge_cells(e)[0].map(|ec| ec.cell) == Some(c) {
                out[map[3 + i].expect("edge dof").0] = edge_coeff[i];
            }
        }
        if space == SpaceKind::StreamE {
            let avg: f64 = rules.cell.points.iter().zip(&rules.cell.weights).map(|(l, &w)| 2.0 * w * psi(g.point(*l))).sum();
            let b = (avg - edge_coeff.iter().sum::<f64>() / 3.0) * 20.0 / 9.0;
            out[map[6].expect("bubble dof").0] = b;
        }
    }
    Ok(out)
}

/// `Π^V φ`: cellwise L2 projection onto P1DG or P0.
pub fn project_pi_v(
    mesh: &Mesh<f64>,
    space: SpaceKind,
    phi: impl Fn(Vec3<f64>) -> f64,
    rules: &ProjectionRules<f64>,
) -> Result<Vec<f64>> {
    let dofs = DofMap::new(space, mesh);
    let mut out = vec![0.0; dofs.n_dofs()];
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_geometry(c)?;
        let map = dofs.cell(c);
        match space {
            SpaceKind::PressureP1dg => {
                let mut rhs = [0.0; 3];
                for (l, &w) in rules.cell.points.iter().zip(&rules.cell.weights) {
                    let f = phi(g.point(*l)) * w * g.det_factor;
                    for i in 0..3 {
                        rhs[i] += f * l[i];
                    }
                }
                // local mass |K| (1 + δij) / 12, inverted in closed form
                let area = g.area();
                let total: f64 = rhs.iter().sum();
                for i in 0..3 {
                    out[map[i].expect("pressure dof").0] = (12.0 * rhs[i] - 3.0 * total) / area;
                }
            }
            SpaceKind::PressureP0 => {
                let integral: f64 =
                    rules.cell.points.iter().zip(&rules.cell.weights).map(|(l, &w)| w * phi(g.point(*l))).sum();
                out[map[0].expect("pressure dof").0] = 2.0 * integral;
            }
            _ => return Err(Error::param(format!("{} is not a pressure space", space.name()))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosahedral_sphere, build_periodic_square, StructuredPlane};

    fn skewed() -> CellGeometry<f64> {
        CellGeometry::from_corners([[0.2, 0.1, 0.0], [1.3, 0.4, 0.2], [0.5, 1.1, -0.3]]).unwrap()
    }

    #[test]
    fn local_projection_is_identity_on_the_element() {
        let g = skewed();
        let lu = pi_s_local_matrix(&g).unwrap();
        let rules = ProjectionRules::smooth();
        for j in 0..9 {
            let rhs = pi_s_functionals(&g, &rules, &|l| {
                let mut v = [[0.0; 3]; 9];
                let mut d = [0.0; 9];
                eval_vector(SpaceKind::VelocityBdfm1, &g, l, &mut v, &mut d);
                v[j]
            });
            let c = lu.solve(&rhs);
            for (k, ck) in c.iter().enumerate() {
                let expect = if k == j { 1.0 } else { 0.0 };
                assert!((ck - expect).abs() < 1e-12, "basis {j} coefficient {k} = {ck}");
            }
        }
    }

    #[test]
    fn constants_are_reproduced() {
        let m = StructuredPlane::new(3, 3, 1.0, 1.0).periodic(true, true).jitter(0.2, 1).build::<f64>().unwrap();
        let u = project_pi_s(&m, |_| [0.7, -0.3, 0.0], &ProjectionRules::smooth()).unwrap();
        let d = DofMap::new(SpaceKind::VelocityBdfm1, &m);
        for c in 0..m.n_cells() {
            let g = m.cell_geometry(c).unwrap();
            let mut local = [0.0; 9];
            d.gather(c, &u, &mut local);
            let mut v = [[0.0; 3]; 9];
            let mut dv = [0.0; 9];
            eval_vector(SpaceKind::VelocityBdfm1, &g, [0.2, 0.5, 0.3], &mut v, &mut dv);
            let mut x = [0.0; 3];
            for k in 0..9 {
                x = scalar::add(x, scalar::scale(local[k], v[k]));
            }
            assert!((x[0] - 0.7).abs() < 1e-12 && (x[1] + 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratics_are_reproduced_by_pi_e() {
        let m = StructuredPlane::new(3, 2, 1.0, 1.0).jitter(0.2, 4).build::<f64>().unwrap();
        let f = |x: Vec3<f64>| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[0] + 1.5 * x[0] * x[1] - 0.7 * x[1] * x[1];
        let psi = project_pi_e(&m, SpaceKind::StreamE, f, &ProjectionRules::smooth()).unwrap();
        let d = DofMap::new(SpaceKind::StreamE, &m);
        for c in 0..m.n_cells() {
            let g = m.cell_geometry(c).unwrap();
            let mut local = [0.0; 7];
            d.gather(c, &psi, &mut local);
            assert!(local[6].abs() < 1e-12, "bubble coefficient {}", local[6]);
            let l = [0.15, 0.25, 0.6];
            let mut v = [0.0; 7];
            let mut gr = [[0.0; 3]; 7];
            eval_scalar(SpaceKind::StreamE, &g, l, &mut v, &mut gr);
            let val: f64 = local.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((val - f(g.point(l))).abs() < 1e-12);
        }
    }

    #[test]
    fn height_is_exact_on_the_sphere() {
        let m = build_icosahedral_sphere::<f64>(2, 1.0).unwrap();
        let psi = project_pi_e(&m, SpaceKind::StreamE, |x| x[2], &ProjectionRules::smooth()).unwrap();
        let d = DofMap::new(SpaceKind::StreamE, &m);
        for c in 0..m.n_cells() {
            let mut local = [0.0; 7];
            d.gather(c, &psi, &mut local);
            let g = m.cell_geometry(c).unwrap();
            assert!(local[6].abs() < 1e-13);
            for i in 0..3 {
                let (a, b) = (g.corners[(i + 1) % 3][2], g.corners[(i + 2) % 3][2]);
                assert!((local[3 + i] - 0.5 * (a + b)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pi_v_of_square_matches_closed_form() {
        // L2-best linear fit of x² on the reference triangle
        let m = crate::mesh::io::parse_native::<f64>("mesh v1\ncounts 3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 2\n").unwrap();
        let c = project_pi_v(&m, SpaceKind::PressureP1dg, |x| x[0] * x[0], &ProjectionRules::smooth()).unwrap();
        // moments ∫x² λ_i: λ1 = x gives 1/20, λ2 = y gives 1/60, λ0 gives 1/12 - 1/20 - 1/60
        let rhs = [1.0 / 12.0 - 1.0 / 20.0 - 1.0 / 60.0, 1.0 / 20.0, 1.0 / 60.0];
        let mass = |i: usize, j: usize| if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| mass(i, j) * c[j]).sum();
            assert!((r - rhs[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn curl_map_dimensions() {
        let m = build_periodic_square::<f64>(2, 1.0, 1.0).unwrap();
        let cm = CurlMap::new(&m).unwrap();
        assert_eq!((cm.n_rows(), cm.n_cols()), (48, 24));
        let ones = vec![1.0; 24];
        let constant: Vec<f64> = (0..24).map(|k| if k < 16 { 1.0 } else { 0.0 }).collect();
        assert!(cm.apply(&constant).iter().all(|v| v.abs() < 1e-13));
        assert!(cm.apply(&ones).iter().any(|v| v.abs() > 1e-3));
    }
}
