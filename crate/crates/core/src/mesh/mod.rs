//! Oriented triangulations of the plane, disk, cylinder and sphere.
//!
//! Cells are flat triangles. Each cell stores its three corner positions
//! explicitly ("unwrapped" corners), so periodic meshes keep correct
//! geometry while vertex and edge indices are aliased across the periodic
//! seam. Edges are identified by their endpoint indices plus the
//! displacement between the endpoints, which separates the distinct edges
//! joining the same vertex pair on very small periodic meshes.

mod builders;
pub mod io;

pub use builders::{
    build_cylinder, build_disk, build_icosahedral_sphere, build_periodic_square, StructuredPlane,
};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar, Vec3};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    PeriodicPlane,
    PlaneWithBoundary,
    Cylinder,
    Sphere,
}

impl GeometryKind {
    /// True when every edge must be shared by exactly two cells.
    pub fn is_closed(self) -> bool {
        matches!(self, GeometryKind::PeriodicPlane | GeometryKind::Sphere)
    }

    /// Euler characteristic the topology of this kind must have, when it is
    /// fixed by the kind alone.
    pub fn euler_characteristic(self) -> Option<i64> {
        match self {
            GeometryKind::PeriodicPlane | GeometryKind::Cylinder => Some(0),
            GeometryKind::Sphere => Some(2),
            GeometryKind::PlaneWithBoundary => None,
        }
    }

    pub fn is_planar(self) -> bool {
        matches!(self, GeometryKind::PeriodicPlane | GeometryKind::PlaneWithBoundary)
    }
}

/// Incidence of one cell on an edge: the cell index and which of its local
/// edges it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCell {
    pub cell: usize,
    pub local: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh<T: Scalar = f64> {
    vertices: Vec<Vec3<T>>,
    cells: Vec<[usize; 3]>,
    corners: Vec<[Vec3<T>; 3]>,
    edges: Vec<[usize; 2]>,
    cell_to_edge: Vec<[(usize, i8); 3]>,
    edge_to_cell: Vec<[Option<EdgeCell>; 2]>,
    geometry_kind: GeometryKind,
    periodic_map: Option<Vec<(usize, usize)>>,
}

/// Affine data of one flat cell. Local vertex `i` is opposite local edge
/// `i`; local edge `i` runs from corner `i+1` to corner `i+2` (mod 3), which
/// is counter-clockwise about `normal`.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry<T: Scalar = f64> {
    pub corners: [Vec3<T>; 3],
    /// Columns `x1 - x0` and `x2 - x0`.
    pub jacobian: [[T; 2]; 3],
    /// `sqrt(det(JᵀJ))`, twice the cell area.
    pub det_factor: T,
    /// `J / det_factor`, the contravariant Piola map.
    pub piola_factor: [[T; 2]; 3],
    /// Unit normal `k` of the cell's plane.
    pub normal: Vec3<T>,
    pub grad_lambda: [Vec3<T>; 3],
    /// Unit tangents of the local edges, counter-clockwise.
    pub edge_tangent: [Vec3<T>; 3],
    /// Outward unit conormals `t × k` of the local edges.
    pub edge_normal: [Vec3<T>; 3],
    pub edge_length: [T; 3],
}

impl<T: Scalar> CellGeometry<T> {
    pub fn from_corners(corners: [Vec3<T>; 3]) -> Result<Self> {
        let e1 = scalar::sub(corners[1], corners[0]);
        let e2 = scalar::sub(corners[2], corners[0]);
        let n = scalar::cross(e1, e2);
        let det = scalar::norm(n);
        let scale = scalar::norm(e1).max(scalar::norm(e2));
        if !(det > T::of(1e-12) * scale * scale) {
            return Err(Error::invariant(format!("degenerate cell with corners {corners:?}")));
        }
        let normal = scalar::scale(T::one() / det, n);
        let mut jacobian = [[T::zero(); 2]; 3];
        let mut piola_factor = [[T::zero(); 2]; 3];
        for r in 0..3 {
            jacobian[r] = [e1[r], e2[r]];
            piola_factor[r] = [e1[r] / det, e2[r] / det];
        }
        let mut grad_lambda = [scalar::zero3(); 3];
        let mut edge_tangent = [scalar::zero3(); 3];
        let mut edge_normal = [scalar::zero3(); 3];
        let mut edge_length = [T::zero(); 3];
        for i in 0..3 {
            let a = corners[(i + 1) % 3];
            let b = corners[(i + 2) % 3];
            let d = scalar::sub(b, a);
            let len = scalar::norm(d);
            grad_lambda[i] = scalar::scale(T::one() / det, scalar::cross(normal, d));
            edge_tangent[i] = scalar::scale(T::one() / len, d);
            edge_normal[i] = scalar::cross(edge_tangent[i], normal);
            edge_length[i] = len;
        }
        Ok(Self {
            corners,
            jacobian,
            det_factor: det,
            piola_factor,
            normal,
            grad_lambda,
            edge_tangent,
            edge_normal,
            edge_length,
        })
    }

    /// The reference triangle (0,0), (1,0), (0,1) in the z = 0 plane.
    pub fn reference() -> Self {
        let o = T::zero();
        let l = T::one();
        Self::from_corners([[o, o, o], [l, o, o], [o, l, o]]).expect("reference cell")
    }

    pub fn area(&self) -> T {
        self.det_factor * T::of(0.5)
    }

    /// Physical point of barycentric coordinates `lambda`.
    pub fn point(&self, lambda: [T; 3]) -> Vec3<T> {
        let mut x = scalar::zero3();
        for (l, c) in lambda.iter().zip(&self.corners) {
            x = scalar::add(x, scalar::scale(*l, *c));
        }
        x
    }

    /// Contravariant Piola image of a reference vector.
    pub fn piola(&self, v: [T; 2]) -> Vec3<T> {
        let p = &self.piola_factor;
        [p[0][0] * v[0] + p[0][1] * v[1], p[1][0] * v[0] + p[1][1] * v[1], p[2][0] * v[0] + p[2][1] * v[1]]
    }

    /// `k × v` in this cell's plane.
    pub fn perp(&self, v: Vec3<T>) -> Vec3<T> {
        scalar::cross(self.normal, v)
    }
}

impl<T: Scalar> Mesh<T> {
    /// Build and validate a mesh from cells given by canonical vertex indices
    /// and unwrapped corner coordinates.
    pub fn from_parts(
        geometry_kind: GeometryKind,
        vertices: Vec<Vec3<T>>,
        cells: Vec<[usize; 3]>,
        corners: Vec<[Vec3<T>; 3]>,
        periodic_map: Option<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        if cells.len() != corners.len() {
            return Err(Error::param("cells and corners differ in length"));
        }
        if cells.is_empty() {
            return Err(Error::param("mesh has no cells"));
        }
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= vertices.len() {
                    return Err(Error::invariant(format!("cell {c} references missing vertex {v}")));
                }
            }
            if cell[0] == cell[1] || cell[1] == cell[2] || cell[0] == cell[2] {
                return Err(Error::invariant(format!("cell {c} repeats a vertex")));
            }
        }

        let diag = bounding_diagonal(&corners);
        let quantum = diag * 1e-7;
        let mut lookup: HashMap<(usize, usize, [i64; 3]), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_to_cell: Vec<[Option<EdgeCell>; 2]> = Vec::new();
        let mut cell_to_edge = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = [(0usize, 0i8); 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let (ia, ib) = ((i + 1) % 3, (i + 2) % 3);
                let (va, vb) = (cell[ia], cell[ib]);
                let (lo, hi, xlo, xhi, sign) = if va < vb {
                    (va, vb, corners[c][ia], corners[c][ib], 1i8)
                } else {
                    (vb, va, corners[c][ib], corners[c][ia], -1i8)
                };
                let d = scalar::sub(xhi, xlo);
                let key = (lo, hi, d.map(|x| (x.as_f64() / quantum).round() as i64));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([lo, hi]);
                    edge_to_cell.push([None, None]);
                    edges.len() - 1
                });
                let inc = EdgeCell { cell: c, local: i };
                match edge_to_cell[e] {
                    [None, _] => edge_to_cell[e][0] = Some(inc),
                    [Some(_), None] => edge_to_cell[e][1] = Some(inc),
                    _ => {
                        return Err(Error::invariant(format!(
                            "edge ({lo},{hi}) shared by more than two cells"
                        )))
                    }
                }
                *slot = (e, sign);
            }
            cell_to_edge.push(local);
        }

        let mesh = Self {
            vertices,
            cells,
            corners,
            edges,
            cell_to_edge,
            edge_to_cell,
            geometry_kind,
            periodic_map,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Check every structural invariant, naming the first that fails.
    pub fn validate(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            let g = self.cell_geometry(c)?;
            let outward = match self.geometry_kind {
                GeometryKind::PeriodicPlane | GeometryKind::PlaneWithBoundary => [T::zero(), T::zero(), T::one()],
                GeometryKind::Sphere => g.point([T::of(1.0 / 3.0); 3]),
                GeometryKind::Cylinder => {
                    let p = g.point([T::of(1.0 / 3.0); 3]);
                    [p[0], p[1], T::zero()]
                }
            };
            if scalar::dot(g.normal, outward) <= T::zero() {
                return Err(Error::invariant(format!("cell {c} has negative orientation")));
            }
        }
        let closed = self.geometry_kind.is_closed();
        for (e, inc) in self.edge_to_cell.iter().enumerate() {
            match inc {
                [Some(a), Some(b)] => {
                    let sa = self.cell_to_edge[a.cell][a.local].1;
                    let sb = self.cell_to_edge[b.cell][b.local].1;
                    if sa == sb {
                        return Err(Error::invariant(format!(
                            "edge {e}: incident cells {} and {} are inconsistently oriented",
                            a.cell, b.cell
                        )));
                    }
                }
                [Some(_), None] if closed => {
                    return Err(Error::invariant(format!(
                        "edge {e} has one incident cell on a closed {:?} mesh",
                        self.geometry_kind
                    )))
                }
                _ => {}
            }
        }
        if let Some(chi) = self.geometry_kind.euler_characteristic() {
            if self.euler_characteristic() != chi {
                return Err(Error::invariant(format!(
                    "Euler characteristic {} but {:?} requires {chi}",
                    self.euler_characteristic(),
                    self.geometry_kind
                )));
            }
        }
        if closed && 2 * self.n_edges() != 3 * self.n_cells() {
            return Err(Error::invariant("closed mesh violates 2·N_edge = 3·N_face"));
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_cells() as i64
    }

    pub fn geometry_kind(&self) -> GeometryKind {
        self.geometry_kind
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn corners(&self, cell: usize) -> [Vec3<T>; 3] {
        self.corners[cell]
    }

    /// Edges as (start, end) vertex pairs with start < end.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Per cell, local edge → (global edge, sign). Sign is +1 when the
    /// counter-clockwise traversal of the cell agrees with the global edge
    /// direction.
    pub fn cell_to_edge(&self) -> &[[(usize, i8); 3]] {
        &self.cell_to_edge
    }

    pub fn edge_cells(&self, edge: usize) -> [Option<EdgeCell>; 2] {
        self.edge_to_cell[edge]
    }

    pub fn periodic_map(&self) -> Option<&[(usize, usize)]> {
        self.periodic_map.as_deref()
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edge_to_cell[edge][1].is_none()
    }

    pub fn boundary_edges(&self) -> Vec<usize> {
        (0..self.n_edges()).filter(|&e| self.is_boundary_edge(e)).collect()
    }

    pub fn has_boundary(&self) -> bool {
        (0..self.n_edges()).any(|e| self.is_boundary_edge(e))
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flag = vec![false; self.n_vertices()];
        for e in self.boundary_edges() {
            for v in self.edges[e] {
                flag[v] = true;
            }
        }
        flag
    }

    pub fn cell_geometry(&self, cell: usize) -> Result<CellGeometry<T>> {
        if cell >= self.n_cells() {
            return Err(Error::param(format!("cell index {cell} out of range")));
        }
        CellGeometry::from_corners(self.corners[cell])
    }

    pub fn total_area(&self) -> T {
        let mut a = T::zero();
        for c in 0..self.n_cells() {
            let g = CellGeometry::from_corners(self.corners[c]).expect("validated mesh");
            a += g.area();
        }
        a
    }

    /// Convert the coordinate type, re-deriving connectivity.
    pub fn cast<U: Scalar>(&self) -> Result<Mesh<U>> {
        Mesh::from_parts(
            self.geometry_kind,
            self.vertices.iter().map(|&v| scalar::cast3(v)).collect(),
            self.cells.clone(),
            self.corners.iter().map(|c| c.map(scalar::cast3)).collect(),
            self.periodic_map.clone(),
        )
    }
}

fn bounding_diagonal<T: Scalar>(corners: &[[Vec3<T>; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for cell in corners {
        for p in cell {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k].as_f64());
                hi[k] = hi[k].max(p[k].as_f64());
            }
        }
    }
    let d: f64 = (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
    if d > 0.0 {
        d
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::LineRule;

    #[test]
    fn identity_cell_has_unit_det() {
        let g = CellGeometry::<f64>::reference();
        assert!((g.det_factor - 1.0).abs() < 1e-15);
        assert!((g.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn doubled_cell_scales_det_by_four() {
        let g = CellGeometry::<f64>::from_corners([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        assert!((g.det_factor - 4.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let r = CellGeometry::<f64>::from_corners([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(matches!(r, Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn barycentric_gradients_are_dual_to_corners() {
        let g = CellGeometry::<f64>::from_corners([[0.3, -0.2, 0.1], [1.4, 0.5, -0.3], [-0.1, 1.2, 0.6]]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = scalar::sub(g.corners[j], g.corners[0]);
                let expect = if i == j { 1.0 } else { 0.0 } - if i == 0 { 1.0 } else { 0.0 };
                assert!((scalar::dot(g.grad_lambda[i], d) - expect).abs() < 1e-13);
            }
            assert!(scalar::dot(g.grad_lambda[i], g.normal).abs() < 1e-14);
            // outward conormal points away from the opposite vertex
            assert!(scalar::dot(g.edge_normal[i], g.grad_lambda[i]) < 0.0);
        }
    }

    /// Flux of a Piola-mapped constant reference field through each edge
    /// equals the reference flux, computed by edge quadrature on both sides.
    #[test]
    fn piola_preserves_edge_flux() {
        let reference = CellGeometry::<f64>::reference();
        let g = CellGeometry::<f64>::from_corners([[0.1, 0.2, 0.0], [1.7, 0.4, 0.3], [0.5, 1.9, -0.2]]).unwrap();
        let rule = LineRule::<f64>::gauss(3);
        let v = [0.37, -1.21];
        let vhat = [v[0], v[1], 0.0];
        let vphys = g.piola(v);
        for i in 0..3 {
            let flux = |geom: &CellGeometry<f64>, field: Vec3<f64>| -> f64 {
                rule.weights.iter().map(|w| w * geom.edge_length[i] * scalar::dot(field, geom.edge_normal[i])).sum()
            };
            let a = flux(&reference, vhat);
            let b = flux(&g, vphys);
            assert!((a - b).abs() < 1e-13, "edge {i}: {a} vs {b}");
        }
    }
}
