use super::SpaceKind;
use crate::mesh::Mesh;
use crate::scalar::Scalar;

/// Local-to-global map of one space on one mesh.
///
/// Each local function maps to `Some((global, sign))`, or `None` for
/// normal-component DOFs on boundary edges, which are held at zero to
/// impose `u·n = 0`. Global coefficients equal `sign` times local ones.
#[derive(Debug, Clone)]
pub struct DofMap {
    space: SpaceKind,
    n_dofs: usize,
    entries: Vec<Option<(usize, f64)>>,
}

impl DofMap {
    pub fn new<T: Scalar>(space: SpaceKind, mesh: &Mesh<T>) -> Self {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let nf = mesh.n_cells();
        let ld = space.local_dim();
        let mut entries = Vec::with_capacity(nf * ld);

        // Edges carrying normal DOFs, numbered compactly.
        let mut edge_slot = vec![None; ne];
        let mut carrying = 0;
        for (e, slot) in edge_slot.iter_mut().enumerate() {
            if !mesh.is_boundary_edge(e) {
                *slot = Some(carrying);
                carrying += 1;
            }
        }

        let n_dofs = match space {
            SpaceKind::StreamE => nv + ne + nf,
            SpaceKind::StreamP1 => nv,
            SpaceKind::StreamP2 => nv + ne,
            SpaceKind::VelocityBdfm1 => 2 * carrying + 3 * nf,
            SpaceKind::VelocityBdm1 => 2 * carrying,
            SpaceKind::VelocityRt0 => carrying,
            SpaceKind::PressureP1dg => 3 * nf,
            SpaceKind::PressureP0 => nf,
        };

        for (c, cell) in mesh.cells().iter().enumerate() {
            let edges = mesh.cell_to_edge()[c];
            match space {
                SpaceKind::StreamE | SpaceKind::StreamP1 | SpaceKind::StreamP2 => {
                    entries.extend(cell.iter().map(|&v| Some((v, 1.0))));
                    if space != SpaceKind::StreamP1 {
                        entries.extend(edges.iter().map(|&(e, _)| Some((nv + e, 1.0))));
                    }
                    if space == SpaceKind::StreamE {
                        entries.push(Some((nv + ne + c, 1.0)));
                    }
                }
                SpaceKind::VelocityBdfm1 | SpaceKind::VelocityBdm1 => {
                    for &(e, s) in &edges {
                        for a in 0..2 {
                            entries.push(edge_slot[e].map(|k| {
                                let j = if s > 0 { a } else { 1 - a };
                                (2 * k + j, f64::from(s))
                            }));
                        }
                    }
                    if space == SpaceKind::VelocityBdfm1 {
                        for (i, &(_, s)) in edges.iter().enumerate() {
                            entries.push(Some((2 * carrying + 3 * c + i, f64::from(s))));
                        }
                    }
                }
                SpaceKind::VelocityRt0 => {
                    for &(e, s) in &edges {
                        entries.push(edge_slot[e].map(|k| (k, f64::from(s))));
                    }
                }
                SpaceKind::PressureP1dg => entries.extend((0..3).map(|i| Some((3 * c + i, 1.0)))),
                SpaceKind::PressureP0 => entries.push(Some((c, 1.0))),
            }
        }
        Self { space, n_dofs, entries }
    }

    pub fn space(&self) -> SpaceKind {
        self.space
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_cells(&self) -> usize {
        self.entries.len() / self.space.local_dim()
    }

    pub fn cell(&self, c: usize) -> &[Option<(usize, f64)>] {
        let n = self.space.local_dim();
        &self.entries[c * n..(c + 1) * n]
    }

    /// Local coefficients of cell `c` from a global vector.
    pub fn gather(&self, c: usize, global: &[f64], local: &mut [f64]) {
        for (l, e) in local.iter_mut().zip(self.cell(c)) {
            *l = e.map_or(0.0, |(g, s)| s * global[g]);
        }
    }
}

/// The three spaces of a mixed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementPair {
    pub stream: SpaceKind,
    pub velocity: SpaceKind,
    pub pressure: SpaceKind,
}

impl ElementPair {
    pub const BDFM1_P1DG: Self =
        Self { stream: SpaceKind::StreamE, velocity: SpaceKind::VelocityBdfm1, pressure: SpaceKind::PressureP1dg };
    pub const RT0_P0: Self =
        Self { stream: SpaceKind::StreamP1, velocity: SpaceKind::VelocityRt0, pressure: SpaceKind::PressureP0 };
    pub const BDM1_P0: Self =
        Self { stream: SpaceKind::StreamP2, velocity: SpaceKind::VelocityBdm1, pressure: SpaceKind::PressureP0 };

    pub fn name(&self) -> String {
        format!("{}-{}", self.velocity.name(), self.pressure.name())
    }
}

/// Global dimensions of a pair on a mesh, counting every edge (boundary
/// edges included) so the identities can be compared across topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofCensus {
    pub dim_e: usize,
    pub dim_s: usize,
    pub dim_v: usize,
    pub euler: i64,
    /// `dim(S) - 2 dim(V)`.
    pub s_minus_2v: i64,
    /// `dim(E) + dim(V) - dim(S) - χ`.
    pub e_plus_v_minus_s_minus_chi: i64,
}

impl DofCensus {
    pub fn identities_hold(&self) -> bool {
        self.s_minus_2v == 0 && self.e_plus_v_minus_s_minus_chi == 0
    }
}

pub fn dof_census<T: Scalar>(mesh: &Mesh<T>, pair: ElementPair) -> DofCensus {
    let (nv, ne, nf) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_cells());
    let dim = |space: SpaceKind| match space {
        SpaceKind::StreamE => nv + ne + nf,
        SpaceKind::StreamP1 => nv,
        SpaceKind::StreamP2 => nv + ne,
        SpaceKind::VelocityBdfm1 => 2 * ne + 3 * nf,
        SpaceKind::VelocityBdm1 => 2 * ne,
        SpaceKind::VelocityRt0 => ne,
        SpaceKind::PressureP1dg => 3 * nf,
        SpaceKind::PressureP0 => nf,
    };
    let (e, s, v) = (dim(pair.stream), dim(pair.velocity), dim(pair.pressure));
    let chi = mesh.euler_characteristic();
    DofCensus {
        dim_e: e,
        dim_s: s,
        dim_v: v,
        euler: chi,
        s_minus_2v: s as i64 - 2 * v as i64,
        e_plus_v_minus_s_minus_chi: e as i64 + v as i64 - s as i64 - chi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosahedral_sphere, build_periodic_square, StructuredPlane};

    #[test]
    fn icosahedron_census() {
        let m = build_icosahedral_sphere::<f64>(0, 1.0).unwrap();
        let c = dof_census(&m, ElementPair::BDFM1_P1DG);
        assert_eq!((c.dim_e, c.dim_s, c.dim_v), (62, 120, 60));
        assert!(c.identities_hold());
        let r = dof_census(&m, ElementPair::RT0_P0);
        assert_eq!((r.dim_s, r.dim_v), (30, 20));
        assert!(2 * r.dim_v > r.dim_s);
    }

    #[test]
    fn periodic_square_census() {
        let m = build_periodic_square::<f64>(2, 1.0, 1.0).unwrap();
        let c = dof_census(&m, ElementPair::BDFM1_P1DG);
        assert_eq!((c.dim_e, c.dim_s, c.dim_v), (24, 48, 24));
        assert!(c.identities_hold());
        let b = dof_census(&m, ElementPair::BDM1_P0);
        assert_eq!(3 * b.dim_v, b.dim_s);
        assert!(b.dim_v < b.dim_e);
    }

    #[test]
    fn dofmaps_match_census_on_closed_meshes() {
        let m = build_periodic_square::<f64>(3, 1.0, 1.0).unwrap();
        let c = dof_census(&m, ElementPair::BDFM1_P1DG);
        assert_eq!(DofMap::new(SpaceKind::StreamE, &m).n_dofs(), c.dim_e);
        assert_eq!(DofMap::new(SpaceKind::VelocityBdfm1, &m).n_dofs(), c.dim_s);
        assert_eq!(DofMap::new(SpaceKind::PressureP1dg, &m).n_dofs(), c.dim_v);
    }

    #[test]
    fn shared_normal_dofs_have_opposite_signs() {
        let m = build_periodic_square::<f64>(4, 1.0, 1.0).unwrap();
        let d = DofMap::new(SpaceKind::VelocityBdfm1, &m);
        let mut seen = vec![Vec::new(); d.n_dofs()];
        for c in 0..m.n_cells() {
            for &(g, s) in d.cell(c).iter().flatten() {
                seen[g].push(s);
            }
        }
        for (g, signs) in seen.iter().enumerate() {
            if g < 2 * m.n_edges() {
                assert_eq!(signs.len(), 2);
                assert_eq!(signs[0] + signs[1], 0.0);
            } else {
                assert_eq!(signs.len(), 1);
            }
        }
    }

    #[test]
    fn boundary_normal_dofs_are_dropped() {
        let m = StructuredPlane::new(3, 3, 1.0, 1.0).build::<f64>().unwrap();
        let d = DofMap::new(SpaceKind::VelocityBdfm1, &m);
        let nb = m.boundary_edges().len();
        assert_eq!(d.n_dofs(), 2 * (m.n_edges() - nb) + 3 * m.n_cells());
        let missing = (0..m.n_cells()).flat_map(|c| d.cell(c).to_vec()).filter(Option::is_none).count();
        assert_eq!(missing, 2 * nb);
    }
}
