use super::{GeometryKind, Mesh};
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Structured split-square triangulation of a rectangle, optionally
/// periodic in either direction. Each square `(i,j)` is split along its
/// rising diagonal.
#[derive(Debug, Clone)]
pub struct StructuredPlane {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub periodic_x: bool,
    pub periodic_y: bool,
    /// Random vertex displacement as a fraction of the cell size.
    pub jitter: f64,
    pub seed: u64,
}

impl StructuredPlane {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        Self { nx, ny, lx, ly, periodic_x: false, periodic_y: false, jitter: 0.0, seed: 0 }
    }

    pub fn periodic(mut self, x: bool, y: bool) -> Self {
        self.periodic_x = x;
        self.periodic_y = y;
        self
    }

    pub fn jitter(mut self, amount: f64, seed: u64) -> Self {
        self.jitter = amount;
        self.seed = seed;
        self
    }

    pub fn build<T: Scalar>(&self) -> Result<Mesh<T>> {
        let (nx, ny) = (self.nx, self.ny);
        if (self.periodic_x && nx < 2) || (self.periodic_y && ny < 2) || nx < 1 || ny < 1 {
            return Err(Error::param(format!(
                "structured plane needs at least 2 cells along periodic directions, got {nx}x{ny}"
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::param("domain lengths must be positive"));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::param("jitter must lie in [0, 0.5)"));
        }
        let (dx, dy) = (self.lx / nx as f64, self.ly / ny as f64);
        let vx = if self.periodic_x { nx } else { nx + 1 };
        let vy = if self.periodic_y { ny } else { ny + 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut base = Vec::with_capacity(vx * vy);
        for j in 0..vy {
            for i in 0..vx {
                let mut p = [i as f64 * dx, j as f64 * dy];
                if self.jitter > 0.0 {
                    let ox: f64 = rng.gen_range(-1.0..1.0);
                    let oy: f64 = rng.gen_range(-1.0..1.0);
                    if self.periodic_x || (i > 0 && i < nx) {
                        p[0] += self.jitter * dx * ox;
                    }
                    if self.periodic_y || (j > 0 && j < ny) {
                        p[1] += self.jitter * dy * oy;
                    }
                }
                base.push(p);
            }
        }
        let index = |i: usize, j: usize| (j % vy) * vx + (i % vx);
        let corner = |i: usize, j: usize| -> Vec3<T> {
            let p = base[index(i, j)];
            let sx = if self.periodic_x && i >= nx { self.lx } else { 0.0 };
            let sy = if self.periodic_y && j >= ny { self.ly } else { 0.0 };
            [T::of(p[0] + sx), T::of(p[1] + sy), T::zero()]
        };
        let mut cells = Vec::with_capacity(2 * nx * ny);
        let mut corners = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                for tri in [[(i, j), (i + 1, j), (i + 1, j + 1)], [(i, j), (i + 1, j + 1), (i, j + 1)]] {
                    cells.push(tri.map(|(a, b)| index(a, b)));
                    corners.push(tri.map(|(a, b)| corner(a, b)));
                }
            }
        }
        let vertices = base.iter().map(|p| [T::of(p[0]), T::of(p[1]), T::zero()]).collect();
        let kind = if self.periodic_x && self.periodic_y {
            GeometryKind::PeriodicPlane
        } else {
            GeometryKind::PlaneWithBoundary
        };
        Mesh::from_parts(kind, vertices, cells, corners, None)
    }
}

/// Doubly periodic `n × n` split-square mesh of an `lx × ly` rectangle.
pub fn build_periodic_square<T: Scalar>(n: usize, lx: f64, ly: f64) -> Result<Mesh<T>> {
    if n < 2 {
        return Err(Error::param(format!("periodic square needs n >= 2, got {n}")));
    }
    StructuredPlane::new(n, n, lx, ly).periodic(true, true).build()
}

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
];

fn icosahedron_vertices() -> [Vec3<f64>; 12] {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
}

/// Geodesic sphere: each icosahedron edge is cut into `2^(level-1)`
/// segments (level 0 and level 1 both give the base icosahedron) and all
/// points are projected radially onto the sphere.
pub fn build_icosahedral_sphere<T: Scalar>(level: u32, radius: f64) -> Result<Mesh<T>> {
    if level > 12 {
        return Err(Error::param(format!("icosahedral level {level} is too large")));
    }
    if !(radius > 0.0) {
        return Err(Error::param("sphere radius must be positive"));
    }
    let s = 1usize << level.saturating_sub(1);
    let base = icosahedron_vertices().map(|v| scalar::scale(1.0 / scalar::norm(v), v));
    let mut lookup: HashMap<[i64; 3], usize> = HashMap::new();
    let mut unit: Vec<Vec3<f64>> = Vec::new();
    let mut id = |p: Vec3<f64>| -> usize {
        let p = scalar::scale(1.0 / scalar::norm(p), p);
        let key = p.map(|x| (x * 1e9).round() as i64);
        *lookup.entry(key).or_insert_with(|| {
            unit.push(p);
            unit.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(20 * s * s);
    for face in ICOSAHEDRON_FACES {
        let [a, b, c] = face.map(|k| base[k]);
        let mut grid = vec![vec![0usize; s + 1]; s + 1];
        for (i, row) in grid.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate().take(s + 1 - i) {
                let (fi, fj) = (i as f64 / s as f64, j as f64 / s as f64);
                let p = scalar::add(a, scalar::add(scalar::scale(fi, scalar::sub(b, a)), scalar::scale(fj, scalar::sub(c, a))));
                *slot = id(p);
            }
        }
        for i in 0..s {
            for j in 0..s - i {
                cells.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if i + j + 1 < s {
                    cells.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    let vertices: Vec<Vec3<T>> = unit.iter().map(|p| p.map(|x| T::of(radius * x))).collect();
    orient_outward(&vertices, &mut cells, |c| c);
    let corners = cells.iter().map(|c| c.map(|v| vertices[v])).collect();
    Mesh::from_parts(GeometryKind::Sphere, vertices, cells, corners, None)
}

/// Open cylinder of the given radius and height, centred on the origin with
/// its axis along z. Cells are oriented with outward normals.
pub fn build_cylinder<T: Scalar>(n_around: usize, n_axial: usize, radius: f64, height: f64) -> Result<Mesh<T>> {
    if n_around < 3 || n_axial < 1 {
        return Err(Error::param(format!(
            "cylinder needs n_around >= 3 and n_axial >= 1, got {n_around} and {n_axial}"
        )));
    }
    if !(radius > 0.0 && height > 0.0) {
        return Err(Error::param("cylinder radius and height must be positive"));
    }
    let mut vertices = Vec::with_capacity(n_around * (n_axial + 1));
    for j in 0..=n_axial {
        let z = -0.5 * height + height * j as f64 / n_axial as f64;
        for i in 0..n_around {
            let th = std::f64::consts::TAU * i as f64 / n_around as f64;
            vertices.push([T::of(radius * th.cos()), T::of(radius * th.sin()), T::of(z)]);
        }
    }
    let index = |i: usize, j: usize| j * n_around + i % n_around;
    let mut cells = Vec::with_capacity(2 * n_around * n_axial);
    for j in 0..n_axial {
        for i in 0..n_around {
            cells.push([index(i, j), index(i + 1, j), index(i + 1, j + 1)]);
            cells.push([index(i, j), index(i + 1, j + 1), index(i, j + 1)]);
        }
    }
    let corners = cells.iter().map(|c| c.map(|v| vertices[v])).collect();
    Mesh::from_parts(GeometryKind::Cylinder, vertices, cells, corners, None)
}

/// Unit-disk mesh of `rings` concentric rings (ring `k` carries `6k`
/// points) zipped into `6·rings²` triangles. Ring radii follow
/// `r = s(1 + grading(1 - s))` for `s = k / rings`, so `grading > 0`
/// concentrates rings near the boundary.
pub fn build_disk<T: Scalar>(rings: usize, radius: f64, grading: f64) -> Result<Mesh<T>> {
    if rings < 1 {
        return Err(Error::param("disk needs at least one ring"));
    }
    if !(radius > 0.0) || !(0.0..1.0).contains(&grading) {
        return Err(Error::param("disk radius must be positive and grading in [0, 1)"));
    }
    let mut vertices: Vec<Vec3<T>> = vec![[T::zero(); 3]];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(vertices.len());
        let s = k as f64 / rings as f64;
        let r = radius * s * (1.0 + grading * (1.0 - s));
        let n = 6 * k;
        let offset = if k % 2 == 0 { 0.5 } else { 0.0 };
        for m in 0..n {
            let th = std::f64::consts::TAU * (m as f64 + offset) / n as f64;
            vertices.push([T::of(r * th.cos()), T::of(r * th.sin()), T::zero()]);
        }
    }
    let ring_len = |k: usize| if k == 0 { 1 } else { 6 * k };
    let angle = |k: usize, m: usize| {
        if k == 0 {
            return m as f64;
        }
        let offset = if k % 2 == 0 { 0.5 } else { 0.0 };
        (m as f64 + offset) / ring_len(k) as f64
    };
    let mut cells = Vec::with_capacity(6 * rings * rings);
    for k in 1..=rings {
        let (n_in, n_out) = (ring_len(k - 1), ring_len(k));
        let inner = |m: usize| ring_start[k - 1] + m % n_in;
        let outer = |m: usize| ring_start[k] + m % n_out;
        let (mut i, mut j) = (0usize, 0usize);
        while i < n_in || j < n_out {
            let next_out = angle(k, j + 1);
            let next_in = if k == 1 { f64::INFINITY } else { angle(k - 1, i + 1) };
            if j < n_out && (next_out <= next_in || i == n_in) {
                cells.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            } else {
                cells.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            }
            if k == 1 && j == n_out {
                break;
            }
        }
    }
    let corners = cells.iter().map(|c| c.map(|v| vertices[v])).collect();
    Mesh::from_parts(GeometryKind::PlaneWithBoundary, vertices, cells, corners, None)
}

/// Flip cells whose normal points towards `reference(centroid)`'s opposite.
pub(crate) fn orient_outward<T: Scalar>(
    vertices: &[Vec3<T>],
    cells: &mut [[usize; 3]],
    reference: impl Fn(Vec3<T>) -> Vec3<T>,
) {
    for c in cells.iter_mut() {
        let [a, b, d] = c.map(|v| vertices[v]);
        let n = scalar::cross(scalar::sub(b, a), scalar::sub(d, a));
        let centroid = scalar::scale(T::of(1.0 / 3.0), scalar::add(a, scalar::add(b, d)));
        if scalar::dot(n, reference(centroid)) < T::zero() {
            c.swap(1, 2);
        }
    }
}
