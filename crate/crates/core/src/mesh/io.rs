//! Mesh file input and output.
//!
//! Native format:
//!
//! ```text
//! mesh v1
//! counts N_vert N_face
//! x y z            (N_vert lines)
//! i j k            (N_face lines, 0-based)
//! periodic         (optional)
//! va vb            (vertex vb is identified with va)
//! ```
//!
//! Gmsh MSH 2.2 ASCII files are read from their `$Nodes` and `$Elements`
//! sections; only 3-node triangles are kept.

use super::builders::orient_outward;
use super::{GeometryKind, Mesh};
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar, Vec3};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn numbers<F: std::str::FromStr>(line: &str, n: usize, lineno: usize) -> Result<Vec<F>> {
    let out: Vec<F> = line
        .split_whitespace()
        .map(|t| t.parse::<F>().map_err(|_| parse_err(lineno, format!("cannot parse '{t}'"))))
        .collect::<Result<_>>()?;
    if out.len() != n {
        return Err(parse_err(lineno, format!("expected {n} fields, found {}", out.len())));
    }
    Ok(out)
}

/// Raw triangle soup plus vertex identifications, before validation.
struct Soup {
    points: Vec<Vec3<f64>>,
    faces: Vec<[usize; 3]>,
    identify: Vec<(usize, usize)>,
}

pub fn parse_native<T: Scalar>(text: &str) -> Result<Mesh<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header != "mesh v1" {
        return Err(parse_err(n, format!("expected 'mesh v1', found '{header}'")));
    }
    let (n, counts) = lines.next().ok_or_else(|| parse_err(n + 1, "missing counts line"))?;
    let rest = counts
        .strip_prefix("counts")
        .ok_or_else(|| parse_err(n, "expected 'counts N_vert N_face'"))?;
    let c: Vec<usize> = numbers(rest, 2, n)?;
    let (nv, nf) = (c[0], c[1]);

    let mut points = Vec::with_capacity(nv);
    let mut last = n;
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| parse_err(last + 1, "unexpected end of vertex list"))?;
        let x: Vec<f64> = numbers(l, 3, n)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(n, "non-finite coordinate"));
        }
        points.push([x[0], x[1], x[2]]);
        last = n;
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = lines.next().ok_or_else(|| parse_err(last + 1, "unexpected end of face list"))?;
        let f: Vec<usize> = numbers(l, 3, n)?;
        if let Some(bad) = f.iter().find(|&&v| v >= nv) {
            return Err(parse_err(n, format!("face references vertex {bad} but only {nv} vertices exist")));
        }
        faces.push([f[0], f[1], f[2]]);
        last = n;
    }
    let mut identify = Vec::new();
    if let Some((n, l)) = lines.next() {
        if l != "periodic" {
            return Err(parse_err(n, format!("unexpected content '{l}'")));
        }
        for (n, l) in lines {
            let p: Vec<usize> = numbers(l, 2, n)?;
            if p[0] >= nv || p[1] >= nv {
                return Err(parse_err(n, "periodic pair references a missing vertex"));
            }
            identify.push((p[0], p[1]));
        }
    }
    assemble(Soup { points, faces, identify })
}

pub fn parse_gmsh<T: Scalar>(text: &str) -> Result<Mesh<T>> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let find = |tag: &str| lines.iter().position(|l| *l == tag);
    let nodes_at = find("$Nodes").ok_or_else(|| parse_err(1, "missing $Nodes section"))?;
    let elems_at = find("$Elements").ok_or_else(|| parse_err(1, "missing $Elements section"))?;
    if let Some(fmt) = find("$MeshFormat") {
        let version = lines.get(fmt + 1).and_then(|l| l.split_whitespace().next()).unwrap_or("");
        if !version.starts_with('2') {
            return Err(parse_err(fmt + 2, format!("unsupported MSH version '{version}'")));
        }
    }
    if find("$Periodic").is_some() {
        log::warn!("gmsh $Periodic section ignored");
    }

    let count = |at: usize| -> Result<usize> {
        let l = lines.get(at + 1).ok_or_else(|| parse_err(at + 2, "missing count"))?;
        Ok(numbers::<usize>(l, 1, at + 2)?[0])
    };
    let nn = count(nodes_at)?;
    let mut ids = HashMap::with_capacity(nn);
    let mut points = Vec::with_capacity(nn);
    for k in 0..nn {
        let lineno = nodes_at + 3 + k;
        let l = lines.get(lineno - 1).ok_or_else(|| parse_err(lineno, "unexpected end of $Nodes"))?;
        let t: Vec<f64> = numbers(l, 4, lineno)?;
        ids.insert(t[0] as usize, points.len());
        points.push([t[1], t[2], t[3]]);
    }
    let ne = count(elems_at)?;
    let mut faces = Vec::new();
    let mut skipped: HashMap<usize, usize> = HashMap::new();
    for k in 0..ne {
        let lineno = elems_at + 3 + k;
        let l = lines.get(lineno - 1).ok_or_else(|| parse_err(lineno, "unexpected end of $Elements"))?;
        let t: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err(lineno, format!("cannot parse '{s}'"))))
            .collect::<Result<_>>()?;
        if t.len() < 3 {
            return Err(parse_err(lineno, "truncated element record"));
        }
        let (kind, ntags) = (t[1], t[2]);
        if kind != 2 {
            *skipped.entry(kind).or_default() += 1;
            continue;
        }
        if t.len() != 3 + ntags + 3 {
            return Err(parse_err(lineno, "triangle record has wrong length"));
        }
        let mut f = [0usize; 3];
        for (slot, id) in f.iter_mut().zip(&t[3 + ntags..]) {
            *slot = *ids
                .get(id)
                .ok_or_else(|| parse_err(lineno, format!("element references unknown node {id}")))?;
        }
        faces.push(f);
    }
    for (kind, n) in skipped {
        log::warn!("ignored {n} gmsh elements of type {kind}");
    }
    assemble(Soup { points, faces, identify: Vec::new() })
}

pub fn read_mesh<T: Scalar>(path: &Path) -> Result<Mesh<T>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with("$MeshFormat") || text.contains("$Nodes") {
        parse_gmsh(&text)
    } else {
        parse_native(&text)
    }
}

/// Merge identified vertices, orient cells, infer the geometry kind and
/// validate.
fn assemble<T: Scalar>(soup: Soup) -> Result<Mesh<T>> {
    let Soup { points, mut faces, identify } = soup;
    if faces.is_empty() {
        return Err(Error::param("mesh has no triangles"));
    }
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn root(p: &mut [usize], mut v: usize) -> usize {
        while p[v] != v {
            p[v] = p[p[v]];
            v = p[v];
        }
        v
    }
    for &(a, b) in &identify {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent[rb.max(ra)] = rb.min(ra);
        }
    }
    let mut canonical = vec![usize::MAX; points.len()];
    let mut vertices: Vec<Vec3<T>> = Vec::new();
    let mut used = vec![false; points.len()];
    for f in &faces {
        for &v in f {
            used[v] = true;
        }
    }
    for v in 0..points.len() {
        let r = root(&mut parent, v);
        if !used[v] && r == v && !identify.iter().any(|&(a, b)| a == v || b == v) {
            continue;
        }
        if canonical[r] == usize::MAX {
            canonical[r] = vertices.len();
            vertices.push(scalar::cast3(points[r]));
        }
        canonical[v] = canonical[r];
    }

    let planar = points.iter().all(|p| p[2].abs() < 1e-12 * (1.0 + p[0].abs() + p[1].abs()));
    let kind = if planar {
        orient_outward(&points, &mut faces, |_| [0.0, 0.0, 1.0]);
        if identify.is_empty() {
            GeometryKind::PlaneWithBoundary
        } else {
            GeometryKind::PeriodicPlane
        }
    } else {
        let radial = |p: &Vec3<f64>| scalar::norm(*p);
        let axial = |p: &Vec3<f64>| p[0].hypot(p[1]);
        let spread = |f: &dyn Fn(&Vec3<f64>) -> f64| {
            let r: Vec<f64> = points.iter().map(f).collect();
            let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = r.iter().cloned().fold(0.0, f64::max);
            (hi - lo) / hi.max(f64::MIN_POSITIVE)
        };
        if spread(&radial) < 1e-6 {
            orient_outward(&points, &mut faces, |c| c);
            GeometryKind::Sphere
        } else if spread(&axial) < 1e-6 {
            orient_outward(&points, &mut faces, |c| [c[0], c[1], 0.0]);
            GeometryKind::Cylinder
        } else {
            return Err(Error::invariant("surface is neither planar, spherical nor cylindrical"));
        }
    };
    let cells: Vec<[usize; 3]> = faces.iter().map(|f| f.map(|v| canonical[v])).collect();
    let corners = faces.iter().map(|f| f.map(|v| scalar::cast3(points[v]))).collect();
    let map = (!identify.is_empty()).then(|| identify.iter().map(|&(a, b)| (canonical[a], b)).collect());
    let mesh = Mesh::from_parts(kind, vertices, cells, corners, map)?;
    if kind == GeometryKind::PeriodicPlane && mesh.has_boundary() {
        return Err(Error::invariant("periodic identifications leave unmatched boundary edges"));
    }
    Ok(mesh)
}

/// Native text form. Periodic meshes write each distinct corner position
/// of a vertex as its own file vertex and list the copies under `periodic`.
pub fn write_native<T: Scalar>(mesh: &Mesh<T>) -> String {
    let mut points: Vec<Vec3<T>> = mesh.vertices().to_vec();
    let mut copies: HashMap<(usize, [u64; 3]), usize> = HashMap::new();
    let mut identify = Vec::new();
    let mut faces = Vec::with_capacity(mesh.n_cells());
    for (c, cell) in mesh.cells().iter().enumerate() {
        let corners = mesh.corners(c);
        let mut f = [0usize; 3];
        for k in 0..3 {
            let v = cell[k];
            let p = corners[k];
            let same = scalar::norm(scalar::sub(p, mesh.vertices()[v])).as_f64()
                <= 1e-12 * (1.0 + scalar::norm(p).as_f64());
            f[k] = if same {
                v
            } else {
                let key = (v, p.map(|x| x.as_f64().to_bits()));
                *copies.entry(key).or_insert_with(|| {
                    points.push(p);
                    identify.push((v, points.len() - 1));
                    points.len() - 1
                })
            };
        }
        faces.push(f);
    }
    let mut s = String::new();
    let _ = writeln!(s, "mesh v1");
    let _ = writeln!(s, "counts {} {}", points.len(), faces.len());
    for p in &points {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p[0].as_f64(), p[1].as_f64(), p[2].as_f64());
    }
    for f in &faces {
        let _ = writeln!(s, "{} {} {}", f[0], f[1], f[2]);
    }
    if !identify.is_empty() {
        let _ = writeln!(s, "periodic");
        for (a, b) in identify {
            let _ = writeln!(s, "{a} {b}");
        }
    }
    s
}
