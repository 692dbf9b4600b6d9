//! VTK legacy snapshots and CSV tables.
//!
//! Snapshots are written per cell: every triangle gets its own six points
//! (corners, then edge midpoints), so discontinuous fields keep one value
//! per cell at shared points.

use crate::dynamics::State;
use crate::elements::{eval_vector, SpaceKind};
use crate::error::{Error, Result};
use crate::operators::OperatorSet;
use crate::scalar::{self, Vec3};
use crate::scenarios::{DiagnosticRow, Metric};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Barycentric coordinates of the six output points, in VTK
/// quadratic-triangle order.
const SAMPLE_POINTS: [[f64; 3]; 6] =
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

const VTK_QUADRATIC_TRIANGLE: u8 = 22;

/// Point values of `η` and `u` at the six sample points of every cell.
pub fn sample_fields(state: &State, ops: &OperatorSet) -> Result<(Vec<Vec3<f64>>, Vec<f64>, Vec<Vec3<f64>>)> {
    let mesh = ops.mesh();
    let (ds, dv) = (ops.dof_s(), ops.dof_v());
    let mut us = vec![0.0; ds.space().local_dim()];
    let mut es = vec![0.0; dv.space().local_dim()];
    let mut vals = vec![[0.0; 3]; us.len()];
    let mut divs = vec![0.0; us.len()];
    let n = 6 * mesh.n_cells();
    let (mut points, mut eta, mut vel) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_geometry(c)?;
        ds.gather(c, &state.u, &mut us);
        dv.gather(c, &state.eta, &mut es);
        for l in SAMPLE_POINTS {
            points.push(g.point(l));
            eta.push(match dv.space() {
                SpaceKind::PressureP1dg => (0..3).map(|i| es[i] * l[i]).sum(),
                _ => es[0],
            });
            eval_vector(ds.space(), &g, l, &mut vals, &mut divs);
            vel.push(us.iter().zip(&vals).fold([0.0; 3], |acc, (&a, v)| scalar::add(acc, scalar::scale(a, *v))));
        }
    }
    Ok((points, eta, vel))
}

pub fn vtk_string(state: &State, ops: &OperatorSet, title: &str) -> Result<String> {
    let (points, eta, vel) = sample_fields(state, ops)?;
    let nc = ops.mesh().n_cells();
    let mut s = String::new();
    let w = |s: &mut String, args: std::fmt::Arguments| s.write_fmt(args).expect("writing to a String");
    w(&mut s, format_args!("# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID\n", title.replace('\n', " ")));
    w(&mut s, format_args!("POINTS {} double\n", points.len()));
    for p in &points {
        w(&mut s, format_args!("{} {} {}\n", p[0], p[1], p[2]));
    }
    w(&mut s, format_args!("CELLS {nc} {}\n", 7 * nc));
    for c in 0..nc {
        let b = 6 * c;
        w(&mut s, format_args!("6 {} {} {} {} {} {}\n", b, b + 1, b + 2, b + 3, b + 4, b + 5));
    }
    w(&mut s, format_args!("CELL_TYPES {nc}\n"));
    for _ in 0..nc {
        w(&mut s, format_args!("{VTK_QUADRATIC_TRIANGLE}\n"));
    }
    w(&mut s, format_args!("POINT_DATA {}\nSCALARS eta double 1\nLOOKUP_TABLE default\n", points.len()));
    for e in &eta {
        w(&mut s, format_args!("{e}\n"));
    }
    w(&mut s, format_args!("VECTORS velocity double\n"));
    for v in &vel {
        w(&mut s, format_args!("{} {} {}\n", v[0], v[1], v[2]));
    }
    Ok(s)
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::param(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_vtk(path: &Path, state: &State, ops: &OperatorSet, title: &str) -> Result<()> {
    write_atomic(path, vtk_string(state, ops, title)?.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(&r).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Columns `run, step, t, energy, total_mass, max_abs_eta`.
pub fn write_diagnostics(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    write_csv(
        path,
        &["run", "step", "t", "energy", "total_mass", "max_abs_eta"],
        rows.iter().map(|r| {
            vec![
                r.run.clone(),
                r.step.to_string(),
                r.t.to_string(),
                r.energy.to_string(),
                r.total_mass.to_string(),
                r.max_abs_eta.to_string(),
            ]
        }),
    )
}

/// Columns `name, value, threshold, passed`.
pub fn write_metrics(path: &Path, metrics: &[Metric]) -> Result<()> {
    write_csv(
        path,
        &["name", "value", "threshold", "passed"],
        metrics.iter().map(|m| vec![m.name.clone(), m.value.to_string(), m.threshold.to_string(), m.passed().to_string()]),
    )
}
