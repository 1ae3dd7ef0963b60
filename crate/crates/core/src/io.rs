//! Output formats: CSV tables, JSON documents with the resolved config,
//! and OBJ/PLY quad meshes of Delaunay pieces and necks.

use std::io::Write;

use nalgebra::Vector3;
use serde::Serialize;

use crate::delaunay::DelaunaySurface;
use crate::error::{invalid, Result};
use crate::gluing::GluedNeck;
use crate::patch::Grid;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(invalid("CSV row length differs from the header"));
        }
        out.write_record(r.iter().map(|&x| fmt_f64(x)))?;
    }
    out.flush()?;
    Ok(())
}

/// A JSON document carrying the configuration that produced it.
#[derive(Serialize)]
pub struct Document<'a, C: Serialize, R: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub result: &'a R,
}

pub fn write_json<W: Write, C: Serialize, R: Serialize>(mut w: W, command: &str, config: &C, result: &R) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &Document { command, config, result })?;
    writeln!(w)?;
    Ok(())
}

/// Quad mesh on an (s, θ) lattice, periodic in θ.
#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub quads: Vec<[usize; 4]>,
}

impl Mesh {
    pub fn from_lattice(grid: &Grid, vertices: Vec<Vector3<f64>>) -> Result<Self> {
        if vertices.len() != grid.len() {
            return Err(invalid("vertex count does not match the lattice"));
        }
        let mut quads = Vec::with_capacity((grid.ns - 1) * grid.ntheta);
        for i in 0..grid.ns - 1 {
            for j in 0..grid.ntheta {
                let jn = (j + 1) % grid.ntheta;
                quads.push([grid.idx(i, j), grid.idx(i + 1, j), grid.idx(i + 1, jn), grid.idx(i, jn)]);
            }
        }
        Ok(Self { vertices, quads })
    }

    /// Adds the vertices and faces of `other` as a separate component.
    pub fn append(&mut self, other: &Mesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.quads
            .extend(other.quads.iter().map(|q| [q[0] + base, q[1] + base, q[2] + base, q[3] + base]));
    }

    pub fn write_obj<W: Write>(&self, mut w: W, comment: &str) -> Result<()> {
        for line in comment.lines() {
            writeln!(w, "# {line}")?;
        }
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z))?;
        }
        for q in &self.quads {
            writeln!(w, "f {} {} {} {}", q[0] + 1, q[1] + 1, q[2] + 1, q[3] + 1)?;
        }
        Ok(())
    }

    pub fn write_ply<W: Write>(&self, mut w: W, comment: &str) -> Result<()> {
        writeln!(w, "ply\nformat ascii 1.0")?;
        for line in comment.lines() {
            writeln!(w, "comment {line}")?;
        }
        writeln!(w, "element vertex {}", self.vertices.len())?;
        writeln!(w, "property double x\nproperty double y\nproperty double z")?;
        writeln!(w, "element face {}", self.quads.len())?;
        writeln!(w, "property list uchar int vertex_indices\nend_header")?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z))?;
        }
        for q in &self.quads {
            writeln!(w, "4 {} {} {} {}", q[0], q[1], q[2], q[3])?;
        }
        Ok(())
    }
}

/// Mesh of a positioned Delaunay surface over [s_lo, s_hi].
pub fn surface_mesh(surface: &DelaunaySurface, s_lo: f64, s_hi: f64, ns: usize, ntheta: usize) -> Result<Mesh> {
    let grid = Grid::spanning(s_lo, s_hi, ns, ntheta)?;
    let mut v = Vec::with_capacity(grid.len());
    for i in 0..grid.ns {
        for j in 0..grid.ntheta {
            v.push(surface.point(grid.s(i), grid.theta(j)).0);
        }
    }
    Mesh::from_lattice(&grid, v)
}

/// Mesh of a neck: the model displaced by the blended graph along its normal.
pub fn neck_mesh(neck: &GluedNeck, ns: usize, ntheta: usize) -> Result<Mesh> {
    let l = neck.half_window;
    let grid = Grid::spanning(-l, l, ns, ntheta)?;
    let mut v = Vec::with_capacity(grid.len());
    for i in 0..grid.ns {
        let s = grid.s(i);
        for j in 0..grid.ntheta {
            let th = grid.theta(j);
            let (x, n) = neck.model.point(neck.s_a(s), th);
            v.push(x + n * neck.blended_graph(s, th));
        }
    }
    Mesh::from_lattice(&grid, v)
}
