//! Parametric patches on (s, θ) lattices: fundamental forms, mean
//! curvature, normal graphs and the Jacobi operator of a general patch.
//! Derivatives are finite differences in s and spectral in θ.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::delaunay::DelaunaySurface;
use crate::error::{invalid, CmcError, Result};
use crate::numerics::fd::{diff_s, FdOrder};
use crate::numerics::PeriodicDiff;

/// Uniform lattice: `ns` nodes s₀ + i·h_s and `ntheta` nodes 2πj/ntheta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub s0: f64,
    pub hs: f64,
    pub ns: usize,
    pub ntheta: usize,
}

impl Grid {
    pub fn new(s0: f64, hs: f64, ns: usize, ntheta: usize) -> Result<Self> {
        if !(hs > 0.0) || ns < 2 {
            return Err(invalid("grid needs hs > 0 and at least two s-nodes"));
        }
        if ntheta < 4 || ntheta % 2 != 0 {
            return Err(invalid("ntheta must be even and at least 4"));
        }
        Ok(Self { s0, hs, ns, ntheta })
    }

    /// Grid over `[a, b]` with spacing dividing the interval evenly.
    pub fn spanning(a: f64, b: f64, ns: usize, ntheta: usize) -> Result<Self> {
        if !(b > a) || ns < 2 {
            return Err(invalid("grid span must be nonempty"));
        }
        Self::new(a, (b - a) / (ns - 1) as f64, ns, ntheta)
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.hs
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.ntheta as f64
    }

    pub fn len(&self) -> usize {
        self.ns * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ntheta + j
    }

    /// Rows `i0..i1` as a grid of their own.
    pub fn rows(&self, i0: usize, i1: usize) -> Grid {
        Grid {
            s0: self.s(i0),
            hs: self.hs,
            ns: i1 - i0,
            ntheta: self.ntheta,
        }
    }
}

/// Real values on the nodes of a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("field size does not match its grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field has non-finite values"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.ns {
            for j in 0..grid.ntheta {
                values.push(f(grid.s(i), grid.theta(j)));
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm over rows `skip..ns-skip`.
    pub fn interior_sup(&self, skip: usize) -> f64 {
        let g = &self.grid;
        (skip..g.ns.saturating_sub(skip))
            .flat_map(|i| (0..g.ntheta).map(move |j| (i, j)))
            .fold(0.0, |m, (i, j)| m.max(self.at(i, j).abs()))
    }

    pub fn rows(&self, i0: usize, i1: usize) -> ScalarField {
        let g = self.grid.rows(i0, i1);
        let nt = self.grid.ntheta;
        ScalarField {
            values: self.values[i0 * nt..i1 * nt].to_vec(),
            grid: g,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// How the unit normal is oriented at each node.
#[derive(Clone, Debug)]
pub enum Orientation {
    /// Flip the computed normal where it disagrees with the given field.
    Reference(Vec<Vector3<f64>>),
    /// Use `sign · (X_s × X_θ)/|X_s × X_θ|`.
    Sign(f64),
}

/// Sampled immersion with its first and second fundamental forms.
#[derive(Clone, Debug)]
pub struct Patch {
    pub grid: Grid,
    pub order: FdOrder,
    pub positions: Vec<Vector3<f64>>,
    pub normal: Vec<Vector3<f64>>,
    pub xs: Vec<Vector3<f64>>,
    pub xt: Vec<Vector3<f64>>,
    /// (E, F, G) per node.
    pub first: Vec<[f64; 3]>,
    /// (e, f, g) per node, measured against `normal`.
    pub second: Vec<[f64; 3]>,
}

pub(crate) fn theta_derivs<T>(
    sp: &PeriodicDiff,
    f: &[T],
    grid: &Grid,
    second: bool,
) -> (Vec<T>, Vec<T>)
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let nt = grid.ntheta;
    let mut d1 = f.to_vec();
    let mut d2 = if second { f.to_vec() } else { Vec::new() };
    for i in 0..grid.ns {
        let row = &f[i * nt..(i + 1) * nt];
        sp.d1(row, &mut d1[i * nt..(i + 1) * nt]);
        if second {
            sp.d2(row, &mut d2[i * nt..(i + 1) * nt]);
        }
    }
    (d1, d2)
}

impl Patch {
    pub fn new(grid: Grid, positions: Vec<Vector3<f64>>, orientation: &Orientation, order: FdOrder) -> Result<Self> {
        if positions.len() != grid.len() {
            return Err(invalid("positions do not match the grid"));
        }
        if grid.ns < order.min_nodes() {
            return Err(CmcError::CoarseGrid(format!(
                "{} s-nodes, stencil needs {}",
                grid.ns,
                order.min_nodes()
            )));
        }
        let sp = PeriodicDiff::new(grid.ntheta);
        let (xs, xss) = diff_s(&positions, grid.ns, grid.ntheta, grid.hs, order);
        let (xt, xtt) = theta_derivs(&sp, &positions, &grid, true);
        let (xst, _) = theta_derivs(&sp, &xs, &grid, false);
        let mut normal = Vec::with_capacity(grid.len());
        let mut first = Vec::with_capacity(grid.len());
        let mut second = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let e = xs[k].dot(&xs[k]);
            let f = xs[k].dot(&xt[k]);
            let g = xt[k].dot(&xt[k]);
            let det = e * g - f * f;
            if !(e > 0.0 && g > 0.0 && det > 0.0) || !det.is_finite() {
                return Err(CmcError::ImmersionLost {
                    i: k / grid.ntheta,
                    j: k % grid.ntheta,
                });
            }
            let mut n = xs[k].cross(&xt[k]) / det.sqrt();
            match orientation {
                Orientation::Reference(r) => {
                    if n.dot(&r[k]) < 0.0 {
                        n = -n;
                    }
                }
                Orientation::Sign(sg) => n *= sg.signum(),
            }
            first.push([e, f, g]);
            second.push([xss[k].dot(&n), xst[k].dot(&n), xtt[k].dot(&n)]);
            normal.push(n);
        }
        Ok(Self {
            grid,
            order,
            positions,
            normal,
            xs,
            xt,
            first,
            second,
        })
    }

    /// Largest deviation from isothermality, max(|E − G|, |F|) / E.
    pub fn isothermal_defect(&self) -> f64 {
        self.first
            .iter()
            .map(|[e, f, g]| ((e - g).abs().max(f.abs())) / e)
            .fold(0.0, f64::max)
    }

    /// Rows `i0..i1` recomputed as a patch of their own.
    pub fn sub_patch(&self, i0: usize, i1: usize) -> Result<Patch> {
        let nt = self.grid.ntheta;
        Patch::new(
            self.grid.rows(i0, i1),
            self.positions[i0 * nt..i1 * nt].to_vec(),
            &Orientation::Reference(self.normal[i0 * nt..i1 * nt].to_vec()),
            self.order,
        )
    }

    /// Jacobi operator Δ_g u + |A|² u of this patch.
    pub fn jacobi_apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if u.grid != self.grid {
            return Err(invalid("field and patch grids differ"));
        }
        let g = &self.grid;
        let sp = PeriodicDiff::new(g.ntheta);
        let (us, _) = diff_s(&u.values, g.ns, g.ntheta, g.hs, self.order);
        let (ut, _) = theta_derivs(&sp, &u.values, g, false);
        let mut ps = Vec::with_capacity(g.len());
        let mut pt = Vec::with_capacity(g.len());
        let mut root = Vec::with_capacity(g.len());
        for k in 0..g.len() {
            let [e, f, gg] = self.first[k];
            let det = e * gg - f * f;
            let r = det.sqrt();
            ps.push(r * (gg * us[k] - f * ut[k]) / det);
            pt.push(r * (-f * us[k] + e * ut[k]) / det);
            root.push(r);
        }
        let (dps, _) = diff_s(&ps, g.ns, g.ntheta, g.hs, self.order);
        let (dpt, _) = theta_derivs(&sp, &pt, g, false);
        let values = (0..g.len())
            .map(|k| (dps[k] + dpt[k]) / root[k] + self.norm_a_sq(k) * u.values[k])
            .collect();
        Ok(ScalarField {
            grid: g.clone(),
            values,
        })
    }

    /// |A|² = tr((g⁻¹ II)²) at node k.
    pub fn norm_a_sq(&self, k: usize) -> f64 {
        let [e, f, g] = self.first[k];
        let [l, m, n] = self.second[k];
        let det = e * g - f * f;
        let a11 = (g * l - f * m) / det;
        let a12 = (g * m - f * n) / det;
        let a21 = (-f * l + e * m) / det;
        let a22 = (-f * m + e * n) / det;
        a11 * a11 + 2.0 * a12 * a21 + a22 * a22
    }
}

/// H = (eG − 2fF + gE) / (2(EG − F²)) at every node.
pub fn mean_curvature(patch: &Patch) -> ScalarField {
    let values = patch
        .first
        .iter()
        .zip(&patch.second)
        .map(|([e, f, g], [l, m, n])| (l * g - 2.0 * m * f + n * e) / (2.0 * (e * g - f * f)))
        .collect();
    ScalarField {
        grid: patch.grid.clone(),
        values,
    }
}

/// The normal graph x + w(x)N(x), oriented consistently with the base.
pub fn normal_graph(patch: &Patch, w: &ScalarField) -> Result<Patch> {
    if w.grid != patch.grid {
        return Err(invalid("graph function and patch grids differ"));
    }
    let positions = patch
        .positions
        .iter()
        .zip(&patch.normal)
        .zip(&w.values)
        .map(|((x, n), &wv)| x + n * wv)
        .collect();
    Patch::new(
        patch.grid.clone(),
        positions,
        &Orientation::Reference(patch.normal.clone()),
        patch.order,
    )
}

/// Samples a positioned Delaunay surface on `grid`.
pub fn delaunay_patch(surface: &DelaunaySurface, grid: &Grid, order: FdOrder) -> Result<Patch> {
    let mut pos = Vec::with_capacity(grid.len());
    let mut nrm = Vec::with_capacity(grid.len());
    for i in 0..grid.ns {
        for j in 0..grid.ntheta {
            let (x, n) = surface.point(grid.s(i), grid.theta(j));
            pos.push(x);
            nrm.push(n);
        }
    }
    Patch::new(grid.clone(), pos, &Orientation::Reference(nrm), order)
}

/// Unit sphere in latitude–longitude coordinates, s ∈ [−φ_max, φ_max],
/// oriented by the inward normal so that H = 1.
pub fn sphere_patch(ns: usize, ntheta: usize, phi_max: f64, order: FdOrder) -> Result<Patch> {
    if !(phi_max > 0.0 && phi_max < PI / 2.0) {
        return Err(invalid("phi_max must lie in (0, π/2)"));
    }
    let grid = Grid::spanning(-phi_max, phi_max, ns, ntheta)?;
    let mut pos = Vec::with_capacity(grid.len());
    for i in 0..grid.ns {
        let (sp, cp) = grid.s(i).sin_cos();
        for j in 0..grid.ntheta {
            let (st, ct) = grid.theta(j).sin_cos();
            pos.push(Vector3::new(cp * ct, cp * st, sp));
        }
    }
    let inward = pos.iter().map(|x: &Vector3<f64>| -x).collect();
    Patch::new(grid, pos, &Orientation::Reference(inward), order)
}
