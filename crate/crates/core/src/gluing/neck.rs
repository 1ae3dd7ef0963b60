//! Necks joining two ends over a common Delaunay model, and the
//! mean-curvature deviation they carry.
//!
//! Deviations on long necks are exponentially small, far below what a
//! direct evaluation of H − 1 can resolve. The blended graph is therefore
//! evaluated with a log-scale factor, w̃ = Ŵ·e^{c}, and the deviation is
//! measured as the response (H(λŴ) − H(0))/λ with sup|λŴ| ≈ 1e-6, then
//! multiplied back by e^{c}. Subtracting H(0) on the same lattice removes
//! the discretization error of the model itself.

use serde::{Deserialize, Serialize};

use crate::blocks::{EndDescriptor, EndGraph};
use crate::delaunay::DelaunaySurface;
use crate::error::{invalid, CmcError, Result};
use crate::gluing::cutoff::CutoffProfile;
use crate::numerics::fd::FdOrder;
use crate::patch::{delaunay_patch, mean_curvature, normal_graph, Grid, Patch, ScalarField};

pub const NECK_NODES_PER_PERIOD: usize = 128;
pub const NECK_NTHETA: usize = 64;
/// Extra rows on each side of a measured region, beyond the stencils.
pub const MARGIN_ROWS: usize = 3;
/// Largest offset mismatch accepted between the two end models.
pub const MODEL_TOL: f64 = 1e-8;
/// Above this size the graph is applied directly instead of linearly.
pub const LINEAR_THRESHOLD: f64 = 1e-6;
/// Largest relative change of a deviation under grid doubling.
pub const REFINEMENT_TOL: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckGrid {
    pub nodes_per_period: usize,
    pub ntheta: usize,
    pub order: FdOrder,
    /// How many times the grid may be doubled to pass the refinement check.
    #[serde(default)]
    pub max_doublings: usize,
}

impl Default for NeckGrid {
    fn default() -> Self {
        Self {
            nodes_per_period: NECK_NODES_PER_PERIOD,
            ntheta: NECK_NTHETA,
            order: FdOrder::Fourth,
            max_doublings: 2,
        }
    }
}

impl NeckGrid {
    pub fn refined(&self) -> Self {
        Self {
            nodes_per_period: 2 * self.nodes_per_period,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes_per_period < 4 || self.ntheta < 8 || self.ntheta % 2 != 0 {
            return Err(invalid("neck grids need ≥ 4 s-nodes per period and an even ntheta ≥ 8"));
        }
        Ok(())
    }
}

/// Two ends joined over the window (−L, L) of their common model. The
/// neck coordinate s corresponds to s_a = s + L on the first end and
/// s_b = L − s on the second.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GluedNeck {
    pub label: String,
    pub model: DelaunaySurface,
    pub half_window: f64,
    /// Number of half-periods s_τ in the half window.
    pub half_periods: usize,
    pub end_a: EndDescriptor,
    pub end_b: EndDescriptor,
    pub xi: CutoffProfile,
    pub annulus: (f64, f64),
    pub model_mismatch: f64,
}

/// Joins `end_a` and `end_b` over a half window that must be a multiple of
/// s_τ. The two models must coincide: same τ, opposite axes, and the neck
/// of `end_b` sitting 2L further along the axis of `end_a`.
pub fn glue_neck(end_a: &EndDescriptor, end_b: &EndDescriptor, half_window: f64, xi: CutoffProfile) -> Result<GluedNeck> {
    let (ma, mb) = (&end_a.model, &end_b.model);
    if ma.tau() != mb.tau() {
        return Err(CmcError::ModelMismatch(format!(
            "ends have τ = {} and τ = {}",
            ma.tau().value(),
            mb.tau().value()
        )));
    }
    let profile = &ma.profile;
    if profile.degenerate {
        return Err(CmcError::Degenerate("necks over the cylinder have no half-period".into()));
    }
    let ratio = half_window / profile.s_half;
    let j = ratio.round();
    if !(half_window > 0.0) || j < 1.0 || (ratio - j).abs() > 1e-9 {
        return Err(invalid(format!(
            "half window {half_window} is not a positive multiple of s_τ = {}",
            profile.s_half
        )));
    }
    if (ma.axis + mb.axis).norm() > 1e-9 {
        return Err(CmcError::ModelMismatch("end axes are not opposite".into()));
    }
    for e in [end_a, end_b] {
        if (e.direction - e.model.axis).norm() > 1e-9 {
            return Err(CmcError::ModelMismatch(format!(
                "end {} is not parametrized along its direction",
                e.label
            )));
        }
    }
    let expected = ma.offset + ma.axis * (2.0 * j * profile.t_phys);
    let mismatch = (mb.offset - expected).norm();
    if mismatch > MODEL_TOL * (1.0 + expected.norm()) {
        return Err(CmcError::ModelMismatch(format!(
            "end models differ by {mismatch:e}; the matching condition does not hold"
        )));
    }
    Ok(GluedNeck {
        label: format!("{}|{}", end_a.label, end_b.label),
        model: ma.clone(),
        half_window,
        half_periods: j as usize,
        end_a: end_a.clone(),
        end_b: end_b.clone(),
        xi,
        annulus: CutoffProfile::TRANSITION,
        model_mismatch: mismatch,
    })
}

impl GluedNeck {
    pub fn s_a(&self, s: f64) -> f64 {
        s + self.half_window
    }

    pub fn s_b(&self, s: f64) -> f64 {
        self.half_window - s
    }

    pub fn tau(&self) -> f64 {
        self.model.tau().value()
    }

    /// Angle of the neck point (s, θ) in the frame of the second end.
    pub fn theta_b(&self, s: f64, theta: f64) -> f64 {
        let (x, _) = self.model.point(self.s_a(s), theta);
        let m = &self.end_b.model;
        let local = m.rotation().inverse() * (x - m.offset);
        local.y.atan2(local.x)
    }

    pub fn graph_a(&self, s: f64, theta: f64) -> f64 {
        self.end_a.graph.eval(self.s_a(s), theta)
    }

    pub fn graph_b(&self, s: f64, theta: f64) -> f64 {
        self.end_b.graph.eval(self.s_b(s), self.theta_b(s, theta))
    }

    /// w̃(s, θ) = ξ(s) g_a(s + L, θ) + (1 − ξ(s)) g_b(L − s, θ_b).
    pub fn blended_graph(&self, s: f64, theta: f64) -> f64 {
        let x = self.xi.eval(s);
        let a = if x > 0.0 { self.graph_a(s, theta) } else { 0.0 };
        let b = if x < 1.0 { self.graph_b(s, theta) } else { 0.0 };
        x * a + (1.0 - x) * b
    }

    /// Lattice in neck coordinates covering [lo, hi] plus margins, aligned
    /// with s = 0.
    pub fn lattice(&self, lo: f64, hi: f64, grid: &NeckGrid) -> Result<Grid> {
        grid.validate()?;
        let h = self.model.profile.period() / grid.nodes_per_period as f64;
        let i0 = (lo / h - 1e-9).floor() as i64 - MARGIN_ROWS as i64;
        let i1 = (hi / h + 1e-9).ceil() as i64 + MARGIN_ROWS as i64;
        let ns = (i1 - i0 + 1) as usize;
        if ns < grid.order.min_nodes().max(2 * MARGIN_ROWS + 1) {
            return Err(CmcError::CoarseGrid("neck region too short for the stencil".into()));
        }
        Grid::new(i0 as f64 * h, h, ns, grid.ntheta)
    }

    pub(crate) fn sample(&self, lo: f64, hi: f64, grid: &NeckGrid) -> Result<NeckSample> {
        let lat = self.lattice(lo, hi, grid)?;
        let shifted = Grid {
            s0: self.s_a(lat.s0),
            ..lat.clone()
        };
        let base = delaunay_patch(&self.model, &shifted, grid.order)?;
        let xi: Vec<f64> = (0..lat.ns).map(|i| self.xi.eval(lat.s(i))).collect();
        let mut theta_b = Vec::with_capacity(lat.len());
        for i in 0..lat.ns {
            for j in 0..lat.ntheta {
                theta_b.push(self.theta_b(lat.s(i), lat.theta(j)));
            }
        }
        let env = |g: &EndGraph, s: f64| g.log_envelope(s);
        let mut c = f64::NEG_INFINITY;
        for i in 0..lat.ns {
            let s = lat.s(i);
            if xi[i] > 0.0 {
                c = c.max(env(&self.end_a.graph, self.s_a(s)));
            }
            if xi[i] < 1.0 {
                c = c.max(env(&self.end_b.graph, self.s_b(s)));
            }
        }
        if !c.is_finite() {
            c = 0.0;
        }
        let mut ga = Vec::with_capacity(lat.len());
        let mut gb = Vec::with_capacity(lat.len());
        for i in 0..lat.ns {
            let s = lat.s(i);
            for j in 0..lat.ntheta {
                let k = lat.idx(i, j);
                ga.push(self.end_a.graph.eval_scaled(self.s_a(s), lat.theta(j), c));
                gb.push(self.end_b.graph.eval_scaled(self.s_b(s), theta_b[k], c));
            }
        }
        let blend = (0..lat.len())
            .map(|k| {
                let x = xi[k / lat.ntheta];
                x * ga[k] + (1.0 - x) * gb[k]
            })
            .collect();
        Ok(NeckSample {
            lattice: lat,
            base,
            xi,
            ga,
            gb,
            blend,
            log_scale: c,
        })
    }
}

/// A neck region sampled on a lattice: the model patch, the cutoff per
/// row, and the two end graphs and their blend, all divided by e^{c}.
pub(crate) struct NeckSample {
    pub lattice: Grid,
    pub base: Patch,
    pub xi: Vec<f64>,
    pub ga: Vec<f64>,
    pub gb: Vec<f64>,
    pub blend: Vec<f64>,
    pub log_scale: f64,
}

impl NeckSample {
    fn sup(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// λ applied to the scaled graphs: e^{c} when the true graph is large
    /// enough for a direct evaluation, otherwise LINEAR_THRESHOLD/sup|Ŵ|.
    /// Returns None for identically zero graphs.
    pub fn lambda(&self) -> Option<(f64, bool)> {
        let sup = Self::sup(&self.blend).max(Self::sup(&self.ga)).max(Self::sup(&self.gb));
        if sup == 0.0 {
            return None;
        }
        if self.log_scale + sup.ln() > LINEAR_THRESHOLD.ln() {
            Some((self.log_scale.exp(), false))
        } else {
            Some((LINEAR_THRESHOLD / sup, true))
        }
    }

    pub fn field(&self, v: &[f64], lambda: f64) -> ScalarField {
        ScalarField {
            grid: self.base.grid.clone(),
            values: v.iter().map(|x| lambda * x).collect(),
        }
    }

    /// Rows whose neck coordinate lies in [lo, hi].
    pub fn rows_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        let eps = 1e-9 * self.lattice.hs;
        (MARGIN_ROWS..self.lattice.ns - MARGIN_ROWS).filter(move |&i| {
            let s = self.lattice.s(i);
            s >= lo - eps && s <= hi + eps
        })
    }

    pub fn sup_rows(&self, v: &[f64], lo: f64, hi: f64) -> f64 {
        let nt = self.lattice.ntheta;
        self.rows_in(lo, hi)
            .flat_map(|i| v[i * nt..(i + 1) * nt].iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// A measured quantity of size e^{log}, kept in log form.
fn from_log(log: f64) -> f64 {
    log.exp()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandSup {
    pub s_lo: f64,
    pub s_hi: f64,
    pub sup: f64,
    pub log_sup: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureDeviation {
    pub label: String,
    pub sup_annulus: f64,
    pub log_sup_annulus: f64,
    pub refined_log_sup_annulus: f64,
    /// |a − b|/max(a, b) between the grid and its doubling.
    pub refinement_disagreement: f64,
    pub linear_response: bool,
    /// sup|H − 1| of the bare model on the annulus lattice.
    pub base_discretization: f64,
    pub bands: Vec<BandSup>,
    pub grid: NeckGrid,
}

/// (log sup |H − 1| over [lo, hi], linear?, base error). The log is −∞
/// for zero graphs.
fn region_deviation(neck: &GluedNeck, lo: f64, hi: f64, grid: &NeckGrid) -> Result<(f64, bool, f64)> {
    let smp = neck.sample(lo, hi, grid)?;
    let h0 = mean_curvature(&smp.base);
    let base = smp.sup_rows(&h0.values.iter().map(|h| h - 1.0).collect::<Vec<_>>(), lo, hi);
    let Some((lambda, linear)) = smp.lambda() else {
        return Ok((f64::NEG_INFINITY, false, base));
    };
    let hl = mean_curvature(&normal_graph(&smp.base, &smp.field(&smp.blend, lambda))?);
    let resp: Vec<f64> = hl
        .values
        .iter()
        .zip(&h0.values)
        .map(|(a, b)| (a - b) / lambda)
        .collect();
    let sup = smp.sup_rows(&resp, lo, hi);
    Ok((sup.ln() + smp.log_scale, linear, base))
}

fn disagreement(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return 0.0;
    }
    1.0 - (-(a - b).abs()).exp()
}

/// Outcome of the doubling check on a log-measured quantity.
pub(crate) struct Refined<T> {
    pub grid: NeckGrid,
    pub log: f64,
    pub refined_log: f64,
    pub disagreement: f64,
    pub extra: T,
}

/// Evaluates `f` on `grid` and its doubling, doubling further (up to
/// `grid.max_doublings` times) until the two agree within REFINEMENT_TOL.
pub(crate) fn refine<T>(
    grid: &NeckGrid,
    what: &str,
    label: &str,
    f: impl Fn(&NeckGrid) -> Result<(f64, T)>,
) -> Result<Refined<T>> {
    let mut g = *grid;
    let mut cur = f(&g)?;
    for _ in 0..=grid.max_doublings {
        let fine_grid = g.refined();
        let fine = f(&fine_grid)?;
        let dis = disagreement(cur.0, fine.0);
        if dis <= REFINEMENT_TOL {
            return Ok(Refined {
                grid: g,
                log: cur.0,
                refined_log: fine.0,
                disagreement: dis,
                extra: cur.1,
            });
        }
        g = fine_grid;
        cur = fine;
    }
    Err(CmcError::CoarseGrid(format!(
        "{what} on neck {label} still changes by more than {:.0}% under grid doubling at {} nodes per period",
        100.0 * REFINEMENT_TOL,
        g.nodes_per_period / 2
    )))
}

/// Per-unit-band sups of |H − 1| along the whole window.
pub fn band_profile(neck: &GluedNeck, grid: &NeckGrid) -> Result<Vec<BandSup>> {
    let l = neck.half_window;
    let nb = (2.0 * l).floor() as usize;
    (0..nb)
        .map(|b| {
            let lo = -l + b as f64;
            let hi = (lo + 1.0).min(l);
            let (log_sup, _, _) = region_deviation(neck, lo, hi, grid)?;
            Ok(BandSup {
                s_lo: lo,
                s_hi: hi,
                sup: from_log(log_sup),
                log_sup,
            })
        })
        .collect()
}

/// sup|H − 1| over the annulus (−1, 1)×S¹ of the glued neck, with a
/// grid-doubling check and the per-band profile along the window.
pub fn curvature_deviation(neck: &GluedNeck, grid: &NeckGrid) -> Result<CurvatureDeviation> {
    let mut dev = annulus_deviation(neck, grid)?;
    dev.bands = band_profile(neck, &dev.grid)?;
    Ok(dev)
}

/// `curvature_deviation` without the band profile.
pub fn annulus_deviation(neck: &GluedNeck, grid: &NeckGrid) -> Result<CurvatureDeviation> {
    let (lo, hi) = neck.annulus;
    let r = refine(grid, "curvature deviation", &neck.label, |g| {
        let (log, linear, base) = region_deviation(neck, lo, hi, g)?;
        Ok((log, (linear, base)))
    })?;
    Ok(CurvatureDeviation {
        label: neck.label.clone(),
        sup_annulus: from_log(r.log),
        log_sup_annulus: r.log,
        refined_log_sup_annulus: r.refined_log,
        refinement_disagreement: r.disagreement,
        linear_response: r.extra.0,
        base_discretization: r.extra.1,
        bands: Vec::new(),
        grid: r.grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use crate::blocks::{make_type1, make_type2, DFunctions, GraphModel};
    use crate::gluing::cutoff::cutoff_xi;
    use crate::gluing::matching::delta_offset;

    fn y_pair(n: usize) -> (EndDescriptor, EndDescriptor, f64) {
        let d = DFunctions::default();
        let g = GraphModel::default();
        let t1 = make_type1(0.5, 3, &d, &g).unwrap();
        let t2 = make_type2(0.5, 3, &d, &g).unwrap();
        let delta = delta_offset(n, 0.5, &d).unwrap();
        let b = t1
            .end("E0")
            .unwrap()
            .transformed(&nalgebra::Matrix3::identity(), &(Vector3::y() * delta));
        let a = t2.end("0").unwrap().clone();
        let l = n as f64 * a.model.profile.s_half;
        (a, b, l)
    }

    #[test]
    fn window_must_be_a_half_period_multiple() {
        let (a, b, l) = y_pair(4);
        assert!(glue_neck(&a, &b, l, cutoff_xi()).is_ok());
        assert!(glue_neck(&a, &b, l + 0.3, cutoff_xi()).is_err());
        assert!(matches!(
            glue_neck(&a, &b, l + 2.0 * a.model.profile.s_half, cutoff_xi()),
            Err(CmcError::ModelMismatch(_))
        ));
    }

    #[test]
    fn blend_is_exact_outside_the_annulus() {
        let (a, b, l) = y_pair(4);
        let neck = glue_neck(&a, &b, l, cutoff_xi()).unwrap();
        for &s in &[-3.0, -1.0, -1.5] {
            assert_eq!(neck.blended_graph(s, 0.7), neck.graph_a(s, 0.7));
        }
        for &s in &[1.0, 2.5] {
            assert_eq!(neck.blended_graph(s, 0.7), neck.graph_b(s, 0.7));
        }
    }
}
