//! Extensions of Jacobi fields across necks and their residuals under the
//! Jacobi operator of the glued surface.
//!
//! On a neck, Ψ = ξ A + (1 − ξ) B where A is a Jacobi field of the first
//! end and B one of the second. The residual LΨ is split into the part
//! carried by the bare model (`base_residual`, a discretization check)
//! and the part created by the end graphs (`glue_residual`), the latter
//! measured as a log-scaled linear response like the curvature deviation.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::delaunay::DEFAULT_TOL;
use crate::error::{invalid, CmcError, Result};
use crate::gluing::neck::{refine, GluedNeck, NeckGrid, NeckSample};
use crate::jacobi::{delaunay_variation, DelaunayVariation};
use crate::numerics::{linear_fit, LinearFit};
use crate::patch::{normal_graph, Patch, ScalarField};

/// Step in τ for the family cross-check of Φ^D.
pub const FAMILY_STEP: f64 = 1e-3;
/// Half-width of the region sampled around the annulus.
const RESIDUAL_REACH: f64 = 3.0;
/// Rows with |s| ≥ this count as away from the annulus.
const OUTSIDE_FROM: f64 = 1.25;

/// The two Jacobi fields joined on a neck.
#[derive(Clone, Debug)]
pub enum NeckField<'a> {
    /// A = a·N on the first side, B = b·N on the second.
    Translation { a: Vector3<f64>, b: Vector3<f64> },
    /// A = Φ^D(s_a), B = Φ^D(s_b) + t e·N with e the neck axis.
    Delaunay { variation: &'a DelaunayVariation, t: f64 },
}

impl NeckField<'_> {
    fn parts(&self, neck: &GluedNeck, sa: &Patch, sb: &Patch, k: usize, s: f64) -> (f64, f64) {
        match self {
            NeckField::Translation { a, b } => (a.dot(&sa.normal[k]), b.dot(&sb.normal[k])),
            NeckField::Delaunay { variation, t } => (
                variation.eval(neck.s_a(s)),
                variation.eval(neck.s_b(s)) + t * neck.model.axis.dot(&sb.normal[k]),
            ),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeckResidual {
    pub label: String,
    /// sup over the annulus of |L Ψ| on the bare model.
    pub base_residual: f64,
    /// Same, on the sampled rows with |s| ≥ 1.25.
    pub base_outside: f64,
    pub glue_residual: f64,
    pub log_glue_residual: f64,
    pub refined_log_glue_residual: f64,
    pub refinement_disagreement: f64,
    pub linear_response: bool,
    /// Grid at which the doubling check passed.
    pub grid: NeckGrid,
}

fn blend(smp: &NeckSample, neck: &GluedNeck, field: &NeckField, sa: &Patch, sb: &Patch) -> ScalarField {
    let lat = &smp.lattice;
    let values = (0..lat.len())
        .map(|k| {
            let i = k / lat.ntheta;
            let (a, b) = field.parts(neck, sa, sb, k, lat.s(i));
            let x = smp.xi[i];
            x * a + (1.0 - x) * b
        })
        .collect();
    ScalarField {
        grid: smp.base.grid.clone(),
        values,
    }
}

struct RegionResidual {
    base: f64,
    outside: f64,
    log_glue: f64,
    linear: bool,
}

fn region_residual(neck: &GluedNeck, field: &NeckField, grid: &NeckGrid) -> Result<RegionResidual> {
    let reach = RESIDUAL_REACH.min(neck.half_window);
    let smp = neck.sample(-reach, reach, grid)?;
    let psi0 = blend(&smp, neck, field, &smp.base, &smp.base);
    let r0 = smp.base.jacobi_apply(&psi0)?;
    let (lo, hi) = neck.annulus;
    let base = smp.sup_rows(&r0.values, lo, hi);
    let outside = smp
        .sup_rows(&r0.values, -reach, -OUTSIDE_FROM)
        .max(smp.sup_rows(&r0.values, OUTSIDE_FROM, reach));
    let Some((lambda, linear)) = smp.lambda() else {
        return Ok(RegionResidual {
            base,
            outside,
            log_glue: f64::NEG_INFINITY,
            linear: false,
        });
    };
    let glued = normal_graph(&smp.base, &smp.field(&smp.blend, lambda))?;
    let sa = normal_graph(&smp.base, &smp.field(&smp.ga, lambda))?;
    let sb = normal_graph(&smp.base, &smp.field(&smp.gb, lambda))?;
    let psi = blend(&smp, neck, field, &sa, &sb);
    let r = glued.jacobi_apply(&psi)?;
    let resp: Vec<f64> = r
        .values
        .iter()
        .zip(&r0.values)
        .map(|(a, b)| (a - b) / lambda)
        .collect();
    Ok(RegionResidual {
        base,
        outside,
        log_glue: smp.sup_rows(&resp, lo, hi).ln() + smp.log_scale,
        linear,
    })
}

/// Residual of an extended field on one neck, with a grid-doubling check
/// of the glue part.
pub fn neck_residual(neck: &GluedNeck, field: &NeckField, grid: &NeckGrid) -> Result<NeckResidual> {
    let r = refine(grid, "extension residual", &neck.label, |g| {
        let r = region_residual(neck, field, g)?;
        Ok((r.log_glue, r))
    })?;
    Ok(NeckResidual {
        label: neck.label.clone(),
        base_residual: r.extra.base,
        base_outside: r.extra.outside,
        glue_residual: r.log.exp(),
        log_glue_residual: r.log,
        refined_log_glue_residual: r.refined_log,
        refinement_disagreement: r.disagreement,
        linear_response: r.extra.linear,
        grid: r.grid,
    })
}

/// Ψ over the whole window of a neck, with the actual end graphs.
pub fn neck_field_samples(neck: &GluedNeck, field: &NeckField, grid: &NeckGrid) -> Result<ScalarField> {
    let l = neck.half_window;
    let smp = neck.sample(-l, l, grid)?;
    let lambda = smp.log_scale.exp();
    let sa = normal_graph(&smp.base, &smp.field(&smp.ga, lambda))?;
    let sb = normal_graph(&smp.base, &smp.field(&smp.gb, lambda))?;
    let psi = blend(&smp, neck, field, &sa, &sb);
    Ok(ScalarField {
        grid: smp.lattice.clone(),
        values: psi.values,
    })
}

/// t such that Φ^D(s_b) + t e·N agrees with Φ^D(s_a) on the bare model.
/// With s_b = 2L − s_a and L = j s_τ, the shift identity gives
/// Φ^D(s_b) = Φ^D(s_a) − j p_τ σ'(s_a), and e·N = σ'(s_a); hence t = j p_τ.
pub fn delaunay_shift_parameter(half_periods: usize, p_tau: f64) -> f64 {
    half_periods as f64 * p_tau
}

/// Φ^D of the neck model.
pub fn neck_variation(neck: &GluedNeck) -> Result<DelaunayVariation> {
    let tau = neck.model.tau();
    let t = tau.value();
    let h = FAMILY_STEP.min(0.5 * (1.0 - t).abs()).min(0.5 * t.abs());
    if !(h > 0.0) {
        return Err(CmcError::Degenerate("no room for the family step at this τ".into()));
    }
    delaunay_variation(tau, h, DEFAULT_TOL)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// (n, log of the measured quantity).
    pub points: Vec<(usize, f64)>,
    pub fit: LinearFit,
    pub predicted_slope: f64,
    /// |slope − predicted|/|predicted|.
    pub relative_error: f64,
}

/// Fits log-values against n and compares with a predicted slope.
pub fn decay_fit(points: &[(usize, f64)], predicted_slope: f64) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(invalid("a decay fit needs at least three points"));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(invalid("decay fit points must be finite"));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = linear_fit(&x, &y);
    Ok(DecayFit {
        points: points.to_vec(),
        relative_error: (fit.slope - predicted_slope).abs() / predicted_slope.abs(),
        fit,
        predicted_slope,
    })
}

/// Exponent of a power law |values| ~ C nᵉ from a log-log fit.
pub fn growth_exponent(points: &[(usize, f64)]) -> Result<LinearFit> {
    if points.len() < 3 || points.iter().any(|p| p.0 == 0 || !(p.1 > 0.0)) {
        return Err(invalid("growth fits need ≥ 3 points with n ≥ 1 and positive values"));
    }
    let x: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(linear_fit(&x, &y))
}
