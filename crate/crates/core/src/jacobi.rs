//! Jacobi operator of Delaunay surfaces, its explicit kernel elements,
//! the Delaunay variation field with its shift coefficient p_τ, and
//! Floquet indicial roots of the angular modes.

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::delaunay::{
    solve_profile, solve_profile_with, turning_point, Branch, DelaunayParameter, DelaunayProfile, DelaunaySurface,
};
use crate::error::{invalid, CmcError, Result};
use crate::numerics::fd::{diff_s, FdOrder};
use crate::numerics::interp::quintic_hermite;
use crate::numerics::{Dp5, OdeOptions, PeriodicDiff};
use crate::patch::{delaunay_patch, mean_curvature, normal_graph, theta_derivs, Grid, ScalarField};

/// Rows skipped at each end when measuring kernel residuals, so that the
/// one-sided boundary stencils do not dominate the interior error.
pub const BOUNDARY_ROWS: usize = 2;

/// Lattice aligned with the profile nodes: `s0` must be a node and the
/// spacing is `stride` profile steps.
pub fn delaunay_grid(profile: &DelaunayProfile, s0: f64, s1: f64, stride: usize, ntheta: usize) -> Result<Grid> {
    if stride == 0 || !(s1 > s0) {
        return Err(invalid("delaunay_grid needs stride > 0 and s1 > s0"));
    }
    let hs = profile.step() * stride as f64;
    let ns = ((s1 - s0) / hs).round() as usize + 1;
    Grid::new(s0, hs, ns, ntheta)
}

/// L_{D_τ}u = 4/(τ²e^{2σ}) (u_ss + u_θθ + τ² cosh(2σ) u) in isothermal
/// coordinates; fourth-order differences in s, spectral in θ.
pub fn jacobi_apply(profile: &DelaunayProfile, u: &ScalarField) -> Result<ScalarField> {
    let g = &u.grid;
    if g.ntheta < 8 {
        return Err(CmcError::CoarseGrid(format!(
            "{} θ-nodes; the Jacobi operator needs at least 8",
            g.ntheta
        )));
    }
    if g.ns < FdOrder::Fourth.min_nodes() {
        return Err(CmcError::CoarseGrid(format!("{} s-nodes", g.ns)));
    }
    let t = profile.tau.value();
    let sp = PeriodicDiff::new(g.ntheta);
    let (_, uss) = diff_s(&u.values, g.ns, g.ntheta, g.hs, FdOrder::Fourth);
    let (_, utt) = theta_derivs(&sp, &u.values, g, true);
    let mut values = Vec::with_capacity(g.len());
    for i in 0..g.ns {
        let sigma = profile.eval(g.s(i)).sigma;
        let pre = 4.0 / (t * t * (2.0 * sigma).exp());
        let pot = t * t * (2.0 * sigma).cosh();
        for j in 0..g.ntheta {
            let k = g.idx(i, j);
            values.push(pre * (uss[k] + utt[k] + pot * u.values[k]));
        }
    }
    Ok(ScalarField {
        grid: g.clone(),
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Translation { e: [f64; 3] },
    Rotation { e: [f64; 3] },
    DelaunayVariation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JacobiField {
    pub kind: FieldKind,
    pub field: ScalarField,
    /// Scale convention; Φ^D uses W(Φ^D, Φ^{T,axis})(0) = 1.
    pub normalization: f64,
}

fn unit(e: &Vector3<f64>) -> Result<()> {
    if (e.norm() - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("direction must be a unit vector, |e| = {}", e.norm())));
    }
    Ok(())
}

/// Φ^{T,e} = e·N.
pub fn translation_field(surface: &DelaunaySurface, grid: &Grid, e: Vector3<f64>) -> Result<JacobiField> {
    unit(&e)?;
    let field = ScalarField::from_fn(grid, |s, th| e.dot(&surface.point(s, th).1));
    Ok(JacobiField {
        kind: FieldKind::Translation { e: e.into() },
        field,
        normalization: 1.0,
    })
}

/// Φ^{R,e} = ((x·e′)e″ − (x·e″)e′)·N = (e × (x − b))·N for a direct frame.
pub fn rotation_field(surface: &DelaunaySurface, grid: &Grid, e: Vector3<f64>) -> Result<JacobiField> {
    unit(&e)?;
    let field = ScalarField::from_fn(grid, |s, th| {
        let (x, n) = surface.point(s, th);
        e.cross(&(x - surface.offset)).dot(&n)
    });
    Ok(JacobiField {
        kind: FieldKind::Rotation { e: e.into() },
        field,
        normalization: 1.0,
    })
}

/// Finite-difference family cross-check of Φ^D.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub h: f64,
    /// Coefficient c in v ≈ c·Φ^D + d·σ'.
    pub scale: f64,
    pub periodic_coeff: f64,
    /// max|v − cΦ^D − dσ'| / max|v|.
    pub deviation: f64,
}

/// The θ-independent Delaunay variation field Φ^D, sampled over two
/// periods of σ from the Jacobi ODE, with its shift coefficient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelaunayVariation {
    pub tau: DelaunayParameter,
    pub s_half: f64,
    pub step: f64,
    pub nodes_per_period: usize,
    pub sigma: Vec<f64>,
    pub dsigma: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// Least-squares p_τ in Φ^D(s + 2s_τ) − Φ^D(s) = p_τ σ'(s).
    pub p_tau: f64,
    /// Same coefficient from derivatives at s = 0: Φ^D'(2s_τ)/σ''(0).
    pub p_tau_endpoint: f64,
    pub shift_residual: f64,
    pub family_check: FamilyCheck,
}

impl DelaunayVariation {
    pub fn period(&self) -> f64 {
        2.0 * self.s_half
    }

    /// Φ^D at any s: even in s and extended by the shift identity.
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        let p = self.period();
        let k = (s / p).floor();
        let r = s - k * p;
        let (phi, dsig) = self.eval_first_period(r);
        phi + k * self.p_tau * dsig
    }

    fn eval_first_period(&self, r: f64) -> (f64, f64) {
        let x = r / self.step;
        let i = (x.floor() as usize).min(self.nodes_per_period - 1);
        let t = x - i as f64;
        if t < 1e-9 {
            return (self.phi[i], self.dsigma[i]);
        }
        if t > 1.0 - 1e-9 {
            return (self.phi[i + 1], self.dsigma[i + 1]);
        }
        let tv = self.tau.value();
        let pot = |s: f64| tv * tv * (2.0 * s).cosh();
        let (s0, s1) = (self.sigma[i], self.sigma[i + 1]);
        let (d0, d1) = (self.dsigma[i], self.dsigma[i + 1]);
        let phi = quintic_hermite(
            self.step,
            self.phi[i],
            self.dphi[i],
            -pot(s0) * self.phi[i],
            self.phi[i + 1],
            self.dphi[i + 1],
            -pot(s1) * self.phi[i + 1],
            t,
        );
        let dd = |s: f64| self.tau.sigma_dd(s);
        let ddd = |s: f64, d: f64| -pot(s) * d;
        let dsig = quintic_hermite(self.step, d0, dd(s0), ddd(s0, d0), d1, dd(s1), ddd(s1, d1), t);
        (phi, dsig)
    }
}

fn meridian(profile: &DelaunayProfile, s: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let tau = profile.tau;
    let p = profile.eval(s);
    let r = 0.5 * tau.value() * p.sigma.exp();
    let pos = [r, 0.5 * p.kappa];
    let tan = [r * p.dsigma, 0.5 * tau.kappa_d(p.sigma)];
    let nrm = [-tau.rho(p.sigma), p.dsigma];
    (pos, tan, nrm)
}

/// Signed normal distance from D_τ(s) to the meridian of `other`.
fn graph_offset(base: &DelaunayProfile, other: &DelaunayProfile, s: f64) -> Result<f64> {
    let (p, _, n) = meridian(base, s);
    let (mut t, mut u) = (0.0, s);
    for _ in 0..60 {
        let (q, dq, _) = meridian(other, u);
        let f = [p[0] + t * n[0] - q[0], p[1] + t * n[1] - q[1]];
        if f[0].abs().max(f[1].abs()) < 1e-15 {
            return Ok(t);
        }
        // Jacobian columns: ∂/∂t = n, ∂/∂u = −q'(u).
        let det = n[0] * (-dq[1]) - (-dq[0]) * n[1];
        let dt = (f[0] * (-dq[1]) - (-dq[0]) * f[1]) / det;
        let du = (n[0] * f[1] - n[1] * f[0]) / det;
        t -= dt;
        u -= du;
    }
    let (q, _, _) = meridian(other, u);
    let res = (p[0] + t * n[0] - q[0]).hypot(p[1] + t * n[1] - q[1]);
    if res < 1e-12 {
        Ok(t)
    } else {
        Err(CmcError::Integration(format!("normal-graph projection did not converge at s = {s}")))
    }
}

/// Builds Φ^D by integrating u'' + τ²cosh(2σ)u = 0 from the even initial
/// data Φ^D(0) = 1/σ''(0), Φ^D'(0) = 0 (so W(Φ^D, σ')(0) = 1), extracts
/// p_τ and cross-checks against a finite difference of the family in τ.
pub fn delaunay_variation(tau: DelaunayParameter, h: f64, tol: f64) -> Result<DelaunayVariation> {
    if tau.branch() == Branch::Cylinder {
        return Err(CmcError::Degenerate("Φ^D is not defined for τ = 1".into()));
    }
    let t = tau.value();
    let (lo, hi) = (t - h, t + h);
    if !(h > 0.0) || hi > 1.0 || lo.signum() != t.signum() || hi.signum() != t.signum() {
        return Err(invalid(format!("τ ± h = [{lo}, {hi}] leaves the branch of τ = {t}")));
    }
    let profile = solve_profile(tau, 1, tol)?;
    let n = profile.nodes_per_period;
    let step = profile.step();
    let sigma_star = turning_point(tau);
    let sdd0 = tau.sigma_dd(-sigma_star);
    let mut ode = Dp5::<4>::new(OdeOptions::with_tol((tol * 1e-3).clamp(1e-14, 1e-12)));
    let mut f = move |_s: f64, y: &[f64; 4]| {
        [
            y[1],
            tau.sigma_dd(y[0]),
            y[3],
            -t * t * (2.0 * y[0]).cosh() * y[2],
        ]
    };
    let mut y = [-sigma_star, 0.0, 1.0 / sdd0, 0.0];
    let total = 2 * n;
    let (mut sigma, mut dsigma, mut phi, mut dphi) =
        (Vec::with_capacity(total + 1), Vec::with_capacity(total + 1), Vec::with_capacity(total + 1), Vec::with_capacity(total + 1));
    for i in 0..=total {
        if i > 0 {
            y = ode.integrate(&mut f, (i - 1) as f64 * step, y, i as f64 * step)?;
        }
        sigma.push(y[0]);
        dsigma.push(y[1]);
        phi.push(y[2]);
        dphi.push(y[3]);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        num += (phi[i + n] - phi[i]) * dsigma[i];
        den += dsigma[i] * dsigma[i];
    }
    let p_tau = num / den;
    let shift_residual = (0..=n)
        .map(|i| (phi[i + n] - phi[i] - p_tau * dsigma[i]).abs())
        .fold(0.0, f64::max);
    let p_tau_endpoint = dphi[n] / sdd0;
    if p_tau.abs() < 1e-10 {
        return Err(CmcError::Degenerate(format!("|p_τ| = {:e} is below 1e-10", p_tau.abs())));
    }

    let plus = solve_profile(DelaunayParameter::new(hi)?, 1, tol)?;
    let minus = solve_profile(DelaunayParameter::new(lo)?, 1, tol)?;
    let mut rows = Vec::new();
    for i in (0..=n).step_by(8) {
        let s = i as f64 * step;
        let v = (graph_offset(&profile, &plus, s)? - graph_offset(&profile, &minus, s)?) / (2.0 * h);
        rows.push((v, phi[i], dsigma[i]));
    }
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(v, p, d) in &rows {
        a11 += p * p;
        a12 += p * d;
        a22 += d * d;
        b1 += v * p;
        b2 += v * d;
    }
    let det = a11 * a22 - a12 * a12;
    let c = (b1 * a22 - b2 * a12) / det;
    let d = (a11 * b2 - a12 * b1) / det;
    let vmax = rows.iter().fold(0.0f64, |m, r| m.max(r.0.abs()));
    let dev = rows
        .iter()
        .fold(0.0f64, |m, &(v, p, ds)| m.max((v - c * p - d * ds).abs()));
    Ok(DelaunayVariation {
        tau,
        s_half: profile.s_half,
        step,
        nodes_per_period: n,
        sigma,
        dsigma,
        phi,
        dphi,
        p_tau,
        p_tau_endpoint,
        shift_residual,
        family_check: FamilyCheck {
            h,
            scale: c,
            periodic_coeff: d,
            deviation: dev / vmax,
        },
    })
}

/// Φ^D sampled on a lattice, returned with p_τ.
pub fn delaunay_variation_field(tau: DelaunayParameter, grid: &Grid, h: f64, tol: f64) -> Result<(JacobiField, f64)> {
    let var = delaunay_variation(tau, h, tol)?;
    let field = ScalarField::from_fn(grid, |s, _| var.eval(s));
    Ok((
        JacobiField {
            kind: FieldKind::DelaunayVariation,
            field,
            normalization: 1.0,
        },
        var.p_tau,
    ))
}

/// Floquet data of u'' + (τ²cosh 2σ − j²)u = 0 over one period s_τ of the
/// potential.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FloquetData {
    pub tau: DelaunayParameter,
    pub j: u32,
    pub monodromy: [[f64; 2]; 2],
    pub trace: f64,
    /// W(s_τ/2)², the determinant of the factored monodromy.
    pub det: f64,
    /// γ_{τ,j}; zero in the periodic case.
    pub zeta_real: f64,
    /// acosh(|trace|/2)/s_τ before the periodic-case cut-off.
    pub zeta_raw: f64,
    pub periodic_case: bool,
    /// Trace from direct integration over [0, s_τ].
    pub trace_direct: f64,
    pub s_half: f64,
}

/// Monodromy over one potential period. The potential is even about
/// s_τ/2, so with Φ the fundamental matrix at s_τ/2 and J = diag(1, −1),
/// M = J adj(Φ) J Φ. This keeps det M = W² accurate even when the
/// entries of M are large.
pub fn monodromy(tau: DelaunayParameter, j: u32, tol: f64) -> Result<FloquetData> {
    if tau.branch() == Branch::Cylinder {
        return Err(CmcError::Degenerate("Floquet analysis assumes τ ≠ 1".into()));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let s_half = crate::delaunay::half_period_quadrature(tau, crate::delaunay::PERIOD_QUAD_TOL)?;
    let t = tau.value();
    let jj = (j * j) as f64;
    let rhs = move |_s: f64, y: &[f64; 6]| {
        let q = t * t * (2.0 * y[0]).cosh() - jj;
        [y[1], tau.sigma_dd(y[0]), y[3], -q * y[2], y[5], -q * y[4]]
    };
    let opts = OdeOptions::with_tol((tol * 1e-3).clamp(1e-14, 1e-13));
    let y0 = [-turning_point(tau), 0.0, 1.0, 0.0, 0.0, 1.0];
    let mut f = rhs;
    let half = Dp5::<6>::new(opts).integrate(&mut f, 0.0, y0, 0.5 * s_half)?;
    let (c, cp, s, sp) = (half[2], half[3], half[4], half[5]);
    let diag = c * sp + s * cp;
    let m = [[diag, 2.0 * s * sp], [2.0 * c * cp, diag]];
    let w = c * sp - s * cp;
    let full = Dp5::<6>::new(opts).integrate(&mut f, 0.0, y0, s_half)?;
    let trace = 2.0 * diag;
    let trace_direct = full[2] + full[5];
    let zeta_raw = if trace.abs() >= 2.0 {
        (trace.abs() / 2.0).acosh() / s_half
    } else {
        0.0
    };
    let periodic_case = trace.abs() <= 2.0 + tol;
    Ok(FloquetData {
        tau,
        j,
        monodromy: m,
        trace,
        det: w * w,
        zeta_real: if periodic_case { 0.0 } else { zeta_raw.max(0.0) },
        zeta_raw,
        periodic_case,
        trace_direct,
        s_half,
    })
}

/// γ_{τ,j}.
pub fn indicial_root(tau: DelaunayParameter, j: u32, tol: f64) -> Result<f64> {
    Ok(monodromy(tau, j, tol)?.zeta_real)
}

/// ‖2H(εw) − 2H(0) − εLw‖∞ over interior rows.
pub fn linearization_check(surface: &DelaunaySurface, w: &ScalarField, eps: f64) -> Result<f64> {
    let base = delaunay_patch(surface, &w.grid, FdOrder::Fourth)?;
    let h0 = mean_curvature(&base);
    let he = mean_curvature(&normal_graph(&base, &w.map(|v| eps * v))?);
    let lw = jacobi_apply(&surface.profile, w)?;
    let values = (0..w.values.len())
        .map(|k| 2.0 * he.values[k] - 2.0 * h0.values[k] - eps * lw.values[k])
        .collect();
    Ok(ScalarField {
        grid: w.grid.clone(),
        values,
    }
    .interior_sup(BOUNDARY_ROWS))
}

/// Q(w) = 2H(w) − 2H(0) − Lw pointwise.
pub fn nonlinear_remainder(surface: &DelaunaySurface, w: &ScalarField) -> Result<ScalarField> {
    let base = delaunay_patch(surface, &w.grid, FdOrder::Fourth)?;
    let h0 = mean_curvature(&base);
    let hw = mean_curvature(&normal_graph(&base, w)?);
    let lw = jacobi_apply(&surface.profile, w)?;
    let values = (0..w.values.len())
        .map(|k| 2.0 * hw.values[k] - 2.0 * h0.values[k] - lw.values[k])
        .collect();
    Ok(ScalarField {
        grid: w.grid.clone(),
        values,
    })
}

/// Nodes per period of σ used by the patch-level CMC and kernel checks.
pub const PATCH_NODES_PER_PERIOD: usize = 1024;
pub const PATCH_NTHETA: usize = 32;

/// Canonical surface over two periods with a one-period lattice in the
/// middle, so that no stencil reaches the ends of the profile.
fn check_setup(tau: DelaunayParameter, nodes_per_period: usize, ntheta: usize) -> Result<(DelaunaySurface, Grid)> {
    let profile = solve_profile_with(tau, 2, nodes_per_period, crate::delaunay::DEFAULT_TOL)?;
    let p = profile.period();
    let grid = delaunay_grid(&profile, 0.5 * p, 1.5 * p, 1, ntheta)?;
    Ok((DelaunaySurface::canonical(Arc::new(profile)), grid))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CmcCheck {
    pub tau: DelaunayParameter,
    pub nodes_per_period: usize,
    pub order: FdOrder,
    /// sup |H − 1| over interior rows of one period.
    pub sup_h_error: f64,
}

/// Mean curvature of a sampled Delaunay patch against H = 1.
pub fn cmc_check(tau: DelaunayParameter, nodes_per_period: usize, ntheta: usize, order: FdOrder) -> Result<CmcCheck> {
    let (surf, grid) = check_setup(tau, nodes_per_period, ntheta)?;
    let h = mean_curvature(&delaunay_patch(&surf, &grid, order)?);
    Ok(CmcCheck {
        tau,
        nodes_per_period,
        order,
        sup_h_error: h.map(|v| v - 1.0).interior_sup(BOUNDARY_ROWS),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelCheck {
    pub tau: DelaunayParameter,
    pub nodes_per_period: usize,
    /// Directions: the axis, then two perpendiculars.
    pub directions: [[f64; 3]; 3],
    /// ‖LΦ^{T,e}‖∞ per direction.
    pub translation: [f64; 3],
    /// ‖LΦ^{R,e}‖∞ per direction.
    pub rotation: [f64; 3],
}

impl KernelCheck {
    pub fn worst(&self) -> f64 {
        self.translation.iter().chain(&self.rotation).fold(0.0, |a, &b| a.max(b))
    }
}

/// Applies L to the translation and rotation fields of a canonical surface.
pub fn kernel_check(tau: DelaunayParameter, nodes_per_period: usize, ntheta: usize) -> Result<KernelCheck> {
    let (surf, grid) = check_setup(tau, nodes_per_period, ntheta)?;
    let dirs = [Vector3::z(), Vector3::x(), Vector3::y()];
    let mut translation = [0.0; 3];
    let mut rotation = [0.0; 3];
    for (i, e) in dirs.iter().enumerate() {
        let t = translation_field(&surf, &grid, *e)?;
        translation[i] = jacobi_apply(&surf.profile, &t.field)?.interior_sup(BOUNDARY_ROWS);
        let r = rotation_field(&surf, &grid, *e)?;
        rotation[i] = jacobi_apply(&surf.profile, &r.field)?.interior_sup(BOUNDARY_ROWS);
    }
    Ok(KernelCheck {
        tau,
        nodes_per_period,
        directions: dirs.map(|e| e.into()),
        translation,
        rotation,
    })
}

/// Canonical surface of a freshly solved profile.
pub fn canonical_surface(tau: DelaunayParameter, n_periods: usize, tol: f64) -> Result<DelaunaySurface> {
    Ok(DelaunaySurface::canonical(Arc::new(solve_profile(
        tau, n_periods, tol,
    )?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_constant_maps_to_four() {
        let surf = canonical_surface(DelaunayParameter::new(1.0).unwrap(), 1, 1e-10).unwrap();
        let g = delaunay_grid(&surf.profile, 0.0, 2.0, 8, 16).unwrap();
        let lu = jacobi_apply(&surf.profile, &ScalarField::from_fn(&g, |_, _| 1.0)).unwrap();
        assert!(lu.values.iter().all(|v| (v - 4.0).abs() < 1e-9));
    }

    #[test]
    fn too_few_theta_nodes_rejected() {
        let surf = canonical_surface(DelaunayParameter::new(0.5).unwrap(), 1, 1e-10).unwrap();
        let g = delaunay_grid(&surf.profile, 0.0, 1.0, 4, 6).unwrap();
        assert!(matches!(
            jacobi_apply(&surf.profile, &ScalarField::zeros(&g)),
            Err(CmcError::CoarseGrid(_))
        ));
    }

    #[test]
    fn cylinder_has_no_floquet_data() {
        assert!(monodromy(DelaunayParameter::new(1.0).unwrap(), 2, 1e-10).is_err());
    }
}
