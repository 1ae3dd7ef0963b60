//! Delaunay surfaces: profile ODE, turning points, periods and the
//! positioned immersion with its mean-curvature-one normal.
//!
//! The profile is written in isothermal coordinates,
//! `X(s, θ) = ½(τ e^σ cos θ, τ e^σ sin θ, κ)`, where σ solves
//! `σ'' = −τ² cosh σ sinh σ` and `κ' = τ e^σ ρ(σ)` with
//! `ρ = τ cosh σ` on unduloids and `ρ = τ sinh σ` on nodoids.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CmcError, Result};
use crate::numerics::interp::quintic_hermite;
use crate::numerics::{integrate, Dp5, OdeOptions};

pub const DEFAULT_NODES_PER_PERIOD: usize = 512;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Tolerance used whenever a period enters another formula.
pub const PERIOD_QUAD_TOL: f64 = 1e-14;

/// The Delaunay parameter τ ∈ (−∞, 0) ∪ (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DelaunayParameter(f64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Unduloid,
    Cylinder,
    Nodoid,
}

impl TryFrom<f64> for DelaunayParameter {
    type Error = CmcError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DelaunayParameter> for f64 {
    fn from(t: DelaunayParameter) -> f64 {
        t.0
    }
}

impl DelaunayParameter {
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau == 0.0 || tau > 1.0 {
            return Err(CmcError::InvalidTau(tau));
        }
        Ok(Self(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn branch(self) -> Branch {
        if self.0 == 1.0 {
            Branch::Cylinder
        } else if self.0 > 0.0 {
            Branch::Unduloid
        } else {
            Branch::Nodoid
        }
    }

    /// Nodoids below τ = −1 lie outside the default sweep domain.
    pub fn is_experimental(self) -> bool {
        self.0 < -1.0
    }

    /// Radial factor of the unit normal; `ρ² + σ'² = 1` along solutions.
    pub fn rho(self, sigma: f64) -> f64 {
        if self.0 > 0.0 {
            self.0 * sigma.cosh()
        } else {
            self.0 * sigma.sinh()
        }
    }

    pub fn sigma_dd(self, sigma: f64) -> f64 {
        -self.0 * self.0 * sigma.cosh() * sigma.sinh()
    }

    pub fn kappa_d(self, sigma: f64) -> f64 {
        self.0 * sigma.exp() * self.rho(sigma)
    }

    pub fn energy_residual(self, sigma: f64, dsigma: f64) -> f64 {
        dsigma * dsigma + self.rho(sigma).powi(2) - 1.0
    }
}

/// σ_* > 0 with τ²cosh²σ_* = 1 (unduloid) or τ²sinh²σ_* = 1 (nodoid).
pub fn turning_point(tau: DelaunayParameter) -> f64 {
    let t = tau.value();
    match tau.branch() {
        Branch::Cylinder => 0.0,
        Branch::Unduloid => (1.0 / t).acosh(),
        Branch::Nodoid => (1.0 / t.abs()).asinh(),
    }
}

/// s_τ from the substituted integral, which has no endpoint singularity.
pub fn half_period_quadrature(tau: DelaunayParameter, tol: f64) -> Result<f64> {
    let t = tau.value();
    let t2 = t * t;
    match tau.branch() {
        Branch::Cylinder => Err(CmcError::Degenerate(
            "σ is constant for τ = 1; the half-period is undefined".into(),
        )),
        Branch::Unduloid => integrate(
            |x: f64| 1.0 / (t2 + (1.0 - t2) * x.sin().powi(2)).sqrt(),
            -FRAC_PI_2,
            FRAC_PI_2,
            tol,
        ),
        Branch::Nodoid => integrate(
            |x: f64| 1.0 / (t2 + x.sin().powi(2)).sqrt(),
            -FRAC_PI_2,
            FRAC_PI_2,
            tol,
        ),
    }
}

/// T_τ, half of the least axial period, from the substituted integrals.
pub fn physical_period_quadrature(tau: DelaunayParameter, tol: f64) -> Result<f64> {
    let t = tau.value();
    let t2 = t * t;
    let twice = if t > 0.0 {
        integrate(
            |x: f64| (1.0 - (1.0 - t2) * x.cos().powi(2)).max(0.0).sqrt(),
            -FRAC_PI_2,
            FRAC_PI_2,
            tol,
        )?
    } else {
        integrate(
            |x: f64| {
                let s2 = x.sin().powi(2);
                s2 / (t2 + s2).sqrt()
            },
            -FRAC_PI_2,
            FRAC_PI_2,
            tol,
        )?
    };
    Ok(0.5 * twice)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub sigma: f64,
    pub dsigma: f64,
    pub kappa: f64,
}

/// Sampled solution of the profile equations on a uniform grid that starts
/// at a neck (s = 0) and covers `n_periods` full periods of σ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelaunayProfile {
    pub tau: DelaunayParameter,
    pub s_grid: Vec<f64>,
    pub sigma: Vec<f64>,
    pub dsigma: Vec<f64>,
    pub kappa: Vec<f64>,
    pub sigma_star: f64,
    /// s_τ; for the cylinder this is the nominal limit value π.
    pub s_half: f64,
    pub t_phys: f64,
    pub nodes_per_period: usize,
    pub n_periods: usize,
    pub degenerate: bool,
}

fn profile_rhs(tau: DelaunayParameter) -> impl FnMut(f64, &[f64; 3]) -> [f64; 3] {
    move |_s, y| [y[1], tau.sigma_dd(y[0]), tau.kappa_d(y[0])]
}

/// Integrates the profile over `n_periods` periods on the default grid.
pub fn solve_profile(tau: DelaunayParameter, n_periods: usize, tol: f64) -> Result<DelaunayProfile> {
    solve_profile_with(tau, n_periods, DEFAULT_NODES_PER_PERIOD, tol)
}

pub fn solve_profile_with(
    tau: DelaunayParameter,
    n_periods: usize,
    nodes_per_period: usize,
    tol: f64,
) -> Result<DelaunayProfile> {
    if n_periods == 0 {
        return Err(invalid("n_periods must be positive"));
    }
    if nodes_per_period < 8 || nodes_per_period % 2 != 0 {
        return Err(invalid("nodes_per_period must be even and at least 8"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let total = n_periods * nodes_per_period;
    if tau.branch() == Branch::Cylinder {
        let s_half = PI;
        let h = 2.0 * s_half / nodes_per_period as f64;
        let s_grid: Vec<f64> = (0..=total).map(|i| i as f64 * h).collect();
        return Ok(DelaunayProfile {
            tau,
            sigma: vec![0.0; total + 1],
            dsigma: vec![0.0; total + 1],
            kappa: s_grid.clone(),
            s_grid,
            sigma_star: 0.0,
            s_half,
            t_phys: FRAC_PI_2,
            nodes_per_period,
            n_periods,
            degenerate: true,
        });
    }
    let s_half = half_period_quadrature(tau, PERIOD_QUAD_TOL)?;
    let t_phys = physical_period_quadrature(tau, PERIOD_QUAD_TOL)?;
    let sigma_star = turning_point(tau);
    let h = 2.0 * s_half / nodes_per_period as f64;
    let mut ode = Dp5::<3>::new(OdeOptions::with_tol((tol * 1e-2).max(1e-14)));
    let mut f = profile_rhs(tau);
    let mut y = [-sigma_star, 0.0, 0.0];
    let mut s_grid = Vec::with_capacity(total + 1);
    let mut sigma = Vec::with_capacity(total + 1);
    let mut dsigma = Vec::with_capacity(total + 1);
    let mut kappa = Vec::with_capacity(total + 1);
    for i in 0..=total {
        let s = i as f64 * h;
        if i > 0 {
            y = ode.integrate(&mut f, s_grid[i - 1], y, s)?;
        }
        s_grid.push(s);
        sigma.push(y[0]);
        dsigma.push(y[1]);
        kappa.push(y[2]);
    }
    Ok(DelaunayProfile {
        tau,
        s_grid,
        sigma,
        dsigma,
        kappa,
        sigma_star,
        s_half,
        t_phys,
        nodes_per_period,
        n_periods,
        degenerate: false,
    })
}

impl DelaunayProfile {
    /// Least period 2 s_τ of σ.
    pub fn period(&self) -> f64 {
        2.0 * self.s_half
    }

    pub fn step(&self) -> f64 {
        self.period() / self.nodes_per_period as f64
    }

    /// Sampled window; negative s is covered through the evenness of σ.
    pub fn window(&self) -> (f64, f64) {
        let s = self.n_periods as f64 * self.period();
        (-s, s)
    }

    /// κ(2 s_τ), the κ-advance over one period of σ.
    pub fn kappa_period(&self) -> f64 {
        self.kappa[self.nodes_per_period]
    }

    pub fn max_energy_residual(&self) -> f64 {
        self.sigma
            .iter()
            .zip(&self.dsigma)
            .map(|(&s, &d)| self.tau.energy_residual(s, d).abs())
            .fold(0.0, f64::max)
    }

    /// Profile at any s, using periodicity of σ and the κ-advance per period.
    /// Grid nodes are returned exactly; between nodes the values come from
    /// quintic Hermite interpolation with analytic derivatives.
    pub fn eval(&self, s: f64) -> ProfilePoint {
        let p = self.period();
        let mut k = (s / p).floor();
        let mut r = s - k * p;
        if r >= p {
            r -= p;
            k += 1.0;
        } else if r < 0.0 {
            r += p;
            k -= 1.0;
        }
        let h = self.step();
        let x = r / h;
        let mut i = x.floor() as usize;
        let mut t = x - i as f64;
        if i >= self.nodes_per_period {
            i = self.nodes_per_period - 1;
            t = 1.0;
        }
        let base = if t < 1e-9 {
            self.node(i)
        } else if t > 1.0 - 1e-9 {
            self.node(i + 1)
        } else {
            self.hermite(i, t, h)
        };
        ProfilePoint {
            kappa: base.kappa + k * self.kappa_period(),
            ..base
        }
    }

    fn node(&self, i: usize) -> ProfilePoint {
        ProfilePoint {
            sigma: self.sigma[i],
            dsigma: self.dsigma[i],
            kappa: self.kappa[i],
        }
    }

    fn hermite(&self, i: usize, t: f64, h: f64) -> ProfilePoint {
        let tau = self.tau;
        let tv = tau.value();
        let (s0, s1) = (self.sigma[i], self.sigma[i + 1]);
        let (d0, d1) = (self.dsigma[i], self.dsigma[i + 1]);
        let (dd0, dd1) = (tau.sigma_dd(s0), tau.sigma_dd(s1));
        let ddd = |s: f64, d: f64| -tv * tv * (2.0 * s).cosh() * d;
        let kdd = |s: f64, d: f64| tv * tv * (2.0 * s).exp() * d;
        ProfilePoint {
            sigma: quintic_hermite(h, s0, d0, dd0, s1, d1, dd1, t),
            dsigma: quintic_hermite(h, d0, dd0, ddd(s0, d0), d1, dd1, ddd(s1, d1), t),
            kappa: quintic_hermite(
                h,
                self.kappa[i],
                tau.kappa_d(s0),
                kdd(s0, d0),
                self.kappa[i + 1],
                tau.kappa_d(s1),
                kdd(s1, d1),
                t,
            ),
        }
    }
}

/// Half-period by ODE event detection: the first zero of σ' after s = 0,
/// which is where σ reaches +σ_*.
pub fn half_period_event(tau: DelaunayParameter, tol: f64) -> Result<f64> {
    if tau.branch() == Branch::Cylinder {
        return Err(CmcError::Degenerate("no turning event for τ = 1".into()));
    }
    let chunk = 1.0 / 32.0;
    let opts = OdeOptions::with_tol((tol * 1e-2).max(1e-14));
    let mut ode = Dp5::<2>::new(opts);
    let mut f = move |_s: f64, y: &[f64; 2]| [y[1], tau.sigma_dd(y[0])];
    let mut s = 0.0;
    let mut y = [-turning_point(tau), 0.0];
    for _ in 0..1_000_000 {
        let next = ode.integrate(&mut f, s, y, s + chunk)?;
        if s > 0.0 && next[1] <= 0.0 {
            let (s0, y0) = (s, y);
            let mut probe = Dp5::<2>::new(opts);
            return crate::numerics::bisect(
                |x| probe.integrate(&mut f, s0, y0, x).map(|v| v[1]).unwrap_or(f64::NAN),
                s0,
                s0 + chunk,
                1e-15,
                0.0,
            );
        }
        s += chunk;
        y = next;
    }
    Err(CmcError::Integration("no turning event found".into()))
}

/// s_τ from quadrature, cross-checked against ODE event detection.
pub fn half_period(tau: DelaunayParameter, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let q = half_period_quadrature(tau, tol.min(1e-12))?;
    let e = half_period_event(tau, tol)?;
    let allowed = 10.0 * tol.max(1e-12);
    if ((q - e) / q).abs() > allowed {
        return Err(CmcError::CrossCheck {
            what: "half-period quadrature vs ODE event".into(),
            primary: q,
            check: e,
        });
    }
    Ok(q)
}

/// T_τ from quadrature, cross-checked against the axial advance of the
/// solved profile: one period of σ moves the surface by ½κ(2s_τ) = 2T_τ.
pub fn physical_period(tau: DelaunayParameter, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let q = physical_period_quadrature(tau, tol.min(1e-12))?;
    let profile = solve_profile(tau, 1, tol)?;
    let ode = 0.25 * profile.kappa_period();
    let allowed = 10.0 * tol.max(1e-12);
    if ((q - ode) / q).abs() > allowed {
        return Err(CmcError::CrossCheck {
            what: "physical period quadrature vs profile".into(),
            primary: q,
            check: ode,
        });
    }
    Ok(q)
}

/// Central difference of T_τ; both τ ± h must stay on the branch of τ.
pub fn period_derivative(tau: DelaunayParameter, h: f64) -> Result<f64> {
    let t = tau.value();
    if !(h > 0.0) {
        return Err(invalid("h must be positive"));
    }
    let (lo, hi) = (t - h, t + h);
    if hi > 1.0 || lo.signum() != t.signum() || hi.signum() != t.signum() {
        return Err(invalid(format!(
            "τ ± h = [{lo}, {hi}] leaves the branch of τ = {t}"
        )));
    }
    let tp = physical_period_quadrature(DelaunayParameter::new(hi)?, PERIOD_QUAD_TOL)?;
    let tm = physical_period_quadrature(DelaunayParameter::new(lo)?, PERIOD_QUAD_TOL)?;
    Ok((tp - tm) / (2.0 * h))
}

/// A Delaunay surface D_τ^a + b: the canonical surface (axis e₃, neck on
/// {x₃ = 0}) rotated so that e₃ goes to `axis`, then translated by `offset`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelaunaySurface {
    pub profile: Arc<DelaunayProfile>,
    pub axis: Vector3<f64>,
    pub offset: Vector3<f64>,
}

pub(crate) fn frame_to(axis: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::rotation_between(&Vector3::z(), axis)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), PI))
}

impl DelaunaySurface {
    pub fn new(profile: Arc<DelaunayProfile>, axis: Vector3<f64>, offset: Vector3<f64>) -> Result<Self> {
        if (axis.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("axis must be a unit vector, |a| = {}", axis.norm())));
        }
        Ok(Self {
            profile,
            axis,
            offset,
        })
    }

    pub fn canonical(profile: Arc<DelaunayProfile>) -> Self {
        Self {
            profile,
            axis: Vector3::z(),
            offset: Vector3::zeros(),
        }
    }

    pub fn tau(&self) -> DelaunayParameter {
        self.profile.tau
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        frame_to(&self.axis)
    }

    /// Image under the isometry x ↦ m·x + t (m orthogonal).
    pub fn transformed(&self, m: &nalgebra::Matrix3<f64>, t: &Vector3<f64>) -> Self {
        let axis = (m * self.axis).normalize();
        Self {
            profile: self.profile.clone(),
            axis,
            offset: m * self.offset + t,
        }
    }

    /// Position and unit normal without the window check.
    pub fn point(&self, s: f64, theta: f64) -> (Vector3<f64>, Vector3<f64>) {
        let tau = self.tau();
        let p = self.profile.eval(s);
        let r = 0.5 * tau.value() * p.sigma.exp();
        let (st, ct) = theta.sin_cos();
        let x = Vector3::new(r * ct, r * st, 0.5 * p.kappa);
        let rho = tau.rho(p.sigma);
        let n = Vector3::new(-rho * ct, -rho * st, p.dsigma).normalize();
        let rot = self.rotation();
        (rot * x + self.offset, rot * n)
    }

    /// Coordinate tangents (∂_s X, ∂_θ X).
    pub fn tangents(&self, s: f64, theta: f64) -> (Vector3<f64>, Vector3<f64>) {
        let tau = self.tau();
        let p = self.profile.eval(s);
        let r = 0.5 * tau.value() * p.sigma.exp();
        let (st, ct) = theta.sin_cos();
        let xs = Vector3::new(r * p.dsigma * ct, r * p.dsigma * st, 0.5 * tau.kappa_d(p.sigma));
        let xt = Vector3::new(-r * st, r * ct, 0.0);
        let rot = self.rotation();
        (rot * xs, rot * xt)
    }
}

/// Position and oriented unit normal of a positioned Delaunay surface.
pub fn surface_point(surface: &DelaunaySurface, s: f64, theta: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let (lo, hi) = surface.profile.window();
    let slack = 1e-12 * hi.abs();
    if !(s >= lo - slack && s <= hi + slack) {
        return Err(CmcError::OutOfWindow { s, lo, hi });
    }
    Ok(surface.point(s, theta))
}

/// One row of the period table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PeriodRow {
    pub tau: f64,
    pub sigma_star: f64,
    pub s_half: f64,
    pub t_phys: f64,
    pub dt_dtau: f64,
}

pub fn period_row(tau: DelaunayParameter, tol: f64, h: f64) -> Result<PeriodRow> {
    Ok(PeriodRow {
        tau: tau.value(),
        sigma_star: turning_point(tau),
        s_half: half_period(tau, tol)?,
        t_phys: physical_period(tau, tol)?,
        dt_dtau: period_derivative(tau, h)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau(v: f64) -> DelaunayParameter {
        DelaunayParameter::new(v).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(DelaunayParameter::new(0.0).is_err());
        assert!(DelaunayParameter::new(1.5).is_err());
        assert!(DelaunayParameter::new(f64::NAN).is_err());
        assert_eq!(tau(1.0).branch(), Branch::Cylinder);
        assert_eq!(tau(-0.3).branch(), Branch::Nodoid);
    }

    #[test]
    fn turning_points_closed_form() {
        assert_eq!(turning_point(tau(1.0)), 0.0);
        assert!((turning_point(tau(0.5)) - 2f64.acosh()).abs() < 1e-15);
        assert!((turning_point(tau(-0.5)) - 2f64.asinh()).abs() < 1e-15);
    }

    #[test]
    fn cylinder_profile_is_flat() {
        let p = solve_profile(tau(1.0), 1, 1e-10).unwrap();
        assert!(p.degenerate);
        assert!(p.sigma.iter().all(|&s| s == 0.0));
        assert_eq!(p.sigma_star, 0.0);
        assert!(half_period(tau(1.0), 1e-10).is_err());
    }

    #[test]
    fn eval_hits_nodes_and_extends_periodically() {
        let p = solve_profile(tau(0.5), 1, 1e-10).unwrap();
        let q = p.eval(p.s_grid[37]);
        assert_eq!(q.sigma, p.sigma[37]);
        let per = p.period();
        let a = p.eval(0.3);
        let b = p.eval(0.3 + 3.0 * per);
        assert!((a.sigma - b.sigma).abs() < 1e-12);
        assert!((b.kappa - a.kappa - 3.0 * p.kappa_period()).abs() < 1e-10);
        let c = p.eval(-0.3);
        assert!((c.sigma - a.sigma).abs() < 1e-12);
        assert!((c.dsigma + a.dsigma).abs() < 1e-12);
        assert!((c.kappa + a.kappa).abs() < 1e-12);
    }

    #[test]
    fn window_is_enforced() {
        let p = Arc::new(solve_profile(tau(0.5), 1, 1e-10).unwrap());
        let surf = DelaunaySurface::canonical(p.clone());
        assert!(surface_point(&surf, 2.5 * p.period(), 0.0).is_err());
        assert!(surface_point(&surf, -0.5 * p.period(), 0.0).is_ok());
    }

    #[test]
    fn antiparallel_axis_is_supported() {
        let p = Arc::new(solve_profile(tau(0.5), 1, 1e-10).unwrap());
        let up = DelaunaySurface::canonical(p.clone());
        let down = DelaunaySurface::new(p, -Vector3::z(), Vector3::zeros()).unwrap();
        let (x, _) = up.point(1.0, 0.4);
        let (y, _) = down.point(1.0, 0.4);
        assert!((x.z + y.z).abs() < 1e-14);
        assert!(((x.x * x.x + x.y * x.y) - (y.x * y.x + y.y * y.y)).abs() < 1e-14);
    }

    #[test]
    fn non_unit_axis_rejected() {
        let p = Arc::new(solve_profile(tau(0.5), 1, 1e-10).unwrap());
        assert!(DelaunaySurface::new(p, Vector3::new(0.0, 0.0, 1.1), Vector3::zeros()).is_err());
    }

    #[test]
    fn branch_crossing_h_rejected() {
        assert!(period_derivative(tau(0.05), 0.1).is_err());
        assert!(period_derivative(tau(0.99), 0.02).is_err());
    }
}
