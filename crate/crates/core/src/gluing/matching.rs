//! The matching condition sin(π/k)(d⁰ + d̄⁰ + 2nT_τ) = d¹ + mT_τ̄ and
//! its solution set over an interval of τ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::blocks::{alpha_k, solve_balancing, DFunctions};
use crate::delaunay::{physical_period_quadrature, DelaunayParameter, PERIOD_QUAD_TOL};
use crate::error::{invalid, CmcError, Result};

/// Samples used to test Λ + nΓ for monotonicity and to bracket roots.
pub const MONOTONE_SAMPLES: usize = 65;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingSolution {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub tau_bar: f64,
    /// sin(π/k)(d⁰ + d̄⁰ + 2nT_τ) − d¹ − mT_τ̄.
    pub residual: f64,
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return Err(invalid(format!("k = {k}: at least 3 is required")));
    }
    Ok(())
}

fn period(tau: f64) -> Result<f64> {
    physical_period_quadrature(DelaunayParameter::new(tau)?, PERIOD_QUAD_TOL)
}

/// δ_{n,τ} = d⁰ + d̄⁰ + 2nT_τ.
pub fn delta_offset(n: usize, tau: f64, d: &DFunctions) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    Ok(d.d0.eval(tau) + d.d0_bar.eval(tau) + 2.0 * n as f64 * period(tau)?)
}

/// (Λ(τ), Γ(τ)) with Λ = (sin(π/k)(d⁰ + d̄⁰) − d¹)/T_τ̄ and
/// Γ = 2 sin(π/k) T_τ/T_τ̄.
pub fn lambda_gamma(tau: f64, k: usize, d: &DFunctions) -> Result<(f64, f64)> {
    check_k(k)?;
    let tau_bar = solve_balancing(tau, alpha_k(k))?;
    let (t, tb) = (period(tau)?, period(tau_bar)?);
    let sk = (PI / k as f64).sin();
    let lam = (sk * (d.d0.eval(tau) + d.d0_bar.eval(tau)) - d.d1.eval(tau)) / tb;
    Ok((lam, 2.0 * sk * t / tb))
}

pub fn matching_residual(n: usize, m: usize, tau: f64, k: usize, d: &DFunctions) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be at least 1"));
    }
    check_k(k)?;
    let tau_bar = solve_balancing(tau, alpha_k(k))?;
    let sk = (PI / k as f64).sin();
    Ok(sk * delta_offset(n, tau, d)? - d.d1.eval(tau) - m as f64 * period(tau_bar)?)
}

/// Λ(τ) + nΓ(τ).
pub fn matching_function(tau: f64, n: usize, k: usize, d: &DFunctions) -> Result<f64> {
    let (l, g) = lambda_gamma(tau, k, d)?;
    Ok(l + n as f64 * g)
}

/// Checks that the interval lies in one branch and that τ̄ stays valid.
pub fn check_interval(k: usize, lo: f64, hi: f64) -> Result<()> {
    check_k(k)?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("interval [{lo}, {hi}] is empty")));
    }
    if lo.signum() != hi.signum() || lo == 0.0 || hi == 0.0 {
        return Err(invalid(format!("interval [{lo}, {hi}] straddles τ = 0")));
    }
    if hi >= 1.0 {
        return Err(invalid("the interval must stay below τ = 1"));
    }
    for t in [lo, hi] {
        let tb = solve_balancing(t, alpha_k(k))?;
        DelaunayParameter::new(tb)?;
        if tb == 1.0 {
            return Err(invalid("τ̄ reaches the cylinder"));
        }
    }
    Ok(())
}

/// Samples Λ + nΓ on the interval; returns the samples and whether they
/// are strictly monotone.
pub fn sample_matching_function(
    n: usize,
    k: usize,
    lo: f64,
    hi: f64,
    d: &DFunctions,
    samples: usize,
) -> Result<(Vec<(f64, f64)>, bool)> {
    check_interval(k, lo, hi)?;
    let samples = samples.max(2);
    let pts = (0..samples)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            Ok((t, matching_function(t, n, k, d)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let inc = pts.windows(2).all(|w| w[1].1 > w[0].1);
    let dec = pts.windows(2).all(|w| w[1].1 < w[0].1);
    Ok((pts, inc || dec))
}

fn bisect_level(
    f: &dyn Fn(f64) -> Result<f64>,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    level: f64,
    tol: f64,
) -> Result<f64> {
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        let fc = f(c)? - level;
        if fc.abs() <= tol || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs() {
            return Ok(c);
        }
        if (fc > 0.0) == (fa > 0.0) {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    Err(CmcError::Integration("matching bisection did not converge".into()))
}

/// All τ in [lo, hi] with Λ(τ) + nΓ(τ) = m for some integer m ≥ 1, one
/// per m when Λ + nΓ is monotone. Otherwise every sign change of
/// Λ + nΓ − m between samples is bisected.
pub fn solve_matching(n: usize, k: usize, lo: f64, hi: f64, d: &DFunctions, tol: f64) -> Result<Vec<MatchingSolution>> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let (pts, monotone) = sample_matching_function(n, k, lo, hi, d, MONOTONE_SAMPLES)?;
    let f = |t: f64| matching_function(t, n, k, d);
    let alpha = alpha_k(k);
    let mut roots: Vec<(usize, f64)> = Vec::new();
    let brackets: Vec<(f64, f64, f64, f64)> = if monotone {
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        vec![(a.0, a.1, b.0, b.1)]
    } else {
        pts.windows(2).map(|w| (w[0].0, w[0].1, w[1].0, w[1].1)).collect()
    };
    for (a, fa, b, fb) in brackets {
        let (fmin, fmax) = (fa.min(fb), fa.max(fb));
        let m_lo = fmin.ceil().max(1.0) as usize;
        let m_hi = fmax.floor();
        if m_hi < 1.0 {
            continue;
        }
        for m in m_lo..=m_hi as usize {
            let level = m as f64;
            let tau = if (fa - level).abs() <= tol {
                a
            } else if (fb - level).abs() <= tol {
                b
            } else {
                bisect_level(&f, a, fa - level, b, level, tol)?
            };
            if !roots.iter().any(|&(mm, t)| mm == m && (t - tau).abs() < 1e-12) {
                roots.push((m, tau));
            }
        }
    }
    roots.sort_by(|x, y| x.1.total_cmp(&y.1));
    roots
        .into_iter()
        .map(|(m, tau)| {
            Ok(MatchingSolution {
                k,
                n,
                m,
                tau,
                tau_bar: solve_balancing(tau, alpha)?,
                residual: matching_residual(n, m, tau, k, d)?,
            })
        })
        .collect()
}

/// Smallest n such that every n′ from n up to the first n with a
/// guaranteed solution (image of Λ + nΓ at least one unit wide) has a
/// solution. Returns (n_min, n_guaranteed).
pub fn empirical_n_min(k: usize, lo: f64, hi: f64, d: &DFunctions, tol: f64) -> Result<(usize, usize)> {
    check_interval(k, lo, hi)?;
    let (l0, g0) = lambda_gamma(lo, k, d)?;
    let (l1, g1) = lambda_gamma(hi, k, d)?;
    let dg = (g1 - g0).abs();
    if dg < 1e-12 {
        return Err(CmcError::Degenerate("Γ is constant on the interval".into()));
    }
    let mut guaranteed = 1usize;
    while ((l1 - l0) + guaranteed as f64 * (g1 - g0)).abs() < 1.0 {
        guaranteed += 1;
        if guaranteed > 1_000_000 {
            return Err(CmcError::Degenerate("no guaranteed n below 10⁶".into()));
        }
    }
    let mut n_min = guaranteed;
    while n_min > 1 && !solve_matching(n_min - 1, k, lo, hi, d, tol)?.is_empty() {
        n_min -= 1;
    }
    Ok((n_min, guaranteed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_is_linear_in_m() {
        let d = DFunctions::default();
        let r1 = matching_residual(5, 3, 0.4, 3, &d).unwrap();
        let r2 = matching_residual(5, 4, 0.4, 3, &d).unwrap();
        let tb = solve_balancing(0.4, alpha_k(3)).unwrap();
        assert!((r1 - r2 - period(tb).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn interval_must_stay_in_a_branch() {
        assert!(check_interval(3, -0.2, 0.3).is_err());
        assert!(check_interval(3, 0.5, 0.2).is_err());
        assert!(check_interval(2, 0.2, 0.8).is_err());
        assert!(check_interval(3, 0.2, 0.8).is_ok());
    }
}
