//! Dormand–Prince 5(4) integrator with an embedded error estimate.

use crate::error::{CmcError, Result};

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h0: 1e-3,
            max_steps: 5_000_000,
        }
    }
}

/// Adaptive integrator that keeps its step size between calls, so a
/// trajectory can be advanced node by node along an output grid.
#[derive(Clone, Debug)]
pub struct Dp5<const N: usize> {
    opts: OdeOptions,
    h: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl<const N: usize> Dp5<N> {
    pub fn new(opts: OdeOptions) -> Self {
        Self {
            opts,
            h: opts.h0,
            steps: 0,
            rejected: 0,
        }
    }

    /// Advances `y0` from `t0` to exactly `t1`.
    pub fn integrate<F>(&mut self, f: &mut F, t0: f64, y0: [f64; N], t1: f64) -> Result<[f64; N]>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(y0);
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut taken = 0usize;
        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 0.0 {
                break;
            }
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h } * dir;

            let mut tmp = [0.0; N];
            for i in 0..N {
                tmp[i] = y[i] + h * A2[0] * k1[i];
            }
            let k2 = f(t + C[0] * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A3[0] * k1[i] + A3[1] * k2[i]);
            }
            let k3 = f(t + C[1] * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A4[0] * k1[i] + A4[1] * k2[i] + A4[2] * k3[i]);
            }
            let k4 = f(t + C[2] * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i]
                    + h * (A5[0] * k1[i] + A5[1] * k2[i] + A5[2] * k3[i] + A5[3] * k4[i]);
            }
            let k5 = f(t + C[3] * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i]
                    + h * (A6[0] * k1[i]
                        + A6[1] * k2[i]
                        + A6[2] * k3[i]
                        + A6[3] * k4[i]
                        + A6[4] * k5[i]);
            }
            let k6 = f(t + C[4] * h, &tmp);
            let mut ynew = [0.0; N];
            for i in 0..N {
                ynew[i] = y[i]
                    + h * (B[0] * k1[i]
                        + B[2] * k3[i]
                        + B[3] * k4[i]
                        + B[4] * k5[i]
                        + B[5] * k6[i]);
            }
            let t_new = if clipped { t1 } else { t + h };
            let k7 = f(t_new, &ynew);

            let mut err: f64 = 0.0;
            for i in 0..N {
                let e = h
                    * (E[0] * k1[i]
                        + E[2] * k3[i]
                        + E[3] * k4[i]
                        + E[4] * k5[i]
                        + E[5] * k6[i]
                        + E[6] * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(ynew[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(CmcError::Integration(format!(
                    "non-finite state near t = {t}"
                )));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = t_new;
                y = ynew;
                k1 = k7;
                self.steps += 1;
                if !clipped || factor < 1.0 {
                    self.h = h.abs() * factor;
                }
            } else {
                self.rejected += 1;
                self.h = h.abs() * factor;
            }
            taken += 1;
            if taken > self.opts.max_steps {
                return Err(CmcError::Integration(format!(
                    "step budget exhausted between {t0} and {t1}"
                )));
            }
            if self.h < 1e-14 * (1.0 + t.abs()) {
                return Err(CmcError::Integration(format!("step size underflow at t = {t}")));
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        let mut ode = Dp5::<2>::new(OdeOptions::with_tol(1e-12));
        let mut f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let y = ode
            .integrate(&mut f, 0.0, [1.0, 0.0], 2.0 * std::f64::consts::PI)
            .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
        assert!(y[1].abs() < 1e-10);
    }

    #[test]
    fn integrates_backwards() {
        let mut ode = Dp5::<1>::new(OdeOptions::with_tol(1e-12));
        let mut f = |_t: f64, y: &[f64; 1]| [y[0]];
        let y = ode.integrate(&mut f, 1.0, [1.0], 0.0).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-11);
    }
}
