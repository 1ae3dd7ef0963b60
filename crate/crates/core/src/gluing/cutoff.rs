//! Smooth step ξ on [−1, 1] and the cutoff functions built from it.

use serde::{Deserialize, Serialize};

/// ξ(s) = φ(1−s)/(φ(1−s) + φ(1+s)) with φ(t) = e^{−1/t} for t > 0.
/// Equal to 1 for s ≤ −1 and 0 for s ≥ 1, with ξ(−s) = 1 − ξ(s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile;

fn phi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

pub fn cutoff_xi() -> CutoffProfile {
    CutoffProfile
}

impl CutoffProfile {
    pub const TRANSITION: (f64, f64) = (-1.0, 1.0);

    pub fn eval(&self, s: f64) -> f64 {
        if s <= -1.0 {
            return 1.0;
        }
        if s >= 1.0 {
            return 0.0;
        }
        let (a, b) = (phi(1.0 - s), phi(1.0 + s));
        a / (a + b)
    }

    /// Smooth function equal to 0 at and beyond `zero_at` and to 1 at and
    /// beyond `one_at`, on the other side.
    pub fn ramp(&self, s: f64, zero_at: f64, one_at: f64) -> f64 {
        self.eval((2.0 * s - zero_at - one_at) / (zero_at - one_at))
    }

    /// χ̄ on a Y-neck: 1 towards the Type-2 core (s ≤ −1).
    pub fn chi_bar(&self, s: f64) -> f64 {
        self.eval(s)
    }

    /// χ on a neck, the complement of χ̄: ξ(−s).
    pub fn chi(&self, s: f64) -> f64 {
        self.eval(-s)
    }

    /// χ^e on a Y-neck of half-width `l`: 1 for s ≥ −l + 2, 0 for s ≤ −l + 1.
    pub fn chi_e_y(&self, s: f64, l: f64) -> f64 {
        self.ramp(s, -l + 1.0, -l + 2.0)
    }

    /// χ^e on a Z-neck of half-width `l`: 1 for s ≤ l − 2, 0 for s ≥ l − 1.
    pub fn chi_e_z(&self, s: f64, l: f64) -> f64 {
        self.ramp(s, l - 1.0, l - 2.0)
    }

    /// χ̄^e on a Y-neck measured from the Type-2 end, s_a = s + l:
    /// 1 for s_a ≤ l − 2, 0 for s_a ≥ l − 1.
    pub fn chi_bar_e_y(&self, s_a: f64, l: f64) -> f64 {
        self.ramp(s_a, l - 1.0, l - 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_and_midpoint() {
        let xi = cutoff_xi();
        assert_eq!(xi.eval(-2.0), 1.0);
        assert_eq!(xi.eval(2.0), 0.0);
        assert_eq!(xi.eval(0.0), 0.5);
        assert!((xi.eval(0.3) + xi.eval(-0.3) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn ramps_hit_their_plateaus() {
        let xi = cutoff_xi();
        let l = 10.0;
        assert_eq!(xi.chi_e_y(-l + 2.0, l), 1.0);
        assert_eq!(xi.chi_e_y(-l + 1.0, l), 0.0);
        assert_eq!(xi.chi_e_z(l - 2.0, l), 1.0);
        assert_eq!(xi.chi_e_z(l - 1.0, l), 0.0);
        assert_eq!(xi.chi_bar_e_y(l - 2.5, l), 1.0);
        assert_eq!(xi.chi_bar_e_y(l - 0.5, l), 0.0);
    }
}
