/// Quintic Hermite interpolation on one cell of width `h` from values,
/// first and second derivatives at both ends; `t ∈ [0, 1]`.
#[allow(clippy::too_many_arguments)]
pub fn quintic_hermite(
    h: f64,
    f0: f64,
    d0: f64,
    dd0: f64,
    f1: f64,
    d1: f64,
    dd1: f64,
    t: f64,
) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 0.5 * t3 - t4 + 0.5 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    f0 * h0 + h * d0 * h1 + h * h * dd0 * h2 + h * h * dd1 * h3 + h * d1 * h4 + f1 * h5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quintics() {
        let p = |x: f64| x.powi(5) - 2.0 * x.powi(3) + x;
        let dp = |x: f64| 5.0 * x.powi(4) - 6.0 * x * x + 1.0;
        let ddp = |x: f64| 20.0 * x.powi(3) - 12.0 * x;
        let (a, b) = (0.3, 0.8);
        let h = b - a;
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let v = quintic_hermite(h, p(a), dp(a), ddp(a), p(b), dp(b), ddp(b), t);
            assert!((v - p(a + t * h)).abs() < 1e-14);
        }
    }
}
