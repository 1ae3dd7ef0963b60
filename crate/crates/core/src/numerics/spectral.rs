//! Fourier differentiation matrices on an even number of equispaced
//! nodes of the circle [0, 2π).

use std::ops::{Add, Mul};

#[derive(Clone, Debug)]
pub struct PeriodicDiff {
    n: usize,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl PeriodicDiff {
    /// Panics if `n` is odd or smaller than 4.
    pub fn new(n: usize) -> Self {
        assert!(n >= 4 && n % 2 == 0, "spectral grid needs an even n >= 4");
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut d1 = vec![0.0; n * n];
        let mut d2 = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                let idx = j * n + k;
                if j == k {
                    d2[idx] = -std::f64::consts::PI.powi(2) / (3.0 * h * h) - 1.0 / 6.0;
                    continue;
                }
                let diff = j as isize - k as isize;
                let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let half = diff as f64 * h / 2.0;
                d1[idx] = 0.5 * sign / half.tan();
                d2[idx] = -sign / (2.0 * half.sin().powi(2));
            }
        }
        Self { n, d1, d2 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n as f64
    }

    /// First derivative of one periodic row.
    pub fn d1<T>(&self, row: &[T], out: &mut [T])
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        apply(&self.d1, self.n, row, out)
    }

    /// Second derivative of one periodic row.
    pub fn d2<T>(&self, row: &[T], out: &mut [T])
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        apply(&self.d2, self.n, row, out)
    }
}

fn apply<T>(m: &[f64], n: usize, row: &[T], out: &mut [T])
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    for j in 0..n {
        let r = &m[j * n..(j + 1) * n];
        let mut acc = row[0] * r[0];
        for k in 1..n {
            acc = acc + row[k] * r[k];
        }
        out[j] = acc;
    }
}
