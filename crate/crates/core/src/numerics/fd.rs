//! Finite differences along the first (s) index of row-major lattice data
//! `f[i * stride + j]`, with one-sided closures at both ends.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn min_nodes(self) -> usize {
        match self {
            FdOrder::Second => 4,
            FdOrder::Fourth => 6,
        }
    }
}

fn comb<T>(f: &[T], idx: impl Iterator<Item = usize>, w: &[f64], scale: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut it = idx.zip(w.iter());
    let (i0, w0) = it.next().unwrap();
    let mut acc = f[i0] * (w0 * scale);
    for (i, wi) in it {
        acc = acc + f[i] * (wi * scale);
    }
    acc
}

/// Returns (∂_s f, ∂_s² f) for lattice data with `ns` rows of length `stride`.
pub fn diff_s<T>(f: &[T], ns: usize, stride: usize, h: f64, order: FdOrder) -> (Vec<T>, Vec<T>)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    assert!(ns >= order.min_nodes(), "too few s-nodes for the stencil");
    let mut d1 = Vec::with_capacity(f.len());
    let mut d2 = Vec::with_capacity(f.len());
    let h1 = 1.0 / h;
    let h2 = 1.0 / (h * h);
    for i in 0..ns {
        for j in 0..stride {
            let at = |k: isize| (i as isize + k) as usize * stride + j;
            let (a, b) = match order {
                FdOrder::Second => second(f, i, ns, &at, h1, h2),
                FdOrder::Fourth => fourth(f, i, ns, &at, h1, h2),
            };
            d1.push(a);
            d2.push(b);
        }
    }
    (d1, d2)
}

fn second<T, G>(f: &[T], i: usize, ns: usize, at: &G, h1: f64, h2: f64) -> (T, T)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    G: Fn(isize) -> usize,
{
    if i == 0 {
        (
            comb(f, (0..3).map(at), &[-1.5, 2.0, -0.5], h1),
            comb(f, (0..4).map(at), &[2.0, -5.0, 4.0, -1.0], h2),
        )
    } else if i == ns - 1 {
        (
            comb(f, (0..3).map(|k| at(-k)), &[1.5, -2.0, 0.5], h1),
            comb(f, (0..4).map(|k| at(-k)), &[2.0, -5.0, 4.0, -1.0], h2),
        )
    } else {
        (
            comb(f, [at(-1), at(1)].into_iter(), &[-0.5, 0.5], h1),
            comb(f, (-1..2).map(at), &[1.0, -2.0, 1.0], h2),
        )
    }
}

const B0_D1: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const B1_D1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const B0_D2: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const B1_D2: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

fn fourth<T, G>(f: &[T], i: usize, ns: usize, at: &G, h1: f64, h2: f64) -> (T, T)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    G: Fn(isize) -> usize,
{
    let h1 = h1 / 12.0;
    let h2 = h2 / 12.0;
    let neg = |w: &[f64]| w.iter().map(|x| -x).collect::<Vec<_>>();
    match i {
        0 => (
            comb(f, (0..5).map(at), &B0_D1, h1),
            comb(f, (0..6).map(at), &B0_D2, h2),
        ),
        1 => (
            comb(f, (-1..4).map(at), &B1_D1, h1),
            comb(f, (-1..5).map(at), &B1_D2, h2),
        ),
        _ if i == ns - 1 => (
            comb(f, (0..5).map(|k| at(-k)), &neg(&B0_D1), h1),
            comb(f, (0..6).map(|k| at(-k)), &B0_D2, h2),
        ),
        _ if i == ns - 2 => (
            comb(f, (-1..4).map(|k| at(-k)), &neg(&B1_D1), h1),
            comb(f, (-1..5).map(|k| at(-k)), &B1_D2, h2),
        ),
        _ => (
            comb(f, [-2, -1, 1, 2].into_iter().map(at), &[1.0, -8.0, 8.0, -1.0], h1),
            comb(f, (-2..3).map(at), &[-1.0, 16.0, -30.0, 16.0, -1.0], h2),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(order: FdOrder, h: f64) -> (f64, f64) {
        let ns = (1.0 / h).round() as usize + 1;
        let f: Vec<f64> = (0..ns).map(|i| (i as f64 * h).sin()).collect();
        let (d1, d2) = diff_s(&f, ns, 1, h, order);
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for i in 0..ns {
            let x = i as f64 * h;
            e1 = e1.max((d1[i] - x.cos()).abs());
            e2 = e2.max((d2[i] + x.sin()).abs());
        }
        (e1, e2)
    }

    #[test]
    fn orders_are_observed_including_boundaries() {
        for (order, p) in [(FdOrder::Second, 2.0), (FdOrder::Fourth, 4.0)] {
            let (a1, a2) = max_err(order, 0.02);
            let (b1, b2) = max_err(order, 0.01);
            assert!((a1 / b1).log2() > p - 0.3, "{order:?} d1");
            assert!((a2 / b2).log2() > p - 1.3, "{order:?} d2");
        }
    }
}
