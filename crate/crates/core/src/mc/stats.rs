//! Statistical helpers shared by the experiments: Kolmogorov-Smirnov
//! critical values and statistics, empirical characteristic functions, and
//! random coefficient vectors that satisfy the partial-sum ratio condition
//! by construction.

use num_complex::Complex64;
use rand::Rng;

use crate::numeric::Accumulator;

/// Limiting tail probability of the scaled KS statistic:
/// 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2).
fn ks_tail(lambda: f64) -> f64 {
    let mut total = 0.0f64;
    let mut sign = 1.0f64;
    for k in 1..=200u32 {
        let term = 2.0 * (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        total += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    total
}

/// Smallest lambda whose limiting tail probability is at most `level`.
fn ks_lambda(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    let (mut lo, mut hi) = (0.05f64, 8.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ks_tail(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Asymptotic one-sample critical value at the given level.
pub fn ks_one_sample_critical(n: usize, level: f64) -> f64 {
    ks_lambda(level) / (n as f64).sqrt()
}

/// Asymptotic two-sample critical value at the given level.
pub fn ks_two_sample_critical(n: usize, m: usize, level: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_lambda(level) * ((n + m) / (n * m)).sqrt()
}

/// Two-sample KS statistic: the largest gap between the two empirical CDFs,
/// scanned over the pooled sample with ties advanced on both sides at once.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "samples must be nonempty");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => unreachable!("loop guard keeps one side nonempty"),
        };
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Mean of exp(i t x) over the sample. Compensated accumulation keeps the
/// heavy cancellation in near-symmetric samples accurate.
pub fn empirical_cf(sample: &[f64], t: f64) -> Complex64 {
    assert!(!sample.is_empty(), "empirical CF needs data");
    let mut re = Accumulator::new();
    let mut im = Accumulator::new();
    for x in sample {
        let (s, c) = (t * x).sin_cos();
        re.add(c);
        im.add(s);
    }
    let count = sample.len() as f64;
    Complex64::new(re.value() / count, im.value() / count)
}

/// A coefficient vector that passes validation by construction: its partial
/// sums follow a random lattice path from 0 to a positive total on the grid
/// of multiples of 1/256, where every containment comparison is exact. A
/// fair coin then flips the overall sign.
pub fn random_valid_coefficients<R: Rng + ?Sized>(rng: &mut R, max_order: usize) -> Vec<f64> {
    let q = rng.random_range(1..=max_order.max(1));
    let total = rng.random_range(1..=256i32);
    let mut lattice = Vec::with_capacity(q + 1);
    for _ in 0..q {
        lattice.push(rng.random_range(0..=total));
    }
    lattice.push(total);
    let flip = rng.random_bool(0.5);
    let mut phis = Vec::with_capacity(q + 1);
    let mut prev = 0i32;
    for k in lattice {
        let phi = f64::from(k - prev) / 256.0;
        phis.push(if flip { -phi } else { phi });
        prev = k;
    }
    phis
}
