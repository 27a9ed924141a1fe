//! Moving-average models driven by heavy-tailed noise: coefficient
//! validation with exact partial-sum ratio checks, truncation of infinite
//! coefficient families, series generation, the coupled pair of scaled
//! partial-sum paths, boundary decompositions of the difference between the
//! aggregated-noise path and the series path, and the residual left by
//! truncating the infinite past.

use std::io::BufRead;

use thiserror::Error;

use crate::cadlag::{partial_sum_path, StepFunction};
use crate::noise::TailModel;
use crate::numeric::{Accumulator, PrefixSums};

#[derive(Debug, Error, PartialEq)]
pub enum MaError {
    #[error("coefficient vector must be nonempty")]
    Empty,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("coefficient total must be nonzero")]
    ZeroTotal,
    #[error("partial-sum ratio at s = {s} is {ratio}, outside [0, 1]")]
    RatioOutOfRange { s: usize, ratio: f64 },
    #[error("decomposition requires order q >= 1")]
    OrderZero,
    #[error("k = {k} invalid for {case:?} with n = {n}, q = {q}")]
    KOutOfRange { k: usize, n: usize, q: usize, case: DecompositionCase },
    #[error("truncation order must be >= 1")]
    BadTruncationOrder,
    #[error("coefficient tail is not summable: block partial sums stay above the 1e-12 Cauchy threshold")]
    TailNotSummable,
    #[error("geometric ratio must lie in (0, 1), got {0}")]
    BadGeometricRatio(f64),
    #[error("polynomial decay needs finite nonzero scale and exponent > 1, got scale {scale}, exponent {exponent}")]
    BadPolynomialDecay { scale: f64, exponent: f64 },
    #[error("decay index delta = {0} incompatible: need 0 < delta < 1, delta * exponent > 1 for polynomial decay, and delta < alpha when alpha <= 1")]
    BadDelta(f64),
    #[error("past window must be >= 1")]
    BadWindow,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Finite coefficient vector phi_0..phi_q, sign-normalized so the total is
/// positive. Construction enforces that every partial-sum ratio
/// (phi_0 + .. + phi_s) / total lies in [0, 1], compared exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    phis: Vec<f64>,
    phi_total: f64,
    theta: f64,
    noise_flipped: bool,
}

impl Coefficients {
    pub fn new(raw: Vec<f64>) -> Result<Self, MaError> {
        if raw.is_empty() {
            return Err(MaError::Empty);
        }
        if raw.iter().any(|p| !p.is_finite()) {
            return Err(MaError::NonFinite);
        }
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            return Err(MaError::ZeroTotal);
        }
        // A negative total is reduced to the positive case by negating the
        // coefficients and flagging that the noise must be sign-flipped; the
        // partial-sum ratios are unchanged by the joint negation.
        let (phis, noise_flipped) = if total < 0.0 {
            (raw.iter().map(|p| -p).collect::<Vec<_>>(), true)
        } else {
            (raw, false)
        };
        validate_coefficients(&phis)?;
        let phi_total: f64 = phis.iter().sum();
        let theta: f64 = phis.iter().map(|p| p.abs()).sum();
        Ok(Coefficients { phis, phi_total, theta, noise_flipped })
    }

    /// The order q (index of the last coefficient).
    pub fn order(&self) -> usize {
        self.phis.len() - 1
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn phi_total(&self) -> f64 {
        self.phi_total
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn noise_flipped(&self) -> bool {
        self.noise_flipped
    }
}

/// Checks the partial-sum ratio condition: 0 <= (phi_0+..+phi_s)/total <= 1
/// for every s, with exact float comparisons (equivalently 0 <= partial <=
/// total for positive totals, mirrored for negative ones).
pub fn validate_coefficients(phis: &[f64]) -> Result<(), MaError> {
    if phis.is_empty() {
        return Err(MaError::Empty);
    }
    if phis.iter().any(|p| !p.is_finite()) {
        return Err(MaError::NonFinite);
    }
    let total: f64 = phis.iter().sum();
    if total == 0.0 {
        return Err(MaError::ZeroTotal);
    }
    let mut partial = 0.0f64;
    for (s, p) in phis.iter().enumerate() {
        partial += p;
        let inside = if total > 0.0 { (0.0..=total).contains(&partial) } else { (total..=0.0).contains(&partial) };
        if !inside {
            return Err(MaError::RatioOutOfRange { s, ratio: partial / total });
        }
    }
    Ok(())
}

/// Infinite coefficient family with summable delta-th absolute powers.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFamily {
    /// phi_j = (1 - rho) * rho^j; totals to 1.
    Geometric { rho: f64 },
    /// phi_j = scale * (j + 1)^(-exponent).
    Polynomial { scale: f64, exponent: f64 },
    /// A finite vector embedded as an infinite sequence (zeros beyond it).
    Finite(Vec<f64>),
}

impl CoefficientFamily {
    fn phi(&self, j: usize) -> f64 {
        match self {
            CoefficientFamily::Geometric { rho } => (1.0 - rho) * rho.powi(j as i32),
            CoefficientFamily::Polynomial { scale, exponent } => scale * ((j + 1) as f64).powf(-exponent),
            CoefficientFamily::Finite(phis) => phis.get(j).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteCoefficients {
    family: CoefficientFamily,
    delta: f64,
}

impl InfiniteCoefficients {
    pub fn new(family: CoefficientFamily, delta: f64) -> Result<Self, MaError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(MaError::BadDelta(delta));
        }
        match &family {
            CoefficientFamily::Geometric { rho } => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(MaError::BadGeometricRatio(*rho));
                }
            }
            CoefficientFamily::Polynomial { scale, exponent } => {
                if !scale.is_finite() || *scale == 0.0 || !(*exponent > 1.0) {
                    return Err(MaError::BadPolynomialDecay { scale: *scale, exponent: *exponent });
                }
                // summability of the delta-th absolute powers
                if delta * exponent <= 1.0 {
                    return Err(MaError::BadDelta(delta));
                }
            }
            CoefficientFamily::Finite(phis) => {
                if phis.iter().any(|p| !p.is_finite()) {
                    return Err(MaError::NonFinite);
                }
            }
        }
        Ok(InfiniteCoefficients { family, delta })
    }

    pub fn phi(&self, j: usize) -> f64 {
        self.family.phi(j)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The decay index must also sit below alpha when alpha <= 1.
    pub fn compatible_with(&self, model: &TailModel) -> Result<(), MaError> {
        if model.alpha() <= 1.0 && self.delta >= model.alpha() {
            return Err(MaError::BadDelta(self.delta));
        }
        Ok(())
    }
}

const TAIL_BLOCK: usize = 1024;
const TAIL_TERM_CAP: usize = 1 << 23;

/// Sums f(start), f(start+1), .. by blocks until a block moves the partial
/// sum by at most 1e-14. Rejects if no block increment ever falls to 1e-12
/// within the term cap.
fn block_tail_sum(f: impl Fn(usize) -> f64, start: usize) -> Result<f64, MaError> {
    let mut acc = Accumulator::new();
    let mut j = start;
    let mut best_increment = f64::INFINITY;
    while j < start + TAIL_TERM_CAP {
        let before = acc.value();
        for _ in 0..TAIL_BLOCK {
            acc.add(f(j));
            j += 1;
        }
        let increment = (acc.value() - before).abs();
        best_increment = best_increment.min(increment);
        if increment <= 1e-14 {
            return Ok(acc.value());
        }
    }
    if best_increment <= 1e-12 {
        Ok(acc.value())
    } else {
        Err(MaError::TailNotSummable)
    }
}

/// Truncates an infinite family at order q: keeps phi_0..phi_{q-1} and lumps
/// the whole tail sum into the final slot, preserving the total.
pub fn truncate_infinite(coeffs: &InfiniteCoefficients, q: usize) -> Result<Coefficients, MaError> {
    if q < 1 {
        return Err(MaError::BadTruncationOrder);
    }
    let mut phis: Vec<f64> = (0..q).map(|j| coeffs.phi(j)).collect();
    phis.push(block_tail_sum(|j| coeffs.phi(j), q)?);
    Coefficients::new(phis)
}

fn noise_values(model: &TailModel, seed: u64, flip: bool, lo: i64, hi: i64) -> ZSeries {
    let sign = if flip { -1.0 } else { 1.0 };
    let vals = (lo..=hi).map(|i| sign * model.sample_at(seed, i)).collect();
    ZSeries { start: lo, vals }
}

/// Noise values over a contiguous index range; index math stays in one place.
#[derive(Debug, Clone)]
struct ZSeries {
    start: i64,
    vals: Vec<f64>,
}

impl ZSeries {
    fn get(&self, i: i64) -> f64 {
        self.vals[usize::try_from(i - self.start).expect("index inside the fetched range")]
    }
}

/// X_t for t = 1..=count from noise covering indices 1-q ..= count.
fn series_core(zs: &ZSeries, phis: &[f64], count: usize) -> Vec<f64> {
    (1..=count as i64)
        .map(|t| {
            let mut x = 0.0f64;
            for (j, p) in phis.iter().enumerate() {
                x += p * zs.get(t - j as i64);
            }
            x
        })
        .collect()
}

/// The moving-average series X_1..X_n.
pub fn ma_series(model: &TailModel, coeffs: &Coefficients, n: usize, seed: u64) -> Vec<f64> {
    assert!(n >= 1, "series needs at least one term");
    let q = coeffs.order() as i64;
    let zs = noise_values(model, seed, coeffs.noise_flipped(), 1 - q, n as i64);
    series_core(&zs, coeffs.phis(), n)
}

/// Series extended q steps past n, together with the noise that produced it.
#[derive(Debug, Clone)]
pub struct SeriesWithNoise {
    /// X_1 ..= X_{n+q}
    pub xs: Vec<f64>,
    /// Z_{1-q} ..= Z_{n+q}, already sign-flipped when the reduction applies
    pub zs: Vec<f64>,
    /// absolute index of zs[0]
    pub z_start: i64,
}

pub fn ma_series_extended(model: &TailModel, coeffs: &Coefficients, n: usize, seed: u64) -> SeriesWithNoise {
    assert!(n >= 1, "series needs at least one term");
    let q = coeffs.order() as i64;
    let zs = noise_values(model, seed, coeffs.noise_flipped(), 1 - q, n as i64 + q);
    let xs = series_core(&zs, coeffs.phis(), n + coeffs.order());
    SeriesWithNoise { xs, z_start: zs.start, zs: zs.vals }
}

/// The coupled pair of scaled partial-sum paths on one noise realization:
/// the series path over X_1..X_n and the aggregated-noise path over
/// total*Z_1..total*Z_n, both normed by a_n and centered identically (drift
/// total * mean(Z) when alpha > 1, zero otherwise).
pub fn build_paths(model: &TailModel, coeffs: &Coefficients, n: usize, seed: u64) -> (StepFunction, StepFunction) {
    assert!(n >= 1, "paths need at least one increment");
    let q = coeffs.order() as i64;
    let zs = noise_values(model, seed, coeffs.noise_flipped(), 1 - q, n as i64);
    let xs = series_core(&zs, coeffs.phis(), n);
    let a_n = model.norming_constant(n as u64);
    let drift = model.centering_constant(coeffs.phi_total());
    let phi = coeffs.phi_total();
    let ys: Vec<f64> = (1..=n as i64).map(|i| phi * zs.get(i)).collect();
    let vn = partial_sum_path(&xs, a_n, drift).expect("n >= 1 and a_n > 0");
    let vnz = partial_sum_path(&ys, a_n, drift).expect("n >= 1 and a_n > 0");
    (vn, vnz)
}

/// Which boundary decomposition of the coupling difference applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionCase {
    /// 1 <= k < q: both sums cut inside the filter's warm-up.
    ShortPrefix,
    /// q <= k <= n: both sums run to the same index k.
    Aligned,
    /// q <= k <= n-q: the series sum runs q steps further, to k+q.
    Shifted,
}

/// Both sides of the decomposition identity, with the named boundary terms
/// where the case defines them. All entries are normed by a_n.
#[derive(Debug, Clone)]
pub struct CouplingDecomposition {
    pub case: DecompositionCase,
    /// Direct evaluation: sum total*Z_i - sum X_i (upper limit per case).
    pub lhs: f64,
    /// The closed-form boundary expression; contract |lhs-rhs| <= 1e-10 (1+|lhs|).
    pub rhs: f64,
    /// Tail-weighted noise at the recent edge k-q+1..k (Aligned only).
    pub recent_edge: Option<f64>,
    /// Tail-weighted noise before the sample start, indices 1-q..0.
    pub past_edge: Option<f64>,
    /// Head-weighted noise just past k (Shifted only).
    pub forward_edge: Option<f64>,
}

fn decomposition_core(
    zs: &ZSeries,
    phis: &[f64],
    a_n: f64,
    n: usize,
    k: usize,
    case: DecompositionCase,
) -> Result<CouplingDecomposition, MaError> {
    let q = phis.len() - 1;
    if q == 0 {
        return Err(MaError::OrderZero);
    }
    let valid = match case {
        DecompositionCase::ShortPrefix => k >= 1 && k < q && k <= n,
        DecompositionCase::Aligned => k >= q && k <= n,
        DecompositionCase::Shifted => k >= q && k + q <= n,
    };
    if !valid {
        return Err(MaError::KOutOfRange { k, n, q, case });
    }

    // Partial sums of the coefficients as compensated two-term values, so
    // the total used on the left and the tail/head windows used on the
    // right are the same rational quantities up to O(eps^2).
    let prefix = PrefixSums::new(phis.iter().copied());
    let add_weighted = |acc: &mut Accumulator, z: f64, parts: (f64, f64)| {
        acc.add_product(z, parts.0);
        acc.add_product(z, parts.1);
    };

    let x_upper = match case {
        DecompositionCase::Shifted => k + q,
        _ => k,
    };
    let total_parts = prefix.range_parts(0, q);
    let mut lhs_acc = Accumulator::new();
    for i in 1..=k as i64 {
        add_weighted(&mut lhs_acc, zs.get(i), total_parts);
    }
    for i in 1..=x_upper as i64 {
        for (j, p) in phis.iter().enumerate() {
            lhs_acc.add_product(-p, zs.get(i - j as i64));
        }
    }
    let lhs = lhs_acc.value() / a_n;

    let mut rhs_acc = Accumulator::new();
    let mut recent_edge = None;
    let mut past_edge = None;
    let mut forward_edge = None;
    match case {
        DecompositionCase::ShortPrefix => {
            for u in 0..k {
                add_weighted(&mut rhs_acc, zs.get((k - u) as i64), prefix.range_parts(u + 1, q));
            }
            for u in (q - k)..q {
                add_weighted(&mut rhs_acc, -zs.get(-(u as i64)), prefix.range_parts(u + 1, q));
            }
            for u in 0..(q - k) {
                add_weighted(&mut rhs_acc, -zs.get(-(u as i64)), prefix.range_parts(u + 1, u + k));
            }
        }
        DecompositionCase::Aligned => {
            let mut recent = Accumulator::new();
            let mut past = Accumulator::new();
            for u in 0..q {
                let parts = prefix.range_parts(u + 1, q);
                add_weighted(&mut rhs_acc, zs.get((k - u) as i64), parts);
                add_weighted(&mut recent, zs.get((k - u) as i64), parts);
                add_weighted(&mut rhs_acc, -zs.get(-(u as i64)), parts);
                add_weighted(&mut past, zs.get(-(u as i64)), parts);
            }
            recent_edge = Some(recent.value() / a_n);
            past_edge = Some(past.value() / a_n);
        }
        DecompositionCase::Shifted => {
            let mut past = Accumulator::new();
            let mut forward = Accumulator::new();
            for u in 0..q {
                let parts = prefix.range_parts(u + 1, q);
                add_weighted(&mut rhs_acc, -zs.get(-(u as i64)), parts);
                add_weighted(&mut past, zs.get(-(u as i64)), parts);
            }
            for u in 1..=q {
                let parts = prefix.range_parts(0, q - u);
                add_weighted(&mut rhs_acc, -zs.get((k + u) as i64), parts);
                add_weighted(&mut forward, zs.get((k + u) as i64), parts);
            }
            past_edge = Some(past.value() / a_n);
            forward_edge = Some(forward.value() / a_n);
        }
    }
    let rhs = rhs_acc.value() / a_n;

    Ok(CouplingDecomposition { case, lhs, rhs, recent_edge, past_edge, forward_edge })
}

/// Evaluates both sides of the boundary decomposition of the coupling
/// difference on a fresh noise realization.
pub fn coupling_decomposition(
    model: &TailModel,
    coeffs: &Coefficients,
    n: usize,
    k: usize,
    case: DecompositionCase,
    seed: u64,
) -> Result<CouplingDecomposition, MaError> {
    let q = coeffs.order() as i64;
    if q == 0 {
        return Err(MaError::OrderZero);
    }
    let hi = (k + coeffs.order()).max(1) as i64;
    let zs = noise_values(model, seed, coeffs.noise_flipped(), 1 - q, hi);
    decomposition_core(&zs, coeffs.phis(), model.norming_constant(n as u64), n, k, case)
}

/// Residual of truncating the model at order q, with the infinite past cut
/// at `past_window`: the scaled tail-coefficient mass carried by in-sample
/// noise plus the window of pre-sample noise weighted by its in-sample
/// coefficient reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationResidual {
    pub value: f64,
    /// Expected size of the discarded pre-window terms: the coefficient mass
    /// beyond q + past_window times n/a_n times a noise-magnitude surrogate
    /// (the mean when alpha > 1, the median otherwise).
    pub omitted_past_bound: f64,
}

pub fn truncation_residual(
    model: &TailModel,
    coeffs: &InfiniteCoefficients,
    n: usize,
    q: usize,
    past_window: usize,
    seed: u64,
) -> Result<TruncationResidual, MaError> {
    if q < 1 {
        return Err(MaError::BadTruncationOrder);
    }
    if past_window < 1 {
        return Err(MaError::BadWindow);
    }
    assert!(n >= 1, "residual needs at least one sample index");
    let w = past_window as i64;
    let qi = q as i64;
    let a_n = model.norming_constant(n as u64);

    let zs = noise_values(model, seed, false, -w - qi, n as i64 - qi);
    let tail_abs = block_tail_sum(|j| coeffs.phi(j).abs(), q + 1)?;

    let mut in_sample = Accumulator::new();
    for i in 1..=n as i64 {
        in_sample.add(zs.get(i - qi).abs());
    }
    let term_tail = 2.0 * tail_abs * in_sample.value() / a_n;

    // |phi_j| prefix sums reach index q + past_window + n
    let abs_prefix = PrefixSums::new((0..=q + past_window + n).map(|j| coeffs.phi(j).abs()));
    let mut past = Accumulator::new();
    // descending i keeps enlargements of the window exact prefix extensions,
    // so growing past_window can never decrease the result
    for i in (-w..=0).rev() {
        let lo = (qi - i + 1) as usize;
        let hi = (qi - i) as usize + n;
        past.add_product(zs.get(i - qi).abs(), abs_prefix.range(lo, hi));
    }
    let value = term_tail + past.value() / a_n;

    let surrogate = if model.alpha() > 1.0 {
        model.alpha() / (model.alpha() - 1.0)
    } else {
        model.magnitude_median()
    };
    let beyond_window = block_tail_sum(|j| coeffs.phi(j).abs(), q + past_window + 1)?;
    let omitted_past_bound = beyond_window * n as f64 * surrogate / a_n;

    Ok(TruncationResidual { value, omitted_past_bound })
}

/// Reads a coefficient vector from plain text, one value per line; blank
/// lines are skipped.
pub fn read_coefficients<R: BufRead>(r: R) -> Result<Vec<f64>, MaError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| MaError::Parse { line: i + 1, msg: e.to_string() })?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v: f64 = s
            .parse()
            .map_err(|_| MaError::Parse { line: i + 1, msg: format!("bad coefficient `{s}`") })?;
        out.push(v);
    }
    Ok(out)
}
