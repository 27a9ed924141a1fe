//! Compensated summation primitives shared by the coupling identities and
//! quadrature code: Neumaier accumulation, error-free products via FMA, and
//! compensated prefix sums with O(1) range queries.

/// Neumaier-compensated accumulator. `parts()` exposes the (sum, comp) pair
/// so a partial sum can be reused as a two-term representation whose error
/// is O(eps^2) of the term magnitudes.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Accumulator { sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Adds a*b exactly: the FMA recovers the product's rounding error.
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        self.add(e);
    }

    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated prefix sums of a slice; `range_parts(lo, hi)` returns the sum
/// over indices lo..=hi as a two-term representation.
pub(crate) struct PrefixSums {
    states: Vec<(f64, f64)>,
}

impl PrefixSums {
    pub fn new(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Accumulator::new();
        let mut states = vec![(0.0, 0.0)];
        for x in xs {
            acc.add(x);
            states.push(acc.parts());
        }
        PrefixSums { states }
    }

    /// Inclusive-range sum parts; empty when lo > hi.
    pub fn range_parts(&self, lo: usize, hi: usize) -> (f64, f64) {
        if lo > hi {
            return (0.0, 0.0);
        }
        let (shi, chi) = self.states[hi + 1];
        let (slo, clo) = self.states[lo];
        (shi - slo, chi - clo)
    }

    pub fn range(&self, lo: usize, hi: usize) -> f64 {
        let (s, c) = self.range_parts(lo, hi);
        s + c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_recovers_cancelled_small_terms() {
        let mut acc = Accumulator::new();
        acc.add(1e16);
        acc.add(1.0);
        acc.add(-1e16);
        assert_eq!(acc.value(), 1.0);
    }

    #[test]
    fn product_accumulation_is_error_free() {
        // phi * z with a rounding error in the plain product
        let (a, b) = (0.1, 3.0000000000000004e15);
        let mut acc = Accumulator::new();
        acc.add_product(a, b);
        acc.add_product(-a, b);
        assert_eq!(acc.value(), 0.0);
        let mut acc = Accumulator::new();
        acc.add_product(a, b);
        let p = a * b;
        let exact_err = a.mul_add(b, -p);
        assert_eq!(acc.value(), p + exact_err);
    }

    #[test]
    fn prefix_ranges_match_direct_sums() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 2654435761u64 % 1000) as f64 - 500.0) / 7.0).collect();
        let ps = PrefixSums::new(xs.iter().copied());
        for (lo, hi) in [(0, 99), (10, 10), (3, 40), (99, 99), (7, 6)] {
            let direct: f64 = xs[lo..=hi.min(99)].iter().sum();
            let got = ps.range(lo, hi);
            if lo > hi {
                assert_eq!(got, 0.0);
            } else {
                assert!((got - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
            }
        }
    }
}
