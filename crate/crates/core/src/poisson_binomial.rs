//! Poisson binomial distribution of a sum of independent Bernoulli
//! variables with unequal success probabilities.
//!
//! The pmf is exact, computed by folding each probability into a running
//! convolution in O(n^2). The sample sizes here are at most a few hundred,
//! where this is both fast and free of the accuracy concerns of
//! characteristic-function inversion.

use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct PoiBinDist {
    probs: Vec<f64>,
    pmf: OnceLock<Vec<f64>>,
}

impl PoiBinDist {
    /// Build from per-trial success probabilities, each in [0, 1].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("poisson binomial probabilities"));
        }
        for &p in &probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            probs,
            pmf: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Distribution mean, sum of the probabilities.
    pub fn mean(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Exact pmf over {0, ..., n}.
    pub fn pmf(&self) -> &[f64] {
        self.pmf.get_or_init(|| {
            let mut pmf = Vec::with_capacity(self.probs.len() + 1);
            pmf.push(1.0);
            for &p in &self.probs {
                let q = 1.0 - p;
                let mut next = Vec::with_capacity(pmf.len() + 1);
                next.push(pmf[0] * q);
                for k in 1..pmf.len() {
                    next.push(pmf[k] * q + pmf[k - 1] * p);
                }
                next.push(pmf[pmf.len() - 1] * p);
                pmf = next;
            }
            pmf
        })
    }

    /// Smallest k with CDF(k) >= q (left-continuous inverse).
    pub fn quantile(&self, q: f64) -> Result<usize> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile level {q} outside (0, 1)"
            )));
        }
        let mut acc = 0.0;
        for (k, &m) in self.pmf().iter().enumerate() {
            acc += m;
            if acc >= q {
                return Ok(k);
            }
        }
        Ok(self.n())
    }

    /// Equal-tailed credible interval for the statistic on the k/n scale:
    /// (quantile((1-level)/2)/n, quantile((1+level)/2)/n).
    pub fn credible_interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "credible level {level} outside (0, 1)"
            )));
        }
        let n = self.n() as f64;
        let lo = self.quantile((1.0 - level) / 2.0)? as f64 / n;
        let hi = self.quantile((1.0 + level) / 2.0)? as f64 / n;
        Ok((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Brute-force pmf by enumerating all 2^n outcomes. Oracle for the
    /// convolution; only usable for small n.
    pub(crate) fn brute_force_pmf(probs: &[f64]) -> Vec<f64> {
        let n = probs.len();
        assert!(n <= 20);
        let mut pmf = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let mut prob = 1.0;
            let mut count = 0usize;
            for (i, &p) in probs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    prob *= p;
                    count += 1;
                } else {
                    prob *= 1.0 - p;
                }
            }
            pmf[count] += prob;
        }
        pmf
    }

    fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
        let mut pmf = vec![0.0; n + 1];
        for (k, slot) in pmf.iter_mut().enumerate() {
            let mut ln = 0.0;
            for i in 0..k {
                ln += ((n - i) as f64).ln() - ((k - i) as f64).ln();
            }
            *slot = (ln + (k as f64) * p.ln() + ((n - k) as f64) * (1.0 - p).ln()).exp();
        }
        pmf
    }

    #[test]
    fn matches_binomial_half() {
        let d = PoiBinDist::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(d.pmf(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn degenerate_probs() {
        let d = PoiBinDist::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(d.pmf(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn three_point_brute_force_values() {
        let d = PoiBinDist::new(vec![0.2, 0.7, 0.9]).unwrap();
        let expect = brute_force_pmf(&[0.2, 0.7, 0.9]);
        assert_relative_eq!(expect[0], 0.024, epsilon = 1e-12);
        assert_relative_eq!(expect[1], 0.278, epsilon = 1e-12);
        assert_relative_eq!(expect[2], 0.572, epsilon = 1e-12);
        assert_relative_eq!(expect[3], 0.126, epsilon = 1e-12);
        for (a, b) in d.pmf().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(PoiBinDist::new(vec![0.5, 1.1]).is_err());
        assert!(PoiBinDist::new(vec![-0.1]).is_err());
        assert!(PoiBinDist::new(vec![]).is_err());
    }

    #[test]
    fn pmf_sums_to_one_and_mean_matches() {
        let probs = vec![0.13, 0.7, 0.99, 0.01, 0.5, 0.42];
        let d = PoiBinDist::new(probs.clone()).unwrap();
        let total: f64 = d.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = d.pmf().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((mean - d.mean()).abs() < 1e-10);
    }

    #[test]
    fn quantile_examples() {
        let d = PoiBinDist::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 1);

        // Direct CDF check in the n=60 regime.
        let d = PoiBinDist::new(vec![0.917; 60]).unwrap();
        let k = d.quantile(0.05).unwrap() as f64 / 60.0;
        assert!((0.85..=0.95).contains(&k), "k/n = {k}");

        let d = PoiBinDist::new(vec![1.0; 7]).unwrap();
        for q in [0.01, 0.5, 0.99] {
            assert_eq!(d.quantile(q).unwrap(), 7);
        }
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
    }

    #[test]
    fn credible_interval_all_ones() {
        let d = PoiBinDist::new(vec![1.0; 5]).unwrap();
        assert_eq!(d.credible_interval(0.95).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn credible_interval_binomial_20() {
        // Bin(20, 0.5): CDF(5) = 0.0207, CDF(15) = 0.9941, so a 0.96 level
        // interval lands on quantiles 5 and 15.
        let d = PoiBinDist::new(vec![0.5; 20]).unwrap();
        assert_eq!(d.credible_interval(0.96).unwrap(), (0.25, 0.75));
    }

    #[test]
    fn credible_interval_three_point() {
        // pmf (0.024, 0.278, 0.572, 0.126): CDF(0) = 0.024 < 0.025, so the
        // 2.5% lower quantile is k=1 under the stated convention.
        let d = PoiBinDist::new(vec![0.2, 0.7, 0.9]).unwrap();
        let (lo, hi) = d.credible_interval(0.95).unwrap();
        assert_relative_eq!(lo, 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 1.0);
    }

    proptest! {
        #[test]
        fn pmf_matches_brute_force(probs in proptest::collection::vec(0.0f64..=1.0, 1..=12)) {
            let d = PoiBinDist::new(probs.clone()).unwrap();
            let brute = brute_force_pmf(&probs);
            for (a, b) in d.pmf().iter().zip(brute.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn equal_probs_reduce_to_binomial(p in 0.001f64..0.999, n in 1usize..40) {
            let d = PoiBinDist::new(vec![p; n]).unwrap();
            for (a, b) in d.pmf().iter().zip(binomial_pmf(n, p).iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn pmf_invariant_under_permutation(
            probs in proptest::collection::vec(0.0f64..=1.0, 2..=30),
            rot in 1usize..29,
        ) {
            let mut rotated = probs.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            let a = PoiBinDist::new(probs).unwrap();
            let b = PoiBinDist::new(rotated).unwrap();
            for (x, y) in a.pmf().iter().zip(b.pmf().iter()) {
                prop_assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
