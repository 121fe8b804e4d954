//! Monte Carlo calibration of the null distribution: replicate statistics
//! under the null, thresholds, p-values, and the Poisson binomial shortcut
//! for percentile estimation.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poisson_binomial::PoiBinDist;
use crate::rng::replicate_rng;
use crate::sample::Sample;

/// Sorted replicate statistics simulated under the null hypothesis.
#[derive(Debug, Clone)]
pub struct NullDistribution {
    replicates: Vec<f64>,
    seed: u64,
    generator_desc: String,
}

impl NullDistribution {
    /// Wrap replicates simulated elsewhere (e.g. a sampler whose shape
    /// does not fit `Sample`). Values must lie in [0, 1].
    pub fn from_replicates(
        mut replicates: Vec<f64>,
        seed: u64,
        generator_desc: impl Into<String>,
    ) -> Result<Self> {
        if replicates.len() < 100 {
            return Err(Error::InvalidParameter(format!(
                "null distribution needs M >= 100 replicates, got {}",
                replicates.len()
            )));
        }
        if replicates.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "replicate statistic outside [0, 1]".into(),
            ));
        }
        replicates.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self {
            replicates,
            seed,
            generator_desc: generator_desc.into(),
        })
    }

    pub fn replicates(&self) -> &[f64] {
        &self.replicates
    }

    pub fn m(&self) -> usize {
        self.replicates.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generator_desc(&self) -> &str {
        &self.generator_desc
    }
}

/// Simulate `m` independent replicate statistics under the null.
///
/// Each replicate draws from its own RNG stream derived from (seed,
/// replicate index), so the result is identical whether replicates run
/// sequentially or in parallel.
pub fn build_null<S, F>(
    h0_sampler: S,
    statistic_fn: F,
    m: usize,
    seed: u64,
    generator_desc: impl Into<String>,
) -> Result<NullDistribution>
where
    S: Fn(&mut ChaCha8Rng) -> Sample + Sync,
    F: Fn(&Sample) -> Result<f64> + Sync,
{
    if m < 100 {
        return Err(Error::InvalidParameter(format!(
            "null distribution needs M >= 100 replicates, got {m}"
        )));
    }
    let values: Vec<Result<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            let sample = h0_sampler(&mut rng);
            statistic_fn(&sample)
        })
        .collect();
    let mut replicates = Vec::with_capacity(m);
    for (i, v) in values.into_iter().enumerate() {
        let v = v.map_err(|e| Error::Replicate {
            index: i,
            source: Box::new(e),
        })?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Replicate {
                index: i,
                source: Box::new(Error::InvalidParameter(format!(
                    "statistic {v} outside [0, 1]"
                ))),
            });
        }
        replicates.push(v);
    }
    replicates.sort_by(|a, b| a.partial_cmp(b).expect("replicates are finite"));
    Ok(NullDistribution {
        replicates,
        seed,
        generator_desc: generator_desc.into(),
    })
}

/// Add-one Monte Carlo p-value for a left-tail rejection region:
/// (1 + #{replicates <= observed}) / (M + 1).
pub fn mc_p_value(null: &NullDistribution, observed: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&observed));
    let count = null.replicates.partition_point(|&r| r <= observed);
    (1 + count) as f64 / (null.m() + 1) as f64
}

/// Empirical alpha-quantile of the replicates (left-continuous inverse);
/// the test rejects an observed statistic at or below this threshold.
pub fn percentile_threshold(null: &NullDistribution, alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let m = null.m();
    let idx = ((alpha * m as f64).ceil() as usize).max(1) - 1;
    null.replicates[idx.min(m - 1)]
}

/// Default warm-up replicate count for the Poisson binomial percentile
/// approximation.
pub const DEFAULT_WARM_REPS: usize = 50;

/// Approximate the alpha-percentile of the goodness-of-fit null from a
/// small number of warm-up replicates: average the i-th acceptance
/// probability over replicates (samples are exchangeable, so positions
/// are not sorted), then take the Poisson binomial quantile on the k/n
/// grid.
pub fn poibin_threshold_approx<S, F>(
    h0_sampler: S,
    accept_probs_fn: F,
    n: usize,
    warm_reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64>
where
    S: Fn(&mut ChaCha8Rng) -> Sample + Sync,
    F: Fn(&Sample) -> Result<Vec<f64>> + Sync,
{
    if warm_reps < 2 {
        return Err(Error::InvalidParameter(format!(
            "poibin approximation needs warm_reps >= 2, got {warm_reps}"
        )));
    }
    let sums: Vec<Result<Vec<f64>>> = (0..warm_reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            let sample = h0_sampler(&mut rng);
            let probs = accept_probs_fn(&sample)?;
            if probs.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: probs.len(),
                });
            }
            Ok(probs)
        })
        .collect();
    let mut mean = vec![0.0; n];
    for (i, r) in sums.into_iter().enumerate() {
        let probs = r.map_err(|e| Error::Replicate {
            index: i,
            source: Box::new(e),
        })?;
        for (m, p) in mean.iter_mut().zip(probs) {
            *m += p;
        }
    }
    for m in &mut mean {
        *m /= warm_reps as f64;
    }
    let dist = PoiBinDist::new(mean)?;
    Ok(dist.quantile(alpha)? as f64 / n as f64)
}

/// Simulate the distribution of n*T(X) for fixed acceptance probabilities
/// by drawing the auxiliary uniforms; returns counts over {0, ..., n}.
pub fn simulate_t_distribution(
    accept_probs: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if reps < 1000 {
        return Err(Error::InvalidParameter(format!(
            "simulate_t_distribution needs reps >= 1000, got {reps}"
        )));
    }
    // Validates the probabilities.
    PoiBinDist::new(accept_probs.to_vec())?;
    let n = accept_probs.len();
    let mut counts = vec![0u64; n + 1];
    let mut rng = replicate_rng(seed, 0);
    use rand::Rng;
    for _ in 0..reps {
        let mut k = 0usize;
        for &p in accept_probs {
            if p > rng.gen::<f64>() {
                k += 1;
            }
        }
        counts[k] += 1;
    }
    Ok(counts)
}

/// Total variation distance between a histogram and a pmf.
pub fn tv_distance(counts: &[u64], pmf: &[f64]) -> f64 {
    assert_eq!(counts.len(), pmf.len());
    let total: u64 = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(pmf)
        .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
        .sum::<f64>()
}

/// The universal test output.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub ci: Option<(f64, f64)>,
    pub m: usize,
    pub alpha_threshold: Option<f64>,
    pub seed: u64,
}
