//! The accept-reject test statistics.
//!
//! Each statistic is the expected acceptance rate of a rejection-sampling
//! step with the null density as target and a data-driven density as
//! proposal: per-observation likelihood ratios r_i are clamped to
//! acceptance probabilities min{1, r_i}, whose mean is the statistic. A
//! value near one says the null density explains the sample as well as
//! the data-driven alternative; the test rejects for small values.

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use crate::density_estimation::kde_fit;
use crate::distributions::{sample_moments, CovMatrix, DensitySpec};
use crate::error::{Error, Result};
use crate::sample::Sample;

const LN_2PI: f64 = 1.8378770664093453;

/// Probability that a uniform draw falls below the likelihood ratio r.
pub fn acceptance_prob(r: f64) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "likelihood ratio must be finite and >= 0, got {r}"
        )));
    }
    Ok(r.min(1.0))
}

/// Per-observation likelihood ratios with their acceptance probabilities.
#[derive(Debug, Clone)]
pub struct RatioSet {
    ratios: Vec<f64>,
    accept_probs: Vec<f64>,
}

impl RatioSet {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::EmptyInput("ratio set"));
        }
        let accept_probs = ratios
            .iter()
            .map(|&r| acceptance_prob(r))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            ratios,
            accept_probs,
        })
    }

    /// Build from log-ratios. Positive log-ratios are clamped to zero
    /// before exponentiating: min{1, r} only needs the sign of the log,
    /// and the clamp avoids overflow for extreme ratios.
    pub fn from_log_ratios(log_ratios: &[f64]) -> Result<Self> {
        if log_ratios.is_empty() {
            return Err(Error::EmptyInput("ratio set"));
        }
        if log_ratios.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::NonFinite("log likelihood ratio"));
        }
        let ratios: Vec<f64> = log_ratios.iter().map(|&l| l.min(0.0).exp()).collect();
        Self::new(ratios)
    }

    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn accept_probs(&self) -> &[f64] {
        &self.accept_probs
    }
}

/// Expected acceptance rate: mean of min{1, r_i}, which equals
/// n^{-1} (#{r_i >= 1} + sum of the r_i below one).
pub fn ar_expectation(ratios: &RatioSet) -> f64 {
    ratios.accept_probs.iter().sum::<f64>() / ratios.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticKind {
    GoodnessOfFit,
    MeanEquality,
    MeanVector,
}

/// A computed accept-reject statistic in [0, 1].
#[derive(Debug, Clone)]
pub struct ArStatistic {
    value: f64,
    n: usize,
    kind: StatisticKind,
    accept_probs: Option<Vec<f64>>,
}

impl ArStatistic {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }

    /// Per-observation acceptance probabilities; present for the
    /// goodness-of-fit statistic, where they parameterize the Poisson
    /// binomial distribution of n*T(X).
    pub fn accept_probs(&self) -> Option<&[f64]> {
        self.accept_probs.as_deref()
    }
}

/// Goodness-of-fit statistic: ratios of the null density to a kernel
/// density estimate, both evaluated at the sample values. The estimate at
/// X_i leaves the i-th kernel out.
pub fn gof_statistic(data: &Sample, null_spec: &DensitySpec) -> Result<ArStatistic> {
    gof_statistic_with_bandwidth(data, null_spec, None)
}

/// As `gof_statistic`, with an optional bandwidth applied to every
/// dimension in place of the fitted rule.
pub fn gof_statistic_with_bandwidth(
    data: &Sample,
    null_spec: &DensitySpec,
    bandwidth: Option<f64>,
) -> Result<ArStatistic> {
    if null_spec.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: null_spec.dim(),
        });
    }
    let kde = match bandwidth {
        Some(h) => crate::density_estimation::KdeModel::with_bandwidths(
            data,
            vec![h; data.dim()],
        )?,
        None => kde_fit(data)?,
    };
    let mut log_ratios = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let x = data.row_vector(i);
        log_ratios.push(null_spec.log_pdf(&x)? - kde.log_eval_loo(i));
    }
    let ratios = RatioSet::from_log_ratios(&log_ratios)?;
    let value = ar_expectation(&ratios);
    Ok(ArStatistic {
        value,
        n: data.n(),
        kind: StatisticKind::GoodnessOfFit,
        accept_probs: Some(ratios.accept_probs),
    })
}

fn log_mvn_centered(q: f64, p: f64, log_det: f64) -> f64 {
    -0.5 * p * LN_2PI - 0.5 * log_det - 0.5 * q
}

fn log_mvt_centered(q: f64, df: f64, p: f64, log_det: f64) -> f64 {
    ln_gamma((df + p) / 2.0) - ln_gamma(df / 2.0) - 0.5 * p * (df * std::f64::consts::PI).ln()
        - 0.5 * log_det
        - 0.5 * (df + p) * (q / df).ln_1p()
}

/// min{1, ratio of the centered normal to the centered t density at t}.
fn t_ratio_prob(t: &DVector<f64>, df: f64, sigma: &CovMatrix) -> f64 {
    let p = t.len() as f64;
    let q = sigma.mahalanobis_sq(t);
    let log_det = sigma.log_det();
    let log_ratio = log_mvn_centered(q, p, log_det) - log_mvt_centered(q, df, p, log_det);
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// Mean test: t = sqrt(n) (xbar - mu0) is referred to the ratio of a
/// N(0, Sigma) target and a t(n-1, 0, Sigma) proposal.
pub fn mean_ratio_statistic(
    data: &Sample,
    mu0: &DVector<f64>,
    sigma: &CovMatrix,
) -> Result<ArStatistic> {
    if data.n() < 2 {
        return Err(Error::InvalidParameter(format!(
            "mean test needs n >= 2, got {}",
            data.n()
        )));
    }
    if mu0.len() != data.dim() || sigma.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: if mu0.len() != data.dim() {
                mu0.len()
            } else {
                sigma.dim()
            },
        });
    }
    if mu0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mu0"));
    }
    let n = data.n();
    let t = (data.mean_vector() - mu0) * (n as f64).sqrt();
    let value = t_ratio_prob(&t, (n - 1) as f64, sigma);
    Ok(ArStatistic {
        value,
        n,
        kind: StatisticKind::MeanVector,
        accept_probs: None,
    })
}

/// Equality of coordinate means via the grand-mean null mu0 = a*1.
/// With `independent` set, Sigma is the diagonal of per-column variances
/// (appropriate when the columns are not repeated measurements).
pub fn group_mean_equality_statistic(data: &Sample, independent: bool) -> Result<ArStatistic> {
    if data.dim() < 2 {
        return Err(Error::InvalidParameter(format!(
            "mean-equality test needs p >= 2 columns, got {}",
            data.dim()
        )));
    }
    if data.n() < 2 {
        return Err(Error::InvalidParameter(format!(
            "mean-equality test needs n >= 2, got {}",
            data.n()
        )));
    }
    let sigma = if independent {
        let n = data.n() as f64;
        let vars: Vec<f64> = (0..data.dim())
            .map(|j| {
                let col = data.column(j);
                let m = col.iter().sum::<f64>() / n;
                col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
            })
            .collect();
        CovMatrix::from_diagonal(&vars).map_err(|_| {
            Error::DegenerateData("a column has zero variance".into())
        })?
    } else {
        sample_moments(data)?.1
    };
    let mu0 = DVector::from_element(data.dim(), data.grand_mean());
    let stat = mean_ratio_statistic(data, &mu0, &sigma)?;
    Ok(ArStatistic {
        kind: StatisticKind::MeanEquality,
        ..stat
    })
}

/// Grand-mean equality test for groups of unequal sizes. Each coordinate
/// is scaled by its own group size, t_j = sqrt(n_j) (xbar_j - a), with a
/// diagonal covariance of per-group variances; the t proposal uses
/// max(n_j) - 1 degrees of freedom. Reduces to
/// `group_mean_equality_statistic` with the independent flag when all
/// groups have the same size.
pub fn group_mean_equality_ragged(groups: &[Vec<f64>]) -> Result<ArStatistic> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "mean-equality test needs >= 2 groups, got {}",
            groups.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (j, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "group {j} has fewer than 2 observations"
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("group value"));
        }
        total += g.iter().sum::<f64>();
        count += g.len();
    }
    let a = total / count as f64;
    let p = groups.len();
    let mut t = DVector::zeros(p);
    let mut vars = Vec::with_capacity(p);
    let mut max_n = 0usize;
    for (j, g) in groups.iter().enumerate() {
        let nj = g.len() as f64;
        let mean = g.iter().sum::<f64>() / nj;
        let var = g.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nj - 1.0);
        if var == 0.0 {
            return Err(Error::DegenerateData(format!("group {j} is constant")));
        }
        t[j] = nj.sqrt() * (mean - a);
        vars.push(var);
        max_n = max_n.max(g.len());
    }
    let sigma = CovMatrix::from_diagonal(&vars)?;
    let value = t_ratio_prob(&t, (max_n - 1) as f64, &sigma);
    Ok(ArStatistic {
        value,
        n: max_n,
        kind: StatisticKind::MeanEquality,
        accept_probs: None,
    })
}

/// Fixed mean-vector test; uses the supplied population covariance when
/// given, otherwise the sample covariance.
pub fn mean_vector_statistic(
    data: &Sample,
    mu0: &DVector<f64>,
    population_sigma: Option<&CovMatrix>,
) -> Result<ArStatistic> {
    let sigma = match population_sigma {
        Some(s) => s.clone(),
        None => sample_moments(data)?.1,
    };
    mean_ratio_statistic(data, mu0, &sigma)
}
