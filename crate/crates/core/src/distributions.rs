//! Evaluable log-densities and samplers for every distribution family the
//! tests use, plus sample moments and the shifted log-normal fit.
//!
//! All density evaluation happens in log space; ratios are formed as
//! `exp(log f0 - log g)` downstream to avoid underflow at tail points.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};
use statrs::distribution::ContinuousCDF;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sample::Sample;

const LN_2PI: f64 = 1.8378770664093453;

/// Symmetric positive-definite covariance with its Cholesky factor cached.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    matrix: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
}

impl CovMatrix {
    /// Validates symmetry (1e-12 relative tolerance) and positive
    /// definiteness (all Cholesky pivots > 0).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if p == 0 || matrix.ncols() != p {
            return Err(Error::InvalidParameter(format!(
                "covariance must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance entry"));
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let a = matrix[(i, j)];
                let b = matrix[(j, i)];
                let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
                if (a - b).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        let chol = nalgebra::Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?;
        let chol_lower = chol.unpack();
        // Rounding can hand rank-deficient matrices a tiny positive pivot;
        // require each squared pivot to clear a relative floor.
        let max_diag = matrix.diagonal().iter().fold(f64::MIN_POSITIVE, |a, &b| a.max(b));
        let min_pivot_sq = 1e-12 * max_diag;
        if chol_lower.diagonal().iter().any(|&d| d.is_nan() || d * d <= min_pivot_sq) {
            return Err(Error::InvalidParameter(
                "covariance is numerically singular (Cholesky pivot below tolerance)".into(),
            ));
        }
        Ok(Self { matrix, chol_lower })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            matrix: DMatrix::identity(p, p),
            chol_lower: DMatrix::identity(p, p),
        }
    }

    /// Diagonal covariance from per-coordinate variances.
    pub fn from_diagonal(variances: &[f64]) -> Result<Self> {
        if variances.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::DegenerateData(
                "non-positive variance on the diagonal".into(),
            ));
        }
        let p = variances.len();
        Ok(Self {
            matrix: DMatrix::from_diagonal(&DVector::from_iterator(
                p,
                variances.iter().copied(),
            )),
            chol_lower: DMatrix::from_diagonal(&DVector::from_iterator(
                p,
                variances.iter().map(|v| v.sqrt()),
            )),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    /// ln |Sigma| via the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol_lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// v' Sigma^{-1} v, computed as |L^{-1} v|^2.
    pub fn mahalanobis_sq(&self, v: &DVector<f64>) -> f64 {
        let y = self
            .chol_lower
            .solve_lower_triangular(v)
            .expect("validated Cholesky factor is invertible");
        y.norm_squared()
    }
}

/// A parameterized, evaluable probability density with a sampler.
///
/// `Logistic` and `Uniform` with `dim > 1` are i.i.d. products across
/// coordinates. `NormalMixture2` is a two-component mixture with a shared
/// covariance. The multivariate t uses the scale-matrix form, so `scale`
/// is not the t covariance (which is df/(df-2) * scale).
#[derive(Debug, Clone)]
pub enum DensitySpec {
    MvNormal {
        mean: DVector<f64>,
        cov: CovMatrix,
    },
    MvStudentT {
        df: f64,
        mean: DVector<f64>,
        scale: CovMatrix,
    },
    LocScaleT {
        df: f64,
        loc: f64,
        scale: f64,
    },
    Logistic {
        loc: f64,
        scale: f64,
        dim: usize,
    },
    Uniform {
        lo: f64,
        hi: f64,
        dim: usize,
    },
    NormalMixture2 {
        weight: f64,
        mean1: DVector<f64>,
        mean2: DVector<f64>,
        cov: CovMatrix,
    },
    ShiftedLogNormal {
        mu: f64,
        sigma: f64,
        shift: f64,
    },
}

impl DensitySpec {
    pub fn mv_normal(mean: DVector<f64>, cov: CovMatrix) -> Result<Self> {
        check_mean(&mean, cov.dim())?;
        Ok(Self::MvNormal { mean, cov })
    }

    /// Standard normal in `p` dimensions.
    pub fn std_normal(p: usize) -> Self {
        Self::MvNormal {
            mean: DVector::zeros(p),
            cov: CovMatrix::identity(p),
        }
    }

    /// Univariate N(mu, sigma^2).
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        check_positive(sigma, "normal sigma")?;
        Self::mv_normal(
            DVector::from_vec(vec![mu]),
            CovMatrix::from_diagonal(&[sigma * sigma])?,
        )
    }

    pub fn mv_student_t(df: f64, mean: DVector<f64>, scale: CovMatrix) -> Result<Self> {
        check_positive(df, "t degrees of freedom")?;
        check_mean(&mean, scale.dim())?;
        Ok(Self::MvStudentT { df, mean, scale })
    }

    pub fn loc_scale_t(df: f64, loc: f64, scale: f64) -> Result<Self> {
        check_positive(df, "t degrees of freedom")?;
        check_positive(scale, "t scale")?;
        check_finite(loc, "t location")?;
        Ok(Self::LocScaleT { df, loc, scale })
    }

    pub fn logistic(loc: f64, scale: f64, dim: usize) -> Result<Self> {
        check_positive(scale, "logistic scale")?;
        check_finite(loc, "logistic location")?;
        check_dim(dim)?;
        Ok(Self::Logistic { loc, scale, dim })
    }

    pub fn uniform(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        check_finite(lo, "uniform bound")?;
        check_finite(hi, "uniform bound")?;
        if hi <= lo {
            return Err(Error::InvalidParameter(format!(
                "uniform needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        check_dim(dim)?;
        Ok(Self::Uniform { lo, hi, dim })
    }

    pub fn normal_mixture2(
        weight: f64,
        mean1: DVector<f64>,
        mean2: DVector<f64>,
        cov: CovMatrix,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!(
                "mixture weight must lie in [0,1], got {weight}"
            )));
        }
        check_mean(&mean1, cov.dim())?;
        check_mean(&mean2, cov.dim())?;
        Ok(Self::NormalMixture2 {
            weight,
            mean1,
            mean2,
            cov,
        })
    }

    /// ln(X - shift) ~ N(mu, sigma^2); support is (shift, inf).
    pub fn shifted_log_normal(mu: f64, sigma: f64, shift: f64) -> Result<Self> {
        check_finite(mu, "log-normal mu")?;
        check_finite(shift, "log-normal shift")?;
        check_positive(sigma, "log-normal sigma")?;
        Ok(Self::ShiftedLogNormal { mu, sigma, shift })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::MvNormal { mean, .. } => mean.len(),
            Self::MvStudentT { mean, .. } => mean.len(),
            Self::LocScaleT { .. } | Self::ShiftedLogNormal { .. } => 1,
            Self::Logistic { dim, .. } | Self::Uniform { dim, .. } => *dim,
            Self::NormalMixture2 { mean1, .. } => mean1.len(),
        }
    }

    /// ln f(x). Returns exactly -inf only outside bounded supports
    /// (`Uniform`, `ShiftedLogNormal` at x <= shift).
    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("evaluation point"));
        }
        Ok(match self {
            Self::MvNormal { mean, cov } => {
                let d = x - mean;
                -0.5 * (mean.len() as f64) * LN_2PI - 0.5 * cov.log_det()
                    - 0.5 * cov.mahalanobis_sq(&d)
            }
            Self::MvStudentT { df, mean, scale } => {
                let p = mean.len() as f64;
                let d = x - mean;
                let q = scale.mahalanobis_sq(&d);
                ln_gamma((df + p) / 2.0)
                    - ln_gamma(df / 2.0)
                    - 0.5 * p * (df * std::f64::consts::PI).ln()
                    - 0.5 * scale.log_det()
                    - 0.5 * (df + p) * (q / df).ln_1p()
            }
            Self::LocScaleT { df, loc, scale } => {
                let z = (x[0] - loc) / scale;
                ln_gamma((df + 1.0) / 2.0)
                    - ln_gamma(df / 2.0)
                    - 0.5 * (df * std::f64::consts::PI).ln()
                    - scale.ln()
                    - 0.5 * (df + 1.0) * (z * z / df).ln_1p()
            }
            Self::Logistic { loc, scale, .. } => x
                .iter()
                .map(|&xi| {
                    let z = ((xi - loc) / scale).abs();
                    -z - scale.ln() - 2.0 * (-z).exp().ln_1p()
                })
                .sum(),
            Self::Uniform { lo, hi, dim } => {
                if x.iter().all(|&xi| xi >= *lo && xi <= *hi) {
                    -(*dim as f64) * (hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::NormalMixture2 {
                weight,
                mean1,
                mean2,
                cov,
            } => {
                let p = mean1.len() as f64;
                let base = -0.5 * p * LN_2PI - 0.5 * cov.log_det();
                let l1 = base - 0.5 * cov.mahalanobis_sq(&(x - mean1));
                let l2 = base - 0.5 * cov.mahalanobis_sq(&(x - mean2));
                match (*weight == 0.0, *weight == 1.0) {
                    (true, _) => l2,
                    (_, true) => l1,
                    _ => {
                        let a = weight.ln() + l1;
                        let b = (1.0 - weight).ln() + l2;
                        let m = a.max(b);
                        m + ((a - m).exp() + (b - m).exp()).ln()
                    }
                }
            }
            Self::ShiftedLogNormal { mu, sigma, shift } => {
                if x[0] <= *shift {
                    f64::NEG_INFINITY
                } else {
                    let y = (x[0] - shift).ln();
                    let z = (y - mu) / sigma;
                    -y - sigma.ln() - 0.5 * LN_2PI - 0.5 * z * z
                }
            }
        })
    }

    /// n i.i.d. draws; deterministic for a fixed RNG state.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Sample {
        assert!(n >= 1, "sample size must be >= 1");
        let p = self.dim();
        let mut data = DMatrix::zeros(n, p);
        for i in 0..n {
            let row = self.sample_one(rng);
            for j in 0..p {
                data[(i, j)] = row[j];
            }
        }
        Sample::from_matrix(data).expect("samplers produce finite values")
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            Self::MvNormal { mean, cov } => mean + cov.cholesky_lower() * std_normal_vec(mean.len(), rng),
            Self::MvStudentT { df, mean, scale } => {
                let z = scale.cholesky_lower() * std_normal_vec(mean.len(), rng);
                let w: f64 = ChiSquared::new(*df).expect("df validated").sample(rng);
                mean + z * (df / w).sqrt()
            }
            Self::LocScaleT { df, loc, scale } => {
                let z: f64 = rng.sample(StandardNormal);
                let w: f64 = ChiSquared::new(*df).expect("df validated").sample(rng);
                DVector::from_vec(vec![loc + scale * z / (w / df).sqrt()])
            }
            Self::Logistic { loc, scale, dim } => DVector::from_iterator(
                *dim,
                (0..*dim).map(|_| {
                    let u = open_unit(rng);
                    loc + scale * (u / (1.0 - u)).ln()
                }),
            ),
            Self::Uniform { lo, hi, dim } => {
                DVector::from_iterator(*dim, (0..*dim).map(|_| lo + (hi - lo) * rng.gen::<f64>()))
            }
            Self::NormalMixture2 {
                weight,
                mean1,
                mean2,
                cov,
            } => {
                let center = if rng.gen::<f64>() < *weight { mean1 } else { mean2 };
                center + cov.cholesky_lower() * std_normal_vec(mean1.len(), rng)
            }
            Self::ShiftedLogNormal { mu, sigma, shift } => {
                let z: f64 = rng.sample(StandardNormal);
                DVector::from_vec(vec![shift + (mu + sigma * z).exp()])
            }
        }
    }

    /// Cumulative distribution function for univariate families.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::InvalidParameter(
                "cdf is only defined for univariate densities".into(),
            ));
        }
        Ok(match self {
            Self::MvNormal { mean, cov } => {
                let sd = cov.matrix()[(0, 0)].sqrt();
                std_normal_cdf((x - mean[0]) / sd)
            }
            Self::MvStudentT { df, mean, scale } => {
                let s = scale.matrix()[(0, 0)].sqrt();
                student_t_cdf((x - mean[0]) / s, *df)
            }
            Self::LocScaleT { df, loc, scale } => student_t_cdf((x - loc) / scale, *df),
            Self::Logistic { loc, scale, .. } => {
                let z = (x - loc) / scale;
                1.0 / (1.0 + (-z).exp())
            }
            Self::Uniform { lo, hi, .. } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::NormalMixture2 {
                weight,
                mean1,
                mean2,
                cov,
            } => {
                let sd = cov.matrix()[(0, 0)].sqrt();
                weight * std_normal_cdf((x - mean1[0]) / sd)
                    + (1.0 - weight) * std_normal_cdf((x - mean2[0]) / sd)
            }
            Self::ShiftedLogNormal { mu, sigma, shift } => {
                if x <= *shift {
                    0.0
                } else {
                    std_normal_cdf(((x - shift).ln() - mu) / sigma)
                }
            }
        })
    }
}

fn std_normal_vec<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    statrs::distribution::Normal::standard().cdf(z)
}

pub(crate) fn student_t_cdf(t: f64, df: f64) -> f64 {
    statrs::distribution::StudentsT::new(0.0, 1.0, df)
        .expect("df validated")
        .cdf(t)
}

fn check_mean(mean: &DVector<f64>, p: usize) -> Result<()> {
    if mean.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: mean.len(),
        });
    }
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mean vector"));
    }
    Ok(())
}

fn check_positive(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidParameter(format!("{what} must be > 0, got {v}")));
    }
    Ok(())
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{what} must be finite, got {v}"
        )));
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    Ok(())
}

/// Raw unbiased (n-1) sample covariance matrix, without positive
/// definiteness validation.
pub fn sample_covariance_matrix(data: &Sample) -> Result<DMatrix<f64>> {
    if data.n() < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample moments need n >= 2, got {}",
            data.n()
        )));
    }
    let mean = data.mean_vector();
    let p = data.dim();
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..data.n() {
        let d = data.row_vector(i) - &mean;
        cov.syger(1.0, &d, &d, 1.0);
    }
    cov /= (data.n() - 1) as f64;
    // syger fills the lower triangle; mirror it.
    for i in 0..p {
        for j in (i + 1)..p {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok(cov)
}

/// Columnwise mean and unbiased (n-1) sample covariance.
///
/// A singular covariance (e.g. a constant or duplicated column) is a
/// degenerate-data error.
pub fn sample_moments(data: &Sample) -> Result<(DVector<f64>, CovMatrix)> {
    let cov = CovMatrix::new(sample_covariance_matrix(data)?).map_err(|e| match e {
        Error::InvalidParameter(_) => Error::DegenerateData(
            "sample covariance is singular; consider a diagonal (independent) covariance or dropping collinear columns".into(),
        ),
        other => other,
    })?;
    Ok((data.mean_vector(), cov))
}

/// Number of grid points used for the shift profile.
const SHIFT_GRID: usize = 512;

/// Closed-form (mu, sigma) maximum likelihood at a fixed shift, with the
/// profile log-likelihood value. sigma uses the MLE divisor n.
pub fn shifted_log_normal_profile(data: &Sample, shift: f64) -> Result<(f64, f64, f64)> {
    if data.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: data.dim(),
        });
    }
    let xs = data.column(0);
    let n = xs.len() as f64;
    if xs.iter().any(|&x| x <= shift) {
        return Err(Error::InvalidParameter(format!(
            "shift {shift} is not strictly below all data points"
        )));
    }
    let ys: Vec<f64> = xs.iter().map(|&x| (x - shift).ln()).collect();
    let mu = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::DegenerateData("all log-shifted values equal".into()));
    }
    let sigma = var.sqrt();
    let loglik = -ys.iter().sum::<f64>() - n * sigma.ln() - 0.5 * n * LN_2PI - 0.5 * n;
    Ok((mu, sigma, loglik))
}

/// Fit a shifted log-normal by profile likelihood over a grid of shifts
/// in [min(x) - range, min(x) - eps], eps = 1e-6 * range.
///
/// The three-parameter likelihood is unbounded as the shift approaches
/// min(x); the grid with an eps offset yields a stable local maximizer.
pub fn fit_shifted_lognormal(data: &Sample) -> Result<DensitySpec> {
    if data.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: data.dim(),
        });
    }
    if data.n() < 10 {
        return Err(Error::InvalidParameter(format!(
            "shifted log-normal fit needs n >= 10, got {}",
            data.n()
        )));
    }
    let xs = data.column(0);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Err(Error::DegenerateData("constant data".into()));
    }
    let lo = min - range;
    let hi = min - 1e-6 * range;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 0..SHIFT_GRID {
        let shift = lo + (hi - lo) * k as f64 / (SHIFT_GRID - 1) as f64;
        let (mu, sigma, ll) = shifted_log_normal_profile(data, shift)?;
        if ll.is_finite() && best.is_none_or(|(_, _, _, b)| ll > b) {
            best = Some((mu, sigma, shift, ll));
        }
    }
    let (mu, sigma, shift, _) = best.ok_or_else(|| {
        Error::DegenerateData("profile likelihood non-finite on the whole grid".into())
    })?;
    DensitySpec::shifted_log_normal(mu, sigma, shift)
}
