//! Classical comparison tests: Kolmogorov-Smirnov, Cramer-von Mises,
//! Anderson-Darling, paired and two-sample t, the known-parameter
//! likelihood ratio test, and the normal mean-vector likelihood ratio
//! test with chi-square calibration.
//!
//! The empirical-cdf statistics are computed on probability-integral
//! transforms of the data, which makes them distribution-free under a
//! fully specified null: their Monte Carlo p-values simulate plain
//! uniform samples, no null sampler needed.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::ContinuousCDF;

use crate::distributions::{std_normal_cdf, student_t_cdf};
use crate::error::{Error, Result};
use crate::rng::replicate_rng;
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    Asymptotic,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub name: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Sorted probability-integral transform u_(i) = F0(x_(i)); errors if the
/// cdf decreases along the sorted data or leaves [0, 1].
pub fn pit_sorted(data: &[f64], null_cdf: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyInput("data"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("data value"));
    }
    let mut xs = data.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut us = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let u = null_cdf(x);
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidParameter(format!(
                "null cdf returned {u} outside [0, 1]"
            )));
        }
        if let Some(&prev) = us.last() {
            if u < prev - 1e-12 {
                return Err(Error::NonMonotoneCdf(i));
            }
        }
        us.push(u);
    }
    Ok(us)
}

/// D = max over order statistics of max(i/n - u_(i), u_(i) - (i-1)/n).
pub fn ks_statistic(sorted_pit: &[f64]) -> f64 {
    let n = sorted_pit.len() as f64;
    sorted_pit
        .iter()
        .enumerate()
        .map(|(i0, &u)| {
            let i = (i0 + 1) as f64;
            (i / n - u).max(u - (i - 1.0) / n)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// W^2 = 1/(12n) + sum_i (u_(i) - (2i-1)/(2n))^2.
pub fn cvm_statistic(sorted_pit: &[f64]) -> f64 {
    let n = sorted_pit.len() as f64;
    1.0 / (12.0 * n)
        + sorted_pit
            .iter()
            .enumerate()
            .map(|(i0, &u)| {
                let d = u - (2.0 * (i0 as f64 + 1.0) - 1.0) / (2.0 * n);
                d * d
            })
            .sum::<f64>()
}

/// A^2 = -n - n^{-1} sum_i (2i-1) [ln u_(i) + ln(1 - u_(n+1-i))].
/// Requires 0 < u < 1 at every point.
pub fn ad_statistic(sorted_pit: &[f64]) -> Result<f64> {
    let n = sorted_pit.len();
    for (i, &u) in sorted_pit.iter().enumerate() {
        if u <= 0.0 || u >= 1.0 {
            return Err(Error::CdfBoundary { index: i, value: u });
        }
    }
    let nf = n as f64;
    let mut acc = 0.0;
    for i in 1..=n {
        let w = (2 * i - 1) as f64;
        acc += w * (sorted_pit[i - 1].ln() + (-sorted_pit[n - i]).ln_1p());
    }
    Ok(-nf - acc / nf)
}

fn mc_upper_p(observed: f64, sims: &[f64]) -> f64 {
    let hits = sims.iter().filter(|&&s| s >= observed).count();
    (1 + hits) as f64 / (sims.len() + 1) as f64
}

fn uniform_sorted(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n)
        .map(|_| loop {
            let v: f64 = rng.gen();
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    u.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    u
}

fn edf_mc_sims(
    n: usize,
    m: usize,
    seed: u64,
    stat: impl Fn(&[f64]) -> f64 + Sync,
) -> Vec<f64> {
    (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            stat(&uniform_sorted(n, &mut rng))
        })
        .collect()
}

/// Kolmogorov-Smirnov test against a fully specified null cdf; the
/// p-value is exact-in-distribution parametric Monte Carlo.
pub fn ks_test(
    data: &[f64],
    null_cdf: impl Fn(f64) -> f64,
    m: usize,
    seed: u64,
) -> Result<BaselineResult> {
    let u = pit_sorted(data, null_cdf)?;
    let d = ks_statistic(&u);
    let sims = edf_mc_sims(data.len(), m, seed, ks_statistic);
    Ok(BaselineResult {
        name: "ks",
        statistic: d,
        p_value: mc_upper_p(d, &sims),
        method: PValueMethod::MonteCarlo,
    })
}

pub fn cvm_test(
    data: &[f64],
    null_cdf: impl Fn(f64) -> f64,
    m: usize,
    seed: u64,
) -> Result<BaselineResult> {
    let u = pit_sorted(data, null_cdf)?;
    let w2 = cvm_statistic(&u);
    let sims = edf_mc_sims(data.len(), m, seed, cvm_statistic);
    Ok(BaselineResult {
        name: "cvm",
        statistic: w2,
        p_value: mc_upper_p(w2, &sims),
        method: PValueMethod::MonteCarlo,
    })
}

pub fn ad_test(
    data: &[f64],
    null_cdf: impl Fn(f64) -> f64,
    m: usize,
    seed: u64,
) -> Result<BaselineResult> {
    let u = pit_sorted(data, null_cdf)?;
    let a2 = ad_statistic(&u)?;
    let sims = edf_mc_sims(data.len(), m, seed, |u| {
        ad_statistic(u).expect("uniform draws stay inside (0, 1)")
    });
    Ok(BaselineResult {
        name: "ad",
        statistic: a2,
        p_value: mc_upper_p(a2, &sims),
        method: PValueMethod::MonteCarlo,
    })
}

/// Upper-alpha Monte Carlo critical values of (D, W^2, A^2) under the
/// null, for threshold-based power studies.
pub fn edf_critical_values(n: usize, alpha: f64, m: usize, seed: u64) -> Result<(f64, f64, f64)> {
    if n == 0 || m < 100 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(
            "edf critical values need n >= 1, m >= 100, alpha in (0, 1)".into(),
        ));
    }
    let sims: Vec<(f64, f64, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            let u = uniform_sorted(n, &mut rng);
            (
                ks_statistic(&u),
                cvm_statistic(&u),
                ad_statistic(&u).expect("open-interval uniforms"),
            )
        })
        .collect();
    let idx = (((1.0 - alpha) * m as f64).ceil() as usize).max(1) - 1;
    let pick = |f: fn(&(f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = sims.iter().map(f).collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v[idx.min(m - 1)]
    };
    Ok((pick(|s| s.0), pick(|s| s.1), pick(|s| s.2)))
}

/// Paired (on differences, df = n-1) or pooled two-sample (df = n1+n2-2)
/// t test with a two-sided asymptotic p-value.
pub fn t_tests(x: &[f64], y: &[f64], paired: bool) -> Result<BaselineResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidParameter("t test needs n >= 2 per group".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t test input"));
    }
    let (t, df, name) = if paired {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let n = x.len() as f64;
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        if var == 0.0 {
            return Err(Error::DegenerateData("paired differences have zero variance".into()));
        }
        (mean / (var / n).sqrt(), n - 1.0, "paired-t")
    } else {
        let (n1, n2) = (x.len() as f64, y.len() as f64);
        let m1 = x.iter().sum::<f64>() / n1;
        let m2 = y.iter().sum::<f64>() / n2;
        let ss1 = x.iter().map(|v| (v - m1) * (v - m1)).sum::<f64>();
        let ss2 = y.iter().map(|v| (v - m2) * (v - m2)).sum::<f64>();
        let pooled = (ss1 + ss2) / (n1 + n2 - 2.0);
        if pooled == 0.0 {
            return Err(Error::DegenerateData("pooled variance is zero".into()));
        }
        let se = (pooled * (1.0 / n1 + 1.0 / n2)).sqrt();
        ((m1 - m2) / se, n1 + n2 - 2.0, "two-sample-t")
    };
    let p = 2.0 * (1.0 - student_t_cdf(t.abs(), df));
    Ok(BaselineResult {
        name,
        statistic: t,
        p_value: p.clamp(0.0, 1.0),
        method: PValueMethod::Asymptotic,
    })
}

/// Known-parameter likelihood ratio (Neyman-Pearson) test on the paired
/// difference mean: z = sqrt(n) dbar / sigma_d, two-sided at the design
/// level. `eta` is the alternative the oracle is aimed at; it is recorded
/// but the two-sided rejection region does not depend on its sign.
pub fn lr_simple_test(x: &[f64], y: &[f64], _eta: f64, sigma_d: f64) -> Result<BaselineResult> {
    if !(sigma_d.is_finite() && sigma_d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_d must be > 0, got {sigma_d}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("lr test data"));
    }
    let n = x.len() as f64;
    let dbar = x.iter().zip(y).map(|(a, b)| a - b).sum::<f64>() / n;
    let z = n.sqrt() * dbar / sigma_d;
    let p = 2.0 * (1.0 - std_normal_cdf(z.abs()));
    Ok(BaselineResult {
        name: "lr",
        statistic: z,
        p_value: p.clamp(0.0, 1.0),
        method: PValueMethod::Asymptotic,
    })
}

/// Likelihood ratio test of a normal mean vector with unknown covariance:
/// -2 ln lambda = n ln(|S0|/|S|) with ML covariances about mu0 and xbar,
/// referred to chi-square with p degrees of freedom.
pub fn lr_mvn_mean_test(data: &Sample, mu0: &DVector<f64>) -> Result<BaselineResult> {
    let (n, p) = (data.n(), data.dim());
    if n <= p {
        return Err(Error::InvalidParameter(format!(
            "lr mean-vector test needs n > p, got n={n}, p={p}"
        )));
    }
    if mu0.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: mu0.len(),
        });
    }
    let xbar = data.mean_vector();
    let mut s0 = nalgebra::DMatrix::zeros(p, p);
    let mut s = nalgebra::DMatrix::zeros(p, p);
    for i in 0..n {
        let row = data.row_vector(i);
        let d0 = &row - mu0;
        let d = &row - &xbar;
        s0.syger(1.0, &d0, &d0, 1.0);
        s.syger(1.0, &d, &d, 1.0);
    }
    s0 /= n as f64;
    s /= n as f64;
    let log_det = |m: &nalgebra::DMatrix<f64>| -> Result<f64> {
        let mut sym = m.clone();
        for i in 0..p {
            for j in (i + 1)..p {
                sym[(i, j)] = sym[(j, i)];
            }
        }
        let chol = nalgebra::Cholesky::new(sym)
            .ok_or_else(|| Error::DegenerateData("singular ML covariance".into()))?;
        Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    };
    let stat = (n as f64) * (log_det(&s0)? - log_det(&s)?);
    let chi2 = statrs::distribution::ChiSquared::new(p as f64)
        .expect("p >= 1");
    let p_value = (1.0 - chi2.cdf(stat.max(0.0))).clamp(0.0, 1.0);
    Ok(BaselineResult {
        name: "lr-mvn",
        statistic: stat.max(0.0),
        p_value,
        method: PValueMethod::Asymptotic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DensitySpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ks_single_point() {
        let r = ks_test(&[0.0], |_| 0.5, 199, 0).unwrap();
        assert_relative_eq!(r.statistic, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ks_at_exact_quantiles() {
        // Data at (i - 0.5)/n for n = 10 gives D = 0.05.
        let n = 10;
        let data: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let r = ks_test(&data, |x| x.clamp(0.0, 1.0), 199, 0).unwrap();
        assert_relative_eq!(r.statistic, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn ks_shifted_sample_rejects() {
        let spec = DensitySpec::normal(3.0, 1.0).unwrap();
        let mut rng = crate::rng::replicate_rng(31, 0);
        let data = spec.sample(200, &mut rng).column(0);
        let null = DensitySpec::normal(0.0, 1.0).unwrap();
        let r = ks_test(&data, |x| null.cdf(x).unwrap(), 1999, 1).unwrap();
        assert!(r.p_value < 0.001, "p = {}", r.p_value);
    }

    #[test]
    fn cvm_values() {
        let r = cvm_test(&[0.0], |_| 0.5, 199, 0).unwrap();
        assert_relative_eq!(r.statistic, 1.0 / 12.0, epsilon = 1e-15);

        let n = 8;
        let data: Vec<f64> = (1..=n).map(|i| (2.0 * i as f64 - 1.0) / (2.0 * n as f64)).collect();
        let r = cvm_test(&data, |x| x.clamp(0.0, 1.0), 199, 0).unwrap();
        assert_relative_eq!(r.statistic, 1.0 / (12.0 * n as f64), epsilon = 1e-12);
    }

    #[test]
    fn ad_single_point_and_boundary() {
        let r = ad_test(&[0.0], |_| 0.5, 199, 0).unwrap();
        assert_relative_eq!(r.statistic, -1.0 + 2.0 * 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(r.statistic, 0.386294, epsilon = 1e-6);

        let e = ad_test(&[0.0, 1.0], |x| x.clamp(0.0, 1.0), 199, 0).unwrap_err();
        assert!(matches!(e, Error::CdfBoundary { .. }));
    }

    #[test]
    fn non_monotone_cdf_detected() {
        let e = ks_test(&[0.0, 1.0], |x| if x > 0.5 { 0.2 } else { 0.8 }, 199, 0).unwrap_err();
        assert!(matches!(e, Error::NonMonotoneCdf(_)));
    }

    #[test]
    fn t_test_examples() {
        assert!(t_tests(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], true).is_err());
        let r = t_tests(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0], true).unwrap();
        assert_relative_eq!(r.statistic, 0.0, epsilon = 1e-15);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_sample_t_power_regime() {
        // Means 0 vs 0.5, sd 1, n = 394 per group: reject well over 80%.
        let a = DensitySpec::normal(0.0, 1.0).unwrap();
        let b = DensitySpec::normal(0.5, 1.0).unwrap();
        let mut rejections = 0;
        for k in 0..200 {
            let mut rng= crate::rng::replicate_rng(32, k);
            let x = a.sample(394, &mut rng).column(0);
            let y = b.sample(394, &mut rng).column(0);
            if t_tests(&x, &y, false).unwrap().p_value < 0.05 {
                rejections += 1;
            }
        }
        assert!(rejections >= 160, "{rejections} of 200");
    }

    #[test]
    fn lr_simple_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = lr_simple_test(&x, &x, 0.5, 1.0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        // dbar = 1.96 sigma_d / sqrt(n) lands at p ~ 0.05.
        let n = 16usize;
        let d = 1.96 / (n as f64).sqrt();
        let x: Vec<f64> = (0..n).map(|i| i as f64 + d).collect();
        let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let r = lr_simple_test(&x, &y, 0.8, 1.0).unwrap();
        assert!((r.p_value - 0.05).abs() < 0.001, "p = {}", r.p_value);

        assert!(lr_simple_test(&x, &y, 0.8, 0.0).is_err());
    }

    #[test]
    fn lr_mvn_at_truth_is_zero() {
        let data = Sample::from_rows(&[
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![2.0, 0.5],
            vec![-2.0, -0.5],
        ])
        .unwrap();
        let r = lr_mvn_mean_test(&data, &data.mean_vector()).unwrap();
        assert_relative_eq!(r.statistic, 0.0, epsilon = 1e-10);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn lr_mvn_far_alternative() {
        let spec = DensitySpec::std_normal(2);
        let mut rng = crate::rng::replicate_rng(33, 0);
        let data = spec.sample(52, &mut rng);
        let r = lr_mvn_mean_test(&data, &DVector::from_vec(vec![5.0, -5.0])).unwrap();
        assert!(r.p_value < 0.001);
    }

    #[test]
    fn lr_mvn_chi2_calibration() {
        // Type I at the truth: ~0.05 over 2000 simulations.
        let spec = DensitySpec::std_normal(2);
        let mu0 = DVector::zeros(2);
        let mut rejections = 0;
        for k in 0..2000u64 {
            let mut rng = crate::rng::replicate_rng(34, k);
            let data = spec.sample(52, &mut rng);
            if lr_mvn_mean_test(&data, &mu0).unwrap().p_value <= 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / 2000.0;
        assert!((rate - 0.05).abs() < 0.02, "type I = {rate}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Strictly increasing transforms applied jointly to data and null
        /// cdf leave the statistics unchanged.
        #[test]
        fn pit_invariance(seed in 0u64..500) {
            let spec = DensitySpec::normal(0.0, 1.0).unwrap();
            let mut rng = crate::rng::replicate_rng(seed, 35);
            let data = spec.sample(30, &mut rng).column(0);
            let cdf = |x: f64| spec.cdf(x).unwrap();
            let u_direct = pit_sorted(&data, cdf).unwrap();
            // Transform through t(x) = exp(x); testing exp(X) against the
            // pushforward cdf F0(ln y).
            let data_t: Vec<f64> = data.iter().map(|x| x.exp()).collect();
            let u_transformed = pit_sorted(&data_t, |y: f64| spec.cdf(y.ln()).unwrap()).unwrap();
            for (a, b) in u_direct.iter().zip(&u_transformed) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((ks_statistic(&u_direct) - ks_statistic(&u_transformed)).abs() < 1e-12);
            prop_assert!((cvm_statistic(&u_direct) - cvm_statistic(&u_transformed)).abs() < 1e-12);
            prop_assert!(
                (ad_statistic(&u_direct).unwrap() - ad_statistic(&u_transformed).unwrap()).abs() < 1e-12
            );
        }

        /// t(ax + b, ay + b) = t(x, y) for a > 0.
        #[test]
        fn t_affine_invariance(a in 0.01f64..50.0, b in -100.0f64..100.0, seed in 0u64..500) {
            let spec = DensitySpec::normal(0.0, 1.0).unwrap();
            let mut rng = crate::rng::replicate_rng(seed, 36);
            let x = spec.sample(12, &mut rng).column(0);
            let y = spec.sample(12, &mut rng).column(0);
            let t0 = t_tests(&x, &y, true).unwrap().statistic;
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let yt: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let t1 = t_tests(&xt, &yt, true).unwrap().statistic;
            prop_assert!((t0 - t1).abs() < 1e-10 * t0.abs().max(1.0));
        }
    }
}
