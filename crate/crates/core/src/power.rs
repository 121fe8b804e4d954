//! Scenario-driven size and power simulation harness.
//!
//! A scenario fixes a data generator, an accept-reject test flavor, a set
//! of baseline tests, and calibration settings. Null thresholds are
//! computed once per scenario (the null is scenario-fixed) and reused
//! across replications; every replicate and the null build derive their
//! RNG streams from the scenario seed, so results do not depend on worker
//! count or execution order.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::ar::{
    gof_statistic, group_mean_equality_statistic, mean_vector_statistic, ArStatistic,
};
use crate::baselines::{
    cvm_statistic, edf_critical_values, ks_statistic, lr_mvn_mean_test, lr_simple_test,
    pit_sorted, t_tests,
};
use crate::distributions::{CovMatrix, DensitySpec};
use crate::error::{Error, Result};
use crate::mc::{build_null, mc_p_value};
use crate::rng::{derive_seed, replicate_rng};
use crate::sample::Sample;

/// Which accept-reject statistic a scenario runs.
#[derive(Debug, Clone)]
pub enum ArFlavor {
    Gof,
    MeanEquality { independent: bool },
    MeanVector {
        mu0: DVector<f64>,
        population_sigma: Option<CovMatrix>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Ks,
    Cvm,
    Ad,
    PairedT,
    TwoSampleT,
    LrSimple,
    LrMvnMean,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ks => "ks",
            Self::Cvm => "cvm",
            Self::Ad => "ad",
            Self::PairedT => "paired-t",
            Self::TwoSampleT => "two-sample-t",
            Self::LrSimple => "lr",
            Self::LrMvnMean => "lr-mvn",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub family: String,
    pub n: usize,
    /// Distribution the evaluated data is drawn from.
    pub data_gen: DensitySpec,
    /// Data distribution under the null, used for calibration. For
    /// goodness-of-fit scenarios this is also the tested null density.
    pub null_gen: DensitySpec,
    pub ar: ArFlavor,
    pub ar_label: &'static str,
    pub baselines: Vec<BaselineKind>,
    /// Known difference-score standard deviation for the simple LR oracle.
    pub lr_sigma_d: Option<f64>,
    /// Figure axes this scenario contributes to, e.g. ("sigma", 3.0).
    pub axes: Vec<(String, f64)>,
    pub alternative: String,
    pub replications: usize,
    pub alpha: f64,
    pub mc_reps: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::InvalidParameter(format!(
                "scenario {} needs >= 100 replications, got {}",
                self.name, self.replications
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "scenario {}: alpha {} outside (0, 1)",
                self.name, self.alpha
            )));
        }
        if self.mc_reps < 100 {
            return Err(Error::InvalidParameter(format!(
                "scenario {}: M {} below 100",
                self.name, self.mc_reps
            )));
        }
        for (axis, value) in &self.axes {
            if axis == "correlation" && !(-0.99..=0.99).contains(value) {
                return Err(Error::InvalidParameter(format!(
                    "scenario {}: correlation {} outside [-0.99, 0.99]",
                    self.name, value
                )));
            }
        }
        let needs_univariate_cdf = self
            .baselines
            .iter()
            .any(|b| matches!(b, BaselineKind::Ks | BaselineKind::Cvm | BaselineKind::Ad));
        if needs_univariate_cdf && self.null_gen.dim() != 1 {
            return Err(Error::InvalidParameter(format!(
                "scenario {}: edf baselines need a univariate null",
                self.name
            )));
        }
        Ok(())
    }

    fn ar_statistic(&self, data: &Sample) -> Result<ArStatistic> {
        match &self.ar {
            ArFlavor::Gof => gof_statistic(data, &self.null_gen),
            ArFlavor::MeanEquality { independent } => {
                group_mean_equality_statistic(data, *independent)
            }
            ArFlavor::MeanVector {
                mu0,
                population_sigma,
            } => mean_vector_statistic(data, mu0, population_sigma.as_ref()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestPower {
    pub test: String,
    pub power: f64,
    pub se: f64,
    pub rejections: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerResult {
    pub scenario: String,
    pub family: String,
    pub n: usize,
    pub axes: Vec<(String, f64)>,
    pub alternative: String,
    pub alpha: f64,
    pub replications: usize,
    pub mc_reps: usize,
    pub seed: u64,
    pub runtime_s: f64,
    pub tests: Vec<TestPower>,
}

/// Run one scenario: calibrate thresholds once, then count rejections
/// over fresh data replicates.
pub fn run_scenario(s: &Scenario) -> Result<PowerResult> {
    s.validate()?;
    let start = Instant::now();
    let null_seed = derive_seed(s.seed, 1);
    let data_seed = derive_seed(s.seed, 2);
    let edf_seed = derive_seed(s.seed, 3);

    let null = build_null(
        |rng| s.null_gen.sample(s.n, rng),
        |sample| s.ar_statistic(sample).map(|st| st.value()),
        s.mc_reps,
        null_seed,
        format!("{} null", s.name),
    )
    .map_err(|e| scenario_err(&s.name, e))?;

    let needs_edf = s
        .baselines
        .iter()
        .any(|b| matches!(b, BaselineKind::Ks | BaselineKind::Cvm | BaselineKind::Ad));
    let edf_crit = if needs_edf {
        Some(edf_critical_values(s.n, s.alpha, s.mc_reps, edf_seed)?)
    } else {
        None
    };

    let rejection_rows: Vec<Result<Vec<bool>>> = (0..s.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(data_seed, r as u64);
            let data = s.data_gen.sample(s.n, &mut rng);
            let mut row = Vec::with_capacity(1 + s.baselines.len());
            // Significance against the scenario-fixed null set. The mc
            // p-value rule stays correctly conservative when the null
            // statistic has an atom (the mean tests put mass at exactly
            // one), where a raw quantile threshold would reject everything.
            row.push(mc_p_value(&null, s.ar_statistic(&data)?.value()) <= s.alpha);
            for b in &s.baselines {
                row.push(baseline_rejects(s, *b, &data, edf_crit)?);
            }
            Ok(row)
        })
        .collect();

    let mut counts = vec![0usize; 1 + s.baselines.len()];
    for (r, row) in rejection_rows.into_iter().enumerate() {
        let row = row.map_err(|e| {
            scenario_err(
                &s.name,
                Error::Replicate {
                    index: r,
                    source: Box::new(e),
                },
            )
        })?;
        for (c, hit) in counts.iter_mut().zip(row) {
            *c += hit as usize;
        }
    }

    let labels: Vec<String> = std::iter::once(s.ar_label.to_string())
        .chain(s.baselines.iter().map(|b| b.label().to_string()))
        .collect();
    let reps = s.replications as f64;
    let tests = labels
        .into_iter()
        .zip(counts)
        .map(|(test, rejections)| {
            let power = rejections as f64 / reps;
            TestPower {
                test,
                power,
                se: (power * (1.0 - power) / reps).sqrt(),
                rejections,
            }
        })
        .collect();

    Ok(PowerResult {
        scenario: s.name.clone(),
        family: s.family.clone(),
        n: s.n,
        axes: s.axes.clone(),
        alternative: s.alternative.clone(),
        alpha: s.alpha,
        replications: s.replications,
        mc_reps: s.mc_reps,
        seed: s.seed,
        runtime_s: start.elapsed().as_secs_f64(),
        tests,
    })
}

fn scenario_err(name: &str, e: Error) -> Error {
    Error::InvalidParameter(format!("scenario {name}: {e}"))
}

fn baseline_rejects(
    s: &Scenario,
    kind: BaselineKind,
    data: &Sample,
    edf_crit: Option<(f64, f64, f64)>,
) -> Result<bool> {
    Ok(match kind {
        BaselineKind::Ks | BaselineKind::Cvm | BaselineKind::Ad => {
            let (ks_c, cvm_c, ad_c) = edf_crit.expect("edf thresholds prepared");
            let xs = data.column(0);
            let u = pit_sorted(&xs, |x| {
                self_cdf(&s.null_gen, x)
            })?;
            match kind {
                BaselineKind::Ks => ks_statistic(&u) >= ks_c,
                BaselineKind::Cvm => cvm_statistic(&u) >= cvm_c,
                // A data point where the null cdf saturates to 0 or 1
                // sends the Anderson-Darling statistic to infinity.
                _ => match crate::baselines::ad_statistic(&u) {
                    Ok(a2) => a2 >= ad_c,
                    Err(Error::CdfBoundary { .. }) => true,
                    Err(e) => return Err(e),
                },
            }
        }
        BaselineKind::PairedT => {
            t_tests(&data.column(0), &data.column(1), true)?.p_value <= s.alpha
        }
        BaselineKind::TwoSampleT => {
            t_tests(&data.column(0), &data.column(1), false)?.p_value <= s.alpha
        }
        BaselineKind::LrSimple => {
            let sigma_d = s.lr_sigma_d.ok_or_else(|| {
                Error::InvalidParameter(format!("scenario {} lacks lr_sigma_d", s.name))
            })?;
            lr_simple_test(&data.column(0), &data.column(1), 0.0, sigma_d)?.p_value <= s.alpha
        }
        BaselineKind::LrMvnMean => {
            let mu0 = match &s.ar {
                ArFlavor::MeanVector { mu0, .. } => mu0.clone(),
                _ => DVector::from_element(data.dim(), data.grand_mean()),
            };
            lr_mvn_mean_test(data, &mu0)?.p_value <= s.alpha
        }
    })
}

fn self_cdf(spec: &DensitySpec, x: f64) -> f64 {
    spec.cdf(x).expect("univariate null for edf baselines")
}

fn corr2(rho: f64) -> CovMatrix {
    CovMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))
        .expect("valid correlation matrix")
}

const DEFAULT_ALPHA: f64 = 0.05;
const DEFAULT_REPS: usize = 1000;
const DEFAULT_MC_REPS: usize = 999;
const SEED_BASE: u64 = 0x41525445;

/// The full builtin grid: correlated and independent group-mean studies,
/// the fixed mean-vector study with population and sample covariance, the
/// t scale-parameter goodness-of-fit study, and univariate and
/// trivariate normality studies.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    let correlations = [-0.9, -0.5, 0.0, 0.5, 0.9];
    let etas = [0.0, 0.4, 0.6, 0.8];

    // Correlated group means, n = 52.
    for &rho in &correlations {
        for &eta in &etas {
            let cov = corr2(rho);
            out.push(Scenario {
                name: format!("corr-means_rho{rho:+.1}_eta{eta:.1}"),
                family: "corr-means".into(),
                n: 52,
                data_gen: DensitySpec::mv_normal(DVector::from_vec(vec![eta, 0.0]), cov.clone())
                    .expect("valid"),
                null_gen: DensitySpec::mv_normal(DVector::zeros(2), cov).expect("valid"),
                ar: ArFlavor::MeanEquality { independent: false },
                ar_label: "ar",
                baselines: vec![
                    BaselineKind::PairedT,
                    BaselineKind::TwoSampleT,
                    BaselineKind::LrSimple,
                ],
                lr_sigma_d: Some((2.0 - 2.0 * rho).sqrt()),
                axes: vec![("correlation".into(), rho), ("eta".into(), eta)],
                alternative: format!("eta={eta:.1}"),
                replications: DEFAULT_REPS,
                alpha: DEFAULT_ALPHA,
                mc_reps: DEFAULT_MC_REPS,
                seed: 0,
            });
        }
    }

    // Independent group means over three sample sizes.
    for &n in &[26usize, 64, 394] {
        for &eta in &[0.0, 0.2, 0.4, 0.6, 0.8] {
            out.push(Scenario {
                name: format!("indep-means_n{n}_eta{eta:.1}"),
                family: "indep-means".into(),
                n,
                data_gen: DensitySpec::mv_normal(
                    DVector::from_vec(vec![eta, 0.0]),
                    CovMatrix::identity(2),
                )
                .expect("valid"),
                null_gen: DensitySpec::std_normal(2),
                ar: ArFlavor::MeanEquality { independent: true },
                ar_label: "ar",
                baselines: vec![BaselineKind::TwoSampleT, BaselineKind::LrSimple],
                lr_sigma_d: Some(2f64.sqrt()),
                axes: vec![("eta".into(), eta)],
                alternative: format!("eta={eta:.1}"),
                replications: DEFAULT_REPS,
                alpha: DEFAULT_ALPHA,
                mc_reps: DEFAULT_MC_REPS,
                seed: 0,
            });
        }
    }

    // Fixed mean-vector test, population vs sample covariance.
    for &rho in &correlations {
        for &eta in &etas {
            for (variant, pop) in [("pop", true), ("smp", false)] {
                let cov = corr2(rho);
                out.push(Scenario {
                    name: format!("mean-vector_rho{rho:+.1}_eta{eta:.1}_{variant}"),
                    family: "mean-vector".into(),
                    n: 52,
                    data_gen: DensitySpec::mv_normal(
                        DVector::from_vec(vec![eta, eta]),
                        cov.clone(),
                    )
                    .expect("valid"),
                    null_gen: DensitySpec::mv_normal(DVector::zeros(2), cov.clone())
                        .expect("valid"),
                    ar: ArFlavor::MeanVector {
                        mu0: DVector::zeros(2),
                        population_sigma: pop.then_some(cov),
                    },
                    ar_label: if pop { "ar-pop" } else { "ar-smp" },
                    baselines: vec![BaselineKind::LrMvnMean],
                    lr_sigma_d: None,
                    axes: vec![("correlation".into(), rho), ("eta".into(), eta)],
                    alternative: format!("eta={eta:.1}"),
                    replications: DEFAULT_REPS,
                    alpha: DEFAULT_ALPHA,
                    mc_reps: DEFAULT_MC_REPS,
                    seed: 0,
                });
            }
        }
    }

    // Scale-parameter goodness of fit around the t(3, 0, 2.5) null.
    let sigma0 = 2.5;
    for &n in &[20usize, 30, 50] {
        for &sigma in &[1.5, 2.0, 2.25, 2.5, 2.75, 3.0, 4.0] {
            out.push(Scenario {
                name: format!("scale-gof_n{n}_sigma{sigma:.2}"),
                family: "scale-gof".into(),
                n,
                data_gen: DensitySpec::loc_scale_t(3.0, 0.0, sigma).expect("valid"),
                null_gen: DensitySpec::loc_scale_t(3.0, 0.0, sigma0).expect("valid"),
                ar: ArFlavor::Gof,
                ar_label: "ar",
                baselines: vec![BaselineKind::Ks, BaselineKind::Cvm, BaselineKind::Ad],
                lr_sigma_d: None,
                axes: vec![("sigma".into(), sigma)],
                alternative: format!("sigma={sigma:.2}"),
                replications: DEFAULT_REPS,
                alpha: DEFAULT_ALPHA,
                mc_reps: DEFAULT_MC_REPS,
                seed: 0,
            });
        }
    }

    // Normality studies share the same alternative menu.
    for &n in &[20usize, 30, 50] {
        for (label, univ) in univariate_alternatives() {
            out.push(Scenario {
                name: format!("univ-normality_n{n}_{label}"),
                family: "univ-normality".into(),
                n,
                data_gen: univ,
                null_gen: DensitySpec::std_normal(1),
                ar: ArFlavor::Gof,
                ar_label: "ar",
                baselines: vec![BaselineKind::Ks, BaselineKind::Cvm, BaselineKind::Ad],
                lr_sigma_d: None,
                axes: vec![],
                alternative: label.into(),
                replications: DEFAULT_REPS,
                alpha: DEFAULT_ALPHA,
                mc_reps: DEFAULT_MC_REPS,
                seed: 0,
            });
        }
        for (label, alt) in multivariate_alternatives() {
            out.push(Scenario {
                name: format!("multiv-normality_n{n}_{label}"),
                family: "multiv-normality".into(),
                n,
                data_gen: alt,
                null_gen: DensitySpec::std_normal(3),
                ar: ArFlavor::Gof,
                ar_label: "ar",
                baselines: vec![],
                lr_sigma_d: None,
                axes: vec![],
                alternative: label.into(),
                replications: DEFAULT_REPS,
                alpha: DEFAULT_ALPHA,
                mc_reps: DEFAULT_MC_REPS,
                seed: 0,
            });
        }
    }

    for (i, s) in out.iter_mut().enumerate() {
        s.seed = derive_seed(SEED_BASE, i as u64);
    }
    out
}

fn univariate_alternatives() -> Vec<(&'static str, DensitySpec)> {
    vec![
        ("normal", DensitySpec::std_normal(1)),
        ("t2", DensitySpec::loc_scale_t(2.0, 0.0, 1.0).expect("valid")),
        (
            "mixture",
            DensitySpec::normal_mixture2(
                0.5,
                DVector::from_vec(vec![0.0]),
                DVector::from_vec(vec![3.0]),
                CovMatrix::identity(1),
            )
            .expect("valid"),
        ),
        ("logistic", DensitySpec::logistic(0.0, 1.0, 1).expect("valid")),
        ("uniform", DensitySpec::uniform(0.0, 1.0, 1).expect("valid")),
    ]
}

fn multivariate_alternatives() -> Vec<(&'static str, DensitySpec)> {
    vec![
        ("normal", DensitySpec::std_normal(3)),
        (
            "t2",
            DensitySpec::mv_student_t(2.0, DVector::zeros(3), CovMatrix::identity(3))
                .expect("valid"),
        ),
        (
            "mixture",
            DensitySpec::normal_mixture2(
                0.5,
                DVector::zeros(3),
                DVector::from_element(3, 3.0),
                CovMatrix::identity(3),
            )
            .expect("valid"),
        ),
        ("logistic", DensitySpec::logistic(0.0, 1.0, 3).expect("valid")),
        ("uniform", DensitySpec::uniform(0.0, 1.0, 3).expect("valid")),
    ]
}

/// Distinct builtin scenario family names.
pub fn builtin_families() -> Vec<String> {
    let mut families = Vec::new();
    for s in builtin_scenarios() {
        if !families.contains(&s.family) {
            families.push(s.family.clone());
        }
    }
    families
}

/// Write summary CSV + JSON, one plot-ready long CSV per family, and one
/// CSV per scenario-test pair.
pub fn export_results(results: &[PowerResult], dir: &Path) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::EmptyInput("power results"));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut families: Vec<&str> = Vec::new();
    for r in results {
        if !families.contains(&r.family.as_str()) {
            families.push(&r.family);
        }
    }

    // summary.csv: one row per scenario-test, axes packed as key=value.
    let path = dir.join("summary.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(
        f,
        "scenario,family,n,axes,alternative,test,power,se,replications,alpha"
    )?;
    for r in results {
        let axes = r
            .axes
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        for t in &r.tests {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.family,
                r.n,
                axes,
                r.alternative,
                t.test,
                t.power,
                t.se,
                r.replications,
                r.alpha
            )?;
        }
    }
    written.push(path);

    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(results)
        .map_err(|e| Error::InvalidParameter(format!("json export: {e}")))?;
    std::fs::write(&path, json + "\n")?;
    written.push(path);

    // Per-family long CSV mirroring the figure axes; families with no
    // numeric axis carry the alternative label instead.
    for family in &families {
        let members: Vec<&PowerResult> =
            results.iter().filter(|r| r.family == *family).collect();
        let axis_names: Vec<String> = members[0].axes.iter().map(|(k, _)| k.clone()).collect();
        let path = dir.join(format!("{family}.csv"));
        let mut f = std::fs::File::create(&path)?;
        let mut header = String::new();
        for a in &axis_names {
            header.push_str(a);
            header.push(',');
        }
        let label_col = axis_names.is_empty();
        if label_col {
            writeln!(f, "{header}n,alternative,test,power,se")?;
        } else {
            writeln!(f, "{header}n,test,power,se")?;
        }
        for r in members {
            for t in &r.tests {
                let mut row = String::new();
                for (_, v) in &r.axes {
                    row.push_str(&format!("{v},"));
                }
                if label_col {
                    writeln!(
                        f,
                        "{row}{},{},{},{},{}",
                        r.n, r.alternative, t.test, t.power, t.se
                    )?;
                } else {
                    writeln!(f, "{row}{},{},{},{}", r.n, t.test, t.power, t.se)?;
                }
            }
        }
        written.push(path);
    }

    // One CSV per scenario-test pair.
    for r in results {
        for t in &r.tests {
            let path = dir.join(format!("{}__{}.csv", r.scenario, t.test));
            let mut f = std::fs::File::create(&path)?;
            writeln!(f, "scenario,family,n,alternative,test,power,se,replications")?;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{}",
                r.scenario, r.family, r.n, r.alternative, t.test, t.power, t.se, r.replications
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
