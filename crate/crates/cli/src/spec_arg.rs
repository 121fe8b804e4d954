//! Parse `--null family:params` into a density, and square covariance
//! CSV files for `--sigma-file`.

use artest_core::distributions::{CovMatrix, DensitySpec};
use nalgebra::{DMatrix, DVector};

use crate::data::load_csv;
use crate::CliError;

pub const NULL_SPEC_HELP: &str = "\
normal:MU,SIGMA              univariate normal
mvnormal:MU1,...,MUP         multivariate normal (identity covariance, or --sigma-file)
t:DF,MU,SIGMA                location-scale t
logistic:LOC,SCALE[,DIM]     logistic, i.i.d. across DIM coordinates (default 1)
uniform:LO,HI[,DIM]          uniform, i.i.d. across DIM coordinates (default 1)
mixture:W,MU1,MU2,SIGMA      two-component univariate normal mixture, shared SIGMA
shifted-lognormal:MU,SIGMA,SHIFT   log-normal of (x - SHIFT)
shifted-lognormal:fit        fit MU, SIGMA, SHIFT from the data by profile likelihood";

pub enum NullSpecArg {
    Fixed(Box<DensitySpec>),
    FitShiftedLogNormal,
}

fn nums(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("{what}: cannot parse '{t}' as a number")))
        })
        .collect()
}

fn core_err(e: artest_core::Error) -> CliError {
    CliError::input(format!("--null: {e}"))
}

pub fn parse_null_spec(arg: &str, sigma: Option<&CovMatrix>) -> Result<NullSpecArg, CliError> {
    let (family, params) = arg
        .split_once(':')
        .ok_or_else(|| CliError::input(format!("--null must look like FAMILY:PARAMS, got '{arg}'\nfamilies:\n{NULL_SPEC_HELP}")))?;
    let spec = match family {
        "normal" => {
            let v = nums(params, "--null normal")?;
            expect_len(&v, 2, "normal:MU,SIGMA")?;
            DensitySpec::normal(v[0], v[1]).map_err(core_err)?
        }
        "mvnormal" => {
            let v = nums(params, "--null mvnormal")?;
            let mean = DVector::from_vec(v);
            let cov = match sigma {
                Some(c) => c.clone(),
                None => CovMatrix::identity(mean.len()),
            };
            DensitySpec::mv_normal(mean, cov).map_err(core_err)?
        }
        "t" => {
            let v = nums(params, "--null t")?;
            expect_len(&v, 3, "t:DF,MU,SIGMA")?;
            DensitySpec::loc_scale_t(v[0], v[1], v[2]).map_err(core_err)?
        }
        "logistic" => {
            let v = nums(params, "--null logistic")?;
            if v.len() != 2 && v.len() != 3 {
                return Err(CliError::input("--null logistic:LOC,SCALE[,DIM]".into()));
            }
            let dim = if v.len() == 3 { as_dim(v[2])? } else { 1 };
            DensitySpec::logistic(v[0], v[1], dim).map_err(core_err)?
        }
        "uniform" => {
            let v = nums(params, "--null uniform")?;
            if v.len() != 2 && v.len() != 3 {
                return Err(CliError::input("--null uniform:LO,HI[,DIM]".into()));
            }
            let dim = if v.len() == 3 { as_dim(v[2])? } else { 1 };
            DensitySpec::uniform(v[0], v[1], dim).map_err(core_err)?
        }
        "mixture" => {
            let v = nums(params, "--null mixture")?;
            expect_len(&v, 4, "mixture:W,MU1,MU2,SIGMA")?;
            if v[3] <= 0.0 {
                return Err(CliError::input("--null mixture: SIGMA must be > 0".into()));
            }
            DensitySpec::normal_mixture2(
                v[0],
                DVector::from_vec(vec![v[1]]),
                DVector::from_vec(vec![v[2]]),
                CovMatrix::from_diagonal(&[v[3] * v[3]]).map_err(core_err)?,
            )
            .map_err(core_err)?
        }
        "shifted-lognormal" => {
            if params == "fit" {
                return Ok(NullSpecArg::FitShiftedLogNormal);
            }
            let v = nums(params, "--null shifted-lognormal")?;
            expect_len(&v, 3, "shifted-lognormal:MU,SIGMA,SHIFT (or shifted-lognormal:fit)")?;
            DensitySpec::shifted_log_normal(v[0], v[1], v[2]).map_err(core_err)?
        }
        other => {
            return Err(CliError::input(format!(
                "unknown null family '{other}'\nfamilies:\n{NULL_SPEC_HELP}"
            )))
        }
    };
    Ok(NullSpecArg::Fixed(Box::new(spec)))
}

fn expect_len(v: &[f64], n: usize, usage: &str) -> Result<(), CliError> {
    if v.len() != n {
        return Err(CliError::input(format!("--null {usage}")));
    }
    Ok(())
}

fn as_dim(v: f64) -> Result<usize, CliError> {
    if v.fract() == 0.0 && (1.0..=64.0).contains(&v) {
        Ok(v as usize)
    } else {
        Err(CliError::input(format!("dimension must be an integer >= 1, got {v}")))
    }
}

/// Load a p x p covariance from a headered CSV; must be SPD.
pub fn load_sigma_file(path: &str, p: usize) -> Result<CovMatrix, CliError> {
    let data = load_csv(path)?;
    if data.columns.len() != p || data.rows.len() != p {
        return Err(CliError::input(format!(
            "{path}: covariance must be {p}x{p} (header row plus {p} data rows), got {}x{}",
            data.rows.len(),
            data.columns.len()
        )));
    }
    let m = DMatrix::from_fn(p, p, |i, j| data.rows[i][j]);
    CovMatrix::new(m).map_err(|e| CliError::input(format!("{path}: {e}")))
}
