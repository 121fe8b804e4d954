//! End-to-end tests of the binary: exit codes, JSON contract, CSV
//! handling, and the power front end.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use artest_core::distributions::DensitySpec;
use artest_core::rng::replicate_rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_artest"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("artest-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_csv(dir: &std::path::Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json line in stdout");
    serde_json::from_str(line).expect("valid json")
}

fn normal_csv(dir: &std::path::Path, name: &str, n: usize, seed: u64) -> String {
    let spec = DensitySpec::normal(0.0, 1.0).unwrap();
    let mut rng = replicate_rng(seed, 0);
    let values = spec.sample(n, &mut rng).column(0);
    let mut body = String::from("x\n");
    for v in values {
        body.push_str(&format!("{v}\n"));
    }
    write_csv(dir, name, &body)
}

#[test]
fn gof_json_is_deterministic_and_round_trips() {
    let dir = tmp_dir("gof");
    let data = normal_csv(&dir, "data.csv", 60, 11);
    let out_path = dir.join("report.json");
    let run = || {
        bin()
            .args([
                "gof",
                "--data",
                &data,
                "--null",
                "normal:0,1",
                "--seed",
                "7",
                "--mc-reps",
                "499",
                "--out",
                out_path.to_str().unwrap(),
            ])
            .output()
            .unwrap()
    };
    let a = run();
    let file_a = fs::read(&out_path).unwrap();
    let b = run();
    let file_b = fs::read(&out_path).unwrap();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout, "stdout must be byte-identical");
    assert_eq!(file_a, file_b, "json file must be byte-identical");
    assert_eq!(file_a.last(), Some(&b'\n'), "json is newline-terminated");

    let json = stdout_json(&a);
    for key in ["statistic", "p_value", "ci_lo", "ci_hi", "c", "m", "seed"] {
        assert!(json.get(key).is_some(), "missing field {key}");
    }
    assert_eq!(json["m"], 499);
    assert_eq!(json["seed"], 7);
    let stat = json["statistic"].as_f64().unwrap();
    let p = json["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&stat));
    assert!((1.0 / 500.0..=1.0).contains(&p));
    // The file carries the same report as stdout's json line.
    let file_json: serde_json::Value = serde_json::from_slice(&file_a).unwrap();
    assert_eq!(file_json, json);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn gof_null_data_rarely_rejects_across_seeds() {
    let dir = tmp_dir("gof-size");
    let mut above = 0;
    for seed in 0..100u64 {
        let data = normal_csv(&dir, &format!("d{seed}.csv"), 60, 1000 + seed);
        let out = bin()
            .args([
                "gof", "--data", &data, "--null", "normal:0,1", "--seed",
                &format!("{seed}"), "--mc-reps", "199",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        if stdout_json(&out)["p_value"].as_f64().unwrap() > 0.05 {
            above += 1;
        }
    }
    assert!(above >= 90, "p > 0.05 in only {above} of 100 null datasets");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mean_vec_null_data_rarely_rejects_across_seeds() {
    let dir = tmp_dir("mean-vec-size");
    let spec = DensitySpec::std_normal(2);
    let mut above = 0;
    for seed in 0..100u64 {
        let mut rng = replicate_rng(5000 + seed, 0);
        let s = spec.sample(52, &mut rng);
        let mut body = String::from("a,b\n");
        for i in 0..s.n() {
            body.push_str(&format!("{},{}\n", s.matrix()[(i, 0)], s.matrix()[(i, 1)]));
        }
        let data = write_csv(&dir, &format!("d{seed}.csv"), &body);
        let out = bin()
            .args([
                "mean-vec", "--data", &data, "--mu0", "0,0", "--seed",
                &format!("{seed}"), "--mc-reps", "199",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        if stdout_json(&out)["p_value"].as_f64().unwrap() > 0.05 {
            above += 1;
        }
    }
    assert!(above >= 90, "p > 0.05 in only {above} of 100 null datasets");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn gof_rejects_malformed_input_with_diagnostics() {
    let dir = tmp_dir("gof-bad");
    let data = write_csv(&dir, "bad.csv", "x\n1.0\noops\n2.0\n");
    let out = bin()
        .args(["gof", "--data", &data, "--null", "normal:0,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "stderr: {err}");
    assert!(err.contains("'oops'"), "stderr: {err}");

    // Long-format group data has a text column: rejected the same way.
    let long = write_csv(&dir, "long.csv", "group,value\nA,1.0\nA,2.0\nB,3.0\n");
    let out = bin()
        .args(["mean-eq", "--data", &long, "--independent"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Null dimension mismatch.
    let data = write_csv(&dir, "two.csv", "a,b\n1.0,2.0\n2.0,1.0\n0.5,0.1\n");
    let out = bin()
        .args(["gof", "--data", &data, "--null", "normal:0,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["gof", "--data", &data, "--null", "bogus:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mean_eq_identical_columns_and_degenerate_columns() {
    let dir = tmp_dir("mean-eq");
    let mut body = String::from("a,b\n");
    let spec = DensitySpec::normal(0.0, 1.0).unwrap();
    let mut rng = replicate_rng(21, 0);
    for v in spec.sample(12, &mut rng).column(0) {
        body.push_str(&format!("{v},{v}\n"));
    }
    let data = write_csv(&dir, "ident.csv", &body);
    let out = bin()
        .args(["mean-eq", "--data", &data, "--independent", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = stdout_json(&out);
    assert_eq!(json["statistic"].as_f64().unwrap(), 1.0);
    assert_eq!(json["p_value"].as_f64().unwrap(), 1.0);

    // Same columns without the independent flag: singular covariance.
    let out = bin().args(["mean-eq", "--data", &data]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    // A constant column is a numeric failure.
    let data = write_csv(
        &dir,
        "const.csv",
        "a,b,c\n1.0,2.0,5.0\n2.0,1.0,5.0\n1.5,1.7,5.0\n0.5,2.2,5.0\n",
    );
    let out = bin()
        .args(["mean-eq", "--data", &data, "--independent"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mean_eq_ridge_rescues_singular_covariance() {
    let dir = tmp_dir("ridge");
    // Second column is an exact affine image of the first: the full
    // sample covariance is singular.
    let mut body = String::from("a,b\n");
    let spec = DensitySpec::normal(0.0, 1.0).unwrap();
    let mut rng = replicate_rng(33, 0);
    for v in spec.sample(15, &mut rng).column(0) {
        body.push_str(&format!("{v},{}\n", 2.0 * v + 1.0));
    }
    let data = write_csv(&dir, "collinear.csv", &body);
    let out = bin().args(["mean-eq", "--data", &data]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = bin()
        .args([
            "mean-eq", "--data", &data, "--ridge", "0.5", "--seed", "2", "--mc-reps", "199",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stat = stdout_json(&out)["statistic"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&stat));

    // The ridge is a full-covariance escape hatch only.
    let out = bin()
        .args(["mean-eq", "--data", &data, "--ridge", "0.5", "--independent"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn gof_bandwidth_override_changes_the_statistic() {
    let dir = tmp_dir("bw");
    let data = normal_csv(&dir, "d.csv", 40, 77);
    let run = |extra: &[&str]| {
        let mut args = vec![
            "gof", "--data", &data, "--null", "normal:0,1", "--seed", "4", "--mc-reps", "199",
        ];
        args.extend_from_slice(extra);
        let out = bin().args(&args).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        stdout_json(&out)["statistic"].as_f64().unwrap()
    };
    let default = run(&[]);
    let wide = run(&["--bandwidth", "2.0"]);
    assert_ne!(default, wide);
    assert!((0.0..=1.0).contains(&wide));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mean_eq_handles_unequal_group_sizes_with_independent_flag() {
    let dir = tmp_dir("mean-eq-ragged");
    let data = write_csv(
        &dir,
        "ragged.csv",
        "g1,g2\n1.0,2.0\n1.5,2.5\n0.5,1.5\n1.2,NA\n0.8,NA\n",
    );
    let out = bin()
        .args([
            "mean-eq", "--data", &data, "--independent", "--pairwise", "--seed", "5",
            "--mc-reps", "199",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("g1 (n=5)"), "{text}");
    assert!(text.contains("g2 (n=3)"), "{text}");
    let json = stdout_json(&out);
    assert_eq!(json["pairwise"].as_array().unwrap().len(), 1);
    let diff = json["pairwise"][0]["mean_diff"].as_f64().unwrap();
    assert!((diff - (1.0 - 2.0)).abs() < 1e-12, "diff {diff}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mean_vec_argument_and_sigma_validation() {
    let dir = tmp_dir("mean-vec");
    let data = write_csv(
        &dir,
        "d.csv",
        "a,b\n0.1,0.4\n-0.3,0.2\n0.5,-0.6\n-0.2,0.3\n0.0,-0.1\n0.3,0.2\n",
    );
    let out = bin()
        .args(["mean-vec", "--data", &data, "--mu0", "0,0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let bad_sigma = write_csv(&dir, "sigma.csv", "a,b\n1.0,2.0\n2.0,1.0\n");
    let out = bin()
        .args([
            "mean-vec", "--data", &data, "--mu0", "0,0", "--sigma-file", &bad_sigma,
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let good_sigma = write_csv(&dir, "good.csv", "a,b\n1.0,0.2\n0.2,1.0\n");
    let out = bin()
        .args([
            "mean-vec", "--data", &data, "--mu0", "0,0", "--sigma-file", &good_sigma,
            "--with-lr", "--seed", "9", "--mc-reps", "199",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = stdout_json(&out);
    assert!(json["lr"]["p_value"].as_f64().unwrap() > 0.0);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn power_list_run_and_validation() {
    let out = bin().args(["power", "--list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let families: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  "))
        .collect();
    assert!(families.len() >= 6, "{text}");

    let out = bin()
        .args(["power", "--scenario", "does-not-exist"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("univ-normality"));

    let out = bin()
        .args(["power", "--scenario", "univ-normality", "--reps", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tmp_dir("power");
    let out = bin()
        .args([
            "power", "--scenario", "univ-normality", "--n", "50", "--reps", "100",
            "--mc-reps", "199", "--seed", "1",
            "--out", dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let family_csv = fs::read_to_string(dir.join("univ-normality.csv")).unwrap();
    // Header plus 5 alternatives x 4 tests.
    assert_eq!(family_csv.lines().count(), 21, "{family_csv}");
    assert!(dir.join("summary.json").exists());
    assert!(dir.join("univ-normality_n50_uniform__ar.csv").exists());
    fs::remove_dir_all(&dir).unwrap();
}

/// The group-comparison workflow on data shaped like the intended
/// application: three NA-padded columns of unequal sizes, diagonal
/// covariance, pairwise table.
#[test]
fn group_comparison_workflow_on_synthetic_groups() {
    let dir = tmp_dir("workflow-groups");
    let sizes = [19usize, 21, 17];
    let means = [590.0, 595.0, 1015.0];
    let mut rng = replicate_rng(2718, 0);
    let cols: Vec<Vec<f64>> = sizes
        .iter()
        .zip(means)
        .map(|(&n, m)| {
            DensitySpec::normal(m, 350.0).unwrap().sample(n, &mut rng).column(0)
        })
        .collect();
    let n_max = *sizes.iter().max().unwrap();
    let mut body = String::from("NCI,MCI,mAD\n");
    for i in 0..n_max {
        let cell = |j: usize| {
            cols[j]
                .get(i)
                .map(|v| format!("{v}"))
                .unwrap_or_else(|| "NA".into())
        };
        body.push_str(&format!("{},{},{}\n", cell(0), cell(1), cell(2)));
    }
    let data = write_csv(&dir, "groups.csv", &body);
    let out = bin()
        .args([
            "mean-eq", "--data", &data, "--independent", "--pairwise", "--seed", "8",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = stdout_json(&out);
    // Third group sits far from the first two: overall test rejects.
    assert!(json["p_value"].as_f64().unwrap() < 0.05);
    let pairwise = json["pairwise"].as_array().unwrap();
    assert_eq!(pairwise.len(), 3);
    let row = |name: &str| {
        pairwise
            .iter()
            .find(|r| r["groups"] == name)
            .unwrap_or_else(|| panic!("missing pair {name}"))
    };
    assert!(row("NCI - mAD")["p_adjusted"].as_f64().unwrap() < 0.05);
    assert!(row("MCI - mAD")["p_adjusted"].as_f64().unwrap() < 0.05);
    assert!(row("NCI - MCI")["p_adjusted"].as_f64().unwrap() > 0.2);
    fs::remove_dir_all(&dir).unwrap();
}

/// The fitted-null goodness-of-fit workflow on right-skewed data shaped
/// like reaction times: fit a shifted log-normal, then test the fit.
#[test]
fn fitted_null_workflow_on_synthetic_reaction_times() {
    let dir = tmp_dir("workflow-rt");
    let truth = DensitySpec::shifted_log_normal(6.0, 0.45, 200.0).unwrap();
    let mut rng = replicate_rng(3141, 0);
    let values = truth.sample(366, &mut rng).column(0);
    let mut body = String::from("rt\n");
    for v in values {
        body.push_str(&format!("{v:.3}\n"));
    }
    let data = write_csv(&dir, "rt.csv", &body);
    let out = bin()
        .args([
            "gof", "--data", &data, "--null", "shifted-lognormal:fit", "--seed", "6",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fitted shifted log-normal"), "{text}");
    let json = stdout_json(&out);
    // Well-specified fit: the statistic sits high with an unremarkable p.
    assert!(json["statistic"].as_f64().unwrap() > 0.85, "{json}");
    assert!(json["p_value"].as_f64().unwrap() > 0.1, "{json}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn fetch_docs_names_sources() {
    let out = bin().args(["fetch-docs"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Stat2Data"));
    assert!(text.contains("rtdists"));
}
