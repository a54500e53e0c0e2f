use std::path::Path;
use std::process::Command;

use rectm::oracle::BurrOracle;

fn rectm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rectm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    rectm(args).status.code().unwrap()
}

/// Data rows of a schema-tagged CSV, keyed by header name.
fn table(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema: rectm."));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn write_sample(path: &Path, xs: &[f64], ys: &[f64]) {
    let mut text = String::from("bmi,charges\n");
    for (x, y) in xs.iter().zip(ys) {
        text.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&["--command", "estimate"]), 2);
    assert_eq!(code(&["--command", "estimate", "--dgp", "burr", "--alpha", "2", "--out", out]), 2);
    assert_eq!(
        code(&["--command", "estimate", "--input", "/nonexistent.csv", "--x-col", "a", "--y-col", "b", "--out", out]),
        2
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "bmi,charges\nx,y\n").unwrap();
    let bad = bad.to_str().unwrap();
    assert_eq!(
        code(&["--command", "estimate", "--input", bad, "--x-col", "bmi", "--y-col", "charges", "--out", out]),
        3
    );
    assert_eq!(
        code(&["--command", "estimate", "--input", bad, "--x-col", "bmi", "--y-col", "nope", "--out", out]),
        2
    );
    assert_eq!(code(&["--no-such-flag"]), 2);
}

#[test]
fn log_transform_and_range_filter() {
    let dir = tempfile::tempdir().unwrap();
    let n = 600;
    // BMI-like covariate between e^2.7 and e^4.1, with a few unusable rows.
    let xs: Vec<f64> = (0..n).map(|i| (2.7 + 1.4 * i as f64 / (n - 1) as f64).exp()).collect();
    let ys: Vec<f64> = (0..n).map(|i| 1.0 + (i % 17) as f64).collect();
    let input = dir.path().join("bmi.csv");
    write_sample(&input, &xs, &ys);
    let mut text = std::fs::read_to_string(&input).unwrap();
    text.push_str("NA,3\n-1,2\n30,\n");
    std::fs::write(&input, text).unwrap();

    let expected = xs.iter().filter(|x| (2.9..=3.9).contains(&x.ln())).count();
    let out = dir.path().join("out");
    let status = code(&[
        "--command", "estimate",
        "--input", input.to_str().unwrap(),
        "--x-col", "bmi", "--y-col", "charges",
        "--log-x", "--x-range", "2.9,3.9",
        "--h", "0.2", "--alpha", "0.9",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(status, 0);
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["n"].as_u64().unwrap() as usize, expected);
    assert_eq!(run["ingest"]["kept"].as_u64().unwrap() as usize, expected);
    assert_eq!(run["ingest"]["rejected"].as_array().unwrap().len(), 3);
    assert_eq!(run["ingest"]["read"].as_u64().unwrap() as usize, n + 3);
    let rows = table(&out.join("estimates.csv"));
    assert_eq!(rows.len(), 20);
    assert!((rows[0]["x"].parse::<f64>().unwrap() - 2.9).abs() < 0.01);
}

#[test]
fn burr_estimates_are_mostly_finite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = code(&[
        "--command", "estimate", "--dgp", "burr", "--n", "2000", "--seed", "3",
        "--h", "0.1", "--alpha", "0.95", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(status, 0);
    let rows = table(&out.join("estimates.csv"));
    assert_eq!(rows.len(), 20);
    let finite = rows
        .iter()
        .filter(|r| r["gamma_tilde"].parse::<f64>().is_ok_and(f64::is_finite))
        .count();
    assert!(finite >= 18, "{finite}");
}

#[test]
fn zeroth_moment_column_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = code(&[
        "--command", "estimate", "--dgp", "burr", "--n", "1000",
        "--h", "0.15", "--alpha", "0.9", "--k", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(status, 0);
    for row in table(&out.join("estimates.csv")) {
        if row["status"] == "ok" {
            assert_eq!(row["rectm_weissman"].parse::<f64>().unwrap(), 1.0);
        }
    }
}

#[test]
fn negative_lambda_row_is_flagged_and_run_succeeds() {
    // Heavy-tailed responses on the left half; on the right half a third of
    // the mass sits far below zero, which drives the bias-reduced index
    // negative and with it the variance plug-in.
    let sample = BurrOracle::default().sample(4000, 8).unwrap();
    let xs: Vec<f64> = sample.iter().map(|(x, _)| x[0]).collect();
    let ys: Vec<f64> = sample
        .iter()
        .enumerate()
        .map(|(i, (x, y))| if x[0] > 0.5 && i % 3 == 0 { -50.0 } else { y })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("mix.csv");
    write_sample(&input, &xs, &ys);
    let out = dir.path().join("out");
    let status = code(&[
        "--command", "ci",
        "--input", input.to_str().unwrap(),
        "--x-col", "bmi", "--y-col", "charges",
        "--h", "0.1", "--alpha", "0.99", "--grid", "0.25,0.75",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(status, 0);
    let rows = table(&out.join("estimates.csv"));
    assert_eq!(rows[0]["ci_status"], "ok");
    assert!(rows[0]["ci_lo"].parse::<f64>().unwrap() < rows[0]["rectm_weissman"].parse::<f64>().unwrap());
    assert_eq!(rows[1]["ci_status"], "negative_lambda22");
    assert!(rows[1]["lambda22_hat"].parse::<f64>().unwrap() < 0.0);
    assert_eq!(rows[1]["ci_lo"], "");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "command = \"estimate\"\ndgp = \"burr\"\nn = 800\nh = 0.2\nalpha = 0.9\ngrid = \"0.2:0.8:4\"\nout = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    assert_eq!(code(&["--config", cfg.to_str().unwrap(), "--grid", "0.5"]), 0);
    let rows = table(&out.join("estimates.csv"));
    assert_eq!(rows.len(), 1);
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["h"], 0.2);
    assert_eq!(run["n"], 800);

    std::fs::write(&cfg, "command = \"estimate\"\nbandwidth = 0.1\n").unwrap();
    assert_eq!(code(&["--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn select_and_simulate_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let sel = dir.path().join("sel");
    assert_eq!(
        code(&["--command", "select", "--dgp", "burr", "--n", "600", "--out", sel.to_str().unwrap()]),
        0
    );
    assert_eq!(table(&sel.join("bandwidth_scores.csv")).len(), 20);
    assert_eq!(table(&sel.join("level_scores.csv")).len(), 20);
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sel.join("selection.json")).unwrap()).unwrap();
    let alpha = s["alpha"].as_f64().unwrap();
    assert!((0.9..=0.96).contains(&alpha));

    let sim = dir.path().join("sim");
    assert_eq!(
        code(&[
            "--command", "simulate", "--n", "300", "--replications", "3",
            "--grid", "0.25,0.75", "--out", sim.to_str().unwrap(),
        ]),
        0
    );
    // 2 points x 4 estimators x 3 replications.
    assert_eq!(table(&sim.join("replications.csv")).len(), 24);
    assert!(sim.join("summary.json").exists());
}
