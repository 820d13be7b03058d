use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn levymap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levymap")).args(args).output().expect("run levymap")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8")
}

fn write_input(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("levymap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn polar(beta: f64) -> PathBuf {
    write_input(
        &format!("polar-{beta}.json"),
        &format!(
            r#"{{"A":[0.0],"gamma":[0.0],"levy":{{"kind":"polar","atoms":[{{"beta":{beta},"weight":1.0,
            "lambda":[{{"direction":[1.0],"weight":0.5}},{{"direction":[-1.0],"weight":0.5}}]}}]}}}}"#
        ),
    )
}

fn gaussian() -> PathBuf {
    write_input("gaussian.json", r#"{"A":[1.0],"levy":{"kind":"zero"},"gamma":[0.0]}"#)
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn kernel_eval_rows_and_unbounded_origin() {
    let out = levymap(&["kernel", "eval", "--family", "psi", "--alpha", "0", "--s", "0,1,2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("s,f\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], ["0", "inf"]);
    // f is decreasing on (0, ∞)
    let f1: f64 = rows[1][1].parse().unwrap();
    let f2: f64 = rows[2][1].parse().unwrap();
    assert!(f1 > f2 && f2 > 0.0);
}

#[test]
fn kernel_moment_of_uniform_kernel() {
    // p = 1, alpha = 0: g(t) = -ln t, f(s) = e^{-s}, ∫ e^{-2s} ds = 1/2
    let out = levymap(&["kernel", "moment", "--family", "phibar", "--p", "1", "--alpha", "0", "--beta", "2"]);
    assert!(out.status.success());
    assert_eq!(csv_rows(&stdout(&out)), [["2", "0.5", "0"]]);
}

#[test]
fn kernel_invert_closed_form() {
    let out = levymap(&["kernel", "invert", "--family", "psi", "--alpha", "-1", "--s", "0.5"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    let t: f64 = rows[0][1].parse().unwrap();
    assert!((t - std::f64::consts::LN_2).abs() < 1e-9);
    assert_eq!(rows[0][1], "0.693147181");
}

#[test]
fn iterate_psi0_weights_are_gamma_powers() {
    let input = polar(1.5);
    let out = levymap(&["iterate", "--kernel", r#"{"family":"psi","alpha":0}"#, "--input", input.to_str().unwrap(), "--n", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 5);
    let g = statrs::function::gamma::gamma(1.5);
    for (n, row) in rows.iter().enumerate() {
        let (beta, weight) = row[1].split_once(':').unwrap();
        assert_eq!(beta, "1.5");
        let w: f64 = weight.parse().unwrap();
        let expected = g.powi(n as i32 + 1);
        assert!((w - expected).abs() <= 1e-8 * expected, "step {}: {w} vs {expected}", n + 1);
        assert_eq!(row[5], "true");
    }
}

#[test]
fn iterate_lambda_rejects_index_at_alpha() {
    let input = polar(0.5);
    let out = levymap(&[
        "iterate",
        "--kernel",
        r#"{"family":"lambda","q":1,"alpha":0.5}"#,
        "--input",
        input.to_str().unwrap(),
        "--n",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(csv_rows(&stdout(&out)).is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step 1") && err.contains("domain"), "{err}");
}

#[test]
fn iterate_lambda_multiplier_above_alpha() {
    // (β - α)^{-q} = 0.5^{-1} per step
    let input = polar(1.0);
    let out = levymap(&[
        "iterate",
        "--kernel",
        r#"{"family":"lambda","q":1,"alpha":0.5}"#,
        "--input",
        input.to_str().unwrap(),
        "--n",
        "3",
    ]);
    assert!(out.status.success());
    let weights: Vec<String> = csv_rows(&stdout(&out)).iter().map(|r| r[1].clone()).collect();
    assert_eq!(weights, ["1:2", "1:4", "1:8"]);
}

#[test]
fn converge_reports_constant_mass_ratio() {
    let input = polar(1.5);
    let out = levymap(&["converge", "--kernel", r#"{"family":"psi","alpha":0}"#, "--input", input.to_str().unwrap(), "--n", "4"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows[0][2], "");
    for row in &rows[1..] {
        assert_eq!(row[2], "0.886226925");
        assert_eq!(row[5], "0");
    }
}

#[test]
fn classify_weak_mean_zero_triplet() {
    let input = polar(1.5);
    let out = levymap(&["classify", "--alpha", "1", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["member"], Value::Bool(true));

    // a one-sided atom has nonzero weak mean
    let skew = write_input(
        "skew.json",
        r#"{"A":[0.0],"gamma":[0.0],"levy":{"kind":"polar","atoms":[{"beta":1.5,"weight":1.0,
        "lambda":[{"direction":[1.0],"weight":1.0}]}]}}"#,
    );
    let out = levymap(&["classify", "--alpha", "1", "--input", skew.to_str().unwrap()]);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["member"], Value::Bool(false));
}

#[test]
fn json_keys_are_sorted() {
    let input = polar(1.5);
    let out = levymap(&["map", "--kernel", r#"{"family":"psi","alpha":0}"#, "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let report: Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&String> = report.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(text.contains("\n  \""), "pretty printed");
}

#[test]
fn schema_errors_exit_2() {
    let input = polar(1.5);
    let out = levymap(&["map", "--kernel", r#"{"family":"nope"}"#, "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let bad = write_input("bad.json", r#"{"A":[1.0],"levy":{"kind":"zero"},"gamma":[0.0],"extra":1}"#);
    let out = levymap(&["map", "--kernel", "exp", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = levymap(&["kernel", "eval", "--family", "psi", "--s", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = levymap(&["simulate", "--kernel", "exp", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "seed is required");
}

#[test]
fn domain_errors_exit_3() {
    let out = levymap(&["kernel", "eval", "--family", "psi", "--alpha", "0", "--s", "-1"]);
    assert_eq!(out.status.code(), Some(3));

    // a point mass of Lévy measure is outside the range of Ψ_0
    let point = write_input(
        "point.json",
        r#"{"A":[0.0],"gamma":[0.0],"levy":{"kind":"discrete","atoms":[{"x":[1.0],"mass":1.0}]}}"#,
    );
    let out = levymap(&["invertmap", "--kernel", r#"{"family":"psi","alpha":0}"#, "--input", point.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_deterministic() {
    let input = polar(1.5);
    let args = ["simulate", "--kernel", "exp", "--input", input.to_str().unwrap(), "--paths", "2000", "--eps", "0.05", "--seed", "42"];
    let first = levymap(&args);
    let second = levymap(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert!(text.starts_with("path,x1\n"));
    assert_eq!(text.lines().count(), 2001);

    let other = levymap(&["simulate", "--kernel", "exp", "--input", input.to_str().unwrap(), "--paths", "2000", "--eps", "0.05", "--seed", "43"]);
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn simulate_ignores_thread_count() {
    let input = polar(1.5);
    let args = ["simulate", "--kernel", "exp", "--input", input.to_str().unwrap(), "--paths", "500", "--eps", "0.05", "--seed", "5"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_levymap")).args(args).env("LEVYMAP_THREADS", threads).output().unwrap()
    };
    let one = run("1");
    let three = run("3");
    assert!(one.status.success());
    assert_eq!(one.stdout, three.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn verify_gaussian_passes_and_tampered_fails() {
    let input = gaussian();
    let path = input.to_str().unwrap();
    let out = levymap(&["verify", "--kernel", "exp", "--input", path, "--paths", "100000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
    assert!(report["max_deviation"].as_f64().unwrap() <= 4.0);

    let out = levymap(&["verify", "--kernel", "exp", "--input", path, "--paths", "100000", "--seed", "7", "--tamper-A", "2.0"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn output_file_matches_stdout() {
    let dir = std::env::temp_dir().join(format!("levymap-cli-{}", std::process::id()));
    let target = dir.join("out.csv");
    let args = ["kernel", "eval", "--family", "gstar", "--alpha", "-1", "--exponent", "2", "--s", "0.1,0.5"];
    let printed = levymap(&args);
    let mut with_out: Vec<&str> = args.to_vec();
    let target_str = target.to_str().unwrap().to_string();
    with_out.extend(["--out", &target_str]);
    let written = levymap(&with_out);
    assert!(written.status.success() && written.stdout.is_empty());
    assert_eq!(std::fs::read(&target).unwrap(), printed.stdout);
}
