use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn wqlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wqlab"));
    c.env_remove("WQLAB_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    wqlab().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    path
}

fn line_space() -> Value {
    json!({ "labels": ["a", "b", "c", "d"], "dist": [[0, 1, 2, 3], [1, 0, 1, 2], [2, 1, 0, 1], [3, 2, 1, 0]] })
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    mu: String,
    nu: String,
    two: String,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let mu = write(
        &root,
        "mu.json",
        &json!({ "space": line_space(), "weights": ["1/4", "1/4", "1/4", "1/4"] }),
    );
    let nu = write(
        &root,
        "nu.json",
        &json!({ "space": line_space(), "weights": ["1/2", "0", "0", "1/2"] }),
    );
    let two = write(
        &root,
        "two.json",
        &json!({ "space": { "points": [[0.0], [1.0]], "metric": "l2" }, "weights": ["1/2", "1/2"] }),
    );
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    Fixture {
        _dir: dir,
        root: root.clone(),
        mu: s(mu),
        nu: s(nu),
        two: s(two),
    }
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_64() {
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&run(&[])), 64);
    assert_eq!(code(&run(&["wasserstein", "--no-such-flag", "a", "b"])), 64);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn wasserstein_on_a_line() {
    let f = fixture();
    let v = stdout_json(&run(&["wasserstein", &f.mu, &f.nu, "--p", "1,2"]));
    // Moving 1/4 from b to a and 1/4 from c to d.
    assert!((v[0]["distance"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v[1]["distance"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    let plan = f.root.join("plan.csv");
    assert_eq!(
        code(&run(&[
            "wasserstein",
            &f.mu,
            &f.nu,
            "--plan",
            plan.to_str().unwrap()
        ])),
        0
    );
    assert!(fs::read_to_string(plan).unwrap().lines().count() > 1);
}

#[test]
fn dollar_matches_w1() {
    let f = fixture();
    let w = stdout_json(&run(&["wasserstein", &f.mu, &f.nu]));
    let d = stdout_json(&run(&["dollar", &f.mu, &f.nu]));
    assert!((w[0]["distance"].as_f64().unwrap() - d[0]["dollar"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn bad_input_is_a_domain_error() {
    let f = fixture();
    let bad = write(
        &f.root,
        "bad.json",
        &json!({ "space": line_space(), "weights": ["1/2", "1/2", "1/2", "0"] }),
    );
    let out = run(&["quantize-e", bad.to_str().unwrap(), "--n", "2"]);
    assert_eq!(code(&out), 1);
    let schema = write(&f.root, "schema.json", &json!({ "weights": ["1"] }));
    let out = run(&["quantize-e", schema.to_str().unwrap(), "--n", "1"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("space"));
    assert_eq!(code(&run(&["quantize-e", "/no/such/file.json", "--n", "1"])), 1);
    assert_eq!(code(&run(&["quantize-e", &f.mu, "--n", "0"])), 1);
    assert_eq!(code(&run(&["quantize-e", &f.mu, "--n", "1", "--p", "0.5"])), 1);
}

#[test]
fn exhausted_budget_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let pts: Vec<Value> = (0..12).map(|i| json!([i as f64, (i * i % 7) as f64])).collect();
    let mu = write(
        dir.path(),
        "m.json",
        &json!({ "space": { "points": pts }, "weights": vec!["1/12"; 12] }),
    );
    let out = run(&[
        "quantize-e",
        mu.to_str().unwrap(),
        "--n",
        "5",
        "--budget-enum",
        "10",
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "empirical",
        mu.to_str().unwrap(),
        "--n",
        "8",
        "--oracle",
        "exact",
        "--budget-outcomes",
        "10",
    ]);
    assert_eq!(code(&out), 2);
    // The heuristic ignores the enumeration budget.
    let out = run(&[
        "quantize-e",
        mu.to_str().unwrap(),
        "--n",
        "5",
        "--budget-enum",
        "10",
        "--mode",
        "heuristic",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn quantizers_on_the_line() {
    let f = fixture();
    let e = stdout_json(&run(&["quantize-e", &f.mu, "--n", "1,2,4"]));
    let errors: Vec<f64> = e
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["error"].as_f64().unwrap())
        .collect();
    assert_eq!(errors, vec![1.0, 0.5, 0.0]);
    let b = stdout_json(&run(&["quantize-b", &f.mu, "--n", "2"]));
    assert!((b[0]["error"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(b[0]["weights"], json!(["1/2", "1/2"]));
}

#[test]
fn covering_and_resolution() {
    let f = fixture();
    let c = stdout_json(&run(&["covering", &f.mu, "--eps", "0,1,1.5"]));
    let counts: Vec<u64> = c
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["covering_number"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, vec![4, 2, 2]);
    let h = stdout_json(&run(&["resolution", &f.mu, "--m", "1,2,4"]));
    let hs: Vec<f64> = h
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["h"].as_f64().unwrap())
        .collect();
    assert_eq!(hs, vec![2.0, 1.0, 0.0]);
}

#[test]
fn decompose_and_build_quantizer() {
    let f = fixture();
    let d = stdout_json(&run(&[
        "decompose",
        &f.mu,
        "--supports",
        r#"[["b"], ["a", "c"]]"#,
    ]));
    assert!(d.is_object());
    let q = stdout_json(&run(&["build-quantizer", &f.mu, "--k", "1"]));
    assert!(q.is_object());
    assert_eq!(code(&run(&["decompose", &f.mu, "--supports", r#"[["zz"]]"#])), 1);
    assert_eq!(
        code(&run(&[
            "build-quantizer",
            &f.mu,
            "--k",
            "2",
            "--supports",
            r#"[["a"]]"#
        ])),
        1
    );
}

#[test]
fn empirical_exact_two_point() {
    let f = fixture();
    let v = stdout_json(&run(&[
        "empirical",
        &f.two,
        "--n",
        "2,4",
        "--estimator",
        "mean_of_W1",
        "--oracle",
        "exact",
    ]));
    assert!((v[0]["estimate"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((v[1]["estimate"].as_f64().unwrap() - 0.1875).abs() < 1e-12);
    assert_eq!(v[0]["exact"], true);
    assert_eq!(
        code(&run(&["empirical", &f.two, "--n", "2", "--estimator", "median"])),
        1
    );
}

#[test]
fn seed_flag_and_env_agree() {
    let f = fixture();
    let args = [
        "empirical",
        &f.mu,
        "--n",
        "5",
        "--oracle",
        "monte-carlo",
        "--trials",
        "300",
    ];
    let by_flag = stdout_json(&run(&[&args[..], &["--seed", "42"]].concat()));
    let by_env = stdout_json(&wqlab().args(args).env("WQLAB_SEED", "42").output().unwrap());
    let again = stdout_json(&run(&[&args[..], &["--seed", "42"]].concat()));
    let other = stdout_json(&run(&[&args[..], &["--seed", "43"]].concat()));
    assert_eq!(by_flag, by_env);
    assert_eq!(by_flag, again);
    assert_ne!(by_flag[0]["estimate"], other[0]["estimate"]);
    // The flag wins over the environment.
    let both = stdout_json(
        &wqlab()
            .args(args)
            .args(["--seed", "43"])
            .env("WQLAB_SEED", "42")
            .output()
            .unwrap(),
    );
    assert_eq!(both, other);
}

#[test]
fn small_verify_suite_writes_reports() {
    let f = fixture();
    let suite = write(
        &f.root,
        "suite.json",
        &json!({
            "instances": ["two_point", { "id": "line4", "measure": { "space": line_space(), "weights": ["1/4", "1/4", "1/4", "1/4"] } }],
            "bound_ids": ["main1", "main2", "mutmu"],
            "n": [2, 4],
            "p": [1, 2],
            "trials": 200
        }),
    );
    let out_dir = f.root.join("reports");
    let out = run(&[
        "verify",
        "--suite",
        suite.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    // Only the non-gating ratio remark may fail.
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("reports.json")).unwrap()).unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    for r in reports {
        assert!(r["pass"] == true || r["bound_id"] == "main1_ratio", "{r}");
    }
    assert_eq!(doc["meta"]["seed"], 7);
    let csv = fs::read_to_string(out_dir.join("reports.csv")).unwrap();
    assert!(csv.starts_with("bound_id,instance_id,kind,lhs,rhs"));
    assert_eq!(csv.lines().count(), reports.len() + 1);
}

#[test]
fn malformed_suite_is_a_domain_error() {
    let f = fixture();
    let suite = write(&f.root, "suite.json", &json!({ "bogus_key": 1 }));
    assert_eq!(
        code(&run(&[
            "verify",
            "--suite",
            suite.to_str().unwrap(),
            "--out",
            f.root.to_str().unwrap()
        ])),
        1
    );
    let suite = write(&f.root, "suite2.json", &json!({ "bound_ids": ["no_such_bound"] }));
    assert_eq!(
        code(&run(&[
            "verify",
            "--suite",
            suite.to_str().unwrap(),
            "--out",
            f.root.to_str().unwrap()
        ])),
        1
    );
}

#[test]
fn scaling_two_point_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "scaling",
        "--family",
        "two_point",
        "--n",
        "2,4,8,16",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("two_point.csv")).unwrap();
    assert!(csv.starts_with("n,value,std_error,series"));
    let json: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("two_point.json")).unwrap()).unwrap();
    assert!(json["slopes"]["expected_w1"].as_f64().unwrap() < 0.0);
    assert_eq!(code(&run(&["scaling", "--family", "torus"])), 1);
}

#[test]
fn subcommands_match_library_calls() {
    use wqlab_core::io::load_measure;
    use wqlab_core::quantize::{self, Mode};

    let f = fixture();
    let mu = load_measure(&f.mu).unwrap();
    let nu = load_measure(&f.nu).unwrap();
    let cli = stdout_json(&run(&["quantize-e", &f.mu, "--n", "2", "--p", "2"]));
    let lib =
        quantize::optimal_quantization_error(&mu, 2, 2.0, Mode::Exact, quantize::DEFAULT_BUDGET).unwrap();
    assert_eq!(cli[0], lib.to_json());
    let cli = stdout_json(&run(&["quantize-b", &f.mu, "--n", "3"]));
    let lib =
        quantize::uniform_quantization_error(&mu, 3, 1.0, Mode::Exact, quantize::DEFAULT_BUDGET).unwrap();
    assert_eq!(cli[0], lib.to_json());
    let cli = stdout_json(&run(&["wasserstein", &f.mu, &f.nu, "--p", "3"]));
    assert_eq!(
        cli[0]["distance"].as_f64().unwrap(),
        wqlab_core::wasserstein_distance(&mu, &nu, 3.0).unwrap()
    );
}
