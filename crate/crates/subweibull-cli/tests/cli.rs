use std::io::Write;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subweibull")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn config_file(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows[0], ["check", "status", "detail"]);
    assert!(rows.len() >= 9);
    assert!(rows[1..].iter().all(|r| r[1] == "pass"));
}

#[test]
fn circle_table_exact_column() {
    let o = run(&["circle-table", "--theta", "0.5", "--eps", "1/20", "--replicates", "200000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows = data_rows(&text);
    assert_eq!(rows[0], ["epsilon", "mi", "cm", "cmi", "exact", "mc_mean", "mc_se"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "0.05");
    assert_eq!(rows[1][1], "inf");
    let exact: f64 = rows[1][4].parse().unwrap();
    assert!((exact + 0.180).abs() <= 1e-3, "exact {exact}");
    assert!(text.contains("# config: ") && text.contains("# version: subweibull "));
    assert!(!text.contains('\r'));
}

#[test]
fn invalid_theta_exits_two_naming_the_field() {
    for bad in ["0", "-1/2", "abc", "3"] {
        let o = run(&["constants", "--theta", bad]);
        assert_eq!(o.status.code(), Some(2), "theta {bad}");
        assert!(stderr(&o).contains("theta"), "theta {bad}: {}", stderr(&o));
    }
    let o = run(&["circle-table", "--eps", "1/0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eps"));
}

#[test]
fn irrelevant_and_unknown_keys_are_rejected() {
    let o = run(&["constants", "--lambda", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda"));
    let f = config_file(r#"{"theta": 0.5, "thetta": 1}"#);
    let o = run(&["constants", "--config", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("thetta"));
    let f = config_file(r#"{"command": "sgld", "n": 10}"#);
    let o = run(&["bounds", "--config", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_precedence() {
    let value = |o: &Output, key: &str| -> f64 {
        data_rows(&stdout(o)).into_iter().find(|r| r[0] == key).unwrap()[1].parse().unwrap()
    };
    let f = config_file(r#"{"command": "constants", "theta": 1, "alpha": "3/2"}"#);
    let path = f.path().to_str().unwrap();
    let from_file = run(&["constants", "--config", path]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    assert_eq!(value(&from_file, "theta"), 1.0);
    assert_eq!(value(&from_file, "alpha"), 1.5);
    let overridden = run(&["constants", "--config", path, "--theta", "0.5"]);
    assert_eq!(value(&overridden, "theta"), 0.5);
    assert_eq!(value(&overridden, "alpha"), 1.5);
    let defaults = run(&["constants"]);
    assert_eq!(value(&defaults, "theta"), 0.5);
    assert_eq!(value(&defaults, "alpha"), 2.0);
}

#[test]
fn list_values_in_config_files() {
    let f = config_file(r#"{"eps": ["1/20", 0.025], "replicates": 1000}"#);
    let o = run(&["circle-table", "--config", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "0.05");
    assert_eq!(rows[2][0], "0.025");
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        &["circle-table", "--eps", "1/20,1/400", "--replicates", "5000", "--seed", "3"],
        &["sgld", "--n", "40", "--lambda", "1,2", "--seeds", "3", "--epochs", "2", "--checkpoints", "4"],
        &["genbounds", "--demo", "goodhart", "--n", "1000", "--replicates", "1000"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let p = dir.path().join(format!("{i}.out"));
        let ps = p.to_str().unwrap().to_string();
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--output", &ps]);
        let mut written = Vec::new();
        for _ in 0..2 {
            let o = run(&full);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            written.push(std::fs::read(&p).unwrap());
        }
        assert!(!written[0].is_empty());
        assert_eq!(written[0], written[1], "case {i}");
        assert_eq!(run(args).stdout, run(args).stdout, "case {i}");
    }
}

#[test]
fn sgld_csv_layout() {
    let o = run(&["sgld", "--n", "30", "--lambda", "2", "--seeds", "2", "--epochs", "3", "--checkpoints", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows[0], ["seed", "n", "lambda", "iter", "gap", "bound"]);
    assert_eq!(rows.len(), 1 + 2 * 5);
    let last = &rows[5];
    assert_eq!((last[0].as_str(), last[1].as_str(), last[3].as_str()), ("0", "30", "90"));
    let bound: f64 = last[5].parse().unwrap();
    let gap: f64 = last[4].parse().unwrap();
    assert!(bound.is_finite() && bound > gap.abs());
}

#[test]
fn numerical_failure_exits_three() {
    let o = run(&["sgld", "--n", "20", "--lambda", "1", "--seeds", "1", "--epochs", "5", "--eta0", "100", "--sigma", "0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn json_reports_parse_with_provenance() {
    let o = run(&["align", "--mode", "kl", "--eps", "0.1", "--depth", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["command"], "align");
    assert!((v["result"]["achieved_divergence"].as_f64().unwrap() - 0.1).abs() < 1e-8);
    assert_eq!(v["result"]["policy"].as_array().unwrap().len(), 200);
    assert!(v["provenance"]["version"].as_str().unwrap().starts_with("subweibull "));
    assert_eq!(v["provenance"]["config"]["depth"], 200);

    let o = run(&["genbounds", "--demo", "mean-estimation", "--n", "50", "--replicates", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["single_scale_info"], "inf");
    assert!(v["result"]["bound_direct"].as_f64().unwrap() > v["result"]["gap_exact"].as_f64().unwrap().abs());

    let o = run(&["circle-table", "--eps", "1/20", "--replicates", "1000", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["rows"][0]["mi"], "inf");
}

#[test]
fn align_sweeps_and_modes() {
    let o = run(&["align", "--mode", "renyi", "--alpha", "2", "--eps", "0.05,0.1,0.2", "--depth", "300"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let gains: Vec<f64> = rows[1..].iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(gains.windows(2).all(|g| g[1] >= g[0]));

    let o = run(&["align", "--mode", "bofn", "--n", "1,4,16", "--depth", "100"]);
    let rows = data_rows(&stdout(&o));
    for r in &rows[1..] {
        let (d, cap): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(d <= cap + 1e-12);
    }

    let o = run(&["align", "--mode", "goodhart", "--log-depth", "300,30000"]);
    let rows = data_rows(&stdout(&o));
    let gains: Vec<f64> = rows[1..].iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(gains[0] >= 10.0 && gains[1] >= 1000.0);

    let o = run(&["align", "--mode", "tilt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_table_orders_the_sandwich() {
    let o = run(&["bounds", "--theta", "0.5", "--n", "10,100,1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows[0], ["n", "maximal_lower", "maximal_upper", "gen_bound"]);
    for r in &rows[1..] {
        let (lo, hi): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(lo < hi);
    }
    let o = run(&["bounds", "--variant", "key1", "--alpha", "3", "--n", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["bounds", "--variant", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let v = run(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).starts_with("subweibull "));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
