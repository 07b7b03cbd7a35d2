use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn graphsve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphsve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        stderr(o)
    );
}

fn out_arg(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

/// Rows of a CSV file without its header, split on commas.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const OR_EXPLAIN: [&str; 9] = [
    "explain",
    "--method",
    "full",
    "--oracle",
    "builtin:or",
    "--target",
    "1,1",
    "--background",
    "builtin:or-domain",
];

#[test]
fn or_gate_explain_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir, "or");
    let mut args = OR_EXPLAIN.to_vec();
    args.extend(["--out", &out]);
    assert_ok(&graphsve(&args));
    let out = Path::new(&out);
    let rows = csv_rows(&out.join("attribution.csv"));
    assert_eq!(rows.len(), 2);
    let expected = 0.5 * (4.0f64 / 3.0).log2();
    for (r, row) in rows.iter().enumerate() {
        assert_eq!(row[1], r.to_string());
        let phi: f64 = row[2].parse().unwrap();
        assert!((phi - expected).abs() <= 1e-12, "{phi}");
        assert_eq!(format!("{phi:.5}"), "0.20752");
    }
    let normalized = csv_rows(&out.join("normalized.csv"));
    assert_eq!(normalized[0][3], "1");
    let config = fs::read_to_string(out.join("config.toml")).unwrap();
    for key in [
        "method = \"full\"",
        "mc_samples = 1000",
        "exact_cutoff = 12",
        "seed = 0",
        "marginal_samples = \"all\"",
    ] {
        assert!(config.contains(key), "{key} missing from\n{config}");
    }
    assert!(!config.contains("threads"));
    let log = fs::read_to_string(out.join("run_log.txt")).unwrap();
    assert!(log.contains("value_calls=4"), "{log}");
    assert!(log.contains("wall_time_ms"), "{log}");
}

#[test]
fn csve_without_structure_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir, "x");
    let mut args = OR_EXPLAIN.to_vec();
    args[2] = "csve";
    args.extend(["--out", &out]);
    let o = graphsve(&args);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[usage]:"), "{err}");
    assert!(!Path::new(&out).join("attribution.csv").exists());
}

#[test]
fn hsve_without_partition_or_graph_is_a_usage_error() {
    let mut args = OR_EXPLAIN.to_vec();
    args[2] = "hsve";
    assert_eq!(graphsve(&args).status.code(), Some(2));
}

#[test]
fn seeded_monte_carlo_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = out_arg(&dir, name);
        assert_ok(&graphsve(&[
            "explain",
            "--oracle",
            "builtin:planted",
            "--dataset",
            "builtin:planted-domain",
            "--target",
            "1,0,1,1,0,0",
            "--mc-samples",
            "10",
            "--exact-cutoff",
            "2",
            "--seed",
            "7",
            "--out",
            &out,
        ]));
        fs::read(Path::new(&out).join("attribution.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert!(String::from_utf8_lossy(&a).contains("monte-carlo"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "method = \"single\"\noracle = \"builtin:or\"\ndataset = \"builtin:or-domain\"\ntarget = \"1,1\"\n",
    )
    .unwrap();
    let cfg = cfg.to_string_lossy().into_owned();
    let a = out_arg(&dir, "a");
    assert_ok(&graphsve(&["explain", "--config", &cfg, "--out", &a]));
    let rows = csv_rows(&Path::new(&a).join("attribution.csv"));
    assert!(rows.iter().all(|r| r[3] == "single" && r[2] == "0"));
    let b = out_arg(&dir, "b");
    assert_ok(&graphsve(&[
        "explain", "--config", &cfg, "--method", "full", "--out", &b,
    ]));
    let rows = csv_rows(&Path::new(&b).join("attribution.csv"));
    assert!(rows.iter().all(|r| r[3] == "exact"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "methd = \"full\"\n").unwrap();
    let o = graphsve(&["explain", "--config", &cfg.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("methd"), "{}", stderr(&o));
}

#[test]
fn two_cliques_give_two_communities() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir, "c");
    let o = graphsve(&[
        "communities",
        "--graph",
        "builtin:two-cliques",
        "--out",
        &out,
    ]);
    assert_ok(&o);
    assert!(stdout(&o).contains("2 communities"));
    let summary = csv_rows(&Path::new(&out).join("communities_summary.csv"));
    assert_eq!(summary[0][0], "2");
    assert!((summary[0][1].parse::<f64>().unwrap() - 0.5).abs() <= 1e-9);
    let partition = csv_rows(&Path::new(&out).join("partition.csv"));
    let labels: Vec<&str> = partition.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(labels, ["0", "0", "0", "0", "0", "1", "1", "1", "1", "1"]);
}

#[test]
fn negative_infinite_threshold_gives_complete_adjacency() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir, "g");
    assert_ok(&graphsve(&[
        "graph",
        "--graph",
        "builtin:two-cliques",
        "--threshold",
        "-inf",
        "--out",
        &out,
    ]));
    let text = fs::read_to_string(Path::new(&out).join("adjacency.csv")).unwrap();
    for (i, line) in text.lines().enumerate() {
        for (j, bit) in line.split(',').enumerate() {
            assert_eq!(bit, if i == j { "0" } else { "1" });
        }
    }
    let summary = csv_rows(&Path::new(&out).join("graph_summary.csv"));
    assert_eq!(summary[0], ["10", "45", "-inf"]);
}

#[test]
fn planted_correlation_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir, "p");
    assert_ok(&graphsve(&[
        "graph",
        "--dataset",
        "builtin:planted-corr",
        "--out",
        &out,
    ]));
    let text = fs::read_to_string(Path::new(&out).join("weights.csv")).unwrap();
    let w01: f64 = text
        .lines()
        .next()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((w01 - 0.8).abs() <= 0.02, "{w01}");
}

#[test]
fn malformed_graph_names_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    fs::write(&path, "1,0.5\n0.5,oops\n").unwrap();
    let o = graphsve(&["communities", "--graph", &path.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.starts_with("error[input]:") && err.contains("line 2, column 2"),
        "{err}"
    );
}

#[test]
fn validate_single_properties() {
    let o = graphsve(&["validate", "--property", "or-gate"]);
    assert_ok(&o);
    assert!(stdout(&o).starts_with("PASS or-gate"));
    let o = graphsve(&["validate", "--property", "appendix-identity", "--n", "10"]);
    assert_ok(&o);
    let text = stdout(&o);
    assert!(
        text.contains("exponent |U| holds: true") && text.contains("exponent |U|-1 holds: false"),
        "{text}"
    );
    assert_eq!(
        graphsve(&["validate", "--property", "nope"]).status.code(),
        Some(2)
    );
}

#[test]
fn validate_writes_report_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir, "v");
    assert_ok(&graphsve(&[
        "validate",
        "--property",
        "myopia",
        "--out",
        &out,
    ]));
    let rows = csv_rows(&Path::new(&out).join("validation.csv"));
    assert_eq!(rows[0][..2], ["myopia".to_string(), "true".to_string()]);
}

#[test]
fn corrupting_the_or_gate() {
    let dir = tempfile::tempdir().unwrap();
    let explained = out_arg(&dir, "e");
    let mut args = OR_EXPLAIN.to_vec();
    args.extend(["--out", &explained]);
    assert_ok(&graphsve(&args));
    let attribution = Path::new(&explained)
        .join("attribution.csv")
        .to_string_lossy()
        .into_owned();
    let out = out_arg(&dir, "k");
    let o = graphsve(&[
        "corrupt",
        "--oracle",
        "builtin:or",
        "--dataset",
        "builtin:or-domain",
        "--target",
        "1,1",
        "--attribution",
        &attribution,
        "--coverage",
        "1.0,0.5",
        "--out",
        &out,
    ]);
    assert_ok(&o);
    assert!(stdout(&o).contains("prefixes nested: true"));
    let summary = csv_rows(&Path::new(&out).join("corruption_summary.csv"));
    assert_eq!(summary[0][0], "0.5");
    assert_eq!(summary[0][4], "true");
    assert_eq!(summary[1][0], "1");
    assert!((summary[1][1].parse::<f64>().unwrap() - 0.25).abs() <= 1e-12);
}

#[test]
fn corruption_reports_accuracy_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("t.csv");
    fs::write(&targets, "a,b,label\n1,1,1\n1,0,0\n").unwrap();
    let targets = targets.to_string_lossy().into_owned();
    let explained = out_arg(&dir, "e");
    assert_ok(&graphsve(&[
        "explain",
        "--oracle",
        "builtin:or",
        "--dataset",
        "builtin:or-domain",
        "--targets",
        &targets,
        "--out",
        &explained,
    ]));
    let attribution = Path::new(&explained)
        .join("attribution.csv")
        .to_string_lossy()
        .into_owned();
    let out = out_arg(&dir, "k");
    assert_ok(&graphsve(&[
        "corrupt",
        "--oracle",
        "builtin:or",
        "--dataset",
        "builtin:or-domain",
        "--targets",
        &targets,
        "--attribution",
        &attribution,
        "--coverage",
        "1",
        "--target-class",
        "1",
        "--out",
        &out,
    ]));
    let rows = csv_rows(&Path::new(&out).join("corruption.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| !r[7].is_empty()));
    let summary = csv_rows(&Path::new(&out).join("corruption_summary.csv"));
    assert!(!summary[0][3].is_empty());
}

#[test]
fn corruption_width_mismatch_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let attribution = dir.path().join("a.csv");
    fs::write(
        &attribution,
        "instance,feature_id,phi,method\n0,0,0.1,exact\n0,4,0.2,exact\n",
    )
    .unwrap();
    let o = graphsve(&[
        "corrupt",
        "--oracle",
        "builtin:or",
        "--dataset",
        "builtin:or-domain",
        "--target",
        "1,1",
        "--attribution",
        &attribution.to_string_lossy(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[input]:"));
}

#[test]
fn oracle_failures_exit_with_three() {
    for oracle in ["exec:false", "exec:/nonexistent/oracle-binary"] {
        let mut args = OR_EXPLAIN.to_vec();
        args[4] = oracle;
        let o = graphsve(&args);
        assert_eq!(o.status.code(), Some(3), "{oracle}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error[oracle]:"));
    }
}

#[test]
fn hsve_with_partition_file_matches_full() {
    let dir = tempfile::tempdir().unwrap();
    let partition = dir.path().join("p.csv");
    fs::write(
        &partition,
        "node_id,community_id\n0,0\n1,0\n2,0\n3,1\n4,1\n5,1\n",
    )
    .unwrap();
    let run = |method: &str, name: &str| {
        let out = out_arg(&dir, name);
        assert_ok(&graphsve(&[
            "explain",
            "--method",
            method,
            "--oracle",
            "builtin:planted",
            "--dataset",
            "builtin:planted-domain",
            "--target",
            "1,1,0,0,1,0",
            "--partition",
            &partition.to_string_lossy(),
            "--out",
            &out,
        ]));
        csv_rows(&Path::new(&out).join("attribution.csv"))
    };
    let full = run("full", "f");
    let hsve = run("hsve", "h");
    for (a, b) in full.iter().zip(&hsve) {
        let (x, y): (f64, f64) = (a[2].parse().unwrap(), b[2].parse().unwrap());
        assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
    }
}

#[test]
fn selected_features_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir, "s");
    let mut args = OR_EXPLAIN.to_vec();
    args.extend(["--features", "1", "--out", &out]);
    assert_ok(&graphsve(&args));
    let rows = csv_rows(&Path::new(&out).join("attribution.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "1");
}
