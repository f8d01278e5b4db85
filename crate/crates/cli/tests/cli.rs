use std::path::Path;
use std::process::{Command, Output};

use fraclab::formulas::brownian_sup_smallball_exact;

fn fraclab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclab"))
        .args(args)
        .env("FRACLAB_OUT", out)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn json(dir: &Path, file: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, file)).unwrap()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fraclab(&[], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8_lossy(&o.stdout).to_string() + &String::from_utf8_lossy(&o.stderr);
    assert!(text.contains("Usage: fraclab <COMMAND>"), "{text}");
    assert!(text.contains("verify-all"));
}

#[test]
fn formulas_a_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = fraclab(&["formulas", "--which", "a_H", "--H", "0.5"], dir.path());
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("1.0"));
    let rec = json(dir.path(), "formulas.json");
    assert_eq!(rec["value"], 1.0);
    assert_eq!(rec["name"], "a_H");
    assert_eq!(rec["schema_version"], 1);
    assert_eq!(rec["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rec["config_sha256"].as_str().unwrap().len(), 64);
    // The record on stdout is the file.
    assert!(stdout.ends_with(&read(dir.path(), "formulas.json")));
}

#[test]
fn formulas_report_intervals_and_reject_unknown_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = fraclab(
        &["formulas", "--which", "kappa_known", "--lambda", "0.8"],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(
        json(dir.path(), "formulas.json")["value"],
        serde_json::Value::Null
    );
    let o = fraclab(
        &["formulas", "--which", "kappa_known", "--lambda", "1.5"],
        dir.path(),
    );
    assert!(o.status.success());
    let v = json(dir.path(), "formulas.json")["value"].clone();
    assert_eq!(v[0], 0.375);
    assert!(v[1].as_f64().unwrap() > 1.2);
    let o = fraclab(
        &[
            "formulas",
            "--which",
            "kappa_known",
            "--lambda",
            "1.5",
            "--q",
            "2",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(json(dir.path(), "formulas.json")["value"], 0.375);
    let o = fraclab(&["formulas", "--which", "zeta"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("field `which`: unknown constant `zeta`"));
}

#[test]
fn smallball_row_matches_exact_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = fraclab(
        &[
            "smallball",
            "--process",
            "brownian",
            "--norm",
            "sup",
            "--eps",
            "0.8",
            "--paths",
            "100000",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "smallball.csv");
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# fraclab "));
    assert_eq!(lines.next(), Some("epsilon,p_hat,stderr,n_paths,grid_n"));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    let exact = brownian_sup_smallball_exact(0.8).unwrap();
    assert_eq!((row[0], row[3]), (0.8, 100_000.0));
    assert!(
        (row[1] - exact).abs() < 4.0 * row[2],
        "{} ± {} vs {exact}",
        row[1],
        row[2]
    );
    assert!(read(dir.path(), "smallball.gp").contains("plot 'smallball.csv'"));
    assert!(
        json(dir.path(), "smallball.json")["exact"][0]
            .as_f64()
            .unwrap()
            == exact
    );
}

#[test]
fn config_errors_carry_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[urn]\np_w = 0.5\ncolour = red\n").unwrap();
    let o = fraclab(&["urn", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("bad.cfg:3: unknown key `colour` in section [urn]"),
        "{err}"
    );

    std::fs::write(&cfg, "[urn]\np_w = 0.5\np_b = half\n").unwrap();
    let o = fraclab(&["urn", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("bad.cfg:3: field `p_b`: cannot parse `half`"),
        "{err}"
    );

    let o = fraclab(&["urn", "--p_w", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("field `p_b`: required"));

    let o = fraclab(&["urn", "--colour", "red"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = fraclab(&["lil", "--process", "fbm", "--H", "1.3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // P(sup|B| < 0.33) ≈ 1.5e-5 is below the naive Monte Carlo floor unless opted in.
    let o = fraclab(
        &[
            "smallball",
            "--eps",
            "0.33",
            "--paths",
            "20000",
            "--grid",
            "64",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric failure"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# urn run\nseed = 11\n[urn]\np_w = 0.7\np_b = 0.4\nreplicas = 3\ncheckpoints = 64, 256\n",
    )
    .unwrap();
    let out = dir.path().join("a");
    let o = fraclab(
        &[
            "urn",
            "--config",
            cfg.to_str().unwrap(),
            "--p_b",
            "0.45",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out, "urn.json");
    assert_eq!(r["params"]["p_b"], 0.45);
    assert_eq!(r["seed"]["master_seed"], 11);
    assert_eq!(read(&out, "urn.csv").lines().count(), 2 + 3 * 2);
}

#[test]
fn sample_writes_one_column_per_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = fraclab(
        &[
            "sample",
            "--process",
            "fbm",
            "--H",
            "0.7",
            "--paths",
            "3",
            "--grid",
            "16",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "sample.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "t,path_0,path_1,path_2");
    assert_eq!(lines.len(), 2 + 17);
    assert!(lines[2].starts_with("0,0,0,0"));
    assert!(read(dir.path(), "sample.gp").contains("plot for [i=2:4]"));
}

/// Every artifact of `args` under two worker counts, compared byte for byte.
fn assert_worker_independent(args: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = vec![];
    for w in ["1", "3"] {
        let out = dir.path().join(w);
        let mut a = args.to_vec();
        a.extend(["--workers", w, "--out", out.to_str().unwrap()]);
        let o = fraclab(&a, dir.path());
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let contents: Vec<_> = files
            .iter()
            .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap()))
            .collect();
        outputs.push((o.status.code(), o.stdout, contents));
    }
    assert!(!outputs[0].2.is_empty());
    assert_eq!(outputs[0], outputs[1], "{args:?}");
}

#[test]
fn outputs_are_byte_identical_across_workers() {
    assert_worker_independent(&[
        "smallball",
        "--process",
        "integrated-brownian",
        "--paths",
        "4000",
        "--grid",
        "256",
    ]);
    assert_worker_independent(&[
        "lil",
        "--theorem",
        "chung",
        "--replicas",
        "4",
        "--horizons",
        "2.7,7.4",
    ]);
    assert_worker_independent(&[
        "urn",
        "--p_w",
        "0.6",
        "--p_b",
        "0.5",
        "--replicas",
        "6",
        "--checkpoints",
        "1024,4096",
    ]);
    assert_worker_independent(&[
        "sample",
        "--process",
        "rl",
        "--lambda",
        "0.8",
        "--paths",
        "5",
    ]);
}

#[test]
fn verify_all_is_byte_identical_across_workers() {
    assert_worker_independent(&["verify-all", "--profile", "smoke"]);
}

#[test]
fn verify_all_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = fraclab(&["verify-all", "--criteria", "1,5,6,10"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let stdout = String::from_utf8(o.stdout).unwrap();
    for id in [1, 5, 6, 10] {
        assert!(
            stdout.contains(&format!("criterion {id:>2}: PASS")),
            "{stdout}"
        );
    }
    assert!(stdout.ends_with("overall: PASS\n"));
    let r = json(dir.path(), "verify-all.json");
    assert_eq!(r["all_pass"], true);
    assert_eq!(r["criteria"].as_array().unwrap().len(), 4);
    let o = fraclab(&["verify-all", "--criteria", "12"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hash_depends_on_results_not_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let hash = |args: &[&str]| {
        let o = fraclab(args, dir.path());
        assert!(o.status.success());
        json(dir.path(), "formulas.json")["config_sha256"]
            .as_str()
            .unwrap()
            .to_string()
    };
    let a = hash(&["formulas", "--which", "sigma2_W", "--lambda", "1"]);
    let b = hash(&[
        "formulas",
        "--which",
        "sigma2_W",
        "--lambda",
        "1",
        "--workers",
        "2",
    ]);
    let c = hash(&["formulas", "--which", "sigma2_W", "--lambda", "1.5"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}
