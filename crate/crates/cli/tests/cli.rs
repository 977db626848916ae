use std::path::Path;
use std::process::{Command, Output};

use isolab::triangularizer::{constructed_problem, BatchInput, CaseTag};
use isolab_cli::config::{parse_complex, resolve, FileConfig, Flags, Pattern};
use isolab_cli::plot::{plot_script, PlotReport, PlotSeries};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn isolab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isolab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ISOLAB_JOBS")
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn report(names: &[&str], points: usize) -> PlotReport {
    PlotReport {
        title: "t".into(),
        csv: "conv.csv".into(),
        x_column: 2,
        xlabel: "eps".into(),
        ylabel: "err".into(),
        loglog: true,
        series: names
            .iter()
            .enumerate()
            .map(|(k, n)| PlotSeries {
                name: n.to_string(),
                column: k + 3,
                points: (1..=points).map(|i| (0.1 / i as f64, 0.3 / (i * i) as f64)).collect(),
            })
            .collect(),
    }
}

#[test]
fn complex_literals() {
    assert_eq!(parse_complex("0.4").unwrap(), isolab::c(0.4, 0.0));
    assert_eq!(parse_complex("-1.07").unwrap(), isolab::c(-1.07, 0.0));
    assert_eq!(parse_complex("0.3+0.1i").unwrap(), isolab::c(0.3, 0.1));
    assert_eq!(parse_complex("0.45-0.2i").unwrap(), isolab::c(0.45, -0.2));
    assert_eq!(parse_complex("2i").unwrap(), isolab::c(0.0, 2.0));
    assert_eq!(parse_complex("-i").unwrap(), isolab::c(0.0, -1.0));
    assert!(parse_complex("abc").is_err());
}

#[test]
fn flags_override_file_override_defaults() {
    let file = FileConfig {
        seed: Some(5),
        n_max: Some(10),
        pattern: Some("second".into()),
        ..Default::default()
    };
    let flags = Flags {
        seed: Some(7),
        ..Default::default()
    };
    let cfg = resolve("ladder", &flags, &file).unwrap();
    assert_eq!((cfg.seed, cfg.n_max, cfg.pattern), (7, 10, Pattern::Second));
    assert_eq!(cfg.tol, 1e-12);
    assert_eq!(cfg.theta.len(), 4);
    assert_eq!(resolve("stokes", &Flags::default(), &FileConfig::default()).unwrap().theta.len(), 3);
    // the manifest resolves to the same config
    let again = resolve("ladder", &Flags::default(), &cfg.to_file()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn invalid_configs_are_rejected() {
    let f = FileConfig::default();
    let flags = |tol: f64| Flags {
        tol: Some(tol),
        ..Default::default()
    };
    assert!(resolve("monodromy", &flags(1.0), &f).is_err());
    assert!(resolve("monodromy", &flags(1e-16), &f).is_err());
    let steps = Flags {
        steps: Some(0),
        ..Default::default()
    };
    assert!(resolve("flow6", &steps, &f).is_err());
    let wrong = FileConfig {
        command: Some("limit1".into()),
        ..Default::default()
    };
    assert!(resolve("limit2", &Flags::default(), &wrong).is_err());
}

#[test]
fn single_point_plot_has_no_fit() {
    let s = plot_script(&report(&["a"], 1));
    assert!(s.contains("set logscale xy"));
    assert!(s.contains("using 2:3"));
    assert!(!s.contains("slope"));
    assert!(!s.contains("f0(x)"));
}

#[test]
fn convergence_plot_is_annotated_with_the_slope() {
    let s = plot_script(&report(&["a"], 5));
    assert!(s.contains("a: slope 2.000"), "{s}");
    assert!(s.contains("f0(x) with lines"));
}

#[test]
fn two_quantities_share_the_axes() {
    let s = plot_script(&report(&["a", "b\"c"], 3));
    assert_eq!(s.matches("\"conv.csv\" using").count(), 2);
    assert_eq!(s.matches("plot ").count(), 1);
    assert!(s.contains("b\\\"c"));
}

#[test]
fn monodromy_prints_a_point() {
    let dir = TempDir::new().unwrap();
    let o = isolab(&["monodromy", "--theta", "0.31,0.47,0.29,-1.07", "--t6", "0.4"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let point: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(point["matrices"].as_array().unwrap().len(), 4);
    let r = &point["residuals"];
    for key in ["det", "cyclic", "trace"] {
        assert!(r[key].as_f64().unwrap() <= 1e-7, "{key}: {r}");
    }
    let manifest = read(&dir.path().join("manifest.toml"));
    assert!(manifest.contains("command = \"monodromy\""));
    assert!(dir.path().join("monodromy.json").exists());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = isolab(&["monodromy", "--tol", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = isolab(&["monodromy", "--theta", "0.3,0.4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = isolab(&["triangularize"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\ncolour = \"red\"\n").unwrap();
    let o = isolab(&["monodromy", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    // Θ0 = 0 leaves the second limit without its base
    let o = isolab(&["limit2", "--theta", "0,0.47,0.29,-1.07"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta vanishes"));
}

#[test]
fn limit1_run_is_reproducible_from_its_manifest() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let o = isolab(&["limit1", "--n-max", "12", "--t5", "1.2", "--seed", "3"], a.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&a.path().join("convergence1.csv"));
    assert_eq!(csv.lines().count(), 1 + 7);
    let gp = read(&a.path().join("convergence1.gp"));
    assert!(gp.contains("\"convergence1.csv\"") && gp.contains("slope"));
    let manifest = a.path().join("manifest.toml");
    let o = isolab(&["limit1", "--config", manifest.to_str().unwrap()], b.path());
    assert!(o.status.success());
    for f in ["convergence1.csv", "convergence1.gp", "limit1.json"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    // the out flag is the only difference between the manifests
    let strip = |p: &Path| {
        read(p)
            .lines()
            .filter(|l| !l.starts_with("out ="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&manifest), strip(&b.path().join("manifest.toml")));
}

#[test]
fn failed_convergence_still_writes_the_table() {
    // for this base the ladder is not yet asymptotic at n = 12
    let dir = TempDir::new().unwrap();
    let o = isolab(&["limit1", "--n-max", "12", "--t5", "1.2", "--seed", "7"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no convergence"));
    assert_eq!(read(&dir.path().join("convergence1.csv")).lines().count(), 1 + 7);
    assert!(read(&dir.path().join("convergence1.gp")).contains("slope"));
    assert!(!dir.path().join("limit1.json").exists());
}

#[test]
fn triangularize_batch() {
    let dir = TempDir::new().unwrap();
    let mut g = ChaCha8Rng::seed_from_u64(40);
    let mut lines = Vec::new();
    for tag in [CaseTag::Generic, CaseTag::PZero, CaseTag::Unsolvable] {
        let p = constructed_problem(&mut g, tag);
        let input = BatchInput {
            m0: p.m0,
            m1: p.m1,
            r0: Some(p.r0),
            r1: Some(p.r1),
            f: None,
        };
        lines.push(serde_json::to_string(&input).unwrap());
    }
    let batch = dir.path().join("pairs.jsonl");
    std::fs::write(&batch, lines.join("\n")).unwrap();
    let o = isolab(&["triangularize", "--batch", batch.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2 solved, 1 failed"), "{err}");
    let out = read(&dir.path().join("solutions.jsonl"));
    let rows: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2]["error"].is_string());
}

#[test]
fn jobs_default_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_isolab"))
        .args(["ladder", "--n-max", "3", "--out"])
        .arg(dir.path())
        .env("ISOLAB_JOBS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&dir.path().join("manifest.toml")).contains("jobs = 2"));
    // levels 0..=2 n_max
    assert_eq!(read(&dir.path().join("ladder.csv")).lines().count(), 1 + 7);
}

#[test]
fn selftest_passes() {
    let dir = TempDir::new().unwrap();
    let o = isolab(&["selftest"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
