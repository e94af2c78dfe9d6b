use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use entsdp_cli::{parse_config, CliError, Command};

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_entsdp"))
}

fn run(args: &[&str]) -> std::process::Output {
    bin().args(args).output().expect("binary runs")
}

fn argv(s: &str) -> Vec<String> {
    std::iter::once("entsdp".to_string())
        .chain(s.split_whitespace().map(String::from))
        .collect()
}

/// File contents with the `wall_ms` column and manifest field removed.
fn without_timing(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let name = path.file_name().unwrap().to_str().unwrap();
    if name == "manifest.json" {
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("wall_ms");
        return v.to_string();
    }
    if name == "trajectory.csv" {
        return text
            .lines()
            .map(|l| {
                if l.starts_with('#') {
                    l
                } else {
                    l.rsplit_once(',').map_or(l, |(head, _)| head)
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
    }
    text
}

#[test]
fn parses_documented_invocations() {
    let cfg = parse_config(argv("maxcut --n 1024 --beta 32 --batch 8 --iters 400 --seed 7 --out o")).unwrap();
    match &cfg.command {
        Command::Maxcut(a) => {
            assert_eq!(
                (a.n, a.beta, a.solver.batch, a.iters, a.common.seed),
                (1024, 32.0, 8, 400, 7)
            );
        }
        other => panic!("wrong command {other:?}"),
    }

    let cfg = parse_config(argv("embed --n 1000 --m 10 --beta 10 --iters 2000 --out o")).unwrap();
    match &cfg.command {
        Command::Embed(a) => assert_eq!(a.k(), 100),
        other => panic!("wrong command {other:?}"),
    }

    assert!(matches!(
        parse_config(argv("maxcut --beta -1 --out o")),
        Err(CliError::Config(_))
    ));
}

#[test]
fn rejects_invalid_values() {
    for bad in [
        "maxcut --batch 0 --out o",
        "maxcut --iters 0 --out o",
        "maxcut --p 1.5 --out o",
        "embed --n 100 --m 7 --out o",
        "embed --graph g.txt --out o",
        "solve-trace --k -2 --out o",
        "estimator-bench --n 2048 --out o",
        "estimator-bench --batches 0,4 --out o",
        "maxcut --threads 0 --out o",
    ] {
        let err = parse_config(argv(bad)).expect_err(bad);
        assert_eq!(err.exit_code(), 2, "{bad}");
    }
    assert!(matches!(
        parse_config(argv("maxcut --n ten --out o")),
        Err(CliError::Usage(_))
    ));
    assert!(matches!(parse_config(argv("maxcut --n 10")), Err(CliError::Usage(_))));
}

#[test]
fn maxcut_writes_outputs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = [
        "maxcut",
        "--n",
        "64",
        "--beta",
        "10",
        "--iters",
        "60",
        "--samples",
        "50",
        "--seed",
        "3",
    ];
    let out_a = run(&[&args[..], &["--out", a.to_str().unwrap()]].concat());
    assert!(out_a.status.success(), "{}", String::from_utf8_lossy(&out_a.stderr));
    let out_b = run(&[&args[..], &["--out", b.to_str().unwrap(), "--threads", "1"]].concat());
    assert!(out_b.status.success());

    for f in ["trajectory.csv", "bounds.json", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f} missing");
        assert_eq!(without_timing(&a.join(f)), without_timing(&b.join(f)), "{f} differs");
    }

    let bounds: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("bounds.json")).unwrap()).unwrap();
    let lower = bounds["lower"].as_f64().unwrap();
    let upper = bounds["upper_expected"].as_f64().unwrap();
    assert!(lower <= upper + 1e-9 * upper.abs().max(1.0));

    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "t,objective,constraint_residual_estimate,mu_or_lambda_norm,smoothed_mu,wall_ms"
    );
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 61);
    assert!(csv.contains("# seed=3"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "maxcut");
    assert_eq!(manifest["config"]["iters"], "60");
    assert!(manifest["wall_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn refuses_non_empty_directory_without_force() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("keep.txt"), "x").unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["solve-diagonal", "--n", "32", "--iters", "5", "--out", out];
    let r = run(&args);
    assert_eq!(r.status.code(), Some(2));
    assert!(!dir.path().join("trajectory.csv").exists());

    let r = run(&[&args[..], &["--force"]].concat());
    assert!(r.status.success());
    assert!(dir.path().join("result.json").is_file());
    assert!(dir.path().join("keep.txt").is_file());
}

#[test]
fn validation_failure_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never");
    let r = run(&["maxcut", "--beta", "-1", "--out", target.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!target.exists());

    let r = run(&[
        "maxcut",
        "--graph",
        "/nonexistent/graph.txt",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_ne!(r.status.code(), Some(0));
    assert!(!target.exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# defaults\nn = 48\nbeta=4\niters=7\nkeep_snapshots = true\n").unwrap();
    let parsed = parse_config(argv(&format!(
        "solve-diagonal --config {} --beta 6 --out o",
        cfg.display()
    )))
    .unwrap();
    match &parsed.command {
        Command::SolveDiagonal(a) => {
            assert_eq!((a.n, a.beta, a.iters, a.keep_snapshots), (48, 6.0, 7, true));
        }
        other => panic!("wrong command {other:?}"),
    }

    fs::write(&cfg, "n=48\nnot_a_key=3\n").unwrap();
    let err = parse_config(argv(&format!("solve-diagonal --config {} --out o", cfg.display()))).unwrap_err();
    assert!(err.to_string().contains("not_a_key") || err.to_string().contains("not-a-key"));

    fs::write(&cfg, "n=-3\n").unwrap();
    assert!(parse_config(argv(&format!("solve-diagonal --config {} --out o", cfg.display()))).is_err());
}

#[test]
fn embed_and_trace_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("embed");
    let r = run(&[
        "embed",
        "--n",
        "60",
        "--m",
        "10",
        "--beta",
        "5",
        "--iters",
        "40",
        "--k-tilde",
        "12",
        "--verify-probes",
        "50",
        "--out",
        e.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(e.join("embedding.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r.split(',').count() == 12));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(e.join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["k"], 6);
    assert!(v["gram"].is_object());

    let b = dir.path().join("embed_bin");
    let r = run(&[
        "embed",
        "--n",
        "60",
        "--m",
        "10",
        "--iters",
        "20",
        "--k-tilde",
        "12",
        "--embedding-format",
        "binary",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let bytes = fs::read(b.join("embedding.f64")).unwrap();
    let (rows, cols, data) = entsdp::io::read_f64_array(&mut bytes.as_slice()).unwrap();
    assert_eq!((rows, cols, data.len()), (60, 12, 720));

    let t = dir.path().join("trace");
    let r = run(&[
        "solve-trace",
        "--n",
        "60",
        "--m",
        "10",
        "--iters",
        "30",
        "--out",
        t.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let res: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.join("result.json")).unwrap()).unwrap();
    let mu = res["mu"].as_f64().unwrap();
    assert!((-2.0..=4.0).contains(&mu));
}

#[test]
fn graph_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("c5.txt");
    fs::write(&g, "# five-cycle\n0 1\n1 2\n2 3\n3 4\n4 0\n").unwrap();
    let out = dir.path().join("out");
    let r = run(&[
        "maxcut",
        "--graph",
        g.to_str().unwrap(),
        "--mode",
        "exact",
        "--iters",
        "200",
        "--beta",
        "20",
        "--samples",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let bounds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(bounds["n"], 5);
    assert_eq!(bounds["edges"], 5);
    // Max cut of C5 is 4 edges: xᵀCx = −6/5.
    assert!(bounds["upper_best"].as_f64().unwrap() >= -1.2 - 1e-12);
    assert!(bounds["lower"].as_f64().unwrap() <= -1.2 + 1e-9);
}

#[test]
fn estimator_bench_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let r = run(&[
        "estimator-bench",
        "--n",
        "48",
        "--batches",
        "1,4,16",
        "--trials",
        "30",
        "--distribution",
        "rademacher",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("estimator_bench.csv")).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        lines.next().unwrap(),
        "batch,trials,relative_variance,theory,median_relative_error"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1][3] < w[0][3], "theory decreases with batch size");
    }
}
