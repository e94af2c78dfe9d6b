use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use entsdp::dualsolve::{
    solve_diagonal, solve_trace, DiagonalProblem, SolveConfig, SolveMode, SolveTrajectory, TraceProblem,
};
use entsdp::embed::{clustered_graph, normalized_laplacian, run_embed_on, ClusteredGraphConfig, EmbedConfig};
use entsdp::io::{fmt_f64, write_comment_header, write_f64_array};
use entsdp::linop::{DualShiftedOperator, SparseSymMatrix, SpectralInterval};
use entsdp::matfunc::GibbsFactorOperator;
use entsdp::maxcut::{erdos_renyi, run_maxcut, MaxCutConfig, MaxCutInstance};
use entsdp::sketch::{estimator_bench, ProbeDistribution};
use serde_json::json;

use crate::config::{ArrayFormat, Command, Distribution, ExperimentConfig, Mode, SolverArgs};
use crate::CliError;

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<String>,
    pub message: String,
}

struct Outputs {
    config: serde_json::Value,
    files: Vec<(String, Vec<u8>)>,
    message: String,
    result: serde_json::Value,
}

impl Outputs {
    fn new(config: serde_json::Value) -> Self {
        Self {
            config,
            files: Vec::new(),
            message: String::new(),
            result: serde_json::Value::Null,
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// Writes `value` with the config echo added under `"config"`.
    fn add_json(&mut self, name: &str, value: &serde_json::Value) {
        let mut value = value.clone();
        if let Some(obj) = value.as_object_mut() {
            obj.insert("config".into(), self.config.clone());
        }
        let mut bytes = serde_json::to_vec_pretty(&value).expect("json serializes");
        bytes.push(b'\n');
        self.add(name, bytes);
    }
}

fn solve_config(s: &SolverArgs, iters: usize, seed: u64, keep_snapshots: bool) -> SolveConfig {
    SolveConfig {
        batch: s.batch,
        iters,
        seed,
        mode: match s.mode {
            Mode::Stochastic => SolveMode::Stochastic,
            Mode::Exact => SolveMode::Exact,
        },
        distribution: distribution(s.distribution),
        expmv_tol: s.expmv_tol,
        cheb_tol: s.cheb_tol,
        dense_cap: s.dense_cap,
        keep_snapshots,
    }
}

fn distribution(d: Distribution) -> ProbeDistribution {
    match d {
        Distribution::Gaussian => ProbeDistribution::Gaussian,
        Distribution::Rademacher => ProbeDistribution::Rademacher,
    }
}

fn read_graph(path: &Path) -> Result<SparseSymMatrix, CliError> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open graph {}: {e}", path.display())))?;
    Ok(SparseSymMatrix::read_edge_list(BufReader::new(file), None)?)
}

fn trajectory_csv(t: &SolveTrajectory, echo: &[(String, String)]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf, echo)?;
    Ok(buf)
}

fn snapshots(t: &SolveTrajectory) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    t.write_snapshots(&mut buf)?;
    Ok(buf)
}

fn check_out_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Output(format!(
                "{} exists and is not a directory",
                dir.display()
            )));
        }
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(CliError::Output(format!(
                "{} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    Ok(())
}

/// Runs the experiment and writes its outputs. Nothing is written unless the
/// whole computation succeeds.
pub fn execute(config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let common = config.common();
    check_out_dir(&common.out, common.force)?;
    let start = Instant::now();
    let outputs = match common.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?
            .install(|| compute(config))?,
        None => compute(config)?,
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut names: Vec<String> = outputs.files.iter().map(|(n, _)| n.clone()).collect();
    names.push("manifest.json".into());
    let manifest = json!({
        "command": config.name(),
        "versions": { "entsdp": entsdp::VERSION, "entsdp-cli": env!("CARGO_PKG_VERSION") },
        "config": config_json(config),
        "result": outputs.result,
        "outputs": names,
        "wall_ms": wall_ms,
    });

    fs::create_dir_all(&common.out)?;
    for (name, bytes) in &outputs.files {
        fs::write(common.out.join(name), bytes)?;
    }
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("json serializes");
    manifest_bytes.push(b'\n');
    fs::write(common.out.join("manifest.json"), manifest_bytes)?;

    Ok(RunSummary {
        files: names,
        message: format!("{} → {}", outputs.message, common.out.display()),
    })
}

fn config_json(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::Value::Object(
        config
            .echo()
            .into_iter()
            .map(|(k, v)| (k, serde_json::Value::String(v)))
            .collect(),
    )
}

fn compute(config: &ExperimentConfig) -> Result<Outputs, CliError> {
    let echo = config.echo();
    let seed = config.common().seed;
    let mut out = Outputs::new(config_json(config));
    match &config.command {
        Command::Maxcut(a) => {
            let instance = match &a.graph {
                Some(path) => MaxCutInstance::from_adjacency(read_graph(path)?)?,
                None => erdos_renyi(a.n, a.p.unwrap_or(3.0 / a.n as f64).min(1.0), seed)?,
            };
            let mc = MaxCutConfig {
                beta: a.beta,
                solve: solve_config(&a.solver, a.iters, seed, a.keep_snapshots),
                samples: a.samples,
                eig_tol: a.eig_tol,
                ..MaxCutConfig::default()
            };
            let outcome = run_maxcut(&instance, &mc)?;
            out.add("trajectory.csv", trajectory_csv(&outcome.trajectory, &echo)?);
            if a.keep_snapshots {
                out.add("lambda.f64", snapshots(&outcome.trajectory)?);
            }
            let bounds = serde_json::to_value(&outcome.report).expect("report serializes");
            out.add_json("bounds.json", &bounds);
            out.message = format!(
                "maxcut n={} lower={:.6} upper={:.6} ratio={:.4}",
                outcome.report.n, outcome.report.lower, outcome.report.upper_expected, outcome.report.ratio
            );
            out.result = bounds;
        }
        Command::Embed(a) => {
            let graph_cfg = ClusteredGraphConfig {
                inter_prob: a.inter_prob,
                ..ClusteredGraphConfig::new(a.n, a.m, seed)
            };
            let (adjacency, k) = match &a.graph {
                Some(path) => (read_graph(path)?, a.k.expect("validated")),
                None => (clustered_graph(&graph_cfg)?, a.k()),
            };
            let ec = EmbedConfig {
                graph: graph_cfg,
                beta: a.beta,
                solve: solve_config(&a.solver, a.iters, seed, false),
                k_tilde: a.k_tilde,
                verify_probes: a.verify_probes,
                validate_gram: true,
            };
            let outcome = run_embed_on(&adjacency, k, &ec)?;
            out.add("trajectory.csv", trajectory_csv(&outcome.trajectory, &echo)?);
            let psi = &outcome.embedding.psi;
            match a.embedding_format {
                ArrayFormat::Csv => {
                    let mut buf = Vec::new();
                    write_comment_header(&mut buf, &echo)?;
                    for i in 0..psi.nrows() {
                        let row: Vec<String> = psi.row(i).iter().map(|&x| fmt_f64(x)).collect();
                        buf.extend_from_slice(row.join(",").as_bytes());
                        buf.push(b'\n');
                    }
                    out.add("embedding.csv", buf);
                }
                ArrayFormat::Binary => {
                    let data: Vec<f64> = psi.transpose().iter().copied().collect();
                    let mut buf = Vec::new();
                    write_f64_array(&mut buf, psi.nrows(), psi.ncols(), &data)?;
                    out.add("embedding.f64", buf);
                }
            }
            let validation = serde_json::to_value(&outcome.summary).expect("summary serializes");
            out.add_json("validation.json", &validation);
            out.message = format!(
                "embed n={} k={} k_tilde={} mu*={:.6} trace error={:.2e}",
                outcome.summary.n,
                outcome.summary.k,
                outcome.summary.k_tilde,
                outcome.summary.mu_star,
                outcome.summary.trace_relative_error
            );
            out.result = validation;
        }
        Command::SolveDiagonal(a) => {
            let c = match &a.graph {
                Some(path) => read_graph(path)?,
                None => erdos_renyi(a.n, a.p.unwrap_or(3.0 / a.n as f64).min(1.0), seed)?
                    .cost()
                    .as_ref()
                    .clone(),
            };
            let n = c.n();
            let problem = DiagonalProblem::new(Arc::new(c), vec![1.0; n], a.beta)?;
            let t = solve_diagonal(
                &problem,
                &solve_config(&a.solver, a.iters, seed, a.keep_snapshots),
                None,
            )?;
            out.add("trajectory.csv", trajectory_csv(&t, &echo)?);
            if a.keep_snapshots {
                out.add("lambda.f64", snapshots(&t)?);
            }
            let last = t.records.last().expect("at least one iteration");
            let result = json!({
                "n": n,
                "objective": last.objective,
                "residual": last.residual,
                "lambda": t.final_lambda(),
                "lambda_average": t.lambda_average,
            });
            out.add_json("result.json", &result);
            out.message = format!(
                "solve-diagonal n={n} objective={:.6} residual={:.2e}",
                last.objective, last.residual
            );
            out.result = json!({ "n": n, "objective": last.objective, "residual": last.residual });
        }
        Command::SolveTrace(a) => {
            let problem = match &a.graph {
                Some(path) => {
                    TraceProblem::with_gershgorin(Arc::new(read_graph(path)?), a.k.expect("validated"), a.beta)?
                }
                None => {
                    let g = clustered_graph(&ClusteredGraphConfig::new(a.n, a.m, seed))?;
                    let l = normalized_laplacian(&g)?;
                    let k = a.k.unwrap_or((a.n / a.m) as f64);
                    TraceProblem::new(Arc::new(l), k, a.beta, SpectralInterval::new(0.0, 2.0)?)?
                }
            };
            let t = solve_trace(&problem, &solve_config(&a.solver, a.iters, seed, false), None)?;
            out.add("trajectory.csv", trajectory_csv(&t, &echo)?);
            let last = t.records.last().expect("at least one iteration");
            let result = json!({
                "n": problem.n(),
                "k": problem.k(),
                "mu": t.final_mu(),
                "smoothed_mu": t.final_smoothed_mu(),
                "trace_estimate": last.trace_estimate,
                "residual": last.residual,
            });
            out.add_json("result.json", &result);
            out.message = format!(
                "solve-trace n={} mu={:.6} smoothed={:.6}",
                problem.n(),
                t.final_mu().unwrap_or(f64::NAN),
                t.final_smoothed_mu().unwrap_or(f64::NAN)
            );
            out.result = result;
        }
        Command::EstimatorBench(a) => {
            let instance = erdos_renyi(a.n, a.p.unwrap_or(3.0 / a.n as f64).min(1.0), seed)?;
            let y =
                GibbsFactorOperator::half_exponential(DualShiftedOperator::unshifted(instance.cost().clone()), a.beta)?;
            let rows = estimator_bench(
                &y,
                &a.batches,
                a.trials,
                seed,
                distribution(a.distribution),
                a.dense_cap,
            )?;
            let mut buf = Vec::new();
            write_comment_header(&mut buf, &echo)?;
            buf.extend_from_slice(b"batch,trials,relative_variance,theory,median_relative_error\n");
            for r in &rows {
                buf.extend_from_slice(
                    format!(
                        "{},{},{},{},{}\n",
                        r.batch,
                        r.trials,
                        fmt_f64(r.relative_variance),
                        fmt_f64(r.theory),
                        fmt_f64(r.median_relative_error)
                    )
                    .as_bytes(),
                );
            }
            out.add("estimator_bench.csv", buf);
            out.message = format!("estimator-bench n={} rows={}", a.n, rows.len());
            out.result = serde_json::to_value(&rows).expect("rows serialize");
        }
    }
    Ok(out)
}
