use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(
    name = "entsdp",
    version,
    about = "Entropically regularized SDP experiments",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Max-Cut bounds on an Erdős–Rényi graph or an edge list.
    Maxcut(MaxcutArgs),
    /// Spectral embedding of a clustered graph or an edge list.
    Embed(EmbedArgs),
    /// Matrix scaling for diag X = 1.
    SolveDiagonal(SolveDiagonalArgs),
    /// Newton iteration for Tr X = k.
    SolveTrace(SolveTraceArgs),
    /// Diagonal-estimator variance as a function of the batch size.
    EstimatorBench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Stochastic,
    Exact,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Gaussian,
    Rademacher,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayFormat {
    Csv,
    Binary,
}

/// Options shared by every command.
#[derive(Args, Debug, Clone, Serialize)]
pub struct CommonArgs {
    /// Output directory (one per experiment).
    #[arg(long)]
    pub out: PathBuf,
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cap on worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

/// Solver options.
#[derive(Args, Debug, Clone, Serialize)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Mode::Stochastic)]
    pub mode: Mode,
    /// Probe batch size N.
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    pub distribution: Distribution,
    #[arg(long, default_value_t = entsdp::matfunc::DEFAULT_EXPMV_TOL)]
    pub expmv_tol: f64,
    #[arg(long, default_value_t = entsdp::matfunc::DEFAULT_CHEB_TOL)]
    pub cheb_tol: f64,
    /// Largest n for exact mode and dense validation.
    #[arg(long, default_value_t = entsdp::matfunc::DEFAULT_DENSE_CAP)]
    pub dense_cap: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MaxcutArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Number of vertices of the random graph.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Edge probability; 3/n when absent.
    #[arg(long)]
    pub p: Option<f64>,
    /// Edge list `i j [w]` used instead of a random graph.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 400)]
    pub iters: usize,
    /// Rounding samples.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = entsdp::eigs::DEFAULT_EIG_TOL)]
    pub eig_tol: f64,
    /// Also write every λ iterate to `lambda.f64`.
    #[arg(long)]
    pub keep_snapshots: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Cluster size; k = n/m.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Inter-cluster edge probability; 1/n when absent.
    #[arg(long)]
    pub inter_prob: Option<f64>,
    /// Edge list used instead of the clustered model (requires --k).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Target trace; n/m when absent.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    /// Embedding dimension; ⌈2k ln n⌉ when absent.
    #[arg(long)]
    pub k_tilde: Option<usize>,
    /// Probes for the trace check.
    #[arg(long, default_value_t = 1000)]
    pub verify_probes: usize,
    #[arg(long, value_enum, default_value_t = ArrayFormat::Csv)]
    pub embedding_format: ArrayFormat,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveDiagonalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long)]
    pub p: Option<f64>,
    /// Cost matrix as an edge list, used as C without rescaling.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 400)]
    pub iters: usize,
    #[arg(long)]
    pub keep_snapshots: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveTraceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Cost matrix as an edge list, used as C with its Gershgorin interval.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Target trace; n/m for the clustered Laplacian when absent.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub beta: f64,
    /// Comma-separated batch sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
    pub batches: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    pub distribution: Distribution,
    #[arg(long, default_value_t = entsdp::matfunc::DEFAULT_DENSE_CAP)]
    pub dense_cap: usize,
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self.command {
            Command::Maxcut(_) => "maxcut",
            Command::Embed(_) => "embed",
            Command::SolveDiagonal(_) => "solve-diagonal",
            Command::SolveTrace(_) => "solve-trace",
            Command::EstimatorBench(_) => "estimator-bench",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match &self.command {
            Command::Maxcut(a) => &a.common,
            Command::Embed(a) => &a.common,
            Command::SolveDiagonal(a) => &a.common,
            Command::SolveTrace(a) => &a.common,
            Command::EstimatorBench(a) => &a.common,
        }
    }

    /// Every parameter as sorted `key=value` pairs, command first.
    pub fn echo(&self) -> Vec<(String, String)> {
        let value = match &self.command {
            Command::Maxcut(a) => serde_json::to_value(a),
            Command::Embed(a) => serde_json::to_value(a),
            Command::SolveDiagonal(a) => serde_json::to_value(a),
            Command::SolveTrace(a) => serde_json::to_value(a),
            Command::EstimatorBench(a) => serde_json::to_value(a),
        }
        .expect("arguments serialize");
        let mut flat = BTreeMap::new();
        flatten("", &value, &mut flat);
        // Settings that do not affect results stay out of the echo.
        for key in ["config", "out", "force", "threads"] {
            flat.remove(key);
        }
        let mut out = vec![("command".to_string(), self.name().to_string())];
        out.extend(flat);
        out
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("--{name} must be positive, got {v}")))
            }
        };
        let at_least_one = |name: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(CliError::Config(format!("--{name} must be at least 1")))
            }
        };
        let probability = |name: &str, v: Option<f64>| match v {
            Some(p) if !(0.0..=1.0).contains(&p) => {
                Err(CliError::Config(format!("--{name} must lie in [0, 1], got {p}")))
            }
            _ => Ok(()),
        };
        let solver = |s: &SolverArgs| -> Result<(), CliError> {
            at_least_one("batch", s.batch)?;
            positive("expmv-tol", s.expmv_tol)?;
            positive("cheb-tol", s.cheb_tol)
        };
        if let Some(t) = self.common().threads {
            at_least_one("threads", t)?;
        }
        match &self.command {
            Command::Maxcut(a) => {
                solver(&a.solver)?;
                positive("beta", a.beta)?;
                at_least_one("iters", a.iters)?;
                at_least_one("samples", a.samples)?;
                positive("eig-tol", a.eig_tol)?;
                probability("p", a.p)?;
                if a.graph.is_none() {
                    at_least_one("n", a.n)?;
                }
            }
            Command::Embed(a) => {
                solver(&a.solver)?;
                positive("beta", a.beta)?;
                at_least_one("iters", a.iters)?;
                at_least_one("verify-probes", a.verify_probes)?;
                probability("inter-prob", a.inter_prob)?;
                if let Some(kt) = a.k_tilde {
                    at_least_one("k-tilde", kt)?;
                }
                if a.graph.is_some() {
                    if a.k.is_none() {
                        return Err(CliError::Config("--graph requires --k".into()));
                    }
                } else {
                    if a.m < 2 || a.n == 0 || a.n % a.m != 0 {
                        return Err(CliError::Config(format!(
                            "--m {} must be at least 2 and divide --n {}",
                            a.m, a.n
                        )));
                    }
                    let k = a.k.unwrap_or(a.n / a.m);
                    if k == 0 || k >= a.n {
                        return Err(CliError::Config(format!("need 0 < k < n, got k = {k}")));
                    }
                }
            }
            Command::SolveDiagonal(a) => {
                solver(&a.solver)?;
                positive("beta", a.beta)?;
                at_least_one("iters", a.iters)?;
                probability("p", a.p)?;
                if a.graph.is_none() {
                    at_least_one("n", a.n)?;
                }
            }
            Command::SolveTrace(a) => {
                solver(&a.solver)?;
                positive("beta", a.beta)?;
                at_least_one("iters", a.iters)?;
                if let Some(k) = a.k {
                    positive("k", k)?;
                }
                if a.graph.is_some() {
                    if a.k.is_none() {
                        return Err(CliError::Config("--graph requires --k".into()));
                    }
                } else if a.m < 2 || a.n == 0 || a.n % a.m != 0 {
                    return Err(CliError::Config(format!(
                        "--m {} must be at least 2 and divide --n {}",
                        a.m, a.n
                    )));
                }
            }
            Command::EstimatorBench(a) => {
                positive("beta", a.beta)?;
                at_least_one("n", a.n)?;
                probability("p", a.p)?;
                if a.trials < 2 {
                    return Err(CliError::Config("--trials must be at least 2".into()));
                }
                if a.batches.is_empty() || a.batches.contains(&0) {
                    return Err(CliError::Config("--batches must list positive sizes".into()));
                }
                if a.n > a.dense_cap {
                    return Err(CliError::Config(format!(
                        "estimator-bench needs the dense reference: --n {} exceeds --dense-cap {}",
                        a.n, a.dense_cap
                    )));
                }
            }
        }
        Ok(())
    }
}

impl EmbedArgs {
    pub fn k(&self) -> usize {
        self.k.unwrap_or(self.n / self.m)
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                // Flattened argument groups share one namespace.
                let key = if matches!(k.as_str(), "common" | "solver") {
                    prefix.to_string()
                } else if prefix.is_empty() {
                    k.replace('_', "-")
                } else {
                    format!("{prefix}.{}", k.replace('_', "-"))
                };
                flatten(&key, v, out);
            }
        }
        serde_json::Value::Null => {}
        serde_json::Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        serde_json::Value::Array(items) => {
            let joined: Vec<String> = items
                .iter()
                .map(|i| i.to_string().trim_matches('"').to_string())
                .collect();
            out.insert(prefix.to_string(), joined.join(","));
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

/// Reads a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn read_config_file(path: &PathBuf) -> Result<Vec<(String, String)>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected key=value", path.display(), lineno + 1)))?;
        pairs.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses `argv` (program name first). Values from `--config` are applied
/// first, so explicit flags override them.
pub fn parse_config<I, S>(argv: I) -> Result<ExperimentConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let first = Cli::try_parse_from(&argv).map_err(CliError::Usage)?;
    let sub_name = ExperimentConfig {
        command: first.command.clone(),
    }
    .name();
    let config_path = ExperimentConfig { command: first.command }.common().config.clone();

    let cli = match config_path {
        None => Cli::try_parse_from(&argv).map_err(CliError::Usage)?,
        Some(path) => {
            let pairs = read_config_file(&path)?;
            let cmd = Cli::command();
            let sub = cmd.find_subcommand(sub_name).expect("subcommand exists");
            let mut injected = Vec::new();
            for (key, value) in pairs {
                let arg = sub
                    .get_arguments()
                    .find(|a| a.get_long() == Some(key.as_str()))
                    .ok_or_else(|| CliError::Config(format!("unknown key `{key}` in {}", path.display())))?;
                if key == "config" {
                    return Err(CliError::Config(
                        "config files cannot include other config files".into(),
                    ));
                }
                let is_flag = matches!(arg.get_action(), clap::ArgAction::SetTrue);
                if is_flag {
                    match value.as_str() {
                        "true" => injected.push(format!("--{key}")),
                        "false" => {}
                        other => {
                            return Err(CliError::Config(format!(
                                "`{key}` expects true or false, got `{other}`"
                            )))
                        }
                    }
                } else {
                    injected.push(format!("--{key}={value}"));
                }
            }
            let pos = argv
                .iter()
                .position(|a| a == sub_name)
                .expect("subcommand present in argv");
            let mut merged = argv[..=pos].to_vec();
            merged.extend(injected);
            merged.extend(argv[pos + 1..].iter().cloned());
            Cli::try_parse_from(&merged).map_err(CliError::Usage)?
        }
    };
    let config = ExperimentConfig { command: cli.command };
    config.validate()?;
    Ok(config)
}
