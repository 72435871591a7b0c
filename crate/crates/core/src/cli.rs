//! Command-line front end: `gen`, `estimate` and `benchmark`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{LambdaKind, Optimizer, RunConfig};
use crate::data::TreatmentKind;
use crate::dml::{cross_fit, Method};
use crate::error::{Error, Result};
use crate::io::{load_dataset, report_json, save_dataset, save_history, save_json, save_report};
use crate::par;
use crate::rng::Rng;
use crate::stats::{mean, rmse};
use crate::synth::{generate, oracle_theta, DgpSpec, OracleBundle};

#[derive(Debug, Parser)]
#[command(name = "riesz-score", version, about = "Score-matching Riesz representers and debiased effect estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (`data.csv`) and its truths (`oracle.json`).
    Gen(GenArgs),
    /// Cross-fitted estimate on a CSV dataset; prints the report as JSON.
    Estimate(EstimateArgs),
    /// Replication study on synthetic data; prints a summary as JSON.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dgp {
    AteGauss,
    AmeGauss,
    AmeGaussTruncated,
    ApeGauss,
}

#[derive(Debug, Args)]
struct DgpArgs {
    #[arg(long, value_enum)]
    dgp: Option<Dgp>,
    /// Full DGP description as JSON; overrides `--dgp`.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Covariate dimension.
    #[arg(long)]
    dz: Option<usize>,
    /// Location shift of the treatment arms or policies.
    #[arg(long)]
    mu: Option<f64>,
    /// Outcome noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LambdaArg {
    Constant,
    EndpointVanishing,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    ClosedForm,
    Adam,
}

/// Run settings; each flag overrides the value from `--config`.
#[derive(Debug, Args)]
struct CfgArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    t_truncation: Option<f64>,
    #[arg(long)]
    quadrature_points: Option<usize>,
    #[arg(long, value_enum)]
    lambda_kind: Option<LambdaArg>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long)]
    support_quantile: Option<f64>,
    #[arg(long)]
    propensity_trim: Option<f64>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    /// ate-tsm, ate-logistic, ame-bridge, ame-dsm, ape-tsm, ate-lsif or ame-lsif.
    #[arg(long)]
    method: Option<String>,
    /// Policy shift for ape-tsm, applied to every coordinate.
    #[arg(long, default_value_t = 1.0)]
    shift: f64,
    /// Use the true α₀ and γ₀ from the oracle file instead of training.
    #[arg(long)]
    oracle_nuisances: bool,
    /// Oracle file; defaults to `oracle.json` next to the data.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for per-fold checkpoints and training histories.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[command(flatten)]
    cfg: CfgArgs,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    /// Comma-separated method names; `oracle` injects the true nuisances.
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[command(flatten)]
    cfg: CfgArgs,
}

fn read_config(args: &CfgArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $( if let Some(v) = args.$f { cfg.$f = v; } )* };
    }
    over!(seed, folds, batch_size, steps, learning_rate, t_truncation, quadrature_points, sigma_min, sigma_max, mc_samples, ridge, support_quantile, propensity_trim);
    if let Some(l) = args.lambda_kind {
        cfg.lambda_kind = match l {
            LambdaArg::Constant => LambdaKind::Constant,
            LambdaArg::EndpointVanishing => LambdaKind::EndpointVanishing,
        };
    }
    if let Some(o) = args.optimizer {
        cfg.optimizer = match o {
            OptimizerArg::ClosedForm => Optimizer::ClosedForm,
            OptimizerArg::Adam => Optimizer::Adam,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_spec(args: &DgpArgs) -> Result<DgpSpec> {
    let mut spec = match (&args.spec, args.dgp) {
        (Some(p), _) => serde_json::from_str(&std::fs::read_to_string(p)?)
            .map_err(|e| Error::Validation(format!("dgp spec: {e}")))?,
        (None, Some(Dgp::AteGauss)) => DgpSpec::ate_default(),
        (None, Some(Dgp::AmeGauss)) => DgpSpec::ame_default(),
        (None, Some(Dgp::AmeGaussTruncated)) => match DgpSpec::ame_default() {
            DgpSpec::AmeGaussCond { dz, c, s, a1, a2, b, noise, .. } => {
                DgpSpec::AmeGaussCond { dz, c, s, a1, a2, b, noise, truncated: true }
            }
            other => other,
        },
        (None, Some(Dgp::ApeGauss)) => DgpSpec::ape_default(),
        (None, None) => return Err(Error::Validation("one of --dgp or --spec is required".into())),
    };
    match &mut spec {
        DgpSpec::AteGaussMix { dz, mu, noise, .. } | DgpSpec::ApeGaussShift { dz, mu, noise, .. } => {
            *dz = args.dz.unwrap_or(*dz);
            *mu = args.mu.unwrap_or(*mu);
            *noise = args.noise.unwrap_or(*noise);
        }
        DgpSpec::AmeGaussCond { dz, noise, .. } => {
            if args.mu.is_some() {
                return Err(Error::Validation("--mu does not apply to the marginal-effect design".into()));
            }
            *dz = args.dz.unwrap_or(*dz);
            *noise = args.noise.unwrap_or(*noise);
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn emit(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

#[derive(Serialize)]
struct GenOutput {
    data: PathBuf,
    oracle: PathBuf,
    n: usize,
    theta0: f64,
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = read_spec(&args.dgp)?;
    if args.n == 0 {
        return Err(Error::Validation("--n must be at least 1".into()));
    }
    let (ds, oracle) = generate(&spec, args.n, &mut Rng::new(args.seed))?;
    std::fs::create_dir_all(&args.out_dir)?;
    let data = args.out_dir.join("data.csv");
    let oracle_path = args.out_dir.join("oracle.json");
    save_dataset(&ds, &data)?;
    save_json(&oracle, &oracle_path)?;
    emit(&GenOutput { data, oracle: oracle_path, n: ds.n(), theta0: oracle.theta0 })
}

fn load_oracle(path: &Path) -> Result<OracleBundle> {
    serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Validation(format!("oracle file: {e}")))
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let cfg = read_config(&args.cfg)?;
    let method = if args.oracle_nuisances {
        let path = match &args.oracle {
            Some(p) => p.clone(),
            None => args.data.parent().unwrap_or(Path::new(".")).join("oracle.json"),
        };
        Method::Oracle(Box::new(load_oracle(&path)?))
    } else {
        let name = args.method.as_deref().ok_or_else(|| Error::Validation("--method is required".into()))?;
        // dimension is fixed up once the data is read
        Method::parse(name, 0, args.shift)?
    };
    let ds = load_dataset(&args.data, method.functional().treatment_kind())?;
    if ds.kind() == TreatmentKind::Continuous && ds.treatments().iter().all(|&d| d == 1.0 || d == -1.0) {
        return Err(Error::Validation(format!(
            "method {} needs a continuous treatment, but every d is -1 or 1",
            method.name()
        )));
    }
    let method = match method {
        Method::ApeTsm { .. } => Method::ApeTsm { shift: vec![args.shift; ds.dz() + 1] },
        m => m,
    };
    let fit = cross_fit(&ds, &method, &cfg)?;
    if let Some(dir) = &args.artifacts {
        std::fs::create_dir_all(dir)?;
        for (k, art) in fit.artifacts.iter().enumerate() {
            if let Some(cp) = &art.checkpoint {
                cp.save(dir.join(format!("checkpoint_fold{k}.json")))?;
            }
            save_history(&art.history, dir.join(format!("history_fold{k}.jsonl")))?;
        }
    }
    if let Some(p) = &args.report {
        save_report(&fit.report, p)?;
    }
    let text = report_json(&fit.report)?;
    writeln!(std::io::stdout().lock(), "{text}")?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub reps: usize,
    pub failures: usize,
    pub mean_theta: f64,
    pub bias: f64,
    pub rmse: f64,
    pub mean_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSummary {
    pub spec: DgpSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub theta0: f64,
    pub methods: BTreeMap<String, MethodSummary>,
}

/// Replication `r` draws its data and runs every method with the same seed.
pub fn run_benchmark(spec: &DgpSpec, methods: &[String], reps: usize, n: usize, cfg: &RunConfig, shift: f64) -> Result<BenchmarkSummary> {
    if reps == 0 {
        return Err(Error::Validation("--reps must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Validation("at least one method is required".into()));
    }
    let theta0 = oracle_theta(spec)?;
    let dim = spec.dz() + 1;
    for m in methods {
        if m != "oracle" {
            let parsed = Method::parse(m, dim, shift)?;
            if parsed.functional().treatment_kind() != spec.treatment_kind() {
                return Err(Error::Validation(format!("method {m} does not fit this design")));
            }
        }
    }
    let runs = par::map_indexed(reps, |r| -> Result<Vec<Option<(f64, f64, bool)>>> {
        let seed = Rng::stream(cfg.seed, r as u64).next_u64();
        let (ds, oracle) = generate(spec, n, &mut Rng::new(seed))?;
        let rcfg = RunConfig { seed, ..cfg.clone() };
        methods
            .iter()
            .map(|m| {
                let method = if m == "oracle" {
                    Method::Oracle(Box::new(oracle.clone()))
                } else {
                    Method::parse(m, dim, shift)?
                };
                match cross_fit(&ds, &method, &rcfg) {
                    Ok(f) => Ok(Some((f.report.theta_hat, f.report.se, f.report.covers(theta0)))),
                    Err(e) if e.is_validation() => Err(e),
                    Err(_) => Ok(None),
                }
            })
            .collect()
    });
    let runs: Vec<Vec<Option<(f64, f64, bool)>>> = runs.into_iter().collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (j, m) in methods.iter().enumerate() {
        let ok: Vec<(f64, f64, bool)> = runs.iter().filter_map(|r| r[j]).collect();
        let thetas: Vec<f64> = ok.iter().map(|o| o.0).collect();
        let ses: Vec<f64> = ok.iter().map(|o| o.1).collect();
        let truth = vec![theta0; thetas.len()];
        let mean_theta = if thetas.is_empty() { f64::NAN } else { mean(&thetas) };
        out.insert(
            m.clone(),
            MethodSummary {
                reps: ok.len(),
                failures: reps - ok.len(),
                mean_theta,
                bias: mean_theta - theta0,
                rmse: if thetas.is_empty() { f64::NAN } else { rmse(&thetas, &truth) },
                mean_se: if ses.is_empty() { f64::NAN } else { mean(&ses) },
                coverage: (ok.len() > 1).then(|| ok.iter().filter(|o| o.2).count() as f64 / ok.len() as f64),
            },
        );
    }
    Ok(BenchmarkSummary { spec: spec.clone(), n, reps, seed: cfg.seed, theta0, methods: out })
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let spec = read_spec(&args.dgp)?;
    let cfg = read_config(&args.cfg)?;
    let mu = match spec {
        DgpSpec::ApeGaussShift { mu, .. } => mu,
        _ => 1.0,
    };
    let summary = run_benchmark(&spec, &args.methods, args.reps, args.n, &cfg, mu)?;
    emit(&summary)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
