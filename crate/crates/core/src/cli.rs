//! Command-line front end: `design`, `estimate`, `risk` and `simulate`.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 when a computation or file
//! operation fails. Setting `TMINIMAX_THREADS` caps the worker pool; results do
//! not depend on it.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::allocation::{balanced, integer_solve, objective, relaxed_for_mode, Allocation, ObjectiveMode};
use crate::arm::Arm;
use crate::error::Error;
use crate::estimators::{estimate_all, Estimator};
use crate::io::{self, Format, RunManifest};
use crate::risk::{conservative_ci, max_risk, mc_risk, worst_case_schedule, CiTarget, LossSpec};
use crate::schedule::ObservedOutcomes;
use crate::simulate::{
    allocation_table, expected_risk_comparison, maxrisk_table, ExpectedRiskConfig, ModelKind, ModelParams, NoiseMode,
};

#[derive(Parser, Debug)]
#[command(name = "tminimax", version, about = "Minimax designs for temporal experiments with habituation")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal per-arm unit counts for a design objective.
    Design(DesignArgs),
    /// Effect estimates from an assignment and its observed outcomes.
    Estimate(EstimateArgs),
    /// Worst-case (and optionally simulated) risk of several designs.
    Risk(RiskArgs),
    /// Tables behind the allocation, max-risk and expected-risk figures.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeName {
    Basic,
    Augmented,
    Weighted,
    Recycling,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum EstimatorName {
    Plugin,
    Augmented,
    Recycling,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatName {
    Json,
    Csv,
}

impl From<FormatName> for Format {
    fn from(f: FormatName) -> Self {
        match f {
            FormatName::Json => Format::Json,
            FormatName::Csv => Format::Csv,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ModelName {
    Standard,
    Habituation,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NoiseName {
    Shared,
    PerHistory,
}

#[derive(Args, Debug, Serialize)]
struct DesignArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, value_enum, default_value = "basic")]
    mode: ModeName,
    /// Habituation weight for `--mode weighted`.
    #[arg(long)]
    rho: Option<f64>,
    /// Carryover order for `--mode recycling`.
    #[arg(long)]
    k: Option<usize>,
    /// Report the continuous relaxation instead of the integer optimum.
    #[arg(long)]
    relaxed: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatName,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    /// Assignment as a 0/1 matrix CSV, or a `.json` label document.
    #[arg(long)]
    assignment: PathBuf,
    /// Observed outcomes as a matrix CSV.
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long, value_enum, default_value = "plugin")]
    estimator: EstimatorName,
    #[arg(long)]
    k: Option<usize>,
    /// Add conservative normal intervals at this level.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatName,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RiskArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    /// Comma-separated: balanced, minimax, augmented, weighted, recycling.
    #[arg(long, value_delimiter = ',', default_value = "balanced,minimax,augmented")]
    designs: Vec<String>,
    /// Instantaneous-effect estimator used by the loss.
    #[arg(long, value_enum, default_value = "plugin")]
    spec: EstimatorName,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long)]
    k: Option<usize>,
    /// Worst-case variance scale of the outcome set.
    #[arg(long, default_value_t = 1.0)]
    vstar: f64,
    /// Monte-Carlo draws on the worst-case schedule; 0 skips simulation.
    #[arg(long, default_value_t = 0)]
    draws: usize,
    /// Report the loss with both series at weight one.
    #[arg(long)]
    doubled: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatName,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// 1: allocations, 2: max-risk ratios, 3: expected risk under outcome models.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    figure: u8,
    /// Unit counts (comma-separated); the allocation and max-risk tables use each in turn.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    t_list: Vec<usize>,
    #[arg(long, value_enum, default_value = "both")]
    model: ModelName,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Instantaneous-effect estimator in the expected-risk loss.
    #[arg(long, value_enum, default_value = "plugin")]
    loss: EstimatorName,
    #[arg(long, value_enum, default_value = "shared")]
    noise: NoiseName,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Run the command line `argv` (program name first) and return the exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    dispatch_to(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`dispatch`] with explicit output streams.
pub fn dispatch_to<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if argv.len() <= 1 {
        let _ = writeln!(stderr, "{}", Cli::command().render_help());
        return 2;
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    2
                }
            };
        }
    };
    let command: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match with_thread_cap(|| run(cli, &command)) {
        Ok(bytes) => {
            if stdout.write_all(&bytes).is_err() {
                return 1;
            }
            0
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Compute(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var("TMINIMAX_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    match cap.filter(|&c| c > 0) {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Returns what should go to standard output.
fn run(cli: Cli, command: &[String]) -> CliResult<Vec<u8>> {
    match cli.command {
        Command::Design(args) => design(&args),
        Command::Estimate(args) => estimate(&args),
        Command::Risk(args) => risk(&args, cli.seed),
        Command::Simulate(args) => simulate(&args, cli.seed, command).map(|()| Vec::new()),
    }
}

fn emit(bytes: Vec<u8>, out: Option<&Path>) -> CliResult<Vec<u8>> {
    match out {
        Some(path) => {
            io::write_atomic(path, &bytes)?;
            Ok(Vec::new())
        }
        None => Ok(bytes),
    }
}

fn objective_mode(mode: ModeName, rho: Option<f64>, k: Option<usize>) -> CliResult<ObjectiveMode> {
    let mode = match mode {
        ModeName::Basic => ObjectiveMode::Basic,
        ModeName::Augmented => ObjectiveMode::Augmented,
        ModeName::Weighted => ObjectiveMode::Weighted {
            rho: rho.ok_or_else(|| Failure::Usage("--mode weighted needs --rho".into()))?,
        },
        ModeName::Recycling => ObjectiveMode::Recycling {
            k: k.ok_or_else(|| Failure::Usage("--mode recycling needs --k".into()))?,
        },
    };
    mode.validate().map_err(|e| Failure::Usage(e.to_string()))
}

fn estimator(name: EstimatorName, k: Option<usize>) -> CliResult<Estimator> {
    let name = match name {
        EstimatorName::Plugin => "plugin",
        EstimatorName::Augmented => "augmented",
        EstimatorName::Recycling => "recycling",
    };
    Estimator::from_name(name, k).map_err(|e| Failure::Usage(e.to_string()))
}

#[derive(Serialize)]
struct DesignDoc {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    mode: String,
    relaxed: bool,
    arms: Vec<Arm>,
    counts: Vec<serde_json::Value>,
    objective: f64,
}

#[derive(Serialize)]
struct DesignRow {
    arm: Arm,
    count: serde_json::Value,
    objective: f64,
}

fn design(args: &DesignArgs) -> CliResult<Vec<u8>> {
    let mode = objective_mode(args.mode, args.rho, args.k)?;
    let (counts, value): (Vec<serde_json::Value>, f64) = if args.relaxed {
        let r = relaxed_for_mode(args.n as f64, args.t, mode)?;
        let value = objective(&r, mode)?;
        (r.counts().iter().map(|&c| c.into()).collect(), value)
    } else {
        let a = integer_solve(args.n, args.t, mode)?;
        let value = objective(&a, mode)?;
        (a.counts().iter().map(|&c| c.into()).collect(), value)
    };
    let arms: Vec<Arm> = Arm::all(args.t).collect();
    let bytes = match args.format {
        FormatName::Json => io::canonical_json(&DesignDoc {
            n: args.n,
            horizon: args.t,
            mode: mode.to_string(),
            relaxed: args.relaxed,
            arms,
            counts,
            objective: value,
        })?
        .into_bytes(),
        FormatName::Csv => {
            let rows: Vec<DesignRow> = arms
                .into_iter()
                .zip(counts)
                .map(|(arm, count)| DesignRow {
                    arm,
                    count,
                    objective: value,
                })
                .collect();
            io::table_bytes(&rows, Format::Csv)?
        }
    };
    emit(bytes, args.out.as_deref())
}

#[derive(Serialize)]
struct EstimateRow {
    t: usize,
    estimator: String,
    lambda_hat: f64,
    delta_hat: f64,
    lambda_half_width: Option<f64>,
    delta_half_width: Option<f64>,
}

fn estimate(args: &EstimateArgs) -> CliResult<Vec<u8>> {
    let est = estimator(args.estimator, args.k)?;
    if let Some(level) = args.level {
        if !(level > 0.0 && level < 1.0) {
            return Err(Failure::Usage(format!("--level must lie in (0, 1), got {level}")));
        }
    }
    let z = if args.assignment.extension().is_some_and(|e| e == "json") {
        io::assignment_from_json(&std::fs::read_to_string(&args.assignment).map_err(Error::from)?)?
    } else {
        io::read_assignment_csv(&args.assignment)?
    };
    let obs = ObservedOutcomes(io::read_matrix_csv(&args.outcomes)?);
    let table = estimate_all(&z, &obs, est)?;
    let mut rows = Vec::new();
    for ((t, lambda), (_, delta)) in table.lambda.iter().zip(table.delta.iter()) {
        let (lw, dw) = match args.level {
            Some(level) => (
                Some(conservative_ci(&z, &obs, t, CiTarget::Habituation, level)?.half_width),
                Some(conservative_ci(&z, &obs, t, CiTarget::Instantaneous(est), level)?.half_width),
            ),
            None => (None, None),
        };
        rows.push(EstimateRow {
            t,
            estimator: est.to_string(),
            lambda_hat: lambda,
            delta_hat: delta,
            lambda_half_width: lw,
            delta_half_width: dw,
        });
    }
    emit(io::table_bytes(&rows, args.format.into())?, args.out.as_deref())
}

#[derive(Serialize)]
struct RiskRow {
    design: String,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    counts: String,
    max_risk: f64,
    /// Max risk relative to the first listed design.
    ratio: f64,
    mc_risk: Option<f64>,
    se: Option<f64>,
    draws: usize,
}

fn design_allocation(name: &str, n: usize, horizon: usize, rho: f64, k: Option<usize>) -> CliResult<Allocation> {
    let mode = match name {
        "balanced" | "bcrd" => return Ok(balanced(n, horizon)?),
        "minimax" => ObjectiveMode::Basic,
        "augmented" => ObjectiveMode::Augmented,
        "weighted" => ObjectiveMode::Weighted { rho },
        "recycling" => ObjectiveMode::Recycling {
            k: k.ok_or_else(|| Failure::Usage("design recycling needs --k".into()))?,
        },
        other => return Err(Failure::Usage(format!("unknown design {other:?}"))),
    };
    Ok(integer_solve(n, horizon, mode.validate().map_err(|e| Failure::Usage(e.to_string()))?)?)
}

fn risk(args: &RiskArgs, seed: u64) -> CliResult<Vec<u8>> {
    let spec = LossSpec::new(estimator(args.spec, args.k)?, args.rho)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .with_doubled(args.doubled);
    if !(args.vstar.is_finite() && args.vstar > 0.0) {
        return Err(Failure::Usage(format!("--vstar must be positive, got {}", args.vstar)));
    }
    let worst = if args.draws > 0 {
        // Box [0, u] whose worst-case column has sample variance V*.
        let h = args.n.div_ceil(2) as f64;
        let nf = args.n as f64;
        let upper = (args.vstar * nf * (nf - 1.0) / (h * (nf - h))).sqrt();
        Some(worst_case_schedule(args.n, args.t, 0.0, upper)?)
    } else {
        None
    };
    let mut rows: Vec<RiskRow> = Vec::new();
    for (d, name) in args.designs.iter().enumerate() {
        let alloc = design_allocation(name.trim(), args.n, args.t, args.rho, args.k)?;
        let value = max_risk(&alloc, args.vstar, spec)?;
        let (mc, se) = match &worst {
            Some(w) => {
                let report = mc_risk(&alloc, &w.schedule, spec, args.draws, crate::rng::derive_seed(seed, &[d as u64]))?;
                (Some(report.mc_risk), Some(report.se))
            }
            None => (None, None),
        };
        let first = rows.first().map_or(value, |r| r.max_risk);
        rows.push(RiskRow {
            design: name.trim().to_string(),
            n: args.n,
            horizon: args.t,
            counts: alloc.counts().iter().map(ToString::to_string).collect::<Vec<_>>().join(" "),
            max_risk: value,
            ratio: value / first,
            mc_risk: mc,
            se,
            draws: args.draws,
        });
    }
    emit(io::table_bytes(&rows, args.format.into())?, args.out.as_deref())
}

fn simulate(args: &SimulateArgs, seed: u64, command: &[String]) -> CliResult<()> {
    std::fs::create_dir_all(&args.out).map_err(Error::from)?;
    let params = serde_json::to_value(args).map_err(Error::from)?;
    let mut manifest = RunManifest::start(command.to_vec(), Some(seed), params);
    let path = args.out.join(format!("figure{}.csv", args.figure));
    match args.figure {
        1 => {
            let ns = or_default(&args.n, &[1000]);
            let ts = or_default(&args.t_list, &[10, 20, 30, 40, 50]);
            let mut rows = Vec::new();
            for &n in &ns {
                rows.extend(allocation_table(n, &ts)?.into_iter().map(|r| (n, r)));
            }
            let rows: Vec<_> = rows
                .into_iter()
                .map(|(n, r)| FigureOneRow {
                    n,
                    design: r.design,
                    horizon: r.horizon,
                    arm: r.arm,
                    count: r.count,
                })
                .collect();
            io::write_table(&path, &rows, Format::Csv)?;
        }
        2 => {
            let ns = or_default(&args.n, &[1000]);
            let ts = or_default(&args.t_list, &[10, 20, 30, 40, 50]);
            let mut rows = Vec::new();
            for &n in &ns {
                rows.extend(maxrisk_table(n, &ts)?.into_iter().map(|r| FigureTwoRow {
                    n,
                    horizon: r.horizon,
                    baseline: r.baseline,
                    minimax_ratio: r.minimax_ratio,
                    augmented_ratio: r.augmented_ratio,
                }));
            }
            io::write_table(&path, &rows, Format::Csv)?;
        }
        _ => {
            let models = match args.model {
                ModelName::Standard => vec![ModelKind::Standard],
                ModelName::Habituation => vec![ModelKind::Habituation],
                ModelName::Both => vec![ModelKind::Standard, ModelKind::Habituation],
            };
            let loss = LossSpec::unweighted();
            let loss = LossSpec {
                estimator: estimator(args.loss, None)?,
                ..loss
            };
            let mut rows = Vec::new();
            for model in models {
                let config = ExpectedRiskConfig {
                    n_list: or_default(&args.n, &[100, 200, 500]),
                    t_list: or_default(&args.t_list, &[10, 15, 20, 25, 30]),
                    model,
                    params: ModelParams {
                        noise: match args.noise {
                            NoiseName::Shared => NoiseMode::Shared,
                            NoiseName::PerHistory => NoiseMode::PerHistory,
                        },
                        ..ModelParams::default()
                    },
                    reps: args.reps,
                    seed,
                    loss,
                };
                rows.extend(expected_risk_comparison(&config)?);
            }
            io::write_table(&path, &rows, Format::Csv)?;
        }
    }
    manifest.add_output(&path)?;
    manifest.finish();
    manifest.write(args.out.join("manifest.json"))?;
    Ok(())
}

fn or_default(v: &[usize], default: &[usize]) -> Vec<usize> {
    if v.is_empty() {
        default.to_vec()
    } else {
        v.to_vec()
    }
}

#[derive(Serialize)]
struct FigureOneRow {
    n: usize,
    design: String,
    horizon: usize,
    arm: Arm,
    count: f64,
}

#[derive(Serialize)]
struct FigureTwoRow {
    n: usize,
    horizon: usize,
    baseline: String,
    minimax_ratio: f64,
    augmented_ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("tminimax").chain(args.iter().copied());
        let code = dispatch_to(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn no_arguments_is_usage() {
        let (code, _, err) = run_capture(&[]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn design_small_basic() {
        let (code, out, _) = run_capture(&["design", "--n", "7", "--t", "2", "--mode", "basic"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["counts"], serde_json::json!([2, 2, 3]));
    }

    #[test]
    fn usage_and_compute_errors() {
        assert_eq!(run_capture(&["design", "--n", "7", "--t", "2", "--mode", "weighted"]).0, 2);
        assert_eq!(run_capture(&["design", "--n", "7"]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["design", "--n", "2", "--t", "2"]).0, 1);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }
}
