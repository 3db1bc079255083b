//! `qstale`: staleness probabilities and quorum tuning for expanding
//! partial-quorum replication, as JSON or CSV tables.

mod config;
mod output;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qstale_core::{
    analytic_general_pt, closed_form_pt, estimate_pt, quorum_size_at_read_pmf, quorum_size_pmf,
    tune, worst_case_bound, DelayModel, Error, Objective, QuorumSpec, Rate, SimConfig,
    StalenessEstimate, TuningRequest, MAX_ANALYTIC_REPLICAS,
};

use config::{resolve_seed, FileConfig};
use output::{cell, optional_cell, print_csv, sig12, Format, OutputRecord};

/// Trials used when the staleness command falls back to simulation.
const DEFAULT_STALENESS_TRIALS: u64 = 1_000_000;
/// Fixed scheduling granularity for simulation fallbacks (results do not
/// depend on it).
const FALLBACK_CHUNKS: u64 = 8;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Core(err)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(err) => write!(f, "{err}"),
        }
    }
}

fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Usage(_) => 2,
        CliError::Core(core) => match core {
            Error::ClosedFormUnsupported { .. } | Error::AnalyticUnsupported { .. } => 3,
            Error::NumericalInstability { .. } => 4,
            _ => 2,
        },
    }
}

#[derive(Parser)]
#[command(
    name = "qstale",
    version,
    about = "Staleness probabilities and quorum tuning for partial-quorum replication"
)]
struct Cli {
    /// Output format: json (default) or csv
    #[arg(long, global = true)]
    format: Option<String>,

    /// TOML file with default parameter values; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribution of the number of replicas holding the latest write
    Pmf(PmfArgs),
    /// Stale-read probability, with the non-expanding worst-case bound
    Staleness(StalenessArgs),
    /// Seeded Monte Carlo staleness estimation
    Simulate(SimulateArgs),
    /// Pareto frontier of quorum configurations meeting a staleness target
    Tune(TuneArgs),
}

#[derive(Args)]
struct PmfArgs {
    /// Replica count N
    #[arg(long)]
    n: Option<u32>,
    /// Write quorum size W
    #[arg(long)]
    w: Option<u32>,
    /// Write delay rate λ
    #[arg(long)]
    lambda: Option<f64>,
    /// Elapsed time after write completion
    #[arg(long)]
    t: Option<f64>,
    /// Evaluate at the j-th fastest read response instead of a fixed offset
    #[arg(long = "at-read-j")]
    at_read_j: Option<u32>,
    /// Read delay rate ξ (required with --at-read-j)
    #[arg(long)]
    xi: Option<f64>,
}

#[derive(Args)]
struct StalenessArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    w: Option<u32>,
    /// Read quorum size R
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Evaluation method: auto, closed, general, bound, or sim
    #[arg(long)]
    method: Option<String>,
    /// Sweep t over start:stop:step and emit one row per grid point
    #[arg(long = "t-sweep")]
    t_sweep: Option<String>,
    /// Trials for --method sim (default 1000000)
    #[arg(long)]
    trials: Option<u64>,
    /// Seed for --method sim (default from QSTALE_SEED, else 0)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    w: Option<u32>,
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parallelism granularity; never affects the estimate
    #[arg(long)]
    chunks: Option<u64>,
    /// Deterministic shift added to every write delay
    #[arg(long = "write-shift")]
    write_shift: Option<f64>,
    /// Deterministic shift added to every read delay
    #[arg(long = "read-shift")]
    read_shift: Option<f64>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    /// Target staleness probability ε in (0, 1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Largest acceptable visibility delay
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    /// Frontier ordering: min_read_latency, min_write_latency, or min_sum
    #[arg(long)]
    objective: Option<String>,
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required parameter {flag}")))
}

fn parse_format(flag: Option<String>, file: Option<String>) -> Result<Format, CliError> {
    let Some(name) = flag.or(file) else {
        return Ok(Format::Json);
    };
    Format::parse(&name)
        .ok_or_else(|| CliError::Usage(format!("--format must be json or csv, got {name:?}")))
}

fn parse_objective(name: &str) -> Result<Objective, CliError> {
    match name {
        "min_read_latency" => Ok(Objective::MinReadLatency),
        "min_write_latency" => Ok(Objective::MinWriteLatency),
        "min_sum" => Ok(Objective::MinSum),
        _ => Err(CliError::Usage(format!(
            "--objective must be min_read_latency, min_write_latency or min_sum, got {name:?}"
        ))),
    }
}

fn parse_sweep(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(CliError::Usage(format!(
            "--t-sweep expects start:stop:step, got {text:?}"
        )));
    };
    let parse = |name: &str, s: &str| -> Result<f64, CliError> {
        s.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--t-sweep {name} must be a number, got {s:?}")))
    };
    let (start, stop, step) = (parse("start", start)?, parse("stop", stop)?, parse("step", step)?);
    if !start.is_finite() || start < 0.0 {
        return Err(CliError::Usage(format!("--t-sweep start must be >= 0, got {start}")));
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(CliError::Usage(format!("--t-sweep step must be > 0, got {step}")));
    }
    if !stop.is_finite() || stop < start {
        return Err(CliError::Usage(format!("--t-sweep stop must be >= start, got {stop}")));
    }
    if (stop - start) / step > 1e6 {
        return Err(CliError::Usage("--t-sweep grid exceeds 10^6 points".into()));
    }
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let t = start + step * k as f64;
        if t > stop + step * 1e-9 {
            break;
        }
        grid.push(t);
        k += 1;
    }
    Ok(grid)
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let format = parse_format(cli.format, file.format.clone())?;
    match cli.command {
        Command::Pmf(args) => run_pmf(args, &file, format),
        Command::Staleness(args) => run_staleness(args, &file, format),
        Command::Simulate(args) => run_simulate(args, &file, format),
        Command::Tune(args) => run_tune(args, &file, format),
    }
}

#[derive(Serialize)]
struct PmfInputs {
    n: u32,
    w: u32,
    lambda: f64,
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<f64>,
}

#[derive(Serialize)]
struct PmfPoint {
    s: u32,
    probability: f64,
}

#[derive(Serialize)]
struct PmfResults {
    support: Vec<PmfPoint>,
}

fn run_pmf(args: PmfArgs, file: &FileConfig, format: Format) -> Result<(), CliError> {
    let n = require(args.n.or(file.n), "--n")?;
    let w = require(args.w.or(file.w), "--w")?;
    let lambda = require(args.lambda.or(file.lambda), "--lambda")?;
    let t = require(args.t.or(file.t), "--t")?;
    let j = args.at_read_j.or(file.at_read_j);

    let lambda_rate = Rate::new(lambda)?;
    let pmf = match j {
        None => {
            if args.xi.is_some() {
                return Err(CliError::Usage(
                    "--xi is only meaningful together with --at-read-j".into(),
                ));
            }
            let spec = QuorumSpec::new(n, w, 1)?;
            quorum_size_pmf(&spec, lambda_rate, t)?
        }
        Some(j) => {
            let xi = require(args.xi.or(file.xi), "--xi (required with --at-read-j)")?;
            if j < 1 || j > n {
                return Err(CliError::Usage(format!(
                    "--at-read-j must satisfy 1 <= j <= N, got j={j}, N={n}"
                )));
            }
            // The rank ranges over all n possible responses.
            let spec = QuorumSpec::new(n, w, n)?;
            let delays = DelayModel::new(lambda_rate, Rate::new(xi)?);
            quorum_size_at_read_pmf(&spec, &delays, t, j)?
        }
    };

    let xi = j.and_then(|_| args.xi.or(file.xi));
    let inputs = PmfInputs {
        n,
        w,
        lambda: sig12(lambda),
        t: sig12(t),
        j,
        xi: xi.map(sig12),
    };
    let support: Vec<PmfPoint> = pmf
        .support()
        .map(|(s, p)| PmfPoint {
            s,
            probability: sig12(p),
        })
        .collect();

    match format {
        Format::Json => {
            OutputRecord::new("pmf", inputs, PmfResults { support }).print_json();
        }
        Format::Csv => {
            let header = ["n", "w", "lambda", "t", "j", "xi", "s", "probability"];
            let rows: Vec<Vec<String>> = support
                .iter()
                .map(|point| {
                    vec![
                        n.to_string(),
                        w.to_string(),
                        cell(inputs.lambda),
                        cell(inputs.t),
                        optional_cell(inputs.j),
                        optional_cell(inputs.xi.map(cell)),
                        point.s.to_string(),
                        cell(point.probability),
                    ]
                })
                .collect();
            print_csv(&header, &rows);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StalenessInputs {
    n: u32,
    w: u32,
    r: u32,
    lambda: f64,
    xi: f64,
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct StalenessPoint {
    t: f64,
    probability: f64,
    bound: f64,
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci95_halfwidth: Option<f64>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum StalenessResults {
    Single(StalenessPoint),
    Sweep { sweep: Vec<StalenessPoint> },
}

fn eval_staleness(
    method: &str,
    spec: &QuorumSpec,
    delays: &DelayModel,
    t: f64,
    trials: u64,
    seed: u64,
) -> Result<StalenessEstimate, CliError> {
    let simulate = |t: f64| -> Result<StalenessEstimate, CliError> {
        let config = SimConfig::new(*spec, *delays, t, trials, seed)?
            .with_chunks(FALLBACK_CHUNKS.min(trials))?;
        Ok(StalenessEstimate::from_simulation(&estimate_pt(&config)))
    };
    match method {
        "closed" => Ok(closed_form_pt(spec, delays, t)?),
        "general" => Ok(analytic_general_pt(spec, delays, t)?),
        "bound" => Ok(worst_case_bound(spec)),
        "sim" => simulate(t),
        "auto" => {
            if spec.is_strict() {
                return Ok(analytic_general_pt(spec, delays, t)?);
            }
            if spec.n() == 3 && matches!((spec.w(), spec.r()), (1, 1) | (2, 1) | (1, 2)) {
                return Ok(closed_form_pt(spec, delays, t)?);
            }
            if spec.r() <= 2 && spec.n() <= MAX_ANALYTIC_REPLICAS {
                return Ok(analytic_general_pt(spec, delays, t)?);
            }
            simulate(t)
        }
        other => Err(CliError::Usage(format!(
            "--method must be auto, closed, general, bound or sim, got {other:?}"
        ))),
    }
}

fn run_staleness(args: StalenessArgs, file: &FileConfig, format: Format) -> Result<(), CliError> {
    let n = require(args.n.or(file.n), "--n")?;
    let w = require(args.w.or(file.w), "--w")?;
    let r = require(args.r.or(file.r), "--r")?;
    let lambda = require(args.lambda.or(file.lambda), "--lambda")?;
    let xi = require(args.xi.or(file.xi), "--xi")?;
    let method = args.method.or(file.method.clone()).unwrap_or_else(|| "auto".into());
    let trials = args.trials.or(file.trials).unwrap_or(DEFAULT_STALENESS_TRIALS);
    let seed = resolve_seed(args.seed, file.seed)?;

    let sweep = args.t_sweep.or(file.t_sweep.clone());
    let grid = match (&sweep, args.t.or(file.t)) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("provide either --t or --t-sweep, not both".into()))
        }
        (Some(text), None) => parse_sweep(text)?,
        (None, Some(t)) => vec![t],
        (None, None) => return Err(CliError::Usage("missing required parameter --t (or --t-sweep)".into())),
    };

    let spec = QuorumSpec::new(n, w, r)?;
    let delays = DelayModel::new(Rate::new(lambda)?, Rate::new(xi)?);
    let bound = sig12(worst_case_bound(&spec).probability());

    let mut points = Vec::with_capacity(grid.len());
    for &t in &grid {
        let estimate = eval_staleness(&method, &spec, &delays, t, trials, seed)?;
        points.push(StalenessPoint {
            t: sig12(t),
            probability: sig12(estimate.probability()),
            bound,
            method: estimate.method().as_str(),
            ci95_halfwidth: estimate.ci_halfwidth().map(sig12),
        });
    }

    let uses_sim = points.iter().any(|p| p.method == "monte_carlo");
    let inputs = StalenessInputs {
        n,
        w,
        r,
        lambda: sig12(lambda),
        xi: sig12(xi),
        method: method.clone(),
        trials: uses_sim.then_some(trials),
        seed: uses_sim.then_some(seed),
    };

    match format {
        Format::Json => {
            let results = if sweep.is_some() {
                StalenessResults::Sweep { sweep: points }
            } else {
                StalenessResults::Single(points.into_iter().next().expect("one grid point"))
            };
            OutputRecord::new("staleness", inputs, results).print_json();
        }
        Format::Csv => {
            let header = [
                "n", "w", "r", "lambda", "xi", "t", "probability", "bound", "method",
                "ci95_halfwidth",
            ];
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| {
                    vec![
                        n.to_string(),
                        w.to_string(),
                        r.to_string(),
                        cell(inputs.lambda),
                        cell(inputs.xi),
                        cell(p.t),
                        cell(p.probability),
                        cell(p.bound),
                        p.method.to_string(),
                        optional_cell(p.ci95_halfwidth.map(cell)),
                    ]
                })
                .collect();
            print_csv(&header, &rows);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateInputs {
    n: u32,
    w: u32,
    r: u32,
    lambda: f64,
    xi: f64,
    t: f64,
    trials: u64,
    seed: u64,
    chunks: u64,
    write_shift: f64,
    read_shift: f64,
}

#[derive(Serialize)]
struct SimulateResults {
    estimate: f64,
    stale_count: u64,
    trials: u64,
    ci95_halfwidth: f64,
    seed: u64,
}

fn run_simulate(args: SimulateArgs, file: &FileConfig, format: Format) -> Result<(), CliError> {
    let n = require(args.n.or(file.n), "--n")?;
    let w = require(args.w.or(file.w), "--w")?;
    let r = require(args.r.or(file.r), "--r")?;
    let lambda = require(args.lambda.or(file.lambda), "--lambda")?;
    let xi = require(args.xi.or(file.xi), "--xi")?;
    let t = require(args.t.or(file.t), "--t")?;
    let trials = require(args.trials.or(file.trials), "--trials")?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let chunks = args.chunks.or(file.chunks).unwrap_or(1);
    let write_shift = args.write_shift.or(file.write_shift).unwrap_or(0.0);
    let read_shift = args.read_shift.or(file.read_shift).unwrap_or(0.0);

    let spec = QuorumSpec::new(n, w, r)?;
    let delays = DelayModel::with_shifts(Rate::new(lambda)?, Rate::new(xi)?, write_shift, read_shift)?;
    let config = SimConfig::new(spec, delays, t, trials, seed)?.with_chunks(chunks)?;
    let result = estimate_pt(&config);

    let inputs = SimulateInputs {
        n,
        w,
        r,
        lambda: sig12(lambda),
        xi: sig12(xi),
        t: sig12(t),
        trials,
        seed,
        chunks,
        write_shift: sig12(write_shift),
        read_shift: sig12(read_shift),
    };
    let results = SimulateResults {
        estimate: sig12(result.estimate),
        stale_count: result.stale_count,
        trials: result.trials,
        ci95_halfwidth: sig12(result.ci95_halfwidth),
        seed: result.seed,
    };

    match format {
        Format::Json => OutputRecord::new("simulate", inputs, results).print_json(),
        Format::Csv => {
            let header = [
                "n", "w", "r", "lambda", "xi", "t", "write_shift", "read_shift", "chunks",
                "trials", "seed", "estimate", "stale_count", "ci95_halfwidth",
            ];
            let row = vec![
                n.to_string(),
                w.to_string(),
                r.to_string(),
                cell(inputs.lambda),
                cell(inputs.xi),
                cell(inputs.t),
                cell(inputs.write_shift),
                cell(inputs.read_shift),
                chunks.to_string(),
                trials.to_string(),
                seed.to_string(),
                cell(results.estimate),
                results.stale_count.to_string(),
                cell(results.ci95_halfwidth),
            ];
            print_csv(&header, &[row]);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TuneInputs {
    n: u32,
    lambda: f64,
    xi: f64,
    epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    objective: &'static str,
}

#[derive(Serialize)]
struct TuneEntry {
    w: u32,
    r: u32,
    t_min: f64,
    p_at_t: f64,
    expected_write_latency: f64,
    expected_read_latency: f64,
    method: &'static str,
}

#[derive(Serialize)]
struct TuneResults {
    pareto: Vec<TuneEntry>,
}

fn run_tune(args: TuneArgs, file: &FileConfig, format: Format) -> Result<(), CliError> {
    let n = require(args.n.or(file.n), "--n")?;
    let lambda = require(args.lambda.or(file.lambda), "--lambda")?;
    let xi = require(args.xi.or(file.xi), "--xi")?;
    let epsilon = require(args.epsilon.or(file.epsilon), "--epsilon")?;
    let t_max = args.t_max.or(file.t_max);
    let objective = match args.objective.or(file.objective.clone()) {
        Some(name) => parse_objective(&name)?,
        None => Objective::MinSum,
    };

    let delays = DelayModel::new(Rate::new(lambda)?, Rate::new(xi)?);
    let mut request = TuningRequest::new(n, delays, epsilon)?.with_objective(objective);
    if let Some(t_max) = t_max {
        request = request.with_t_max(t_max)?;
    }
    let result = tune(&request)?;

    let inputs = TuneInputs {
        n,
        lambda: sig12(lambda),
        xi: sig12(xi),
        epsilon: sig12(epsilon),
        t_max: t_max.map(sig12),
        objective: objective.as_str(),
    };
    let entries: Vec<TuneEntry> = result
        .pareto
        .iter()
        .map(|entry| TuneEntry {
            w: entry.w,
            r: entry.r,
            t_min: sig12(entry.t_min),
            p_at_t: sig12(entry.p_at_t),
            expected_write_latency: sig12(entry.expected_write_latency),
            expected_read_latency: sig12(entry.expected_read_latency),
            method: entry.method.as_str(),
        })
        .collect();

    match format {
        Format::Json => OutputRecord::new("tune", inputs, TuneResults { pareto: entries }).print_json(),
        Format::Csv => {
            let header = [
                "n", "lambda", "xi", "epsilon", "t_max", "objective", "w", "r", "t_min",
                "p_at_t", "expected_write_latency", "expected_read_latency", "method",
            ];
            let rows: Vec<Vec<String>> = entries
                .iter()
                .map(|entry| {
                    vec![
                        n.to_string(),
                        cell(inputs.lambda),
                        cell(inputs.xi),
                        cell(inputs.epsilon),
                        optional_cell(inputs.t_max.map(cell)),
                        inputs.objective.to_string(),
                        entry.w.to_string(),
                        entry.r.to_string(),
                        cell(entry.t_min),
                        cell(entry.p_at_t),
                        cell(entry.expected_write_latency),
                        cell(entry.expected_read_latency),
                        entry.method.to_string(),
                    ]
                })
                .collect();
            print_csv(&header, &rows);
        }
    }
    Ok(())
}
