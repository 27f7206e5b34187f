//! Command implementations for the `ncs-sched` binary. Every command maps its
//! arguments and input files to an output string; `main` only does I/O.

pub mod report;

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use ncs_sched::analysis::{average_loss_total, AnalysisError};
use ncs_sched::generate::{generate_instance, GenSpec};
use ncs_sched::model::{validate_schedule, LoadError};
use ncs_sched::riccati::{solve_all, SolverOptions, SteadyState};
use ncs_sched::search::{
    argmin_period, exhaustive_search, mcts_search, sweep_periods, JMaxPolicy, MctsConfig,
    SearchError, SearchMethod, SearchResult, DEFAULT_EVAL_CAP,
};
use ncs_sched::simulate::{run_closed_loop, GainMode, SimConfig, SimError};
use ncs_sched::{Instance, Schedule};

use report::{SimLine, SimReport};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const BUDGET: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Usage(_) => exit::USAGE,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Budget(_) => exit::BUDGET,
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::SearchSpaceTooLarge { .. } => CliError::Budget(e.to_string()),
            SearchError::ZeroPeriod | SearchError::BadConfig => CliError::Usage(e.to_string()),
            SearchError::Analysis(a) => analysis_err(a),
        }
    }
}

fn analysis_err(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Riccati(_) => CliError::Numerical(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::BadConfig => CliError::Usage(e.to_string()),
            SimError::Model(_) | SimError::CountMismatch { .. } => {
                CliError::Validation(e.to_string())
            }
            SimError::Riccati(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ncs-sched", version, about = "Average LQG loss and search for periodic channel schedules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random instance with Uni[0,1) entries, projected to a valid model.
    GenInstance(GenArgs),
    /// Per-plant and total average loss of a schedule.
    Evaluate(EvalArgs),
    /// Brute-force best schedule for one period.
    Exhaustive(ExhaustiveArgs),
    /// Monte Carlo tree search for one period.
    Mcts(MctsArgs),
    /// Best schedule for each period in a range.
    Sweep(SweepArgs),
    /// Monte Carlo closed-loop losses next to the analytic ones.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub plants: usize,
    #[arg(long)]
    pub channels: usize,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub schedule: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExhaustiveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub period: usize,
    #[arg(long, default_value_t = DEFAULT_EVAL_CAP)]
    pub eval_cap: u64,
    /// Also write the best schedule as JSON.
    #[arg(long)]
    pub schedule_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct MctsParams {
    #[arg(long, default_value_t = 40_000)]
    pub iterations: u64,
    #[arg(long, default_value_t = 1.2)]
    pub c_uct: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl MctsParams {
    fn config(&self) -> MctsConfig {
        MctsConfig {
            iterations: self.iterations,
            c_uct: self.c_uct,
            seed: self.seed,
            j_max_policy: JMaxPolicy::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct MctsArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub period: usize,
    #[command(flatten)]
    pub params: MctsParams,
    #[arg(long)]
    pub schedule_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exhaustive,
    Mcts,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Inclusive range `A..B`, or a single period.
    #[arg(long, value_parser = parse_periods)]
    pub periods: RangeInclusive<usize>,
    #[arg(long, value_enum, default_value_t = Method::Exhaustive)]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_EVAL_CAP)]
    pub eval_cap: u64,
    #[command(flatten)]
    pub params: MctsParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Gains {
    Steady,
    Transient,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub runs: usize,
    /// Defaults to 200 periods.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Gains::Steady)]
    pub gains: Gains,
}

pub fn parse_periods(s: &str) -> Result<RangeInclusive<usize>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad period {t:?}: {e}"))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let k = num(s)?;
            (k, k)
        }
    };
    if a == 0 || a > b {
        return Err(format!("period range {s:?} must satisfy 1 <= A <= B"));
    }
    Ok(a..=b)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_err(path: &Path, e: LoadError) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    Instance::from_json(&read(path)?).map_err(|e| load_err(path, e))
}

pub fn load_schedule(path: &Path, instance: &Instance) -> Result<Schedule, CliError> {
    let sched = Schedule::from_json(&read(path)?).map_err(|e| load_err(path, e))?;
    validate_schedule(instance, &sched)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(sched)
}

pub fn steady_states(instance: &Instance) -> Result<Vec<SteadyState>, CliError> {
    solve_all(instance.plants(), SolverOptions::default())
        .map_err(|e| CliError::Numerical(e.to_string()))
}

/// Runs one command and returns the report text. Side files such as
/// `--schedule-out` are written here.
pub fn run(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::GenInstance(a) => cmd_gen_instance(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Exhaustive(a) => {
            let instance = load_instance(&a.instance)?;
            let steady = steady_states(&instance)?;
            let res = exhaustive_search(&instance, &steady, a.period, a.eval_cap)?;
            single_result("exhaustive", res, a.schedule_out.as_deref())
        }
        Command::Mcts(a) => {
            let instance = load_instance(&a.instance)?;
            let steady = steady_states(&instance)?;
            let res = mcts_search(&instance, &steady, a.period, &a.params.config())?;
            single_result("mcts", res, a.schedule_out.as_deref())
        }
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

pub fn cmd_gen_instance(a: &GenArgs) -> Result<String, CliError> {
    let spec = GenSpec {
        plants: a.plants,
        channels: a.channels,
        n: a.n,
        m: a.m,
        p: a.p,
        seed: a.seed,
    };
    if a.n == 0 || a.m == 0 || a.p == 0 {
        return Err(CliError::Usage("dimensions n, m, p must be at least 1".into()));
    }
    generate_instance(&spec)
        .map(|inst| inst.to_json())
        .map_err(|e| CliError::Validation(e.to_string()))
}

pub fn cmd_evaluate(a: &EvalArgs) -> Result<String, CliError> {
    let instance = load_instance(&a.instance)?;
    let sched = load_schedule(&a.schedule, &instance)?;
    let steady = steady_states(&instance)?;
    let rep = average_loss_total(&sched, &instance, &steady).map_err(analysis_err)?;
    Ok(report::loss_report(&sched, instance.channels(), &rep))
}

fn single_result(
    title: &str,
    res: SearchResult,
    schedule_out: Option<&Path>,
) -> Result<String, CliError> {
    if let Some(path) = schedule_out {
        write_file(path, &res.best_schedule.to_json())?;
    }
    Ok(report::search_table(title, std::slice::from_ref(&res), None))
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<String, CliError> {
    let instance = load_instance(&a.instance)?;
    let steady = steady_states(&instance)?;
    let method = match a.method {
        Method::Exhaustive => SearchMethod::Exhaustive { cap: a.eval_cap },
        Method::Mcts => SearchMethod::Mcts(a.params.config()),
    };
    let results = sweep_periods(&instance, &steady, a.periods.clone(), method)?;
    let flag = argmin_period(&results);
    let title = match a.method {
        Method::Exhaustive => "sweep exhaustive",
        Method::Mcts => "sweep mcts",
    };
    Ok(report::search_table(title, &results, flag))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let instance = load_instance(&a.instance)?;
    let sched = load_schedule(&a.schedule, &instance)?;
    let steady = steady_states(&instance)?;
    let horizon = a.horizon.unwrap_or(200 * sched.period());
    let gains = match a.gains {
        Gains::Steady => GainMode::SteadyOnly,
        Gains::Transient => GainMode::Transient,
    };
    let cfg = SimConfig {
        horizon,
        runs: a.runs,
        seed: a.seed,
        gains,
    };
    let sim = run_closed_loop(&instance, &sched, &steady, &cfg)?;
    let analytic = average_loss_total(&sched, &instance, &steady).map_err(analysis_err)?;
    let rep = SimReport {
        per_plant: (0..instance.num_plants())
            .map(|i| SimLine {
                simulated: sim.per_plant_avg_loss[i],
                stderr: sim.stderr[i],
                analytic: analytic.per_plant[i].loss,
            })
            .collect(),
        total_simulated: sim.total_avg_loss,
        total_analytic: analytic.total,
    };
    let header = [
        ("plants", instance.num_plants().to_string()),
        ("channels", instance.channels().to_string()),
        ("period", sched.period().to_string()),
        ("runs", a.runs.to_string()),
        ("horizon", horizon.to_string()),
        ("seed", a.seed.to_string()),
        (
            "gains",
            match a.gains {
                Gains::Steady => "steady",
                Gains::Transient => "transient",
            }
            .to_string(),
        ),
    ];
    Ok(report::sim_report(&header, &rep))
}
