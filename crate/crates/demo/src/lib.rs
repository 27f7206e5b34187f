//! WebAssembly bindings for the browser demo. Every export takes and returns
//! JSON text; the `*_json` functions hold the logic and run natively too.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ncs_sched::analysis::{average_loss_total, steady_cov_sequence_row, Loss};
use ncs_sched::generate::{generate_instance, GenSpec};
use ncs_sched::model::validate_schedule;
use ncs_sched::riccati::{solve_all, SolverOptions, SteadyState};
use ncs_sched::search::{
    argmin_period, sweep_periods, JMaxPolicy, MctsConfig, SearchMethod, DEFAULT_EVAL_CAP,
};
use ncs_sched::simulate::{run_closed_loop, GainMode, SimConfig};
use ncs_sched::{Instance, Schedule};

// keeps the page responsive; larger periods should go through the CLI
const DEMO_EVAL_CAP: u64 = 2_000_000;

fn load(instance: &str) -> Result<(Instance, Vec<SteadyState>), String> {
    let inst = Instance::from_json(instance).map_err(|e| format!("instance: {e}"))?;
    let ss = solve_all(inst.plants(), SolverOptions::default()).map_err(|e| e.to_string())?;
    Ok((inst, ss))
}

fn load_schedule(inst: &Instance, schedule: &str) -> Result<Schedule, String> {
    let sched = Schedule::from_json(schedule).map_err(|e| format!("schedule: {e}"))?;
    validate_schedule(inst, &sched).map_err(|e| format!("schedule: {e}"))?;
    Ok(sched)
}

fn rows(sched: &Schedule) -> Vec<Vec<u8>> {
    sched.to_raw().alloc
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn generate_json(
    plants: usize,
    channels: usize,
    n: usize,
    m: usize,
    p: usize,
    seed: u64,
) -> Result<String, String> {
    if n == 0 || m == 0 || p == 0 {
        return Err("dimensions must be at least 1".into());
    }
    generate_instance(&GenSpec {
        plants,
        channels,
        n,
        m,
        p,
        seed,
    })
    .map(|i| i.to_json())
    .map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub period: usize,
    pub loss: Loss,
    pub schedule: Vec<Vec<u8>>,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    pub best: Option<usize>,
    pub evaluations: u64,
}

/// Best loss per period; `method` is `"exhaustive"` or `"mcts"`.
pub fn sweep_json(
    instance: &str,
    from: usize,
    to: usize,
    method: &str,
    iterations: u64,
    seed: u64,
) -> Result<String, String> {
    if from == 0 || from > to {
        return Err("period range must satisfy 1 <= from <= to".into());
    }
    let (inst, ss) = load(instance)?;
    let method = match method {
        "exhaustive" => SearchMethod::Exhaustive {
            cap: DEMO_EVAL_CAP.min(DEFAULT_EVAL_CAP),
        },
        "mcts" => SearchMethod::Mcts(MctsConfig {
            iterations,
            c_uct: 1.2,
            seed,
            j_max_policy: JMaxPolicy::default(),
        }),
        other => return Err(format!("unknown method {other:?}")),
    };
    let results = sweep_periods(&inst, &ss, from..=to, method).map_err(|e| e.to_string())?;
    let best = argmin_period(&results);
    to_json(&Sweep {
        best,
        evaluations: results.iter().map(|r| r.evaluations).sum(),
        points: results
            .into_iter()
            .map(|r| SweepPoint {
                period: r.period,
                loss: r.best_loss,
                schedule: rows(&r.best_schedule),
            })
            .collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct GapTrace {
    pub period: usize,
    /// `Tr(Γ∞ Σ̄_t)` per plant over `periods` periods; empty for a plant that
    /// never transmits.
    pub traces: Vec<Vec<f64>>,
    pub losses: Vec<Loss>,
    pub total: Loss,
    pub schedule: Vec<Vec<u8>>,
}

/// Per-step gap-covariance cost of a schedule, repeated over `periods` periods.
pub fn gap_trace_json(instance: &str, schedule: &str, periods: usize) -> Result<String, String> {
    let (inst, ss) = load(instance)?;
    let sched = load_schedule(&inst, schedule)?;
    let t0 = sched.period();
    let traces = (0..inst.num_plants())
        .map(|i| {
            let Some(seq) = steady_cov_sequence_row(sched.row(i), inst.plant(i), &ss[i]) else {
                return Vec::new();
            };
            let win: Vec<f64> = seq
                .window()
                .iter()
                .map(|sig| (&ss[i].gamma * sig).trace())
                .collect();
            (0..periods * t0).map(|t| win[t % t0]).collect()
        })
        .collect();
    let rep = average_loss_total(&sched, &inst, &ss).map_err(|e| e.to_string())?;
    to_json(&GapTrace {
        period: t0,
        traces,
        losses: rep.per_plant.iter().map(|p| p.loss).collect(),
        total: rep.total,
        schedule: rows(&sched),
    })
}

#[derive(Debug, Serialize)]
pub struct SimCheck {
    pub simulated: Vec<f64>,
    pub stderr: Vec<f64>,
    pub analytic: Vec<Loss>,
    pub horizon: usize,
    pub runs: usize,
}

/// Monte Carlo losses next to the analytic ones.
pub fn simulate_json(
    instance: &str,
    schedule: &str,
    runs: usize,
    horizon: usize,
    seed: u64,
) -> Result<String, String> {
    let (inst, ss) = load(instance)?;
    let sched = load_schedule(&inst, schedule)?;
    let horizon = if horizon == 0 { 200 * sched.period() } else { horizon };
    let cfg = SimConfig {
        horizon,
        runs,
        seed,
        gains: GainMode::SteadyOnly,
    };
    let sim = run_closed_loop(&inst, &sched, &ss, &cfg).map_err(|e| e.to_string())?;
    let rep = average_loss_total(&sched, &inst, &ss).map_err(|e| e.to_string())?;
    to_json(&SimCheck {
        simulated: sim.per_plant_avg_loss,
        stderr: sim.stderr,
        analytic: rep.per_plant.iter().map(|p| p.loss).collect(),
        horizon,
        runs,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn generate(
    plants: usize,
    channels: usize,
    n: usize,
    m: usize,
    p: usize,
    seed: u64,
) -> Result<String, JsValue> {
    js(generate_json(plants, channels, n, m, p, seed))
}

#[wasm_bindgen]
pub fn sweep(
    instance: &str,
    from: usize,
    to: usize,
    method: &str,
    iterations: u64,
    seed: u64,
) -> Result<String, JsValue> {
    js(sweep_json(instance, from, to, method, iterations, seed))
}

#[wasm_bindgen]
pub fn gap_trace(instance: &str, schedule: &str, periods: usize) -> Result<String, JsValue> {
    js(gap_trace_json(instance, schedule, periods))
}

#[wasm_bindgen]
pub fn simulate(
    instance: &str,
    schedule: &str,
    runs: usize,
    horizon: usize,
    seed: u64,
) -> Result<String, JsValue> {
    js(simulate_json(instance, schedule, runs, horizon, seed))
}
