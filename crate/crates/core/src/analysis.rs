//! Deterministic evaluation of periodic schedules.
//!
//! The infinite-horizon average loss of plant `i` under a `T₀`-periodic row
//! `σ` is
//!
//! ```text
//! J = Tr(S∞W) + Tr(F∞Γ∞) + (1/T₀) Σ_{t=T₀}^{2T₀−1} Tr(Γ∞ Σ̄_t)
//! ```
//!
//! where `Σ̄` is the sensor/controller estimate-gap covariance, reset to zero
//! in every transmitting slot and otherwise grown by `A Σ̄ Aᵀ + Π∞`. A plant
//! that never transmits has a finite loss only when `A` is Schur stable.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{Instance, PlantSpec, Schedule};
use crate::riccati::{self, control_gain, kalman_quantities, RiccatiError, SteadyState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("plant {0} never transmits; the periodic covariance sequence is undefined")]
    UncoveredPlant(usize),
    #[error("expected {expected} {what}, got {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

/// Average loss value; `Divergent` orders above every finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Finite(f64),
    Divergent,
}

impl Loss {
    pub fn value(self) -> Option<f64> {
        match self {
            Loss::Finite(v) => Some(v),
            Loss::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, Loss::Divergent)
    }

    /// Total order: finite values by `f64::total_cmp`, then `Divergent`.
    pub fn total_cmp(&self, other: &Loss) -> Ordering {
        match (self, other) {
            (Loss::Finite(a), Loss::Finite(b)) => a.total_cmp(b),
            (Loss::Finite(_), Loss::Divergent) => Ordering::Less,
            (Loss::Divergent, Loss::Finite(_)) => Ordering::Greater,
            (Loss::Divergent, Loss::Divergent) => Ordering::Equal,
        }
    }

    /// Sum in iteration order; divergent if any term is.
    pub fn sum<I: IntoIterator<Item = Loss>>(items: I) -> Loss {
        let mut acc = 0.0;
        for l in items {
            match l {
                Loss::Finite(v) => acc += v,
                Loss::Divergent => return Loss::Divergent,
            }
        }
        Loss::Finite(acc)
    }
}

impl PartialOrd for Loss {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Loss::Finite(a), Loss::Finite(b)) => a.partial_cmp(b),
            _ => Some(self.total_cmp(other)),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::Finite(v) => write!(f, "{v}"),
            Loss::Divergent => f.write_str("DIVERGENT"),
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = std::num::ParseFloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "DIVERGENT" {
            Ok(Loss::Divergent)
        } else {
            s.trim().parse().map(Loss::Finite)
        }
    }
}

impl Serialize for Loss {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Loss::Finite(v) => s.serialize_f64(*v),
            Loss::Divergent => s.serialize_str("DIVERGENT"),
        }
    }
}

impl<'de> Deserialize<'de> for Loss {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Loss::Finite(v)),
            Repr::Tag(t) if t == "DIVERGENT" => Ok(Loss::Divergent),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("bad loss {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Covered,
    StableUncovered,
    UnstableUncovered,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Covered => "covered",
            Branch::StableUncovered => "stable_uncovered",
            Branch::UnstableUncovered => "unstable_uncovered",
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "covered" => Ok(Branch::Covered),
            "stable_uncovered" => Ok(Branch::StableUncovered),
            "unstable_uncovered" => Ok(Branch::UnstableUncovered),
            other => Err(format!("unknown branch {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantLoss {
    pub loss: Loss,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub per_plant: Vec<PlantLoss>,
    pub total: Loss,
}

/// Elapsed time since the last transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElapsedTimes {
    pub tau: Vec<usize>,
    /// `Some(0)` when the sequence is periodic from `t = 0`, `Some(T₀)` when
    /// only the tail from the second period is, `None` for a plant that
    /// never transmits.
    pub preperiod: Option<usize>,
}

/// `τ_t` for `t ∈ [0, horizon)` with `τ_t = 0` for `t < 0`.
pub fn elapsed_times_row(row: &[bool], horizon: usize) -> ElapsedTimes {
    let period = row.len();
    let mut tau = Vec::with_capacity(horizon);
    let mut prev = 0usize;
    for t in 0..horizon {
        let cur = if row[t % period] { 0 } else { prev + 1 };
        tau.push(cur);
        prev = cur;
    }
    let preperiod = if !row.iter().any(|&b| b) {
        None
    } else if (0..horizon.saturating_sub(period)).all(|t| tau[t] == tau[t + period]) {
        Some(0)
    } else {
        Some(period)
    };
    ElapsedTimes { tau, preperiod }
}

pub fn elapsed_times(sched: &Schedule, plant_idx: usize, horizon: usize) -> ElapsedTimes {
    elapsed_times_row(sched.row(plant_idx), horizon)
}

/// `Σ̄_t` for `t ∈ [0, 2T₀)`, started from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyCovSeq {
    pub sigma_bar: Vec<DMatrix<f64>>,
}

impl SteadyCovSeq {
    /// The periodic window `[T₀, 2T₀)`.
    pub fn window(&self) -> &[DMatrix<f64>] {
        &self.sigma_bar[self.sigma_bar.len() / 2..]
    }
}

fn gap_recursion(row: &[bool], a: &DMatrix<f64>, pi: &DMatrix<f64>, len: usize) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let period = row.len();
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(len);
    let mut prev = DMatrix::zeros(n, n);
    for t in 0..len {
        let cur = if row[t % period] {
            DMatrix::zeros(n, n)
        } else {
            a * &prev * a.transpose() + pi
        };
        out.push(cur.clone());
        prev = cur;
    }
    out
}

pub fn steady_cov_sequence_row(
    row: &[bool],
    plant: &PlantSpec,
    ss: &SteadyState,
) -> Option<SteadyCovSeq> {
    if !row.iter().any(|&b| b) {
        return None;
    }
    Some(SteadyCovSeq {
        sigma_bar: gap_recursion(row, &plant.a, &ss.pi, 2 * row.len()),
    })
}

pub fn steady_cov_sequence(
    sched: &Schedule,
    plant_idx: usize,
    plant: &PlantSpec,
    ss: &SteadyState,
) -> Result<SteadyCovSeq, AnalysisError> {
    steady_cov_sequence_row(sched.row(plant_idx), plant, ss)
        .ok_or(AnalysisError::UncoveredPlant(plant_idx))
}

/// `Tr(AB)` without forming the product.
fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Schedule-independent part of the average loss, `Tr(S∞W) + Tr(F∞Γ∞)`.
pub fn base_loss(plant: &PlantSpec, ss: &SteadyState) -> f64 {
    trace_product(&ss.s, &plant.w) + trace_product(&ss.f, &ss.gamma)
}

/// Average loss of one plant under the periodic row `row`.
pub fn average_loss_row(row: &[bool], plant: &PlantSpec, ss: &SteadyState) -> PlantLoss {
    let base = base_loss(plant, ss);
    match steady_cov_sequence_row(row, plant, ss) {
        Some(seq) => {
            let mut terms: Vec<f64> = seq
                .window()
                .iter()
                .map(|sig| trace_product(&ss.gamma, sig))
                .collect();
            // sorted summation makes the value independent of cyclic shifts
            terms.sort_by(f64::total_cmp);
            let window: f64 = terms.iter().sum();
            PlantLoss {
                loss: Loss::Finite(base + window / row.len() as f64),
                branch: Branch::Covered,
            }
        }
        None => match &ss.z {
            Some(z) if ss.is_stable() => PlantLoss {
                loss: Loss::Finite(base + trace_product(z, &ss.gamma)),
                branch: Branch::StableUncovered,
            },
            _ => PlantLoss {
                loss: Loss::Divergent,
                branch: Branch::UnstableUncovered,
            },
        },
    }
}

pub fn average_loss_plant(
    sched: &Schedule,
    plant_idx: usize,
    plant: &PlantSpec,
    ss: &SteadyState,
) -> PlantLoss {
    average_loss_row(sched.row(plant_idx), plant, ss)
}

pub fn average_loss_total(
    sched: &Schedule,
    instance: &Instance,
    ss_all: &[SteadyState],
) -> Result<LossReport, AnalysisError> {
    let n = instance.num_plants();
    if ss_all.len() != n {
        return Err(AnalysisError::CountMismatch {
            what: "steady states",
            expected: n,
            found: ss_all.len(),
        });
    }
    if sched.num_rows() != n {
        return Err(AnalysisError::CountMismatch {
            what: "schedule rows",
            expected: n,
            found: sched.num_rows(),
        });
    }
    let per_plant: Vec<PlantLoss> = instance
        .plants()
        .iter()
        .zip(ss_all)
        .enumerate()
        .map(|(i, (p, ss))| average_loss_plant(sched, i, p, ss))
        .collect();
    let total = Loss::sum(per_plant.iter().map(|p| p.loss));
    Ok(LossReport { per_plant, total })
}

/// Backward pass of the finite-horizon control problem: `S_0..=S_T` and
/// the gains `L_t`, `Γ_t` for `t < T` (both built from `S_{t+1}`).
pub struct ControlPass {
    pub s: Vec<DMatrix<f64>>,
    pub l: Vec<DMatrix<f64>>,
    pub gamma: Vec<DMatrix<f64>>,
}

pub fn control_pass(plant: &PlantSpec, horizon: usize) -> Result<ControlPass, RiccatiError> {
    let mut s = vec![DMatrix::zeros(0, 0); horizon + 1];
    s[horizon] = plant.qf.clone();
    let mut l = vec![DMatrix::zeros(0, 0); horizon];
    let mut gamma = vec![DMatrix::zeros(0, 0); horizon];
    for t in (0..horizon).rev() {
        s[t] = riccati::control_riccati_step(plant, &s[t + 1])
            .ok_or(RiccatiError::SingularControlWeight)?;
        let (lt, gt) = control_gain(plant, &s[t + 1])?;
        l[t] = lt;
        gamma[t] = gt;
    }
    Ok(ControlPass { s, l, gamma })
}

/// Forward pass of the sensor Kalman filter from `P_{0|-1} = X₀`.
pub struct FilterPass {
    pub k: Vec<DMatrix<f64>>,
    /// `P_{t|t}`.
    pub post: Vec<DMatrix<f64>>,
    /// Innovation-injection covariance `Π_t = K_t C P_{t|t-1}`.
    pub pi: Vec<DMatrix<f64>>,
}

pub fn filter_pass(plant: &PlantSpec, horizon: usize) -> Result<FilterPass, RiccatiError> {
    let mut prior = plant.x0_cov.clone();
    let mut out = FilterPass {
        k: Vec::with_capacity(horizon),
        post: Vec::with_capacity(horizon),
        pi: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        let (k, post, pi) = kalman_quantities(plant, &prior)?;
        prior = crate::model::symmetrize(&(&plant.a * &post * plant.a.transpose() + &plant.w));
        out.k.push(k);
        out.post.push(post);
        out.pi.push(pi);
    }
    Ok(out)
}

/// Exact time-varying gap covariance `Σ_t`, `t ∈ [0, horizon)`, driven by
/// the transient `Π_t` of the sensor filter.
pub fn transient_cov_sequence(
    row: &[bool],
    plant: &PlantSpec,
    horizon: usize,
) -> Result<Vec<DMatrix<f64>>, RiccatiError> {
    let filt = filter_pass(plant, horizon)?;
    Ok(transient_from_filter(row, &plant.a, &filt.pi))
}

fn transient_from_filter(row: &[bool], a: &DMatrix<f64>, pi: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let period = row.len();
    let mut out = Vec::with_capacity(pi.len());
    let mut prev = DMatrix::zeros(n, n);
    for (t, pi_t) in pi.iter().enumerate() {
        let cur = if row[t % period] {
            DMatrix::zeros(n, n)
        } else {
            a * &prev * a.transpose() + pi_t
        };
        out.push(cur.clone());
        prev = cur;
    }
    out
}

/// Minimum expected loss `J_T` of one plant over `horizon` steps under the
/// (periodically extended) row `row`.
pub fn finite_horizon_loss_row(
    row: &[bool],
    plant: &PlantSpec,
    horizon: usize,
) -> Result<f64, RiccatiError> {
    let ctrl = control_pass(plant, horizon)?;
    let filt = filter_pass(plant, horizon)?;
    let gaps = transient_from_filter(row, &plant.a, &filt.pi);
    let x0 = &plant.x0_mean;
    let mut total = (x0.transpose() * &ctrl.s[0] * x0)[(0, 0)] + trace_product(&ctrl.s[0], &plant.x0_cov);
    for t in 0..horizon {
        total += trace_product(&ctrl.s[t + 1], &plant.w);
        total += trace_product(&filt.post[t], &ctrl.gamma[t]);
        total += trace_product(&ctrl.gamma[t], &gaps[t]);
    }
    Ok(total)
}

pub fn finite_horizon_loss(
    sched: &Schedule,
    plant_idx: usize,
    plant: &PlantSpec,
    horizon: usize,
) -> Result<f64, RiccatiError> {
    finite_horizon_loss_row(sched.row(plant_idx), plant, horizon)
}

/// Average-loss evaluator with a per-plant cache keyed by the exact row.
///
/// Cached values are bit-identical to [`average_loss_row`].
pub struct LossEvaluator<'a> {
    instance: &'a Instance,
    steady: &'a [SteadyState],
    cache: Vec<HashMap<Vec<bool>, PlantLoss>>,
    evaluations: u64,
}

impl<'a> LossEvaluator<'a> {
    pub fn new(instance: &'a Instance, steady: &'a [SteadyState]) -> Result<Self, AnalysisError> {
        if steady.len() != instance.num_plants() {
            return Err(AnalysisError::CountMismatch {
                what: "steady states",
                expected: instance.num_plants(),
                found: steady.len(),
            });
        }
        Ok(LossEvaluator {
            instance,
            steady,
            cache: vec![HashMap::new(); instance.num_plants()],
            evaluations: 0,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn steady(&self) -> &[SteadyState] {
        self.steady
    }

    /// Number of full-schedule evaluations requested so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn plant_loss(&mut self, plant_idx: usize, row: &[bool]) -> PlantLoss {
        if let Some(v) = self.cache[plant_idx].get(row) {
            return *v;
        }
        let v = average_loss_row(
            row,
            self.instance.plant(plant_idx),
            &self.steady[plant_idx],
        );
        self.cache[plant_idx].insert(row.to_vec(), v);
        v
    }

    /// Total average loss of a schedule; same summation order as
    /// [`average_loss_total`].
    pub fn total(&mut self, sched: &Schedule) -> Loss {
        self.evaluations += 1;
        let mut acc = 0.0;
        for i in 0..sched.num_rows() {
            match self.plant_loss(i, sched.row(i)).loss {
                Loss::Finite(v) => acc += v,
                Loss::Divergent => return Loss::Divergent,
            }
        }
        Loss::Finite(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::SolverOptions;

    fn bits(r: &[u8]) -> Vec<bool> {
        r.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn table_one_elapsed_times() {
        let e = elapsed_times_row(&bits(&[0, 1, 1, 1, 0]), 10);
        assert_eq!(e.tau, vec![1, 0, 0, 0, 1, 2, 0, 0, 0, 1]);
        assert_eq!(e.preperiod, Some(5));

        let e = elapsed_times_row(&bits(&[1, 0, 1, 1, 1]), 10);
        assert_eq!(e.tau, vec![0, 1, 0, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(e.preperiod, Some(0));

        let e = elapsed_times_row(&bits(&[1, 1, 0, 0, 1]), 10);
        assert_eq!(e.tau, vec![0, 0, 1, 2, 0, 0, 0, 1, 2, 0]);
    }

    #[test]
    fn all_ones_and_all_zeros() {
        let e = elapsed_times_row(&bits(&[1, 1, 1]), 9);
        assert!(e.tau.iter().all(|&t| t == 0));
        let e = elapsed_times_row(&bits(&[0, 0]), 6);
        assert_eq!(e.tau, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(e.preperiod, None);
    }

    fn scalar_ss(a: f64) -> (PlantSpec, SteadyState) {
        let p = PlantSpec::scalar(a, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let ss = SteadyState::solve(&p, SolverOptions::default()).unwrap();
        (p, ss)
    }

    #[test]
    fn gap_sequence_single_step() {
        let (p, ss) = scalar_ss(0.5);
        let pi = ss.pi[(0, 0)];
        let seq = steady_cov_sequence_row(&bits(&[1, 0]), &p, &ss).unwrap();
        let v: Vec<f64> = seq.sigma_bar.iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(v, vec![0.0, pi, 0.0, pi]);
    }

    #[test]
    fn gap_sequence_two_steps() {
        let (p, ss) = scalar_ss(1.3);
        let pi = ss.pi[(0, 0)];
        let seq = steady_cov_sequence_row(&bits(&[1, 0, 0]), &p, &ss).unwrap();
        // hand unroll
        let two = 1.3 * pi * 1.3 + pi;
        let expected = [0.0, pi, two, 0.0, pi, two];
        for (m, e) in seq.sigma_bar.iter().zip(expected) {
            assert!((m[(0, 0)] - e).abs() <= 1e-15 * e.abs().max(1.0));
        }
    }

    #[test]
    fn all_ones_row_gets_base_loss() {
        let (p, ss) = scalar_ss(1.4);
        let seq = steady_cov_sequence_row(&bits(&[1, 1, 1]), &p, &ss).unwrap();
        assert!(seq.sigma_bar.iter().all(|m| m.amax() == 0.0));
        let l = average_loss_row(&bits(&[1, 1, 1]), &p, &ss);
        assert_eq!(l.branch, Branch::Covered);
        let expected = ss.s[(0, 0)] * 1.0 + ss.f[(0, 0)] * ss.gamma[(0, 0)];
        assert!((l.loss.value().unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn uncovered_stable_and_unstable() {
        let (p, ss) = scalar_ss(0.5);
        let l = average_loss_row(&bits(&[0, 0]), &p, &ss);
        assert_eq!(l.branch, Branch::StableUncovered);
        let z = ss.pi[(0, 0)] / (1.0 - 0.25);
        let expected = ss.s[(0, 0)] + ss.f[(0, 0)] * ss.gamma[(0, 0)] + z * ss.gamma[(0, 0)];
        assert!((l.loss.value().unwrap() - expected).abs() < 1e-12);

        let (p, ss) = scalar_ss(1.0);
        let l = average_loss_row(&bits(&[0]), &p, &ss);
        assert_eq!(l.branch, Branch::UnstableUncovered);
        assert!(l.loss.is_divergent());
    }

    #[test]
    fn uncovered_row_has_no_sequence() {
        let (p, ss) = scalar_ss(0.5);
        let s = Schedule::from_bits(&[vec![1, 1], vec![0, 0]]).unwrap();
        assert_eq!(
            steady_cov_sequence(&s, 1, &p, &ss).unwrap_err(),
            AnalysisError::UncoveredPlant(1)
        );
    }

    #[test]
    fn divergent_orders_last() {
        assert!(Loss::Divergent > Loss::Finite(1e300));
        assert!(Loss::Finite(1.0) < Loss::Finite(2.0));
        assert_eq!(
            Loss::sum([Loss::Finite(1.0), Loss::Divergent]),
            Loss::Divergent
        );
        assert_eq!("DIVERGENT".parse::<Loss>().unwrap(), Loss::Divergent);
    }

    #[test]
    fn one_step_finite_horizon() {
        // A = 0, everything else 1, σ₀ = 1: S₁ = Qf, S₀ = Q, L₀ = 0
        let mut p = PlantSpec::scalar(0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        p.x0_mean = nalgebra::DVector::from_element(1, 2.0);
        p.x0_cov = DMatrix::from_element(1, 1, 3.0);
        let j = finite_horizon_loss_row(&[true], &p, 1).unwrap();
        assert!((j - (4.0 + 3.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn two_step_finite_horizon_by_hand() {
        // scalar a=1, b=c=q=qf=r=w=v=1, x̄₀=0, X₀=1, row {1, 0}
        let p = PlantSpec::scalar(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        // backward: S2 = 1; S1 = 1 + 1 − 1/2 = 1.5; S0 = 1.5 + 1 − 1.5²/2.5 = 1.6
        // L1 = 1/2, Γ1 = 1/4·2 = 0.5; L0 = 1.5/2.5 = 0.6, Γ0 = 0.36·2.5 = 0.9
        // filter: P0|-1 = 1, K0 = .5, P0|0 = .5, Π0 = .5
        //         P1|0 = 1.5, K1 = .6, P1|1 = .6, Π1 = .9
        // gaps: Σ0 = 0 (σ=1), Σ1 = 0 + Π1 = .9
        let expected = 1.6 * 1.0 + (1.0 + 1.5) + (0.5 * 0.9 + 0.6 * 0.5) + 0.5 * 0.9;
        let j = finite_horizon_loss_row(&[true, false], &p, 2).unwrap();
        assert!((j - expected).abs() < 1e-14, "{j} vs {expected}");
    }

    #[test]
    fn noiseless_origin_costs_nothing() {
        let mut p = PlantSpec::scalar(1.2, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0);
        p.x0_cov = DMatrix::zeros(1, 1);
        let j = finite_horizon_loss_row(&[true, false, false], &p, 50).unwrap();
        assert_eq!(j, 0.0);
    }
}
