//! Monte Carlo closed-loop simulation of the full loop: plant, sensor Kalman
//! filter, controller-side predictor gated by the schedule, and the
//! certainty-equivalent control law `u = −L x̂ᶜ`.
//!
//! Within a slot the order is: sense, schedule gate, estimate, control,
//! actuate. Every `(run, plant)` pair draws from its own ChaCha substream
//! keyed by the master seed, so results do not depend on thread count.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{control_pass, filter_pass};
use crate::model::{symmetrize, validate_schedule, Instance, ModelError, PlantSpec, Schedule};
use crate::riccati::{RiccatiError, SteadyState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon and runs must both be at least 1")]
    BadConfig,
    #[error("expected {expected} steady states, got {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// Time-varying `L_t`, `K_t` of the finite-horizon problem.
    Transient,
    /// Constant `L∞`, `K∞`.
    SteadyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub gains: GainMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Mean over runs of the realized loss divided by the horizon.
    pub per_plant_avg_loss: Vec<f64>,
    pub total_avg_loss: f64,
    /// Standard error of each per-plant mean.
    pub stderr: Vec<f64>,
}

/// Output of one Kalman update.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanUpdate {
    /// `x̂_{t|t}`.
    pub mean: DVector<f64>,
    /// `P_{t|t}`.
    pub cov: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// Covariance injected into the sensor estimate by this update, `K_t C P_{t|t-1}`.
    pub pi: DMatrix<f64>,
}

/// Measurement update from a predicted mean and covariance.
pub fn kalman_update(
    plant: &PlantSpec,
    pred_mean: &DVector<f64>,
    pred_cov: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<KalmanUpdate, RiccatiError> {
    let (gain, cov, pi) = crate::riccati::kalman_quantities(plant, pred_cov)?;
    let mean = pred_mean + &gain * (y - &plant.c * pred_mean);
    Ok(KalmanUpdate {
        mean,
        cov,
        gain,
        pi,
    })
}

/// Predict from `(x̂_{t-1|t-1}, P_{t-1|t-1}, u_{t-1})`, then update with `y_t`.
pub fn kalman_step(
    plant: &PlantSpec,
    prev_mean: &DVector<f64>,
    prev_cov: &DMatrix<f64>,
    u_prev: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<KalmanUpdate, RiccatiError> {
    let pred_mean = &plant.a * prev_mean + &plant.b * u_prev;
    let pred_cov = symmetrize(&(&plant.a * prev_cov * plant.a.transpose() + &plant.w));
    kalman_update(plant, &pred_mean, &pred_cov, y)
}

/// Controller-side estimate: open-loop prediction, overwritten by the
/// sensor estimate when one arrives.
pub fn controller_estimator_step(
    plant: &PlantSpec,
    prev_c_mean: &DVector<f64>,
    u_prev: &DVector<f64>,
    sensor_mean: Option<&DVector<f64>>,
) -> DVector<f64> {
    match sensor_mean {
        Some(x) => x.clone(),
        None => &plant.a * prev_c_mean + &plant.b * u_prev,
    }
}

/// A factor `F` with `F Fᵀ = cov`: Cholesky when positive definite, otherwise
/// from the eigen-decomposition with negative eigenvalues clipped to zero.
pub fn noise_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let n = cov.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if let Some(ch) = cov.clone().cholesky() {
        return ch.l();
    }
    let eig = SymmetricEigen::new(symmetrize(cov));
    let mut f = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}

/// Gains used by the simulated controller and sensor filter.
#[derive(Debug, Clone)]
pub enum PlantGains {
    Steady {
        l: DMatrix<f64>,
        k: DMatrix<f64>,
    },
    Transient {
        l: Vec<DMatrix<f64>>,
        k: Vec<DMatrix<f64>>,
    },
}

impl PlantGains {
    pub fn steady(ss: &SteadyState) -> Self {
        PlantGains::Steady {
            l: ss.l.clone(),
            k: ss.k.clone(),
        }
    }

    pub fn transient(plant: &PlantSpec, horizon: usize) -> Result<Self, RiccatiError> {
        let ctrl = control_pass(plant, horizon)?;
        let filt = filter_pass(plant, horizon)?;
        Ok(PlantGains::Transient {
            l: ctrl.l,
            k: filt.k,
        })
    }

    fn l(&self, t: usize) -> &DMatrix<f64> {
        match self {
            PlantGains::Steady { l, .. } => l,
            PlantGains::Transient { l, .. } => &l[t],
        }
    }

    fn k(&self, t: usize) -> &DMatrix<f64> {
        match self {
            PlantGains::Steady { k, .. } => k,
            PlantGains::Transient { k, .. } => &k[t],
        }
    }
}

/// Precomputed noise factors for one plant.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    w: DMatrix<f64>,
    v: DMatrix<f64>,
    x0: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(plant: &PlantSpec) -> Self {
        NoiseModel {
            w: noise_factor(&plant.w),
            v: noise_factor(&plant.v),
            x0: noise_factor(&plant.x0_cov),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream for one `(run, plant)` pair.
pub fn substream(seed: u64, run: u64, plant: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed) ^ splitmix64(run.wrapping_mul(0xA24B_AED4_963E_E407));
    state ^= splitmix64(plant.wrapping_add(0x5851_F42D_4C95_7F2D));
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn gaussian(rng: &mut ChaCha8Rng, factor: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_iterator(factor.ncols(), (0..factor.ncols()).map(|_| rng.sample(StandardNormal)));
    factor * z
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// One simulated trajectory of one plant.
#[derive(Debug, Clone)]
pub struct PlantRun {
    /// Realized `xᵀ_T Qf x_T + Σ_{t<T} (xᵀQx + uᵀRu)`.
    pub cost: f64,
    /// `x̂ˢ_{t|t} − x̂ᶜ_{t|t}` per step, when requested.
    pub gaps: Option<Vec<DVector<f64>>>,
}

/// Simulates one plant for `horizon` steps under the periodic row `row`.
pub fn run_plant(
    plant: &PlantSpec,
    row: &[bool],
    gains: &PlantGains,
    noise: &NoiseModel,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    record_gaps: bool,
) -> PlantRun {
    let period = row.len();
    let mut x = &plant.x0_mean + gaussian(rng, &noise.x0);
    let mut xs = plant.x0_mean.clone();
    let mut xc = plant.x0_mean.clone();
    let mut u = DVector::zeros(plant.m());
    let mut cost = CompensatedSum::default();
    let mut gaps = record_gaps.then(|| Vec::with_capacity(horizon));

    for t in 0..horizon {
        let y = &plant.c * &x + gaussian(rng, &noise.v);
        let (pred_s, pred_c) = if t == 0 {
            (xs.clone(), xc.clone())
        } else {
            (
                &plant.a * &xs + &plant.b * &u,
                &plant.a * &xc + &plant.b * &u,
            )
        };
        xs = &pred_s + gains.k(t) * (&y - &plant.c * &pred_s);
        xc = if row[t % period] { xs.clone() } else { pred_c };
        if let Some(g) = gaps.as_mut() {
            g.push(&xs - &xc);
        }
        u = -(gains.l(t) * &xc);
        cost.add((x.transpose() * &plant.q * &x)[(0, 0)]);
        cost.add((u.transpose() * &plant.r * &u)[(0, 0)]);
        x = &plant.a * &x + &plant.b * &u + gaussian(rng, &noise.w);
    }
    cost.add((x.transpose() * &plant.qf * &x)[(0, 0)]);
    PlantRun {
        cost: cost.value(),
        gaps,
    }
}

/// Runs `cfg.runs` independent closed-loop simulations of every plant.
pub fn run_closed_loop(
    instance: &Instance,
    sched: &Schedule,
    steady: &[SteadyState],
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    if cfg.horizon == 0 || cfg.runs == 0 {
        return Err(SimError::BadConfig);
    }
    validate_schedule(instance, sched)?;
    let n = instance.num_plants();
    if steady.len() != n {
        return Err(SimError::CountMismatch {
            expected: n,
            found: steady.len(),
        });
    }
    let gains = instance
        .plants()
        .iter()
        .zip(steady)
        .map(|(p, ss)| match cfg.gains {
            GainMode::SteadyOnly => Ok(PlantGains::steady(ss)),
            GainMode::Transient => PlantGains::transient(p, cfg.horizon),
        })
        .collect::<Result<Vec<_>, RiccatiError>>()?;
    let noise: Vec<NoiseModel> = instance.plants().iter().map(NoiseModel::new).collect();

    let per_run: Vec<Vec<f64>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            (0..n)
                .map(|i| {
                    let mut rng = substream(cfg.seed, run as u64, i as u64);
                    let r = run_plant(
                        instance.plant(i),
                        sched.row(i),
                        &gains[i],
                        &noise[i],
                        cfg.horizon,
                        &mut rng,
                        false,
                    );
                    r.cost / cfg.horizon as f64
                })
                .collect()
        })
        .collect();

    let runs = cfg.runs as f64;
    let mut per_plant_avg_loss = Vec::with_capacity(n);
    let mut stderr = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = CompensatedSum::default();
        for r in &per_run {
            s.add(r[i]);
        }
        let mean = s.value() / runs;
        let mut ss = CompensatedSum::default();
        for r in &per_run {
            ss.add((r[i] - mean) * (r[i] - mean));
        }
        let se = if cfg.runs > 1 {
            (ss.value() / (runs - 1.0) / runs).sqrt()
        } else {
            0.0
        };
        per_plant_avg_loss.push(mean);
        stderr.push(se);
    }
    let total_avg_loss = per_plant_avg_loss.iter().sum();
    Ok(SimResult {
        per_plant_avg_loss,
        total_avg_loss,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blind_sensor_keeps_prediction() {
        let mut p = PlantSpec::scalar(0.9, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0);
        p.c = DMatrix::zeros(1, 1);
        let up = kalman_step(
            &p,
            &DVector::from_element(1, 2.0),
            &DMatrix::identity(1, 1),
            &DVector::from_element(1, 0.5),
            &DVector::from_element(1, 100.0),
        )
        .unwrap();
        assert_eq!(up.gain[(0, 0)], 0.0);
        assert_eq!(up.mean[0], 0.9 * 2.0 + 0.5);
    }

    #[test]
    fn huge_measurement_noise_ignored() {
        let p = PlantSpec::scalar(0.9, 1.0, 1.0, 1.0, 1.0, 1.0, 1e12);
        let up = kalman_update(
            &p,
            &DVector::zeros(1),
            &DMatrix::identity(1, 1),
            &DVector::from_element(1, 5.0),
        )
        .unwrap();
        assert!(up.gain[(0, 0)].abs() < 1e-10);
    }

    #[test]
    fn first_update_halves_unit_prior() {
        let mut p = PlantSpec::scalar(1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0);
        p.x0_cov = DMatrix::identity(1, 1);
        let up = kalman_step(
            &p,
            &DVector::zeros(1),
            &p.x0_cov,
            &DVector::zeros(1),
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((up.cov[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((up.mean[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn controller_estimator_cases() {
        let mut p = PlantSpec::scalar(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let prev = DVector::from_element(1, 3.0);
        let u = DVector::from_element(1, 7.0);
        let sensor = DVector::from_element(1, -1.25);
        assert_eq!(controller_estimator_step(&p, &prev, &u, Some(&sensor)), sensor);
        assert_eq!(controller_estimator_step(&p, &prev, &u, None), prev);
        p.a = DMatrix::zeros(1, 1);
        p.b = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(
            controller_estimator_step(&p, &prev, &u, None)[0],
            14.0
        );
    }

    #[test]
    fn noise_factor_handles_singular() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = noise_factor(&cov);
        assert!((&f * f.transpose() - cov).amax() < 1e-12);
        assert_eq!(noise_factor(&DMatrix::zeros(2, 2)).amax(), 0.0);
    }

    #[test]
    fn substreams_differ() {
        let a: u64 = substream(1, 0, 0).random();
        let b: u64 = substream(1, 0, 1).random();
        let c: u64 = substream(1, 1, 0).random();
        let d: u64 = substream(1, 0, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, d);
    }

    #[test]
    fn compensated_sum_is_exact_on_cancellation() {
        let mut s = CompensatedSum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }
}
