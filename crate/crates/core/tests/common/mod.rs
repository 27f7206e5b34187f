#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ncs_sched::generate::{generate_instance, GenSpec};
use ncs_sched::riccati::{solve_all, spectral_radius, SolverOptions, SteadyState};
use ncs_sched::{Instance, PlantSpec, Schedule};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gen(plants: usize, channels: usize, n: usize, m: usize, p: usize, seed: u64) -> Instance {
    generate_instance(&GenSpec {
        plants,
        channels,
        n,
        m,
        p,
        seed,
    })
    .unwrap()
}

pub fn solved(inst: &Instance) -> Vec<SteadyState> {
    solve_all(inst.plants(), SolverOptions::default()).unwrap()
}

/// Copy of `plant` with `A` rescaled to spectral radius `rho`.
pub fn with_radius(plant: &PlantSpec, rho: f64) -> PlantSpec {
    let mut p = plant.clone();
    let r = spectral_radius(&p.a);
    if r > 0.0 {
        p.a *= rho / r;
    }
    p
}

pub fn scalar(a: f64) -> PlantSpec {
    PlantSpec::scalar(a, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
}

/// Random row of length `period` with at least one transmission.
pub fn covered_row(rng: &mut ChaCha8Rng, period: usize) -> Vec<bool> {
    let mut row: Vec<bool> = (0..period).map(|_| rng.random_bool(0.4)).collect();
    if !row.iter().any(|&b| b) {
        let k = rng.random_range(0..period);
        row[k] = true;
    }
    row
}

/// Random feasible schedule: each slot picks `channels` distinct plants.
pub fn random_schedule(rng: &mut ChaCha8Rng, plants: usize, channels: usize, period: usize) -> Schedule {
    let mut alloc = vec![vec![false; period]; plants];
    let mut ids: Vec<usize> = (0..plants).collect();
    for t in 0..period {
        ids.shuffle(rng);
        for &i in &ids[..channels] {
            alloc[i][t] = true;
        }
    }
    Schedule::new(alloc).unwrap()
}

/// Random feasible schedule in which every plant transmits at least once.
pub fn covered_schedule(rng: &mut ChaCha8Rng, plants: usize, channels: usize, period: usize) -> Schedule {
    assert!(period * channels >= plants);
    loop {
        let s = random_schedule(rng, plants, channels, period);
        if s.rows().iter().all(|r| r.iter().any(|&b| b)) {
            return s;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn zero_noise(a: f64) -> PlantSpec {
    let mut p = scalar(a);
    p.w = DMatrix::zeros(1, 1);
    p.x0_cov = DMatrix::zeros(1, 1);
    p.x0_mean = DVector::zeros(1);
    p
}
