mod common;

use nalgebra::DMatrix;
use ncs_sched::analysis::{average_loss_total, finite_horizon_loss_row, steady_cov_sequence_row};
use ncs_sched::riccati::{SolverOptions, SteadyState};
use ncs_sched::simulate::*;
use ncs_sched::{Instance, Schedule};
use proptest::prelude::*;

fn table_one() -> Schedule {
    Schedule::from_bits(&[vec![1, 0, 0, 0], vec![0, 1, 0, 1], vec![0, 0, 1, 0]]).unwrap()
}

fn cfg(runs: usize, horizon: usize, seed: u64, gains: GainMode) -> SimConfig {
    SimConfig {
        horizon,
        runs,
        seed,
        gains,
    }
}

#[test]
fn same_result_for_any_thread_count() {
    let inst = common::gen(3, 1, 2, 1, 1, 42);
    let ss = common::solved(&inst);
    let c = cfg(64, 120, 9, GainMode::SteadyOnly);
    let run_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_closed_loop(&inst, &table_one(), &ss, &c).unwrap())
    };
    let one = run_with(1);
    assert_eq!(one, run_with(4));
    assert_eq!(one, run_with(3));
    assert_eq!(one, run_closed_loop(&inst, &table_one(), &ss, &c).unwrap());
    let other = run_closed_loop(&inst, &table_one(), &ss, &cfg(64, 120, 10, GainMode::SteadyOnly)).unwrap();
    assert_ne!(one, other);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn always_transmitting_plant_has_no_gap(seed in any::<u64>(), t0 in 1usize..6) {
        let plant = common::gen(2, 1, 2, 1, 1, seed).plant(0).clone();
        let ss = SteadyState::solve(&plant, SolverOptions::default()).unwrap();
        let row = vec![true; t0];
        for gains in [PlantGains::steady(&ss), PlantGains::transient(&plant, 50).unwrap()] {
            let mut rng = substream(seed, 0, 0);
            let run = run_plant(&plant, &row, &gains, &NoiseModel::new(&plant), 50, &mut rng, true);
            let gaps = run.gaps.unwrap();
            prop_assert!(gaps.iter().all(|e| e.iter().all(|&x| x == 0.0)));
        }
    }
}

#[test]
fn gap_covariance_matches_steady_sequence() {
    let inst = common::gen(3, 1, 2, 1, 1, 42);
    let ss = common::solved(&inst);
    let sched = table_one();
    let (t0, runs, horizon) = (4, 4000, 200);
    for i in 0..3 {
        let plant = inst.plant(i);
        let row = sched.row(i);
        let gains = PlantGains::steady(&ss[i]);
        let noise = NoiseModel::new(plant);
        let gaps: Vec<Vec<nalgebra::DVector<f64>>> = (0..runs)
            .map(|r| {
                let mut rng = substream(5, r as u64, i as u64);
                run_plant(plant, row, &gains, &noise, horizon, &mut rng, true).gaps.unwrap()
            })
            .collect();
        let steady = steady_cov_sequence_row(row, plant, &ss[i]).unwrap();
        for t in horizon - t0..horizon {
            let target = &steady.window()[t % t0];
            for (a, b) in [(0, 0), (0, 1), (1, 1)] {
                let prods: Vec<f64> = gaps.iter().map(|g| g[t][a] * g[t][b]).collect();
                let mean = prods.iter().sum::<f64>() / runs as f64;
                let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
                let se = (var / runs as f64).sqrt();
                let want = target[(a, b)];
                assert!(
                    (mean - want).abs() <= 5.0 * se + 1e-12,
                    "plant {i} t {t} ({a},{b}): {mean} vs {want} (se {se})"
                );
            }
        }
    }
}

#[test]
fn noiseless_plants_cost_nothing() {
    let inst = Instance::new(
        vec![
            common::zero_noise(0.9),
            {
                let mut p = common::zero_noise(1.4);
                p.id = 1;
                p
            },
        ],
        1,
    )
    .unwrap();
    let ss = common::solved(&inst);
    let sched = Schedule::from_bits(&[vec![1, 0, 0], vec![0, 1, 1]]).unwrap();
    for gains in [GainMode::SteadyOnly, GainMode::Transient] {
        let res = run_closed_loop(&inst, &sched, &ss, &cfg(8, 90, 3, gains)).unwrap();
        assert_eq!(res.total_avg_loss, 0.0);
        assert!(res.stderr.iter().all(|&s| s == 0.0));
    }
    let analytic = average_loss_total(&sched, &inst, &ss).unwrap();
    assert_eq!(analytic.total.value(), Some(0.0));
}

#[test]
fn transient_gains_match_finite_horizon_loss() {
    let inst = common::gen(3, 1, 2, 1, 1, 7);
    let ss = common::solved(&inst);
    let sched = table_one();
    let horizon = 40;
    let res = run_closed_loop(&inst, &sched, &ss, &cfg(6000, horizon, 1, GainMode::Transient)).unwrap();
    for i in 0..3 {
        let exact = finite_horizon_loss_row(sched.row(i), inst.plant(i), horizon).unwrap() / horizon as f64;
        let sim = res.per_plant_avg_loss[i];
        assert!(
            (sim - exact).abs() <= 5.0 * res.stderr[i],
            "plant {i}: {sim} vs {exact} (se {})",
            res.stderr[i]
        );
    }
}

#[test]
fn steady_gains_match_average_loss() {
    let inst = common::gen(3, 1, 2, 1, 1, 42);
    let ss = common::solved(&inst);
    let sched = table_one();
    let res = run_closed_loop(&inst, &sched, &ss, &cfg(500, 800, 42, GainMode::SteadyOnly)).unwrap();
    let analytic = average_loss_total(&sched, &inst, &ss).unwrap();
    for i in 0..3 {
        let a = analytic.per_plant[i].loss.value().unwrap();
        assert!(common::rel_diff(res.per_plant_avg_loss[i], a) <= 0.03);
    }
}

#[test]
fn noise_factor_reproduces_covariance() {
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
    let f = noise_factor(&cov);
    assert!((&f * f.transpose() - &cov).amax() < 1e-12);
    let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let f = noise_factor(&singular);
    assert!((&f * f.transpose() - &singular).amax() < 1e-12);
}

#[test]
fn bad_config_rejected() {
    let inst = common::gen(3, 1, 2, 1, 1, 42);
    let ss = common::solved(&inst);
    let err = run_closed_loop(&inst, &table_one(), &ss, &cfg(0, 10, 1, GainMode::SteadyOnly));
    assert!(matches!(err, Err(SimError::BadConfig)));
    let bad = Schedule::from_bits(&[vec![1, 1], vec![1, 0], vec![0, 0]]).unwrap();
    let err = run_closed_loop(&inst, &bad, &ss, &cfg(1, 10, 1, GainMode::SteadyOnly));
    assert!(matches!(err, Err(SimError::Model(_))));
}
