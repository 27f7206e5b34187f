//! Random instances: every matrix entry drawn i.i.d. from `Uni(0, 1)`,
//! then weights and covariances symmetrized and shifted to be (semi)definite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{min_eigenvalue, symmetrize, Instance, ModelError, PlantSpec};

/// Smallest eigenvalue enforced when a sampled matrix has to be shifted.
pub const PROJECTION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub plants: usize,
    pub channels: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub seed: u64,
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    // row-major draw order
    let data: Vec<f64> = (0..r * c).map(|_| rng.random::<f64>()).collect();
    DMatrix::from_row_slice(r, c, &data)
}

/// Symmetrizes and, if the smallest eigenvalue is below `floor`, shifts the
/// spectrum so that it equals [`PROJECTION_EPS`].
fn project(x: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let s = symmetrize(&x);
    let lambda = min_eigenvalue(&s);
    if lambda < floor {
        let n = s.nrows();
        s + DMatrix::identity(n, n) * (PROJECTION_EPS - lambda)
    } else {
        s
    }
}

fn sample_plant(id: usize, spec: &GenSpec, rng: &mut ChaCha8Rng) -> PlantSpec {
    let (n, m, p) = (spec.n, spec.m, spec.p);
    let a = uniform(rng, n, n);
    let b = uniform(rng, n, m);
    let c = uniform(rng, p, n);
    let q = project(uniform(rng, n, n), 0.0);
    let r = project(uniform(rng, m, m), PROJECTION_EPS);
    let w = project(uniform(rng, n, n), 0.0);
    let v = project(uniform(rng, p, p), PROJECTION_EPS);
    let x0_mean = DVector::from_iterator(n, (0..n).map(|_| rng.random::<f64>()));
    let x0_cov = project(uniform(rng, n, n), 0.0);
    PlantSpec {
        id,
        a,
        b,
        c,
        qf: q.clone(),
        q,
        r,
        w,
        v,
        x0_mean,
        x0_cov,
    }
}

/// Deterministic in `spec` (including the seed).
pub fn generate_instance(spec: &GenSpec) -> Result<Instance, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let plants = (0..spec.plants)
        .map(|i| sample_plant(i, spec, &mut rng))
        .collect();
    Instance::new(plants, spec.channels as i64)
}
