//! Steady-state Riccati, gain and Lyapunov solvers.
//!
//! The control and filter Riccati equations are solved by running their
//! recursions to a fixed point, starting from `Qf` (backwards) and `X₀`
//! (forwards) respectively.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::{symmetrize, PlantSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("{equation} iteration did not converge within {max_iters} iterations")]
    NoConvergence {
        equation: &'static str,
        max_iters: usize,
    },
    #[error("innovation covariance C P Cᵀ + V is singular")]
    SingularInnovation,
    #[error("control weighting BᵀSB + R is singular")]
    SingularControlWeight,
    #[error("spectral radius {spectral_radius} >= 1; Lyapunov equation has no bounded solution")]
    UnstableA { spectral_radius: f64 },
    #[error("Lyapunov linear system is singular")]
    SingularLyapunov,
}

pub type Result<T, E = RiccatiError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when `max|ΔX| / max(1, max|X|)` drops to this value.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iters: 100_000,
        }
    }
}

/// Converged quantities for one plant.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Control Riccati solution `S∞`.
    pub s: DMatrix<f64>,
    /// Prediction error covariance `P∞` (prior, `P_{t|t-1}`).
    pub p: DMatrix<f64>,
    /// Kalman gain `K∞`.
    pub k: DMatrix<f64>,
    /// Control gain `L∞`.
    pub l: DMatrix<f64>,
    /// `Γ∞ = L∞ᵀ(BᵀS∞B + R)L∞`.
    pub gamma: DMatrix<f64>,
    /// Covariance of the per-step sensor estimate innovation, `K∞ C P∞`.
    pub pi: DMatrix<f64>,
    /// Posterior error covariance `F∞ = (I − K∞C)P∞`.
    pub f: DMatrix<f64>,
    /// Solution of `A Z Aᵀ − Z + Π∞ = 0`, present iff the spectral radius of `A` is below one.
    pub z: Option<DMatrix<f64>>,
    pub spectral_radius: f64,
}

impl SteadyState {
    /// Solves every steady-state quantity for `plant`.
    pub fn solve(plant: &PlantSpec, opts: SolverOptions) -> Result<Self> {
        let s = solve_control_dare(plant, opts)?;
        let filt = solve_filter_dare(plant, opts)?;
        let (l, gamma) = control_gain(plant, &s)?;
        let spectral_radius = spectral_radius(&plant.a);
        let z = if spectral_radius < 1.0 {
            Some(solve_lyapunov(&plant.a, &filt.pi)?)
        } else {
            None
        };
        Ok(SteadyState {
            s,
            p: filt.p,
            k: filt.k,
            l,
            gamma,
            pi: filt.pi,
            f: filt.f,
            z,
            spectral_radius,
        })
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }
}

/// Solves every plant of an instance, in plant order.
pub fn solve_all(plants: &[PlantSpec], opts: SolverOptions) -> Result<Vec<SteadyState>> {
    plants.iter().map(|p| SteadyState::solve(p, opts)).collect()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn rel_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    (new - old).amax() / new.amax().max(1.0)
}

/// One step of the backward control recursion: `S_t` from `S_{t+1}`.
pub fn control_riccati_step(plant: &PlantSpec, s_next: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (a, b) = (&plant.a, &plant.b);
    let bts = b.transpose() * s_next;
    let weight = &bts * b + &plant.r;
    let inv = weight.try_inverse()?;
    let bt_s_a = &bts * a;
    let s = a.transpose() * s_next * a + &plant.q - bt_s_a.transpose() * inv * &bt_s_a;
    Some(symmetrize(&s))
}

/// One step of the forward filter recursion: `P_{t+1|t}` from `P_{t|t-1}`.
pub fn filter_riccati_step(plant: &PlantSpec, p_prior: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (a, c) = (&plant.a, &plant.c);
    let pct = p_prior * c.transpose();
    let innov = c * &pct + &plant.v;
    let inv = innov.try_inverse()?;
    let apct = a * &pct;
    let p = a * p_prior * a.transpose() + &plant.w - &apct * inv * apct.transpose();
    Some(symmetrize(&p))
}

/// Fixed point of the backward control Riccati recursion, started at `S_T = Qf`.
pub fn solve_control_dare(plant: &PlantSpec, opts: SolverOptions) -> Result<DMatrix<f64>> {
    let fail = RiccatiError::NoConvergence {
        equation: "control Riccati",
        max_iters: opts.max_iters,
    };
    let mut s = symmetrize(&plant.qf);
    for _ in 0..opts.max_iters {
        let next = control_riccati_step(plant, &s).ok_or(RiccatiError::SingularControlWeight)?;
        if !next.iter().all(|x| x.is_finite()) {
            return Err(fail);
        }
        let delta = rel_change(&next, &s);
        s = next;
        if delta <= opts.tol {
            return Ok(s);
        }
    }
    Err(fail)
}

/// Steady-state filter quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSteadyState {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

/// Kalman gain, posterior covariance and innovation-injection covariance for a
/// given prior covariance.
pub fn kalman_quantities(
    plant: &PlantSpec,
    p_prior: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let c = &plant.c;
    let pct = p_prior * c.transpose();
    let innov = c * &pct + &plant.v;
    let inv = innov
        .try_inverse()
        .ok_or(RiccatiError::SingularInnovation)?;
    let k = &pct * inv;
    let kc = &k * c;
    let n = p_prior.nrows();
    let post = symmetrize(&((DMatrix::identity(n, n) - &kc) * p_prior));
    let pi = symmetrize(&(&kc * p_prior));
    Ok((k, post, pi))
}

/// Fixed point of the forward filter Riccati recursion, started at `P_{0|-1} = X₀`.
pub fn solve_filter_dare(plant: &PlantSpec, opts: SolverOptions) -> Result<FilterSteadyState> {
    let fail = RiccatiError::NoConvergence {
        equation: "filter Riccati",
        max_iters: opts.max_iters,
    };
    let mut p = symmetrize(&plant.x0_cov);
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let next = filter_riccati_step(plant, &p).ok_or(RiccatiError::SingularInnovation)?;
        if !next.iter().all(|x| x.is_finite()) {
            return Err(fail);
        }
        let delta = rel_change(&next, &p);
        p = next;
        if delta <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(fail);
    }
    let (k, f, pi) = kalman_quantities(plant, &p)?;
    Ok(FilterSteadyState { p, k, pi, f })
}

/// `L = (BᵀSB + R)⁻¹BᵀSA` and `Γ = Lᵀ(BᵀSB + R)L`.
pub fn control_gain(
    plant: &PlantSpec,
    s: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let bts = plant.b.transpose() * s;
    let weight = &bts * &plant.b + &plant.r;
    let inv = weight
        .clone()
        .try_inverse()
        .ok_or(RiccatiError::SingularControlWeight)?;
    let l = inv * (&bts * &plant.a);
    let gamma = symmetrize(&(l.transpose() * weight * &l));
    Ok((l, gamma))
}

/// Solves `A Z Aᵀ − Z + Π = 0` as the linear system `(I − A⊗A) vec(Z) = vec(Π)`.
pub fn solve_lyapunov(a: &DMatrix<f64>, pi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(RiccatiError::UnstableA {
            spectral_radius: rho,
        });
    }
    let n = a.nrows();
    let system = DMatrix::identity(n * n, n * n) - a.kronecker(a);
    // column-major vec: vec(A Z Aᵀ) = (A ⊗ A) vec(Z)
    let rhs = nalgebra::DVector::from_column_slice(pi.as_slice());
    let z = system
        .lu()
        .solve(&rhs)
        .ok_or(RiccatiError::SingularLyapunov)?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, z.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlantSpec;
    use nalgebra::DVector;

    // b = q = r = 1:  S = a²S/(S+1) + 1  =>  S² − a²S − 1 = 0
    fn scalar_root(a: f64) -> f64 {
        let aa = a * a;
        (aa + (aa * aa + 4.0).sqrt()) / 2.0
    }

    #[test]
    fn zero_dynamics_gives_q() {
        let mut p = PlantSpec::scalar(0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        p.a = DMatrix::zeros(1, 1);
        p.q = DMatrix::from_element(1, 1, 2.5);
        let s = solve_control_dare(&p, SolverOptions::default()).unwrap();
        assert_eq!(s[(0, 0)], 2.5);
        let (l, g) = control_gain(&p, &s).unwrap();
        assert_eq!(l[(0, 0)], 0.0);
        assert_eq!(g[(0, 0)], 0.0);
    }

    #[test]
    fn zero_dynamics_two_states() {
        let p = PlantSpec {
            id: 0,
            a: DMatrix::zeros(2, 2),
            b: DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            c: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            q: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            qf: DMatrix::identity(2, 2),
            r: DMatrix::identity(1, 1),
            w: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
            v: DMatrix::identity(1, 1) * 0.3,
            x0_mean: DVector::zeros(2),
            x0_cov: DMatrix::identity(2, 2),
        };
        let s = solve_control_dare(&p, SolverOptions::default()).unwrap();
        assert_eq!(s, p.q);
        let f = solve_filter_dare(&p, SolverOptions::default()).unwrap();
        assert!((&f.p - &p.w).amax() < 1e-15);
        let expected_k = &p.w * p.c.transpose()
            * (&p.c * &p.w * p.c.transpose() + &p.v).try_inverse().unwrap();
        assert!((&f.k - expected_k).amax() < 1e-14);
    }

    #[test]
    fn scalar_control_golden() {
        let p = PlantSpec::scalar(0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let s = solve_control_dare(&p, SolverOptions::default()).unwrap()[(0, 0)];
        assert!((s - scalar_root(0.5)).abs() < 1e-9);
        assert!((s - 1.1327822185).abs() < 1e-8);
        let (l, g) = control_gain(&p, &DMatrix::from_element(1, 1, s)).unwrap();
        assert!((l[(0, 0)] - 0.2655644370).abs() < 1e-9);
        // Γ = L²(S + 1)
        assert!((g[(0, 0)] - 0.1504133361).abs() < 1e-9);
    }

    #[test]
    fn scalar_filter_golden() {
        let p = PlantSpec::scalar(0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let f = solve_filter_dare(&p, SolverOptions::default()).unwrap();
        // prior covariance obeys the same quadratic as the control case
        assert!((f.p[(0, 0)] - scalar_root(0.5)).abs() < 1e-9);
        assert!((f.p[(0, 0)] - 1.1327822185).abs() < 1e-8);
    }

    #[test]
    fn uncontrollable_marginal_mode_fails() {
        let p = PlantSpec::scalar(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let err = solve_control_dare(&p, SolverOptions::default()).unwrap_err();
        assert!(matches!(err, RiccatiError::NoConvergence { .. }));
    }

    #[test]
    fn unobservable_unstable_mode_fails() {
        let p = PlantSpec::scalar(2.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0);
        let err = solve_filter_dare(&p, SolverOptions::default()).unwrap_err();
        assert!(matches!(err, RiccatiError::NoConvergence { .. }));
    }

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let z = solve_lyapunov(&a, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        // Σ 0.25^j truncated to 1e-12
        let mut series = 0.0;
        let mut term = 1.0;
        while term > 1e-14 {
            series += term;
            term *= 0.25;
        }
        assert!((z[(0, 0)] - series).abs() < 1e-12);
        assert!((z[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_zero_and_unstable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, -0.2, 0.4]);
        let z = solve_lyapunov(&a, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(z.amax(), 0.0);
        let err = solve_lyapunov(&DMatrix::from_element(1, 1, 1.0), &DMatrix::identity(1, 1));
        assert!(matches!(err, Err(RiccatiError::UnstableA { .. })));
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.8, 0.8, 0.0]);
        assert!((spectral_radius(&a) - 0.8).abs() < 1e-12);
    }
}
