//! Average LQG loss of periodic communication schedules for `N` feedback
//! loops sharing `M < N` channels, and search for good schedules.
//!
//! - [`model`]: plants, instances, schedules and their file formats.
//! - [`riccati`]: steady-state Riccati, gain and Lyapunov solutions.
//! - [`analysis`]: elapsed times, estimate-gap covariances, average and
//!   finite-horizon losses.
//! - [`simulate`]: Monte Carlo closed-loop simulation.
//! - [`search`]: exhaustive and Monte Carlo tree search over schedules.
//! - [`generate`]: random instances with uniformly sampled matrices.

pub mod analysis;
pub mod generate;
pub mod model;
pub mod riccati;
pub mod search;
pub mod simulate;

pub use analysis::{Branch, Loss, LossReport, PlantLoss};
pub use model::{Instance, PlantSpec, Schedule};
pub use riccati::{SolverOptions, SteadyState};
