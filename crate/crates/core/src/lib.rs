//! Simulation of systems with periodic impulse effects under small Brownian
//! perturbations.
//!
//! Between impulses the state follows `dX = b(X) dt + ε σ(X) dW`; at the
//! impulse times `t_k = k - 1 + α` it jumps to `h(X⁻)`. The crate integrates
//! the noiseless system `x`, the noisy system `X^ε`, and the fluctuation
//! process `Z` obtained by linearizing along `x`, all on one impulse-aligned
//! grid and driven by the same Brownian increments. The [`analysis`] module
//! then estimates how `sup |X^ε - x|` and `sup |X^ε - x - εZ|` scale with `ε`.
//!
//! The [`kickmap`] module builds reset maps from delta-function forcing.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod kickmap;
pub mod linalg;
pub mod output;

pub use analysis::{
    collect_path_errors, fit_loglog_slope, run_convergence_study, sup_error, ConvergenceReport,
    ErrorSeries, LogLogFit, PathErrors, StudyConfig, StudyMode, SupError,
};
pub use dynamics::{
    affine_kick_model, linear_model, pendulum_model, FnModel, ImpulseSchedule, Model, Pendulum,
};
pub use error::{Error, Result};
pub use integrate::{
    build_grid, integrate_deterministic, integrate_fluctuation, integrate_sde, sample_brownian,
    simulate_coupled, BrownianPath, CadlagTrajectory, CoupledRun, PathSeed, SampleGrid,
};
pub use kickmap::{affine_kick_map, kick_limit_check, regularized_kick, AffineKickMap, KickField};
pub use linalg::Matrix;
