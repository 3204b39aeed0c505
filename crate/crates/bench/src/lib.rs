//! Benchmark fixtures shared by the criterion targets.

use impulse_sde::{build_grid, ImpulseSchedule, Pendulum, SampleGrid};

/// Pendulum on `[0, 8]` with unit-offset impulses and `dt = 2^-exponent`.
pub fn pendulum_setup(exponent: u32) -> (Pendulum, SampleGrid) {
    let grid = build_grid(8.0, exponent, ImpulseSchedule::default()).expect("aligned grid");
    (Pendulum::default(), grid)
}
