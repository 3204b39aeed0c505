//! Time grids, Brownian increments, and the three coupled integrators.
//!
//! All integrators use explicit Euler / Euler–Maruyama with left-endpoint
//! evaluation on an impulse-aligned uniform grid. The step into an impulse
//! node produces the left limit; the reset is applied in place at that node
//! and the next step starts from the post-reset value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{ImpulseSchedule, Model};
use crate::error::{Error, Result};

/// Largest accepted `dt` exponent.
pub const MAX_DT_EXPONENT: u32 = 30;

/// An impulse that falls inside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImpulseNode {
    /// Impulse number `k >= 1`.
    pub k: u64,
    /// Grid index of `t_k`.
    pub index: usize,
}

/// Uniform grid on `[0, T]` with `dt = 2^-m`, on which every impulse time
/// lands exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    horizon: f64,
    exponent: u32,
    dt: f64,
    n_steps: usize,
    schedule: ImpulseSchedule,
    impulses: Vec<ImpulseNode>,
}

impl SampleGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn schedule(&self) -> &ImpulseSchedule {
        &self.schedule
    }

    pub fn impulses(&self) -> &[ImpulseNode] {
        &self.impulses
    }

    /// Time of grid node `n`; exact in binary floating point.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// Builds the grid `{n 2^-m : 0 <= n <= T 2^m}` and locates the impulses on it.
pub fn build_grid(horizon: f64, exponent: u32, schedule: ImpulseSchedule) -> Result<SampleGrid> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonPositiveHorizon(horizon));
    }
    if exponent > MAX_DT_EXPONENT {
        return Err(Error::InvalidParameter(format!(
            "dt exponent {exponent} exceeds the supported maximum {MAX_DT_EXPONENT}"
        )));
    }
    let scale = 2f64.powi(exponent as i32);
    let dt = 1.0 / scale;

    let steps = horizon * scale;
    if steps.fract() != 0.0 || steps > usize::MAX as f64 / 4.0 {
        return Err(Error::HorizonNotOnGrid { horizon, exponent });
    }
    let n_steps = steps as usize;
    debug_assert_eq!(n_steps as f64 * dt, horizon);

    let offset = schedule.alpha() * scale;
    if offset.fract() != 0.0 {
        return Err(Error::MisalignedImpulses {
            alpha: schedule.alpha(),
            exponent,
        });
    }
    let first = offset as usize;
    let period = scale as usize;
    let impulses = (first..=n_steps)
        .step_by(period)
        .enumerate()
        .map(|(i, index)| ImpulseNode {
            k: i as u64 + 1,
            index,
        })
        .collect();

    Ok(SampleGrid {
        horizon,
        exponent,
        dt,
        n_steps,
        schedule,
        impulses,
    })
}

/// Identifies one reproducible Brownian stream: the ChaCha8 generator seeded
/// from `base`, on stream `stream`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub base: u64,
    pub stream: u64,
}

impl PathSeed {
    pub fn new(base: u64, stream: u64) -> Self {
        Self { base, stream }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base);
        rng.set_stream(self.stream);
        rng
    }
}

/// Brownian increments `ΔW_n`, `n_steps x r` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    increments: Vec<f64>,
    noise_dim: usize,
    dt: f64,
    seed: Option<PathSeed>,
}

impl BrownianPath {
    /// Wraps explicit increments.
    pub fn from_increments(grid: &SampleGrid, noise_dim: usize, increments: Vec<f64>) -> Result<Self> {
        if noise_dim == 0 {
            return Err(Error::DimensionMismatch("noise dimension must be positive".into()));
        }
        if increments.len() != grid.n_steps() * noise_dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} increments, got {}",
                grid.n_steps() * noise_dim,
                increments.len()
            )));
        }
        Ok(Self {
            increments,
            noise_dim,
            dt: grid.dt(),
            seed: None,
        })
    }

    pub fn zeros(grid: &SampleGrid, noise_dim: usize) -> Result<Self> {
        Self::from_increments(grid, noise_dim, vec![0.0; grid.n_steps() * noise_dim])
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len() / self.noise_dim
    }

    pub fn seed(&self) -> Option<PathSeed> {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `ΔW_n`.
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.noise_dim..(n + 1) * self.noise_dim]
    }
}

/// Draws i.i.d. `N(0, dt)` increments for every step and noise coordinate.
pub fn sample_brownian(grid: &SampleGrid, noise_dim: usize, seed: PathSeed) -> Result<BrownianPath> {
    if noise_dim == 0 {
        return Err(Error::DimensionMismatch("noise dimension must be positive".into()));
    }
    let mut rng = seed.rng();
    let scale = grid.dt().sqrt();
    let increments = (0..grid.n_steps() * noise_dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect();
    Ok(BrownianPath {
        increments,
        noise_dim,
        dt: grid.dt(),
        seed: Some(seed),
    })
}

/// Left limit recorded at an impulse node.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetEvent {
    pub k: u64,
    pub index: usize,
    pub left: Vec<f64>,
}

/// Sampled càdlàg path: `values` holds the right-continuous value at each
/// node (post-reset at impulse nodes) and `pre_reset` the left limits.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagTrajectory {
    grid: SampleGrid,
    dim: usize,
    values: Vec<f64>,
    pre_reset: Vec<ResetEvent>,
}

impl CadlagTrajectory {
    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Right-continuous value at node `n`.
    pub fn value(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pre_reset(&self) -> &[ResetEvent] {
        &self.pre_reset
    }

    /// Final right-continuous value.
    pub fn last(&self) -> &[f64] {
        self.value(self.grid.n_steps())
    }

    /// Assembles a trajectory from raw parts, checking only shapes.
    pub fn from_parts(
        grid: SampleGrid,
        dim: usize,
        values: Vec<f64>,
        pre_reset: Vec<ResetEvent>,
    ) -> Result<Self> {
        if values.len() != grid.n_nodes() * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not fill {} nodes of dimension {dim}",
                values.len(),
                grid.n_nodes()
            )));
        }
        let indices_match = pre_reset.len() == grid.impulses().len()
            && pre_reset
                .iter()
                .zip(grid.impulses())
                .all(|(e, i)| e.index == i.index && e.k == i.k && e.left.len() == dim);
        if !indices_match {
            return Err(Error::DimensionMismatch(
                "pre-reset records must match the grid's impulse nodes".into(),
            ));
        }
        Ok(Self {
            grid,
            dim,
            values,
            pre_reset,
        })
    }
}

fn check_finite(v: &[f64], step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Shared stepping loop. `step(n, current, next)` advances one grid interval;
/// `reset(i, left, post)` applies the `i`-th impulse of the grid.
fn march<S, R>(grid: &SampleGrid, x0: &[f64], mut step: S, mut reset: R) -> Result<CadlagTrajectory>
where
    S: FnMut(usize, &[f64], &mut [f64]),
    R: FnMut(usize, &[f64], &mut [f64]),
{
    let d = x0.len();
    check_finite(x0, 0)?;
    let mut values = vec![0.0; grid.n_nodes() * d];
    values[..d].copy_from_slice(x0);
    let mut pre_reset = Vec::with_capacity(grid.impulses().len());
    let mut upcoming = grid.impulses().iter().enumerate().peekable();

    for n in 0..grid.n_steps() {
        let (done, rest) = values.split_at_mut((n + 1) * d);
        let current = &done[n * d..];
        let next = &mut rest[..d];
        step(n, current, next);
        check_finite(next, n + 1)?;

        if let Some(&(i, node)) = upcoming.peek() {
            if node.index == n + 1 {
                upcoming.next();
                let left = next.to_vec();
                reset(i, &left, next);
                check_finite(next, n + 1)?;
                pre_reset.push(ResetEvent {
                    k: node.k,
                    index: node.index,
                    left,
                });
            }
        }
    }

    Ok(CadlagTrajectory {
        grid: grid.clone(),
        dim: d,
        values,
        pre_reset,
    })
}

fn check_state<M: Model + ?Sized>(model: &M, x0: &[f64]) -> Result<()> {
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {} but model '{}' has dimension {}",
            x0.len(),
            model.name(),
            model.dim()
        )));
    }
    Ok(())
}

fn check_path<M: Model + ?Sized>(model: &M, grid: &SampleGrid, path: &BrownianPath) -> Result<()> {
    if path.noise_dim() != model.noise_dim() {
        return Err(Error::DimensionMismatch(format!(
            "Brownian path has {} coordinates but model '{}' has noise dimension {}",
            path.noise_dim(),
            model.name(),
            model.noise_dim()
        )));
    }
    if path.dt() != grid.dt() || path.n_steps() != grid.n_steps() {
        return Err(Error::DimensionMismatch(format!(
            "Brownian path ({} steps of {}) does not match the grid ({} steps of {})",
            path.n_steps(),
            path.dt(),
            grid.n_steps(),
            grid.dt()
        )));
    }
    Ok(())
}

/// Explicit Euler for `ẋ = b(x)` with resets `x⁺ = h(x⁻)`.
pub fn integrate_deterministic<M: Model + ?Sized>(
    model: &M,
    grid: &SampleGrid,
    x0: &[f64],
) -> Result<CadlagTrajectory> {
    check_state(model, x0)?;
    let dt = grid.dt();
    let mut b = vec![0.0; model.dim()];
    march(
        grid,
        x0,
        |_, x, next| {
            model.drift(x, &mut b);
            for ((o, xi), bi) in next.iter_mut().zip(x).zip(&b) {
                *o = xi + bi * dt;
            }
        },
        |_, left, post| model.reset(left, post),
    )
}

/// Euler–Maruyama for `dX = b(X) dt + ε σ(X) dW` with resets `X⁺ = h(X⁻)`.
///
/// With `epsilon == 0` the noise term is skipped entirely, so the result is
/// bitwise identical to [`integrate_deterministic`].
pub fn integrate_sde<M: Model + ?Sized>(
    model: &M,
    grid: &SampleGrid,
    x0: &[f64],
    epsilon: f64,
    path: &BrownianPath,
) -> Result<CadlagTrajectory> {
    check_state(model, x0)?;
    check_path(model, grid, path)?;
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise scale must be finite and nonnegative, got {epsilon}"
        )));
    }
    let (d, r) = (model.dim(), model.noise_dim());
    let dt = grid.dt();
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * r];
    march(
        grid,
        x0,
        |n, x, next| {
            model.drift(x, &mut b);
            for ((o, xi), bi) in next.iter_mut().zip(x).zip(&b) {
                *o = xi + bi * dt;
            }
            if epsilon != 0.0 {
                model.diffusion(x, &mut sigma);
                let dw = path.increment(n);
                for (i, o) in next.iter_mut().enumerate() {
                    let noise: f64 = sigma[i * r..(i + 1) * r].iter().zip(dw).map(|(s, w)| s * w).sum();
                    *o += epsilon * noise;
                }
            }
        },
        |_, left, post| model.reset(left, post),
    )
}

/// Euler–Maruyama for the fluctuation process
/// `dZ = Db(x) Z dt + σ(x) dW`, `Z⁺ = Dh(x⁻) Z⁻`, `Z_0 = 0`, linearized
/// along the deterministic trajectory `det`.
pub fn integrate_fluctuation<M: Model + ?Sized>(
    model: &M,
    grid: &SampleGrid,
    det: &CadlagTrajectory,
    path: &BrownianPath,
) -> Result<CadlagTrajectory> {
    if det.grid() != grid {
        return Err(Error::DimensionMismatch(
            "deterministic trajectory was computed on a different grid".into(),
        ));
    }
    if det.dim() != model.dim() {
        return Err(Error::DimensionMismatch(
            "deterministic trajectory dimension differs from the model".into(),
        ));
    }
    check_path(model, grid, path)?;
    let (d, r) = (model.dim(), model.noise_dim());
    let dt = grid.dt();
    let mut jac = vec![0.0; d * d];
    let mut reset_jac = vec![0.0; d * d];
    let mut sigma = vec![0.0; d * r];
    let z0 = vec![0.0; d];
    march(
        grid,
        &z0,
        |n, z, next| {
            let x = det.value(n);
            model.drift_jacobian(x, &mut jac);
            model.diffusion(x, &mut sigma);
            let dw = path.increment(n);
            for (i, o) in next.iter_mut().enumerate() {
                let lin: f64 = jac[i * d..(i + 1) * d].iter().zip(z).map(|(a, b)| a * b).sum();
                let noise: f64 = sigma[i * r..(i + 1) * r].iter().zip(dw).map(|(s, w)| s * w).sum();
                *o = z[i] + lin * dt + noise;
            }
        },
        |i, left, post| {
            model.reset_jacobian(&det.pre_reset()[i].left, &mut reset_jac);
            for (row, o) in post.iter_mut().enumerate() {
                *o = reset_jac[row * d..(row + 1) * d].iter().zip(left).map(|(a, b)| a * b).sum();
            }
        },
    )
}

/// The deterministic, noisy and fluctuation trajectories driven by one
/// Brownian path.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub epsilon: f64,
    pub deterministic: CadlagTrajectory,
    pub noisy: CadlagTrajectory,
    pub fluctuation: CadlagTrajectory,
}

/// Runs all three integrators on the same increments.
pub fn simulate_coupled<M: Model + ?Sized>(
    model: &M,
    grid: &SampleGrid,
    x0: &[f64],
    epsilon: f64,
    path: &BrownianPath,
) -> Result<CoupledRun> {
    let deterministic = integrate_deterministic(model, grid, x0)?;
    let noisy = integrate_sde(model, grid, x0, epsilon, path)?;
    let fluctuation = integrate_fluctuation(model, grid, &deterministic, path)?;
    Ok(CoupledRun {
        epsilon,
        deterministic,
        noisy,
        fluctuation,
    })
}
