//! System definitions: drift, diffusion, reset map, their Jacobians, and the
//! periodic impulse schedule.
//!
//! A system with impulse effects follows `dx = b(x) dt + ε σ(x) dW` between
//! impulse times and jumps to `h(x⁻)` at each impulse. Everything that the
//! integrators need about a particular system goes through [`Model`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kickmap;
use crate::linalg::Matrix;

/// Central-difference step scale, `eps^(1/3)`.
fn fd_step_scale() -> f64 {
    f64::EPSILON.cbrt()
}

/// Central finite-difference Jacobian of `f: R^d -> R^d` at `x`, written
/// row-major into `out` (`d*d`). Step per coordinate is
/// `max(1, |x_i|) * eps^(1/3)`.
pub fn finite_difference_jacobian<F>(f: F, x: &[f64], out: &mut [f64])
where
    F: Fn(&[f64], &mut [f64]),
{
    let d = x.len();
    debug_assert_eq!(out.len(), d * d);
    let mut probe = x.to_vec();
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for j in 0..d {
        let step = x[j].abs().max(1.0) * fd_step_scale();
        probe[j] = x[j] + step;
        f(&probe, &mut plus);
        probe[j] = x[j] - step;
        f(&probe, &mut minus);
        probe[j] = x[j];
        // use the representable step actually taken
        let width = (x[j] + step) - (x[j] - step);
        for i in 0..d {
            out[i * d + j] = (plus[i] - minus[i]) / width;
        }
    }
}

/// A system with impulse effects.
///
/// All evaluation methods write into caller-provided buffers: vectors have
/// length `dim()`, the diffusion matrix is `dim() x noise_dim()` and the
/// Jacobians are `dim() x dim()`, all row-major. Implementations must be pure.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Noise dimension `r`.
    fn noise_dim(&self) -> usize;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    fn reset(&self, x: &[f64], out: &mut [f64]);

    /// `Db(x)`. Defaults to central finite differences of [`Model::drift`].
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        finite_difference_jacobian(|y, o| self.drift(y, o), x, out)
    }

    /// `Dh(x)`. Defaults to central finite differences of [`Model::reset`].
    fn reset_jacobian(&self, x: &[f64], out: &mut [f64]) {
        finite_difference_jacobian(|y, o| self.reset(y, o), x, out)
    }
}

/// Periodic impulse times `t_k = k - 1 + alpha`, `k >= 1`, with unit period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseSchedule {
    alpha: f64,
}

impl ImpulseSchedule {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidOffset(alpha));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn period(&self) -> f64 {
        1.0
    }

    /// Time of the `k`-th impulse.
    pub fn impulse_time(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::ZeroImpulseIndex);
        }
        Ok((k - 1) as f64 + self.alpha)
    }

    /// Number of impulses in `[0, t]`, counting an impulse at `t` itself.
    pub fn impulse_count(&self, t: f64) -> Result<u64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let n = (t - self.alpha).floor() + 1.0;
        Ok(if n <= 0.0 { 0 } else { n as u64 })
    }
}

impl Default for ImpulseSchedule {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

/// Undamped pendulum with state-dependent kicks and additive identity noise:
/// `b(x) = (x2, -a sin x1)`, `σ = I`, `h(x) = (x1, x2 + 0.1 sin x1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pendulum {
    alpha_pend: f64,
}

/// Kick amplitude in the pendulum reset.
pub const PENDULUM_KICK: f64 = 0.1;

impl Pendulum {
    pub fn new(alpha_pend: f64) -> Result<Self> {
        if !(alpha_pend > 0.0 && alpha_pend.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pendulum constant must be positive, got {alpha_pend}"
            )));
        }
        Ok(Self { alpha_pend })
    }

    pub fn alpha_pend(&self) -> f64 {
        self.alpha_pend
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self { alpha_pend: 1.0 }
    }
}

/// Builds the pendulum model.
pub fn pendulum_model(alpha_pend: f64) -> Result<Pendulum> {
    Pendulum::new(alpha_pend)
}

/// Pendulum drift, shared with models that reuse it as a base flow.
pub fn pendulum_drift(alpha_pend: f64, x: &[f64], out: &mut [f64]) {
    out[0] = x[1];
    out[1] = -alpha_pend * x[0].sin();
}

pub fn pendulum_drift_jacobian(alpha_pend: f64, x: &[f64], out: &mut [f64]) {
    out[0] = 0.0;
    out[1] = 1.0;
    out[2] = -alpha_pend * x[0].cos();
    out[3] = 0.0;
}

/// Writes the `n x n` identity, row-major.
pub fn identity_into(n: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..n {
        out[i * n + i] = 1.0;
    }
}

impl Model for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        pendulum_drift(self.alpha_pend, x, out)
    }

    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        identity_into(2, out)
    }

    fn reset(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
        out[1] = x[1] + PENDULUM_KICK * x[0].sin();
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        pendulum_drift_jacobian(self.alpha_pend, x, out)
    }

    fn reset_jacobian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = 0.0;
        out[2] = PENDULUM_KICK * x[0].cos();
        out[3] = 1.0;
    }
}

/// Boxed evaluation function `x -> out`.
pub type EvalFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A model assembled from closures. Missing Jacobians fall back to central
/// finite differences.
#[derive(Clone)]
pub struct FnModel {
    name: String,
    dim: usize,
    noise_dim: usize,
    drift: EvalFn,
    diffusion: EvalFn,
    reset: EvalFn,
    drift_jacobian: Option<EvalFn>,
    reset_jacobian: Option<EvalFn>,
}

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("analytic_drift_jacobian", &self.drift_jacobian.is_some())
            .field("analytic_reset_jacobian", &self.reset_jacobian.is_some())
            .finish()
    }
}

impl FnModel {
    /// A model with the given drift and diffusion whose reset is the identity.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        noise_dim: usize,
        drift: EvalFn,
        diffusion: EvalFn,
    ) -> Result<Self> {
        if dim == 0 || noise_dim == 0 {
            return Err(Error::DimensionMismatch(
                "state and noise dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            dim,
            noise_dim,
            drift,
            diffusion,
            reset: Arc::new(|x, out| out.copy_from_slice(x)),
            drift_jacobian: None,
            reset_jacobian: Some(Arc::new(move |_, out| identity_into(dim, out))),
        })
    }

    /// Replaces the reset map. Its Jacobian reverts to finite differences
    /// unless `jacobian` is given.
    pub fn with_reset(mut self, reset: EvalFn, jacobian: Option<EvalFn>) -> Self {
        self.reset = reset;
        self.reset_jacobian = jacobian;
        self
    }

    pub fn with_drift_jacobian(mut self, jacobian: EvalFn) -> Self {
        self.drift_jacobian = Some(jacobian);
        self
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.drift_jacobian.is_some() && self.reset_jacobian.is_some()
    }
}

impl Model for FnModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    fn reset(&self, x: &[f64], out: &mut [f64]) {
        (self.reset)(x, out)
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift_jacobian {
            Some(jac) => jac(x, out),
            None => finite_difference_jacobian(|y, o| self.drift(y, o), x, out),
        }
    }

    fn reset_jacobian(&self, x: &[f64], out: &mut [f64]) {
        match &self.reset_jacobian {
            Some(jac) => jac(x, out),
            None => finite_difference_jacobian(|y, o| self.reset(y, o), x, out),
        }
    }
}

/// Model whose reset is the kick map of the affine field `g(x) = Ax + c`,
/// i.e. `h(r) = e^A r + K c` with constant Jacobian `e^A`.
pub fn affine_kick_model(
    a: &Matrix,
    c: &[f64],
    base_drift: EvalFn,
    diffusion: EvalFn,
    noise_dim: usize,
) -> Result<FnModel> {
    let kick = kickmap::affine_kick_map(a, c)?;
    let d = kick.dim();
    let jacobian = kick.jacobian().clone();
    let kick = Arc::new(kick);
    let reset: EvalFn = Arc::new(move |x, out| kick.apply_into(x, out));
    let reset_jacobian: EvalFn =
        Arc::new(move |_, out| out.copy_from_slice(jacobian.as_slice()));
    Ok(FnModel::new("affine_kick", d, noise_dim, base_drift, diffusion)?
        .with_reset(reset, Some(reset_jacobian)))
}

/// Pendulum drift with identity noise and an affine kick reset; the CLI's
/// `affine_kick` model.
pub fn pendulum_affine_kick_model(alpha_pend: f64, a: &Matrix, c: &[f64]) -> Result<FnModel> {
    Pendulum::new(alpha_pend)?;
    if a.rows() != 2 || c.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "pendulum state is 2-dimensional; got A {}x{} and c of length {}",
            a.rows(),
            a.cols(),
            c.len()
        )));
    }
    let model = affine_kick_model(
        a,
        c,
        Arc::new(move |x, out| pendulum_drift(alpha_pend, x, out)),
        Arc::new(|_, out| identity_into(2, out)),
        2,
    )?;
    Ok(model.with_drift_jacobian(Arc::new(move |x, out| {
        pendulum_drift_jacobian(alpha_pend, x, out)
    })))
}

/// Linear system `b(x) = Ax`, `h(x) = Mx`, constant `σ`.
pub fn linear_model(drift: &Matrix, reset: &Matrix, diffusion: &Matrix) -> Result<FnModel> {
    for m in [drift, reset] {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
    }
    let d = drift.rows();
    if reset.rows() != d || diffusion.rows() != d {
        return Err(Error::DimensionMismatch(
            "drift, reset and diffusion matrices must share the state dimension".into(),
        ));
    }
    let r = diffusion.cols();
    let (a, a_jac) = (drift.clone(), drift.clone());
    let (m, m_jac) = (reset.clone(), reset.clone());
    let sigma = diffusion.clone();
    Ok(FnModel::new(
        "linear",
        d,
        r,
        Arc::new(move |x, out| a.mul_vec_into(x, out)),
        Arc::new(move |_, out| out.copy_from_slice(sigma.as_slice())),
    )?
    .with_drift_jacobian(Arc::new(move |_, out| out.copy_from_slice(a_jac.as_slice())))
    .with_reset(
        Arc::new(move |x, out| m.mul_vec_into(x, out)),
        Some(Arc::new(move |_, out| out.copy_from_slice(m_jac.as_slice()))),
    ))
}

/// Largest deviation between the analytic and finite-difference Jacobians of
/// drift and reset at `x`, relative to `max(1, |analytic entry|)`.
pub fn jacobian_deviation<M: Model + ?Sized>(model: &M, x: &[f64]) -> f64 {
    let d = model.dim();
    let mut analytic = vec![0.0; d * d];
    let mut numeric = vec![0.0; d * d];
    let mut worst: f64 = 0.0;

    model.drift_jacobian(x, &mut analytic);
    finite_difference_jacobian(|y, o| model.drift(y, o), x, &mut numeric);
    worst = worst.max(max_relative_gap(&analytic, &numeric));

    model.reset_jacobian(x, &mut analytic);
    finite_difference_jacobian(|y, o| model.reset(y, o), x, &mut numeric);
    worst.max(max_relative_gap(&analytic, &numeric))
}

fn max_relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_times() {
        let s1 = ImpulseSchedule::new(1.0).unwrap();
        let s05 = ImpulseSchedule::new(0.5).unwrap();
        assert_eq!(s1.impulse_time(1).unwrap(), 1.0);
        assert_eq!(s05.impulse_time(3).unwrap(), 2.5);
        assert_eq!(s1.impulse_time(8).unwrap(), 8.0);
        assert_eq!(s1.impulse_time(0), Err(Error::ZeroImpulseIndex));
    }

    #[test]
    fn impulse_counts() {
        let s1 = ImpulseSchedule::new(1.0).unwrap();
        let s05 = ImpulseSchedule::new(0.5).unwrap();
        assert_eq!(s1.impulse_count(0.5).unwrap(), 0);
        assert_eq!(s1.impulse_count(1.0).unwrap(), 1);
        assert_eq!(s1.impulse_count(0.0).unwrap(), 0);
        assert!(matches!(s1.impulse_count(-0.1), Err(Error::NegativeTime(_))));

        // enumerate t_k <= 1.6 directly
        let brute = (1..10)
            .filter(|&k| s05.impulse_time(k).unwrap() <= 1.6)
            .count() as u64;
        assert_eq!(brute, 2);
        assert_eq!(s05.impulse_count(1.6).unwrap(), brute);
    }

    #[test]
    fn offset_bounds() {
        assert!(ImpulseSchedule::new(0.0).is_err());
        assert!(ImpulseSchedule::new(1.0 + 1e-12).is_err());
        assert!(ImpulseSchedule::new(f64::NAN).is_err());
        assert!(ImpulseSchedule::new(1e-9).is_ok());
    }

    #[test]
    fn pendulum_evaluations() {
        let p = pendulum_model(1.0).unwrap();
        let mut out = [0.0; 2];
        p.reset(&[0.5, 0.5], &mut out);
        assert_eq!(out, [0.5, 0.5 + 0.1 * 0.5f64.sin()]);
        for v in [-3.0, 0.0, 2.5] {
            p.drift(&[0.0, v], &mut out);
            assert_eq!(out, [v, 0.0]);
        }
        let mut jac = [0.0; 4];
        p.reset_jacobian(&[0.0, 0.0], &mut jac);
        assert_eq!(jac, [1.0, 0.0, 0.1, 1.0]);
        assert!(pendulum_model(0.0).is_err());
    }

    #[test]
    fn affine_kick_reset() {
        let drift: EvalFn = Arc::new(|_, out: &mut [f64]| out.fill(0.0));
        let diff: EvalFn = Arc::new(|_, out: &mut [f64]| out.fill(1.0));

        let m = affine_kick_model(&Matrix::zeros(1, 1), &[0.3], drift.clone(), diff.clone(), 1)
            .unwrap();
        let mut out = [0.0];
        m.reset(&[1.25], &mut out);
        assert_eq!(out, [1.25 + 0.3]);

        let m = affine_kick_model(&Matrix::zeros(2, 2), &[0.0, 0.0], drift.clone(), diff.clone(), 1)
            .unwrap();
        let mut out2 = [0.0; 2];
        m.reset(&[0.7, -0.2], &mut out2);
        assert_eq!(out2, [0.7, -0.2]);
        let mut jac = [0.0; 4];
        m.reset_jacobian(&[0.7, -0.2], &mut jac);
        assert_eq!(jac, [1.0, 0.0, 0.0, 1.0]);

        // A = ln 2, c = 1: h(r) = 2r + (2 - 1)/ln 2
        let m = affine_kick_model(
            &Matrix::from_diagonal(&[std::f64::consts::LN_2]),
            &[1.0],
            drift.clone(),
            diff.clone(),
            1,
        )
        .unwrap();
        for r in [-1.0, 0.0, 3.0] {
            m.reset(&[r], &mut out);
            let want = 2.0 * r + 1.0 / std::f64::consts::LN_2;
            assert!((out[0] - want).abs() < 1e-14 * want.abs().max(1.0));
        }

        assert!(affine_kick_model(&Matrix::zeros(2, 2), &[1.0], drift, diff, 1).is_err());
    }

    #[test]
    fn finite_difference_fallback() {
        let m = FnModel::new(
            "cubic",
            1,
            1,
            Arc::new(|x, out| out[0] = x[0].powi(3)),
            Arc::new(|_, out| out[0] = 1.0),
        )
        .unwrap();
        let mut jac = [0.0];
        m.drift_jacobian(&[2.0], &mut jac);
        assert!((jac[0] - 12.0).abs() < 1e-7);
    }

    #[test]
    fn pendulum_jacobians_consistent() {
        let p = Pendulum::default();
        for x in [[0.0, 0.0], [1.3, -0.4], [-2.0, 2.0]] {
            assert!(jacobian_deviation(&p, &x) <= 1e-5);
        }
    }
}
