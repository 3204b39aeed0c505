//! Reset maps induced by delta-function kicks.
//!
//! Forcing `ẋ = b(x) + g(x) Σ δ(t - t_n)` is made precise by smoothing each
//! delta over a window of width `δ`; inside the window the kick dominates and
//! `ż = g(z)/δ`. Rescaling time by `δ` turns that into `ż = g(z)` on `[0, 1]`,
//! so the induced reset `h(r)` is the unit-time flow of `g` from `r`.

use std::sync::Arc;

use crate::dynamics::EvalFn;
use crate::error::{Error, Result};
use crate::linalg::{expm_with_integral, Matrix};

/// Below this `|a|`, `(e^a - 1)/a` switches to its Taylor expansion.
const SMALL_RATE: f64 = 1e-8;

/// A kick vector field `g: R^d -> R^d`.
#[derive(Clone)]
pub struct KickField {
    dim: usize,
    g: EvalFn,
    jacobian: Option<EvalFn>,
}

impl std::fmt::Debug for KickField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KickField")
            .field("dim", &self.dim)
            .field("has_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl KickField {
    pub fn new(dim: usize, g: EvalFn) -> Self {
        Self {
            dim,
            g,
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jacobian: EvalFn) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    /// `g(x) = Ax + c`.
    pub fn affine(a: &Matrix, c: &[f64]) -> Result<Self> {
        check_affine(a, c)?;
        let (a_eval, a_jac) = (a.clone(), a.clone());
        let c = c.to_vec();
        Ok(Self::new(
            a.rows(),
            Arc::new(move |x, out| {
                a_eval.mul_vec_into(x, out);
                for (o, ci) in out.iter_mut().zip(&c) {
                    *o += ci;
                }
            }),
        )
        .with_jacobian(Arc::new(move |_, out| {
            out.copy_from_slice(a_jac.as_slice())
        })))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.g)(x, out)
    }

    pub fn jacobian(&self) -> Option<&EvalFn> {
        self.jacobian.as_ref()
    }
}

fn check_affine(a: &Matrix, c: &[f64]) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if c.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "kick offset has length {} but A is {}x{}",
            c.len(),
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

/// Endpoint `z(δ)` of `ż = g(z)/δ`, `z(0) = r`, using `substeps` explicit
/// Euler steps.
///
/// Integrated in rescaled time, so the result depends on `substeps` but not
/// on `delta`.
pub fn regularized_kick(field: &KickField, r: &[f64], delta: f64, substeps: usize) -> Result<Vec<f64>> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kick window must be positive, got {delta}"
        )));
    }
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be at least 1".into()));
    }
    if r.len() != field.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has length {} but the kick field is {}-dimensional",
            r.len(),
            field.dim()
        )));
    }
    // z_k = r + (1/n) Σ_{j<k} g(z_j), the Euler recursion with the
    // increments summed before scaling.
    let n = substeps as f64;
    let mut z = r.to_vec();
    let mut sum = vec![0.0; z.len()];
    let mut g = vec![0.0; z.len()];
    for step in 0..substeps {
        field.eval(&z, &mut g);
        for ((zi, si), (gi, ri)) in z.iter_mut().zip(sum.iter_mut()).zip(g.iter().zip(r)) {
            *si += gi;
            *zi = ri + *si / n;
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
    }
    Ok(z)
}

/// Closed-form kick map of `g(x) = Ax + c`: `h(r) = e^A r + K c` with
/// `K = ∫_0^1 e^{uA} du`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineKickMap {
    exp: Matrix,
    offset: Vec<f64>,
}

impl AffineKickMap {
    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// `Dh = e^A`.
    pub fn jacobian(&self) -> &Matrix {
        &self.exp
    }

    /// The translation part `K c`.
    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn apply_into(&self, r: &[f64], out: &mut [f64]) {
        self.exp.mul_vec_into(r, out);
        for (o, k) in out.iter_mut().zip(&self.offset) {
            *o += k;
        }
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(r, &mut out);
        out
    }
}

pub fn affine_kick_map(a: &Matrix, c: &[f64]) -> Result<AffineKickMap> {
    check_affine(a, c)?;
    let (exp, integral) = expm_with_integral(a)?;
    let offset = integral.mul_vec(c);
    Ok(AffineKickMap { exp, offset })
}

/// Scalar kick map `e^a r + (e^a - 1) c / a`, with the `a -> 0` limit `r + c`.
pub fn scalar_kick(a: f64, c: f64, r: f64) -> f64 {
    let phi = if a.abs() < SMALL_RATE {
        1.0 + a / 2.0 + a * a / 6.0
    } else {
        a.exp_m1() / a
    };
    a.exp() * r + phi * c
}

/// One row of [`kick_limit_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickLimitRow {
    pub delta: f64,
    pub substeps: usize,
    pub error: f64,
}

/// Substep count used for window `delta`: proportional to `1/delta`.
pub fn substeps_for(delta: f64) -> usize {
    ((1.0 / delta).round() as usize).max(1)
}

/// Distance between the regularized kick and a closed-form reset for each
/// window in `deltas`, which must be positive and decreasing.
pub fn kick_limit_check<F>(
    field: &KickField,
    closed_form: F,
    r: &[f64],
    deltas: &[f64],
) -> Result<Vec<KickLimitRow>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if deltas.iter().any(|&d| d.is_nan() || d <= 0.0) {
        return Err(Error::InvalidParameter("kick windows must be positive".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "kick windows must be strictly decreasing".into(),
        ));
    }
    let target = closed_form(r);
    deltas
        .iter()
        .map(|&delta| {
            let substeps = substeps_for(delta);
            let z = regularized_kick(field, r, delta, substeps)?;
            let error = z
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok(KickLimitRow {
                delta,
                substeps,
                error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(c: Vec<f64>) -> KickField {
        KickField::new(c.len(), Arc::new(move |_, out| out.copy_from_slice(&c)))
    }

    #[test]
    fn constant_field_is_translation() {
        let field = constant(vec![0.25, -1.5]);
        for (delta, n) in [(0.1, 1), (0.01, 7), (1e-4, 64)] {
            let z = regularized_kick(&field, &[1.0, 2.0], delta, n).unwrap();
            assert_eq!(z, vec![1.25, 0.5]);
        }
    }

    #[test]
    fn zero_field_is_identity() {
        let field = constant(vec![0.0]);
        assert_eq!(regularized_kick(&field, &[3.5], 0.2, 5).unwrap(), vec![3.5]);
        let rows = kick_limit_check(&field, |r| r.to_vec(), &[3.5], &[0.5, 0.1]).unwrap();
        assert!(rows.iter().all(|row| row.error == 0.0));
    }

    #[test]
    fn linear_field_converges_to_exponential() {
        let a = 0.7;
        let field = KickField::new(1, Arc::new(move |x, out| out[0] = a * x[0]));
        let z = regularized_kick(&field, &[2.0], 1e-3, 200_000).unwrap();
        assert!((z[0] - a.exp() * 2.0).abs() < 1e-4);
    }

    #[test]
    fn independent_of_window_width() {
        let field = KickField::new(1, Arc::new(|x, out| out[0] = x[0].sin()));
        let a = regularized_kick(&field, &[0.3], 0.1, 33).unwrap();
        let b = regularized_kick(&field, &[0.3], 0.05, 33).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_arguments() {
        let field = constant(vec![1.0]);
        assert!(regularized_kick(&field, &[0.0], 0.0, 3).is_err());
        assert!(regularized_kick(&field, &[0.0], 0.1, 0).is_err());
        assert!(kick_limit_check(&field, |r| r.to_vec(), &[0.0], &[0.1, 0.2]).is_err());
        assert!(affine_kick_map(&Matrix::zeros(2, 1), &[1.0, 1.0]).is_err());
        assert!(affine_kick_map(&Matrix::zeros(2, 2), &[1.0]).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let field = KickField::new(1, Arc::new(|x, out| out[0] = x[0] * x[0] * 1e200));
        assert!(matches!(
            regularized_kick(&field, &[1e100], 0.1, 10),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn affine_closed_forms() {
        let map = affine_kick_map(&Matrix::zeros(1, 1), &[1.0]).unwrap();
        assert_eq!(map.apply(&[0.0]), vec![1.0]);
        assert_eq!(map.jacobian(), &Matrix::identity(1));

        let e = std::f64::consts::E;
        let map = affine_kick_map(&Matrix::from_diagonal(&[1.0]), &[1.0]).unwrap();
        for r in [-2.0, 0.0, 1.0] {
            let got = map.apply(&[r])[0];
            let want = e * r + (e - 1.0);
            assert!((got - want).abs() < 1e-14 * want.abs().max(1.0), "{got} vs {want}");
        }

        let map = affine_kick_map(&Matrix::from_diagonal(&[std::f64::consts::LN_2]), &[0.0]).unwrap();
        assert!((map.apply(&[3.0])[0] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_kick_small_rate() {
        assert_eq!(scalar_kick(0.0, 2.0, 1.0), 3.0);
        let near = scalar_kick(1e-9, 2.0, 1.0);
        assert!((near - 3.0).abs() < 1e-8);
        assert!((scalar_kick(1e-7, 1.0, 0.0) - (1.0 + 0.5e-7 + 1e-14 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn euler_error_halves() {
        let field = KickField::affine(&Matrix::from_diagonal(&[1.0]), &[1.0]).unwrap();
        let map = affine_kick_map(&Matrix::from_diagonal(&[1.0]), &[1.0]).unwrap();
        let deltas = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let rows = kick_limit_check(&field, |r| map.apply(r), &[1.0], &deltas).unwrap();
        for w in rows.windows(2) {
            assert_eq!(w[1].substeps, 2 * w[0].substeps);
            let ratio = w[0].error / w[1].error;
            assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
        }
    }
}
