//! Small dense matrices and the matrix exponential.
//!
//! Systems here have a handful of state dimensions, so a row-major `Vec<f64>`
//! is all the structure needed.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a square matrix from `n*n` row-major entries.
    pub fn square_from_slice(data: &[f64]) -> Result<Self> {
        let n = (data.len() as f64).sqrt().round() as usize;
        if n * n != data.len() || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries do not form a square matrix",
                data.len()
            )));
        }
        Self::from_row_major(n, n, data.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `out = self * v`.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// The Taylor series are summed on A / 2^s with ||A / 2^s||_1 below this.
const SCALED_NORM: f64 = 0.5;
const MAX_TERMS: usize = 40;

/// Computes `e^A` and `K = ∫_0^1 e^{uA} du` together by scaling and squaring.
///
/// With `B = A / 2^s`, both `e^B = Σ B^k/k!` and `K(B) = Σ B^k/(k+1)!` are
/// summed until the next term drops below machine precision. Undoing the
/// scaling uses `e^{2B} = (e^B)^2` and `K(2B) = (I + e^B) K(B) / 2`.
pub fn expm_with_integral(a: &Matrix) -> Result<(Matrix, Matrix)> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let norm = a.norm_1();
    if !norm.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let b = a.scale(2f64.powi(-squarings));

    let mut exp = Matrix::identity(n);
    let mut integral = Matrix::identity(n);
    // power = B^k / k!
    let mut power = Matrix::identity(n);
    for k in 1..MAX_TERMS {
        power = power.matmul(&b).scale(1.0 / k as f64);
        let integral_term = power.scale(1.0 / (k + 1) as f64);
        exp = exp.add(&power);
        integral = integral.add(&integral_term);
        if power.max_abs() <= f64::EPSILON * exp.max_abs() * 0.5 {
            break;
        }
    }

    let id = Matrix::identity(n);
    for _ in 0..squarings {
        integral = id.add(&exp).matmul(&integral).scale(0.5);
        exp = exp.matmul(&exp);
    }
    Ok((exp, integral))
}

/// Matrix exponential by scaling and squaring.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    expm_with_integral(a).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &Matrix, b: &Matrix, rel: f64) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!(
                (x - y).abs() <= rel * y.abs().max(1.0),
                "{x} vs {y}\n{a:?}\n{b:?}"
            );
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let (e, k) = expm_with_integral(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e, Matrix::identity(3));
        assert_eq!(k, Matrix::identity(3));
    }

    #[test]
    fn exp_of_ln2_is_two() {
        let e = expm(&Matrix::from_diagonal(&[std::f64::consts::LN_2])).unwrap();
        assert!((e[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_generator() {
        // exp([[0, t], [-t, 0]]) = [[cos t, sin t], [-sin t, cos t]]
        for &t in &[0.1, 1.0, 3.0, 10.0] {
            let a = Matrix::from_row_major(2, 2, vec![0.0, t, -t, 0.0]).unwrap();
            let (e, k) = expm_with_integral(&a).unwrap();
            let want = Matrix::from_row_major(2, 2, vec![t.cos(), t.sin(), -t.sin(), t.cos()])
                .unwrap();
            assert_close(&e, &want, 1e-13);
            // ∫_0^1 rotation(u t) du = [[sin t, 1 - cos t], [cos t - 1, sin t]] / t
            let want_k = Matrix::from_row_major(
                2,
                2,
                vec![t.sin() / t, (1.0 - t.cos()) / t, (t.cos() - 1.0) / t, t.sin() / t],
            )
            .unwrap();
            assert_close(&k, &want_k, 1e-13);
        }
    }

    #[test]
    fn nilpotent_integral() {
        // A = [[0, 1], [0, 0]]: e^A = I + A, K = I + A/2
        let a = Matrix::from_row_major(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let (e, k) = expm_with_integral(&a).unwrap();
        assert_eq!(e.as_slice(), &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(k.as_slice(), &[1.0, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn large_negative_scalar() {
        let e = expm(&Matrix::from_diagonal(&[-20.0])).unwrap();
        assert!((e[(0, 0)] / (-20f64).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            expm(&Matrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn square_from_slice_checks_length() {
        assert!(Matrix::square_from_slice(&[1.0, 2.0, 3.0]).is_err());
        assert_eq!(Matrix::square_from_slice(&[1.0]).unwrap().rows(), 1);
    }
}
