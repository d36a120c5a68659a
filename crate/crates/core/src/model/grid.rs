use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Real;

/// Matrix-valued function sampled on a uniform grid:
/// `values[k] ≈ M(x0 + k h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGrid<T> {
    x0: T,
    h: T,
    values: Vec<Mat<T>>,
}

impl<T: Real> MatrixGrid<T> {
    pub fn new(x0: T, h: T, values: Vec<Mat<T>>) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("grid step h = {h} must be positive")));
        }
        if let Some(first) = values.first() {
            let shape = (first.rows(), first.cols());
            if !first.is_square() || values.iter().any(|m| (m.rows(), m.cols()) != shape) {
                return Err(Error::Shape("grid values must share one square shape".into()));
            }
        }
        Ok(Self { x0, h, values })
    }

    /// Samples `f` at `n` nodes.
    pub fn from_fn(x0: T, h: T, n: usize, mut f: impl FnMut(T) -> Result<Mat<T>>) -> Result<Self> {
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            values.push(f(x0 + h * T::from_usize_lossy(k))?);
        }
        Self::new(x0, h, values)
    }

    #[inline]
    pub fn x0(&self) -> T {
        self.x0
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Side length of the stored matrices.
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Mat::rows)
    }

    #[inline]
    pub fn values(&self) -> &[Mat<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Mat<T>> {
        self.values
    }

    #[inline]
    pub fn x_at(&self, k: usize) -> T {
        self.x0 + self.h * T::from_usize_lossy(k)
    }

    pub fn x_last(&self) -> T {
        self.x_at(self.len().saturating_sub(1))
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.x_at(k)).collect()
    }

    #[inline]
    pub fn at(&self, k: usize) -> &Mat<T> {
        &self.values[k]
    }

    /// Node index for `x` when `x` lies on the grid up to a relative slack.
    pub fn node_index(&self, x: T) -> Option<usize> {
        let t = (x - self.x0) / self.h;
        let k = t.round();
        let slack = T::lit(1e-6);
        if (t - k).abs() <= slack && k >= T::zero() && k.as_f64() < self.len() as f64 {
            Some(k.as_f64() as usize)
        } else {
            None
        }
    }

    fn locate(&self, x: T) -> Result<(usize, T)> {
        if self.len() < 2 {
            return Err(Error::InvalidArgument("interpolation needs two nodes".into()));
        }
        let t = (x - self.x0) / self.h;
        let last = T::from_usize_lossy(self.len() - 1);
        let tol = T::lit(1e-9);
        if t < -tol || t > last + tol {
            return Err(Error::InvalidArgument(format!(
                "x = {x} outside grid [{}, {}]",
                self.x0,
                self.x_last()
            )));
        }
        let t = t.max(T::zero()).min(last);
        let k = (t.floor().as_f64() as usize).min(self.len() - 2);
        Ok((k, t - T::from_usize_lossy(k)))
    }

    /// Piecewise-linear value at any `x` in range.
    pub fn interp(&self, x: T) -> Result<Mat<T>> {
        if let Some(k) = self.node_index(x) {
            return Ok(self.values[k].clone());
        }
        let (k, s) = self.locate(x)?;
        let mut m = self.values[k].scale(T::one() - s);
        m.add_scaled_assign(s, &self.values[k + 1]);
        Ok(m)
    }

    /// Cubic Hermite value using a grid of derivatives on the same nodes.
    pub fn hermite(&self, deriv: &Self, x: T) -> Result<Mat<T>> {
        if deriv.len() != self.len() {
            return Err(Error::Shape("derivative grid length differs".into()));
        }
        if let Some(k) = self.node_index(x) {
            return Ok(self.values[k].clone());
        }
        let (k, s) = self.locate(x)?;
        let one = T::one();
        let two = T::two();
        let three = T::lit(3.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + one;
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let mut m = self.values[k].scale(h00);
        m.add_scaled_assign(h10 * self.h, &deriv.values[k]);
        m.add_scaled_assign(h01, &self.values[k + 1]);
        m.add_scaled_assign(h11 * self.h, &deriv.values[k + 1]);
        Ok(m)
    }

    pub fn map(&self, f: impl Fn(&Mat<T>) -> Mat<T>) -> Self {
        Self { x0: self.x0, h: self.h, values: self.values.iter().map(f).collect() }
    }

    /// Largest entrywise difference against a grid of equal shape.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values.iter().zip(&other.values).fold(T::zero(), |a, (p, q)| a.max(p.max_abs_diff(q)))
    }

    /// Every second node, starting at the first.
    pub fn decimate(&self, factor: usize) -> Self {
        Self {
            x0: self.x0,
            h: self.h * T::from_usize_lossy(factor),
            values: self.values.iter().step_by(factor).cloned().collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> MatrixGrid<U> {
        MatrixGrid {
            x0: U::lit(self.x0.as_f64()),
            h: U::lit(self.h.as_f64()),
            values: self.values.iter().map(Mat::cast).collect(),
        }
    }
}
