//! Small dense row-major matrices and LU factorization.

use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds from a row-major vector. Panics on a length mismatch.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    /// Builds from nested rows. Panics if rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).take(self.rows).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> T {
        self.diag().into_iter().sum()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().copied().sum()).collect()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut s = T::zero();
                for j in 0..self.cols {
                    s += self[(i, j)] * v[j];
                }
                s
            })
            .collect()
    }

    /// Left-multiplies by a diagonal matrix given as a vector.
    pub fn diag_mul(d: &[T], m: &Self) -> Self {
        Self::from_fn(m.rows, m.cols, |i, j| d[i] * m[(i, j)])
    }

    /// Right-multiplies by a diagonal matrix given as a vector.
    pub fn mul_diag(m: &Self, d: &[T]) -> Self {
        Self::from_fn(m.rows, m.cols, |i, j| m[(i, j)] * d[j])
    }

    pub fn norm_fro(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs()))
    }

    /// `self += a * b` without allocating.
    pub fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        debug_assert_eq!(a.cols, b.rows);
        debug_assert_eq!((self.rows, self.cols), (a.rows, b.cols));
        let (n, m, p) = (a.rows, a.cols, b.cols);
        for i in 0..n {
            for k in 0..m {
                let aik = a.data[i * m + k];
                if aik == T::zero() {
                    continue;
                }
                let brow = &b.data[k * p..(k + 1) * p];
                let out = &mut self.data[i * p..(i + 1) * p];
                for (o, &bv) in out.iter_mut().zip(brow) {
                    *o += aik * bv;
                }
            }
        }
    }

    /// `self += s * a`.
    pub fn add_scaled_assign(&mut self, s: T, a: &Self) {
        debug_assert_eq!((self.rows, self.cols), (a.rows, a.cols));
        for (o, &v) in self.data.iter_mut().zip(&a.data) {
            *o += s * v;
        }
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Sub-block copy.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::new(self)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.lu()?.inverse()
    }

    /// Solves `self * X = b`.
    pub fn solve(&self, b: &Self) -> Result<Self> {
        self.lu()?.solve(b)
    }

    /// Solves `X * self = b`.
    pub fn solve_right(&self, b: &Self) -> Result<Self> {
        Ok(self.transpose().solve(&b.transpose())?.transpose())
    }

    /// One-norm condition number, infinite when singular.
    pub fn cond_one(&self) -> T {
        match self.inverse() {
            Ok(inv) => self.norm_one() * inv.norm_one(),
            Err(_) => T::infinity(),
        }
    }

    /// Inverse that refuses matrices with condition number at or above `limit`.
    pub fn inverse_checked(&self, limit: T, what: &str) -> Result<Self> {
        let inv = self.inverse().map_err(|_| Error::IllConditioned {
            what: what.to_string(),
            cond: f64::INFINITY,
        })?;
        let cond = self.norm_one() * inv.norm_one();
        if !(cond < limit) {
            return Err(Error::IllConditioned { what: what.to_string(), cond: cond.as_f64() });
        }
        Ok(inv)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in mul");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        out.add_mul_assign(self, rhs);
        out
    }
}

impl<T: Real> Neg for &Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.map(|v| -v)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl<T: Real> $tr for Mat<T> {
            type Output = Mat<T>;
            fn $f(self, rhs: Mat<T>) -> Mat<T> {
                (&self).$f(&rhs)
            }
        }
        impl<T: Real> $tr<&Mat<T>> for Mat<T> {
            type Output = Mat<T>;
            fn $f(self, rhs: &Mat<T>) -> Mat<T> {
                (&self).$f(rhs)
            }
        }
        impl<T: Real> $tr<Mat<T>> for &Mat<T> {
            type Output = Mat<T>;
            fn $f(self, rhs: Mat<T>) -> Mat<T> {
                self.$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<T: Real> Neg for Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        -&self
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Mat<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!("LU needs a square matrix, got {}x{}", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) || !best.is_finite() {
                return Err(Error::Singular(format!("zero pivot at column {k}")));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[k * n + j];
                        lu[i * n + j] -= f * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, piv })
    }

    /// Solves for one right-hand side in place.
    pub fn solve_vec(&self, b: &mut [T]) {
        let n = self.n;
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    pub fn solve(&self, b: &Mat<T>) -> Result<Mat<T>> {
        if b.rows != self.n {
            return Err(Error::Shape(format!("rhs has {} rows, expected {}", b.rows, self.n)));
        }
        let mut out = Mat::zeros(b.rows, b.cols);
        let mut col = vec![T::zero(); self.n];
        for j in 0..b.cols {
            for i in 0..self.n {
                col[i] = b[(i, j)];
            }
            self.solve_vec(&mut col);
            for i in 0..self.n {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Mat<T>> {
        self.solve(&Mat::identity(self.n))
    }

    pub fn det(&self) -> T {
        let n = self.n;
        let mut d = T::one();
        for i in 0..n {
            d *= self.lu[i * n + i];
        }
        // parity of the permutation
        let mut seen = vec![false; n];
        let mut odd = false;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut len = 0;
            let mut k = s;
            while !seen[k] {
                seen[k] = true;
                k = self.piv[k];
                len += 1;
            }
            if len % 2 == 0 {
                odd = !odd;
            }
        }
        if odd {
            -d
        } else {
            d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_known_matrix() {
        let a = Mat::from_rows(&[vec![4.0, 7.0], vec![2.0, 6.0]]);
        let inv = a.inverse().unwrap();
        let expect = Mat::from_rows(&[vec![0.6, -0.7], vec![-0.2, 0.4]]);
        assert!(inv.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn det_with_pivoting() {
        let a: Mat<f64> = Mat::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 3.0]]);
        assert!((a.lu().unwrap().det() + 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(a.inverse(), Err(Error::Singular(_))));
    }

    #[test]
    fn solve_right_matches_inverse() {
        let a = Mat::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let b = Mat::from_rows(&[vec![1.0, 0.5], vec![-2.0, 4.0]]);
        let x = a.solve_right(&b).unwrap();
        assert!((&x * &a).max_abs_diff(&b) < 1e-13);
    }
}
