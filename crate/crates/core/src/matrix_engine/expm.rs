//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Real;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// `exp(m * t)`.
pub fn expm<T: Real>(m: &Mat<T>, t: T) -> Result<Mat<T>> {
    if !m.is_square() {
        return Err(Error::Shape("expm needs a square matrix".into()));
    }
    let a = m.scale(t);
    let n = a.rows();
    if n == 0 {
        return Ok(a);
    }
    let norm = a.norm_one();
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow(norm.as_f64()));
    }
    if norm == T::zero() {
        return Ok(Mat::identity(n));
    }
    let ratio = norm.as_f64() / THETA13;
    let s = if ratio > 1.0 { ratio.log2().ceil() as i32 } else { 0 };
    let a = if s > 0 { a.scale(T::lit(2f64.powi(-s))) } else { a };

    let b: Vec<T> = PADE13.iter().map(|&c| T::lit(c)).collect();
    let id = Mat::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let mut u_inner = a6.scale(b[13]);
    u_inner.add_scaled_assign(b[11], &a4);
    u_inner.add_scaled_assign(b[9], &a2);
    let mut u_sum = &a6 * &u_inner;
    u_sum.add_scaled_assign(b[7], &a6);
    u_sum.add_scaled_assign(b[5], &a4);
    u_sum.add_scaled_assign(b[3], &a2);
    u_sum.add_scaled_assign(b[1], &id);
    let u = &a * &u_sum;

    let mut v_inner = a6.scale(b[12]);
    v_inner.add_scaled_assign(b[10], &a4);
    v_inner.add_scaled_assign(b[8], &a2);
    let mut v = &a6 * &v_inner;
    v.add_scaled_assign(b[6], &a6);
    v.add_scaled_assign(b[4], &a4);
    v.add_scaled_assign(b[2], &a2);
    v.add_scaled_assign(b[0], &id);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.solve(&p)?;
    for _ in 0..s.max(0) {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(Error::ExpmOverflow(norm.as_f64()));
    }
    Ok(r)
}

/// Returns `(exp(A x), ∫₀ˣ exp(A z) dz)` from one block exponential, valid for
/// singular `A`.
pub fn expm_with_integral<T: Real>(a: &Mat<T>, x: T) -> Result<(Mat<T>, Mat<T>)> {
    let n = a.rows();
    let mut big = Mat::zeros(2 * n, 2 * n);
    big.set_block(0, 0, a);
    big.set_block(0, n, &Mat::identity(n));
    let e = expm(&big, x)?;
    Ok((e.block(0, 0, n, n), e.block(0, n, n, n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gives_identity() {
        let z: Mat<f64> = Mat::zeros(3, 3);
        assert_eq!(expm(&z, 1.0).unwrap(), Mat::identity(3));
    }

    #[test]
    fn diagonal_case() {
        let m = Mat::from_diag(&[-1.0, -2.0]);
        let e = expm(&m, 1.0).unwrap();
        assert!((e[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn nilpotent_integral() {
        // A = [[0,1],[0,0]] gives exp(Ax) = [[1,x],[0,1]] and integral [[x, x^2/2],[0,x]]
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let (e, i) = expm_with_integral(&a, 3.0).unwrap();
        assert!(e.max_abs_diff(&Mat::from_rows(&[vec![1.0, 3.0], vec![0.0, 1.0]])) < 1e-13);
        assert!(i.max_abs_diff(&Mat::from_rows(&[vec![3.0, 4.5], vec![0.0, 3.0]])) < 1e-13);
    }

    #[test]
    fn large_norm_rotation() {
        let m = Mat::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let t = 40.0f64;
        let e = expm(&m, t).unwrap();
        let want = Mat::from_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]);
        assert!(e.max_abs_diff(&want) < 1e-12);
    }
}
