//! Real nonsymmetric eigen-decomposition.
//!
//! Hessenberg reduction by orthogonal similarity followed by the shifted
//! double-step QR iteration with back-substitution for the eigenvectors.
//! Complex conjugate pairs come back in real block form: for a pair
//! `re[k] ± i·im[k]` (with `im[k] > 0`), columns `k` and `k+1` of the vector
//! matrix hold the real and imaginary parts, so that `A V = V D` with `D`
//! block diagonal.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Real;

/// Eigenvalues and real eigenvector basis of a real square matrix.
#[derive(Clone, Debug)]
pub struct RealEigen<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
    pub vectors: Mat<T>,
}

impl<T: Real> RealEigen<T> {
    /// The real block-diagonal matrix `D` with `A V = V D`.
    pub fn block_diag(&self) -> Mat<T> {
        let n = self.re.len();
        let mut d = Mat::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = self.re[i];
            if self.im[i] > T::zero() {
                d[(i, i + 1)] = self.im[i];
            } else if self.im[i] < T::zero() {
                d[(i, i - 1)] = self.im[i];
            }
        }
        d
    }
}

fn cdiv<T: Real>(xr: T, xi: T, yr: T, yi: T) -> (T, T) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Eigen-decomposition of a general real square matrix.
pub fn eigen_real<T: Real>(a: &Mat<T>) -> Result<RealEigen<T>> {
    if !a.is_square() {
        return Err(Error::Shape("eigen_real needs a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let n = a.rows();
    let mut h: Vec<Vec<T>> = a.to_rows();
    let mut v: Vec<Vec<T>> = vec![vec![T::zero(); n]; n];
    orthes(&mut h, &mut v);
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    hqr2(&mut h, &mut v, &mut d, &mut e)?;
    let vectors = Mat::from_rows(&v);
    Ok(RealEigen { re: d, im: e, vectors })
}

fn orthes<T: Real>(h: &mut [Vec<T>], v: &mut [Vec<T>]) {
    let n = h.len();
    let zero = T::zero();
    let mut ort = vec![zero; n];
    if n == 0 {
        return;
    }
    let low = 0;
    let high = n - 1;
    for m in low + 1..high {
        let mut scale = zero;
        for row in h.iter().take(high + 1).skip(m) {
            scale += row[m - 1].abs();
        }
        if scale != zero {
            let mut hh = zero;
            for i in (m..=high).rev() {
                ort[i] = h[i][m - 1] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > zero {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;
            for j in m..n {
                let mut f = zero;
                for i in (m..=high).rev() {
                    f += ort[i] * h[i][j];
                }
                f /= hh;
                for i in m..=high {
                    h[i][j] -= f * ort[i];
                }
            }
            for row in h.iter_mut().take(high + 1) {
                let mut f = zero;
                for j in (m..=high).rev() {
                    f += ort[j] * row[j];
                }
                f /= hh;
                for j in m..=high {
                    row[j] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[m][m - 1] = scale * g;
        }
    }
    for (i, row) in v.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = if i == j { T::one() } else { zero };
        }
    }
    if high < 2 {
        return;
    }
    for m in (low + 1..high).rev() {
        if h[m][m - 1] != zero {
            for i in m + 1..=high {
                ort[i] = h[i][m - 1];
            }
            for j in m..=high {
                let mut g = zero;
                for i in m..=high {
                    g += ort[i] * v[i][j];
                }
                g = (g / ort[m]) / h[m][m - 1];
                for i in m..=high {
                    v[i][j] += g * ort[i];
                }
            }
        }
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr2<T: Real>(h: &mut [Vec<T>], v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let nn = h.len();
    if nn == 0 {
        return Ok(());
    }
    let zero = T::zero();
    let one = T::one();
    let two = T::two();
    let low: usize = 0;
    let high = nn - 1;
    let eps = T::epsilon();
    let mut exshift = zero;
    let (mut p, mut q, mut r, mut s, mut z);
    r = zero;
    s = zero;
    z = zero;
    let (mut t, mut w, mut x, mut y);

    let mut norm = zero;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    // n is signed because the deflation loop may step below zero
    let mut n: isize = nn as isize - 1;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let max_total = 60 * nn.max(1);
    while n >= low as isize {
        let nu = n as usize;
        let mut l = nu;
        while l > low {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == zero {
                s = norm;
            }
            if h[l][l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            h[nu][nu] += exshift;
            d[nu] = h[nu][nu];
            e[nu] = zero;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / two;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            x = h[nu][nu];
            if q >= zero {
                z = if p >= zero { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != zero {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = zero;
                e[nu] = zero;
                x = h[nu][nu - 1];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = h[nu - 1][j];
                    h[nu - 1][j] = q * z + p * h[nu][j];
                    h[nu][j] = q * h[nu][j] - p * z;
                }
                for row in h.iter_mut().take(nu + 1) {
                    z = row[nu - 1];
                    row[nu - 1] = q * z + p * row[nu];
                    row[nu] = q * row[nu] - p * z;
                }
                for row in v.iter_mut().take(high + 1).skip(low) {
                    z = row[nu - 1];
                    row[nu - 1] = q * z + p * row[nu];
                    row[nu] = q * row[nu] - p * z;
                }
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[nu][nu];
            y = zero;
            w = zero;
            if l < nu {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }
            // exceptional shifts
            if iter == 10 {
                exshift += x;
                for i in low..=nu {
                    h[i][i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) / two;
                s = s * s + w;
                if s > zero {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / two + s);
                    for i in low..=nu {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = T::lit(0.964);
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iter += 1;
            if total_iter > max_total {
                return Err(Error::EigenNoConvergence);
            }

            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=nu {
                h[i][i - 2] = zero;
                if i > m + 2 {
                    h[i][i - 3] = zero;
                }
            }

            // double QR step on rows l..n and columns m..n
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if x == zero {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < zero {
                    s = -s;
                }
                if s != zero {
                    if k != m {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for row in h.iter_mut().take(nu.min(k + 3) + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                    for row in v.iter_mut().take(high + 1).skip(low) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    // back-substitute to find vectors of the upper triangular form
    if norm == zero {
        return Ok(());
    }
    for nu in (0..nn).rev() {
        p = d[nu];
        q = e[nu];
        if q == zero {
            let mut l = nu;
            h[nu][nu] = one;
            for i in (0..nu).rev() {
                w = h[i][i] - p;
                r = zero;
                for j in l..=nu {
                    r += h[i][j] * h[j][nu];
                }
                if e[i] < zero {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == zero {
                        h[i][nu] = if w != zero { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = h[i][i + 1];
                        y = h[i + 1][i];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        t = (x * s - z * r) / q;
                        h[i][nu] = t;
                        h[i + 1][nu] = if x.abs() > z.abs() { (-r - w * t) / x } else { (-s - y * t) / z };
                    }
                    t = h[i][nu].abs();
                    if (eps * t) * t > one {
                        for row in h.iter_mut().take(nu + 1).skip(i) {
                            row[nu] /= t;
                        }
                    }
                }
            }
        } else if q < zero {
            let mut l = nu - 1;
            if h[nu][nu - 1].abs() > h[nu - 1][nu].abs() {
                h[nu - 1][nu - 1] = q / h[nu][nu - 1];
                h[nu - 1][nu] = -(h[nu][nu] - p) / h[nu][nu - 1];
            } else {
                let (cr, ci) = cdiv(zero, -h[nu - 1][nu], h[nu - 1][nu - 1] - p, q);
                h[nu - 1][nu - 1] = cr;
                h[nu - 1][nu] = ci;
            }
            h[nu][nu - 1] = zero;
            h[nu][nu] = one;
            for i in (0..nu.saturating_sub(1)).rev() {
                let mut ra = zero;
                let mut sa = zero;
                for j in l..=nu {
                    ra += h[i][j] * h[j][nu - 1];
                    sa += h[i][j] * h[j][nu];
                }
                w = h[i][i] - p;
                if e[i] < zero {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == zero {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[i][nu - 1] = cr;
                        h[i][nu] = ci;
                    } else {
                        x = h[i][i + 1];
                        y = h[i + 1][i];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * two * q;
                        if vr == zero && vi == zero {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) = cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[i][nu - 1] = cr;
                        h[i][nu] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[i + 1][nu - 1] = (-ra - w * h[i][nu - 1] + q * h[i][nu]) / x;
                            h[i + 1][nu] = (-sa - w * h[i][nu] - q * h[i][nu - 1]) / x;
                        } else {
                            let (cr, ci) = cdiv(-r - y * h[i][nu - 1], -s - y * h[i][nu], z, q);
                            h[i + 1][nu - 1] = cr;
                            h[i + 1][nu] = ci;
                        }
                    }
                    t = h[i][nu - 1].abs().max(h[i][nu].abs());
                    if (eps * t) * t > one {
                        for row in h.iter_mut().take(nu + 1).skip(i) {
                            row[nu - 1] /= t;
                            row[nu] /= t;
                        }
                    }
                }
            }
        }
    }

    // back transformation
    for j in (low..nn).rev() {
        for i in low..=high {
            z = zero;
            for k in low..=j.min(high) {
                z += v[i][k] * h[k][j];
            }
            v[i][j] = z;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &Mat<f64>, tol: f64) {
        let eg = eigen_real(a).unwrap();
        let lhs = a * &eg.vectors;
        let rhs = &eg.vectors * &eg.block_diag();
        assert!(lhs.max_abs_diff(&rhs) < tol * (1.0 + a.max_abs()), "AV != VD");
    }

    #[test]
    fn diagonal_eigenvalues() {
        let a = Mat::from_diag(&[3.0, -1.0, 2.0]);
        let eg = eigen_real(&a).unwrap();
        let mut re = eg.re.clone();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(re, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn rotation_gives_complex_pair() {
        let a: Mat<f64> = Mat::from_rows(&[vec![0.0, -2.0], vec![2.0, 0.0]]);
        let eg = eigen_real(&a).unwrap();
        assert!(eg.re.iter().all(|r| r.abs() < 1e-14));
        let mut im = eg.im.clone();
        im.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((im[0] + 2.0).abs() < 1e-14 && (im[1] - 2.0).abs() < 1e-14);
        check(&a, 1e-13);
    }

    #[test]
    fn mixed_spectrum_vectors() {
        let a = Mat::from_rows(&[
            vec![1.0, 2.0, 0.5, -1.0],
            vec![-3.0, 0.2, 1.0, 0.0],
            vec![0.4, -0.7, 2.0, 1.5],
            vec![1.0, 0.0, -2.0, -0.5],
        ]);
        check(&a, 1e-12);
    }

    #[test]
    fn companion_of_cubic() {
        // roots 1, 2, 3 of z^3 - 6z^2 + 11z - 6
        let a: Mat<f64> = Mat::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![6.0, -11.0, 6.0]]);
        let eg = eigen_real(&a).unwrap();
        let mut re = eg.re.clone();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (r, e) in re.iter().zip([1.0, 2.0, 3.0]) {
            assert!((r - e).abs() < 1e-10);
        }
        check(&a, 1e-11);
    }
}
