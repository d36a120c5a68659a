//! Dense matrix kernels: exponential, eigen-decomposition, the stable solvent
//! of a quadratic matrix equation, and Sylvester equations.

mod eigen;
mod expm;

pub use eigen::{eigen_real, RealEigen};
pub use expm::{expm, expm_with_integral};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Real;

/// Eigenvector bases with a worse one-norm condition than this switch to the
/// spectral-projector route.
pub const EIGVEC_COND_LIMIT: f64 = 1e8;

/// Coefficients of `a2 Λ² + a1 Λ + a0 = 0`.
#[derive(Clone, Debug)]
pub struct QuadraticMatrixProblem<T> {
    pub a2: Mat<T>,
    pub a1: Mat<T>,
    pub a0: Mat<T>,
}

/// How the invariant subspace was extracted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolventMethod {
    Eigenvectors,
    SpectralProjector,
}

#[derive(Clone, Debug)]
pub struct QuadraticSolution<T> {
    pub lambda: Mat<T>,
    /// All `2N` eigenvalues of the linearization, sorted by real part.
    pub spectrum: Vec<(T, T)>,
    pub method: SolventMethod,
}

impl<T: Real> QuadraticMatrixProblem<T> {
    pub fn new(a2: Mat<T>, a1: Mat<T>, a0: Mat<T>) -> Result<Self> {
        let n = a2.rows();
        for (name, m) in [("a2", &a2), ("a1", &a1), ("a0", &a0)] {
            if m.rows() != n || m.cols() != n {
                return Err(Error::Shape(format!("{name} must be {n}x{n}")));
            }
        }
        Ok(Self { a2, a1, a0 })
    }

    pub fn dim(&self) -> usize {
        self.a2.rows()
    }

    /// `a2 X² + a1 X + a0`.
    pub fn residual(&self, x: &Mat<T>) -> Mat<T> {
        let mut r = self.a0.clone();
        r.add_mul_assign(&self.a1, x);
        r.add_mul_assign(&(&self.a2 * x), x);
        r
    }

    /// First companion linearization `[[0, I], [-a2⁻¹a0, -a2⁻¹a1]]`.
    pub fn companion(&self) -> Result<Mat<T>> {
        let n = self.dim();
        let lu = self.a2.lu()?;
        let p0 = -lu.solve(&self.a0)?;
        let p1 = -lu.solve(&self.a1)?;
        let mut m = Mat::zeros(2 * n, 2 * n);
        m.set_block(0, n, &Mat::identity(n));
        m.set_block(n, 0, &p0);
        m.set_block(n, n, &p1);
        Ok(m)
    }
}

/// The solvent whose eigenvalues are the `N` leftmost eigenvalues of the
/// linearized problem.
pub fn solve_quadratic_stable<T: Real>(p: &QuadraticMatrixProblem<T>) -> Result<Mat<T>> {
    Ok(solve_quadratic_detailed(p)?.lambda)
}

pub fn solve_quadratic_detailed<T: Real>(p: &QuadraticMatrixProblem<T>) -> Result<QuadraticSolution<T>> {
    let n = p.dim();
    if n == 0 {
        return Err(Error::Shape("empty quadratic problem".into()));
    }
    let comp = p.companion()?;
    let eg = eigen_real(&comp)?;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| {
        eg.re[i].partial_cmp(&eg.re[j]).unwrap_or(core::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    let spectrum: Vec<(T, T)> = order.iter().map(|&i| (eg.re[i], eg.im[i])).collect();
    let chosen = &order[..n];

    // a conjugate pair must be taken whole
    for &k in chosen {
        let partner = if eg.im[k] > T::zero() {
            Some(k + 1)
        } else if eg.im[k] < T::zero() {
            Some(k - 1)
        } else {
            None
        };
        if let Some(pk) = partner {
            if !chosen.contains(&pk) {
                return Err(Error::EigenSplit(format!(
                    "conjugate pair {}±{}i straddles the split",
                    eg.re[k],
                    eg.im[k].abs()
                )));
            }
        }
    }
    let gap_lo = spectrum[n - 1].0;
    let gap_hi = spectrum[n].0;
    let scale = T::one() + gap_lo.abs().max(gap_hi.abs());
    if !(gap_hi - gap_lo > T::lit(64.0) * T::epsilon() * scale) {
        return Err(Error::EigenSplit(format!(
            "no spectral gap between eigenvalues {} and {}",
            gap_lo, gap_hi
        )));
    }

    let mut cols: Vec<usize> = chosen.to_vec();
    cols.sort_unstable();
    let basis = Mat::from_fn(2 * n, n, |i, j| eg.vectors[(i, cols[j])]);
    let v1 = basis.block(0, 0, n, n);
    let v2 = basis.block(n, 0, n, n);
    let cond = v1.cond_one();
    if cond < T::lit(EIGVEC_COND_LIMIT) {
        let lambda = v1.solve_right(&v2)?;
        return Ok(QuadraticSolution { lambda, spectrum, method: SolventMethod::Eigenvectors });
    }

    let theta = (gap_lo + gap_hi) * T::half();
    let lambda = projector_solvent(&comp, theta, n)?;
    Ok(QuadraticSolution { lambda, spectrum, method: SolventMethod::SpectralProjector })
}

/// Solvent from the spectral projector onto eigenvalues left of `theta`,
/// computed with the scaled Newton iteration for the matrix sign function.
fn projector_solvent<T: Real>(comp: &Mat<T>, theta: T, n: usize) -> Result<Mat<T>> {
    let m = 2 * n;
    let mut x = comp - &Mat::identity(m).scale(theta);
    let tol = T::lit(1e3) * T::epsilon();
    let mut converged = false;
    for _ in 0..100 {
        let lu = x.lu()?;
        let inv = lu.inverse()?;
        let det = lu.det().abs();
        let mu = if det > T::zero() && det.is_finite() {
            det.powf(-T::one() / T::from_usize_lossy(m))
        } else {
            T::one()
        };
        let next = (&x.scale(mu) + &inv.scale(T::one() / mu)).scale(T::half());
        let diff = (&next - &x).norm_one();
        x = next;
        if diff <= tol * x.norm_one() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("matrix sign iteration".into()));
    }
    let proj = (&Mat::identity(m) - &x).scale(T::half());
    let basis = column_basis(&proj, n)?;
    let v1 = basis.block(0, 0, n, n);
    let v2 = basis.block(n, 0, n, n);
    let cond = v1.cond_one();
    if !(cond < T::lit(1e12)) {
        return Err(Error::IllConditioned { what: "invariant subspace basis".into(), cond: cond.as_f64() });
    }
    v1.solve_right(&v2)
}

/// Orthonormal basis of the leading `k`-dimensional column space, by
/// Gram-Schmidt with column pivoting.
fn column_basis<T: Real>(a: &Mat<T>, k: usize) -> Result<Mat<T>> {
    let m = a.rows();
    let mut cols: Vec<Vec<T>> = (0..a.cols()).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut out = Mat::zeros(m, k);
    for c in 0..k {
        let (best, norm) = cols
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.iter().map(|&t| t * t).sum::<T>().sqrt()))
            .fold((0, T::zero()), |acc, it| if it.1 > acc.1 { it } else { acc });
        if !(norm > T::zero()) {
            return Err(Error::Singular("projector rank below expected".into()));
        }
        let q: Vec<T> = cols[best].iter().map(|&t| t / norm).collect();
        for v in cols.iter_mut() {
            let dot: T = v.iter().zip(&q).map(|(&a, &b)| a * b).sum();
            for (vi, &qi) in v.iter_mut().zip(&q) {
                *vi -= dot * qi;
            }
        }
        for i in 0..m {
            out[(i, c)] = q[i];
        }
    }
    Ok(out)
}

/// Solves `A X − X B = C` through the Kronecker system.
pub fn solve_sylvester<T: Real>(a: &Mat<T>, b: &Mat<T>, c: &Mat<T>) -> Result<Mat<T>> {
    let n = a.rows();
    let m = b.rows();
    if !a.is_square() || !b.is_square() || c.rows() != n || c.cols() != m {
        return Err(Error::Shape("sylvester: A n×n, B m×m, C n×m".into()));
    }
    // column-major vec: index(i, j) = j*n + i
    let dim = n * m;
    let mut k = Mat::zeros(dim, dim);
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            for kk in 0..n {
                k[(row, j * n + kk)] += a[(i, kk)];
            }
            for l in 0..m {
                k[(row, l * n + i)] -= b[(l, j)];
            }
        }
    }
    let rhs = Mat::from_fn(dim, 1, |r, _| c[(r % n, r / n)]);
    let sol = k
        .solve(&rhs)
        .map_err(|_| Error::Singular("Sylvester operator is singular (shared eigenvalue)".into()))?;
    Ok(Mat::from_fn(n, m, |i, j| sol[(j * n + i, 0)]))
}
