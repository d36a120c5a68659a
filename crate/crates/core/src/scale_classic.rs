//! Classical q-scale matrices of modulated Brownian motion.
//!
//! With `Λ±` the stable solvents of `½Δ_σ²Λ² ∓ Δ_μΛ + (Q − K) = 0`, where `K`
//! is the (diagonal) killing matrix, the scale matrix is
//! `W(x) = (e^{−Λ⁺x} − e^{Λ⁻x}) Ξ` with `Ξ⁻¹ = −½Δ_σ²(Λ⁺ + Λ⁻)`.
//! The usual q-scale matrix is the case `K = qI`.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::matrix_engine::{expm, expm_with_integral, solve_quadratic_stable, QuadraticMatrixProblem};
use crate::model::{MapModel, MatrixGrid};
use crate::scalar::Real;

/// `|κ|` below this counts as zero drift when deciding if `q = 0` is allowed.
pub const KAPPA_ZERO_TOL: f64 = 1e-12;

/// Condition number beyond which `Ξ` is reported as singular.
pub const XI_COND_LIMIT: f64 = 1e12;

/// Solvents `Λ±` and the normalizing matrix `Ξ`.
#[derive(Clone, Debug)]
pub struct LambdaPair<T> {
    pub lam_plus: Mat<T>,
    pub lam_minus: Mat<T>,
    pub xi: Mat<T>,
    /// Killing rate when it is the same in every state; otherwise the largest.
    pub q: T,
}

/// `L = Ξ`, `Λ = Λ⁺` and `R = L⁻¹ Λ L`.
#[derive(Clone, Debug)]
pub struct OccupancyTriple<T> {
    pub l_mat: Mat<T>,
    pub lam_gen: Mat<T>,
    pub r_mat: Mat<T>,
}

/// Scale matrices for one killing level, with the solvents computed once.
#[derive(Clone, Debug)]
pub struct ClassicScale<T> {
    model: MapModel<T>,
    kill: Vec<T>,
    pair: LambdaPair<T>,
    xi_inv: Mat<T>,
}

impl<T: Real> ClassicScale<T> {
    /// Killing at constant rate `q ≥ 0`.
    pub fn new(model: &MapModel<T>, q: T) -> Result<Self> {
        Self::with_killing(model, &vec![q; model.n_states()])
    }

    /// Killing at rate `kill[i]` while in state `i`.
    pub fn with_killing(model: &MapModel<T>, kill: &[T]) -> Result<Self> {
        let n = model.n_states();
        if kill.len() != n {
            return Err(Error::Shape(format!("killing vector has {} entries, expected {n}", kill.len())));
        }
        if kill.iter().any(|&k| !(k >= T::zero()) || !k.is_finite()) {
            return Err(Error::InvalidArgument("killing rates must be finite and nonnegative".into()));
        }
        if kill.iter().all(|&k| k == T::zero()) {
            let kappa = model.kappa()?;
            if kappa.abs() < T::lit(KAPPA_ZERO_TOL) {
                return Err(Error::InvalidArgument(
                    "q = 0 needs a nonzero asymptotic drift (kappa = 0 here)".into(),
                ));
            }
        }
        let a2 = model.half_var();
        let mut a0 = model.q_gen().clone();
        for i in 0..n {
            a0[(i, i)] -= kill[i];
        }
        let drift = model.drift();
        let plus = solve_quadratic_stable(&QuadraticMatrixProblem::new(a2.clone(), -&drift, a0.clone())?)?;
        let minus = solve_quadratic_stable(&QuadraticMatrixProblem::new(a2.clone(), drift, a0)?)?;
        let xi_inv = -(&a2 * &(&plus + &minus));
        let xi = xi_inv.inverse_checked(T::lit(XI_COND_LIMIT), "Xi")?;
        let q = kill.iter().copied().fold(T::zero(), T::max);
        Ok(Self {
            model: model.clone(),
            kill: kill.to_vec(),
            pair: LambdaPair { lam_plus: plus, lam_minus: minus, xi, q },
            xi_inv,
        })
    }

    #[inline]
    pub fn pair(&self) -> &LambdaPair<T> {
        &self.pair
    }

    #[inline]
    pub fn model(&self) -> &MapModel<T> {
        &self.model
    }

    #[inline]
    pub fn killing(&self) -> &[T] {
        &self.kill
    }

    pub fn xi_inv(&self) -> &Mat<T> {
        &self.xi_inv
    }

    /// `e^{−Λ⁺x}`.
    pub fn exp_plus(&self, x: T) -> Result<Mat<T>> {
        expm(&self.pair.lam_plus, -x)
    }

    /// `e^{Λ⁻x}`.
    pub fn exp_minus(&self, x: T) -> Result<Mat<T>> {
        expm(&self.pair.lam_minus, x)
    }

    /// `W(x)`, zero for `x ≤ 0`.
    pub fn w(&self, x: T) -> Result<Mat<T>> {
        let n = self.model.n_states();
        if x <= T::zero() {
            return Ok(Mat::zeros(n, n));
        }
        Ok(&(&self.exp_plus(x)? - &self.exp_minus(x)?) * &self.pair.xi)
    }

    /// `W′(x) = (−Λ⁺e^{−Λ⁺x} − Λ⁻e^{Λ⁻x}) Ξ`; for `x < 0` it is zero and at
    /// `0` it is the right derivative `Δ_{2/σ²}`.
    pub fn w_prime(&self, x: T) -> Result<Mat<T>> {
        let n = self.model.n_states();
        if x < T::zero() {
            return Ok(Mat::zeros(n, n));
        }
        let p = &self.pair;
        let a = &p.lam_plus * &self.exp_plus(x)?;
        let b = &p.lam_minus * &self.exp_minus(x)?;
        Ok(-(&(&a + &b) * &p.xi))
    }

    /// `W″(x) = (Λ⁺²e^{−Λ⁺x} − Λ⁻²e^{Λ⁻x}) Ξ` for `x ≥ 0`.
    pub fn w_second(&self, x: T) -> Result<Mat<T>> {
        let p = &self.pair;
        let lp2 = &p.lam_plus * &p.lam_plus;
        let lm2 = &p.lam_minus * &p.lam_minus;
        let a = &lp2 * &self.exp_plus(x)?;
        let b = &lm2 * &self.exp_minus(x)?;
        Ok(&(&a - &b) * &p.xi)
    }

    /// `∫₀ˣ W(y) dy`, exact for singular solvents too.
    pub fn w_integral(&self, x: T) -> Result<Mat<T>> {
        let n = self.model.n_states();
        if x <= T::zero() {
            return Ok(Mat::zeros(n, n));
        }
        let (_, ip) = expm_with_integral(&-&self.pair.lam_plus, x)?;
        let (_, im) = expm_with_integral(&self.pair.lam_minus, x)?;
        Ok(&(&ip - &im) * &self.pair.xi)
    }

    /// `Z(x) = I − ∫₀ˣ W(y) dy (Q − K)`.
    pub fn z(&self, x: T) -> Result<Mat<T>> {
        let n = self.model.n_states();
        let mut gen = self.model.q_gen().clone();
        for i in 0..n {
            gen[(i, i)] -= self.kill[i];
        }
        Ok(&Mat::identity(n) - &(&self.w_integral(x)? * &gen))
    }

    pub fn occupancy(&self) -> Result<OccupancyTriple<T>> {
        let l = self.pair.xi.clone();
        let lam = self.pair.lam_plus.clone();
        let r = &(&self.xi_inv * &lam) * &l;
        Ok(OccupancyTriple { l_mat: l, lam_gen: lam, r_mat: r })
    }

    /// `C = (Λ⁺+Λ⁻)Λ⁻(Λ⁺+Λ⁻)⁻¹` and `D = (Λ⁺+Λ⁻)Λ⁺(Λ⁺+Λ⁻)⁻¹`.
    pub fn relation_matrices(&self) -> Result<(Mat<T>, Mat<T>)> {
        let s = &self.pair.lam_plus + &self.pair.lam_minus;
        let c = s.solve_right(&(&s * &self.pair.lam_minus))?;
        let d = s.solve_right(&(&s * &self.pair.lam_plus))?;
        Ok((c, d))
    }

    pub fn w_grid(&self, x0: T, h: T, n: usize) -> Result<MatrixGrid<T>> {
        MatrixGrid::from_fn(x0, h, n, |x| self.w(x))
    }

    pub fn w_prime_grid(&self, x0: T, h: T, n: usize) -> Result<MatrixGrid<T>> {
        MatrixGrid::from_fn(x0, h, n, |x| self.w_prime(x))
    }
}

pub fn lambda_pair<T: Real>(model: &MapModel<T>, q: T) -> Result<LambdaPair<T>> {
    if !(q >= T::zero()) {
        return Err(Error::InvalidArgument(format!("q = {q} must be nonnegative")));
    }
    Ok(ClassicScale::new(model, q)?.pair)
}

pub fn w_q<T: Real>(model: &MapModel<T>, q: T, x: T) -> Result<Mat<T>> {
    ClassicScale::new(model, q)?.w(x)
}

pub fn w_q_prime<T: Real>(model: &MapModel<T>, q: T, x: T) -> Result<Mat<T>> {
    ClassicScale::new(model, q)?.w_prime(x)
}

pub fn z_q<T: Real>(model: &MapModel<T>, q: T, x: T) -> Result<Mat<T>> {
    ClassicScale::new(model, q)?.z(x)
}

pub fn occupancy<T: Real>(model: &MapModel<T>, q: T) -> Result<OccupancyTriple<T>> {
    ClassicScale::new(model, q)?.occupancy()
}

/// Roots `α₁ > α₂ > 0` of the zero-drift two-state denominator with
/// state-wise killing `(ω₁, ω₂)`.
fn alphas<T: Real>(s1: T, s2: T, q11: T, q22: T, w1: T, w2: T) -> Result<(T, T)> {
    let m = s1 * s1 * (q22 + w2) + s2 * s2 * (q11 + w1);
    let k = q11 * w2 + w1 * q22 + w1 * w2;
    let disc = m * m - T::lit(4.0) * s1 * s1 * s2 * s2 * k;
    if !(disc > T::epsilon() * m * m) {
        return Err(Error::InvalidArgument("coincident roots alpha1 = alpha2".into()));
    }
    if !(k > T::zero()) {
        return Err(Error::InvalidArgument("closed form needs positive killing".into()));
    }
    let r = disc.sqrt();
    let a1 = (m + r).sqrt() / (s1 * s2);
    let a2 = (m - r).sqrt() / (s1 * s2);
    Ok((a1, a2))
}

fn coef_matrix<T: Real>(s1: T, s2: T, q11: T, q22: T, w1: T, w2: T, a: T) -> Mat<T> {
    let two = T::two();
    Mat::from_rows(&[
        vec![two * (q22 + w2) - a * a * s2 * s2, two * q11],
        vec![two * q22, two * (q11 + w1) - a * a * s1 * s1],
    ])
}

fn closed_form_2x2<T: Real>(p: [T; 6], x: T, derivative: bool) -> Result<Mat<T>> {
    let [s1, s2, q11, q22, w1, w2] = p;
    for (name, v) in [("sigma1", s1), ("sigma2", s2)] {
        if !(v > T::zero()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
    }
    if q11 < T::zero() || q22 < T::zero() || w1 < T::zero() || w2 < T::zero() {
        return Err(Error::InvalidArgument("rates must be nonnegative".into()));
    }
    if x <= T::zero() && !derivative {
        return Ok(Mat::zeros(2, 2));
    }
    let x = x.max(T::zero());
    let (a1, a2) = alphas(s1, s2, q11, q22, w1, w2)?;
    let denom = (a1 * a1 - a2 * a2) * s1 * s1 * s2 * s2;
    let m1 = coef_matrix(s1, s2, q11, q22, w1, w2, a1);
    let m2 = coef_matrix(s1, s2, q11, q22, w1, w2, a2);
    let (f1, f2) = if derivative {
        (((a1 * x).exp() + (-a1 * x).exp()) / denom, ((a2 * x).exp() + (-a2 * x).exp()) / denom)
    } else {
        (
            ((a1 * x).exp() - (-a1 * x).exp()) / (denom * a1),
            ((a2 * x).exp() - (-a2 * x).exp()) / (denom * a2),
        )
    };
    Ok(&m2.scale(f2) - &m1.scale(f1))
}

/// Closed-form `W^(q)(x)` for two states, zero drift and
/// `Q = [[−q11, q11], [q22, −q22]]`.
pub fn analytic_w2_zero_drift<T: Real>(s1: T, s2: T, q11: T, q22: T, q: T, x: T) -> Result<Mat<T>> {
    closed_form_2x2([s1, s2, q11, q22, q, q], x, false)
}

/// Derivative of [`analytic_w2_zero_drift`].
pub fn analytic_w2_zero_drift_prime<T: Real>(s1: T, s2: T, q11: T, q22: T, q: T, x: T) -> Result<Mat<T>> {
    closed_form_2x2([s1, s2, q11, q22, q, q], x, true)
}

/// Closed-form ω-scale matrix for two states, zero drift and constant
/// state-wise rates `(ω₁, ω₂)`.
pub fn constant_omega_w2<T: Real>(s1: T, s2: T, q11: T, q22: T, w1: T, w2: T, x: T) -> Result<Mat<T>> {
    if w1 == T::zero() && w2 == T::zero() {
        return Err(Error::InvalidArgument("omega1 and omega2 cannot both be zero".into()));
    }
    closed_form_2x2([s1, s2, q11, q22, w1, w2], x, false)
}

/// Explicit `Λ⁺ = Λ⁻` for the zero-drift two-state model.
pub fn analytic_lambda_zero_drift<T: Real>(s1: T, s2: T, q11: T, q22: T, q: T) -> Result<Mat<T>> {
    let (a1, a2) = alphas(s1, s2, q11, q22, q, q)?;
    let two = T::two();
    let four = T::lit(4.0);
    let sa = a1 + a2;
    let d1 = -(two * s2 * s2 * sa * sa * (q11 + q) - four * q11 * q22).sqrt() / (s1 * s2);
    let d2 = -(two * s1 * s1 * sa * sa * (q22 + q) - four * q11 * q22).sqrt() / (s1 * s2);
    Ok(Mat::from_rows(&[vec![d1, two * q11 / (s1 * s1)], vec![two * q22 / (s2 * s2), d2]]).scale(T::one() / sa))
}
