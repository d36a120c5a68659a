//! The banded-rate model as a second-order matrix ODE.
//!
//! With `ω₁(z) = γ0 + γ1 z` on `[0, d]` and zero above, `G(z) = 𝒲^(ω+δ)(z−d, −d)`
//! solves `Δ_{σ²/2}G″ + Δ_μG′ + QG − (ω₁(z)+δ)G = 0` with `G(0) = 0`,
//! `G′(0) = Δ_{2/σ²}`.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::model::{MapModel, MatrixGrid};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions<T> {
    /// Bound on `max|G_h − G_{h/2}| / (1 + max|G|)`.
    pub tol: T,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-6) }
    }
}

struct Coeffs<T> {
    two_over_var: Vec<T>,
    mu: Vec<T>,
    q: Mat<T>,
    gamma0: T,
    gamma1: T,
    d: T,
    delta: T,
}

impl<T: Real> Coeffs<T> {
    /// Total kill rate at `z`; `right` picks the right limit at the band edge.
    fn rate(&self, z: T, right: bool) -> T {
        let inside = if right { z >= T::zero() && z < self.d } else { z > T::zero() && z <= self.d };
        let band = if inside { self.gamma0 + self.gamma1 * z } else { T::zero() };
        band + self.delta
    }

    /// `(G′, G″)` for the first-order system.
    fn rhs(&self, z: T, right: bool, g: &Mat<T>, dg: &Mat<T>) -> (Mat<T>, Mat<T>) {
        let n = g.rows();
        let w = self.rate(z, right);
        let mut a = g.scale(w);
        a = &a - &(&self.q * g);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= self.mu[i] * dg[(i, j)];
            }
        }
        (dg.clone(), Mat::diag_mul(&self.two_over_var, &a))
    }
}

fn rk4<T: Real>(c: &Coeffs<T>, h: T, n_steps: usize) -> Vec<(Mat<T>, Mat<T>)> {
    let n = c.mu.len();
    let mut g = Mat::zeros(n, n);
    let mut dg = Mat::from_diag(&c.two_over_var);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push((g.clone(), dg.clone()));
    let half = T::half();
    let sixth = T::one() / T::lit(6.0);
    for k in 0..n_steps {
        let z = h * T::from_usize_lossy(k);
        let zm = z + h * half;
        let (k1g, k1d) = c.rhs(z, true, &g, &dg);
        let g2 = &g + &k1g.scale(h * half);
        let d2 = &dg + &k1d.scale(h * half);
        let (k2g, k2d) = c.rhs(zm, true, &g2, &d2);
        let g3 = &g + &k2g.scale(h * half);
        let d3 = &dg + &k2d.scale(h * half);
        let (k3g, k3d) = c.rhs(zm, true, &g3, &d3);
        let g4 = &g + &k3g.scale(h);
        let d4 = &dg + &k3d.scale(h);
        let (k4g, k4d) = c.rhs(z + h, false, &g4, &d4);
        let mut sg = &k1g + &k4g;
        sg.add_scaled_assign(T::two(), &(&k2g + &k3g));
        let mut sd = &k1d + &k4d;
        sd.add_scaled_assign(T::two(), &(&k2d + &k3d));
        g.add_scaled_assign(h * sixth, &sg);
        dg.add_scaled_assign(h * sixth, &sd);
        out.push((g.clone(), dg.clone()));
    }
    out
}

/// `G` on `[0, z_max]` with step `h`, integrated by classical RK4 and
/// checked against a run at `h/2`. The `h/2` values are returned.
/// Place `d` on a node for full order.
pub fn omega_model_ode_g<T: Real>(
    model: &MapModel<T>,
    gamma0: T,
    gamma1: T,
    d: T,
    delta: T,
    z_max: T,
    h: T,
) -> Result<MatrixGrid<T>> {
    Ok(omega_model_ode(model, gamma0, gamma1, d, delta, z_max, h, &OdeOptions::default())?.0)
}

/// As [`omega_model_ode_g`], also returning `G′`.
#[allow(clippy::too_many_arguments)]
pub fn omega_model_ode<T: Real>(
    model: &MapModel<T>,
    gamma0: T,
    gamma1: T,
    d: T,
    delta: T,
    z_max: T,
    h: T,
    opts: &OdeOptions<T>,
) -> Result<(MatrixGrid<T>, MatrixGrid<T>)> {
    if !(h > T::zero()) || !(z_max > T::zero()) {
        return Err(Error::InvalidArgument("ODE grid needs h > 0 and z_max > 0".into()));
    }
    if !(d >= T::zero()) || !(gamma0 >= T::zero()) || !(gamma0 + gamma1 * d >= T::zero()) || !(delta >= T::zero()) {
        return Err(Error::InvalidArgument("band rate must be nonnegative on [0, d]".into()));
    }
    let c = Coeffs {
        two_over_var: model.two_over_var(),
        mu: model.mu().to_vec(),
        q: model.q_gen().clone(),
        gamma0,
        gamma1,
        d,
        delta,
    };
    let n_steps = ((z_max / h).as_f64() - 1e-9).ceil().max(1.0) as usize;
    let coarse = rk4(&c, h, n_steps);
    let fine = rk4(&c, h * T::half(), 2 * n_steps);
    let scale = fine.iter().fold(T::one(), |a, (g, _)| a.max(g.max_abs()));
    let err = coarse.iter().enumerate().fold(T::zero(), |a, (k, (g, _))| a.max(g.max_abs_diff(&fine[2 * k].0)));
    if err > opts.tol * scale {
        return Err(Error::NoConvergence(format!(
            "RK4 step h = {h} too large: step-halving difference {} exceeds tolerance",
            err / scale
        )));
    }
    let (g, dg): (Vec<_>, Vec<_>) = fine.into_iter().step_by(2).unzip();
    Ok((MatrixGrid::new(T::zero(), h, g)?, MatrixGrid::new(T::zero(), h, dg)?))
}
