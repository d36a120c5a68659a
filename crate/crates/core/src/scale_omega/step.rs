//! Step-shaped ω: the level recursion and the single-jump closed form.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::matrix_engine::solve_sylvester;
use crate::model::{MapModel, OmegaFn, OmegaKind};
use crate::scalar::Real;
use crate::scale_classic::ClassicScale;

/// Level-independent pieces of a step rate seen from `y`: the rate at `y`
/// followed by the jumps above `y`.
fn effective_steps<T: Real>(om: &OmegaFn<T>, y: T) -> Result<(Vec<T>, Vec<T>)> {
    let OmegaKind::Step { levels, values } = om.kind() else {
        return Err(Error::InvalidArgument("step recursion needs a step omega".into()));
    };
    let first = levels.partition_point(|&l| l <= y);
    let mut p = vec![values[first]];
    let mut x = Vec::new();
    for k in first..levels.len() {
        x.push(levels[k]);
        p.push(values[k + 1]);
    }
    Ok((x, p))
}

/// `𝒲^(ω)(x, y)` for a step rate by the level recursion
/// `𝒲_{k+1}(x) = 𝒲_k(x) + (p_{k+1}−p_k)∫_{x_{k+1}}^x W^(p_{k+1})(x−z)𝒲_k(z) dz`
/// with composite Simpson per level.
pub fn step_omega_w<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, x: T, y: T) -> Result<Mat<T>> {
    let (levels, _) = effective_steps(om, y)?;
    // nested levels multiply the cost, so only the single-jump case gets a fine rule
    let panels = if levels.len() <= 1 { ((x - y).as_f64().abs() * 2000.0).ceil() as usize + 2000 } else { 160 };
    step_omega_w_panels(model, om, x, y, panels)
}

/// [`step_omega_w`] with an explicit Simpson panel count per level.
pub fn step_omega_w_panels<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, x: T, y: T, panels: usize) -> Result<Mat<T>> {
    if !(x >= y) {
        return Err(Error::InvalidArgument(format!("need x = {x} >= y = {y}")));
    }
    let (levels, p) = effective_steps(om, y)?;
    let scales: Vec<ClassicScale<T>> = p.iter().map(|&q| ClassicScale::new(model, q)).collect::<Result<_>>()?;
    let panels = panels.max(2) + panels % 2;
    let rec = Recursion { levels: &levels, p: &p, scales: &scales, y, panels };
    rec.eval(levels.len(), x)
}

struct Recursion<'a, T> {
    levels: &'a [T],
    p: &'a [T],
    scales: &'a [ClassicScale<T>],
    y: T,
    panels: usize,
}

impl<T: Real> Recursion<'_, T> {
    fn eval(&self, k: usize, x: T) -> Result<Mat<T>> {
        if k == 0 {
            return self.scales[0].w(x - self.y);
        }
        let prev = self.eval(k - 1, x)?;
        let lo = self.levels[k - 1];
        if x <= lo {
            return Ok(prev);
        }
        let m = self.panels;
        let h = (x - lo) / T::from_usize_lossy(m);
        let cs = &self.scales[k];
        let n = prev.rows();
        let mut acc = Mat::zeros(n, n);
        for j in 0..=m {
            let z = lo + h * T::from_usize_lossy(j);
            let c = if j == 0 || j == m {
                T::one()
            } else if j % 2 == 1 {
                T::lit(4.0)
            } else {
                T::two()
            };
            let inner = if j == m { Mat::zeros(n, n) } else { &cs.w(x - z)? * &self.eval(k - 1, z)? };
            acc.add_scaled_assign(c, &inner);
        }
        let jump = self.p[k] - self.p[k - 1];
        let mut out = prev;
        out.add_scaled_assign(jump * h / T::lit(3.0), &acc);
        Ok(out)
    }
}

/// The constants of the single-jump closed form, from their Sylvester
/// equations: `Λ⁺₁C − CΛ⁺₀ = Ξ₁`, `Λ⁺₁D + DΛ⁻₀ = Ξ₁`, `−Λ⁻₁E − EΛ⁺₀ = Ξ₁`,
/// `−Λ⁻₁F + FΛ⁻₀ = Ξ₁`, where index 0 and 1 refer to killing `p0` and `p1`.
#[derive(Clone, Debug)]
pub struct StepConstants<T> {
    pub c: Mat<T>,
    pub d: Mat<T>,
    pub e: Mat<T>,
    pub f: Mat<T>,
    /// Largest residual of the four Sylvester equations.
    pub residual: T,
}

impl<T: Real> StepConstants<T> {
    pub fn new(s0: &ClassicScale<T>, s1: &ClassicScale<T>) -> Result<Self> {
        let (a, b) = (s0.pair(), s1.pair());
        let xi1 = &b.xi;
        let (lp0, lm0, lp1, lm1) = (&a.lam_plus, &a.lam_minus, &b.lam_plus, &b.lam_minus);
        let c = solve_sylvester(lp1, lp0, xi1)?;
        let d = solve_sylvester(lp1, &-lm0, xi1)?;
        let e = solve_sylvester(&-lm1, lp0, xi1)?;
        let f = solve_sylvester(&-lm1, &-lm0, xi1)?;
        let res = [
            &(&(lp1 * &c) - &(&c * lp0)) - xi1,
            &(&(lp1 * &d) + &(&d * lm0)) - xi1,
            &(&(-&(lm1 * &e)) - &(&e * lp0)) - xi1,
            &(&(-&(lm1 * &f)) + &(&f * lm0)) - xi1,
        ]
        .iter()
        .fold(T::zero(), |acc, r| acc.max(r.max_abs()));
        Ok(Self { c, d, e, f, residual: res })
    }

    /// The explicit expressions `C = −(Λ⁺₁+Λ⁻₁)⁻¹(Λ⁺₀+Λ⁻₁)/(p1−p0)` and
    /// likewise for `D, E, F`.
    pub fn explicit(s0: &ClassicScale<T>, s1: &ClassicScale<T>, p0: T, p1: T) -> Result<Self> {
        let (a, b) = (s0.pair(), s1.pair());
        let s = &b.lam_plus + &b.lam_minus;
        let inv = s.inverse()?;
        let k = T::one() / (p1 - p0);
        let c = (&inv * &(&a.lam_plus + &b.lam_minus)).scale(-k);
        let d = (&inv * &(&a.lam_minus - &b.lam_minus)).scale(k);
        let e = (&inv * &(&a.lam_plus - &b.lam_plus)).scale(-k);
        let f = (&inv * &(&a.lam_minus + &b.lam_plus)).scale(k);
        Ok(Self { c, d, e, f, residual: T::nan() })
    }
}

/// `𝒲^(ω)(x, y)` for `ω = p0` below `x1` and `p1` above, via the four
/// exponential integrals. The expression holds for `x1 ≥ y`.
pub fn closed_step_w1_integrals<T: Real>(model: &MapModel<T>, p0: T, p1: T, x1: T, x: T, y: T) -> Result<Mat<T>> {
    let (s0, s1) = step_scales(model, p0, p1, x1, x, y)?;
    if x <= x1 {
        return s0.w(x - y);
    }
    let k = StepConstants::new(&s0, &s1)?;
    let jump = p1 - p0;
    let n = model.n_states();
    let id = Mat::identity(n);
    let (e0p, e0m) = (s0.exp_plus(x - y)?, s0.exp_minus(x - y)?);
    let (a0p, a0m) = (s0.exp_plus(x1 - y)?, s0.exp_minus(x1 - y)?);
    let (e1p, e1m) = (s1.exp_plus(x - x1)?, s1.exp_minus(x - x1)?);
    let mut m = &(&id + &(&k.c - &k.e).scale(jump)) * &e0p;
    m = &m - &(&(&id + &(&k.d - &k.f).scale(jump)) * &e0m);
    let up = &(&k.e * &a0p) - &(&k.f * &a0m);
    let dn = &(&k.c * &a0p) - &(&k.d * &a0m);
    m.add_scaled_assign(jump, &(&(&e1m * &up) - &(&e1p * &dn)));
    Ok(&m * &s0.pair().xi)
}

fn step_scales<T: Real>(model: &MapModel<T>, p0: T, p1: T, x1: T, x: T, y: T) -> Result<(ClassicScale<T>, ClassicScale<T>)> {
    if p0 == p1 {
        return Err(Error::InvalidArgument("closed step form needs p0 != p1".into()));
    }
    if !(x >= y) || !(x1 >= y) {
        return Err(Error::InvalidArgument(format!("need x >= y and x1 >= y (x = {x}, x1 = {x1}, y = {y})")));
    }
    Ok((ClassicScale::new(model, p0)?, ClassicScale::new(model, p1)?))
}

/// Single-jump closed form
/// `[e^{−Λ⁺₁u}(Λ⁺₁+Λ⁻₁)⁻¹Λ⁻₁ + e^{Λ⁻₁u}(Λ⁺₁+Λ⁻₁)⁻¹Λ⁺₁] W^(p0)(x1−y) + W^(p1)(u) Δ_{σ²/2} W^(p0)′(x1−y)`
/// with `u = x − x1`, and `W^(p0)(x−y)` for `x ≤ x1`.
///
/// The sign of the last term is `+`: matching value and slope at `x1`
/// requires it, and it is what the four-integral form reduces to.
pub fn closed_step_omega_w<T: Real>(model: &MapModel<T>, p0: T, p1: T, x1: T, x: T, y: T) -> Result<Mat<T>> {
    let (s0, s1) = step_scales(model, p0, p1, x1, x, y)?;
    if x <= x1 {
        return s0.w(x - y);
    }
    let u = x - x1;
    let b = s1.pair();
    let s = &b.lam_plus + &b.lam_minus;
    let left = &(&s1.exp_plus(u)? * &s.solve(&b.lam_minus)?) + &(&s1.exp_minus(u)? * &s.solve(&b.lam_plus)?);
    let half_var = model.half_var();
    let tail = &(&s1.w(u)? * &half_var) * &s0.w_prime(x1 - y)?;
    Ok(&(&left * &s0.w(x1 - y)?) + &tail)
}

/// The closed form exactly as usually printed, with `−` before the last
/// term. Kept to document the discrepancy.
pub fn closed_step_omega_w_printed<T: Real>(model: &MapModel<T>, p0: T, p1: T, x1: T, x: T, y: T) -> Result<Mat<T>> {
    let plus = closed_step_omega_w(model, p0, p1, x1, x, y)?;
    if x <= x1 {
        return Ok(plus);
    }
    let (s0, s1) = step_scales(model, p0, p1, x1, x, y)?;
    let tail = &(&s1.w(x - x1)? * &model.half_var()) * &s0.w_prime(x1 - y)?;
    Ok(&plus - &tail.scale(T::two()))
}
