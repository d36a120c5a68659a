//! ω-scale matrices `𝒲^(ω)`, `𝒵^(ω)` and `ℋ^(ω)`.
//!
//! Every quantity solves a Volterra equation whose kernel is a classical
//! scale matrix `W^(s)` for some constant killing `s`. The choice of `s` does
//! not change the solution, only the size of the weight `ω − s`; the default
//! takes `s` mid-range of `ω` so the weight stays small.
//!
//! `𝒵^(ω)` is solved in the form
//! `𝒵(x,y) = Z^(s)(x−y) + ∫_y^x W^(s)(x−z)(ω(z)−s)𝒵(z,y) dz`, which for `ω ≡ q`
//! returns `Z^(q)`. The variant with inhomogeneity `I` agrees with it only
//! after multiplying by the ones vector (see [`omega_z_identity_form`]).

mod ode;
mod step;
mod volterra;

pub use ode::{omega_model_ode, omega_model_ode_g, OdeOptions};
pub use step::{
    closed_step_omega_w, closed_step_omega_w_printed, closed_step_w1_integrals, step_omega_w, step_omega_w_panels,
    StepConstants,
};
pub use volterra::{
    solve_structured, volterra_residual, volterra_solve, ExpKernel, NodeWeights, SolveMode, VolterraProblem,
    PICARD_MAX_ITER,
};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::matrix_engine::expm;
use crate::model::{MapModel, MatrixGrid, OmegaFn};
use crate::scalar::Real;
use crate::scale_classic::{ClassicScale, KAPPA_ZERO_TOL};
use volterra::{richardson, ExpWalk};

/// Default grid step.
pub const DEFAULT_H: f64 = 1e-3;

/// Solver route for the Volterra equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// `O(n)` recursion that exploits `W^(s)(x) = e^{−Λ⁺x}Ξ − e^{Λ⁻x}Ξ`.
    Structured,
    /// `O(n²)` substitution on a sampled kernel.
    Generic(SolveMode),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaOptions<T> {
    pub h: T,
    /// Kill rate `s` of the kernel `W^(s)`; `None` picks one from the range of ω.
    pub kernel_shift: Option<T>,
    /// Combine solutions at `h` and `h/2` to cancel the `h²` error term.
    pub richardson: bool,
    pub route: Route,
}

impl<T: Real> Default for OmegaOptions<T> {
    fn default() -> Self {
        Self { h: T::lit(DEFAULT_H), kernel_shift: None, richardson: true, route: Route::Structured }
    }
}

impl<T: Real> OmegaOptions<T> {
    pub fn with_h(h: T) -> Self {
        Self { h, ..Self::default() }
    }

    pub fn plain_trapezoid(h: T) -> Self {
        Self { h, richardson: false, ..Self::default() }
    }
}

/// `𝒲^(ω+δ)(·,y)` and `𝒵^(ω+δ)(·,y)` with derivatives on the nodes
/// `y + k h`.
#[derive(Clone, Debug)]
pub struct OmegaScaleSet<T> {
    pub w_omega: MatrixGrid<T>,
    pub w_omega_prime: MatrixGrid<T>,
    pub z_omega: MatrixGrid<T>,
    pub z_omega_prime: MatrixGrid<T>,
    pub y: T,
    pub delta: T,
    /// Kernel killing rate that was used.
    pub kernel_shift: T,
}

impl<T: Real> OmegaScaleSet<T> {
    /// `𝒲(x, y)`; zero below `y`.
    pub fn w_at(&self, x: T) -> Result<Mat<T>> {
        if x <= self.y {
            let n = self.w_omega.dim();
            return Ok(Mat::zeros(n, n));
        }
        self.w_omega.hermite(&self.w_omega_prime, x)
    }

    /// `𝒵(x, y)`; the identity below `y`.
    pub fn z_at(&self, x: T) -> Result<Mat<T>> {
        if x <= self.y {
            return Ok(Mat::identity(self.z_omega.dim()));
        }
        self.z_omega.hermite(&self.z_omega_prime, x)
    }

    /// `∂ₓ𝒲(x, y)` by four-point interpolation of the derivative grid.
    pub fn w_prime_at(&self, x: T) -> Result<Mat<T>> {
        lagrange4(&self.w_omega_prime, x)
    }

    pub fn x_max(&self) -> T {
        self.w_omega.x_last()
    }
}

/// Cubic Lagrange read of a grid at `x`.
pub(crate) fn lagrange4<T: Real>(g: &MatrixGrid<T>, x: T) -> Result<Mat<T>> {
    if let Some(k) = g.node_index(x) {
        return Ok(g.at(k).clone());
    }
    let n = g.len();
    if n < 4 {
        return g.interp(x);
    }
    let t = (x - g.x0()) / g.h();
    if t < -T::lit(1e-9) || t > T::from_usize_lossy(n - 1) + T::lit(1e-9) {
        return Err(Error::InvalidArgument(format!("x = {x} outside grid")));
    }
    let base = (t.floor().as_f64() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = t - T::from_usize_lossy(base);
    let mut acc = Mat::zeros(g.dim(), g.dim());
    for i in 0..4 {
        let mut c = T::one();
        for j in 0..4 {
            if j != i {
                c = c * (s - T::from_usize_lossy(j)) / (T::from_usize_lossy(i) - T::from_usize_lossy(j));
            }
        }
        acc.add_scaled_assign(c, g.at(base + i));
    }
    Ok(acc)
}

/// Number of nodes `y, y+h, …` needed to reach `x_max`.
pub(crate) fn node_count<T: Real>(y: T, x_max: T, h: T) -> Result<usize> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("grid step h = {h} must be positive")));
    }
    if !(x_max >= y) {
        return Err(Error::InvalidArgument(format!("grid end {x_max} lies below its origin {y}")));
    }
    let t = ((x_max - y) / h).as_f64();
    Ok((t - 1e-9).ceil().max(0.0) as usize + 1)
}

/// The exponential-sum form of `W^(s)` and of its derivative.
pub(crate) fn scale_kernels<T: Real>(cs: &ClassicScale<T>) -> (ExpKernel<T>, ExpKernel<T>) {
    let p = cs.pair();
    let a1 = -&p.lam_plus;
    let a2 = p.lam_minus.clone();
    let b2 = -&p.xi;
    let k = ExpKernel { terms: vec![(a1.clone(), p.xi.clone()), (a2.clone(), b2.clone())] };
    let dk = ExpKernel { terms: vec![(a1.clone(), &a1 * &p.xi), (a2.clone(), &a2 * &b2)] };
    (k, dk)
}

/// Picks the kernel killing rate.
pub(crate) fn choose_shift<T: Real>(model: &MapModel<T>, w: &NodeWeights<T>, requested: Option<T>) -> Result<T> {
    if let Some(s) = requested {
        if !(s >= T::zero()) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("kernel shift {s} must be nonnegative")));
        }
        return Ok(s);
    }
    // `w` holds ω + δ here
    let (mut lo, mut hi) = (T::infinity(), T::zero());
    for v in w.left.iter().chain(&w.right) {
        for &x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let lo = if lo.is_finite() { lo.max(T::zero()) } else { T::zero() };
    let s = (lo + hi) * T::half();
    if s == T::zero() && model.kappa()?.abs() < T::lit(KAPPA_ZERO_TOL) {
        return Ok(T::one());
    }
    Ok(s)
}

/// Inputs shared by the solves of one scale set.
struct Setup<T> {
    cs: ClassicScale<T>,
    shift: T,
}

fn setup<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, delta: T, y: T, n: usize, opts: &OmegaOptions<T>) -> Result<Setup<T>> {
    om.check_states(model.n_states())?;
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta = {delta} must be nonnegative")));
    }
    let probe = NodeWeights::sample(om, -delta, model.n_states(), y, opts.h, n);
    let shift = choose_shift(model, &probe, opts.kernel_shift)?;
    let cs = ClassicScale::new(model, shift)?;
    Ok(Setup { cs, shift })
}

/// `W^(s)`, `W^(s)′`, `Z^(s)`, `Z^(s)′` on `k h`, `k < n`.
fn classic_nodes<T: Real>(cs: &ClassicScale<T>, h: T, n: usize) -> Result<[Vec<Mat<T>>; 4]> {
    let p = cs.pair();
    let dim = cs.model().n_states();
    let mut gen = cs.model().q_gen().clone();
    for (i, &k) in cs.killing().iter().enumerate() {
        gen[(i, i)] -= k;
    }
    let mut plus = ExpWalk::new(&-&p.lam_plus, h)?;
    let mut minus = ExpWalk::new(&p.lam_minus, h)?;
    let (mut w, mut dw, mut z, mut dz) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        if k > 0 {
            plus.advance()?;
            minus.advance()?;
        }
        let wk = &(&plus.power - &minus.power) * &p.xi;
        let dwk = -&(&(&(&p.lam_plus * &plus.power) + &(&p.lam_minus * &minus.power)) * &p.xi);
        let int_w = &(&plus.integral - &minus.integral) * &p.xi;
        let zk = &Mat::identity(dim) - &(&int_w * &gen);
        let dzk = -&(&wk * &gen);
        w.push(wk);
        dw.push(dwk);
        z.push(zk);
        dz.push(dzk);
    }
    Ok([w, dw, z, dz])
}

/// One solve of `H = f + W^(s)∗((ω+δ−s)H)` on `n` nodes from `y` with step `h`.
/// Returns values and derivatives.
fn solve_once<T: Real>(
    st: &Setup<T>,
    om: &OmegaFn<T>,
    delta: T,
    y: T,
    h: T,
    n: usize,
    route: Route,
    f: &[Mat<T>],
    df: &[Mat<T>],
) -> Result<(Vec<Mat<T>>, Vec<Mat<T>>)> {
    let dim = st.cs.model().n_states();
    let w = NodeWeights::sample(om, st.shift - delta, dim, y, h, n);
    let (k, dk) = scale_kernels(&st.cs);
    match route {
        Route::Structured => solve_structured(&k, &w, h, f, df),
        Route::Generic(mode) => {
            let kernel = k.grid(h, n)?;
            let prob = VolterraProblem {
                kernel: kernel.clone(),
                omega: om.clone(),
                shift: st.shift - delta,
                inhomogeneity: MatrixGrid::new(y, h, f.to_vec())?,
                origin: y,
            };
            let sol = volterra_solve(&prob, mode)?.into_values();
            let dkernel = dk.grid(h, n)?;
            let der = derivative_by_quadrature(kernel.values(), dkernel.values(), &w, df, &sol, h);
            Ok((sol, der))
        }
    }
}

/// `H′_k = f′_k + K(0) g_k + trapezoid of ∫ K′(x_k − z) g(z) dz`, `g = wH`.
pub(crate) fn derivative_by_quadrature<T: Real>(
    kern: &[Mat<T>],
    dkern: &[Mat<T>],
    w: &NodeWeights<T>,
    df: &[Mat<T>],
    sol: &[Mat<T>],
    h: T,
) -> Vec<Mat<T>> {
    let g: Vec<Mat<T>> = sol.iter().enumerate().map(|(k, m)| Mat::diag_mul(&w.trapezoid(k), m)).collect();
    (0..sol.len())
        .map(|k| {
            let ge = Mat::diag_mul(&w.endpoint(k), &sol[k]);
            let mut d = df[k].clone();
            d.add_mul_assign(&kern[0], &ge);
            if k > 0 {
                let mut acc = Mat::zeros(d.rows(), d.cols());
                acc.add_mul_assign(&dkern[k], &g[0]);
                acc = acc.scale(T::half());
                for j in 1..k {
                    acc.add_mul_assign(&dkern[k - j], &g[j]);
                }
                acc.add_scaled_assign(T::half(), &(&dkern[0] * &ge));
                d.add_scaled_assign(h, &acc);
            }
            d
        })
        .collect()
}

/// Solves at `h`, and at `h/2` when Richardson is on, for an inhomogeneity
/// given as a function of the node count and step.
fn solve_family<T: Real>(
    st: &Setup<T>,
    om: &OmegaFn<T>,
    delta: T,
    y: T,
    n: usize,
    opts: &OmegaOptions<T>,
    inh: &dyn Fn(T, usize) -> Result<(Vec<Mat<T>>, Vec<Mat<T>>)>,
) -> Result<(Vec<Mat<T>>, Vec<Mat<T>>)> {
    let (f, df) = inh(opts.h, n)?;
    let coarse = solve_once(st, om, delta, y, opts.h, n, opts.route, &f, &df)?;
    if !opts.richardson || n < 2 {
        return Ok(coarse);
    }
    let h2 = opts.h * T::half();
    let (f2, df2) = inh(h2, 2 * n - 1)?;
    let fine = solve_once(st, om, delta, y, h2, 2 * n - 1, opts.route, &f2, &df2)?;
    Ok((richardson(&coarse.0, &fine.0), richardson(&coarse.1, &fine.1)))
}

/// `𝒲^(ω+δ)(·,y)` and `𝒵^(ω+δ)(·,y)` on `[y, x_max]`.
pub fn omega_scale_set<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    delta: T,
    y: T,
    x_max: T,
    opts: &OmegaOptions<T>,
) -> Result<OmegaScaleSet<T>> {
    let n = node_count(y, x_max, opts.h)?;
    let st = setup(model, om, delta, y, n, opts)?;
    let w_inh = |h: T, m: usize| {
        let [w, dw, _, _] = classic_nodes(&st.cs, h, m)?;
        Ok((w, dw))
    };
    let z_inh = |h: T, m: usize| {
        let [_, _, z, dz] = classic_nodes(&st.cs, h, m)?;
        Ok((z, dz))
    };
    let (w, dw) = solve_family(&st, om, delta, y, n, opts, &w_inh)?;
    let (z, dz) = solve_family(&st, om, delta, y, n, opts, &z_inh)?;
    Ok(OmegaScaleSet {
        w_omega: MatrixGrid::new(y, opts.h, w)?,
        w_omega_prime: MatrixGrid::new(y, opts.h, dw)?,
        z_omega: MatrixGrid::new(y, opts.h, z)?,
        z_omega_prime: MatrixGrid::new(y, opts.h, dz)?,
        y,
        delta,
        kernel_shift: st.shift,
    })
}

/// `𝒲^(ω+δ)(·,y)` and its derivative only, skipping `𝒵`.
pub fn omega_w_pair<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    delta: T,
    y: T,
    x_max: T,
    opts: &OmegaOptions<T>,
) -> Result<(MatrixGrid<T>, MatrixGrid<T>)> {
    let n = node_count(y, x_max, opts.h)?;
    let st = setup(model, om, delta, y, n, opts)?;
    let w_inh = |h: T, m: usize| {
        let [w, dw, _, _] = classic_nodes(&st.cs, h, m)?;
        Ok((w, dw))
    };
    let (w, dw) = solve_family(&st, om, delta, y, n, opts, &w_inh)?;
    Ok((MatrixGrid::new(y, opts.h, w)?, MatrixGrid::new(y, opts.h, dw)?))
}

/// `𝒲^(ω)(·,y)` on `[y, x_max]`.
pub fn omega_w<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, y: T, x_max: T, opts: &OmegaOptions<T>) -> Result<MatrixGrid<T>> {
    Ok(omega_scale_set(model, om, T::zero(), y, x_max, opts)?.w_omega)
}

/// `𝒵^(ω)(·,y)` on `[y, x_max]`.
pub fn omega_z<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, y: T, x_max: T, opts: &OmegaOptions<T>) -> Result<MatrixGrid<T>> {
    Ok(omega_scale_set(model, om, T::zero(), y, x_max, opts)?.z_omega)
}

/// The derivative grid of a scale set.
pub fn omega_w_prime<T: Real>(set: &OmegaScaleSet<T>) -> &MatrixGrid<T> {
    &set.w_omega_prime
}

/// `∂ₓ𝒲^(ω+δ)(c, y)` straight from
/// `W^(s)′(c−y) + ∫_y^c W^(s)′(c−z)(ω(z)+δ−s)𝒲(z,y) dz` using the stored
/// grid, for `c` on a node. Used to cross-check the recursion.
pub fn omega_w_prime_direct<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, set: &OmegaScaleSet<T>, c: T) -> Result<Mat<T>> {
    let k = set
        .w_omega
        .node_index(c)
        .ok_or_else(|| Error::InvalidArgument(format!("c = {c} is not a grid node")))?;
    let cs = ClassicScale::new(model, set.kernel_shift)?;
    let h = set.w_omega.h();
    let w = NodeWeights::sample(om, set.kernel_shift - set.delta, model.n_states(), set.y, h, k + 1);
    let sol = &set.w_omega.values()[..=k];
    let kern: Vec<Mat<T>> = (0..=k).map(|j| cs.w(h * T::from_usize_lossy(j))).collect::<Result<_>>()?;
    let dkern: Vec<Mat<T>> = (0..=k).map(|j| cs.w_prime(h * T::from_usize_lossy(j))).collect::<Result<_>>()?;
    let df: Vec<Mat<T>> = dkern.clone();
    Ok(derivative_by_quadrature(&kern, &dkern, &w, &df, sol, h).pop().expect("nonempty"))
}

/// The `I`-inhomogeneity variant `I + ∫_y^x W(x−z)ω(z)M(z) dz`. It
/// differs from `𝒵^(ω)` by a term annihilated by the ones vector, and is
/// exposed for that comparison.
pub fn omega_z_identity_form<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    y: T,
    x_max: T,
    opts: &OmegaOptions<T>,
) -> Result<MatrixGrid<T>> {
    // the printed form convolves with W^(0); a shifted kernel would need a
    // different inhomogeneity
    let opts = &OmegaOptions { kernel_shift: Some(T::zero()), ..*opts };
    let n = node_count(y, x_max, opts.h)?;
    let st = setup(model, om, T::zero(), y, n, opts)?;
    let dim = model.n_states();
    let inh = |_h: T, m: usize| Ok((vec![Mat::identity(dim); m], vec![Mat::zeros(dim, dim); m]));
    let (v, _) = solve_family(&st, om, T::zero(), y, n, opts, &inh)?;
    MatrixGrid::new(y, opts.h, v)
}

/// Inhomogeneity used for `ℋ^(ω)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HForm {
    /// `e^{−Λ^β x}`: the limit of `𝒲(x,d)e^{−R^β d}(L^β)⁻¹` as `d → −∞`, which
    /// makes `ℋ(x)ℋ(c)⁻¹` the upward passage transform.
    #[default]
    FirstPassage,
    /// `e^{−R^β x} = Ξ⁻¹e^{−Λ^β x}Ξ`; matches the first form only for `N = 1`.
    Conjugated,
}

/// `ℋ^(ω)` on `[origin, x_max]`, for ω equal to the constant `β` on
/// `(−∞, origin]`. Values are indexed by absolute level: the grid holds
/// `ℋ_*(x − origin)` for the shifted rate `ω_*(u) = ω(u + origin)`.
#[derive(Clone, Debug)]
pub struct HGrid<T> {
    pub values: MatrixGrid<T>,
    pub derivs: MatrixGrid<T>,
    pub beta: T,
    pub form: HForm,
    lam_plus: Mat<T>,
    xi: Mat<T>,
    xi_inv: Mat<T>,
}

impl<T: Real> HGrid<T> {
    pub fn origin(&self) -> T {
        self.values.x0()
    }

    pub fn x_max(&self) -> T {
        self.values.x_last()
    }

    /// `ℋ` at `x ≤ x_max`. Below the origin the weight vanishes and `ℋ` is
    /// the inhomogeneity itself.
    pub fn at(&self, x: T) -> Result<Mat<T>> {
        if x < self.origin() {
            let e = expm(&self.lam_plus, self.origin() - x)?;
            return Ok(match self.form {
                HForm::FirstPassage => e,
                HForm::Conjugated => &(&self.xi_inv * &e) * &self.xi,
            });
        }
        self.values.hermite(&self.derivs, x)
    }
}

pub fn omega_h<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, beta: T, x_max: T, opts: &OmegaOptions<T>) -> Result<HGrid<T>> {
    omega_h_with(model, om, beta, T::zero(), x_max, opts, HForm::FirstPassage)
}

pub fn omega_h_with<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    beta: T,
    origin: T,
    x_max: T,
    opts: &OmegaOptions<T>,
    form: HForm,
) -> Result<HGrid<T>> {
    om.check_states(model.n_states())?;
    match om.constant_below(origin, model.n_states()) {
        Some(b) if (b - beta).abs() <= T::lit(1e-12) * (T::one() + beta.abs()) => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "omega must equal beta = {beta} on (-inf, {origin}] for the one-sided scale matrix"
            )))
        }
    }
    if !(beta >= T::zero()) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be nonnegative")));
    }
    let cs = ClassicScale::new(model, beta)?;
    let n = node_count(origin, x_max, opts.h)?;
    let st = Setup { cs, shift: beta };
    let p = st.cs.pair().clone();
    let xi_inv = st.cs.xi_inv().clone();
    let inh = |h: T, m: usize| {
        let mut walk = ExpWalk::new(&-&p.lam_plus, h)?;
        let (mut f, mut df) = (Vec::with_capacity(m), Vec::with_capacity(m));
        for k in 0..m {
            if k > 0 {
                walk.advance()?;
            }
            let e = walk.power.clone();
            let de = -&(&p.lam_plus * &e);
            match form {
                HForm::FirstPassage => {
                    f.push(e);
                    df.push(de);
                }
                HForm::Conjugated => {
                    f.push(&(&xi_inv * &e) * &p.xi);
                    df.push(&(&xi_inv * &de) * &p.xi);
                }
            }
        }
        Ok((f, df))
    };
    let route_opts = OmegaOptions { kernel_shift: Some(beta), ..*opts };
    let (v, d) = solve_family(&st, om, T::zero(), origin, n, &route_opts, &inh)?;
    Ok(HGrid {
        values: MatrixGrid::new(origin, opts.h, v)?,
        derivs: MatrixGrid::new(origin, opts.h, d)?,
        beta,
        form,
        lam_plus: p.lam_plus.clone(),
        xi: p.xi.clone(),
        xi_inv,
    })
}
