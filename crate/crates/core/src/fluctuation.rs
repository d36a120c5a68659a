//! Exit problems and resolvents of the ω-killed process.
//!
//! Matrix entry `(i, j)` always conditions on `J_0 = i` and records the
//! state `j` at the exit, kill or occupation time.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::model::{MapModel, MatrixGrid, OmegaFn, OmegaKind};
use crate::matrix_engine::expm;
use crate::scalar::Real;
use crate::scale_classic::ClassicScale;
use crate::scale_omega::{omega_h_with, omega_scale_set, omega_w_pair, HForm, HGrid, OmegaOptions, OmegaScaleSet};

/// Condition number above which `𝒲(c, d)` or `ℋ(c)` is refused.
pub const INVERSE_COND_LIMIT: f64 = 1e12;

/// `A_d(x,c)` (exit up) and `B_d(x,c)` (exit down).
#[derive(Clone, Debug)]
pub struct ExitResult<T> {
    pub up: Mat<T>,
    pub down: Mat<T>,
    pub x: T,
    pub c: T,
    pub d: T,
}

/// How limits `c → ∞` are taken.
///
/// With `exact_tail` set and ω constant above some level, the limits come
/// from the exact split of the scale matrices into growing and decaying
/// exponential modes above that level. Otherwise, or when that split is
/// unavailable, `f(c)` is evaluated at `anchor + offset` until successive
/// values agree entrywise to `tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitSchedule<T> {
    pub offsets: Vec<T>,
    pub tol: T,
    pub exact_tail: bool,
}

impl<T: Real> Default for LimitSchedule<T> {
    fn default() -> Self {
        Self { offsets: [8.0, 16.0, 32.0, 64.0].iter().map(|&v| T::lit(v)).collect(), tol: T::lit(1e-7), exact_tail: true }
    }
}

impl<T: Real> LimitSchedule<T> {
    /// Truncation only, no tail split.
    pub fn truncation() -> Self {
        Self { exact_tail: false, ..Self::default() }
    }

    fn far(&self) -> T {
        self.offsets.iter().copied().fold(T::zero(), T::max)
    }
}

/// Constant-rate tail of ω. Above `level` every ω-harmonic matrix `G` has the
/// form `e^{−Λ⁺(x−b)}M₊ + e^{Λ⁻(x−b)}M₋`. The first mode grows faster than
/// the second, so as `c → ∞` only `M₊` survives in ratios `G₁(c)⁻¹G₂(c)`.
struct Tail<T> {
    cs: ClassicScale<T>,
    level: Option<T>,
    sum_inv: Mat<T>,
}

impl<T: Real> Tail<T> {
    fn new(model: &MapModel<T>, om: &OmegaFn<T>, sched: &LimitSchedule<T>) -> Option<Self> {
        if !sched.exact_tail {
            return None;
        }
        let (level, kill) = om.constant_tail(model.n_states());
        let cs = ClassicScale::with_killing(model, &kill).ok()?;
        // the discarded mode, relative to the kept one, at the farthest
        // truncation point must already be below the Cauchy tolerance
        let far = sched.far();
        let lost = expm(&cs.pair().lam_plus, far).ok()?.max_abs() * cs.exp_minus(far).ok()?.max_abs();
        if !(lost < sched.tol) {
            return None;
        }
        let p = cs.pair();
        let sum_inv = (&p.lam_plus + &p.lam_minus).inverse().ok()?;
        Some(Self { cs, level, sum_inv })
    }

    /// First node of a grid at `start` with spacing `h` at or above `floor`
    /// and two cells clear of the tail level, where derivatives are clean.
    fn node(&self, start: T, h: T, floor: T) -> T {
        let b0 = self.level.map_or(floor, |l| (l + h * T::two()).max(floor)).max(start);
        let k = ((b0 - start) / h - T::lit(1e-9)).ceil().max(T::zero());
        start + k * h
    }

    /// `M₊` of `G`, referred to level `r`, from `G(b)` and `G′(b)`.
    fn growth(&self, b: T, r: T, g: &Mat<T>, dg: &Mat<T>) -> Result<Mat<T>> {
        let m = &self.sum_inv * &(&(&self.cs.pair().lam_minus * g) - dg);
        Ok(&self.cs.exp_plus(r - b)? * &m)
    }
}

fn check_order<T: Real>(lo: T, x: T, hi: T) -> Result<()> {
    if !(lo <= x && x <= hi) {
        return Err(Error::InvalidArgument(format!("need {lo} <= x = {x} <= {hi}")));
    }
    Ok(())
}

pub fn two_sided_exit<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, d: T, x: T, c: T) -> Result<ExitResult<T>> {
    two_sided_exit_with(model, om, d, x, c, &OmegaOptions::default())
}

pub fn two_sided_exit_with<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    x: T,
    c: T,
    opts: &OmegaOptions<T>,
) -> Result<ExitResult<T>> {
    check_order(d, x, c)?;
    if !(c > d) {
        return Err(Error::InvalidArgument("need c > d".into()));
    }
    let set = omega_scale_set(model, om, T::zero(), d, c, opts)?;
    exit_from_set(&set, x, c)
}

/// Both exit matrices read off a scale set started at `d`.
pub fn exit_from_set<T: Real>(set: &OmegaScaleSet<T>, x: T, c: T) -> Result<ExitResult<T>> {
    let d = set.y;
    check_order(d, x, c)?;
    let wc = set.w_at(c)?;
    let wc_inv = wc.inverse_checked(T::lit(INVERSE_COND_LIMIT), "W(c, d)")?;
    let up = &set.w_at(x)? * &wc_inv;
    let down = &set.z_at(x)? - &(&up * &set.z_at(c)?);
    Ok(ExitResult { up, down, x, c, d })
}

/// Lowest level below which ω is the constant `β`, used as the origin of `ℋ`.
fn h_origin<T: Real>(om: &OmegaFn<T>, n: usize) -> Option<(T, T)> {
    let mut cands = vec![T::zero()];
    cands.extend(om.breakpoints());
    if let OmegaKind::Tabulated { x, .. } = om.kind() {
        cands.extend(x.iter().copied());
    }
    cands.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    for o in cands {
        if let Some(b) = om.constant_below(o, n) {
            return Some((o, b));
        }
    }
    None
}

/// `ℋ^(ω)` covering `[.., x_max]` for ω equal to `beta` on a left half-line.
pub fn h_grid<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, beta: T, x_max: T, opts: &OmegaOptions<T>) -> Result<HGrid<T>> {
    let (origin, b) = h_origin(om, model.n_states()).ok_or_else(|| {
        Error::InvalidArgument("one-sided upward exit needs omega constant on a left half-line".into())
    })?;
    if (b - beta).abs() > T::lit(1e-12) * (T::one() + beta.abs()) {
        return Err(Error::InvalidArgument(format!(
            "omega equals {b} on (-inf, {origin}], not beta = {beta}"
        )));
    }
    omega_h_with(model, om, beta, origin, x_max.max(origin), opts, HForm::FirstPassage)
}

/// `E_x[e^{−∫ω}; τ_c⁺ < ∞, J]` as `ℋ(x)ℋ(c)⁻¹`.
pub fn one_sided_up<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, beta: T, x: T, c: T) -> Result<Mat<T>> {
    one_sided_up_with(model, om, beta, x, c, &OmegaOptions::default())
}

pub fn one_sided_up_with<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    beta: T,
    x: T,
    c: T,
    opts: &OmegaOptions<T>,
) -> Result<Mat<T>> {
    if !(x <= c) {
        return Err(Error::InvalidArgument(format!("need x = {x} <= c = {c}")));
    }
    let hg = h_grid(model, om, beta, c, opts)?;
    let hc = hg.at(c)?.inverse_checked(T::lit(INVERSE_COND_LIMIT), "H(c)")?;
    Ok(&hg.at(x)? * &hc)
}

/// Runs `f(c)` along the schedule until two successive values agree.
fn limit_along<T: Real>(
    anchor: T,
    sched: &LimitSchedule<T>,
    what: &str,
    mut f: impl FnMut(T) -> Result<Mat<T>>,
) -> Result<(Mat<T>, T)> {
    let mut prev: Option<Mat<T>> = None;
    let mut last_err = None;
    for &off in &sched.offsets {
        let c = anchor + off;
        match f(c) {
            Ok(v) => {
                if let Some(p) = &prev {
                    let diff = p.max_abs_diff(&v);
                    if diff < sched.tol {
                        return Ok((v, c));
                    }
                    last_err = Some(format!("last two iterates differ by {:e} at c = {c}", diff.as_f64()));
                }
                prev = Some(v);
            }
            // growth of 𝒲 can make it unusable before the limit settles
            Err(Error::IllConditioned { .. }) if prev.is_some() => break,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoConvergence(format!(
        "{what}: no convergence along the truncation schedule ({})",
        last_err.unwrap_or_else(|| "fewer than two usable iterates".into())
    )))
}

/// `E_x[e^{−∫ω}; τ_d⁻ < ∞, J]` as `𝒵(x,d) − 𝒲(x,d) lim 𝒲(c,d)⁻¹𝒵(c,d)`.
pub fn one_sided_down<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, x: T, sched: &LimitSchedule<T>) -> Result<Mat<T>> {
    one_sided_down_from(model, om, T::zero(), x, sched, &OmegaOptions::default())
}

pub fn one_sided_down_from<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    x: T,
    sched: &LimitSchedule<T>,
    opts: &OmegaOptions<T>,
) -> Result<Mat<T>> {
    if !(x >= d) {
        return Err(Error::InvalidArgument(format!("need x = {x} >= d = {d}")));
    }
    if om.bound_lambda() == T::zero() {
        return Err(Error::InvalidArgument("one-sided downward exit needs omega not identically zero".into()));
    }
    if let Some(tail) = Tail::new(model, om, sched) {
        let b = tail.node(d, opts.h, d);
        let set = omega_scale_set(model, om, T::zero(), d, x.max(b + opts.h), opts)?;
        let mw = tail.growth(b, b, &set.w_at(b)?, &set.w_omega_prime.interp(b)?)?;
        let mz = tail.growth(b, b, &set.z_at(b)?, &set.z_omega_prime.interp(b)?)?;
        let lim = &mw.inverse_checked(T::lit(INVERSE_COND_LIMIT), "growth part of W(., d)")? * &mz;
        return Ok(&set.z_at(x)? - &(&set.w_at(x)? * &lim));
    }
    let set = omega_scale_set(model, om, T::zero(), d, x + sched.far(), opts)?;
    let (lim, _) = limit_along(x, sched, "W(c)^-1 Z(c)", |c| {
        let wc = set.w_at(c)?.inverse_checked(T::lit(INVERSE_COND_LIMIT), "W(c, d)")?;
        Ok(&wc * &set.z_at(c)?)
    })?;
    Ok(&set.z_at(x)? - &(&set.w_at(x)? * &lim))
}

/// Occupation window of a resolvent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window<T> {
    /// `(d, c)`.
    Interval { d: T, c: T },
    /// `(d, ∞)`.
    Above { d: T },
    /// `(−∞, c)`.
    Below { c: T },
    /// The whole line.
    Line,
}

/// Density of `U^(ω)(x, dy)` on a uniform `y` grid.
#[derive(Clone, Debug)]
pub struct ResolventGrid<T> {
    pub density: MatrixGrid<T>,
    pub window: Window<T>,
    pub x: T,
}

/// `𝒲(·, y)` for many `y`. When ω does not depend on the level one solve
/// serves every `y` by translation.
struct WFamily<'a, T> {
    model: &'a MapModel<T>,
    om: &'a OmegaFn<T>,
    opts: OmegaOptions<T>,
    shared: Option<(MatrixGrid<T>, MatrixGrid<T>)>,
}

impl<'a, T: Real> WFamily<'a, T> {
    fn new(model: &'a MapModel<T>, om: &'a OmegaFn<T>, span: T, opts: &OmegaOptions<T>) -> Result<Self> {
        let level_free = matches!(om.kind(), OmegaKind::Constant(_) | OmegaKind::PerState(_));
        let shared = if level_free {
            Some(omega_w_pair(model, om, T::zero(), T::zero(), span.max(opts.h), opts)?)
        } else {
            None
        };
        Ok(Self { model, om, opts: *opts, shared })
    }

    /// `𝒲(x_k, y)` for every `x_k` in `xs`, and with a tail the growth part
    /// of `𝒲(·, y)` referred to `r`.
    fn eval(&self, y: T, xs: &[T], tail: Option<(&Tail<T>, T)>) -> Result<(Vec<Mat<T>>, Option<Mat<T>>)> {
        let n = self.model.n_states();
        let zero = || Mat::zeros(n, n);
        let read = |w: &MatrixGrid<T>, dw: &MatrixGrid<T>, u: T| if u <= T::zero() { Ok(zero()) } else { w.hermite(dw, u) };
        if let Some((w, dw)) = &self.shared {
            let col = xs.iter().map(|&x| read(w, dw, x - y)).collect::<Result<Vec<_>>>()?;
            let g = match tail {
                Some((t, r)) => Some(t.growth(y, r, w.at(0), dw.at(0))?),
                None => None,
            };
            return Ok((col, g));
        }
        let h = self.opts.h;
        let b = tail.map(|(t, _)| t.node(y, h, y));
        let top = xs.iter().copied().fold(b.map_or(y, |b| b + h), T::max);
        if top <= y {
            return Ok((vec![zero(); xs.len()], None));
        }
        let (w, dw) = omega_w_pair(self.model, self.om, T::zero(), y, top, &self.opts)?;
        let col = xs.iter().map(|&x| if x <= y { Ok(zero()) } else { w.hermite(&dw, x) }).collect::<Result<Vec<_>>>()?;
        let g = match (tail, b) {
            (Some((t, r)), Some(b)) => Some(t.growth(b, r, &w.interp(b)?, &dw.interp(b)?)?),
            _ => None,
        };
        Ok((col, g))
    }
}

/// Resolvent density on `y0 + k hy`, `k < ny`.
pub fn resolvent<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    window: Window<T>,
    x: T,
    y_grid: (T, T, usize),
    sched: &LimitSchedule<T>,
    opts: &OmegaOptions<T>,
) -> Result<ResolventGrid<T>> {
    let (y0, hy, ny) = y_grid;
    let ys: Vec<T> = (0..ny).map(|k| y0 + hy * T::from_usize_lossy(k)).collect();
    let dens = resolvent_at(model, om, window, x, &ys, sched, opts)?;
    Ok(ResolventGrid { density: MatrixGrid::new(y0, hy, dens)?, window, x })
}

/// `lim_c G(c)⁻¹𝒲(c, y)` for the harmonic matrix `G` given on a grid.
enum LimitConst<'a, T> {
    /// Inverse of the growth part of `G`, referred to `r`.
    Tail { tail: Tail<T>, r: T, g_inv: Mat<T> },
    /// `G` read at the truncation points.
    Truncated { at: Box<dyn Fn(T) -> Result<Mat<T>> + Sync + 'a>, anchor: T },
}

impl<T: Real> LimitConst<'_, T> {
    /// `(𝒲(x_0, y), lim G(c)⁻¹𝒲(c, y))`.
    fn column(&self, fam: &WFamily<'_, T>, y: T, x: T, sched: &LimitSchedule<T>, what: &str) -> Result<(Mat<T>, Mat<T>)> {
        match self {
            LimitConst::Tail { tail, r, g_inv } => {
                let (col, m) = fam.eval(y, &[x], Some((tail, *r)))?;
                Ok((col[0].clone(), g_inv * &m.expect("tail requested")))
            }
            LimitConst::Truncated { at, anchor } => {
                let cs: Vec<T> = sched.offsets.iter().map(|&o| *anchor + o).collect();
                let mut pts = vec![x];
                pts.extend(&cs);
                let (col, _) = fam.eval(y, &pts, None)?;
                let (lim, _) = limit_along(*anchor, sched, what, |c| {
                    let k = cs.iter().position(|&v| v == c).expect("schedule point");
                    Ok(&at(c)?.inverse_checked(T::lit(INVERSE_COND_LIMIT), what)? * &col[k + 1])
                })?;
                Ok((col[0].clone(), lim))
            }
        }
    }
}

/// Resolvent density at arbitrary points `ys`.
pub fn resolvent_at<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    window: Window<T>,
    x: T,
    ys: &[T],
    sched: &LimitSchedule<T>,
    opts: &OmegaOptions<T>,
) -> Result<Vec<Mat<T>>> {
    let n = model.n_states();
    let h = opts.h;
    let y_lo = ys.iter().copied().fold(x, T::min);
    let y_hi = ys.iter().copied().fold(x, T::max);
    let zero = || Mat::zeros(n, n);
    match window {
        Window::Interval { d, c } => {
            check_order(d, x, c)?;
            let set = omega_scale_set(model, om, T::zero(), d, c, opts)?;
            let a = &set.w_at(x)? * &set.w_at(c)?.inverse_checked(T::lit(INVERSE_COND_LIMIT), "W(c, d)")?;
            let fam = WFamily::new(model, om, c - d, opts)?;
            ys.par_iter()
                .map(|&y| {
                    if y <= d || y >= c {
                        return Ok(zero());
                    }
                    let (col, _) = fam.eval(y, &[x, c], None)?;
                    Ok(&(&a * &col[1]) - &col[0])
                })
                .collect()
        }
        Window::Below { c } => {
            if !(x <= c) {
                return Err(Error::InvalidArgument(format!("need x = {x} <= c = {c}")));
            }
            let beta = h_origin(om, n).map(|(_, b)| b).unwrap_or(T::zero());
            let hg = h_grid(model, om, beta, c, opts)?;
            let a = &hg.at(x)? * &hg.at(c)?.inverse_checked(T::lit(INVERSE_COND_LIMIT), "H(c)")?;
            let fam = WFamily::new(model, om, c - y_lo.min(c), opts)?;
            ys.par_iter()
                .map(|&y| {
                    if y >= c {
                        return Ok(zero());
                    }
                    let (col, _) = fam.eval(y, &[x, c], None)?;
                    Ok(&(&a * &col[1]) - &col[0])
                })
                .collect()
        }
        Window::Above { d } => {
            if !(x >= d) {
                return Err(Error::InvalidArgument(format!("need x = {x} >= d = {d}")));
            }
            let (gx, lc, span) = match Tail::new(model, om, sched) {
                Some(tail) => {
                    let b = tail.node(d, h, d);
                    let set = omega_scale_set(model, om, T::zero(), d, x.max(b + h), opts)?;
                    let g = tail.growth(b, b, &set.w_at(b)?, &set.w_omega_prime.interp(b)?)?;
                    let g_inv = g.inverse_checked(T::lit(INVERSE_COND_LIMIT), "growth part of W(., d)")?;
                    (set.w_at(x)?, LimitConst::Tail { tail, r: b, g_inv }, x - y_lo.min(d))
                }
                None => {
                    let anchor = x.max(y_hi);
                    let set = omega_scale_set(model, om, T::zero(), d, anchor + sched.far(), opts)?;
                    let gx = set.w_at(x)?;
                    (gx, LimitConst::Truncated { at: Box::new(move |c| set.w_at(c)), anchor }, anchor + sched.far() - d)
                }
            };
            let fam = WFamily::new(model, om, span, opts)?;
            ys.par_iter()
                .map(|&y| {
                    if y <= d {
                        return Ok(zero());
                    }
                    let (wxy, lim) = lc.column(&fam, y, x, sched, "W(c, d)^-1 W(c, y)")?;
                    Ok(&(&gx * &lim) - &wxy)
                })
                .collect()
        }
        Window::Line => {
            let beta = h_origin(om, n).map(|(_, b)| b).unwrap_or(T::zero());
            let (gx, lc, span) = match Tail::new(model, om, sched) {
                Some(tail) => {
                    let origin = h_origin(om, n).map(|(o, _)| o).unwrap_or(T::zero());
                    let b = tail.node(origin, h, origin);
                    let hg = h_grid(model, om, beta, x.max(b + h), opts)?;
                    let g = tail.growth(b, b, &hg.values.interp(b)?, &hg.derivs.interp(b)?)?;
                    let g_inv = g.inverse_checked(T::lit(INVERSE_COND_LIMIT), "growth part of H")?;
                    (hg.at(x)?, LimitConst::Tail { tail, r: b, g_inv }, x - y_lo)
                }
                None => {
                    let anchor = x.max(y_hi);
                    let hg = h_grid(model, om, beta, anchor + sched.far(), opts)?;
                    let gx = hg.at(x)?;
                    (gx, LimitConst::Truncated { at: Box::new(move |c| hg.at(c)), anchor }, anchor + sched.far() - y_lo)
                }
            };
            let fam = WFamily::new(model, om, span, opts)?;
            ys.par_iter()
                .map(|&y| {
                    let (wxy, lim) = lc.column(&fam, y, x, sched, "H(c)^-1 W(c, y)")?;
                    Ok(&(&gx * &lim) - &wxy)
                })
                .collect()
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, eight points.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Quadrature nodes on `[a, b]` split at `cuts`, pieces no longer than `max_len`.
pub(crate) fn gauss_nodes<T: Real>(a: T, b: T, cuts: &[T], max_len: T) -> Vec<(T, T)> {
    let mut edges = vec![a, b];
    edges.extend(cuts.iter().copied().filter(|&v| v > a && v < b));
    edges.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
    let mut out = Vec::new();
    for e in edges.windows(2) {
        let len = e[1] - e[0];
        if len <= T::zero() {
            continue;
        }
        let m = (len / max_len).ceil().as_f64().max(1.0) as usize;
        let h = len / T::from_usize_lossy(m);
        for p in 0..m {
            let lo = e[0] + h * T::from_usize_lossy(p);
            for &(t, w) in &GL8 {
                out.push((lo + h * T::half() * (T::one() + T::lit(t)), h * T::half() * T::lit(w)));
            }
        }
    }
    out
}

/// Killing mass before exit from `(d, c)`: `∫ U(x, y) diag(ω(y)) dy`.
pub fn killing_probability<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, d: T, x: T, c: T) -> Result<Mat<T>> {
    killing_probability_with(model, om, d, x, c, &OmegaOptions::plain_trapezoid(T::lit(1e-3)))
}

pub fn killing_probability_with<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    x: T,
    c: T,
    opts: &OmegaOptions<T>,
) -> Result<Mat<T>> {
    check_order(d, x, c)?;
    let n = model.n_states();
    if om.bound_lambda() == T::zero() {
        return Ok(Mat::zeros(n, n));
    }
    let mut cuts = vec![x];
    cuts.extend(om.breakpoints());
    let nodes = gauss_nodes(d, c, &cuts, T::lit(0.25));
    let ys: Vec<T> = nodes.iter().map(|p| p.0).collect();
    let dens = resolvent_at(model, om, Window::Interval { d, c }, x, &ys, &LimitSchedule::default(), opts)?;
    let mut acc = Mat::zeros(n, n);
    for ((y, w), u) in nodes.iter().zip(&dens) {
        let rates: Vec<T> = (0..n).map(|j| om.eval_unchecked(j, *y)).collect();
        acc.add_scaled_assign(*w, &Mat::mul_diag(u, &rates));
    }
    Ok(acc)
}
