//! Matrix Volterra equations of the second kind,
//! `H(x) = h(x) + ∫_y^x K(x−z) diag(w(z)) H(z) dz`, on a uniform grid.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::matrix_engine::{expm, expm_with_integral};
use crate::model::{MatrixGrid, OmegaFn};
use crate::scalar::Real;

/// Picard iterations allowed before giving up.
pub const PICARD_MAX_ITER: usize = 200;

/// Breakpoints closer than this to a node count as sitting on it.
const SNAP_TOL: f64 = 1e-9;

/// How the discretized equation is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolveMode {
    #[default]
    ForwardSubstitution,
    Picard,
}

/// One-sided weights at every node. Interior nodes have equal limits; at a
/// jump of ω the quadrature uses their mean.
#[derive(Clone, Debug)]
pub struct NodeWeights<T> {
    pub left: Vec<Vec<T>>,
    pub right: Vec<Vec<T>>,
    /// Node indices where the limits differ.
    pub jumps: Vec<usize>,
    /// Effective trapezoid weights, see [`NodeWeights::trapezoid`].
    trap: Vec<Vec<T>>,
    /// Weights for a node that ends the integration range.
    end: Vec<Vec<T>>,
}

impl<T: Real> NodeWeights<T> {
    /// Samples `ω(z) − shift` at `x0 + k h`, `k < n`.
    pub fn sample(om: &OmegaFn<T>, shift: T, n_states: usize, x0: T, h: T, n: usize) -> Self {
        let bps = om.breakpoints();
        let snap = |b: T| T::lit(SNAP_TOL) * (T::one() + b.abs());
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        let mut jumps = Vec::new();
        for k in 0..n {
            let x = x0 + h * T::from_usize_lossy(k);
            let snapped = bps.iter().copied().find(|&b| (x - b).abs() <= snap(b));
            let (l, r): (Vec<T>, Vec<T>) = match snapped {
                Some(b) => (0..n_states)
                    .map(|i| (om.eval_left(i, b) - shift, om.eval_right(i, b) - shift))
                    .unzip(),
                None => {
                    let v: Vec<T> = (0..n_states).map(|i| om.eval_unchecked(i, x) - shift).collect();
                    (v.clone(), v)
                }
            };
            if l != r {
                jumps.push(k);
            }
            left.push(l);
            right.push(r);
        }
        // cells with a breakpoint strictly inside get exact hat moments of ω,
        // which keeps the rule second order across off-grid jumps
        let mut cells: Vec<(usize, Vec<T>)> = Vec::new();
        for &b in &bps {
            let t = (b - x0) / h;
            let c = t.floor();
            if !(c >= T::zero()) || c.as_f64() + 1.0 >= n as f64 {
                continue;
            }
            let lo = x0 + h * c;
            if (b - lo).abs() <= snap(b) || (lo + h - b).abs() <= snap(b) {
                continue;
            }
            let c = c.as_f64() as usize;
            if let Err(pos) = cells.binary_search_by(|e| e.0.cmp(&c)) {
                cells.insert(pos, (c, Vec::new()));
            }
            let entry = cells.iter_mut().find(|e| e.0 == c).expect("inserted");
            entry.1.push(b);
        }
        let mut trap: Vec<Vec<T>> = (0..n)
            .map(|k| {
                if k == 0 {
                    right[0].clone()
                } else {
                    left[k].iter().zip(&right[k]).map(|(&a, &b)| (a + b) * T::half()).collect()
                }
            })
            .collect();
        let mut end: Vec<Vec<T>> = (0..n).map(|k| if k == 0 { right[0].clone() } else { left[k].clone() }).collect();
        for (c, cuts) in &cells {
            let lo = x0 + h * T::from_usize_lossy(*c);
            let (a, b) = hat_moments(om, shift, n_states, lo, h, cuts);
            for i in 0..n_states {
                end[*c + 1][i] = b[i] * T::two();
                let k = *c;
                let own_left = if k == 0 { T::zero() } else { left[k][i] * T::half() };
                trap[k][i] = if k == 0 { a[i] * T::two() } else { own_left + a[i] };
                trap[k + 1][i] = b[i] + right[k + 1][i] * T::half();
            }
        }
        // two flagged cells next to each other share a node
        for w in cells.windows(2) {
            if w[1].0 == w[0].0 + 1 {
                let lo = x0 + h * T::from_usize_lossy(w[0].0);
                let (_, b) = hat_moments(om, shift, n_states, lo, h, &w[0].1);
                let (a, _) = hat_moments(om, shift, n_states, lo + h, h, &w[1].1);
                for i in 0..n_states {
                    trap[w[1].0][i] = b[i] + a[i];
                }
            }
        }
        Self { left, right, jumps, trap, end }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// Weight used by the trapezoid rule at node `k`: the right limit at the
    /// first node, the mean of the limits elsewhere, and hat moments next to
    /// a jump that falls between nodes.
    pub fn trapezoid(&self, k: usize) -> Vec<T> {
        self.trap[k].clone()
    }

    /// Weight at node `k` when the integral stops there, scaled like a
    /// trapezoid end weight: only the cell below `k` counts, so at a jump
    /// this is the left limit.
    pub fn endpoint(&self, k: usize) -> Vec<T> {
        self.end[k].clone()
    }

    pub fn is_zero(&self) -> bool {
        self.left.iter().chain(&self.right).all(|v| v.iter().all(|&w| w == T::zero()))
    }
}

/// `(∫(ω−s)(1−t), ∫(ω−s)t) / h` over `[lo, lo+h]`, `t` the local coordinate,
/// split at `cuts` and integrated by three-point Gauss on each piece.
fn hat_moments<T: Real>(om: &OmegaFn<T>, shift: T, n_states: usize, lo: T, h: T, cuts: &[T]) -> (Vec<T>, Vec<T>) {
    const G3: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];
    let mut edges = vec![T::zero(), T::one()];
    edges.extend(cuts.iter().map(|&b| (b - lo) / h));
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut a = vec![T::zero(); n_states];
    let mut b = vec![T::zero(); n_states];
    for e in edges.windows(2) {
        let half = (e[1] - e[0]) * T::half();
        for &(g, wt) in &G3 {
            let t = e[0] + half * (T::one() + T::lit(g));
            let z = lo + h * t;
            for i in 0..n_states {
                let v = (om.eval_unchecked(i, z) - shift) * half * T::lit(wt);
                a[i] += v * (T::one() - t);
                b[i] += v * t;
            }
        }
    }
    (a, b)
}

/// A Volterra problem with a sampled kernel. `kernel[k] = K(k h)`,
/// `inhomogeneity[k] = h(origin + k h)` and the weight is `ω − shift`.
#[derive(Clone, Debug)]
pub struct VolterraProblem<T> {
    pub kernel: MatrixGrid<T>,
    pub omega: OmegaFn<T>,
    pub shift: T,
    pub inhomogeneity: MatrixGrid<T>,
    pub origin: T,
}

impl<T: Real> VolterraProblem<T> {
    fn check(&self) -> Result<()> {
        let (k, f) = (&self.kernel, &self.inhomogeneity);
        let tol = T::lit(1e-12) * (T::one() + self.origin.abs());
        if (k.h() - f.h()).abs() > T::lit(1e-12) * f.h() {
            return Err(Error::Shape("kernel and inhomogeneity steps differ".into()));
        }
        if k.x0().abs() > tol || (f.x0() - self.origin).abs() > tol {
            return Err(Error::Shape("kernel must start at 0 and inhomogeneity at the origin".into()));
        }
        if k.len() < f.len() || k.dim() != f.dim() {
            return Err(Error::Shape("kernel grid must cover the inhomogeneity grid".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> NodeWeights<T> {
        let f = &self.inhomogeneity;
        NodeWeights::sample(&self.omega, self.shift, f.dim(), self.origin, f.h(), f.len())
    }
}

/// Trapezoid solution on the inhomogeneity grid.
pub fn volterra_solve<T: Real>(p: &VolterraProblem<T>, mode: SolveMode) -> Result<MatrixGrid<T>> {
    p.check()?;
    let w = p.weights();
    let kern = p.kernel.values();
    let f = p.inhomogeneity.values();
    let h = p.inhomogeneity.h();
    let values = match mode {
        SolveMode::ForwardSubstitution => forward_substitution(kern, &w, f, h)?,
        SolveMode::Picard => picard(kern, &w, f, h)?,
    };
    MatrixGrid::new(p.origin, h, values)
}

/// `h Σ' K_{k−j} g_j` over `j < k`, with half weight at `j = 0`.
fn history<T: Real>(kern: &[Mat<T>], g: &[Mat<T>], k: usize, h: T) -> Mat<T> {
    let n = g[0].rows();
    let mut acc = Mat::zeros(n, n);
    acc.add_mul_assign(&kern[k], &g[0]);
    acc = acc.scale(T::half());
    for j in 1..k {
        acc.add_mul_assign(&kern[k - j], &g[j]);
    }
    acc.scale(h)
}

fn forward_substitution<T: Real>(kern: &[Mat<T>], w: &NodeWeights<T>, f: &[Mat<T>], h: T) -> Result<Vec<Mat<T>>> {
    let n = f.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dim = f[0].rows();
    let k0_zero = kern[0].max_abs() == T::zero();
    let mut out: Vec<Mat<T>> = Vec::with_capacity(n);
    let mut g: Vec<Mat<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let wk = w.trapezoid(k);
        let hk = if k == 0 {
            f[0].clone()
        } else {
            let rhs = &f[k] + &history(kern, &g, k, h);
            if k0_zero {
                rhs
            } else {
                let local = &Mat::identity(dim) - &Mat::mul_diag(&kern[0], &w.endpoint(k)).scale(h * T::half());
                local.solve(&rhs).map_err(|_| Error::Singular(format!("local Volterra solve at node {k}")))?
            }
        };
        g.push(Mat::diag_mul(&wk, &hk));
        out.push(hk);
    }
    Ok(out)
}

fn picard<T: Real>(kern: &[Mat<T>], w: &NodeWeights<T>, f: &[Mat<T>], h: T) -> Result<Vec<Mat<T>>> {
    let n = f.len();
    let wts: Vec<Vec<T>> = (0..n).map(|k| w.trapezoid(k)).collect();
    let mut cur = f.to_vec();
    for _ in 0..PICARD_MAX_ITER {
        let g: Vec<Mat<T>> = cur.iter().zip(&wts).map(|(m, d)| Mat::diag_mul(d, m)).collect();
        let mut next = Vec::with_capacity(n);
        next.push(f[0].clone());
        for k in 1..n {
            let mut v = &f[k] + &history(kern, &g, k, h);
            v.add_scaled_assign(h * T::half(), &(&kern[0] * &Mat::diag_mul(&w.endpoint(k), &cur[k])));
            next.push(v);
        }
        let scale = next.iter().fold(T::one(), |a, m| a.max(m.max_abs()));
        let diff = next.iter().zip(&cur).fold(T::zero(), |a, (p, q)| a.max(p.max_abs_diff(q)));
        cur = next;
        if diff <= T::lit(1e-14).max(T::epsilon() * T::lit(16.0)) * scale {
            return Ok(cur);
        }
    }
    Err(Error::NoConvergence(format!("Picard iteration exceeded {PICARD_MAX_ITER} sweeps")))
}

/// A kernel of the form `K(x) = Σ_m e^{A_m x} B_m`, which turns the
/// convolution into a one-step recursion.
#[derive(Clone, Debug)]
pub struct ExpKernel<T> {
    pub terms: Vec<(Mat<T>, Mat<T>)>,
}

impl<T: Real> ExpKernel<T> {
    pub fn eval(&self, x: T) -> Result<Mat<T>> {
        let n = self.terms[0].1.rows();
        let mut acc = Mat::zeros(n, n);
        for (a, b) in &self.terms {
            acc.add_mul_assign(&expm(a, x)?, b);
        }
        Ok(acc)
    }

    pub fn at_zero(&self) -> Mat<T> {
        let n = self.terms[0].1.rows();
        let mut acc = Mat::zeros(n, n);
        for (_, b) in &self.terms {
            acc = &acc + b;
        }
        acc
    }

    pub fn grid(&self, h: T, n: usize) -> Result<MatrixGrid<T>> {
        MatrixGrid::from_fn(T::zero(), h, n, |x| self.eval(x))
    }
}

/// Powers `e^{A x_k}` and integrals `∫₀^{x_k} e^{Az} dz` on `x_k = k h`,
/// refreshed from scratch every `REFRESH` steps to stop drift.
pub(crate) struct ExpWalk<T> {
    a: Mat<T>,
    h: T,
    step: Mat<T>,
    step_int: Mat<T>,
    k: usize,
    pub power: Mat<T>,
    pub integral: Mat<T>,
}

const REFRESH: usize = 256;

impl<T: Real> ExpWalk<T> {
    pub fn new(a: &Mat<T>, h: T) -> Result<Self> {
        let (step, step_int) = expm_with_integral(a, h)?;
        let n = a.rows();
        Ok(Self { a: a.clone(), h, step, step_int, k: 0, power: Mat::identity(n), integral: Mat::zeros(n, n) })
    }

    pub fn advance(&mut self) -> Result<()> {
        self.k += 1;
        if self.k % REFRESH == 0 {
            let (p, i) = expm_with_integral(&self.a, self.h * T::from_usize_lossy(self.k))?;
            self.power = p;
            self.integral = i;
        } else {
            self.integral = &self.integral + &(&self.power * &self.step_int);
            self.power = &self.power * &self.step;
        }
        Ok(())
    }
}

/// Trapezoid solution for an exponential-sum kernel in `O(n)` work, with
/// the derivative `H′` from the differentiated equation. `f`, `df` are the
/// inhomogeneity and its derivative on the nodes.
pub fn solve_structured<T: Real>(
    kern: &ExpKernel<T>,
    w: &NodeWeights<T>,
    h: T,
    f: &[Mat<T>],
    df: &[Mat<T>],
) -> Result<(Vec<Mat<T>>, Vec<Mat<T>>)> {
    let n = f.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let dim = f[0].rows();
    let steps: Vec<Mat<T>> = kern.terms.iter().map(|(a, _)| expm(a, h)).collect::<Result<_>>()?;
    let k0 = kern.at_zero();
    let k0_zero = k0.max_abs() == T::zero();
    let half_h = h * T::half();
    let mut acc: Vec<Mat<T>> = vec![Mat::zeros(dim, dim); kern.terms.len()];
    let mut vals = Vec::with_capacity(n);
    let mut ders = Vec::with_capacity(n);
    for k in 0..n {
        let wk = w.trapezoid(k);
        let mut rhs = f[k].clone();
        for u in &acc {
            rhs = &rhs + u;
        }
        let hk = if k == 0 || k0_zero {
            rhs
        } else {
            let local = &Mat::identity(dim) - &Mat::mul_diag(&k0, &w.endpoint(k)).scale(half_h);
            local.solve(&rhs).map_err(|_| Error::Singular(format!("local Volterra solve at node {k}")))?
        };
        let gk = Mat::diag_mul(&wk, &hk);
        let ge = Mat::diag_mul(&w.endpoint(k), &hk);
        let mut dk = df[k].clone();
        if !k0_zero {
            dk.add_mul_assign(&k0, &ge);
        }
        if k > 0 {
            for ((a, b), u) in kern.terms.iter().zip(&acc) {
                let mut inner = u.clone();
                inner.add_scaled_assign(half_h, &(b * &ge));
                dk.add_mul_assign(a, &inner);
            }
        }
        let wt = if k == 0 { half_h } else { h };
        for ((step, (_, b)), u) in steps.iter().zip(&kern.terms).zip(acc.iter_mut()) {
            let mut inner = u.clone();
            inner.add_scaled_assign(wt, &(b * &gk));
            *u = step * &inner;
        }
        vals.push(hk);
        ders.push(dk);
    }
    Ok((vals, ders))
}

/// Richardson combination `(4 fine − coarse)/3` at the coarse nodes.
pub(crate) fn richardson<T: Real>(coarse: &[Mat<T>], fine: &[Mat<T>]) -> Vec<Mat<T>> {
    let third = T::one() / T::lit(3.0);
    coarse
        .iter()
        .enumerate()
        .map(|(k, c)| (&fine[2 * k].scale(T::lit(4.0)) - c).scale(third))
        .collect()
}

/// Residual of a grid solution measured with a fourth-order rule that
/// honours jumps of the weight: `max_k |H_k − f_k − ∫ K w H|` together with
/// `max ‖H‖`. Integrals are split at jump nodes and use Simpson's rule, with
/// a 3/8 panel when a piece has an odd number of intervals.
pub fn volterra_residual<T: Real>(
    kern: &[Mat<T>],
    w: &NodeWeights<T>,
    f: &[Mat<T>],
    sol: &[Mat<T>],
    h: T,
) -> (T, T) {
    let n = sol.len();
    let mut worst = T::zero();
    let norm = sol.iter().fold(T::zero(), |a, m| a.max(m.max_abs()));
    for k in 1..n {
        let mut cuts = vec![0usize];
        cuts.extend(w.jumps.iter().copied().filter(|&j| j > 0 && j < k));
        cuts.push(k);
        let mut integral = Mat::zeros(sol[0].rows(), sol[0].cols());
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let term = |j: usize| {
                let wj = if j == a {
                    &w.right[j]
                } else if j == b {
                    &w.left[j]
                } else {
                    &w.right[j]
                };
                &kern[k - j] * &Mat::diag_mul(wj, &sol[j])
            };
            integral = &integral + &piece(a, b, h, &term);
        }
        let r = &(&sol[k] - &f[k]) - &integral;
        worst = worst.max(r.max_abs());
    }
    (worst, norm)
}

fn piece<T: Real>(a: usize, b: usize, h: T, term: &dyn Fn(usize) -> Mat<T>) -> Mat<T> {
    let m = b - a;
    let th = T::lit(3.0);
    match m {
        0 => {
            let t = term(a);
            Mat::zeros(t.rows(), t.cols())
        }
        1 => (&term(a) + &term(b)).scale(h * T::half()),
        _ => {
            let simpson_end = if m % 2 == 0 { b } else { b - 3 };
            let mut acc = {
                let t = term(a);
                Mat::zeros(t.rows(), t.cols())
            };
            if simpson_end > a {
                acc = &acc + &term(a);
                acc = &acc + &term(simpson_end);
                for j in (a + 1)..simpson_end {
                    let c = if (j - a) % 2 == 1 { T::lit(4.0) } else { T::two() };
                    acc.add_scaled_assign(c, &term(j));
                }
                acc = acc.scale(h / th);
            }
            if simpson_end < b {
                let s = simpson_end;
                let mut e = &term(s) + &term(b);
                e.add_scaled_assign(th, &term(s + 1));
                e.add_scaled_assign(th, &term(s + 2));
                acc.add_scaled_assign(T::lit(3.0 / 8.0) * h, &e);
            }
            acc
        }
    }
}
