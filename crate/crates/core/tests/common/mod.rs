//! Shared oracles for the integration tests. Nothing here calls the scale
//! matrix machinery: the references are closed forms for scalar Brownian
//! motion and a finite-difference solver for the generator equation.
#![allow(dead_code)]

use omega_map::model::{MapModel, OmegaFn};
use omega_map::Mat;

pub fn two_state(q12: f64, q21: f64, sigma: [f64; 2], mu: [f64; 2]) -> MapModel<f64> {
    let q = Mat::from_rows(&[vec![-q12, q12], vec![q21, -q21]]);
    MapModel::new(q, sigma.to_vec(), mu.to_vec()).unwrap()
}

/// Driftless model with `σ = (1, 1.2)` and switching rates 0.05, 0.1.
pub fn driftless() -> MapModel<f64> {
    two_state(0.05, 0.1, [1.0, 1.2], [0.0, 0.0])
}

/// Opposite drifts, used with a two-level step rate.
pub fn step_model() -> MapModel<f64> {
    two_state(0.1, 0.3, [0.7, 0.85], [0.1, -0.1])
}

pub fn band_model() -> MapModel<f64> {
    two_state(0.4, 0.2, [1.2, 2.0], [1.75, 1.25])
}

pub fn max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    a.max_abs_diff(b)
}

/// Largest entrywise difference relative to the largest entry of `b`.
pub fn rel_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(1e-300)
}

pub fn ones_defect(m: &Mat<f64>) -> f64 {
    m.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

/// Scalar Brownian motion `σB_t + μt` killed at constant rate `q`.
#[derive(Clone, Copy, Debug)]
pub struct Bm {
    pub sigma: f64,
    pub mu: f64,
    pub q: f64,
}

impl Bm {
    fn disc(&self) -> f64 {
        (self.mu * self.mu + 2.0 * self.q * self.sigma * self.sigma).sqrt()
    }

    /// Roots of `½σ²θ² + μθ − q`, larger first.
    pub fn roots(&self) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        ((-self.mu + self.disc()) / s2, (-self.mu - self.disc()) / s2)
    }

    pub fn w(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (a, b) = self.roots();
        if self.disc() == 0.0 {
            return 2.0 * x / (self.sigma * self.sigma);
        }
        ((a * x).exp() - (b * x).exp()) / self.disc()
    }

    pub fn w_prime(&self, x: f64) -> f64 {
        let (a, b) = self.roots();
        (a * (a * x).exp() - b * (b * x).exp()) / self.disc()
    }

    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let (a, b) = self.roots();
        1.0 + self.q * (((a * x).exp() - 1.0) / a - ((b * x).exp() - 1.0) / b) / self.disc()
    }

    /// `E[e^{−qτ}; exit (d, c) at c]` from `x`.
    pub fn up(&self, d: f64, x: f64, c: f64) -> f64 {
        self.w(x - d) / self.w(c - d)
    }

    pub fn down(&self, d: f64, x: f64, c: f64) -> f64 {
        self.z(x - d) - self.w(x - d) * self.z(c - d) / self.w(c - d)
    }

    /// `E[e^{−qτ_d⁻}]`.
    pub fn down_inf(&self, d: f64, x: f64) -> f64 {
        (self.roots().1 * (x - d)).exp()
    }

    /// Potential density on the whole line.
    pub fn green_line(&self, x: f64, y: f64) -> f64 {
        let (a, b) = self.roots();
        let e = if y >= x { a * (x - y) } else { b * (x - y) };
        e.exp() / self.disc()
    }
}

/// Boundary condition for [`fd_solve`].
#[derive(Clone, Debug)]
pub enum Bc {
    Value(Mat<f64>),
    Slope(Mat<f64>),
}

/// Matrix solution of `½σᵢ²G″ + μᵢG′ + (Q − diag ω(x))G = −S` on `[a, b]`
/// by central differences on `n` cells, refined once by Richardson. Row `i`
/// of `G` is the start phase; each column is one vector problem. The left
/// end takes a value, the right end a value or a slope. Returns `G` on the
/// `n + 1` coarse nodes.
pub fn fd_solve(
    model: &MapModel<f64>,
    rate: &dyn Fn(usize, f64) -> f64,
    source: &Mat<f64>,
    a: f64,
    b: f64,
    left: &Mat<f64>,
    right: &Bc,
    n: usize,
) -> Vec<Mat<f64>> {
    let coarse = fd_once(model, rate, source, a, b, left, right, n);
    let fine = fd_once(model, rate, source, a, b, left, right, 2 * n);
    coarse
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let f = &fine[2 * k];
            Mat::from_fn(c.rows(), c.cols(), |i, j| (4.0 * f[(i, j)] - c[(i, j)]) / 3.0)
        })
        .collect()
}

fn fd_once(
    model: &MapModel<f64>,
    rate: &dyn Fn(usize, f64) -> f64,
    source: &Mat<f64>,
    a: f64,
    b: f64,
    left: &Mat<f64>,
    right: &Bc,
    n: usize,
) -> Vec<Mat<f64>> {
    let dim = model.n_states();
    let h = (b - a) / n as f64;
    let s2: Vec<f64> = model.sigma().iter().map(|s| s * s).collect();
    let lo: Vec<f64> = (0..dim).map(|i| 0.5 * s2[i] / (h * h) - 0.5 * model.mu()[i] / h).collect();
    let up: Vec<f64> = (0..dim).map(|i| 0.5 * s2[i] / (h * h) + 0.5 * model.mu()[i] / h).collect();
    let centre = |k: usize| {
        let x = a + h * k as f64;
        let mut d = model.q_gen().clone();
        for i in 0..dim {
            d[(i, i)] -= s2[i] / (h * h) + rate(i, x);
        }
        d
    };
    // unknowns u_1..u_m; Dirichlet right end removes node n, slope keeps it
    let m = match right {
        Bc::Value(_) => n - 1,
        Bc::Slope(_) => n,
    };
    let mut diag = Vec::with_capacity(m);
    let mut sub = Vec::with_capacity(m);
    let mut sup = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for k in 1..=m {
        let mut r = source.scale(-1.0);
        let mut l = lo.clone();
        if k == 1 {
            r = &r - &Mat::diag_mul(&lo, left);
        }
        if k == n {
            if let Bc::Slope(g) = right {
                // ghost node u_{n+1} = u_{n−1} + 2h g
                r = &r - &Mat::diag_mul(&up, &g.scale(2.0 * h));
                l = (0..dim).map(|i| lo[i] + up[i]).collect();
            }
        }
        if k == n - 1 {
            if let Bc::Value(v) = right {
                r = &r - &Mat::diag_mul(&up, v);
            }
        }
        diag.push(centre(k));
        sub.push(l);
        sup.push(up.clone());
        rhs.push(r);
    }
    // block Thomas
    let mut cp: Vec<Mat<f64>> = Vec::with_capacity(m);
    let mut dp: Vec<Mat<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut dk = diag[k].clone();
        let mut rk = rhs[k].clone();
        if k > 0 {
            let l = Mat::from_diag(&sub[k]);
            dk = &dk - &(&l * &cp[k - 1]);
            rk = &rk - &(&l * &dp[k - 1]);
        }
        let inv = dk.inverse().unwrap();
        cp.push(&inv * &Mat::from_diag(&sup[k]));
        dp.push(&inv * &rk);
    }
    let mut u = vec![Mat::zeros(dim, dim); m];
    u[m - 1] = dp[m - 1].clone();
    for k in (0..m - 1).rev() {
        u[k] = &dp[k] - &(&cp[k] * &u[k + 1]);
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(left.clone());
    out.extend(u);
    if let Bc::Value(v) = right {
        out.push(v.clone());
    }
    out
}

/// Rate closure for an `OmegaFn` plus a constant; jumps are averaged.
pub fn rate_of(om: &OmegaFn<f64>, extra: f64) -> impl Fn(usize, f64) -> f64 + '_ {
    move |i, x| 0.5 * (om.eval_left(i, x) + om.eval_right(i, x)) + extra
}

/// Linear read of an FD solution at `x`.
pub fn fd_at(sol: &[Mat<f64>], a: f64, b: f64, x: f64) -> Mat<f64> {
    let n = sol.len() - 1;
    let t = (x - a) / (b - a) * n as f64;
    let k = (t.floor() as usize).min(n - 1);
    let f = t - k as f64;
    Mat::from_fn(sol[0].rows(), sol[0].cols(), |i, j| (1.0 - f) * sol[k][(i, j)] + f * sol[k + 1][(i, j)])
}

/// `G` solving `½σᵢ²G″ + μᵢG′ + (Q − diag ω)G = 0` from `G(y) = g0`,
/// `G′(y) = dg0`, by RK4 on `n` steps to `x_max`. Rate jumps must sit on
/// step boundaries.
pub fn ivp_solve(
    model: &MapModel<f64>,
    om: &OmegaFn<f64>,
    extra: f64,
    y: f64,
    x_max: f64,
    n: usize,
    g0: &Mat<f64>,
    dg0: &Mat<f64>,
) -> Vec<Mat<f64>> {
    let dim = model.n_states();
    let h = (x_max - y) / n as f64;
    let tv = model.two_over_var();
    let rhs = |x: f64, g: &Mat<f64>, dg: &Mat<f64>| {
        let mut a = Mat::zeros(dim, dim);
        for i in 0..dim {
            let w = om.eval_unchecked(i, x) + extra;
            for j in 0..dim {
                let mut v = w * g[(i, j)] - model.mu()[i] * dg[(i, j)];
                for k in 0..dim {
                    v -= model.q_gen()[(i, k)] * g[(k, j)];
                }
                a[(i, j)] = tv[i] * v;
            }
        }
        (dg.clone(), a)
    };
    let (mut g, mut dg) = (g0.clone(), dg0.clone());
    let mut out = vec![g.clone()];
    for k in 0..n {
        let x = y + h * k as f64;
        // end stages read the rate just inside the step
        let nudge = 1e-9 * h;
        let (a1, b1) = rhs(x + nudge, &g, &dg);
        let (a2, b2) = rhs(x + h / 2.0, &(&g + &a1.scale(h / 2.0)), &(&dg + &b1.scale(h / 2.0)));
        let (a3, b3) = rhs(x + h / 2.0, &(&g + &a2.scale(h / 2.0)), &(&dg + &b2.scale(h / 2.0)));
        let (a4, b4) = rhs(x + h - nudge, &(&g + &a3.scale(h)), &(&dg + &b3.scale(h)));
        let mut sg = &a1 + &a4;
        sg.add_scaled_assign(2.0, &(&a2 + &a3));
        let mut sd = &b1 + &b4;
        sd.add_scaled_assign(2.0, &(&b2 + &b3));
        g.add_scaled_assign(h / 6.0, &sg);
        dg.add_scaled_assign(h / 6.0, &sd);
        out.push(g.clone());
    }
    out
}
