//! Monte Carlo estimates of the exit, dividend and occupation quantities.
//!
//! Phases follow exact exponential holding times. The level moves by
//! Gaussian steps of length `dt`, with barrier crossings between step ends
//! caught by the Brownian bridge. Killing happens when `∫ω` along the path
//! exceeds an independent unit exponential.
//!
//! Where ω is locally constant and no absorbing level or breakpoint lies
//! within eight standard deviations of the step, the step is lengthened up to
//! the next phase switch. Such steps are exact in law, up to an `e^{−32}`
//! chance of an unseen excursion.
//!
//! Each path draws from its own ChaCha stream keyed by the seed and path
//! index. Reduction runs in fixed chunks in path order, so results do not
//! depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::model::{MapModel, OmegaFn, OmegaKind};
use crate::scalar::Real;

const CHUNK: usize = 512;
/// Standard deviations of clearance for a lengthened step.
const FAR_Z: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathConfig {
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub bridge_correction: bool,
    /// Lengthen steps away from barriers and breakpoints.
    pub far_field: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_max: 200.0, n_paths: 100_000, seed: 0x2545_f491_4f6c_dd1d, bridge_correction: true, far_field: true }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidArgument(format!("t_max = {} must be positive", self.t_max)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sample means over paths. Row `r` belongs to start phase `start_states[r]`.
#[derive(Clone, Debug)]
pub struct McEstimate<T> {
    pub mean: Mat<T>,
    pub std_err: Mat<T>,
    pub start_states: Vec<usize>,
    /// Paths per start phase.
    pub n_paths: usize,
    /// Paths still unresolved at `t_max`, over all start phases.
    pub n_censored: usize,
}

impl<T: Real> McEstimate<T> {
    pub fn censored_fraction(&self) -> f64 {
        self.n_censored as f64 / (self.n_paths * self.start_states.len()).max(1) as f64
    }

    /// Largest `|mean − reference| / std_err` over the simulated rows, with
    /// zero-error entries compared exactly. `reference` is indexed by phase.
    pub fn max_z_score(&self, reference: &Mat<T>) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, &i) in self.start_states.iter().enumerate() {
            for j in 0..self.mean.cols() {
                let diff = (self.mean[(r, j)] - reference[(i, j)]).as_f64().abs();
                let se = self.std_err[(r, j)].as_f64();
                let z = if se > 0.0 { diff / se } else if diff <= 1e-12 { 0.0 } else { f64::INFINITY };
                worst = worst.max(z);
            }
        }
        worst
    }
}

/// Both exit estimates of a two-sided problem.
#[derive(Clone, Debug)]
pub struct ExitEstimate<T> {
    pub up: McEstimate<T>,
    pub down: McEstimate<T>,
}

/// Occupation density estimate on bins of `(d, c)`.
#[derive(Clone, Debug)]
pub struct BinnedDensity<T> {
    pub edges: Vec<T>,
    /// `density[b]` is a `start_states.len() × N` matrix for bin `b`.
    pub density: Vec<Mat<T>>,
    pub std_err: Vec<Mat<T>>,
    /// False where no path visited the bin; its error is infinite.
    pub reliable: Vec<bool>,
    pub start_states: Vec<usize>,
    pub n_paths: usize,
    pub n_censored: usize,
}

/// Upper boundary behaviour.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Upper {
    Open,
    Absorb(f64),
    Reflect(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Up,
    Down,
    Killed,
    Censored,
}

struct Sim {
    rate: Vec<f64>,
    /// Cumulative jump distribution per phase, excluding the diagonal.
    jump_cdf: Vec<Vec<(usize, f64)>>,
    sigma: Vec<f64>,
    mu: Vec<f64>,
    om: OmegaFn<f64>,
    cfg: PathConfig,
}

/// Per-path accumulator in fixed-size sums.
#[derive(Clone)]
struct Sums {
    s: Vec<f64>,
    s2: Vec<f64>,
    censored: usize,
}

impl Sums {
    fn new(len: usize) -> Self {
        Self { s: vec![0.0; len], s2: vec![0.0; len], censored: 0 }
    }

    fn merge(mut self, o: &Sums) -> Self {
        for (a, b) in self.s.iter_mut().zip(&o.s) {
            *a += b;
        }
        for (a, b) in self.s2.iter_mut().zip(&o.s2) {
            *a += b;
        }
        self.censored += o.censored;
        self
    }
}

impl Sim {
    fn new<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, cfg: &PathConfig) -> Result<Self> {
        cfg.validate()?;
        om.check_states(model.n_states())?;
        let m = model.cast::<f64>();
        let n = m.n_states();
        let q = m.q_gen();
        let rate: Vec<f64> = (0..n).map(|i| -q[(i, i)]).collect();
        let jump_cdf = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                (0..n)
                    .filter(|&j| j != i && q[(i, j)] > 0.0)
                    .map(|j| {
                        acc += q[(i, j)] / rate[i];
                        (j, acc)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rate, jump_cdf, sigma: m.sigma().to_vec(), mu: m.mu().to_vec(), om: om.cast::<f64>(), cfg: *cfg })
    }

    fn n(&self) -> usize {
        self.rate.len()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        r.set_stream(stream);
        r
    }

    fn holding(&self, j: usize, rng: &mut ChaCha8Rng) -> f64 {
        if self.rate[j] > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.rate[j]
        } else {
            f64::INFINITY
        }
    }

    fn next_state(&self, j: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        let cdf = &self.jump_cdf[j];
        cdf.iter().find(|&&(_, c)| u < c).or(cdf.last()).map_or(j, |&(k, _)| k)
    }

    /// Distance from `x` to the nearest place where ω stops being constant,
    /// `None` when ω already varies at `x`.
    fn omega_clearance(&self, x: f64) -> Option<f64> {
        match self.om.kind() {
            OmegaKind::Constant(_) | OmegaKind::PerState(_) => Some(f64::INFINITY),
            OmegaKind::Step { levels, .. } => Some(levels.iter().fold(f64::INFINITY, |a, &l| a.min((x - l).abs()))),
            OmegaKind::AffineBand { gamma0, gamma1, d } => {
                let (lo, hi) = (-*d, 0.0);
                if x > lo && x < hi && *gamma1 != 0.0 {
                    None
                } else if *gamma0 == 0.0 && *gamma1 == 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some((x - lo).abs().min((x - hi).abs()))
                }
            }
            OmegaKind::Tabulated { x: xs, .. } => {
                let (lo, hi) = (xs[0], xs[xs.len() - 1]);
                if x > lo && x < hi {
                    None
                } else {
                    Some((x - lo).abs().min((x - hi).abs()))
                }
            }
        }
    }

    /// Longest step keeping `zσ√h + |μ|h` below `dist`.
    fn far_step(&self, j: usize, dist: f64) -> f64 {
        let (s, m) = (self.sigma[j] * FAR_Z, self.mu[j].abs());
        let r = if m > 0.0 { (-s + (s * s + 4.0 * m * dist).sqrt()) / (2.0 * m) } else { dist / s };
        r * r
    }

    fn step_len(&self, j: usize, x: f64, lower: Option<f64>, upper: Upper) -> (f64, bool) {
        let dt = self.cfg.dt;
        if !self.cfg.far_field {
            return (dt, false);
        }
        let Some(mut dist) = self.omega_clearance(x) else {
            return (dt, false);
        };
        if let Some(l) = lower {
            dist = dist.min(x - l);
        }
        if let Upper::Absorb(c) = upper {
            dist = dist.min(c - x);
        }
        let h = self.far_step(j, dist);
        if h > dt {
            (h, true)
        } else {
            (dt, false)
        }
    }

    /// One path. `clock` is an extra independent exponential killing rate.
    /// Dividends paid while in phase `k` go to `pay[k]`.
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        x0: f64,
        j0: usize,
        lower: Option<f64>,
        upper: Upper,
        clock: f64,
        rng: &mut ChaCha8Rng,
        pay: &mut [f64],
    ) -> (End, usize) {
        let cfg = &self.cfg;
        let (mut t, mut x, mut j) = (0.0, x0, j0);
        let mut t_switch = self.holding(j, rng);
        let e_kill: f64 = rng.sample(Exp1);
        let t_clock = if clock > 0.0 { rng.sample::<f64, _>(Exp1) / clock } else { f64::INFINITY };
        let mut k: f64 = 0.0;
        if let Upper::Reflect(c) = upper {
            if x > c {
                pay[j] += x - c;
                x = c;
            }
        }
        loop {
            let t_end = cfg.t_max.min(t_clock);
            if t >= t_end {
                return (if t_clock <= cfg.t_max { End::Killed } else { End::Censored }, j);
            }
            let (h0, far) = self.step_len(j, x, lower, upper);
            let h = h0.min(t_switch - t).min(t_end - t);
            let (s, m) = (self.sigma[j], self.mu[j]);
            let z: f64 = rng.sample(StandardNormal);
            let mut b = x + m * h + s * h.sqrt() * z;
            let var = s * s * h;
            if let Upper::Reflect(c) = upper {
                // exact running maximum of the bridge from x to b
                let u: f64 = rng.gen();
                let top = 0.5 * (x + b + ((b - x) * (b - x) - 2.0 * var * (1.0 - u).ln()).sqrt());
                let dl = (top - c).max(0.0);
                pay[j] += dl;
                b -= dl;
            }
            let mut crossed = None;
            if let Some(l) = lower {
                if b < l || (cfg.bridge_correction && !far && rng.gen::<f64>() < (-2.0 * (x - l) * (b - l) / var).exp()) {
                    crossed = Some(End::Down);
                }
            }
            if crossed.is_none() {
                if let Upper::Absorb(c) = upper {
                    if b > c || (cfg.bridge_correction && !far && rng.gen::<f64>() < (-2.0 * (c - x) * (c - b) / var).exp()) {
                        crossed = Some(End::Up);
                    }
                }
            }
            let dk = if far {
                self.om.eval_unchecked(j, x) * h
            } else {
                0.5 * (self.om.eval_unchecked(j, x) + self.om.eval_unchecked(j, b)) * h
            };
            if k + dk > e_kill {
                // killed first when the exponential is used up in the first half
                if crossed.is_none() || (e_kill - k) < 0.5 * dk {
                    return (End::Killed, j);
                }
            }
            if let Some(e) = crossed {
                return (e, j);
            }
            k += dk;
            t += h;
            x = b;
            if t >= t_switch {
                j = self.next_state(j, rng);
                t_switch = t + self.holding(j, rng);
            }
        }
    }

    /// Runs `n_paths` per start phase and folds `f` over them in path order.
    fn collect<F>(&self, starts: &[usize], width: usize, f: F) -> Vec<Sums>
    where
        F: Fn(usize, &mut ChaCha8Rng, &mut [f64]) -> bool + Sync,
    {
        let n = self.cfg.n_paths;
        starts
            .iter()
            .enumerate()
            .map(|(r, &j0)| {
                let chunks: Vec<Sums> = (0..n.div_ceil(CHUNK))
                    .into_par_iter()
                    .map(|c| {
                        let mut acc = Sums::new(width);
                        let mut row = vec![0.0; width];
                        for p in c * CHUNK..((c + 1) * CHUNK).min(n) {
                            let mut rng = self.rng(((r as u64) << 40) | p as u64);
                            row.iter_mut().for_each(|v| *v = 0.0);
                            if f(j0, &mut rng, &mut row) {
                                acc.censored += 1;
                            }
                            for (k, &v) in row.iter().enumerate() {
                                acc.s[k] += v;
                                acc.s2[k] += v * v;
                            }
                        }
                        acc
                    })
                    .collect();
                chunks.iter().fold(Sums::new(width), |a, c| a.merge(c))
            })
            .collect()
    }
}

fn start_states(n: usize, j0: Option<usize>) -> Result<Vec<usize>> {
    match j0 {
        Some(j) if j >= n => Err(Error::InvalidArgument(format!("start state {} out of range 1..={n}", j + 1))),
        Some(j) => Ok(vec![j]),
        None => Ok((0..n).collect()),
    }
}

/// Means and standard errors of columns `offset..offset + cols` of `sums`.
fn estimate<T: Real>(sums: &[Sums], offset: usize, cols: usize, n: usize, starts: &[usize]) -> McEstimate<T> {
    let rows = sums.len();
    let nf = n as f64;
    let mut mean = Mat::zeros(rows, cols);
    let mut se = Mat::zeros(rows, cols);
    for (r, s) in sums.iter().enumerate() {
        for j in 0..cols {
            let m = s.s[offset + j] / nf;
            let var = if n > 1 { ((s.s2[offset + j] / nf - m * m) * nf / (nf - 1.0)).max(0.0) } else { f64::INFINITY };
            mean[(r, j)] = T::lit(m);
            se[(r, j)] = T::lit((var / nf).sqrt());
        }
    }
    McEstimate {
        mean,
        std_err: se,
        start_states: starts.to_vec(),
        n_paths: n,
        n_censored: sums.iter().map(|s| s.censored).sum(),
    }
}

/// `(A, B)` for the exit of `[d, c]` from `x0`: the killed indicators of leaving
/// upward and downward, by phase at exit. All start phases when `j0` is `None`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_exit<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    x0: T,
    c: T,
    j0: Option<usize>,
    cfg: &PathConfig,
) -> Result<ExitEstimate<T>> {
    let (d, x0, c) = (d.as_f64(), x0.as_f64(), c.as_f64());
    if !(d <= x0 && x0 <= c) || !(d < c) {
        return Err(Error::InvalidArgument(format!("need d <= x0 <= c with d < c (d = {d}, x0 = {x0}, c = {c})")));
    }
    let sim = Sim::new(model, om, cfg)?;
    let n = sim.n();
    let starts = start_states(n, j0)?;
    let sums = sim.collect(&starts, 2 * n, |j, rng, row| {
        if x0 >= c {
            row[j] = 1.0;
            return false;
        }
        if x0 <= d {
            row[n + j] = 1.0;
            return false;
        }
        let mut pay = vec![0.0; n];
        let (end, k) = sim.run(x0, j, Some(d), Upper::Absorb(c), 0.0, rng, &mut pay);
        match end {
            End::Up => row[k] = 1.0,
            End::Down => row[n + k] = 1.0,
            End::Killed => {}
            End::Censored => return true,
        }
        false
    });
    let mut up = estimate(&sums, 0, n, cfg.n_paths, &starts);
    let down = estimate(&sums, n, n, cfg.n_paths, &starts);
    up.n_censored = down.n_censored;
    Ok(ExitEstimate { up, down })
}

/// Killed indicator of ever going below `d`, by phase at that time.
pub fn simulate_down<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    x0: T,
    j0: Option<usize>,
    cfg: &PathConfig,
) -> Result<McEstimate<T>> {
    let (d, x0) = (d.as_f64(), x0.as_f64());
    if !(x0 >= d) {
        return Err(Error::InvalidArgument(format!("need x0 = {x0} >= d = {d}")));
    }
    let sim = Sim::new(model, om, cfg)?;
    let n = sim.n();
    let starts = start_states(n, j0)?;
    let sums = sim.collect(&starts, n, |j, rng, row| {
        if x0 <= d {
            row[j] = 1.0;
            return false;
        }
        let mut pay = vec![0.0; n];
        match sim.run(x0, j, Some(d), Upper::Open, 0.0, rng, &mut pay) {
            (End::Down, k) => row[k] = 1.0,
            (End::Censored, _) => return true,
            _ => {}
        }
        false
    });
    Ok(estimate(&sums, 0, n, cfg.n_paths, &starts))
}

/// Discounted dividends of the barrier strategy at `c`, paid until the level
/// drops below `−d` or ω kills, split by the phase at payment time.
///
/// Discounting at rate `delta` is an independent exponential clock: the
/// dividends paid before it rings have the discounted total as their mean.
#[allow(clippy::too_many_arguments)]
pub fn simulate_dividends<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    x0: T,
    c: T,
    j0: Option<usize>,
    delta: T,
    cfg: &PathConfig,
) -> Result<McEstimate<T>> {
    let (d, x0, c, delta) = (d.as_f64(), x0.as_f64(), c.as_f64(), delta.as_f64());
    if !(x0 > -d) || !(c > -d) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need x0 > -d, c > -d and delta > 0 (x0 = {x0}, d = {d}, c = {c}, delta = {delta})"
        )));
    }
    let sim = Sim::new(model, om, cfg)?;
    let n = sim.n();
    let starts = start_states(n, j0)?;
    let sums = sim.collect(&starts, n, |j, rng, row| {
        let (end, _) = sim.run(x0, j, Some(-d), Upper::Reflect(c), delta, rng, row);
        end == End::Censored
    });
    Ok(estimate(&sums, 0, n, cfg.n_paths, &starts))
}

/// Occupation density `∫E_x[e^{−∫ω}; X_t ∈ dy, J_t, t < τ] dt` over bins
/// covering `(d, c)`. Paths carry the weight `e^{−∫ω}` instead of being
/// killed and always move in steps of `dt`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_resolvent<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    x0: T,
    c: T,
    j0: Option<usize>,
    edges: &[T],
    cfg: &PathConfig,
) -> Result<BinnedDensity<T>> {
    let (d, x0, c) = (d.as_f64(), x0.as_f64(), c.as_f64());
    let e: Vec<f64> = edges.iter().map(|v| v.as_f64()).collect();
    if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("bin edges must be ascending with at least two entries".into()));
    }
    if !(d < x0 && x0 < c) || e[0] > d + 1e-12 || e[e.len() - 1] < c - 1e-12 {
        return Err(Error::InvalidArgument("need d < x0 < c and bins covering (d, c)".into()));
    }
    let sim = Sim::new(model, om, cfg)?;
    let n = sim.n();
    let nb = e.len() - 1;
    let starts = start_states(n, j0)?;
    let dt = cfg.dt;
    let sums = sim.collect(&starts, nb * n, |j0, rng, row| {
        let (mut t, mut x, mut j) = (0.0, x0, j0);
        let mut t_switch = sim.holding(j, rng);
        let mut k: f64 = 0.0;
        loop {
            if t >= cfg.t_max {
                return true;
            }
            let h = dt.min(t_switch - t).min(cfg.t_max - t);
            let (s, m) = (sim.sigma[j], sim.mu[j]);
            let z: f64 = rng.sample(StandardNormal);
            let b = x + m * h + s * h.sqrt() * z;
            let var = s * s * h;
            let bin = e.partition_point(|&v| v <= x).saturating_sub(1).min(nb - 1);
            let w0 = sim.om.eval_unchecked(j, x);
            let w1 = sim.om.eval_unchecked(j, b);
            let dk: f64 = 0.5 * (w0 + w1) * h;
            // trapezoid in time of e^{−K} over the step
            row[bin * n + j] += 0.5 * ((-k).exp() + (-(k + dk)).exp()) * h;
            let out = b <= d
                || b >= c
                || (cfg.bridge_correction
                    && (rng.gen::<f64>() < (-2.0 * (x - d) * (b - d) / var).exp()
                        || rng.gen::<f64>() < (-2.0 * (c - x) * (c - b) / var).exp()));
            if out {
                return false;
            }
            k += dk;
            if (-k).exp() < 1e-300 {
                return false;
            }
            t += h;
            x = b;
            if t >= t_switch {
                j = sim.next_state(j, rng);
                t_switch = t + sim.holding(j, rng);
            }
        }
    });
    let mut density = Vec::with_capacity(nb);
    let mut std_err = Vec::with_capacity(nb);
    let mut reliable = Vec::with_capacity(nb);
    let nf = cfg.n_paths as f64;
    for b in 0..nb {
        let width = e[b + 1] - e[b];
        let mut dm = Mat::zeros(starts.len(), n);
        let mut sm = Mat::zeros(starts.len(), n);
        let mut seen = false;
        for (r, s) in sums.iter().enumerate() {
            for jj in 0..n {
                let idx = b * n + jj;
                let m = s.s[idx] / nf;
                let var = if cfg.n_paths > 1 { ((s.s2[idx] / nf - m * m) * nf / (nf - 1.0)).max(0.0) } else { f64::INFINITY };
                dm[(r, jj)] = T::lit(m / width);
                sm[(r, jj)] = T::lit((var / nf).sqrt() / width);
                seen |= s.s[idx] > 0.0;
            }
        }
        if !seen {
            sm = sm.map(|_| T::infinity());
        }
        density.push(dm);
        std_err.push(sm);
        reliable.push(seen);
    }
    Ok(BinnedDensity {
        edges: edges.to_vec(),
        density,
        std_err,
        reliable,
        start_states: starts,
        n_paths: cfg.n_paths,
        n_censored: sums.iter().map(|s| s.censored).sum(),
    })
}
