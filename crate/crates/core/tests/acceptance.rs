//! Acceptance run. Prints one line per criterion and exits nonzero if any
//! check that is expected to hold fails.
//!
//! Two literal statements cannot hold for these models (the step identity
//! with `D + F` and the entrywise sandwich on off-diagonal entries). Their
//! lines report the literal result as FAIL with the reason, followed by the
//! statement that does hold, which is checked like every other criterion.

mod common;

use common::*;
use omega_map::dividends::{dividend_value, DividendQuery};
use omega_map::fluctuation::*;
use omega_map::mc::*;
use omega_map::model::{MapModel, MatrixGrid, OmegaFn};
use omega_map::scale_classic::{analytic_w2_zero_drift, constant_omega_w2, w_q, ClassicScale};
use omega_map::scale_omega::*;
use omega_map::{presets, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

struct Outcome {
    /// The statement as worded holds.
    literal: bool,
    /// Everything that is expected to hold does.
    required: bool,
    detail: String,
}

impl Outcome {
    fn plain(ok: bool, detail: String) -> Self {
        Self { literal: ok, required: ok, detail }
    }
}

fn grid_scale(g: &MatrixGrid<f64>) -> f64 {
    g.values().iter().fold(0.0f64, |a, m| a.max(m.max_abs()))
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn closed_vs_eigen() -> Outcome {
    let t = Instant::now();
    let m = presets::driftless_model::<f64>();
    let q = 0.05;
    let mut err: f64 = 0.0;
    for k in 0..100 {
        let x = 10.0 * k as f64 / 99.0;
        let a = analytic_w2_zero_drift(1.0, 1.2, 0.05, 0.1, q, x).unwrap();
        err = err.max(max_diff(&a, &w_q(&m, q, x).unwrap()));
    }
    let el = t.elapsed();
    Outcome::plain(err <= 1e-8 && el < Duration::from_secs(1), format!("max abs err {err:.2e}, {}", secs(el)))
}

fn constant_rate_volterra() -> Outcome {
    let t = Instant::now();
    let p = presets::per_state_killing::<f64>();
    let g = omega_w(&p.model, &p.omega, 0.0, 6.0, &OmegaOptions::plain_trapezoid(1e-3)).unwrap();
    let mut err: f64 = 0.0;
    for (k, w) in g.values().iter().enumerate().skip(1) {
        let want = constant_omega_w2(1.0, 1.2, 0.05, 0.1, 0.05, 0.25, g.x_at(k)).unwrap();
        err = err.max(rel_diff(w, &want));
    }
    let el = t.elapsed();
    Outcome::plain(err <= 2e-4 && el < Duration::from_secs(10), format!("max rel err {err:.2e} at h = 1e-3, {}", secs(el)))
}

fn step_triple() -> Outcome {
    let p = presets::step_killing::<f64>();
    let (p0, p1, x1) = (0.25, 0.03, 4.0);
    let generic = OmegaOptions { route: Route::Generic(SolveMode::ForwardSubstitution), ..OmegaOptions::with_h(2e-3) };
    let g = omega_w(&p.model, &p.omega, 0.0, 10.0, &generic).unwrap();
    let (mut grid_rec, mut grid_closed, mut rec_closed) = (0.0f64, 0.0f64, 0.0f64);
    for k in 1..=60 {
        let x = x1 + 6.0 * k as f64 / 60.0;
        let gv = g.interp(x).unwrap();
        let rec = step_omega_w(&p.model, &p.omega, x, 0.0).unwrap();
        let closed = closed_step_omega_w(&p.model, p0, p1, x1, x, 0.0).unwrap();
        grid_rec = grid_rec.max(rel_diff(&gv, &rec));
        grid_closed = grid_closed.max(rel_diff(&gv, &closed));
        rec_closed = rec_closed.max(rel_diff(&rec, &closed));
    }
    let k = StepConstants::new(&ClassicScale::new(&p.model, p0).unwrap(), &ClassicScale::new(&p.model, p1).unwrap()).unwrap();
    let id = Mat::identity(2);
    let ec = max_diff(&(&k.e - &k.c).scale(p1 - p0), &id);
    let d_plus_f = max_diff(&(&k.d + &k.f).scale(p1 - p0), &id);
    let f_minus_d = max_diff(&(&k.f - &k.d).scale(p1 - p0), &id);
    let routes = grid_rec <= 1e-4 && grid_closed <= 1e-4 && rec_closed <= 1e-6 && ec <= 1e-10;
    Outcome {
        literal: routes && d_plus_f <= 1e-10,
        required: routes && f_minus_d <= 1e-10,
        detail: format!(
            "grid-rec {grid_rec:.1e}, grid-closed {grid_closed:.1e}, rec-closed {rec_closed:.1e}, (p1-p0)(E-C)-I {ec:.1e}; \
             literal (p1-p0)(D+F)-I {d_plus_f:.2e} cannot vanish for these D, F; (p1-p0)(F-D)-I {f_minus_d:.1e} {}",
            if f_minus_d <= 1e-10 { "PASS" } else { "FAIL" }
        ),
    }
}

fn sandwich() -> Outcome {
    let p = presets::step_killing::<f64>();
    let g = omega_w(&p.model, &p.omega, 0.0, 8.0, &OmegaOptions::default()).unwrap();
    let lo = ClassicScale::new(&p.model, 0.03).unwrap();
    let hi = ClassicScale::new(&p.model, 0.25).unwrap();
    let (mut literal, mut between) = (true, true);
    let mut worst = String::new();
    for x in [5.0, 6.0, 8.0] {
        let (w, a, b) = (g.interp(x).unwrap(), lo.w(x).unwrap(), hi.w(x).unwrap());
        for i in 0..2 {
            for j in 0..2 {
                let (l, v, u) = (a[(i, j)], w[(i, j)], b[(i, j)]);
                if !(l <= v && v <= u) {
                    literal = false;
                    if worst.is_empty() {
                        worst = format!("at x = {x} entry ({i},{j}): {l:.4} / {v:.4} / {u:.4}");
                    }
                }
                between &= l.min(u) <= v && v <= l.max(u);
            }
        }
    }
    Outcome {
        literal,
        required: between,
        detail: format!(
            "literal ordering breaks {worst}; off-diagonal entries are negative and a larger rate makes them \
             more negative; entrywise betweenness {}",
            if between { "PASS" } else { "FAIL" }
        ),
    }
}

fn ode_vs_volterra() -> Outcome {
    let t = Instant::now();
    let p = presets::red_zone::<f64>();
    let h = 1e-3;
    let ode = omega_model_ode_g(&p.model, 0.5, -0.1, 5.0, p.delta, 15.0, h).unwrap();
    let set = omega_scale_set(&p.model, &p.omega, p.delta, -5.0, 10.0, &OmegaOptions::with_h(h)).unwrap();
    let mut err: f64 = 0.0;
    for k in (50..=15000).step_by(50) {
        err = err.max(rel_diff(&set.w_at(k as f64 * h - 5.0).unwrap(), ode.at(k)));
    }
    let el = t.elapsed();
    Outcome::plain(err <= 1e-3 && el < Duration::from_secs(10), format!("max rel err {err:.2e} on [0, 10], {}", secs(el)))
}

fn conservation() -> Outcome {
    let p = presets::per_state_killing::<f64>();
    let e = two_sided_exit(&p.model, &p.omega, 0.0, 2.0, 4.0).unwrap();
    let kill = killing_probability_with(&p.model, &p.omega, 0.0, 2.0, 4.0, &OmegaOptions::default()).unwrap();
    let total = &(&e.up + &e.down) + &kill;
    let err = ones_defect(&total);
    Outcome::plain(err <= 1e-3, format!("max |A1 + B1 + K1 - 1| = {err:.2e}"))
}

fn random_model(rng: &mut ChaCha8Rng) -> (MapModel<f64>, OmegaFn<f64>) {
    let n = rng.gen_range(2..=3);
    let mut q = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q[(i, j)] = rng.gen_range(0.05..1.0);
                q[(i, i)] -= q[(i, j)];
            }
        }
    }
    let sigma = (0..n).map(|_| rng.gen_range(0.6..1.8)).collect();
    let mu = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
    let om = if rng.gen_bool(0.5) {
        OmegaFn::per_state((0..n).map(|_| rng.gen_range(0.0..0.6)).collect()).unwrap()
    } else {
        OmegaFn::step(vec![rng.gen_range(0.5..3.0)], vec![rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.6)]).unwrap()
    };
    (MapModel::new(q, sigma, mu).unwrap(), om)
}

fn multiplicativity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut err: f64 = 0.0;
    for _ in 0..5 {
        let (m, om) = random_model(&mut rng);
        let d = rng.gen_range(-1.0..0.0);
        for _ in 0..10 {
            let mut t: Vec<f64> = (0..3).map(|_| rng.gen_range(d + 0.1..4.0)).collect();
            t.sort_by(f64::total_cmp);
            let (x, y, z) = (t[0], t[1] + 0.05, t[2] + 0.1);
            let a = |u: f64, v: f64| two_sided_exit(&m, &om, d, u, v).unwrap().up;
            err = err.max(max_diff(&(&a(x, y) * &a(y, z)), &a(x, z)));
        }
    }
    Outcome::plain(err <= 1e-7, format!("max |A(x,y)A(y,z) - A(x,z)| = {err:.2e} over 50 triples"))
}

fn monte_carlo() -> Outcome {
    let t = Instant::now();
    let cfg = PathConfig::default();
    let opts = OmegaOptions::default();
    // exit (d, x, c), down (d, x), dividends (floor d, x, c)
    let cases: [((f64, f64, f64), (f64, f64), (f64, f64, f64)); 3] = [
        ((0.0, 2.0, 4.0), (0.0, 1.0), (0.0, 1.0, 2.0)),
        ((0.0, 3.0, 6.0), (0.0, 2.0), (0.0, 3.0, 5.0)),
        ((-5.0, -1.0, 3.0), (-5.0, -1.0), (5.0, 1.0, 3.0)),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (p, (ex, dn, dv)) in presets::all::<f64>().iter().zip(cases) {
        let e = two_sided_exit(&p.model, &p.omega, ex.0, ex.1, ex.2).unwrap();
        let me = simulate_exit(&p.model, &p.omega, ex.0, ex.1, ex.2, None, &cfg).unwrap();
        let b = one_sided_down_from(&p.model, &p.omega, dn.0, dn.1, &LimitSchedule::default(), &opts).unwrap();
        let mb = simulate_down(&p.model, &p.omega, dn.0, dn.1, None, &cfg).unwrap();
        let v = dividend_value(&p.model, &p.omega, &DividendQuery { c: dv.2, d: dv.0, delta: p.delta, x: dv.1 }).unwrap();
        let mv = simulate_dividends(&p.model, &p.omega, dv.0, dv.1, dv.2, None, p.delta, &cfg).unwrap();
        let z = [me.up.max_z_score(&e.up), me.down.max_z_score(&e.down), mb.max_z_score(&b), mv.max_z_score(&v)];
        let top = z.iter().copied().fold(0.0, f64::max);
        worst = worst.max(top);
        parts.push(format!("{} {top:.2}", p.name));
    }
    let el = t.elapsed();
    Outcome::plain(
        worst <= 3.0 && el < Duration::from_secs(300),
        format!("max z-score {worst:.2} ({}), 1e5 paths each, {}", parts.join(", "), secs(el)),
    )
}

fn shift_invariance() -> Outcome {
    let p = presets::per_state_killing::<f64>();
    let reference = omega_w(&p.model, &p.omega, 0.0, 6.0, &OmegaOptions::default()).unwrap();
    let scale = grid_scale(&reference);
    let mut err: f64 = 0.0;
    for s in [0.1, 1.0, 5.0] {
        let g = omega_w(&p.model, &p.omega, 0.0, 6.0, &OmegaOptions { kernel_shift: Some(s), ..Default::default() }).unwrap();
        err = err.max(g.max_abs_diff(&reference) / scale);
    }
    Outcome::plain(err <= 1e-6, format!("max rel change {err:.2e} for kernel shifts 0.1, 1, 5 on [0, 6]"))
}

fn convergence_order() -> Outcome {
    let mut ratios = Vec::new();
    for p in presets::all::<f64>() {
        let y = if p.name == "red-zone" { -5.0 } else { 0.0 };
        let r = |h: f64| {
            let n = (6.0 / h).round() as usize + 1;
            let shift = 0.1;
            let kern = ClassicScale::new(&p.model, shift).unwrap().w_grid(0.0, h, n).unwrap();
            let prob = VolterraProblem {
                kernel: kern.clone(),
                omega: p.omega.clone(),
                shift,
                inhomogeneity: MatrixGrid::new(y, h, kern.values().to_vec()).unwrap(),
                origin: y,
            };
            let sol = volterra_solve(&prob, SolveMode::ForwardSubstitution).unwrap();
            volterra_residual(kern.values(), &prob.weights(), kern.values(), sol.values(), h).0
        };
        ratios.push((p.name, r(1e-2) / r(5e-3)));
    }
    let ok = ratios.iter().all(|(_, r)| *r >= 3.5);
    let txt: Vec<String> = ratios.iter().map(|(n, r)| format!("{n} {r:.2}")).collect();
    Outcome::plain(ok, format!("residual ratio h = 1e-2 to 5e-3: {}", txt.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed form vs eigen route", closed_vs_eigen),
        ("constant-rate Volterra vs closed form", constant_rate_volterra),
        ("step rate: three routes and constant identities", step_triple),
        ("sandwich between constant-rate scale matrices", sandwich),
        ("band ODE vs Volterra", ode_vs_volterra),
        ("conservation", conservation),
        ("Markov multiplicativity", multiplicativity),
        ("Monte Carlo concordance", monte_carlo),
        ("kernel shift invariance", shift_invariance),
        ("trapezoid convergence order", convergence_order),
    ];
    let mut broken = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = if o.literal { "PASS" } else { "FAIL" };
        println!("[{:>2}] {tag} {name}: {}", k + 1, o.detail);
        if !o.required {
            broken += 1;
        }
    }
    if broken > 0 {
        eprintln!("{broken} criteria failed checks expected to hold");
        std::process::exit(1);
    }
}
