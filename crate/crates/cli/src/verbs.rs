use omega_map::dividends::{barrier_sweep, dividend_value, DividendQuery};
use omega_map::fluctuation::{
    killing_probability, one_sided_down_from, resolvent_at, two_sided_exit, LimitSchedule, Window,
};
use omega_map::mc::{simulate_dividends, simulate_down, simulate_exit, McEstimate, PathConfig};
use omega_map::model::{GridSpec, MatrixGrid, OmegaKind, RunConfig};
use omega_map::scale_classic::ClassicScale;
use omega_map::scale_omega::{
    omega_model_ode_g, omega_scale_set, omega_w, volterra_residual, volterra_solve, OmegaOptions, SolveMode,
    VolterraProblem,
};
use omega_map::Mat;
use serde_json::json;

use crate::output::{mat_json, matrix_grid_csv, matrix_grid_csv_with, Columns};
use crate::{Cli, CliError, Verb};

pub struct Output {
    pub text: String,
    pub status: u8,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, status: 0 }
    }

    fn json(v: serde_json::Value) -> Self {
        Self::ok(serde_json::to_string_pretty(&v).expect("json") + "\n")
    }
}

type Res<T> = Result<T, CliError>;

fn need(v: Option<f64>, flag: &str) -> Res<f64> {
    v.ok_or_else(|| CliError::usage("missing_argument", format!("--{flag} is required for this verb")))
}

fn grid_or(cli: &Cli, cfg: &RunConfig, default: Option<GridSpec>) -> Res<GridSpec> {
    cli.grid
        .or(cfg.grid)
        .or(default)
        .ok_or_else(|| CliError::usage("missing_argument", "--grid is required for this verb"))
}

fn nodes(g: &GridSpec) -> Vec<f64> {
    (0..g.n_nodes()).map(|k| g.x_min + g.h * k as f64).collect()
}

fn grid_of(g: &GridSpec, values: Vec<Mat<f64>>) -> Res<MatrixGrid<f64>> {
    Ok(MatrixGrid::new(g.x_min, g.h, values)?)
}

fn one(g: &MatrixGrid<f64>) -> [Columns<'_>; 1] {
    [Columns { prefix: "", grid: g }]
}

pub fn dispatch(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    match cli.verb {
        Verb::Scale => scale(cli, cfg),
        Verb::OmegaScale => omega_scale(cli, cfg),
        Verb::Exit => exit(cli, cfg),
        Verb::Resolvent => resolvent(cli, cfg),
        Verb::Dividends => dividends(cli, cfg),
        Verb::OmegaModel => omega_model(cli, cfg),
        Verb::Simulate => simulate(cli, cfg),
        Verb::Verify => verify(cli, cfg),
    }
}

const DEFAULT_GRID: GridSpec = GridSpec { x_min: 0.0, x_max: 10.0, h: 0.05 };

fn scale(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let q = need(cli.q, "q")?;
    let g = grid_or(cli, cfg, Some(DEFAULT_GRID))?;
    let cs = ClassicScale::new(&cfg.model, q)?;
    let vals = nodes(&g).into_iter().map(|x| cs.w(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(Output::ok(matrix_grid_csv("x", &one(&grid_of(&g, vals)?))))
}

fn omega_scale(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let delta = cli.delta.unwrap_or(0.0);
    let g = grid_or(cli, cfg, Some(DEFAULT_GRID))?;
    let y = g.x_min;
    let xs = nodes(&g);
    let top = xs.last().copied().unwrap_or(y).max(y + g.h);
    let set = omega_scale_set(&cfg.model, &cfg.omega, delta, y, top, &OmegaOptions::default())?;
    let w = grid_of(&g, xs.iter().map(|&x| set.w_at(x)).collect::<Result<_, _>>()?)?;
    // a single step gets the two constant-rate bounds alongside
    if let OmegaKind::Step { levels, values } = cfg.omega.kind() {
        if levels.len() == 1 {
            let bound = |p: f64| -> Res<MatrixGrid<f64>> {
                let cs = ClassicScale::new(&cfg.model, p + delta)?;
                grid_of(&g, xs.iter().map(|&x| cs.w(x - y)).collect::<Result<_, _>>()?)
            };
            let (below, above) = (bound(values[0])?, bound(values[1])?);
            let blocks = [
                Columns { prefix: "", grid: &w },
                Columns { prefix: "below_", grid: &below },
                Columns { prefix: "above_", grid: &above },
            ];
            return Ok(Output::ok(matrix_grid_csv("x", &blocks)));
        }
    }
    Ok(Output::ok(matrix_grid_csv("x", &one(&w))))
}

fn exit(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let (d, x, c) = (need(cli.d, "d")?, need(cli.x, "x")?, need(cli.c, "c")?);
    let e = two_sided_exit(&cfg.model, &cfg.omega, d, x, c)?;
    let kill = killing_probability(&cfg.model, &cfg.omega, d, x, c)?;
    Ok(Output::json(json!({
        "d": d, "x": x, "c": c,
        "up": mat_json(&e.up),
        "down": mat_json(&e.down),
        "kill": mat_json(&kill),
    })))
}

fn resolvent(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let x = need(cli.x, "x")?;
    let window = match (cli.d, cli.c) {
        (Some(d), Some(c)) => Window::Interval { d, c },
        (Some(d), None) => Window::Above { d },
        (None, Some(c)) => Window::Below { c },
        (None, None) => Window::Line,
    };
    let g = grid_or(cli, cfg, None)?;
    let ys = nodes(&g);
    let dens = resolvent_at(&cfg.model, &cfg.omega, window, x, &ys, &LimitSchedule::default(), &OmegaOptions::default())?;
    Ok(Output::ok(matrix_grid_csv("y", &one(&grid_of(&g, dens)?))))
}

fn dividends(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let delta = need(cli.delta, "delta")?;
    let d = cli.d.unwrap_or(0.0);
    let x = need(cli.x, "x")?;
    if let Some(c) = cli.c {
        let v = dividend_value(&cfg.model, &cfg.omega, &DividendQuery { c, d, delta, x })?;
        return Ok(Output::json(json!({
            "c": c, "d": d, "delta": delta, "x": x,
            "value": mat_json(&v),
            "row_sums": v.row_sums(),
        })));
    }
    let g = grid_or(cli, cfg, None)?;
    let s = barrier_sweep(&cfg.model, &cfg.omega, d, delta, x, &nodes(&g), &OmegaOptions::default())?;
    let vals = grid_of(&g, s.rows.iter().map(|r| r.value.clone()).collect())?;
    let extra: Vec<(String, Vec<f64>)> =
        (0..cfg.model.n_states()).map(|i| (format!("row_{}", i + 1), s.rows.iter().map(|r| r.row_sums[i]).collect())).collect();
    if cli.verbose > 0 {
        for b in &s.best {
            eprintln!("best barrier from phase {}: c = {} value {}", b.state + 1, b.c, b.value);
        }
    }
    Ok(Output::ok(matrix_grid_csv_with("c", &one(&vals), &extra)))
}

fn omega_model(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let OmegaKind::AffineBand { gamma0, gamma1, d } = *cfg.omega.kind() else {
        return Err(CliError::usage("invalid_argument", "omega-model needs an affine_band omega in the config"));
    };
    let delta = cli.delta.unwrap_or(0.0);
    let g = grid_or(cli, cfg, Some(DEFAULT_GRID))?;
    if g.x_min != 0.0 {
        return Err(CliError::usage("invalid_argument", "omega-model grids start at z = 0, the bottom of the band"));
    }
    // integrate at no more than 1e-3 and keep every k-th node
    let k = (g.h / 1e-3).ceil().max(1.0) as usize;
    let n = g.n_nodes();
    let fine = omega_model_ode_g(&cfg.model, gamma0, gamma1, d, delta, g.h * (n - 1).max(1) as f64, g.h / k as f64)?;
    let vals: Vec<Mat<f64>> = (0..n).map(|j| fine.at((j * k).min(fine.len() - 1)).clone()).collect();
    Ok(Output::ok(matrix_grid_csv("z", &one(&grid_of(&g, vals)?))))
}

fn path_config(cli: &Cli, cfg: &RunConfig) -> PathConfig {
    let base = PathConfig::default();
    PathConfig {
        n_paths: cli.paths.unwrap_or(base.n_paths),
        seed: cli.seed.or(cfg.seed).unwrap_or(base.seed),
        dt: cli.dt.unwrap_or(base.dt),
        ..base
    }
}

fn estimate_json(est: &McEstimate<f64>, reference: &Mat<f64>) -> serde_json::Value {
    json!({
        "mean": mat_json(&est.mean),
        "std_err": mat_json(&est.std_err),
        "analytic": mat_json(reference),
        "max_z": est.max_z_score(reference),
        "censored_fraction": est.censored_fraction(),
    })
}

/// Exit with `--c`, dividends with `--delta`, otherwise the one-sided
/// downward passage below `--d`.
fn simulate(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let pc = path_config(cli, cfg);
    let (m, om) = (&cfg.model, &cfg.omega);
    let x = need(cli.x, "x")?;
    let body = if let Some(delta) = cli.delta {
        let (c, d) = (need(cli.c, "c")?, cli.d.unwrap_or(0.0));
        let v = dividend_value(m, om, &DividendQuery { c, d, delta, x })?;
        let est = simulate_dividends(m, om, d, x, c, None, delta, &pc)?;
        json!({ "mode": "dividends", "dividends": estimate_json(&est, &v) })
    } else if let Some(c) = cli.c {
        let d = need(cli.d, "d")?;
        let e = two_sided_exit(m, om, d, x, c)?;
        let est = simulate_exit(m, om, d, x, c, None, &pc)?;
        json!({ "mode": "exit", "up": estimate_json(&est.up, &e.up), "down": estimate_json(&est.down, &e.down) })
    } else {
        let d = need(cli.d, "d")?;
        let b = one_sided_down_from(m, om, d, x, &LimitSchedule::default(), &OmegaOptions::default())?;
        let est = simulate_down(m, om, d, x, None, &pc)?;
        json!({ "mode": "down", "down": estimate_json(&est, &b) })
    };
    let mut body = body;
    body["n_paths"] = json!(pc.n_paths);
    body["seed"] = json!(pc.seed);
    body["dt"] = json!(pc.dt);
    Ok(Output::json(body))
}

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
    /// Pass when `value >= tol` instead of `value <= tol`.
    at_least: bool,
}

impl Check {
    fn pass(&self) -> bool {
        if self.at_least {
            self.value >= self.tol
        } else {
            self.value <= self.tol
        }
    }
}

fn max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    a.max_abs_diff(b)
}

fn verify(cli: &Cli, cfg: &RunConfig) -> Res<Output> {
    let (m, om) = (&cfg.model, &cfg.omega);
    let g = grid_or(cli, cfg, Some(GridSpec { x_min: 0.0, x_max: 4.0, h: 0.5 }))?;
    let (d, c) = (cli.d.unwrap_or(g.x_min), cli.c.unwrap_or(g.x_max));
    let x = cli.x.unwrap_or(0.5 * (d + c));
    let q = cli.q.unwrap_or(0.1);
    let opts = OmegaOptions::default();
    let mut checks = Vec::new();
    let mut add = |name, value, tol| checks.push(Check { name, value, tol, at_least: false });

    let f0 = m.laplace_exponent(0.0);
    add("generator rows sum to zero", f0.row_sums().iter().fold(0.0, |a, s| a.max(s.abs())), 1e-12);

    let cs = ClassicScale::new(m, q)?;
    let slope = Mat::from_diag(&m.two_over_var());
    add("W(0) = 0 and W'(0) = 2/sigma^2", cs.w(0.0)?.max_abs().max(max_diff(&cs.w_prime(0.0)?, &slope)), 1e-9);

    let e = two_sided_exit(m, om, d, x, c)?;
    let kill = killing_probability(m, om, d, x, c)?;
    let total = &(&e.up + &e.down) + &kill;
    add("conservation A1 + B1 + K1 = 1", total.row_sums().iter().fold(0.0, |a, s| a.max((s - 1.0).abs())), 1e-3);
    let outside = e.up.as_slice().iter().chain(e.down.as_slice()).fold(0.0f64, |a, &v| a.max(-v).max(v - 1.0));
    add("exit entries within [0, 1]", outside.max(0.0), 1e-9);

    let x1 = d + 0.25 * (c - d);
    let a = |u: f64, v: f64| two_sided_exit(m, om, d, u, v).map(|e| e.up);
    add("Markov multiplicativity", max_diff(&(&a(x1, x)? * &a(x, c)?), &a(x1, c)?), 1e-7);

    if om.bound_lambda() > 0.0 {
        let sched = LimitSchedule::default();
        let bx = one_sided_down_from(m, om, d, x, &sched, &opts)?;
        let bc = one_sided_down_from(m, om, d, c, &sched, &opts)?;
        add("B(x,c) = B(x) - A(x,c)B(c)", max_diff(&e.down, &(&bx - &(&e.up * &bc))), 1e-6);
    }

    let span = (c - d).min(4.0);
    let reference = omega_w(m, om, d, d + span, &opts)?;
    let scale = reference.values().iter().fold(0.0f64, |a, v| a.max(v.max_abs()));
    let mut shift_err: f64 = 0.0;
    for s in [0.1, 1.0, 5.0] {
        let w = omega_w(m, om, d, d + span, &OmegaOptions { kernel_shift: Some(s), ..opts })?;
        shift_err = shift_err.max(w.max_abs_diff(&reference) / scale);
    }
    add("kernel shift invariance", shift_err, 1e-6);

    let residual = |h: f64| -> Res<f64> {
        let n = ((c - d) / h).round() as usize + 1;
        let kern = ClassicScale::new(m, 0.1)?.w_grid(0.0, h, n)?;
        let prob = VolterraProblem {
            kernel: kern.clone(),
            omega: om.clone(),
            shift: 0.1,
            inhomogeneity: MatrixGrid::new(d, h, kern.values().to_vec())?,
            origin: d,
        };
        let sol = volterra_solve(&prob, SolveMode::ForwardSubstitution)?;
        Ok(volterra_residual(kern.values(), &prob.weights(), kern.values(), sol.values(), h).0)
    };
    let ratio = residual(1e-2)? / residual(5e-3)?;
    checks.push(Check { name: "residual ratio when h halves", value: ratio, tol: 3.5, at_least: true });

    if let Some(n_paths) = cli.paths {
        let pc = PathConfig { n_paths, ..path_config(cli, cfg) };
        let est = simulate_exit(m, om, d, x, c, None, &pc)?;
        let z = est.up.max_z_score(&e.up).max(est.down.max_z_score(&e.down));
        checks.push(Check { name: "Monte Carlo exit z-score", value: z, tol: 3.0, at_least: false });
    }

    let mut text = format!("{:<34} {:>12} {:>10}  result\n", "check", "value", "tolerance");
    let mut failed = 0;
    for ck in &checks {
        let ok = ck.pass();
        failed += usize::from(!ok);
        let bound = format!("{}{:e}", if ck.at_least { ">=" } else { "<=" }, ck.tol);
        text.push_str(&format!("{:<34} {:>12.3e} {:>10}  {}\n", ck.name, ck.value, bound, if ok { "PASS" } else { "FAIL" }));
    }
    Ok(Output { text, status: if failed > 0 { 2 } else { 0 } })
}
