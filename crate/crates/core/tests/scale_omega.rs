mod common;

use common::*;
use omega_map::model::{MatrixGrid, OmegaFn};
use omega_map::scale_classic::{constant_omega_w2, ClassicScale};
use omega_map::scale_omega::*;
use omega_map::{presets, Mat};

fn probes(a: f64, b: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

#[test]
fn constant_rate_reduces_to_the_classical_scale_matrix() {
    let m = step_model();
    let q = 0.2;
    let set = omega_scale_set(&m, &OmegaFn::constant(q).unwrap(), 0.0, 0.0, 8.0, &OmegaOptions::default()).unwrap();
    let cs = ClassicScale::new(&m, q).unwrap();
    for x in probes(0.0, 8.0, 40) {
        assert!(rel_diff(&set.w_at(x).unwrap(), &cs.w(x).unwrap()) < 1e-10, "W at {x}");
        assert!(rel_diff(&set.z_at(x).unwrap(), &cs.z(x).unwrap()) < 1e-10, "Z at {x}");
    }
}

#[test]
fn per_state_rates_match_the_two_state_closed_form() {
    let m = driftless();
    let om = OmegaFn::per_state(vec![0.05, 0.25]).unwrap();
    let g = omega_w(&m, &om, 0.0, 6.0, &OmegaOptions::default()).unwrap();
    for x in probes(0.0, 6.0, 60) {
        let want = constant_omega_w2(1.0, 1.2, 0.05, 0.1, 0.05, 0.25, x).unwrap();
        assert!(rel_diff(&g.interp(x).unwrap(), &want) < 1e-8, "x = {x}");
    }
}

#[test]
fn scale_matrices_solve_the_generator_equation() {
    // 𝒲(·,y) and 𝒵(·,y) from the initial value problem, for level-dependent rates
    let cases: Vec<(presets::Preset<f64>, f64, f64)> =
        vec![(presets::step_killing(), 1.0, 9.0), (presets::red_zone(), -5.0, 3.0), (presets::per_state_killing(), 0.0, 5.0)];
    for (p, y, top) in cases {
        let n = 8000;
        let dim = p.model.n_states();
        let w0 = Mat::from_diag(&p.model.two_over_var());
        let rk_w = ivp_solve(&p.model, &p.omega, p.delta, y, top, n, &Mat::zeros(dim, dim), &w0);
        let rk_z = ivp_solve(&p.model, &p.omega, p.delta, y, top, n, &Mat::identity(dim), &Mat::zeros(dim, dim));
        let set = omega_scale_set(&p.model, &p.omega, p.delta, y, top, &OmegaOptions::default()).unwrap();
        for k in (0..=n).step_by(400) {
            let x = y + (top - y) * k as f64 / n as f64;
            assert!(rel_diff(&set.w_at(x).unwrap(), &rk_w[k]) < 1e-8, "{} W at {x}", p.name);
            assert!(rel_diff(&set.z_at(x).unwrap(), &rk_z[k]) < 1e-8, "{} Z at {x}", p.name);
        }
    }
}

#[test]
fn derivative_grid_matches_the_generator_solution_slope() {
    let p = presets::step_killing::<f64>();
    let set = omega_scale_set(&p.model, &p.omega, 0.0, 0.0, 8.0, &OmegaOptions::default()).unwrap();
    for c in [1.0, 4.0, 6.5, 8.0] {
        let direct = omega_w_prime_direct(&p.model, &p.omega, &set, c).unwrap();
        assert!(rel_diff(&set.w_prime_at(c).unwrap(), &direct) < 1e-6, "c = {c}");
    }
    // centred difference of W itself
    for x in [2.0, 5.0, 7.3] {
        let e = 1e-4;
        let fd = (&set.w_at(x + e).unwrap() - &set.w_at(x - e).unwrap()).scale(0.5 / e);
        assert!(rel_diff(&set.w_prime_at(x).unwrap(), &fd) < 1e-6, "x = {x}");
    }
}

#[test]
fn solver_routes_agree() {
    let p = presets::step_killing::<f64>();
    let base = OmegaOptions { richardson: false, ..OmegaOptions::with_h(5e-3) };
    let structured = omega_w(&p.model, &p.omega, 0.0, 8.0, &base).unwrap();
    let forward = omega_w(&p.model, &p.omega, 0.0, 8.0, &OmegaOptions { route: Route::Generic(SolveMode::ForwardSubstitution), ..base })
        .unwrap();
    let picard = omega_w(&p.model, &p.omega, 0.0, 8.0, &OmegaOptions { route: Route::Generic(SolveMode::Picard), ..base }).unwrap();
    let scale = structured.values().iter().fold(0.0f64, |a, m| a.max(m.max_abs()));
    assert!(structured.max_abs_diff(&forward) / scale < 1e-10);
    assert!(forward.max_abs_diff(&picard) / scale < 1e-8);
}

#[test]
fn kernel_shift_does_not_change_the_solution() {
    // large shifts on long spans lose digits to cancellation against the
    // fast-growing kernel, so the span is kept at 4
    for p in presets::all::<f64>() {
        let y = if p.name == "red-zone" { -5.0 } else { 0.0 };
        let reference = omega_w(&p.model, &p.omega, y, y + 4.0, &OmegaOptions::default()).unwrap();
        let scale = reference.values().iter().fold(0.0f64, |a, m| a.max(m.max_abs()));
        for s in [0.1, 1.0, 5.0] {
            let g = omega_w(&p.model, &p.omega, y, y + 4.0, &OmegaOptions { kernel_shift: Some(s), ..Default::default() }).unwrap();
            assert!(g.max_abs_diff(&reference) / scale < 1e-8, "{} shift {s}", p.name);
        }
    }
}

#[test]
fn discount_is_an_added_constant_rate() {
    let p = presets::per_state_killing::<f64>();
    let delta = 0.3;
    let shifted = OmegaFn::per_state(vec![0.05 + delta, 0.25 + delta]).unwrap();
    let a = omega_scale_set(&p.model, &p.omega, delta, 0.0, 5.0, &OmegaOptions::default()).unwrap();
    let b = omega_scale_set(&p.model, &shifted, 0.0, 0.0, 5.0, &OmegaOptions::default()).unwrap();
    for x in probes(0.0, 5.0, 20) {
        assert!(rel_diff(&a.w_at(x).unwrap(), &b.w_at(x).unwrap()) < 1e-10);
        assert!(rel_diff(&a.z_at(x).unwrap(), &b.z_at(x).unwrap()) < 1e-10);
    }
}

#[test]
fn step_routes_agree() {
    let p = presets::step_killing::<f64>();
    let g = omega_w(&p.model, &p.omega, 0.0, 10.0, &OmegaOptions::default()).unwrap();
    for x in [4.5, 6.0, 8.0, 10.0] {
        let rec = step_omega_w(&p.model, &p.omega, x, 0.0).unwrap();
        let closed = closed_step_omega_w(&p.model, 0.25, 0.03, 4.0, x, 0.0).unwrap();
        let four = closed_step_w1_integrals(&p.model, 0.25, 0.03, 4.0, x, 0.0).unwrap();
        assert!(rel_diff(&g.interp(x).unwrap(), &closed) < 1e-7, "grid at {x}");
        assert!(rel_diff(&rec, &closed) < 1e-8, "recursion at {x}");
        assert!(rel_diff(&four, &closed) < 1e-10, "integral form at {x}");
    }
}

#[test]
fn step_constants_satisfy_their_equations() {
    let m = step_model();
    let s0 = ClassicScale::new(&m, 0.25).unwrap();
    let s1 = ClassicScale::new(&m, 0.03).unwrap();
    let k = StepConstants::new(&s0, &s1).unwrap();
    assert!(k.residual < 1e-12);
    let ex = StepConstants::explicit(&s0, &s1, 0.25, 0.03).unwrap();
    for (a, b) in [(&k.c, &ex.c), (&k.d, &ex.d), (&k.e, &ex.e), (&k.f, &ex.f)] {
        assert!(rel_diff(a, b) < 1e-10);
    }
    let id = Mat::identity(2);
    assert!(max_diff(&(&k.e - &k.c).scale(0.03 - 0.25), &id) < 1e-10);
    assert!(max_diff(&(&k.f - &k.d).scale(0.03 - 0.25), &id) < 1e-10);
}

#[test]
fn scale_matrix_lies_between_the_constant_rate_bounds() {
    let p = presets::step_killing::<f64>();
    let g = omega_w(&p.model, &p.omega, 0.0, 10.0, &OmegaOptions::default()).unwrap();
    let lo = ClassicScale::new(&p.model, 0.03).unwrap();
    let hi = ClassicScale::new(&p.model, 0.25).unwrap();
    for x in [0.5, 2.0, 4.0, 5.0, 6.0, 8.0, 10.0] {
        let w = g.interp(x).unwrap();
        let (a, b) = (hi.w(x).unwrap(), lo.w(x).unwrap());
        if x <= 4.0 {
            assert!(rel_diff(&w, &a) < 1e-9, "below the step at {x}");
            continue;
        }
        // diagonal entries are ordered like the rates; off-diagonal entries
        // are negative and ordered the other way, but still in between
        for i in 0..2 {
            assert!(b[(i, i)] <= w[(i, i)] && w[(i, i)] <= a[(i, i)], "x = {x} ({i},{i})");
        }
        for (i, j) in [(0, 1), (1, 0)] {
            assert!(a[(i, j)] <= w[(i, j)] && w[(i, j)] <= b[(i, j)] && a[(i, j)] < 0.0, "x = {x} ({i},{j})");
        }
    }
}

#[test]
fn band_ode_matches_volterra() {
    let p = presets::red_zone::<f64>();
    let ode = omega_model_ode_g(&p.model, 0.5, -0.1, 5.0, p.delta, 15.0, 1e-3).unwrap();
    let set = omega_scale_set(&p.model, &p.omega, p.delta, -5.0, 10.0, &OmegaOptions::default()).unwrap();
    for k in (0..=15000).step_by(500) {
        let z = k as f64 * 1e-3;
        assert!(rel_diff(&set.w_at(z - 5.0).unwrap(), ode.at(k)) < 1e-7, "z = {z}");
    }
}

#[test]
fn identity_form_agrees_on_row_sums_only() {
    let p = presets::step_killing::<f64>();
    let opts = OmegaOptions::default();
    let z = omega_z(&p.model, &p.omega, 0.0, 6.0, &opts).unwrap();
    let alt = omega_z_identity_form(&p.model, &p.omega, 0.0, 6.0, &opts).unwrap();
    let mut worst_sum: f64 = 0.0;
    let mut worst_entry: f64 = 0.0;
    for k in 0..z.len() {
        let (a, b) = (z.at(k).row_sums(), alt.at(k).row_sums());
        let scale = z.at(k).max_abs();
        worst_sum = worst_sum.max((a[0] - b[0]).abs().max((a[1] - b[1]).abs()) / scale);
        worst_entry = worst_entry.max(z.at(k).max_abs_diff(alt.at(k)) / scale);
    }
    assert!(worst_sum < 1e-10, "{worst_sum}");
    assert!(worst_entry > 1e-3, "{worst_entry}");
}

#[test]
fn one_sided_scale_gives_upward_passage_for_constant_rates() {
    let m = step_model();
    let beta = 0.15;
    let hg = omega_h(&m, &OmegaFn::constant(beta).unwrap(), beta, 6.0, &OmegaOptions::default()).unwrap();
    let lam = ClassicScale::new(&m, beta).unwrap().pair().lam_plus.clone();
    let hc = hg.at(6.0).unwrap().inverse().unwrap();
    for x in [-3.0, 0.0, 1.5, 4.0] {
        let want = omega_map::matrix_engine::expm(&lam, 6.0 - x).unwrap();
        assert!(max_diff(&(&hg.at(x).unwrap() * &hc), &want) < 1e-9, "x = {x}");
    }
}

#[test]
fn trapezoid_residual_is_second_order() {
    for p in presets::all::<f64>() {
        let y = if p.name == "red-zone" { -5.0 } else { 0.0 };
        let r = |h: f64| {
            let n = (6.0 / h).round() as usize + 1;
            let shift = 0.1;
            let cs = ClassicScale::new(&p.model, shift).unwrap();
            let kern = cs.w_grid(0.0, h, n).unwrap();
            let prob = VolterraProblem { kernel: kern.clone(), omega: p.omega.clone(), shift, inhomogeneity: MatrixGrid::new(y, h, kern.values().to_vec()).unwrap(), origin: y };
            let sol = volterra_solve(&prob, SolveMode::ForwardSubstitution).unwrap();
            volterra_residual(kern.values(), &prob.weights(), kern.values(), sol.values(), h).0
        };
        let ratio = r(1e-2) / r(5e-3);
        assert!(ratio > 3.5 && ratio < 4.5, "{}: ratio {ratio}", p.name);
    }
}

#[test]
fn off_diagonal_entries_start_negative() {
    // W‴_ij(0) = −(2/σᵢ²)(2/σⱼ²)Q_ij, so W_ij(x) ≈ −(2/σᵢ²)(2/σⱼ²)Q_ij x³/6
    let m = driftless();
    let cs = ClassicScale::new(&m, 0.1).unwrap();
    let x = 1e-2;
    let w = cs.w(x).unwrap();
    let tv = m.two_over_var();
    for (i, j) in [(0, 1), (1, 0)] {
        let want = -tv[i] * tv[j] * m.q_gen()[(i, j)] * x * x * x / 6.0;
        assert!((w[(i, j)] - want).abs() < 1e-3 * want.abs(), "({i},{j}): {} vs {want}", w[(i, j)]);
    }
}
