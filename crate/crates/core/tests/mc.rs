mod common;

use common::*;
use omega_map::mc::*;
use omega_map::model::{MapModel, OmegaFn};
use omega_map::presets;

fn small(n_paths: usize) -> PathConfig {
    PathConfig { n_paths, ..PathConfig::default() }
}

fn bits(m: &omega_map::Mat<f64>) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn same_seed_gives_identical_results_on_any_pool_size() {
    let p = presets::step_killing::<f64>();
    let cfg = small(3000);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_exit(&p.model, &p.omega, 0.0, 3.0, 6.0, None, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(bits(&a.up.mean), bits(&b.up.mean));
    assert_eq!(bits(&a.down.std_err), bits(&b.down.std_err));
    let other = simulate_exit(&p.model, &p.omega, 0.0, 3.0, 6.0, None, &PathConfig { seed: 7, ..cfg }).unwrap();
    assert_ne!(bits(&a.up.mean), bits(&other.up.mean));
}

#[test]
fn symmetric_exit_splits_evenly() {
    let m = MapModel::<f64>::brownian(1.0, 0.0).unwrap();
    let e = simulate_exit(&m, &OmegaFn::zero(), -1.0, 0.0, 1.0, None, &small(20_000)).unwrap();
    let (u, s) = (e.up.mean[(0, 0)], e.up.std_err[(0, 0)]);
    assert!((u - 0.5).abs() < 4.0 * s, "{u} ± {s}");
    assert!((u + e.down.mean[(0, 0)] - 1.0).abs() < 1e-12);
    assert_eq!(e.up.n_censored, 0);
}

#[test]
fn killed_scalar_exit_matches_closed_form() {
    let b = Bm { sigma: 0.9, mu: 0.3, q: 0.4 };
    let m = MapModel::<f64>::brownian(b.sigma, b.mu).unwrap();
    let om = OmegaFn::constant(b.q).unwrap();
    let e = simulate_exit(&m, &om, 0.0, 0.8, 2.0, None, &small(20_000)).unwrap();
    assert!(e.up.max_z_score(&one(b.up(0.0, 0.8, 2.0))) < 4.0);
    assert!(e.down.max_z_score(&one(b.down(0.0, 0.8, 2.0))) < 4.0);
}

fn one(v: f64) -> omega_map::Mat<f64> {
    omega_map::Mat::from_rows(&[vec![v]])
}

#[test]
fn bridge_correction_removes_the_missed_crossing_bias() {
    let m = MapModel::<f64>::brownian(1.0, 0.0).unwrap();
    let coarse = PathConfig { dt: 1e-2, far_field: false, n_paths: 20_000, ..PathConfig::default() };
    let with = simulate_exit(&m, &OmegaFn::zero(), 0.0, 0.2, 1.0, None, &coarse).unwrap();
    let without = simulate_exit(&m, &OmegaFn::zero(), 0.0, 0.2, 1.0, None, &PathConfig { bridge_correction: false, ..coarse })
        .unwrap();
    let se = with.up.std_err[(0, 0)];
    assert!((with.up.mean[(0, 0)] - 0.2).abs() < 4.0 * se);
    // missed crossings push both barriers out by about 0.58σ√dt
    assert!(without.up.mean[(0, 0)] - 0.2 > 8.0 * se, "{}", without.up.mean[(0, 0)]);
}

#[test]
fn one_sided_down_matches_the_scalar_transform() {
    let b = Bm { sigma: 1.0, mu: 0.5, q: 0.3 };
    let m = MapModel::<f64>::brownian(b.sigma, b.mu).unwrap();
    let est = simulate_down(&m, &OmegaFn::constant(b.q).unwrap(), 0.0, 1.0, None, &small(20_000)).unwrap();
    assert!(est.max_z_score(&one(b.down_inf(0.0, 1.0))) < 4.0);
}

#[test]
fn dividends_above_the_barrier_include_the_lump() {
    let p = presets::per_state_killing::<f64>();
    let est = simulate_dividends(&p.model, &p.omega, 0.0, 3.0, 2.0, Some(1), p.delta, &small(2000)).unwrap();
    assert_eq!(est.start_states, vec![1]);
    let total: f64 = (0..2).map(|j| est.mean[(0, j)]).sum();
    assert!(total >= 1.0, "{total}");
    // the lump is paid in the start phase
    assert!(est.mean[(0, 1)] >= 1.0);
}

#[test]
fn scalar_dividends_match_the_scale_ratio() {
    let b = Bm { sigma: 1.0, mu: 0.5, q: 0.1 };
    let m = MapModel::<f64>::brownian(b.sigma, b.mu).unwrap();
    let est = simulate_dividends(&m, &OmegaFn::zero(), 0.0, 0.5, 1.5, None, b.q, &small(20_000)).unwrap();
    let want = b.w(0.5) / b.w_prime(1.5);
    assert!(est.max_z_score(&one(want)) < 4.0, "{} vs {want}", est.mean[(0, 0)]);
}

#[test]
fn occupation_density_matches_the_scalar_kernel() {
    // killed BM on (0, 2): u(x, y) = W(x)W(2−y)/W(2) − W(x−y)
    let b = Bm { sigma: 1.0, mu: 0.2, q: 0.5 };
    let m = MapModel::<f64>::brownian(b.sigma, b.mu).unwrap();
    let edges: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let est = simulate_resolvent(&m, &OmegaFn::constant(b.q).unwrap(), 0.0, 0.8, 2.0, None, &edges, &small(20_000)).unwrap();
    for k in 0..8 {
        // bin average by Simpson on the closed form
        let (lo, hi) = (edges[k], edges[k + 1]);
        let u = |y: f64| b.w(0.8) * b.w(2.0 - y) / b.w(2.0) - b.w(0.8 - y);
        let mid = 0.5 * (lo + hi);
        let want = if lo < 0.8 && 0.8 < hi {
            let s = |a: f64, c: f64| (c - a) / 6.0 * (u(a) + 4.0 * u(0.5 * (a + c)) + u(c));
            (s(lo, 0.8) + s(0.8, hi)) / (hi - lo)
        } else {
            (u(lo) + 4.0 * u(mid) + u(hi)) / 6.0
        };
        let (got, se) = (est.density[k][(0, 0)], est.std_err[k][(0, 0)]);
        assert!(est.reliable[k]);
        assert!((got - want).abs() < 4.0 * se + 1e-3 * want, "bin {k}: {got} ± {se} vs {want}");
    }
}

#[test]
fn unvisited_bins_are_flagged() {
    let m = MapModel::<f64>::brownian(0.5, 0.0).unwrap();
    let edges = [0.0, 0.1, 9.9, 10.0];
    let est = simulate_resolvent(&m, &OmegaFn::constant(2.0).unwrap(), 0.0, 0.05, 10.0, None, &edges, &small(200)).unwrap();
    assert!(!est.reliable[2]);
    assert!(est.std_err[2][(0, 0)].is_infinite());
}

#[test]
fn short_horizon_censors_paths() {
    let m = MapModel::<f64>::brownian(1.0, 0.0).unwrap();
    let cfg = PathConfig { t_max: 1e-2, ..small(500) };
    let e = simulate_exit(&m, &OmegaFn::zero(), -5.0, 0.0, 5.0, None, &cfg).unwrap();
    assert_eq!(e.up.n_censored, 500);
    assert!((e.up.censored_fraction() - 1.0).abs() < 1e-15);
}

#[test]
fn bad_configurations_are_rejected() {
    let m = MapModel::<f64>::brownian(1.0, 0.0).unwrap();
    let om = OmegaFn::zero();
    assert!(simulate_exit(&m, &om, 0.0, 0.5, 1.0, None, &PathConfig { dt: 0.0, ..small(10) }).is_err());
    assert!(simulate_exit(&m, &om, 0.0, 0.5, 1.0, None, &small(0)).is_err());
    assert!(simulate_exit(&m, &om, 0.0, 0.5, 1.0, Some(1), &small(10)).is_err());
    assert!(simulate_exit(&m, &om, 0.0, 1.5, 1.0, None, &small(10)).is_err());
    assert!(simulate_dividends(&m, &om, 0.0, 0.5, 1.0, None, 0.0, &small(10)).is_err());
}
