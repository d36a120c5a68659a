mod common;

use common::*;
use omega_map::dividends::*;
use omega_map::model::{MapModel, OmegaFn};
use omega_map::presets;
use omega_map::scale_omega::OmegaOptions;
use omega_map::{Error, Mat};

#[test]
fn scalar_value_is_the_scale_ratio() {
    for (sigma, mu, delta) in [(1.0, 0.5, 0.05), (0.8, -0.2, 0.1), (1.4, 1.0, 0.03)] {
        let b = Bm { sigma, mu, q: delta };
        let m = MapModel::brownian(sigma, mu).unwrap();
        for (d, x, c) in [(0.0, 1.0, 2.0), (1.5, 0.0, 3.0), (0.0, 0.2, 0.7)] {
            let v = dividend_value(&m, &OmegaFn::zero(), &DividendQuery { c, d, delta, x }).unwrap();
            let want = b.w(x + d) / b.w_prime(c + d);
            assert!((v[(0, 0)] - want).abs() < 1e-8 * want, "{sigma} {mu} {delta} at {x}: {} vs {want}", v[(0, 0)]);
        }
    }
}

fn cases() -> Vec<(presets::Preset<f64>, f64, f64, f64)> {
    // (preset, d, x, c) with the ruin floor at −d
    vec![
        (presets::per_state_killing(), 0.0, 1.0, 2.0),
        (presets::step_killing(), 0.0, 3.0, 5.0),
        (presets::red_zone(), 5.0, 1.0, 3.0),
    ]
}

#[test]
fn value_solves_the_reflected_boundary_problem() {
    for (p, d, x, c) in cases() {
        let zero = Mat::zeros(2, 2);
        let n = 4000;
        let fd = fd_solve(&p.model, &rate_of(&p.omega, p.delta), &zero, -d, c, &zero, &Bc::Slope(Mat::identity(2)), n);
        let want = fd_at(&fd, -d, c, x);
        let got = dividend_value(&p.model, &p.omega, &DividendQuery { c, d, delta: p.delta, x }).unwrap();
        assert!(rel_diff(&got, &want) < 1e-6, "{}: {:?} vs {:?}", p.name, got, want);
    }
}

#[test]
fn value_above_the_barrier_adds_the_lump() {
    for (p, d, _, c) in cases() {
        let at_c = dividend_value(&p.model, &p.omega, &DividendQuery { c, d, delta: p.delta, x: c }).unwrap();
        let above = dividend_value(&p.model, &p.omega, &DividendQuery { c, d, delta: p.delta, x: c + 0.75 }).unwrap();
        let want = &at_c + &Mat::identity(2).scale(0.75);
        assert!(max_diff(&above, &want) < 1e-12);
        // continuity from below
        let below = dividend_value(&p.model, &p.omega, &DividendQuery { c, d, delta: p.delta, x: c - 1e-7 }).unwrap();
        assert!(max_diff(&below, &at_c) < 1e-6, "{}", p.name);
    }
}

#[test]
fn value_grows_with_the_start_and_falls_with_the_discount() {
    for (p, d, _, c) in cases() {
        let mut prev = vec![0.0; 2];
        for k in 1..=20 {
            let x = -d + (c + d) * k as f64 / 20.0;
            let v = dividend_value(&p.model, &p.omega, &DividendQuery { c, d, delta: p.delta, x }).unwrap().row_sums();
            assert!(v[0] > prev[0] && v[1] > prev[1], "{} at {x}", p.name);
            prev = v;
        }
        let x = 0.5 * (c - d);
        let mut last = vec![f64::INFINITY; 2];
        for delta in [0.02, 0.05, 0.1, 0.4] {
            let v = dividend_value(&p.model, &p.omega, &DividendQuery { c, d, delta, x }).unwrap().row_sums();
            assert!(v[0] < last[0] && v[1] < last[1], "{} delta {delta}", p.name);
            last = v;
        }
    }
}

#[test]
fn sweep_finds_the_scalar_optimal_barrier() {
    // W'' vanishes at c* = 2 ln(−b/a)/(a − b) for the roots a > 0 > b
    let (sigma, mu, delta) = (1.0, 1.0, 0.05);
    let b = Bm { sigma, mu, q: delta };
    let (r1, r2) = b.roots();
    let c_star = 2.0 * (-r2 / r1).ln() / (r1 - r2);
    let m = MapModel::brownian(sigma, mu).unwrap();
    let grid: Vec<f64> = (1..=200).map(|k| 0.05 * k as f64).collect();
    let sweep = barrier_sweep(&m, &OmegaFn::zero(), 0.0, delta, 0.5, &grid, &OmegaOptions::default()).unwrap();
    assert_eq!(sweep.rows.len(), 200);
    assert!((sweep.best[0].c - c_star).abs() <= 0.05, "{} vs {c_star}", sweep.best[0].c);
    // the sweep reuses one scale set; single queries must agree
    for row in sweep.rows.iter().step_by(37) {
        let one = dividend_value(&m, &OmegaFn::zero(), &DividendQuery { c: row.c, d: 0.0, delta, x: 0.5 }).unwrap();
        assert!(max_diff(&one, &row.value) < 1e-10);
    }
}

#[test]
fn sweep_best_is_the_row_sum_maximum() {
    let p = presets::red_zone::<f64>();
    let grid: Vec<f64> = (1..=12).map(|k| 0.5 * k as f64).collect();
    let s = barrier_sweep(&p.model, &p.omega, 5.0, p.delta, 1.0, &grid, &OmegaOptions::default()).unwrap();
    for best in &s.best {
        let top = s.rows.iter().map(|r| r.row_sums[best.state]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.value, top);
    }
}

#[test]
fn invalid_queries_are_rejected() {
    let p = presets::per_state_killing::<f64>();
    let bad = [
        DividendQuery { c: 0.0, d: 0.0, delta: 0.05, x: 1.0 },
        DividendQuery { c: 2.0, d: -1.0, delta: 0.05, x: 1.0 },
        DividendQuery { c: 2.0, d: 0.0, delta: 0.0, x: 1.0 },
        DividendQuery { c: 2.0, d: 0.0, delta: 0.05, x: -0.5 },
        DividendQuery { c: 2.0, d: 0.0, delta: f64::NAN, x: 1.0 },
    ];
    for q in bad {
        assert!(matches!(dividend_value(&p.model, &p.omega, &q), Err(Error::InvalidArgument(_))), "{q:?}");
    }
    let e = barrier_sweep(&p.model, &p.omega, 0.0, 0.05, 1.0, &[2.0, 1.0], &OmegaOptions::default());
    assert!(matches!(e, Err(Error::InvalidArgument(_))));
    assert!(barrier_sweep(&p.model, &p.omega, 0.0, 0.05, 1.0, &[], &OmegaOptions::default()).is_err());
}
