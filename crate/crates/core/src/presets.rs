//! Reference parameter sets used by tests, the acceptance run and the CLI.

use crate::matrix::Mat;
use crate::model::{MapModel, OmegaFn};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Preset<T> {
    pub name: &'static str,
    pub model: MapModel<T>,
    pub omega: OmegaFn<T>,
    /// Discount rate for dividend problems.
    pub delta: T,
}

fn l<T: Real>(v: f64) -> T {
    T::lit(v)
}

fn two_state<T: Real>(q12: f64, q21: f64, sigma: [f64; 2], mu: [f64; 2]) -> MapModel<T> {
    let q = Mat::from_rows(&[vec![l(-q12), l(q12)], vec![l(q21), l(-q21)]]);
    MapModel::new(q, sigma.map(l).to_vec(), mu.map(l).to_vec()).expect("valid preset")
}

/// Driftless two-phase model, `σ = (1, 1.2)`, switching rates 0.05 and 0.1.
pub fn driftless_model<T: Real>() -> MapModel<T> {
    two_state(0.05, 0.1, [1.0, 1.2], [0.0, 0.0])
}

/// [`driftless_model`] with phase-wise constant killing `(0.05, 0.25)`.
pub fn per_state_killing<T: Real>() -> Preset<T> {
    Preset {
        name: "per-state",
        model: driftless_model(),
        omega: OmegaFn::per_state(vec![l(0.05), l(0.25)]).expect("valid preset"),
        delta: l(0.05),
    }
}

/// Opposite drifts with killing 0.25 below level 4 and 0.03 above.
pub fn step_killing<T: Real>() -> Preset<T> {
    Preset {
        name: "step",
        model: two_state(0.1, 0.3, [0.7, 0.85], [0.1, -0.1]),
        omega: OmegaFn::step(vec![l(4.0)], vec![l(0.25), l(0.03)]).expect("valid preset"),
        delta: l(0.05),
    }
}

/// Positive drifts with a red zone `[−5, 0]` where killing falls linearly
/// from 0.5 to 0, discount 0.04.
pub fn red_zone<T: Real>() -> Preset<T> {
    Preset {
        name: "red-zone",
        model: two_state(0.4, 0.2, [1.2, 2.0], [1.75, 1.25]),
        omega: OmegaFn::affine_band(l(0.5), l(-0.1), l(5.0)).expect("valid preset"),
        delta: l(0.04),
    }
}

pub fn all<T: Real>() -> Vec<Preset<T>> {
    vec![per_state_killing(), step_killing(), red_zone()]
}

pub fn by_name<T: Real>(name: &str) -> Option<Preset<T>> {
    all().into_iter().find(|p| p.name == name)
}
