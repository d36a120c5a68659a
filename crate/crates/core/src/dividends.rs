//! Discounted dividends under a barrier strategy until ω-ruin.
//!
//! Entry `(i, j)` of a value matrix is the expected discounted amount paid
//! while the phase is `j`, started in phase `i`. Row sums are the total value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fluctuation::INVERSE_COND_LIMIT;
use crate::matrix::Mat;
use crate::model::{MapModel, OmegaFn};
use crate::scalar::Real;
use crate::scale_omega::{omega_scale_set, OmegaOptions, OmegaScaleSet};

/// Barrier `c`, ruin floor `−d`, discount rate `delta`, start `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DividendQuery<T> {
    pub c: T,
    pub d: T,
    pub delta: T,
    pub x: T,
}

impl<T: Real> DividendQuery<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("barrier c = {} must be positive", self.c)));
        }
        if !(self.d >= T::zero()) || !self.d.is_finite() {
            return Err(Error::InvalidArgument(format!("ruin floor d = {} must be nonnegative", self.d)));
        }
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!("discount delta = {} must be positive", self.delta)));
        }
        if !(self.x > -self.d) || !self.x.is_finite() {
            return Err(Error::InvalidArgument(format!("start x = {} must lie above -d = {}", self.x, -self.d)));
        }
        Ok(())
    }
}

pub fn dividend_value<T: Real>(model: &MapModel<T>, om: &OmegaFn<T>, q: &DividendQuery<T>) -> Result<Mat<T>> {
    dividend_value_with(model, om, q, &OmegaOptions::default())
}

pub fn dividend_value_with<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    q: &DividendQuery<T>,
    opts: &OmegaOptions<T>,
) -> Result<Mat<T>> {
    q.validate()?;
    let set = omega_scale_set(model, om, q.delta, -q.d, q.c, opts)?;
    value_from_set(&set, q.c, q.x)
}

/// `𝒲(x)𝒲′(c)⁻¹` below the barrier, plus `(x − c)I` above it, from a scale
/// set built with the discount as `delta` and started at the ruin floor.
pub fn value_from_set<T: Real>(set: &OmegaScaleSet<T>, c: T, x: T) -> Result<Mat<T>> {
    if !(x > set.y) {
        return Err(Error::InvalidArgument(format!("start x = {x} must lie above the floor {}", set.y)));
    }
    let inv = set.w_prime_at(c)?.inverse_checked(T::lit(INVERSE_COND_LIMIT), "W'(c, -d)")?;
    if x <= c {
        return Ok(&set.w_at(x)? * &inv);
    }
    let mut v = &set.w_at(c)? * &inv;
    for i in 0..v.rows() {
        v[(i, i)] += x - c;
    }
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct SweepRow<T> {
    pub c: T,
    pub value: Mat<T>,
    pub row_sums: Vec<T>,
}

/// Best barrier on the grid for one starting phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepBest<T> {
    pub state: usize,
    pub c: T,
    pub value: T,
}

#[derive(Clone, Debug)]
pub struct BarrierSweep<T> {
    pub rows: Vec<SweepRow<T>>,
    pub best: Vec<SweepBest<T>>,
}

/// Dividend values over a grid of barriers, all read from one scale set.
pub fn barrier_sweep<T: Real>(
    model: &MapModel<T>,
    om: &OmegaFn<T>,
    d: T,
    delta: T,
    x: T,
    c_grid: &[T],
    opts: &OmegaOptions<T>,
) -> Result<BarrierSweep<T>> {
    if c_grid.is_empty() {
        return Err(Error::InvalidArgument("barrier grid is empty".into()));
    }
    if c_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("barrier grid must be strictly ascending".into()));
    }
    for &c in c_grid {
        DividendQuery { c, d, delta, x }.validate()?;
    }
    let top = *c_grid.last().expect("nonempty");
    let set = omega_scale_set(model, om, delta, -d, top, opts)?;
    let rows: Vec<SweepRow<T>> = c_grid
        .par_iter()
        .map(|&c| {
            let value = value_from_set(&set, c, x)?;
            let row_sums = value.row_sums();
            Ok(SweepRow { c, value, row_sums })
        })
        .collect::<Result<_>>()?;
    let best = (0..model.n_states())
        .map(|i| {
            let r = rows
                .iter()
                .max_by(|a, b| a.row_sums[i].partial_cmp(&b.row_sums[i]).expect("finite"))
                .expect("nonempty");
            SweepBest { state: i, c: r.c, value: r.row_sums[i] }
        })
        .collect();
    Ok(BarrierSweep { rows, best })
}
