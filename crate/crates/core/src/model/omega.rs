use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parametric form of the killing rate.
#[derive(Clone, Debug, PartialEq)]
pub enum OmegaKind<T> {
    /// The same rate everywhere.
    Constant(T),
    /// One constant rate per state.
    PerState(Vec<T>),
    /// Piecewise constant in the level: `values[k]` on `[levels[k-1], levels[k])`
    /// with `levels[-1] = -∞`, so there is one more value than levels.
    Step { levels: Vec<T>, values: Vec<T> },
    /// `γ0 + γ1 (x + d)` on `[-d, 0]` and zero elsewhere.
    AffineBand { gamma0: T, gamma1: T, d: T },
    /// Per-state values on a sorted level grid, linearly interpolated and
    /// clamped to the end values outside it. `values[i]` is the row of state `i`.
    Tabulated { x: Vec<T>, values: Vec<Vec<T>> },
}

/// Bounded nonnegative killing rate `ω_i(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaFn<T> {
    kind: OmegaKind<T>,
    bound_lambda: T,
}

impl<T: Real> OmegaFn<T> {
    pub fn new(kind: OmegaKind<T>) -> Result<Self> {
        let mut bad = Vec::new();
        let nonneg = |v: T, what: String, bad: &mut Vec<String>| {
            if !(v >= T::zero()) || !v.is_finite() {
                bad.push(format!("{what} = {v} must be finite and nonnegative"));
            }
        };
        let bound = match &kind {
            OmegaKind::Constant(b) => {
                nonneg(*b, "omega constant".into(), &mut bad);
                *b
            }
            OmegaKind::PerState(v) => {
                if v.is_empty() {
                    bad.push("per-state omega needs values".into());
                }
                for (i, &w) in v.iter().enumerate() {
                    nonneg(w, format!("omega[{}]", i + 1), &mut bad);
                }
                v.iter().copied().fold(T::zero(), T::max)
            }
            OmegaKind::Step { levels, values } => {
                if values.len() != levels.len() + 1 {
                    bad.push(format!(
                        "step omega needs {} values for {} levels, got {}",
                        levels.len() + 1,
                        levels.len(),
                        values.len()
                    ));
                }
                if levels.windows(2).any(|w| !(w[0] < w[1])) {
                    bad.push("step levels must be strictly increasing".into());
                }
                for (i, &p) in values.iter().enumerate() {
                    nonneg(p, format!("step value p_{i}"), &mut bad);
                }
                values.iter().copied().fold(T::zero(), T::max)
            }
            OmegaKind::AffineBand { gamma0, gamma1, d } => {
                if !(*d >= T::zero()) {
                    bad.push(format!("band width d = {d} must be nonnegative"));
                }
                nonneg(*gamma0, "gamma0".into(), &mut bad);
                nonneg(*gamma0 + *gamma1 * *d, "gamma0 + gamma1*d".into(), &mut bad);
                gamma0.max(*gamma0 + *gamma1 * *d)
            }
            OmegaKind::Tabulated { x, values } => {
                if x.is_empty() {
                    bad.push("tabulated omega needs at least one node".into());
                }
                if x.windows(2).any(|w| !(w[0] < w[1])) {
                    bad.push("tabulated x grid must be strictly increasing".into());
                }
                let mut m = T::zero();
                for (i, row) in values.iter().enumerate() {
                    if row.len() != x.len() {
                        bad.push(format!("tabulated row {} has {} values, expected {}", i + 1, row.len(), x.len()));
                    }
                    for &w in row {
                        nonneg(w, format!("tabulated omega in state {}", i + 1), &mut bad);
                        m = m.max(w);
                    }
                }
                m
            }
        };
        if !bad.is_empty() {
            return Err(Error::InvalidModel(bad));
        }
        Ok(Self { kind, bound_lambda: bound })
    }

    pub fn zero() -> Self {
        Self { kind: OmegaKind::Constant(T::zero()), bound_lambda: T::zero() }
    }

    pub fn constant(beta: T) -> Result<Self> {
        Self::new(OmegaKind::Constant(beta))
    }

    pub fn per_state(values: Vec<T>) -> Result<Self> {
        Self::new(OmegaKind::PerState(values))
    }

    pub fn step(levels: Vec<T>, values: Vec<T>) -> Result<Self> {
        Self::new(OmegaKind::Step { levels, values })
    }

    pub fn affine_band(gamma0: T, gamma1: T, d: T) -> Result<Self> {
        Self::new(OmegaKind::AffineBand { gamma0, gamma1, d })
    }

    pub fn tabulated(x: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        Self::new(OmegaKind::Tabulated { x, values })
    }

    #[inline]
    pub fn kind(&self) -> &OmegaKind<T> {
        &self.kind
    }

    /// `λ = sup ω`.
    #[inline]
    pub fn bound_lambda(&self) -> T {
        self.bound_lambda
    }

    /// Number of states the function is tied to, if any.
    pub fn required_states(&self) -> Option<usize> {
        match &self.kind {
            OmegaKind::PerState(v) => Some(v.len()),
            OmegaKind::Tabulated { values, .. } => Some(values.len()),
            _ => None,
        }
    }

    /// Checks the function fits a model with `n` states.
    pub fn check_states(&self, n: usize) -> Result<()> {
        match self.required_states() {
            Some(k) if k != n => Err(Error::InvalidModel(vec![format!(
                "omega defines {k} states but the model has {n}"
            )])),
            _ => Ok(()),
        }
    }

    /// `ω_state(x)` with a zero-based state index.
    pub fn eval(&self, state: usize, x: T) -> Result<T> {
        if let Some(k) = self.required_states() {
            if state >= k {
                return Err(Error::InvalidArgument(format!("state {} out of range 1..={k}", state + 1)));
            }
        }
        Ok(self.eval_unchecked(state, x))
    }

    /// `ω_state(x)` without the range check. Panics on an out-of-range state
    /// for the per-state kinds.
    #[inline]
    pub fn eval_unchecked(&self, state: usize, x: T) -> T {
        match &self.kind {
            OmegaKind::Constant(b) => *b,
            OmegaKind::PerState(v) => v[state],
            OmegaKind::Step { levels, values } => values[levels.partition_point(|&l| l <= x)],
            OmegaKind::AffineBand { gamma0, gamma1, d } => {
                if x >= -*d && x <= T::zero() {
                    *gamma0 + *gamma1 * (x + *d)
                } else {
                    T::zero()
                }
            }
            OmegaKind::Tabulated { x: xs, values } => interp_clamped(xs, &values[state], x),
        }
    }

    /// Left limit `ω_state(x−)`; differs from [`eval_unchecked`](Self::eval_unchecked)
    /// only at jumps.
    pub fn eval_left(&self, state: usize, x: T) -> T {
        match &self.kind {
            OmegaKind::Step { levels, values } => values[levels.partition_point(|&l| l < x)],
            OmegaKind::AffineBand { gamma0, gamma1, d } => {
                if x > -*d && x <= T::zero() {
                    *gamma0 + *gamma1 * (x + *d)
                } else {
                    T::zero()
                }
            }
            _ => self.eval_unchecked(state, x),
        }
    }

    /// Right limit `ω_state(x+)`.
    pub fn eval_right(&self, state: usize, x: T) -> T {
        match &self.kind {
            OmegaKind::AffineBand { gamma0, gamma1, d } => {
                if x >= -*d && x < T::zero() {
                    *gamma0 + *gamma1 * (x + *d)
                } else {
                    T::zero()
                }
            }
            _ => self.eval_unchecked(state, x),
        }
    }

    /// Levels where ω may jump.
    pub fn breakpoints(&self) -> Vec<T> {
        match &self.kind {
            OmegaKind::Step { levels, .. } => levels.clone(),
            OmegaKind::AffineBand { d, .. } => vec![-*d, T::zero()],
            _ => Vec::new(),
        }
    }

    /// True when ω does not depend on the state.
    pub fn is_state_independent(&self) -> bool {
        matches!(self.kind, OmegaKind::Constant(_) | OmegaKind::Step { .. } | OmegaKind::AffineBand { .. })
    }

    /// The constant value ω takes on `(-∞, 0]`, if it is constant there and
    /// the same in every state.
    pub fn constant_on_negative_half_line(&self, n_states: usize) -> Option<T> {
        self.constant_below(T::zero(), n_states)
    }

    /// The constant value ω takes on `(-∞, x0]`, if any.
    pub fn constant_below(&self, x0: T, n_states: usize) -> Option<T> {
        match &self.kind {
            OmegaKind::Constant(b) => Some(*b),
            OmegaKind::PerState(v) => {
                let first = *v.first()?;
                v.iter().all(|&w| w == first).then_some(first)
            }
            OmegaKind::Step { levels, values } => {
                // values[0] holds on (-∞, levels[0]); the level itself is a null set
                if levels.first().map_or(true, |&l| l >= x0) {
                    Some(values[0])
                } else {
                    None
                }
            }
            OmegaKind::AffineBand { gamma0, gamma1, d } => {
                if x0 <= -*d || (*gamma1 == T::zero() && *gamma0 == T::zero() && x0 <= T::zero()) {
                    Some(T::zero())
                } else {
                    None
                }
            }
            OmegaKind::Tabulated { x, values } => {
                let first = values.first()?.first().copied()?;
                // nodes up to x0, plus the next one when x0 falls strictly inside a cell
                let mut upto = x.partition_point(|&xx| xx <= x0);
                if upto > 0 && upto < x.len() && x[upto - 1] < x0 {
                    upto += 1;
                }
                let upto = upto.max(1);
                values
                    .iter()
                    .take(n_states.max(1))
                    .all(|row| row.iter().take(upto).all(|&w| w == first))
                    .then_some(first)
            }
        }
    }

    /// A level above which ω is constant in each state, with those values.
    /// `None` as level means ω never depends on the level.
    pub fn constant_tail(&self, n_states: usize) -> (Option<T>, Vec<T>) {
        match &self.kind {
            OmegaKind::Constant(b) => (None, vec![*b; n_states]),
            OmegaKind::PerState(v) => (None, v.clone()),
            OmegaKind::Step { levels, values } => (levels.last().copied(), vec![*values.last().expect("nonempty"); n_states]),
            OmegaKind::AffineBand { .. } => (Some(T::zero()), vec![T::zero(); n_states]),
            OmegaKind::Tabulated { x, values } => {
                (x.last().copied(), values.iter().map(|row| *row.last().expect("nonempty")).collect())
            }
        }
    }

    pub fn cast<U: Real>(&self) -> OmegaFn<U> {
        let c = |v: &T| U::lit(v.as_f64());
        let cv = |v: &Vec<T>| v.iter().map(c).collect::<Vec<U>>();
        let kind = match &self.kind {
            OmegaKind::Constant(b) => OmegaKind::Constant(c(b)),
            OmegaKind::PerState(v) => OmegaKind::PerState(cv(v)),
            OmegaKind::Step { levels, values } => OmegaKind::Step { levels: cv(levels), values: cv(values) },
            OmegaKind::AffineBand { gamma0, gamma1, d } => {
                OmegaKind::AffineBand { gamma0: c(gamma0), gamma1: c(gamma1), d: c(d) }
            }
            OmegaKind::Tabulated { x, values } => {
                OmegaKind::Tabulated { x: cv(x), values: values.iter().map(cv).collect() }
            }
        };
        OmegaFn { kind, bound_lambda: c(&self.bound_lambda) }
    }
}

fn interp_clamped<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}
