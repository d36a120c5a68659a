//! The modulated Brownian model, the killing-rate function ω and the grid
//! representation of matrix-valued functions.

mod config;
mod grid;
mod omega;

pub use config::{load_config, GridSpec, OmegaSpec, RunConfig};
pub use grid::MatrixGrid;
pub use omega::{OmegaFn, OmegaKind};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Real;

/// Generator rows may deviate from zero sum by at most this much.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Markov-modulated Brownian motion: in state `i` the level moves as
/// `μ_i t + σ_i B_t`, and the state switches according to the generator `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapModel<T> {
    n_states: usize,
    q_gen: Mat<T>,
    sigma: Vec<T>,
    mu: Vec<T>,
}

impl<T: Real> MapModel<T> {
    /// Validates and builds the model. Every violated invariant is listed in
    /// the returned error.
    pub fn new(q_gen: Mat<T>, sigma: Vec<T>, mu: Vec<T>) -> Result<Self> {
        let problems = Self::violations(&q_gen, &sigma, &mu);
        if !problems.is_empty() {
            return Err(Error::InvalidModel(problems));
        }
        Ok(Self { n_states: sigma.len(), q_gen, sigma, mu })
    }

    fn violations(q: &Mat<T>, sigma: &[T], mu: &[T]) -> Vec<String> {
        let mut out = Vec::new();
        let n = sigma.len();
        if n == 0 {
            out.push("model needs at least one state".into());
            return out;
        }
        if q.rows() != n || q.cols() != n {
            out.push(format!("Q is {}x{}, expected {n}x{n}", q.rows(), q.cols()));
            return out;
        }
        if mu.len() != n {
            out.push(format!("mu has {} entries, expected {n}", mu.len()));
        }
        for (i, &s) in sigma.iter().enumerate() {
            if !(s > T::zero()) || !s.is_finite() {
                out.push(format!("sigma[{}] = {} must be positive", i + 1, s));
            }
        }
        for (i, &m) in mu.iter().enumerate() {
            if !m.is_finite() {
                out.push(format!("mu[{}] is not finite", i + 1));
            }
        }
        for i in 0..n {
            let mut sum = T::zero();
            for j in 0..n {
                let v = q[(i, j)];
                if !v.is_finite() {
                    out.push(format!("Q[{},{}] is not finite", i + 1, j + 1));
                }
                if i != j && v < T::zero() {
                    out.push(format!("Q[{},{}] = {} is a negative off-diagonal rate", i + 1, j + 1, v));
                }
                sum += v;
            }
            if !(sum.abs() <= T::lit(ROW_SUM_TOL)) {
                out.push(format!("row {} of Q sums to {} instead of 0", i + 1, sum));
            }
        }
        if !is_irreducible(q) {
            out.push("Q is not irreducible".into());
        }
        out
    }

    /// Single-state Brownian motion with drift.
    pub fn brownian(sigma: T, mu: T) -> Result<Self> {
        Self::new(Mat::zeros(1, 1), vec![sigma], vec![mu])
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn q_gen(&self) -> &Mat<T> {
        &self.q_gen
    }

    #[inline]
    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    #[inline]
    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    /// `diag(σ_i²/2)`.
    pub fn half_var(&self) -> Mat<T> {
        Mat::from_diag(&self.sigma.iter().map(|&s| s * s * T::half()).collect::<Vec<_>>())
    }

    /// The vector `2/σ_i²`, the diagonal of `W′(0)`.
    pub fn two_over_var(&self) -> Vec<T> {
        self.sigma.iter().map(|&s| T::two() / (s * s)).collect()
    }

    pub fn drift(&self) -> Mat<T> {
        Mat::from_diag(&self.mu)
    }

    /// `F(α) = ½Δ_σ²α² + Δ_μα + Q`.
    pub fn laplace_exponent(&self, alpha: T) -> Mat<T> {
        let mut f = self.q_gen.clone();
        for i in 0..self.n_states {
            let s = self.sigma[i];
            f[(i, i)] += T::half() * s * s * alpha * alpha + self.mu[i] * alpha;
        }
        f
    }

    /// Stationary distribution of the modulating chain.
    pub fn stationary(&self) -> Result<Vec<T>> {
        let n = self.n_states;
        // replace one balance equation by normalization
        let mut a = self.q_gen.transpose();
        for j in 0..n {
            a[(n - 1, j)] = T::one();
        }
        let mut b = Mat::zeros(n, 1);
        b[(n - 1, 0)] = T::one();
        let pi = a.solve(&b)?;
        Ok((0..n).map(|i| pi[(i, 0)]).collect())
    }

    /// Asymptotic drift `κ = Σ π_i μ_i`.
    pub fn kappa(&self) -> Result<T> {
        Ok(self.stationary()?.iter().zip(&self.mu).map(|(&p, &m)| p * m).sum())
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> MapModel<U> {
        MapModel {
            n_states: self.n_states,
            q_gen: self.q_gen.cast(),
            sigma: self.sigma.iter().map(|v| U::lit(v.as_f64())).collect(),
            mu: self.mu.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Every state reaches every other through nonzero off-diagonal rates.
fn is_irreducible<T: Real>(q: &Mat<T>) -> bool {
    let n = q.rows();
    let reach_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let rate = if forward { q[(i, j)] } else { q[(j, i)] };
                if i != j && rate != T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n <= 1 || (reach_all(true) && reach_all(false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn driftless() -> MapModel<f64> {
        MapModel::new(
            Mat::from_rows(&[vec![-0.05, 0.05], vec![0.1, -0.1]]),
            vec![1.0, 1.2],
            vec![0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn laplace_exponent_values() {
        let m = driftless();
        assert_eq!(m.laplace_exponent(0.0), *m.q_gen());
        let f = m.laplace_exponent(1.0);
        let want = Mat::from_rows(&[vec![0.45, 0.05], vec![0.1, 0.62]]);
        assert!(f.max_abs_diff(&want) < 1e-15);
        let bm = MapModel::brownian(1.0, 0.0).unwrap();
        assert_eq!(bm.laplace_exponent(2.0)[(0, 0)], 2.0);
    }

    #[test]
    fn rejects_bad_rows_and_sigma() {
        let err = MapModel::new(
            Mat::from_rows(&[vec![-0.05, 0.06], vec![0.1, -0.1]]),
            vec![1.0, -1.0],
            vec![0.0, 0.0],
        )
        .unwrap_err();
        let Error::InvalidModel(list) = err else { panic!() };
        assert!(list.iter().any(|s| s.contains("row 1")));
        assert!(list.iter().any(|s| s.contains("sigma[2]")));
    }

    #[test]
    fn reducible_generator_rejected() {
        let err = MapModel::new(
            Mat::from_rows(&[vec![-0.1, 0.1], vec![0.0, 0.0]]),
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        );
        assert!(err.is_err());
    }

    #[test]
    fn stationary_distribution() {
        let pi = driftless().stationary().unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14 && (pi[1] - 1.0 / 3.0).abs() < 1e-14);
    }
}
