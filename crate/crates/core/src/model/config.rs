//! JSON configuration documents.

use serde::{Deserialize, Serialize};

use super::{MapModel, OmegaFn, OmegaKind};
use crate::error::{Error, Result};
use crate::matrix::Mat;

/// The `omega` object, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    Constant { beta: f64 },
    PerState { values: Vec<f64> },
    Step { levels: Vec<f64>, values: Vec<f64> },
    AffineBand { gamma0: f64, gamma1: f64, d: f64 },
    Tabulated { x: Vec<f64>, values: Vec<Vec<f64>> },
}

impl OmegaSpec {
    pub fn build(&self) -> Result<OmegaFn<f64>> {
        let kind = match self.clone() {
            OmegaSpec::Constant { beta } => OmegaKind::Constant(beta),
            OmegaSpec::PerState { values } => OmegaKind::PerState(values),
            OmegaSpec::Step { levels, values } => OmegaKind::Step { levels, values },
            OmegaSpec::AffineBand { gamma0, gamma1, d } => OmegaKind::AffineBand { gamma0, gamma1, d },
            OmegaSpec::Tabulated { x, values } => OmegaKind::Tabulated { x, values },
        };
        OmegaFn::new(kind)
    }

    pub fn from_fn(om: &OmegaFn<f64>) -> Self {
        match om.kind().clone() {
            OmegaKind::Constant(beta) => OmegaSpec::Constant { beta },
            OmegaKind::PerState(values) => OmegaSpec::PerState { values },
            OmegaKind::Step { levels, values } => OmegaSpec::Step { levels, values },
            OmegaKind::AffineBand { gamma0, gamma1, d } => OmegaSpec::AffineBand { gamma0, gamma1, d },
            OmegaKind::Tabulated { x, values } => OmegaSpec::Tabulated { x, values },
        }
    }
}

/// The `grid` object: a uniform grid on `[x_min, x_max]` with step `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.h > 0.0) || !self.h.is_finite() {
            bad.push(format!("grid.h = {} must be positive", self.h));
        }
        if !(self.x_max > self.x_min) {
            bad.push(format!("grid.x_max = {} must exceed grid.x_min = {}", self.x_max, self.x_min));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(bad))
        }
    }

    /// Number of nodes, `x_max` included up to rounding.
    pub fn n_nodes(&self) -> usize {
        ((self.x_max - self.x_min) / self.h + 1e-9).floor() as usize + 1
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    n_states: usize,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<OmegaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: MapModel<f64>,
    pub omega: OmegaFn<f64>,
    pub grid: Option<GridSpec>,
    pub seed: Option<u64>,
}

/// Parses and validates a configuration document.
pub fn load_config(text: &[u8]) -> Result<RunConfig> {
    let doc: ConfigDoc = serde_json::from_slice(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let mut bad = Vec::new();
    let n = doc.n_states;
    if doc.sigma.len() != n {
        bad.push(format!("sigma has {} entries but n_states = {n}", doc.sigma.len()));
    }
    if doc.mu.len() != n {
        bad.push(format!("mu has {} entries but n_states = {n}", doc.mu.len()));
    }
    if doc.q.len() != n || doc.q.iter().any(|r| r.len() != n) {
        bad.push(format!("Q must be {n}x{n}"));
    }
    let model = if bad.is_empty() {
        match MapModel::new(Mat::from_rows(&doc.q), doc.sigma.clone(), doc.mu.clone()) {
            Ok(m) => Some(m),
            Err(Error::InvalidModel(list)) => {
                bad.extend(list);
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let omega = match doc.omega.as_ref().map(OmegaSpec::build).transpose() {
        Ok(o) => o.unwrap_or_else(OmegaFn::zero),
        Err(Error::InvalidModel(list)) => {
            bad.extend(list);
            OmegaFn::zero()
        }
        Err(e) => return Err(e),
    };
    if let Err(Error::InvalidModel(list)) = omega.check_states(n) {
        bad.extend(list);
    }
    if let Some(g) = &doc.grid {
        if let Err(Error::InvalidModel(list)) = g.validate() {
            bad.extend(list);
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidModel(bad));
    }
    Ok(RunConfig { model: model.expect("validated"), omega, grid: doc.grid, seed: doc.seed })
}

impl RunConfig {
    /// Serializes back into the document format accepted by [`load_config`].
    pub fn to_json(&self) -> String {
        let doc = ConfigDoc {
            n_states: self.model.n_states(),
            q: self.model.q_gen().to_rows(),
            sigma: self.model.sigma().to_vec(),
            mu: self.model.mu().to_vec(),
            omega: Some(OmegaSpec::from_fn(&self.omega)),
            grid: self.grid,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&doc).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRIFTLESS: &str = r#"{"n_states":2,"Q":[[-0.05,0.05],[0.1,-0.1]],"sigma":[1.0,1.2],"mu":[0.0,0.0]}"#;

    #[test]
    fn driftless_config_parses() {
        let cfg = load_config(DRIFTLESS.as_bytes()).unwrap();
        assert_eq!(cfg.model.n_states(), 2);
        assert_eq!(cfg.model.sigma(), &[1.0, 1.2]);
        assert_eq!(cfg.omega, OmegaFn::zero());
    }

    #[test]
    fn bad_row_named() {
        let txt = r#"{"n_states":2,"Q":[[-0.05,0.06],[0.1,-0.1]],"sigma":[1.0,1.2],"mu":[0,0]}"#;
        let Err(Error::InvalidModel(list)) = load_config(txt.as_bytes()) else { panic!() };
        assert!(list.iter().any(|s| s.contains("row 1")), "{list:?}");
    }

    #[test]
    fn collects_every_violation() {
        let txt = r#"{"n_states":2,"Q":[[-0.05,0.06],[0.1,-0.1]],"sigma":[0.0,1.2],"mu":[0,0],
            "omega":{"kind":"constant","beta":-1}}"#;
        let Err(Error::InvalidModel(list)) = load_config(txt.as_bytes()) else { panic!() };
        assert!(list.len() >= 3, "{list:?}");
    }

    #[test]
    fn roundtrip() {
        let txt = r#"{"n_states":2,"Q":[[-0.1,0.1],[0.3,-0.3]],"sigma":[0.7,0.85],"mu":[0.1,-0.1],
            "omega":{"kind":"step","levels":[4.0],"values":[0.25,0.03]},
            "grid":{"x_min":0,"x_max":10,"h":0.001},"seed":7}"#;
        let cfg = load_config(txt.as_bytes()).unwrap();
        let again = load_config(cfg.to_json().as_bytes()).unwrap();
        assert_eq!(cfg, again);
    }
}
