//! Run configuration: defaults, JSON files and per-name tolerance overrides.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{build_model, HamiltonianModel, DEFAULT_SAMPLES, MAX_DT, MIN_WINDOW};
use crate::error::{Error, Result};
use crate::termalg::MAX_REPORT_CLASS;

/// Named tolerances and their defaults.
pub const TOLERANCES: [(&str, f64); 8] = [
    ("norm", 1e-12),
    ("linearity", 1e-12),
    ("inner", 1e-12),
    ("exact_fidelity", 1e-9),
    ("exact_leakage", 1e-9),
    ("exact_norm", 1e-9),
    ("subsystem", 1e-9),
    ("numeric", 1e-6),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "D")]
    pub window: usize,
    pub epsilon: f64,
    pub dt: f64,
    pub t_max: f64,
    pub samples: usize,
    pub class_bound: usize,
    /// Time after which the interaction is switched off; `null` keeps it on.
    pub gate_time: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            window: 32,
            epsilon: 1e-3,
            dt: 0.005,
            t_max: 1.5,
            samples: DEFAULT_SAMPLES,
            class_bound: 2,
            gate_time: Some(1.0),
            tolerances: BTreeMap::new(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.window < MIN_WINDOW || !self.window.is_multiple_of(2) {
            return bad(format!(
                "D = {} must be even and at least {MIN_WINDOW}",
                self.window
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon = {} must lie in (0, 0.5)", self.epsilon));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return bad(format!("dt = {} must lie in (0, {MAX_DT}]", self.dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max = {} must be positive", self.t_max));
        }
        if self.samples < 2 {
            return bad(format!("samples = {} must be at least 2", self.samples));
        }
        if self.class_bound > MAX_REPORT_CLASS {
            return bad(format!(
                "class_bound = {} exceeds {MAX_REPORT_CLASS}",
                self.class_bound
            ));
        }
        if let Some(g) = self.gate_time {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gate_time = {g} must be positive"));
            }
        }
        for (name, &value) in &self.tolerances {
            if !TOLERANCES.iter().any(|(n, _)| n == name) {
                return bad(format!("unknown tolerance '{name}'"));
            }
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("tolerance {name} = {value} must be positive"));
            }
        }
        Ok(())
    }

    /// Override if present, otherwise the default.
    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            TOLERANCES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|&(_, v)| v)
                .unwrap_or_else(|| panic!("unknown tolerance {name}"))
        })
    }

    pub fn model(&self) -> Result<HamiltonianModel> {
        build_model(self.window)?.with_gate_time(self.gate_time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!(
            (c.window, c.epsilon, c.dt, c.t_max, c.class_bound),
            (32, 1e-3, 0.005, 1.5, 2)
        );
        assert_eq!(c.tolerance("numeric"), 1e-6);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = Config::from_json(r#"{"D": 16, "tolerances": {"numeric": 1e-5}}"#).unwrap();
        assert_eq!(c.window, 16);
        assert_eq!(c.epsilon, 1e-3);
        assert_eq!(c.tolerance("numeric"), 1e-5);
        assert_eq!(c.tolerance("norm"), 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            r#"{"D": 7}"#,
            r#"{"D": 6}"#,
            r#"{"epsilon": 0.5}"#,
            r#"{"dt": 0.02}"#,
            r#"{"tolerances": {"norm": -1}}"#,
            r#"{"tolerances": {"bogus": 1}}"#,
            r#"{"unknown": 1}"#,
            r#"{"class_bound": 3}"#,
        ] {
            assert!(Config::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn round_trip() {
        let c = Config {
            gate_time: None,
            ..Config::default()
        };
        let back = Config::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
