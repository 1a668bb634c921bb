//! Run configuration shared by every command: a JSON file plus flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::balance::{NewtonOptions, ParamVector, DEFAULT_ALPHA, DEFAULT_C1};
use crate::checks::CheckOptions;
use crate::error::{Error, Result};
use crate::geometry::surface::DEFAULT_R_OUT;
use crate::ld::DEFAULT_MODES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// 2J, the number of interfaces.
    #[serde(rename = "two_J")]
    pub two_big_j: u32,
    pub m: u32,
    pub alpha: f64,
    pub c1: f64,
    #[serde(rename = "N_modes")]
    pub n_modes: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Samples per bridge circumference.
    pub resolution: usize,
    #[serde(rename = "R_out")]
    pub r_out: f64,
    pub output_dir: PathBuf,
    /// Flat initial parameter vector; zero when absent.
    pub seed_pv: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            two_big_j: 1,
            m: 64,
            alpha: DEFAULT_ALPHA,
            c1: DEFAULT_C1,
            n_modes: DEFAULT_MODES,
            tol: 1e-6,
            max_iter: 20,
            resolution: 32,
            r_out: DEFAULT_R_OUT,
            output_dir: PathBuf::from("out"),
            seed_pv: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.two_big_j < 1 {
            return bad(format!("two_J = {} must be at least 1", self.two_big_j));
        }
        if self.m < 2 {
            return bad(format!("m = {} must be at least 2", self.m));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.2) {
            return bad(format!("alpha = {} must lie in (0, 0.2]", self.alpha));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if !(self.c1 > 0.0) {
            return bad(format!("c1 = {} must be positive", self.c1));
        }
        if self.n_modes < 1 || self.max_iter < 1 {
            return bad("N_modes and max_iter must be at least 1".into());
        }
        if self.resolution < 16 {
            return bad(format!("resolution = {} must be at least 16", self.resolution));
        }
        if !(self.r_out > 0.0 && self.r_out.is_finite()) {
            return bad(format!("R_out = {} must be positive", self.r_out));
        }
        self.initial_pv().map(|_| ())
    }

    pub fn initial_pv(&self) -> Result<ParamVector> {
        match &self.seed_pv {
            None => ParamVector::zero(self.two_big_j),
            Some(v) => ParamVector::from_flat(self.two_big_j, v)
                .map_err(|e| Error::Config(format!("seed_pv does not fit two_J = {}: {e}", self.two_big_j))),
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            c1: self.c1,
            n_modes: self.n_modes,
            ..NewtonOptions::default()
        }
    }

    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            alpha: self.alpha,
            c1: self.c1,
            n_modes: self.n_modes,
            tol: self.tol,
            max_iter: self.max_iter,
            resolution: self.resolution,
            r_out: self.r_out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"two_J\":1") && s.contains("\"N_modes\":24") && s.contains("\"R_out\":30"));
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
        let partial: RunConfig = serde_json::from_str(r#"{"m": 8}"#).unwrap();
        assert_eq!(partial.m, 8);
        assert_eq!(partial.two_big_j, 1);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cases = [
            RunConfig { two_big_j: 0, ..Default::default() },
            RunConfig { m: 1, ..Default::default() },
            RunConfig { alpha: 0.0, ..Default::default() },
            RunConfig { alpha: 0.25, ..Default::default() },
            RunConfig { tol: 0.0, ..Default::default() },
            RunConfig { seed_pv: Some(vec![1.0; 3]), ..Default::default() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"mm": 8}"#).is_err());
    }
}
