use std::path::{Path, PathBuf};

use fdlimit::parabolic::AnnulusGrid;
use fdlimit::verify::DEFAULT_SEED;
use fdlimit::Params;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub profile: ProfileBlock,
    #[serde(default)]
    pub farfield: FarfieldBlock,
    #[serde(default)]
    pub parabolic: ParabolicBlock,
    #[serde(default)]
    pub sweeps: SweepBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Profile integrator tolerance.
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: Params::default(),
            profile: ProfileBlock::default(),
            farfield: FarfieldBlock::default(),
            parabolic: ParabolicBlock::default(),
            sweeps: SweepBlock::default(),
            verify: VerifyBlock::default(),
            out: None,
            seed: DEFAULT_SEED,
            tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileBlock {
    pub rho_max: f64,
    pub rho0: Option<f64>,
}

impl Default for ProfileBlock {
    fn default() -> Self {
        Self {
            rho_max: 10.0,
            rho0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FarfieldBlock {
    pub r_min: f64,
    pub r_max: f64,
    pub samples: usize,
}

impl Default for FarfieldBlock {
    fn default() -> Self {
        Self {
            r_min: 10.0,
            r_max: 1000.0,
            samples: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Lower,
    Upper,
    Geomean,
    Barenblatt,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParabolicBlock {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Defaults to the standard annulus for the parameters.
    pub grid: Option<AnnulusGrid>,
    pub init: InitKind,
    /// Barenblatt shape parameter.
    pub k: f64,
    /// Node values for `init = file`, one per line.
    pub init_file: Option<PathBuf>,
}

impl Default for ParabolicBlock {
    fn default() -> Self {
        Self {
            lambda1: 2.0,
            lambda2: 1.0,
            grid: None,
            init: InitKind::Geomean,
            k: 1.0,
            init_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub elliptic_m: Vec<f64>,
    pub annulus: (f64, f64),
    pub parabolic_m: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            elliptic_m: vec![0.2, 0.1, 0.05, 0.025],
            annulus: (0.5, 2.0),
            parabolic_m: vec![0.2, 0.1, 0.05],
        }
    }
}

/// Criteria to run; `only` takes precedence over `skip`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    pub only: Option<Vec<u8>>,
    pub skip: Vec<u8>,
}

impl VerifyBlock {
    pub fn selected(&self) -> Vec<u8> {
        let all = 1..=10u8;
        match &self.only {
            Some(ids) => all.filter(|i| ids.contains(i)).collect(),
            None => all.filter(|i| !self.skip.contains(i)).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    #[cfg(test)]
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.params.m = 0.125;
        c.parabolic.grid = Some(AnnulusGrid::default_for(&c.params));
        c.parabolic.init = InitKind::Barenblatt;
        c.verify.only = Some(vec![1, 5]);
        c.tol = Some(1e-11);
        c.out = Some("results".into());
        assert_eq!(RunConfig::parse(&c.emit()).unwrap(), c);
        assert_eq!(RunConfig::parse(&RunConfig::default().emit()).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = RunConfig::parse(r#"{"seed": 3}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.params, Params::default());
    }

    #[test]
    fn missing_param_key_is_named() {
        let text = r#"{"params": {"n": 3, "m": 0.0, "rho1": 1.0, "lambda": 1.0, "T": 1.0}}"#;
        let err = RunConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
    }

    #[test]
    fn selection() {
        let mut v = VerifyBlock::default();
        assert_eq!(v.selected().len(), 10);
        v.skip = vec![9, 10];
        assert_eq!(v.selected(), (1..=8).collect::<Vec<_>>());
        v.only = Some(vec![3]);
        assert_eq!(v.selected(), vec![3]);
    }
}
