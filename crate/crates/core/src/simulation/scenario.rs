use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which covariates drive exposure or outcome generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateSet {
    /// Untransformed standard-normal draws (correct specification).
    Original,
    /// Kang–Schafer transformed covariates (what estimators see).
    Observed,
}

/// Exposure-group fixed effects, one per (arm, status).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaGroup {
    pub att_treated: f64,
    pub att_control: f64,
    pub atn_neighbor: f64,
    pub atn_control: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub name: String,
    pub n: usize,
    pub n_m: usize,
    pub exposure_covariates: CovariateSet,
    pub outcome_covariates: CovariateSet,
    /// Intercept, then X1, X2, X3 and X4 at m = 1.
    pub beta_t: Vec<f64>,
    pub beta_n: Vec<f64>,
    pub gamma_m: Vec<f64>,
    pub gamma_t: f64,
    /// λ_{0m}; the post-period loading is λ_{1m} = 2·λ_{0m}.
    pub lambda_0m: Vec<f64>,
    pub tau_att_m: Vec<f64>,
    pub tau_atn_star_m: Vec<f64>,
    /// Share of units assigned to the ATT comparison.
    pub att_share: f64,
    pub alpha_group: AlphaGroup,
    pub seed: u64,
}

pub const PRESET_NAMES: [&str; 12] = [
    "1a", "1b", "1c", "1d", "2a", "2b", "2c", "2d", "3a", "3b", "3c", "3d",
];

fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "1a" => include_str!("../../presets/1a.toml"),
        "1b" => include_str!("../../presets/1b.toml"),
        "1c" => include_str!("../../presets/1c.toml"),
        "1d" => include_str!("../../presets/1d.toml"),
        "2a" => include_str!("../../presets/2a.toml"),
        "2b" => include_str!("../../presets/2b.toml"),
        "2c" => include_str!("../../presets/2c.toml"),
        "2d" => include_str!("../../presets/2d.toml"),
        "3a" => include_str!("../../presets/3a.toml"),
        "3b" => include_str!("../../presets/3b.toml"),
        "3c" => include_str!("../../presets/3c.toml"),
        "3d" => include_str!("../../presets/3d.toml"),
        _ => return None,
    })
}

impl SimulationScenario {
    pub fn preset(name: &str) -> Result<Self> {
        let src = preset_source(name).ok_or_else(|| Error::UnknownScenario(name.to_string()))?;
        Self::from_toml(src)
    }

    pub fn all_presets() -> Vec<Self> {
        PRESET_NAMES
            .iter()
            .map(|n| Self::preset(n).expect("bundled preset parses"))
            .collect()
    }

    pub fn from_toml(src: &str) -> Result<Self> {
        let s: SimulationScenario =
            toml::from_str(src).map_err(|e| Error::ScenarioFormat(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ScenarioFormat(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ScenarioFormat(format!("{}: {msg}", self.name)));
        if self.n < 8 || self.n_m == 0 {
            return bad(format!("n = {} and n_m = {} too small", self.n, self.n_m));
        }
        for (label, v) in [
            ("gamma_m", &self.gamma_m),
            ("lambda_0m", &self.lambda_0m),
            ("tau_att_m", &self.tau_att_m),
            ("tau_atn_star_m", &self.tau_atn_star_m),
        ] {
            if v.len() != self.n_m {
                return bad(format!("{label} has {} entries, n_m = {}", v.len(), self.n_m));
            }
        }
        for (label, v) in [("beta_t", &self.beta_t), ("beta_n", &self.beta_n)] {
            if v.len() != 5 {
                return bad(format!("{label} needs 5 entries (intercept + 4 covariates)"));
            }
        }
        if !(self.att_share > 0.0 && self.att_share < 1.0) {
            return bad("att_share must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Same scenario with every treatment effect set to zero.
    pub fn without_effects(&self) -> Self {
        SimulationScenario {
            tau_att_m: vec![0.0; self.n_m],
            tau_atn_star_m: vec![0.0; self.n_m],
            ..self.clone()
        }
    }

    /// Size of the ATT comparison: round(att_share · n).
    pub fn att_arm_size(&self) -> usize {
        (self.att_share * self.n as f64).round() as usize
    }
}
