use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::DEFAULT_TOLERANCE_KW;
use crate::market::{ClearingConfig, CounterpartyOrder, FeasibilityPolicy};

use super::LoadError;

/// Policy names as they appear on the command line and in config files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicySelector {
    Individual,
    Cumulative,
    Both,
    #[default]
    All,
    Scenarios,
}

impl FromStr for PolicySelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "individual" => PolicySelector::Individual,
            "cumulative" => PolicySelector::Cumulative,
            "both" => PolicySelector::Both,
            "all" => PolicySelector::All,
            "scenarios" => PolicySelector::Scenarios,
            other => {
                return Err(format!(
                    "unknown policy {other:?} (expected individual, cumulative, both, all or scenarios)"
                ))
            }
        })
    }
}

impl fmt::Display for PolicySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicySelector::Individual => "individual",
            PolicySelector::Cumulative => "cumulative",
            PolicySelector::Both => "both",
            PolicySelector::All => "all",
            PolicySelector::Scenarios => "scenarios",
        })
    }
}

/// Scenario file: a list of activation subsets named by match id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenarios: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub policy: PolicySelector,
    /// Scenario file, required by the scenarios policy. Relative paths in a
    /// config file resolve against the file's directory.
    pub scenarios: Option<PathBuf>,
    pub max_combinations: usize,
    pub tolerance_kw: f64,
    pub order: CounterpartyOrder,
    pub parallel: bool,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            policy: PolicySelector::All,
            scenarios: None,
            max_combinations: 20,
            tolerance_kw: DEFAULT_TOLERANCE_KW,
            order: CounterpartyOrder::Fifo,
            parallel: true,
        }
    }
}

impl MarketConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: MarketConfig = toml::from_str(&text).map_err(|e| LoadError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let (Some(scenarios), Some(dir)) = (&config.scenarios, path.parent()) {
            if scenarios.is_relative() {
                config.scenarios = Some(dir.join(scenarios));
            }
        }
        Ok(config)
    }

    pub fn with_policy(policy: PolicySelector) -> Self {
        MarketConfig {
            policy,
            ..Default::default()
        }
    }

    /// Resolves the policy (reading the scenario file if needed) and validates.
    pub fn to_clearing(&self) -> Result<ClearingConfig, LoadError> {
        let policy = match self.policy {
            PolicySelector::Individual => FeasibilityPolicy::Individual,
            PolicySelector::Cumulative => FeasibilityPolicy::Cumulative,
            PolicySelector::Both => FeasibilityPolicy::IndividualAndCumulative,
            PolicySelector::All => FeasibilityPolicy::AllCombinations,
            PolicySelector::Scenarios => {
                let path = self
                    .scenarios
                    .as_ref()
                    .ok_or_else(|| LoadError::Config("the scenarios policy needs a scenario file".into()))?;
                let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
                    path: path.clone(),
                    source,
                })?;
                let file: ScenarioFile = toml::from_str(&text).map_err(|e| LoadError::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                FeasibilityPolicy::Scenarios {
                    scenarios: file.scenarios,
                }
            }
        };
        let config = ClearingConfig {
            policy,
            order: self.order,
            max_combinations: self.max_combinations,
            tolerance_kw: self.tolerance_kw,
            parallel: self.parallel,
        };
        config.validate().map_err(|e| LoadError::Config(e.to_string()))?;
        Ok(config)
    }
}
