use std::path::Path;

use evsample::lqg::{PlantModel, ResetSystem};
use evsample::sim::SimConfig;
use evsample::stefan::GridOptions;
use serde::Deserialize;

use crate::error::CliError;

/// Contents of the `--config` TOML file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: Option<PlantModel>,
    pub reset_system: Option<ResetSection>,
    #[serde(default)]
    pub bound: BoundSection,
    #[serde(default)]
    pub grid: GridOptions,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub tradeoff: TradeoffSection,
}

/// A reset system given directly, for studies that skip the LQG design.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResetSection {
    #[serde(flatten)]
    pub system: ResetSystem,
    #[serde(default)]
    pub gamma0: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default, rename = "J")]
    pub j: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub h_nom: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub n_reps: Option<usize>,
}

impl SimSection {
    pub fn resolve(&self, seed: Option<u64>) -> SimConfig {
        let d = SimConfig::default();
        SimConfig {
            h_nom: self.h_nom.unwrap_or(d.h_nom),
            horizon: self.horizon.unwrap_or(d.horizon),
            seed: seed.or(self.seed).unwrap_or(d.seed),
            n_reps: self.n_reps.unwrap_or(d.n_reps),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffSection {
    #[serde(default)]
    pub periodic_h: Vec<f64>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default, rename = "J")]
    pub j: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
        match (&cfg.plant, &cfg.reset_system) {
            (Some(_), Some(_)) => {
                Err(CliError::Validation(vec!["give either [plant] or [reset_system], not both".into()]))
            }
            (None, None) => Err(CliError::Validation(vec!["missing [plant] or [reset_system]".into()])),
            _ => Ok(cfg),
        }
    }
}

/// Rejects empty, non-positive or non-finite parameter lists.
pub fn positive_list(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Validation(vec![format!("{name} list is empty")]));
    }
    let bad: Vec<String> = values
        .iter()
        .filter(|v| !(**v > 0.0 && v.is_finite()))
        .map(|v| format!("{name} must be positive, got {v}"))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(bad))
    }
}
