use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqg::{build_reset_system, LqgDesign, PlantDims, PlantModel, ResetSystem};

/// Output of the design step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub dimensions: PlantDims,
    pub gamma0: f64,
    pub design: LqgDesign,
    pub reset_system: ResetSystem,
}

impl DesignReport {
    pub fn new(plant: &PlantModel, design: LqgDesign) -> Self {
        Self {
            dimensions: plant.dims(),
            gamma0: design.gamma0,
            reset_system: build_reset_system(plant, &design),
            design,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))
}
