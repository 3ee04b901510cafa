//! Run configuration file.
//!
//! ```toml
//! [model]
//! kind = "hidden"
//! width = 128
//!
//! [train]
//! epochs = 10
//! learning_rate = 0.001
//! fixed_priors = [0.2, 0.2, 0.1]
//! ```
//!
//! Both tables and every key are optional; missing values take the library
//! defaults.

use std::path::Path;

use crisp::{Architecture, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Architecture,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("run config is always representable")
    }
}
