//! Top-level run configuration, loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::mac::MacConfig;
use crate::metrics::MetricsConfig;
use crate::scenario::ScenarioConfig;
use crate::topology::{TaConfig, TaPolicy};
use crate::traffic::TrafficConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Stop after this many slots instead of at the end of the bus route.
    pub duration_slots: Option<u64>,
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub mac: MacConfig,
    pub traffic: TrafficConfig,
    pub ta: TaConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            duration_slots: None,
            scenario: ScenarioConfig::default(),
            channel: ChannelConfig::default(),
            mac: MacConfig::default(),
            traffic: TrafficConfig::default(),
            ta: TaConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn with_policy(policy: TaPolicy) -> Self {
        let mut cfg = Self::default();
        cfg.ta.policy = policy;
        cfg
    }

    /// Parses and validates; an empty document yields the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes")
    }

    /// Reports every violation at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.scenario.validate(&mut errors);
        self.channel.validate(&mut errors);
        self.mac.validate(&mut errors);
        self.traffic.validate(&mut errors);
        self.ta.validate(&mut errors);
        self.metrics.validate(&mut errors);
        if self.duration_slots == Some(0) {
            errors.push("duration_slots must be > 0 when set".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}
