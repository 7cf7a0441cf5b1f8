//! Session configuration (TOML).
//!
//! ```toml
//! master_seed = 7
//! n_blocks = 8
//!
//! [coupling]
//! coupling_stiffness_n = 2000.0
//!
//! [agent_defaults]
//! force_gain_n = 0.5
//!
//! [[dyads]]
//! member1 = { sigma_pct = 4.0 }
//! member2 = { sigma_pct = 6.0, bias_pct = 0.5 }
//! ```
//!
//! Member tables are layered over `agent_defaults`, which is layered over
//! the built-in agent defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agents::AgentProfile;
use crate::analytics::DEFAULT_CROSSING_THRESHOLDS;
use crate::coupling_sim::CouplingConfig;
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    master_seed: Option<u64>,
    #[serde(default = "default_blocks")]
    n_blocks: u32,
    #[serde(default)]
    workers: usize,
    output_dir: Option<PathBuf>,
    thresholds: Option<Vec<f64>>,
    #[serde(default)]
    coupling: CouplingConfig,
    #[serde(default)]
    agent_defaults: toml::Table,
    #[serde(default)]
    dyads: Vec<RawDyad>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDyad {
    #[serde(default)]
    member1: toml::Table,
    #[serde(default)]
    member2: toml::Table,
}

fn default_blocks() -> u32 {
    crate::trials::BLOCKS_PER_SESSION
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub master_seed: u64,
    pub n_blocks: u32,
    /// Worker threads for trial simulation; 0 picks one per core.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub thresholds: Vec<f64>,
    pub coupling: CouplingConfig,
    pub dyads: Vec<[AgentProfile; 2]>,
}

fn profile_from(defaults: &toml::Table, overrides: &toml::Table, label: &str) -> Result<AgentProfile> {
    let mut merged = defaults.clone();
    for (k, v) in overrides {
        merged.insert(k.clone(), v.clone());
    }
    let profile: AgentProfile = toml::Value::Table(merged)
        .try_into()
        .map_err(|e| Error::Config(format!("{label}: {e}")))?;
    profile
        .validate()
        .map_err(|e| Error::Config(format!("{label}: {e}")))?;
    Ok(profile)
}

impl SessionConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let master_seed = raw
            .master_seed
            .ok_or_else(|| Error::Config("master_seed is required for reproducible runs".into()))?;
        if raw.n_blocks == 0 {
            return Err(Error::Config("n_blocks must be at least 1".into()));
        }
        raw.coupling
            .validate()
            .map_err(|e| Error::Config(format!("coupling: {e}")))?;
        let thresholds = raw.thresholds.unwrap_or_else(|| DEFAULT_CROSSING_THRESHOLDS.to_vec());
        validate_thresholds(&thresholds).map_err(|e| Error::Config(e.to_string()))?;
        if raw.dyads.is_empty() {
            return Err(Error::Config("at least one [[dyads]] entry is required".into()));
        }
        let dyads = raw
            .dyads
            .iter()
            .enumerate()
            .map(|(i, d)| {
                Ok([
                    profile_from(&raw.agent_defaults, &d.member1, &format!("dyad {} member1", i + 1))?,
                    profile_from(&raw.agent_defaults, &d.member2, &format!("dyad {} member2", i + 1))?,
                ])
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            master_seed,
            n_blocks: raw.n_blocks,
            workers: raw.workers,
            output_dir: raw.output_dir,
            thresholds,
            coupling: raw.coupling,
            dyads,
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::invalid("threshold list is empty"));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::invalid(format!("threshold {t} outside (0, 1)")));
    }
    Ok(())
}
