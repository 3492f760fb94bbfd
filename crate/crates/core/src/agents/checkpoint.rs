use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Agent, Algorithm};
use crate::config::Config;
use crate::env::EnvConfig;
use crate::{Error, Result};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// JSON container for a learner: networks, optimizer moments, generator state
/// and the full resolved config, tagged with the environment hash it was
/// trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub env_hash: String,
    pub config_hash: String,
    pub env_steps: u64,
    pub episodes: u64,
    pub config: Config,
    pub agent: Agent,
}

impl Checkpoint {
    pub fn new(config: &Config, agent: Agent, env_steps: u64, episodes: u64) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            algorithm: agent.algorithm(),
            env_hash: config.env_config().hash(),
            config_hash: config.hash(),
            env_steps,
            episodes,
            config: config.clone(),
            agent,
        }
    }

    /// Writes atomically: a crash mid-write never leaves a truncated file behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint =
            serde_json::from_slice(&bytes).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        if ck.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "{}: unsupported checkpoint schema {}",
                path.display(),
                ck.schema_version
            )));
        }
        if ck.config.env_config().hash() != ck.env_hash {
            return Err(Error::Serde(format!(
                "{}: stored config does not match stored env hash",
                path.display()
            )));
        }
        Ok(ck)
    }

    /// Refuses to run against an environment other than the training one.
    pub fn check_env(&self, env: &EnvConfig) -> Result<()> {
        let actual = env.hash();
        if actual != self.env_hash {
            return Err(Error::HashMismatch {
                expected: self.env_hash.clone(),
                actual,
            });
        }
        Ok(())
    }
}
