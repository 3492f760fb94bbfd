//! One TOML file, one section per subsystem.
//!
//! Resolution order is defaults, then the file, then `section.key=value`
//! overrides. Every artifact records [`content_hash`] of the configuration it
//! was produced with.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentConfig;
use crate::env::{EnvConfig, RewardConfig};
use crate::kinematics::VesselParams;
use crate::sensor::SensorConfig;
use crate::sweep::SweepConfig;
use crate::trainer::TrainerConfig;
use crate::world::GenConfig;
use crate::{Error, Result};

/// Short hex SHA-256 of the canonical JSON encoding of `value`.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize infallibly");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..12])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub gamma: f64,
    pub horizon: usize,
    pub ego_radius: f64,
    pub rewards: RewardConfig,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        Self {
            gamma: e.gamma,
            horizon: e.horizon,
            ego_radius: e.ego_radius,
            rewards: e.rewards,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub env: EnvSection,
    pub world: GenConfig,
    pub sensor: SensorConfig,
    pub vessel: VesselParams,
    pub agent: AgentConfig,
    pub trainer: TrainerConfig,
    pub sweep: SweepConfig,
}

impl Config {
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            gamma: self.env.gamma,
            horizon: self.env.horizon,
            ego_radius: self.env.ego_radius,
            rewards: self.env.rewards.clone(),
            world: self.world.clone(),
            sensor: self.sensor.clone(),
            vessel: self.vessel,
        }
    }

    pub fn set_env_config(&mut self, e: EnvConfig) {
        self.env = EnvSection {
            gamma: e.gamma,
            horizon: e.horizon,
            ego_radius: e.ego_radius,
            rewards: e.rewards,
        };
        self.world = e.world;
        self.sensor = e.sensor;
        self.vessel = e.vessel;
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config().validate()?;
        self.agent.validate()?;
        self.trainer.validate()?;
        self.sweep.validate()
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }

    /// Resolves defaults, optional file contents and `key.path=value` overrides.
    pub fn resolve(file: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut root = toml::Value::try_from(Config::default()).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(text) = file {
            let parsed: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            merge(&mut root, parsed);
        }
        for ov in overrides {
            apply_override(&mut root, ov)?;
        }
        let cfg: Config = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => None,
        };
        Self::resolve(text.as_deref(), overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let mut cur = root;
    for (i, key) in keys.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{path}`: `{key}` is not a section")))?;
        if i + 1 == keys.len() {
            if !table.contains_key(*key) {
                return Err(Error::Config(format!("override `{path}`: unknown key `{key}`")));
            }
            table.insert(key.to_string(), value);
            return Ok(());
        }
        cur = table
            .get_mut(*key)
            .ok_or_else(|| Error::Config(format!("override `{path}`: unknown section `{key}`")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        let back = Config::resolve(Some(&cfg.to_toml()), &[]).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn precedence_overrides_beat_file_beat_defaults() {
        let file = "[env]\nhorizon = 300\n[vessel]\nmass = 200000.0\n";
        let cfg = Config::resolve(Some(file), &["env.horizon=50".into()]).unwrap();
        assert_eq!(cfg.env.horizon, 50);
        assert_eq!(cfg.vessel.mass, 200_000.0);
        assert_eq!(cfg.vessel.turn_rate, 70.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::resolve(Some("[env]\nhorizn = 3\n"), &[]).is_err());
        assert!(Config::resolve(None, &["env.nope=1".into()]).is_err());
        assert!(Config::resolve(None, &["nosuch.key=1".into()]).is_err());
        assert!(Config::resolve(None, &["garbage".into()]).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(Config::resolve(None, &["vessel.mass=0.0".into()]).is_err());
        assert!(Config::resolve(None, &["env.gamma=1.0".into()]).is_err());
    }

    #[test]
    fn hash_tracks_dt() {
        let a = Config::default();
        let b = Config::resolve(None, &["vessel.dt=0.25".into()]).unwrap();
        assert_ne!(a.env_config().hash(), b.env_config().hash());
    }
}
