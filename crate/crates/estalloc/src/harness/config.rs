//! Experiment configuration: a TOML file naming the instance family, link
//! budget, seeds, and training hyperparameters.

use crate::actions::Scenario;
use crate::env::RewardTiming;
use crate::error::{Error, Result};
use crate::phy::LinkBudget;
use crate::ppo::TrainConfig;
use sha2::{Digest, Sha256};
use std::path::Path;

fn default_scenarios() -> Vec<u8> {
    vec![1, 2, 3]
}
fn default_channel_states() -> usize {
    8
}
fn default_p_max_dbm() -> f64 {
    23.0
}
fn default_noise_dbm() -> f64 {
    -60.0
}
fn default_payload_bits() -> u32 {
    400
}
fn default_block_len() -> u32 {
    200
}
fn default_plant_dim() -> usize {
    2
}
fn default_rho_range() -> (f64, f64) {
    (1.0, 1.3)
}
fn default_tau_max() -> u32 {
    50
}
fn default_joint_cap() -> usize {
    crate::channel::DEFAULT_JOINT_CAP
}
fn default_eval_seeds() -> Vec<u64> {
    vec![10_001, 10_002, 10_003]
}
fn default_eval_steps() -> usize {
    10_000
}
fn default_reward_timing() -> RewardTiming {
    RewardTiming::PostUpdate
}

/// Everything a full run needs: instance family, link budget, seeds, and the
/// `[train]` table of hyperparameters. Every field except the sizes and seeds
/// has a default.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub n_sensors: usize,
    pub m_channels: usize,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<u8>,
    /// Number of per-channel fading states H.
    #[serde(default = "default_channel_states")]
    pub channel_states: usize,
    #[serde(default = "default_p_max_dbm")]
    pub p_max_dbm: f64,
    #[serde(default = "default_noise_dbm")]
    pub noise_dbm: f64,
    #[serde(default = "default_payload_bits")]
    pub payload_bits: u32,
    #[serde(default = "default_block_len")]
    pub block_len_symbols: u32,
    #[serde(default = "default_plant_dim")]
    pub plant_dim: usize,
    /// Plant spectral radii are drawn uniformly from this range.
    #[serde(default = "default_rho_range")]
    pub rho_range: (f64, f64),
    #[serde(default = "default_tau_max")]
    pub tau_max: u32,
    /// Largest joint channel space the stability gate will materialize.
    #[serde(default = "default_joint_cap")]
    pub joint_cap: usize,
    pub instance_seed: u64,
    pub train_seed: u64,
    #[serde(default = "default_eval_seeds")]
    pub eval_seeds: Vec<u64>,
    #[serde(default = "default_eval_steps")]
    pub eval_steps: usize,
    #[serde(default = "default_reward_timing")]
    pub reward_timing: RewardTiming,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    /// Reads and validates a TOML config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 || self.m_channels == 0 {
            return Err(Error::InvalidConfig("need at least one sensor and one channel".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("scenarios list is empty".into()));
        }
        let mut seen = [false; 4];
        for &s in &self.scenarios {
            Scenario::from_number(s)?;
            if seen[s as usize] {
                return Err(Error::InvalidConfig(format!("scenario {s} listed twice")));
            }
            seen[s as usize] = true;
        }
        if seen[1] && self.m_channels > self.n_sensors {
            return Err(Error::InvalidConfig(
                "the orthogonal scenario needs at least as many sensors as channels".into(),
            ));
        }
        if self.channel_states == 0 {
            return Err(Error::InvalidConfig("need at least one channel state".into()));
        }
        if self.plant_dim == 0 {
            return Err(Error::InvalidConfig("plant dimension must be positive".into()));
        }
        if !(self.rho_range.0 > 0.0 && self.rho_range.1 >= self.rho_range.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid spectral radius range {:?}",
                self.rho_range
            )));
        }
        if self.tau_max == 0 {
            return Err(Error::InvalidConfig("tau_max must be at least 1".into()));
        }
        if self.eval_seeds.is_empty() || self.eval_steps == 0 {
            return Err(Error::InvalidConfig("need eval seeds and a positive step count".into()));
        }
        self.budget()?;
        self.train.validate()
    }

    /// The link budget in linear units.
    pub fn budget(&self) -> Result<LinkBudget> {
        LinkBudget::from_dbm(
            self.p_max_dbm,
            self.noise_dbm,
            self.payload_bits,
            self.block_len_symbols,
        )
    }

    /// Power-gain ladder: H decades ending at 1e-1, so H = 8 gives
    /// {1e-8, 1e-7, ..., 1e-1}.
    pub fn power_gain_values(&self) -> Vec<f64> {
        let h = self.channel_states as i32;
        (1..=h).map(|k| 10f64.powi(k - h - 1)).collect()
    }

    /// SHA-256 of the canonical JSON serialization, as lowercase hex. Stamped
    /// into instances and result tables so outputs can be traced to the exact
    /// configuration that produced them.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        "n_sensors = 6\nm_channels = 3\ninstance_seed = 1\ntrain_seed = 2\n"
    }

    #[test]
    fn defaults_fill_every_optional_field() {
        let cfg: ExperimentConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.scenarios, vec![1, 2, 3]);
        assert_eq!(cfg.channel_states, 8);
        assert_eq!(cfg.rho_range, (1.0, 1.3));
        assert_eq!(cfg.train.steps_per_episode, 128);
        assert_eq!(cfg.train.episodes, None);
        assert_eq!(cfg.eval_steps, 10_000);
    }

    #[test]
    fn gain_ladder_spans_decades_up_to_one_tenth() {
        let cfg: ExperimentConfig = toml::from_str(minimal_toml()).unwrap();
        let ladder = cfg.power_gain_values();
        assert_eq!(ladder.len(), 8);
        assert!((ladder[0] - 1e-8).abs() < 1e-22);
        assert!((ladder[7] - 1e-1).abs() < 1e-15);
        for w in ladder.windows(2) {
            assert!((w[1] / w[0] - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a: ExperimentConfig = toml::from_str(minimal_toml()).unwrap();
        let b: ExperimentConfig = toml::from_str(minimal_toml()).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let mut c = a.clone();
        c.train_seed = 3;
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg: ExperimentConfig = toml::from_str(minimal_toml()).unwrap();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg.hash().unwrap(), back.hash().unwrap());
    }

    #[test]
    fn validation_rejects_bad_scenario_lists() {
        let mut cfg: ExperimentConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.scenarios = vec![1, 1];
        assert!(cfg.validate().is_err());
        cfg.scenarios = vec![4];
        assert!(cfg.validate().is_err());
        cfg.scenarios = vec![1];
        cfg.m_channels = 9;
        assert!(cfg.validate().is_err());
    }
}
