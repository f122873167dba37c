//! Concrete problem instances: plants, fading chains, and the link budget,
//! drawn reproducibly from a config seed and kept only if the stability
//! certificate's sufficient condition holds.
//!
//! All scenarios generated from one seed share identical plant and chain
//! draws: the gain ladder consumes no randomness, the combining scenario's
//! amplitude ladder is the square root of the power ladder (so the
//! stability gate sees the same power-equivalent gains), and the draw order
//! is fixed.

use crate::actions::Scenario;
use crate::channel::{ChannelStateSpace, GainKind, MarkovChannelModel};
use crate::env::{Env, RewardTiming};
use crate::error::{Error, Result};
use crate::estimation::{generate_random_plant, PlantModel, SteadyEstimator};
use crate::harness::config::ExperimentConfig;
use crate::phy::LinkBudget;
use crate::rng::{stream, STREAM_INSTANCE};
use crate::stability::{check_stability, StabilityReport};
use nalgebra::DMatrix;
use std::path::Path;

/// Instance file schema version.
pub const INSTANCE_FORMAT_VERSION: u32 = 1;

/// How many joint draws the stability gate will reject before giving up.
pub const RESAMPLE_CAP: usize = 10_000;

/// Whether the stability gate ran for this instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityGate {
    /// Draws were resampled until the sufficient condition held.
    Enforced,
    /// The joint channel space exceeded the cap, so the first draw was kept
    /// uncertified.
    SkippedJointSpaceTooLarge,
}

/// A fully specified, serializable problem instance.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Instance {
    pub format_version: u32,
    pub scenario: u8,
    pub instance_seed: u64,
    pub gain_kind: GainKind,
    pub budget: LinkBudget,
    /// Channel value ladder in the units of `gain_kind`.
    pub channel_values: Vec<f64>,
    pub m_channels: usize,
    pub tau_max: u32,
    pub joint_cap: usize,
    pub reward_timing: RewardTiming,
    pub plants: Vec<PlantModel>,
    /// Spectral radius drawn for each plant.
    pub drawn_radii: Vec<f64>,
    /// Per-sensor, per-channel fading transition matrices.
    pub transitions: Vec<Vec<DMatrix<f64>>>,
    /// Certificate of the kept draw, when the gate ran.
    pub stability: Option<StabilityReport>,
    pub stability_gate: StabilityGate,
    /// Draws rejected before this one was kept.
    pub resamples: usize,
    pub config_hash: String,
}

/// Draws an instance for one scenario from `cfg.instance_seed`, resampling
/// until the sufficient stability condition holds (when the joint space fits
/// under the cap).
pub fn gen_instance(cfg: &ExperimentConfig, scenario: Scenario) -> Result<Instance> {
    cfg.validate()?;
    let budget = cfg.budget()?;
    let power_values = cfg.power_gain_values();
    let (gain_kind, channel_values): (GainKind, Vec<f64>) = match scenario {
        Scenario::IrcNoma => {
            (GainKind::Amplitude, power_values.iter().map(|g| g.sqrt()).collect())
        }
        _ => (GainKind::Power, power_values),
    };
    let space = ChannelStateSpace::new(channel_values.clone(), cfg.m_channels)?;
    let gate_enforced = space.joint_size_u128() <= cfg.joint_cap as u128;
    let config_hash = cfg.hash()?;
    let mut rng = stream(cfg.instance_seed, STREAM_INSTANCE);

    for attempt in 0..RESAMPLE_CAP {
        let mut plants = Vec::with_capacity(cfg.n_sensors);
        let mut drawn_radii = Vec::with_capacity(cfg.n_sensors);
        for _ in 0..cfg.n_sensors {
            let (plant, radius) = generate_random_plant(cfg.plant_dim, cfg.rho_range, &mut rng)?;
            plants.push(plant);
            drawn_radii.push(radius);
        }
        let chains: Vec<MarkovChannelModel> = (0..cfg.n_sensors)
            .map(|_| MarkovChannelModel::generate_random(space.h(), cfg.m_channels, &mut rng))
            .collect::<Result<_>>()?;

        let (stability, stability_gate) = if gate_enforced {
            let report =
                check_stability(&plants, &chains, &space, gain_kind, &budget, cfg.joint_cap)?;
            if !report.sufficient_holds {
                continue;
            }
            (Some(report), StabilityGate::Enforced)
        } else {
            (None, StabilityGate::SkippedJointSpaceTooLarge)
        };

        return Ok(Instance {
            format_version: INSTANCE_FORMAT_VERSION,
            scenario: scenario.number(),
            instance_seed: cfg.instance_seed,
            gain_kind,
            budget,
            channel_values,
            m_channels: cfg.m_channels,
            tau_max: cfg.tau_max,
            joint_cap: cfg.joint_cap,
            reward_timing: cfg.reward_timing,
            plants,
            drawn_radii,
            transitions: chains.into_iter().map(|c| c.per_channel().to_vec()).collect(),
            stability,
            stability_gate,
            resamples: attempt,
            config_hash,
        });
    }
    Err(Error::ResampleCapExceeded(RESAMPLE_CAP))
}

/// Reassembles the environment an instance describes. `seed` addresses the
/// environment's fading and decoding streams.
pub fn build_env(instance: &Instance, seed: u64) -> Result<Env> {
    let space = ChannelStateSpace::new(instance.channel_values.clone(), instance.m_channels)?;
    let estimators: Vec<SteadyEstimator> = instance
        .plants
        .iter()
        .map(|p| SteadyEstimator::new(p.clone(), instance.tau_max))
        .collect::<Result<_>>()?;
    let chains: Vec<MarkovChannelModel> = instance
        .transitions
        .iter()
        .map(|per| MarkovChannelModel::new(per.clone()))
        .collect::<Result<_>>()?;
    Env::new(
        Scenario::from_number(instance.scenario)?,
        instance.budget.clone(),
        space,
        instance.gain_kind,
        estimators,
        chains,
        instance.tau_max,
        instance.reward_timing,
        seed,
    )
}

/// Re-runs the stability certificate on a stored instance (independent of any
/// report stored inside it).
pub fn recheck_stability(instance: &Instance) -> Result<StabilityReport> {
    let space = ChannelStateSpace::new(instance.channel_values.clone(), instance.m_channels)?;
    let chains: Vec<MarkovChannelModel> = instance
        .transitions
        .iter()
        .map(|per| MarkovChannelModel::new(per.clone()))
        .collect::<Result<_>>()?;
    check_stability(
        &instance.plants,
        &chains,
        &space,
        instance.gain_kind,
        &instance.budget,
        instance.joint_cap,
    )
}

/// Writes an instance as pretty JSON.
pub fn save_instance(path: &Path, instance: &Instance) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(instance)?)?;
    Ok(())
}

/// Reads an instance back, checking the schema version.
pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    let instance: Instance = serde_json::from_str(&text)?;
    if instance.format_version != INSTANCE_FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "instance format {} (expected {INSTANCE_FORMAT_VERSION})",
            instance.format_version
        )));
    }
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg: ExperimentConfig =
            toml::from_str("n_sensors = 3\nm_channels = 2\ninstance_seed = 5\ntrain_seed = 6\n")
                .unwrap();
        cfg.channel_states = 3;
        cfg.plant_dim = 2;
        cfg
    }

    #[test]
    fn generation_is_deterministic_and_gated() {
        let cfg = small_cfg();
        let a = gen_instance(&cfg, Scenario::Oma).unwrap();
        let b = gen_instance(&cfg, Scenario::Oma).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.stability_gate, StabilityGate::Enforced);
        let report = a.stability.as_ref().expect("gate ran");
        assert!(report.sufficient_holds);
        assert!(report.necessary_holds, "sufficient implies necessary");
    }

    #[test]
    fn scenarios_share_plant_and_chain_draws() {
        let cfg = small_cfg();
        let oma = gen_instance(&cfg, Scenario::Oma).unwrap();
        let sic = gen_instance(&cfg, Scenario::SicNoma).unwrap();
        let irc = gen_instance(&cfg, Scenario::IrcNoma).unwrap();
        assert_eq!(oma.plants, sic.plants);
        assert_eq!(oma.plants, irc.plants);
        assert_eq!(oma.transitions, irc.transitions);
        assert_eq!(oma.resamples, irc.resamples);
        // Amplitude ladder squares back onto the power ladder.
        for (amp, pow) in irc.channel_values.iter().zip(&oma.channel_values) {
            assert!((amp * amp - pow).abs() <= 1e-15 * pow.max(1.0));
        }
        assert_eq!(irc.gain_kind, GainKind::Amplitude);
        assert_eq!(oma.gain_kind, GainKind::Power);
    }

    #[test]
    fn instance_round_trips_through_json_and_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg();
        let instance = gen_instance(&cfg, Scenario::SicNoma).unwrap();
        let path = dir.path().join("instance.json");
        save_instance(&path, &instance).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(instance.plants, back.plants);
        assert_eq!(instance.transitions, back.transitions);

        let mut env = build_env(&back, 77).unwrap();
        assert_eq!(env.n_sensors(), 3);
        assert_eq!(env.m_channels(), 2);
        // A full-idle action must be steppable right away.
        let action = crate::actions::ResourceAction::AssignPower {
            channel_of: vec![None; 3],
            power_mw: vec![0.0; 3],
        };
        env.step(&action).unwrap();

        let recheck = recheck_stability(&back).unwrap();
        let stored = instance.stability.unwrap();
        assert_eq!(recheck.sufficient_holds, stored.sufficient_holds);
        assert!((recheck.sufficient_margin - stored.sufficient_margin).abs() < 1e-12);
    }

    #[test]
    fn oversized_joint_space_skips_the_gate() {
        let mut cfg = small_cfg();
        cfg.channel_states = 8;
        cfg.m_channels = 2;
        cfg.joint_cap = 10; // 8^2 = 64 > 10
        let instance = gen_instance(&cfg, Scenario::Oma).unwrap();
        assert_eq!(instance.stability_gate, StabilityGate::SkippedJointSpaceTooLarge);
        assert!(instance.stability.is_none());
        assert_eq!(instance.resamples, 0);
    }
}
