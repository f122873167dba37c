//! The scheduling MDP.
//!
//! State is each sensor's current channel values plus its age of information
//! (slots since the fusion center last decoded it). A step validates the
//! action, runs the scenario's receiver on the current gains, updates ages
//! (success resets to 1, failure increments, capped), pays the negative sum
//! of remote estimation costs, and advances the fading chains.
//!
//! Channel evolution consumes its own random stream at a fixed rate, so two
//! policies evaluated under the same seed face identical fading.

use crate::actions::{ResourceAction, Scenario};
use crate::channel::{ChannelStateSpace, GainKind, MarkovChannelModel};
use crate::error::{Error, Result};
use crate::estimation::SteadyEstimator;
use crate::phy::{irc_sic_receive, oma_receive, sic_receive, DecodeOutcome, LinkBudget};
use crate::rng::{stream, STREAM_ENV_CHANNEL, STREAM_ENV_DECODE};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

/// Relative slack when validating per-sensor powers.
const POWER_SLACK: f64 = 1e-9;

/// When the estimation cost is charged within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardTiming {
    /// Cost of the ages after this step's arrivals (default).
    PostUpdate,
    /// Cost of the ages the step started with.
    PreUpdate,
}

/// Observable MDP state.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpState {
    /// Current channel values, one row per sensor, one column per channel.
    pub gains: DMatrix<f64>,
    /// Age of information per sensor, capped at `tau_max`.
    pub aoi: Vec<u32>,
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Negative sum of per-sensor estimation costs.
    pub reward: f64,
    /// Receiver outcome for this slot.
    pub outcome: DecodeOutcome,
}

/// The N-sensor M-channel scheduling environment.
pub struct Env {
    scenario: Scenario,
    budget: LinkBudget,
    space: ChannelStateSpace,
    kind: GainKind,
    estimators: Vec<SteadyEstimator>,
    channels: Vec<MarkovChannelModel>,
    tau_max: u32,
    reward_timing: RewardTiming,
    state: MdpState,
    channel_rng: ChaCha8Rng,
    decode_rng: ChaCha8Rng,
}

impl Env {
    /// Assembles an environment. `seed` addresses the environment's two
    /// random streams (fading and decoding).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scenario: Scenario,
        budget: LinkBudget,
        space: ChannelStateSpace,
        kind: GainKind,
        estimators: Vec<SteadyEstimator>,
        channels: Vec<MarkovChannelModel>,
        tau_max: u32,
        reward_timing: RewardTiming,
        seed: u64,
    ) -> Result<Self> {
        budget.validate()?;
        let n = estimators.len();
        if n == 0 || channels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} estimators vs {} channel models",
                channels.len()
            )));
        }
        for chain in &channels {
            if chain.m_channels() != space.m_channels || chain.h() != space.h() {
                return Err(Error::DimensionMismatch(
                    "channel model shape disagrees with the state space".into(),
                ));
            }
        }
        if tau_max == 0 {
            return Err(Error::InvalidConfig("tau_max must be at least 1".into()));
        }
        if scenario == Scenario::IrcNoma && kind != GainKind::Amplitude {
            return Err(Error::InvalidConfig(
                "the combining scenario needs amplitude-kind channel values".into(),
            ));
        }
        if scenario != Scenario::IrcNoma && kind != GainKind::Power {
            return Err(Error::InvalidConfig(
                "orthogonal and SIC scenarios need power-kind channel values".into(),
            ));
        }
        let m = space.m_channels;
        let mut env = Env {
            scenario,
            budget,
            space,
            kind,
            estimators,
            channels,
            tau_max,
            reward_timing,
            state: MdpState { gains: DMatrix::zeros(n, m), aoi: vec![0; n] },
            channel_rng: stream(seed, STREAM_ENV_CHANNEL),
            decode_rng: stream(seed, STREAM_ENV_DECODE),
        };
        env.reset();
        Ok(env)
    }

    /// Resets ages to zero and redraws every sensor's joint channel state
    /// uniformly.
    pub fn reset(&mut self) {
        for chain in &mut self.channels {
            chain.reset_uniform(&mut self.channel_rng);
        }
        self.state.aoi = vec![0; self.n_sensors()];
        self.refresh_gains();
    }

    fn refresh_gains(&mut self) {
        for (sensor, chain) in self.channels.iter().enumerate() {
            for (ch, value) in self.space.gains_of_digits(chain.state()).into_iter().enumerate() {
                self.state.gains[(sensor, ch)] = value;
            }
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.estimators.len()
    }

    pub fn m_channels(&self) -> usize {
        self.space.m_channels
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn space(&self) -> &ChannelStateSpace {
        &self.space
    }

    pub fn gain_kind(&self) -> GainKind {
        self.kind
    }

    pub fn tau_max(&self) -> u32 {
        self.tau_max
    }

    pub fn estimators(&self) -> &[SteadyEstimator] {
        &self.estimators
    }

    /// Current observable state.
    pub fn state(&self) -> &MdpState {
        &self.state
    }

    /// Sum of per-sensor estimation costs at the current ages.
    pub fn current_cost(&self) -> f64 {
        self.estimators
            .iter()
            .zip(&self.state.aoi)
            .map(|(est, &tau)| est.cost_at_age(tau))
            .sum()
    }

    /// Checks an action against this scenario's constraint set.
    pub fn validate_action(&self, action: &ResourceAction) -> Result<()> {
        let (n, m) = (self.n_sensors(), self.m_channels());
        match (self.scenario, action) {
            (Scenario::Oma, ResourceAction::Assign { channel_of }) => {
                check_channels(channel_of, n, m)?;
                let mut used = vec![false; m];
                for ch in channel_of.iter().flatten() {
                    if used[*ch] {
                        return Err(Error::ConstraintViolation(format!(
                            "channel {ch} shared by two sensors"
                        )));
                    }
                    used[*ch] = true;
                }
                Ok(())
            }
            (Scenario::SicNoma, ResourceAction::AssignPower { channel_of, power_mw }) => {
                check_channels(channel_of, n, m)?;
                if power_mw.len() != n {
                    return Err(Error::DimensionMismatch("one power per sensor".into()));
                }
                for (sensor, &p) in power_mw.iter().enumerate() {
                    if !(0.0..=self.budget.p_max_mw * (1.0 + POWER_SLACK)).contains(&p) {
                        return Err(Error::PowerBudgetViolation(format!(
                            "sensor {sensor} power {p} mW"
                        )));
                    }
                }
                Ok(())
            }
            (Scenario::IrcNoma, ResourceAction::PowerMatrix { power_mw }) => {
                if power_mw.nrows() != n || power_mw.ncols() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "power matrix {}x{}, expected {n}x{m}",
                        power_mw.nrows(),
                        power_mw.ncols()
                    )));
                }
                for sensor in 0..n {
                    let mut row_sum = 0.0;
                    for ch in 0..m {
                        let p = power_mw[(sensor, ch)];
                        if p < 0.0 {
                            return Err(Error::PowerBudgetViolation(format!(
                                "sensor {sensor} channel {ch} power {p}"
                            )));
                        }
                        row_sum += p;
                    }
                    if row_sum > self.budget.p_max_mw * (1.0 + POWER_SLACK) {
                        return Err(Error::PowerBudgetViolation(format!(
                            "sensor {sensor} row sum {row_sum} mW"
                        )));
                    }
                }
                Ok(())
            }
            (scenario, _) => Err(Error::ConstraintViolation(format!(
                "action variant does not fit scenario {}",
                scenario.number()
            ))),
        }
    }

    /// Advances the MDP one slot.
    pub fn step(&mut self, action: &ResourceAction) -> Result<StepResult> {
        self.validate_action(action)?;
        let outcome = match action {
            ResourceAction::Assign { channel_of } => {
                oma_receive(&self.budget, channel_of, &self.state.gains, &mut self.decode_rng)?
            }
            ResourceAction::AssignPower { channel_of, power_mw } => sic_receive(
                &self.budget,
                channel_of,
                power_mw,
                &self.state.gains,
                &mut self.decode_rng,
            )?,
            ResourceAction::PowerMatrix { power_mw } => {
                irc_sic_receive(&self.budget, power_mw, &self.state.gains, &mut self.decode_rng)?
            }
        };

        let pre_cost = self.current_cost();
        for (sensor, age) in self.state.aoi.iter_mut().enumerate() {
            *age = if outcome.success[sensor] { 1 } else { (*age + 1).min(self.tau_max) };
        }
        let reward = match self.reward_timing {
            RewardTiming::PostUpdate => -self.current_cost(),
            RewardTiming::PreUpdate => -pre_cost,
        };

        for chain in &mut self.channels {
            chain.step(&mut self.channel_rng);
        }
        self.refresh_gains();
        Ok(StepResult { reward, outcome })
    }

    /// Flattens a state into the actor/critic observation: per sensor, M
    /// channel features (log-value mapped affinely onto [-1, 1] over the
    /// ladder's range) followed by the age scaled onto [0, 1].
    pub fn encode_observation(&self, state: &MdpState) -> Vec<f64> {
        let (n, m) = (self.n_sensors(), self.m_channels());
        let lo = self.space.values[0].log10();
        let hi = self.space.values[self.space.values.len() - 1].log10();
        let span = hi - lo;
        let mut obs = Vec::with_capacity(n * (m + 1));
        for sensor in 0..n {
            for ch in 0..m {
                let feature = if span > 0.0 {
                    2.0 * (state.gains[(sensor, ch)].log10() - lo) / span - 1.0
                } else {
                    0.0
                };
                obs.push(feature);
            }
            obs.push(f64::from(state.aoi[sensor].min(self.tau_max)) / f64::from(self.tau_max));
        }
        obs
    }

    /// Observation width N(M+1).
    pub fn observation_dim(&self) -> usize {
        self.n_sensors() * (self.m_channels() + 1)
    }
}

fn check_channels(channel_of: &[Option<usize>], n: usize, m: usize) -> Result<()> {
    if channel_of.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "assignment length {} vs {n} sensors",
            channel_of.len()
        )));
    }
    for ch in channel_of.iter().flatten() {
        if *ch >= m {
            return Err(Error::IndexOutOfRange { index: *ch, size: m });
        }
    }
    Ok(())
}
