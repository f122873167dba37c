//! Reference scheduling policies used as evaluation baselines.
//!
//! Each policy emits a legal action for the requested scenario from an
//! arbitrary observable state, so a trained policy can be compared against
//! them under identical fading streams.

use crate::actions::{ResourceAction, Scenario};
use crate::env::{Env, MdpState};
use crate::error::Result;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

/// Which reference rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Uniform random legal action each slot.
    Random,
    /// Cycles sensors through channels in index order.
    RoundRobin,
    /// Ranks sensors by age times best gain times marginal cost slope.
    GreedyAoiGain,
}

/// A stateful baseline policy (round-robin keeps a rotation counter).
#[derive(Debug, Clone)]
pub struct Baseline {
    kind: BaselineKind,
    rr_counter: usize,
}

impl Baseline {
    pub fn new(kind: BaselineKind) -> Self {
        Baseline { kind, rr_counter: 0 }
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    /// Produces an action for `state` under `env`'s scenario and budget.
    pub fn act<R: Rng>(&mut self, env: &Env, state: &MdpState, rng: &mut R) -> Result<ResourceAction> {
        match self.kind {
            BaselineKind::Random => random_action(env, rng),
            BaselineKind::RoundRobin => {
                let action = round_robin_action(env, self.rr_counter);
                self.rr_counter = self.rr_counter.wrapping_add(1);
                Ok(action)
            }
            BaselineKind::GreedyAoiGain => Ok(greedy_action(env, state)),
        }
    }
}

fn random_action<R: Rng>(env: &Env, rng: &mut R) -> Result<ResourceAction> {
    let (n, m) = (env.n_sensors(), env.m_channels());
    let p_max = env.budget().p_max_mw;
    match env.scenario() {
        Scenario::Oma => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            let mut channel_of = vec![None; n];
            for (ch, &sensor) in perm.iter().take(m).enumerate() {
                channel_of[sensor] = Some(ch);
            }
            Ok(ResourceAction::Assign { channel_of })
        }
        Scenario::SicNoma => {
            let mut channel_of = vec![None; n];
            let mut power_mw = vec![0.0; n];
            for sensor in 0..n {
                let pick = rng.gen_range(0..=m);
                if pick > 0 {
                    channel_of[sensor] = Some(pick - 1);
                    power_mw[sensor] = p_max;
                }
            }
            Ok(ResourceAction::AssignPower { channel_of, power_mw })
        }
        Scenario::IrcNoma => {
            let mut power_mw = DMatrix::zeros(n, m);
            for sensor in 0..n {
                let weights: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
                let total: f64 = weights.iter().sum();
                if total > 0.0 {
                    for (ch, w) in weights.iter().enumerate() {
                        power_mw[(sensor, ch)] = p_max * w / total;
                    }
                }
            }
            Ok(ResourceAction::PowerMatrix { power_mw })
        }
    }
}

fn round_robin_action(env: &Env, counter: usize) -> ResourceAction {
    let (n, m) = (env.n_sensors(), env.m_channels());
    let p_max = env.budget().p_max_mw;
    let mut channel_of = vec![None; n];
    for ch in 0..m {
        let sensor = (counter * m + ch) % n;
        if channel_of[sensor].is_none() {
            channel_of[sensor] = Some(ch);
        }
    }
    finish_assignment(env, channel_of, p_max)
}

/// Score sensors by age x best power-equivalent gain x one-step cost slope,
/// then let the top M picks claim their best remaining channels.
fn greedy_action(env: &Env, state: &MdpState) -> ResourceAction {
    let (n, m) = (env.n_sensors(), env.m_channels());
    let kind = env.gain_kind();
    let mut scored: Vec<(usize, f64)> = (0..n)
        .map(|sensor| {
            let tau = state.aoi[sensor];
            let best_gain = (0..m)
                .map(|ch| kind.power_gain(state.gains[(sensor, ch)]))
                .fold(0.0, f64::max);
            let est = &env.estimators()[sensor];
            let slope = est.cost_at_age(tau.saturating_add(1)) - est.cost_at_age(tau);
            (sensor, f64::from(tau) * best_gain * slope)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let mut channel_of = vec![None; n];
    let mut taken = vec![false; m];
    for &(sensor, _) in scored.iter().take(m) {
        let pick = (0..m)
            .filter(|&ch| !taken[ch])
            .max_by(|&a, &b| {
                let ga = kind.power_gain(state.gains[(sensor, a)]);
                let gb = kind.power_gain(state.gains[(sensor, b)]);
                ga.partial_cmp(&gb).unwrap().then(b.cmp(&a))
            });
        if let Some(ch) = pick {
            taken[ch] = true;
            channel_of[sensor] = Some(ch);
        }
    }
    finish_assignment(env, channel_of, env.budget().p_max_mw)
}

/// Wraps a per-sensor channel assignment into the scenario's action variant,
/// giving every scheduled sensor full power.
fn finish_assignment(env: &Env, channel_of: Vec<Option<usize>>, p_max: f64) -> ResourceAction {
    match env.scenario() {
        Scenario::Oma => ResourceAction::Assign { channel_of },
        Scenario::SicNoma => {
            let power_mw = channel_of
                .iter()
                .map(|c| if c.is_some() { p_max } else { 0.0 })
                .collect();
            ResourceAction::AssignPower { channel_of, power_mw }
        }
        Scenario::IrcNoma => {
            let (n, m) = (env.n_sensors(), env.m_channels());
            let mut power_mw = DMatrix::zeros(n, m);
            for (sensor, ch) in channel_of.iter().enumerate() {
                if let Some(ch) = ch {
                    power_mw[(sensor, *ch)] = p_max;
                }
            }
            ResourceAction::PowerMatrix { power_mw }
        }
    }
}
