//! Proximal policy optimization over the scheduling MDP, built directly on
//! the flat-parameter networks in [`crate::neural`].
//!
//! The actor outputs a diagonal Gaussian over the scenario's virtual action
//! space (tanh means, floored-softplus standard deviations); the critic is a
//! scalar value network. Updates use the clipped surrogate objective with an
//! entropy bonus, generalized advantage estimation, and one-step bootstrapped
//! value targets by default.

use crate::actions::{map_virtual, virtual_dim};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::neural::{
    clip_global_norm, gaussian_entropy, gaussian_log_density, gaussian_log_density_grad,
    gaussian_sample, Activation, Adam, Mlp,
};
use crate::rng::{stream, STREAM_NET_INIT, STREAM_SAMPLE, STREAM_SHUFFLE};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

/// Scaling applied to the actor's final layer at initialization so the
/// starting policy is near-uniform over the action space.
pub const ACTOR_FINAL_INIT_SCALE: f64 = 0.01;

/// Initial per-dimension policy spread. The std head's final biases start at
/// softplus^{-1} of this value. Rank-based action maps are scale-invariant in
/// the virtual action, so what matters is the ratio of mean gaps to noise: a
/// wide start lets the sampling noise do the allocation time-sharing and the
/// means converge to static lottery weights whose argmax starves sensors,
/// while a tight start makes the means carry the ranking from the first
/// episode and the spread then follows the surrogate.
pub const ACTOR_INIT_STD: f64 = 0.1;

/// Checkpoint manifest schema version.
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// How critic regression targets are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// r_t + discount * V(s_{t+1}) (default).
    OneStep,
    /// Advantage estimate plus V(s_t).
    Gae,
}

/// Hyperparameters for one training run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Episode count; `None` selects [`default_episodes`] for the instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    pub steps_per_episode: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub discount: f64,
    pub gae_alpha: f64,
    pub clip: f64,
    pub entropy_weight: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub grad_clip: f64,
    pub targets: TargetKind,
    /// Rescale each rollout's advantages to zero mean and unit variance before
    /// the surrogate step. Off by default: standardization decouples the
    /// update magnitude from the instance's cost scale, which lets the fixed
    /// entropy bonus out-muscle the surrogate and inflate the policy spread
    /// without bound on heavy-tailed instances.
    pub normalize_advantages: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: None,
            steps_per_episode: 128,
            epochs: 3,
            minibatch: 128,
            discount: 0.95,
            gae_alpha: 0.95,
            clip: 0.2,
            entropy_weight: 0.01,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            grad_clip: 1.0,
            targets: TargetKind::OneStep,
            normalize_advantages: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_episode == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::InvalidConfig(
                "steps, epochs, and minibatch must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.gae_alpha) {
            return Err(Error::InvalidConfig(
                "discount must lie in [0,1) and gae_alpha in [0,1]".into(),
            ));
        }
        if self.clip <= 0.0 || self.actor_lr <= 0.0 || self.critic_lr <= 0.0 {
            return Err(Error::InvalidConfig(
                "clip and learning rates must be positive".into(),
            ));
        }
        if self.entropy_weight < 0.0 || self.grad_clip <= 0.0 {
            return Err(Error::InvalidConfig(
                "entropy weight must be nonnegative and grad clip positive".into(),
            ));
        }
        Ok(())
    }
}

/// Episode budget scaled to instance size: ceil(250 (N/M) sqrt(NM)).
pub fn default_episodes(n_sensors: usize, m_channels: usize) -> usize {
    let (n, m) = (n_sensors as f64, m_channels as f64);
    (250.0 * (n / m) * (n * m).sqrt()).ceil() as usize
}

/// Hidden layer widths scaled to instance size: ceil(70K), ceil(50K),
/// ceil(30K) with K = sqrt(N/M) log2(M+1).
pub fn hidden_sizes(n_sensors: usize, m_channels: usize) -> [usize; 3] {
    let (n, m) = (n_sensors as f64, m_channels as f64);
    let k = (n / m).sqrt() * (m + 1.0).log2();
    [
        (70.0 * k).ceil() as usize,
        (50.0 * k).ceil() as usize,
        (30.0 * k).ceil() as usize,
    ]
}

/// Builds the actor network for an environment: three ReLU hidden layers and
/// a split tanh/softplus Gaussian head over the virtual action space.
pub fn build_actor(env: &Env) -> Result<Mlp> {
    let h = hidden_sizes(env.n_sensors(), env.m_channels());
    let act_dim = virtual_dim(env.scenario(), env.n_sensors(), env.m_channels());
    Mlp::new(
        vec![env.observation_dim(), h[0], h[1], h[2], 2 * act_dim],
        vec![
            Activation::Relu,
            Activation::Relu,
            Activation::Relu,
            Activation::SplitTanhSoftplus,
        ],
    )
}

/// Initializes an actor in place: He/Xavier weight draws with the final layer
/// scaled by [`ACTOR_FINAL_INIT_SCALE`], then the std head's biases offset so
/// the starting spread is [`ACTOR_INIT_STD`] in every dimension.
pub fn init_actor<R: Rng>(actor: &mut Mlp, rng: &mut R) {
    actor.init_weights(rng, ACTOR_FINAL_INIT_SCALE);
    let out = actor.sizes().last().copied().expect("actor has layers");
    let bias = (ACTOR_INIT_STD.exp() - 1.0).ln();
    for b in &mut actor.final_bias_mut()[out / 2..] {
        *b = bias;
    }
}

/// Builds the critic network for an environment: same trunk, scalar output.
pub fn build_critic(env: &Env) -> Result<Mlp> {
    let h = hidden_sizes(env.n_sensors(), env.m_channels());
    Mlp::new(
        vec![env.observation_dim(), h[0], h[1], h[2], 1],
        vec![
            Activation::Relu,
            Activation::Relu,
            Activation::Relu,
            Activation::Identity,
        ],
    )
}

/// One on-policy rollout with everything the update step needs.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_densities: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Critic values for each visited state plus a bootstrap for the final
    /// state: length T+1.
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Generalized advantage estimates. `values` must hold one more entry than
/// `rewards` (the bootstrap value of the final state).
pub fn gae(rewards: &[f64], values: &[f64], discount: f64, alpha: f64) -> Vec<f64> {
    assert_eq!(values.len(), rewards.len() + 1, "values must include a bootstrap entry");
    let mut advantages = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + discount * values[t + 1] - values[t];
        acc = delta + discount * alpha * acc;
        advantages[t] = acc;
    }
    advantages
}

/// One-step bootstrapped value targets r_t + discount * V(s_{t+1}).
pub fn one_step_targets(rewards: &[f64], values: &[f64], discount: f64) -> Vec<f64> {
    assert_eq!(values.len(), rewards.len() + 1, "values must include a bootstrap entry");
    rewards
        .iter()
        .enumerate()
        .map(|(t, &r)| r + discount * values[t + 1])
        .collect()
}

/// Rolls out one episode under the current stochastic policy. Resets the
/// environment first, then samples `steps` actions, recording observations,
/// virtual actions, log densities, rewards, and critic values.
pub fn collect(
    env: &mut Env,
    actor: &Mlp,
    critic: &Mlp,
    cfg: &TrainConfig,
    sample_rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let steps = cfg.steps_per_episode;
    let (n, m) = (env.n_sensors(), env.m_channels());
    let scenario = env.scenario();
    let p_max = env.budget().p_max_mw;

    env.reset();
    let mut traj = Trajectory {
        observations: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        log_densities: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        values: Vec::with_capacity(steps + 1),
        advantages: Vec::new(),
        targets: Vec::new(),
    };

    for _ in 0..steps {
        let obs = env.encode_observation(env.state());
        let head = actor.infer(&obs)?;
        let (mean, std) = split_head(&head);
        let sample = gaussian_sample(mean, std, Some(sample_rng))?;
        let action = map_virtual(scenario, &sample.action, n, m, p_max)?;
        let value = critic.infer(&obs)?[0];
        let step = env.step(&action)?;

        traj.observations.push(obs);
        traj.actions.push(sample.action);
        traj.log_densities.push(sample.log_density);
        traj.rewards.push(step.reward);
        traj.values.push(value);
    }
    let final_obs = env.encode_observation(env.state());
    traj.values.push(critic.infer(&final_obs)?[0]);

    traj.advantages = gae(&traj.rewards, &traj.values, cfg.discount, cfg.gae_alpha);
    traj.targets = match cfg.targets {
        TargetKind::OneStep => one_step_targets(&traj.rewards, &traj.values, cfg.discount),
        TargetKind::Gae => traj
            .advantages
            .iter()
            .zip(&traj.values)
            .map(|(a, v)| a + v)
            .collect(),
    };
    Ok(traj)
}

/// Losses averaged over every minibatch of an update call.
#[derive(Debug, Clone, Copy)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
}

/// Runs the configured number of epochs of shuffled minibatch updates on one
/// trajectory: critic regression first, then the clipped-surrogate actor step.
pub fn update(
    actor: &mut Mlp,
    critic: &mut Mlp,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    traj: &Trajectory,
    cfg: &TrainConfig,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let t_len = traj.len();
    if t_len == 0 {
        return Err(Error::InvalidConfig("empty trajectory".into()));
    }
    let batch = cfg.minibatch.min(t_len);
    let mut indices: Vec<usize> = (0..t_len).collect();
    let advantages: Vec<f64> = if cfg.normalize_advantages {
        standardized(&traj.advantages)
    } else {
        traj.advantages.clone()
    };

    let mut actor_loss_sum = 0.0;
    let mut critic_loss_sum = 0.0;
    let mut entropy_sum = 0.0;
    let mut n_batches = 0.0;

    for _ in 0..cfg.epochs {
        indices.shuffle(shuffle_rng);
        for chunk in indices.chunks(batch) {
            let scale = 1.0 / chunk.len() as f64;

            // Critic: mean squared error against the stored targets.
            let mut critic_grad = vec![0.0; critic.params().len()];
            let mut critic_loss = 0.0;
            for &i in chunk {
                let (out, cache) = critic.forward(&traj.observations[i])?;
                let err = traj.targets[i] - out[0];
                critic_loss += err * err * scale;
                let (grad, _) = critic.backward(&cache, &[-2.0 * err * scale])?;
                accumulate(&mut critic_grad, &grad);
            }
            clip_global_norm(&mut critic_grad, cfg.grad_clip);
            critic_opt.step(critic.params_mut(), &critic_grad)?;

            // Actor: clipped surrogate with entropy bonus.
            let mut actor_grad = vec![0.0; actor.params().len()];
            let mut actor_loss = 0.0;
            let mut entropy_acc = 0.0;
            for &i in chunk {
                let (head, cache) = actor.forward(&traj.observations[i])?;
                let (mean, std) = split_head(&head);
                let lp_new = gaussian_log_density(mean, std, &traj.actions[i])?;
                let ratio = (lp_new - traj.log_densities[i]).exp();
                let adv = advantages[i];
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
                let surrogate = unclipped.min(clipped);
                let entropy = gaussian_entropy(std);
                actor_loss += (-surrogate - cfg.entropy_weight * entropy) * scale;
                entropy_acc += entropy * scale;

                // d surrogate / d lp is the unclipped branch's ratio*adv when
                // that branch is active, zero once clipping binds.
                let d_surr_d_lp = if unclipped <= clipped { unclipped } else { 0.0 };
                let (d_mean, d_std) = gaussian_log_density_grad(mean, std, &traj.actions[i])?;
                let width = head.len() / 2;
                let mut upstream = vec![0.0; head.len()];
                for j in 0..width {
                    upstream[j] = -scale * d_surr_d_lp * d_mean[j];
                    upstream[width + j] =
                        -scale * (d_surr_d_lp * d_std[j] + cfg.entropy_weight / std[j]);
                }
                let (grad, _) = actor.backward(&cache, &upstream)?;
                accumulate(&mut actor_grad, &grad);
            }
            clip_global_norm(&mut actor_grad, cfg.grad_clip);
            actor_opt.step(actor.params_mut(), &actor_grad)?;

            actor_loss_sum += actor_loss;
            critic_loss_sum += critic_loss;
            entropy_sum += entropy_acc;
            n_batches += 1.0;
        }
    }

    Ok(UpdateStats {
        actor_loss: actor_loss_sum / n_batches,
        critic_loss: critic_loss_sum / n_batches,
        entropy: entropy_sum / n_batches,
    })
}

/// Shifts and rescales a batch to zero mean and unit variance. A degenerate
/// batch (constant advantages) maps to all zeros rather than dividing by zero.
fn standardized(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    values.iter().map(|v| (v - mean) / denom).collect()
}

fn accumulate(into: &mut [f64], from: &[f64]) {
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

/// Splits an actor head output into (means, stds).
pub fn split_head(head: &[f64]) -> (&[f64], &[f64]) {
    head.split_at(head.len() / 2)
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub sum_reward: f64,
    pub mean_mse: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
}

/// Product of [`train`]: final and best-episode networks plus the curve.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub actor: Mlp,
    pub critic: Mlp,
    pub best_actor: Mlp,
    pub best_critic: Mlp,
    pub best_episode: usize,
    pub curve: Vec<CurvePoint>,
}

/// Trains actor and critic from scratch on `env`. `seed` addresses the
/// initialization, sampling, and shuffling streams. If training aborts on a
/// non-finite gradient and `abort_dir` is given, the current networks are
/// dumped there before the error propagates.
pub fn train(
    env: &mut Env,
    cfg: &TrainConfig,
    seed: u64,
    abort_dir: Option<&Path>,
) -> Result<TrainResult> {
    cfg.validate()?;
    let mut actor = build_actor(env)?;
    let mut critic = build_critic(env)?;
    let mut init_rng = stream(seed, STREAM_NET_INIT);
    init_actor(&mut actor, &mut init_rng);
    critic.init_weights(&mut init_rng, 1.0);

    let mut actor_opt = Adam::new(actor.params().len(), cfg.actor_lr);
    let mut critic_opt = Adam::new(critic.params().len(), cfg.critic_lr);
    let mut sample_rng = stream(seed, STREAM_SAMPLE);
    let mut shuffle_rng = stream(seed, STREAM_SHUFFLE);

    let episodes = cfg
        .episodes
        .unwrap_or_else(|| default_episodes(env.n_sensors(), env.m_channels()));
    let mut curve = Vec::with_capacity(episodes);
    let mut best_episode = 0;
    let mut best_reward = f64::NEG_INFINITY;
    let mut best_actor = actor.clone();
    let mut best_critic = critic.clone();

    for episode in 0..episodes {
        let traj = collect(env, &actor, &critic, cfg, &mut sample_rng)?;
        let sum_reward: f64 = traj.rewards.iter().sum();
        let stats = match update(
            &mut actor,
            &mut critic,
            &mut actor_opt,
            &mut critic_opt,
            &traj,
            cfg,
            &mut shuffle_rng,
        ) {
            Ok(stats) => stats,
            Err(err) => {
                if let Some(dir) = abort_dir {
                    let _ = save_checkpoint(&dir.join("ckpt_abort"), env, &actor, &critic);
                }
                return Err(err);
            }
        };
        curve.push(CurvePoint {
            episode,
            sum_reward,
            mean_mse: -sum_reward / traj.len() as f64,
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            entropy: stats.entropy,
        });
        if sum_reward > best_reward {
            best_reward = sum_reward;
            best_episode = episode;
            best_actor = actor.clone();
            best_critic = critic.clone();
        }
    }

    Ok(TrainResult { actor, critic, best_actor, best_critic, best_episode, curve })
}

/// Runs the deterministic (mean-action) policy for `steps` slots and returns
/// the per-slot mean of the summed estimation cost.
pub fn evaluate_policy(env: &mut Env, actor: &Mlp, steps: usize) -> Result<f64> {
    let (n, m) = (env.n_sensors(), env.m_channels());
    let scenario = env.scenario();
    let p_max = env.budget().p_max_mw;
    env.reset();
    let mut total = 0.0;
    for _ in 0..steps {
        let obs = env.encode_observation(env.state());
        let head = actor.infer(&obs)?;
        let (mean, std) = split_head(&head);
        let sample = gaussian_sample::<ChaCha8Rng>(mean, std, None)?;
        let action = map_virtual(scenario, &sample.action, n, m, p_max)?;
        env.step(&action)?;
        total += env.current_cost();
    }
    Ok(total / steps as f64)
}

/// Runs a baseline policy for `steps` slots under the same metric as
/// [`evaluate_policy`].
pub fn evaluate_baseline<R: Rng>(
    env: &mut Env,
    baseline: &mut crate::baselines::Baseline,
    steps: usize,
    rng: &mut R,
) -> Result<f64> {
    env.reset();
    let mut total = 0.0;
    for _ in 0..steps {
        let state = env.state().clone();
        let action = baseline.act(env, &state, rng)?;
        env.step(&action)?;
        total += env.current_cost();
    }
    Ok(total / steps as f64)
}

/// Network shapes and instance identity stored beside the weight files.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub scenario: u8,
    pub n_sensors: usize,
    pub m_channels: usize,
    pub obs_dim: usize,
    pub actor_sizes: Vec<usize>,
    pub actor_activations: Vec<Activation>,
    pub critic_sizes: Vec<usize>,
    pub critic_activations: Vec<Activation>,
}

/// Writes `manifest.json`, `actor.bin`, and `critic.bin` into `dir`
/// (creating it). Weights are flat little-endian f64 in layer order.
pub fn save_checkpoint(dir: &Path, env: &Env, actor: &Mlp, critic: &Mlp) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_FORMAT_VERSION,
        scenario: env.scenario().number(),
        n_sensors: env.n_sensors(),
        m_channels: env.m_channels(),
        obs_dim: env.observation_dim(),
        actor_sizes: actor.sizes().to_vec(),
        actor_activations: actor.activations().to_vec(),
        critic_sizes: critic.sizes().to_vec(),
        critic_activations: critic.activations().to_vec(),
    };
    let manifest = serde_json::to_string_pretty(&meta)?;
    std::fs::write(dir.join("manifest.json"), manifest)?;
    write_weights(&dir.join("actor.bin"), actor.params())?;
    write_weights(&dir.join("critic.bin"), critic.params())?;
    Ok(())
}

/// Reads a checkpoint directory back into networks plus its manifest.
pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointMeta, Mlp, Mlp)> {
    let manifest = std::fs::read_to_string(dir.join("manifest.json"))?;
    let meta: CheckpointMeta = serde_json::from_str(&manifest)?;
    if meta.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "checkpoint format {} (expected {})",
            meta.format_version, CHECKPOINT_FORMAT_VERSION
        )));
    }
    let actor = Mlp::from_parts(
        meta.actor_sizes.clone(),
        meta.actor_activations.clone(),
        read_weights(&dir.join("actor.bin"))?,
    )?;
    let critic = Mlp::from_parts(
        meta.critic_sizes.clone(),
        meta.critic_activations.clone(),
        read_weights(&dir.join("critic.bin"))?,
    )?;
    Ok((meta, actor, critic))
}

fn write_weights(path: &Path, params: &[f64]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let mut buf = Vec::with_capacity(params.len() * 8);
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() % 8 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "weight file length {} is not a multiple of 8",
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
