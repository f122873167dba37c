//! A complete, fast pass through the training stack.
//!
//! Generates a small certified instance (two unstable scalar plants
//! contending for one fading channel), trains a policy with the default
//! hyperparameters, and compares the trained actor's deterministic
//! evaluation against the random and round-robin baselines under identical
//! fading. Deep fades make blind rotation lose decodes, so the learned
//! gain- and age-aware schedule ends up beating both baselines in under a
//! minute of training.
//!
//! Run with: cargo run --example train_smoke

use estalloc::actions::Scenario;
use estalloc::baselines::{Baseline, BaselineKind};
use estalloc::harness::{build_env, gen_instance, ExperimentConfig};
use estalloc::ppo::{evaluate_baseline, evaluate_policy, train, TrainConfig};
use estalloc::rng::{stream, STREAM_POLICY};

fn main() -> estalloc::Result<()> {
    let mut cfg: ExperimentConfig = toml::from_str(
        "n_sensors = 2\nm_channels = 1\ninstance_seed = 1\ntrain_seed = 2\n",
    )
    .map_err(estalloc::Error::from)?;
    cfg.plant_dim = 1;

    let instance = gen_instance(&cfg, Scenario::Oma)?;
    println!(
        "instance: 2 scalar plants (radii {:?}), 8-state fading, 1 channel",
        instance
            .drawn_radii
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );

    let train_cfg = TrainConfig::default();
    let mut env = build_env(&instance, cfg.train_seed)?;
    let result = train(&mut env, &train_cfg, cfg.train_seed, None)?;

    println!("\ntraining curve (every 50th episode):");
    println!("  episode   mean cost/slot   entropy");
    for p in result.curve.iter().step_by(50) {
        println!("  {:>7}   {:>14.4}   {:>7.4}", p.episode, p.mean_mse, p.entropy);
    }
    println!("best episode by return: {}", result.best_episode);

    // Paired evaluation: every policy sees the same fading at equal seeds.
    let eval_steps = 2000;
    println!("\nevaluation over {eval_steps} slots (mean total cost per slot):");
    for seed in [501u64, 502, 503] {
        let mut env = build_env(&instance, seed)?;
        let ppo = evaluate_policy(&mut env, &result.actor, eval_steps)?;

        let mut env = build_env(&instance, seed)?;
        let mut rng = stream(seed, STREAM_POLICY);
        let mut random = Baseline::new(BaselineKind::Random);
        let rnd = evaluate_baseline(&mut env, &mut random, eval_steps, &mut rng)?;

        let mut env = build_env(&instance, seed)?;
        let mut rng = stream(seed, STREAM_POLICY);
        let mut rr = Baseline::new(BaselineKind::RoundRobin);
        let rr = evaluate_baseline(&mut env, &mut rr, eval_steps, &mut rng)?;

        println!("  seed {seed}: trained {ppo:.4}   random {rnd:.4}   round-robin {rr:.4}");
    }
    Ok(())
}
