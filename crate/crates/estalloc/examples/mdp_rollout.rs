//! One episode of the scheduling MDP, slot by slot.
//!
//! Generates a small certified instance, builds the environment, and rolls
//! the greedy age-times-gain baseline for twenty slots, printing ages,
//! decoding outcomes, and rewards as they happen.
//!
//! Run with: cargo run --example mdp_rollout

use estalloc::actions::Scenario;
use estalloc::baselines::{Baseline, BaselineKind};
use estalloc::harness::{build_env, gen_instance, ExperimentConfig};
use estalloc::rng::{stream, STREAM_POLICY};

fn main() -> estalloc::Result<()> {
    let mut cfg: ExperimentConfig = toml::from_str(
        "n_sensors = 3\nm_channels = 2\ninstance_seed = 9\ntrain_seed = 10\n",
    )
    .map_err(estalloc::Error::from)?;
    cfg.channel_states = 4;

    let instance = gen_instance(&cfg, Scenario::Oma)?;
    let mut env = build_env(&instance, 1234)?;
    let mut policy = Baseline::new(BaselineKind::GreedyAoiGain);
    let mut rng = stream(1234, STREAM_POLICY);

    println!(
        "{} sensors, {} channels, scenario {}; reward = -(sum of estimation costs)",
        env.n_sensors(),
        env.m_channels(),
        env.scenario().number()
    );
    println!("\nslot  ages      scheduled->channel   delivered   reward");
    let mut total = 0.0;
    for slot in 0..20 {
        let ages_before = env.state().aoi.clone();
        let state = env.state().clone();
        let action = policy.act(&env, &state, &mut rng)?;
        let result = env.step(&action)?;
        total += result.reward;

        let assignment: Vec<String> = result
            .outcome
            .scheduled
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| format!("s{i}"))
            .collect();
        let delivered: Vec<String> = result
            .outcome
            .success
            .iter()
            .enumerate()
            .filter(|(_, &ok)| ok)
            .map(|(i, _)| format!("s{i}"))
            .collect();
        println!(
            "{slot:>4}  {:?}  {:<18}  {:<9}  {:+.3}",
            ages_before,
            assignment.join(","),
            delivered.join(","),
            result.reward
        );
    }
    println!("\nepisode return over 20 slots: {total:+.3}");
    println!("final ages: {:?}", env.state().aoi);
    println!("current total estimation cost: {:.3}", env.current_cost());
    Ok(())
}
