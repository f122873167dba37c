//! End-to-end experiment runs: generate gated instances, train one policy
//! per scenario, evaluate against the baselines under shared fading seeds,
//! and write deterministic CSV outputs.
//!
//! Nothing written here embeds timestamps or machine identity, so rerunning
//! a config into a fresh directory reproduces every file byte for byte.

use crate::actions::Scenario;
use crate::baselines::{Baseline, BaselineKind};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::instance::{build_env, gen_instance, save_instance, Instance};
use crate::neural::Mlp;
use crate::ppo::{
    evaluate_baseline, evaluate_policy, save_checkpoint, train, CurvePoint, TrainResult,
};
use crate::rng::{stream, STREAM_POLICY};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Policy names as they appear in the results table.
pub const POLICY_NAMES: [&str; 4] = ["ppo", "random", "round_robin", "greedy"];

/// One results-table row: a policy's evaluation across the shared seeds.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PolicyRow {
    pub scenario: u8,
    pub policy: String,
    /// Mean estimation cost per slot, one entry per eval seed.
    pub per_seed_mse: Vec<f64>,
    pub mean_mse: f64,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub std_mse: f64,
}

fn summarize(scenario: u8, policy: &str, per_seed_mse: Vec<f64>) -> PolicyRow {
    let n = per_seed_mse.len() as f64;
    let mean = per_seed_mse.iter().sum::<f64>() / n;
    let std = if per_seed_mse.len() > 1 {
        (per_seed_mse.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    PolicyRow {
        scenario,
        policy: policy.to_string(),
        per_seed_mse,
        mean_mse: mean,
        std_mse: std,
    }
}

/// Evaluates the trained actor and every baseline on fresh environments for
/// each seed. Fading trajectories are identical across policies at equal
/// seeds because the fading stream is separate from the decoding stream.
pub fn evaluate_instance(
    instance: &Instance,
    actor: &Mlp,
    eval_seeds: &[u64],
    eval_steps: usize,
) -> Result<Vec<PolicyRow>> {
    let mut rows = Vec::with_capacity(POLICY_NAMES.len());
    for &policy in &POLICY_NAMES {
        let mut per_seed = Vec::with_capacity(eval_seeds.len());
        for &seed in eval_seeds {
            let mut env = build_env(instance, seed)?;
            let mse = match policy {
                "ppo" => evaluate_policy(&mut env, actor, eval_steps)?,
                name => {
                    let kind = match name {
                        "random" => BaselineKind::Random,
                        "round_robin" => BaselineKind::RoundRobin,
                        "greedy" => BaselineKind::GreedyAoiGain,
                        _ => unreachable!(),
                    };
                    let mut baseline = Baseline::new(kind);
                    let mut rng = stream(seed, STREAM_POLICY);
                    evaluate_baseline(&mut env, &mut baseline, eval_steps, &mut rng)?
                }
            };
            per_seed.push(mse);
        }
        rows.push(summarize(instance.scenario, policy, per_seed));
    }
    Ok(rows)
}

fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut text = String::from("episode,sum_reward,mean_mse,actor_loss,critic_loss,entropy\n");
    for p in curve {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            p.episode, p.sum_reward, p.mean_mse, p.actor_loss, p.critic_loss, p.entropy
        )
        .expect("writing to a String cannot fail");
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_results_csv(path: &Path, rows: &[PolicyRow], cfg: &ExperimentConfig) -> Result<()> {
    let seeds = cfg
        .eval_seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let hash = cfg.hash()?;
    let version = env!("CARGO_PKG_VERSION");
    let mut text = String::from("scenario,policy,mean_mse,std_mse,eval_seeds,version,config_hash\n");
    for row in rows {
        writeln!(
            text,
            "{},{},{},{},{seeds},{version},{hash}",
            row.scenario, row.policy, row.mean_mse, row.std_mse
        )
        .expect("writing to a String cannot fail");
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Trains one scenario of a config and writes its artifacts
/// (`instance_s{k}.json`, `curve_s{k}.csv`, `ckpt_s{k}_final/`,
/// `ckpt_s{k}_best/`) into `out_dir`. Returns the instance and the train
/// result for further evaluation.
pub fn run_scenario(
    cfg: &ExperimentConfig,
    scenario: Scenario,
    out_dir: &Path,
) -> Result<(Instance, TrainResult)> {
    std::fs::create_dir_all(out_dir)?;
    let k = scenario.number();
    let instance = gen_instance(cfg, scenario)?;
    save_instance(&out_dir.join(format!("instance_s{k}.json")), &instance)?;

    let mut env = build_env(&instance, cfg.train_seed)?;
    let result = train(&mut env, &cfg.train, cfg.train_seed, Some(out_dir))?;
    write_curve_csv(&out_dir.join(format!("curve_s{k}.csv")), &result.curve)?;
    save_checkpoint(&out_dir.join(format!("ckpt_s{k}_final")), &env, &result.actor, &result.critic)?;
    save_checkpoint(
        &out_dir.join(format!("ckpt_s{k}_best")),
        &env,
        &result.best_actor,
        &result.best_critic,
    )?;
    Ok((instance, result))
}

/// Runs every scenario in the config: instance generation, training,
/// evaluation, and the `results.csv` table. Returns the table rows.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PolicyRow>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("config.toml"),
        toml::to_string_pretty(cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?,
    )?;

    let mut rows = Vec::new();
    for &k in &cfg.scenarios {
        let scenario = Scenario::from_number(k)?;
        let (instance, result) = run_scenario(cfg, scenario, out_dir)?;
        rows.extend(evaluate_instance(&instance, &result.actor, &cfg.eval_seeds, cfg.eval_steps)?);
    }
    write_results_csv(&out_dir.join("results.csv"), &rows, cfg)?;
    Ok(rows)
}

/// Merges every `curve_s{k}.csv` in `dir` into `curves_merged.csv`, adding a
/// trailing moving average of the per-episode cost over `window` episodes.
/// Returns the merged file's path.
pub fn export_curves(dir: &Path, window: usize) -> Result<PathBuf> {
    if window == 0 {
        return Err(Error::InvalidConfig("smoothing window must be positive".into()));
    }
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| entry.file_name().into_string().ok())
        .filter(|name| name.starts_with("curve_s") && name.ends_with(".csv"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no curve_s*.csv files under {}",
            dir.display()
        )));
    }

    let mut text = String::from("scenario,episode,sum_reward,mean_mse,mean_mse_smoothed\n");
    for name in &names {
        let scenario = name
            .trim_start_matches("curve_s")
            .trim_end_matches(".csv")
            .to_string();
        let content = std::fs::read_to_string(dir.join(name))?;
        let mut history: Vec<f64> = Vec::new();
        for line in content.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(Error::InvalidConfig(format!("malformed curve row in {name}")));
            }
            let episode = fields[0];
            let sum_reward = fields[1];
            let mean_mse: f64 = fields[2]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad mean_mse in {name}")))?;
            history.push(mean_mse);
            let start = history.len().saturating_sub(window);
            let tail = &history[start..];
            let smoothed = tail.iter().sum::<f64>() / tail.len() as f64;
            writeln!(text, "{scenario},{episode},{sum_reward},{mean_mse},{smoothed}")
                .expect("writing to a String cannot fail");
        }
    }
    let out = dir.join("curves_merged.csv");
    std::fs::write(&out, text)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_cfg() -> ExperimentConfig {
        let mut cfg: ExperimentConfig = toml::from_str(
            "n_sensors = 2\nm_channels = 1\ninstance_seed = 11\ntrain_seed = 12\n",
        )
        .unwrap();
        cfg.channel_states = 3;
        cfg.plant_dim = 1;
        cfg.scenarios = vec![2];
        cfg.eval_seeds = vec![501, 502];
        cfg.eval_steps = 64;
        cfg.train.episodes = Some(2);
        cfg.train.steps_per_episode = 16;
        cfg.train.minibatch = 16;
        cfg
    }

    #[test]
    fn experiment_outputs_are_byte_identical_across_runs() {
        let cfg = smoke_cfg();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let rows_a = run_experiment(&cfg, dir_a.path()).unwrap();
        let rows_b = run_experiment(&cfg, dir_b.path()).unwrap();
        assert_eq!(rows_a.len(), 4);
        for (a, b) in rows_a.iter().zip(&rows_b) {
            assert_eq!(a.mean_mse.to_bits(), b.mean_mse.to_bits());
        }
        for file in ["results.csv", "curve_s2.csv", "instance_s2.json", "config.toml"] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} should be byte-identical");
        }
        let ckpt_a = std::fs::read(dir_a.path().join("ckpt_s2_final/actor.bin")).unwrap();
        let ckpt_b = std::fs::read(dir_b.path().join("ckpt_s2_final/actor.bin")).unwrap();
        assert_eq!(ckpt_a, ckpt_b);
    }

    #[test]
    fn merged_curves_smooth_with_a_trailing_window() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("curve_s1.csv"),
            "episode,sum_reward,mean_mse,actor_loss,critic_loss,entropy\n\
             0,-4,4,0,0,0\n1,-2,2,0,0,0\n2,-6,6,0,0,0\n",
        )
        .unwrap();
        let out = export_curves(dir.path(), 2).unwrap();
        let text = std::fs::read_to_string(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario,episode,sum_reward,mean_mse,mean_mse_smoothed");
        assert_eq!(lines[1], "1,0,-4,4,4");
        assert_eq!(lines[2], "1,1,-2,2,3");
        assert_eq!(lines[3], "1,2,-6,6,4");
    }
}
