//! Command-line front end: instance generation, stability certification,
//! training, evaluation, full experiment runs, and curve export.

use clap::{Parser, Subcommand, ValueEnum};
use estalloc::actions::Scenario;
use estalloc::baselines::{Baseline, BaselineKind};
use estalloc::harness::{
    build_env, export_curves, gen_instance, load_instance, recheck_stability, run_experiment,
    save_instance, ExperimentConfig,
};
use estalloc::ppo::{
    default_episodes, evaluate_baseline, evaluate_policy, load_checkpoint, save_checkpoint, train,
};
use estalloc::rng::{stream, STREAM_POLICY};
use std::path::PathBuf;
use std::process::ExitCode;

/// Experiments above this per-scenario episode count need `--full`.
const FULL_RUN_GATE_EPISODES: usize = 3000;

#[derive(Parser)]
#[command(
    name = "estalloc",
    version,
    about = "Simulate, certify, and train schedulers for remote state estimation over fading channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliPolicy {
    Ppo,
    Random,
    RoundRobin,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Draw stability-gated problem instances from a config
    GenInstance {
        /// Experiment config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Directory for instance_s{k}.json files
        #[arg(long)]
        out_dir: PathBuf,
        /// Single scenario number (default: every scenario in the config)
        #[arg(long)]
        scenario: Option<u8>,
    },
    /// Re-run the stability certificate of a stored instance
    CheckStability {
        /// Instance JSON produced by gen-instance
        #[arg(long)]
        instance: PathBuf,
    },
    /// Train a policy on a stored instance
    Train {
        /// Experiment config (TOML) supplying seeds and the [train] table
        #[arg(long)]
        config: PathBuf,
        /// Instance JSON to train on
        #[arg(long)]
        instance: PathBuf,
        /// Directory for checkpoints and the training curve
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run one policy on a stored instance and report its mean cost
    Evaluate {
        /// Instance JSON to evaluate on
        #[arg(long)]
        instance: PathBuf,
        /// Which policy to run
        #[arg(long, value_enum)]
        policy: CliPolicy,
        /// Checkpoint directory (required for --policy ppo)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Slots to simulate
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Seed for the fading, decoding, and policy streams
        #[arg(long, default_value_t = 10_001)]
        seed: u64,
    },
    /// Full pipeline: instances, training, evaluation, results.csv
    RunExperiment {
        /// Experiment config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output directory
        #[arg(long)]
        out_dir: PathBuf,
        /// Cap episodes at 50 and evaluation at 1000 slots for a quick pass
        #[arg(long, conflicts_with = "full")]
        smoke: bool,
        /// Confirm an overnight-scale run (over 3000 episodes per scenario)
        #[arg(long)]
        full: bool,
    },
    /// Merge curve_s{k}.csv files and add a smoothed cost column
    ExportCurves {
        /// Directory holding curve_s{k}.csv files
        #[arg(long)]
        dir: PathBuf,
        /// Trailing moving-average window, in episodes
        #[arg(long, default_value_t = 25)]
        window: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> estalloc::Result<()> {
    match cli.command {
        Command::GenInstance { config, out_dir, scenario } => {
            let cfg = ExperimentConfig::load(&config)?;
            let scenarios: Vec<u8> = match scenario {
                Some(k) => vec![k],
                None => cfg.scenarios.clone(),
            };
            std::fs::create_dir_all(&out_dir)?;
            for k in scenarios {
                let instance = gen_instance(&cfg, Scenario::from_number(k)?)?;
                let path = out_dir.join(format!("instance_s{k}.json"));
                save_instance(&path, &instance)?;
                let gate = match &instance.stability {
                    Some(report) => format!(
                        "sufficient_margin={} necessary_margin={}",
                        report.sufficient_margin, report.necessary_margin
                    ),
                    None => "uncertified (joint space above cap)".to_string(),
                };
                println!(
                    "scenario {k}: wrote {} after {} resamples; {gate}",
                    path.display(),
                    instance.resamples
                );
            }
            Ok(())
        }
        Command::CheckStability { instance } => {
            let instance = load_instance(&instance)?;
            let report = recheck_stability(&instance)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Train { config, instance, out_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let instance = load_instance(&instance)?;
            let mut env = build_env(&instance, cfg.train_seed)?;
            std::fs::create_dir_all(&out_dir)?;
            let result = train(&mut env, &cfg.train, cfg.train_seed, Some(&out_dir))?;

            let k = instance.scenario;
            let curve_path = out_dir.join(format!("curve_s{k}.csv"));
            let mut text =
                String::from("episode,sum_reward,mean_mse,actor_loss,critic_loss,entropy\n");
            for p in &result.curve {
                use std::fmt::Write as _;
                writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    p.episode, p.sum_reward, p.mean_mse, p.actor_loss, p.critic_loss, p.entropy
                )
                .expect("writing to a String cannot fail");
            }
            std::fs::write(&curve_path, text)?;
            let final_dir = out_dir.join(format!("ckpt_s{k}_final"));
            let best_dir = out_dir.join(format!("ckpt_s{k}_best"));
            save_checkpoint(&final_dir, &env, &result.actor, &result.critic)?;
            save_checkpoint(&best_dir, &env, &result.best_actor, &result.best_critic)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "scenario": k,
                    "episodes": result.curve.len(),
                    "best_episode": result.best_episode,
                    "final_episode_mean_mse": result.curve.last().map(|p| p.mean_mse),
                    "curve": curve_path,
                    "checkpoint_final": final_dir,
                    "checkpoint_best": best_dir,
                }))?
            );
            Ok(())
        }
        Command::Evaluate { instance, policy, checkpoint, steps, seed } => {
            let instance = load_instance(&instance)?;
            let mut env = build_env(&instance, seed)?;
            let (name, mean_mse) = match policy {
                CliPolicy::Ppo => {
                    let dir = checkpoint.ok_or_else(|| {
                        estalloc::Error::InvalidConfig(
                            "--policy ppo needs --checkpoint <DIR>".into(),
                        )
                    })?;
                    let (_, actor, _) = load_checkpoint(&dir)?;
                    ("ppo", evaluate_policy(&mut env, &actor, steps)?)
                }
                baseline => {
                    let kind = match baseline {
                        CliPolicy::Random => BaselineKind::Random,
                        CliPolicy::RoundRobin => BaselineKind::RoundRobin,
                        CliPolicy::Greedy => BaselineKind::GreedyAoiGain,
                        CliPolicy::Ppo => unreachable!(),
                    };
                    let name = match kind {
                        BaselineKind::Random => "random",
                        BaselineKind::RoundRobin => "round_robin",
                        BaselineKind::GreedyAoiGain => "greedy",
                    };
                    let mut rng = stream(seed, STREAM_POLICY);
                    let mut baseline = Baseline::new(kind);
                    (name, evaluate_baseline(&mut env, &mut baseline, steps, &mut rng)?)
                }
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "scenario": instance.scenario,
                    "policy": name,
                    "steps": steps,
                    "seed": seed,
                    "mean_mse": mean_mse,
                }))?
            );
            Ok(())
        }
        Command::RunExperiment { config, out_dir, smoke, full } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let configured = cfg
                .train
                .episodes
                .unwrap_or_else(|| default_episodes(cfg.n_sensors, cfg.m_channels));
            if smoke {
                cfg.train.episodes = Some(configured.min(50));
                cfg.eval_steps = cfg.eval_steps.min(1000);
            } else if !full && configured > FULL_RUN_GATE_EPISODES {
                return Err(estalloc::Error::InvalidConfig(format!(
                    "this config trains {configured} episodes per scenario, which is an \
                     overnight-scale run; pass --full to confirm it or --smoke for a capped pass"
                )));
            }
            let rows = run_experiment(&cfg, &out_dir)?;
            println!("scenario,policy,mean_mse,std_mse");
            for row in &rows {
                println!("{},{},{},{}", row.scenario, row.policy, row.mean_mse, row.std_mse);
            }
            println!("wrote {}", out_dir.join("results.csv").display());
            Ok(())
        }
        Command::ExportCurves { dir, window } => {
            let path = export_curves(&dir, window)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
