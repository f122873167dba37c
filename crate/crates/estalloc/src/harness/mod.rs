//! Experiment orchestration: TOML configuration, reproducible instance
//! generation behind the stability gate, full training-plus-evaluation runs,
//! and training-curve export.

pub mod config;
pub mod experiment;
pub mod instance;

pub use config::ExperimentConfig;
pub use experiment::{export_curves, run_experiment, PolicyRow};
pub use instance::{
    build_env, gen_instance, load_instance, recheck_stability, save_instance, Instance,
    StabilityGate, INSTANCE_FORMAT_VERSION, RESAMPLE_CAP,
};
