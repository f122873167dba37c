//! Dynamic radio resource allocation for remote state estimation.
//!
//! N sensors observe independent linear plants and send state estimates to a
//! fusion center over M shared wireless channels with Markov block fading.
//! Short packets fail probabilistically (finite-blocklength coding), so each
//! sensor's estimate carries an age; the fusion center pays the trace of an
//! age-propagated error covariance every slot. This crate provides:
//!
//! - the slot-level simulator for three medium-access scenarios — orthogonal
//!   access ([`phy::oma_receive`]), superposition with successive
//!   interference cancellation ([`phy::sic_receive`]), and multi-round
//!   interference-rejection combining ([`phy::irc_sic_receive`]) — wrapped
//!   into an MDP by [`env::Env`];
//! - a spectral-radius certificate for estimator stability over the joint
//!   fading chain ([`stability::check_stability`]);
//! - a from-scratch PPO trainer (flat-parameter MLPs, Adam, clipped
//!   surrogate, GAE) in [`neural`] and [`ppo`], with virtual-action decoders
//!   in [`actions`] and reference policies in [`baselines`];
//! - a reproducible experiment harness ([`harness`]) behind the `estalloc`
//!   binary: instance generation gated on the stability certificate,
//!   training, paired-seed evaluation, and deterministic CSV export.
//!
//! The `examples/` directory demonstrates each capability end to end;
//! `examples/train_smoke.rs` is the quickest full pass through the stack.

pub mod actions;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod neural;
pub mod phy;
pub mod ppo;
pub mod rng;
pub mod stability;

pub use actions::{ResourceAction, Scenario};
pub use channel::{ChannelStateSpace, GainKind, MarkovChannelModel};
pub use env::{Env, MdpState, RewardTiming};
pub use error::{Error, Result};
pub use estimation::{PlantModel, SteadyEstimator};
pub use harness::ExperimentConfig;
pub use phy::LinkBudget;
pub use stability::StabilityReport;
