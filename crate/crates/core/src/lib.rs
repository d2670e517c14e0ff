//! Adversarial imitation learning lab.
//!
//! A Wasserstein critic with gradient penalty (or weight clipping) scores
//! state-action pairs, one of six reward shapes turns the score into a reward,
//! and PPO improves a Gaussian policy against that reward. GAIL and behavior
//! cloning are included as baselines, and two deterministic toy environments
//! stand in for physics-engine tasks.
//!
//! Everything runs in `f64` on a small reverse-mode autodiff tape
//! ([`autodiff`]), and every source of randomness derives from one run seed.

pub mod adversary;
pub mod autodiff;
pub mod envs;
pub mod expert;
pub mod harness;
pub mod nets;
pub mod optim;
pub mod ppo;
pub mod rng;
pub mod rollout;

mod codec;
mod error;

pub use error::{Error, Result};
