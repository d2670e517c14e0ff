//! Deterministic continuous-control environments and episode evaluation.
//!
//! `pointmass`: a 2-D point with first-order velocity lag driven toward a
//! fixed goal. `pendulum`: torque-limited swing-up with `theta = 0` upright.
//! True rewards are used for expert training, evaluation and scoring only.

mod pendulum;
mod pointmass;

use std::fmt;
use std::str::FromStr;

pub use pendulum::Pendulum;
pub use pointmass::{PointMass, GOAL};

use crate::rng::{derive_seed, rng_from, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub act_low: Vec<f64>,
    pub act_high: Vec<f64>,
    pub horizon: usize,
}

impl EnvSpec {
    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.act_low.iter().zip(&self.act_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode; the initial state is a function of `seed` only.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advance one step. Actions are clamped to the bounds first. Calling
    /// `step` after `done` is an error.
    fn step(&mut self, action: &[f64]) -> Result<Step>;

    /// Steps taken in the current episode.
    fn elapsed(&self) -> usize;
}

pub(crate) fn check_action(spec: &EnvSpec, action: &[f64], elapsed: usize) -> Result<Vec<f64>> {
    if elapsed >= spec.horizon {
        return Err(Error::EpisodeFinished {
            step: elapsed,
            horizon: spec.horizon,
        });
    }
    if action.len() != spec.act_dim {
        return Err(Error::Dimension {
            what: "action",
            expected: spec.act_dim,
            got: action.len(),
        });
    }
    Ok(spec.clip_action(action))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvId {
    PointMass,
    Pendulum,
}

impl EnvId {
    pub fn make(self) -> Box<dyn Env> {
        match self {
            EnvId::PointMass => Box::new(PointMass::new()),
            EnvId::Pendulum => Box::new(Pendulum::new()),
        }
    }

    /// Environment with a non-default episode length.
    pub fn make_with_horizon(self, horizon: usize) -> Box<dyn Env> {
        match self {
            EnvId::PointMass => Box::new(PointMass::with_horizon(horizon)),
            EnvId::Pendulum => Box::new(Pendulum::with_horizon(horizon)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::PointMass => "pointmass",
            EnvId::Pendulum => "pendulum",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointmass" => Ok(EnvId::PointMass),
            "pendulum" => Ok(EnvId::Pendulum),
            other => Err(Error::Invalid(format!(
                "unknown environment {other:?} (expected pointmass or pendulum)"
            ))),
        }
    }
}

/// Anything that maps an observation to an action.
pub trait Controller {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>>;
}

impl<F: FnMut(&[f64]) -> Vec<f64>> Controller for F {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self(obs))
    }
}

/// Uniform random actions within the bounds.
pub struct RandomController {
    low: Vec<f64>,
    high: Vec<f64>,
    rng: Rng,
}

impl RandomController {
    pub fn new(spec: &EnvSpec, seed: u64) -> Self {
        Self {
            low: spec.act_low.clone(),
            high: spec.act_high.clone(),
            rng: rng_from(seed, 0),
        }
    }
}

impl Controller for RandomController {
    fn act(&mut self, _obs: &[f64]) -> Result<Vec<f64>> {
        use rand::Rng as _;
        Ok(self
            .low
            .iter()
            .zip(&self.high)
            .map(|(&lo, &hi)| self.rng.gen_range(lo..hi))
            .collect())
    }
}

/// Summed true reward of one full episode started from `seed`.
pub fn run_episode(env: &mut dyn Env, controller: &mut dyn Controller, seed: u64) -> Result<f64> {
    let mut obs = env.reset(seed);
    let mut total = 0.0;
    loop {
        let action = controller.act(&obs)?;
        let step = env.step(&action)?;
        total += step.reward;
        if step.done {
            return Ok(total);
        }
        obs = step.obs;
    }
}

/// Seed of evaluation episode `i` for evaluation seed `seed`.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, i as u64)
}

/// Mean undiscounted true return over `episodes` complete episodes.
pub fn true_return(env: &mut dyn Env, controller: &mut dyn Controller, episodes: usize, seed: u64) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::Invalid("true_return needs at least one episode".into()));
    }
    let mut sum = 0.0;
    for i in 0..episodes {
        sum += run_episode(env, controller, episode_seed(seed, i))?;
    }
    Ok(sum / episodes as f64)
}
