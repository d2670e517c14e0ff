//! On-policy data collection, observation normalization and advantages.

mod agent;
mod gae;
mod normalizer;

use std::mem;

pub use agent::Agent;
pub use gae::{compute_gae, gae, standardize};
pub use normalizer::{RunningNormalizer, NORM_CLIP, NORM_EPS};

use crate::autodiff::Tensor;
use crate::envs::{episode_seed, Env};
use crate::nets::{GaussianPolicy, ValueNet};
use crate::rng::{rng_from, tags, Rng};
use crate::{Error, Result};

pub const DEFAULT_ROLLOUT_STEPS: usize = 2048;
pub const DEFAULT_GAMMA: f64 = 0.99;
pub const DEFAULT_GAE_LAMBDA: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// Observation after normalization with the statistics at collection time.
    pub state: Vec<f64>,
    pub raw_state: Vec<f64>,
    /// Sampled (unclipped) action; the log-probability refers to this value.
    pub action: Vec<f64>,
    /// The action after clamping to the environment bounds.
    pub applied_action: Vec<f64>,
    pub imitation_reward: Option<f64>,
    pub true_reward: f64,
    pub done: bool,
    pub value: f64,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub return_target: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryBuffer {
    pub transitions: Vec<Transition>,
    /// Index of the first transition of every (possibly partial) episode.
    pub episode_starts: Vec<usize>,
    /// Normalized observation following the last transition.
    pub last_state: Vec<f64>,
    /// True returns of the episodes that finished inside this buffer.
    pub finished_returns: Vec<f64>,
    pub(crate) advantages_ready: bool,
}

impl TrajectoryBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn advantages_ready(&self) -> bool {
        self.advantages_ready
    }

    /// Store one imitation reward per transition. Invalidates advantages.
    pub fn set_rewards(&mut self, rewards: &[f64]) -> Result<()> {
        if rewards.len() != self.len() {
            return Err(Error::Dimension {
                what: "reward labels",
                expected: self.len(),
                got: rewards.len(),
            });
        }
        for (t, &r) in self.transitions.iter_mut().zip(rewards) {
            t.imitation_reward = Some(r);
        }
        self.advantages_ready = false;
        Ok(())
    }

    /// Use the environment reward as the learning signal.
    pub fn use_true_rewards(&mut self) {
        for t in &mut self.transitions {
            t.imitation_reward = Some(t.true_reward);
        }
        self.advantages_ready = false;
    }

    pub fn states(&self) -> Tensor {
        rows_tensor(self.transitions.iter().map(|t| t.state.as_slice()))
    }

    pub fn actions(&self) -> Tensor {
        rows_tensor(self.transitions.iter().map(|t| t.action.as_slice()))
    }

    /// Segment lengths implied by `episode_starts`.
    pub fn episode_lengths(&self) -> Vec<usize> {
        let mut ends: Vec<usize> = self.episode_starts.iter().skip(1).copied().collect();
        ends.push(self.len());
        self.episode_starts.iter().zip(ends).map(|(s, e)| e - s).collect()
    }
}

pub(crate) fn rows_tensor<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Tensor {
    let mut cols = 0;
    let mut n = 0;
    let mut data = Vec::new();
    for r in rows {
        cols = r.len();
        n += 1;
        data.extend_from_slice(r);
    }
    Tensor::new(n, cols, data).expect("rows have equal length")
}

/// Steps an environment with a stochastic policy, carrying the episode in
/// progress over from one call of [`Collector::collect`] to the next.
pub struct Collector {
    env: Box<dyn Env>,
    seed: u64,
    rng: Rng,
    episodes_started: usize,
    obs: Vec<f64>,
    episode_return: f64,
}

impl Collector {
    pub fn new(mut env: Box<dyn Env>, seed: u64) -> Self {
        let obs = env.reset(episode_seed(seed, 0));
        Self {
            env,
            seed,
            rng: rng_from(seed, tags::COLLECT),
            episodes_started: 1,
            obs,
            episode_return: 0.0,
        }
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    /// Collect exactly `steps` transitions under `policy`, updating the
    /// normalizer online with each raw observation before it is used.
    pub fn collect(
        &mut self,
        policy: &GaussianPolicy,
        value: &ValueNet,
        normalizer: &mut RunningNormalizer,
        steps: usize,
    ) -> Result<TrajectoryBuffer> {
        if steps == 0 {
            return Err(Error::Invalid("rollout length must be at least 1".into()));
        }
        let mut buf = TrajectoryBuffer {
            transitions: Vec::with_capacity(steps),
            episode_starts: vec![0],
            ..Default::default()
        };
        for i in 0..steps {
            normalizer.update(&self.obs);
            let state = normalizer.normalize(&self.obs);
            let (action, log_prob_old) = policy.sample(&state, &mut self.rng)?;
            let v = value.value(&state)?;
            let applied_action = self.env.spec().clip_action(&action);
            let step = self.env.step(&applied_action)?;
            self.episode_return += step.reward;
            let raw_state = mem::replace(&mut self.obs, step.obs);
            buf.transitions.push(Transition {
                state,
                raw_state,
                action,
                applied_action,
                imitation_reward: None,
                true_reward: step.reward,
                done: step.done,
                value: v,
                log_prob_old,
                advantage: 0.0,
                return_target: 0.0,
            });
            if step.done {
                buf.finished_returns.push(mem::take(&mut self.episode_return));
                self.obs = self.env.reset(episode_seed(self.seed, self.episodes_started));
                self.episodes_started += 1;
                if i + 1 < steps {
                    buf.episode_starts.push(i + 1);
                }
            }
        }
        buf.last_state = normalizer.normalize(&self.obs);
        Ok(buf)
    }
}

/// One-shot collection from a freshly reset environment.
pub fn collect(
    env: Box<dyn Env>,
    policy: &GaussianPolicy,
    value: &ValueNet,
    normalizer: &mut RunningNormalizer,
    steps: usize,
    seed: u64,
) -> Result<TrajectoryBuffer> {
    Collector::new(env, seed).collect(policy, value, normalizer, steps)
}
