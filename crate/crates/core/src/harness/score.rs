//! Normalized scores and their reference returns.

use super::config::RunConfig;
use crate::envs::{true_return, EnvId, RandomController};
use crate::expert::{DemoDataset, ScriptedPointMass};
use crate::rng::{derive_seed, tags};
use crate::{Error, Result};

/// `(r - random) / (expert - random)`, deliberately unclipped.
pub fn normalized_score(r: f64, random: f64, expert: f64) -> Result<f64> {
    let denom = expert - random;
    if !(denom.abs() > 1e-12) || !denom.is_finite() {
        return Err(Error::Invalid(format!(
            "normalized score undefined: expert reference {expert} equals random reference {random}"
        )));
    }
    Ok((r - random) / denom)
}

/// Mean of the last `window` values (all of them when fewer).
pub fn final_score(values: &[f64], window: usize) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let tail = &values[values.len().saturating_sub(window.max(1))..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct References {
    pub random: f64,
    pub expert: f64,
}

impl References {
    /// Random reference: uniform random actions on the run's evaluation
    /// episodes. Expert reference: the configured override, else the scripted
    /// controller on the same episodes (PointMass), else the demo mean return.
    pub fn compute(config: &RunConfig, demos: Option<&DemoDataset>) -> Result<Self> {
        let seed = config.seed;
        let eval_seed = derive_seed(seed, tags::EVAL);
        let mut env = config.env.make();
        let mut random = RandomController::new(env.spec(), derive_seed(seed, tags::RANDOM_REFERENCE));
        let random = true_return(env.as_mut(), &mut random, config.eval_episodes, eval_seed)?;
        let expert = match (config.expert_return, config.env, demos) {
            (Some(v), _, _) => v,
            (None, EnvId::PointMass, _) => true_return(env.as_mut(), &mut ScriptedPointMass, config.eval_episodes, eval_seed)?,
            (None, _, Some(d)) => d.mean_return(),
            (None, env, None) => {
                return Err(Error::Config(format!(
                    "no expert reference for {env}: set expert_return or provide demos"
                )))
            }
        };
        normalized_score(expert, random, expert)?;
        Ok(Self { random, expert })
    }
}
