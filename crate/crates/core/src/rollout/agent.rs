use std::path::Path;

use super::RunningNormalizer;
use crate::autodiff::Tensor;
use crate::envs::Controller;
use crate::nets::checkpoint::{load_tensors, save_tensors};
use crate::nets::{GaussianPolicy, Mlp};
use crate::{Error, Result};

/// A policy together with the observation statistics it was trained under.
///
/// As a [`Controller`] it acts with the mean action on normalized
/// observations and never updates the statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub policy: GaussianPolicy,
    pub normalizer: RunningNormalizer,
}

impl Agent {
    pub fn new(policy: GaussianPolicy, normalizer: RunningNormalizer) -> Self {
        Self { policy, normalizer }
    }

    pub fn mean_action(&self, raw_obs: &[f64]) -> Result<Vec<f64>> {
        self.policy.mean_action(&self.normalizer.normalize(raw_obs))
    }

    /// Tensors in checkpoint order: `count [1,1]`, `mean [1,d]`, `var [1,d]`,
    /// the mean-network parameters, then `log_std`.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        let mut out = vec![
            Tensor::scalar(self.normalizer.count()),
            Tensor::row(self.normalizer.mean()),
            Tensor::row(self.normalizer.var()),
        ];
        out.extend(self.policy.tensors().into_iter().cloned());
        out
    }

    pub fn from_tensors(mut tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() < 6 {
            return Err(Error::Invalid(format!(
                "agent checkpoint needs at least 6 tensors, found {}",
                tensors.len()
            )));
        }
        let log_std = tensors.pop().expect("length checked");
        let params = tensors.split_off(3);
        let [count, mean, var]: [Tensor; 3] = tensors.try_into().expect("three left");
        if !count.is_scalar() || mean.len() != var.len() {
            return Err(Error::Invalid("malformed normalizer statistics in agent checkpoint".into()));
        }
        let policy = GaussianPolicy::from_parts(Mlp::from_params(params)?, log_std)?;
        if policy.obs_dim() != mean.len() {
            return Err(Error::Dimension {
                what: "normalizer statistics",
                expected: policy.obs_dim(),
                got: mean.len(),
            });
        }
        let normalizer = RunningNormalizer::from_stats(count.item(), mean.into_data(), var.into_data());
        Ok(Self { policy, normalizer })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_tensors(path, self.to_tensors().iter())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensors(load_tensors(path)?)
    }
}

impl Controller for Agent {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_action(obs)
    }
}
