use rand::seq::SliceRandom;

use super::DemoDataset;
use crate::autodiff::{Tape, Tensor};
use crate::nets::{GaussianPolicy, NetworkSpec};
use crate::optim::Adam;
use crate::rng::{derive_seed, rng_from, tags};
use crate::rollout::{rows_tensor, Agent, RunningNormalizer};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BcConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            minibatch: 64,
            lr: 1e-3,
            hidden: crate::nets::DEFAULT_POLICY_HIDDEN.to_vec(),
        }
    }
}

pub struct BcResult {
    pub agent: Agent,
    /// Mean negative log-likelihood per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Gaussian maximum-likelihood fit of a policy to the demonstrations, with
/// states normalized by the demo set's own (frozen) statistics.
pub fn bc_train(demos: &DemoDataset, config: &BcConfig, seed: u64) -> Result<BcResult> {
    if config.epochs == 0 || config.minibatch == 0 || !(config.lr > 0.0) {
        return Err(Error::Config("bc epochs, minibatch and lr must be positive".into()));
    }
    let mut normalizer = RunningNormalizer::fit(demos.obs_dim(), demos.pairs().iter().map(|p| p.state.as_slice()));
    normalizer.frozen = true;
    let states: Vec<Vec<f64>> = demos.pairs().iter().map(|p| normalizer.normalize(&p.state)).collect();
    let mut policy = GaussianPolicy::new(
        NetworkSpec::new(demos.obs_dim(), config.hidden.clone(), demos.act_dim())?,
        derive_seed(seed, tags::POLICY_INIT),
    );
    let mut adam = Adam::new(config.lr);
    let mut rng = rng_from(seed, tags::BC);
    let mut order: Vec<usize> = (0..demos.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.minibatch) {
            let mut tape = Tape::new();
            let vars = policy.register(&mut tape);
            let s = tape.leaf(rows_tensor(chunk.iter().map(|&i| states[i].as_slice())));
            let a = tape.leaf(rows_tensor(chunk.iter().map(|&i| demos.pairs()[i].action.as_slice())));
            let lp = policy.log_prob_tape(&mut tape, &vars, s, a)?;
            let mean_lp = tape.mean(lp)?;
            let loss = tape.neg(mean_lp)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "behavior cloning loss".into(),
                    iteration: epoch,
                });
            }
            total += value * chunk.len() as f64;
            let g = tape.backward(loss)?;
            let grads: Vec<Tensor> = vars.mean.iter().chain(std::iter::once(&vars.log_std)).map(|&v| g.wrt(v)).collect();
            adam.step(&mut policy.tensors_mut(), &grads);
            policy.clamp_log_std();
        }
        epoch_losses.push(total / demos.len() as f64);
    }
    Ok(BcResult {
        agent: Agent::new(policy, normalizer),
        epoch_losses,
    })
}
