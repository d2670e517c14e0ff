//! Clipped-surrogate PPO with a value loss and an entropy bonus.
//!
//! The learner descends on `-surrogate + c_v (V - target)^2 - c_H H(pi)`,
//! i.e. it maximizes the clipped objective. Policy and value gradients are
//! clipped jointly and applied by one Adam optimizer.

use rand::seq::SliceRandom;

use crate::autodiff::{Tape, Tensor};
use crate::nets::{GaussianPolicy, ValueNet};
use crate::optim::{clip_grad_norm, Adam};
use crate::rng::{rng_from, tags, Rng};
use crate::rollout::{rows_tensor, TrajectoryBuffer};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            epochs: 10,
            minibatch: 64,
            lr: 3e-4,
            value_coef: 0.5,
            entropy_coef: 1e-3,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if self.epochs == 0 {
            return bad("ppo_epochs must be at least 1");
        }
        if self.minibatch == 0 {
            return bad("minibatch must be at least 1");
        }
        if !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("lr_policy and max_grad_norm must be positive");
        }
        if !(self.value_coef >= 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("value_coef and entropy_coef must be non-negative");
        }
        Ok(())
    }
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Averages over all minibatch steps of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean of `log pi_old - log pi_new` over sampled transitions.
    pub approx_kl: f64,
    /// Fraction of samples whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
    /// Largest joint gradient norm seen before clipping.
    pub max_grad_norm_seen: f64,
    pub minibatches: usize,
}

/// Optimizer state and minibatch randomness carried across iterations.
pub struct PpoLearner {
    pub config: PpoConfig,
    adam: Adam,
    rng: Rng,
    updates: usize,
}

struct MinibatchOut {
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    kl_sum: f64,
    clipped: usize,
    grad_norm: f64,
}

impl PpoLearner {
    pub fn new(config: PpoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            adam: Adam::new(config.lr),
            config,
            rng: rng_from(seed, tags::PPO_SHUFFLE),
            updates: 0,
        })
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// `K` epochs of shuffled minibatch steps over `buffer`. On a non-finite
    /// loss the networks and optimizer are restored to their state at entry.
    pub fn update(
        &mut self,
        policy: &mut GaussianPolicy,
        value: &mut ValueNet,
        buffer: &TrajectoryBuffer,
    ) -> Result<UpdateStats> {
        if !buffer.advantages_ready() {
            return Err(Error::Invalid("advantages must be computed before the PPO update".into()));
        }
        if buffer.is_empty() {
            return Err(Error::InsufficientSamples {
                what: "PPO update",
                needed: 1,
                have: 0,
            });
        }
        let iteration = self.updates;
        self.updates += 1;
        let snapshot = (policy.clone(), value.clone(), self.adam.clone());
        match self.run_epochs(policy, value, buffer) {
            Ok(stats) => Ok(stats),
            Err(e) => {
                (*policy, *value, self.adam) = snapshot;
                Err(match e {
                    Error::NonFinite { what, .. } => Error::NonFinite { what, iteration },
                    other => other,
                })
            }
        }
    }

    fn run_epochs(&mut self, policy: &mut GaussianPolicy, value: &mut ValueNet, buffer: &TrajectoryBuffer) -> Result<UpdateStats> {
        let n = buffer.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats::default();
        let mut kl_sum = 0.0;
        let mut clipped = 0usize;
        let mut samples = 0usize;
        for _ in 0..self.config.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.config.minibatch) {
                let out = self.minibatch_step(policy, value, buffer, chunk)?;
                stats.policy_loss += out.policy_loss;
                stats.value_loss += out.value_loss;
                stats.entropy += out.entropy;
                stats.max_grad_norm_seen = stats.max_grad_norm_seen.max(out.grad_norm);
                stats.minibatches += 1;
                kl_sum += out.kl_sum;
                clipped += out.clipped;
                samples += chunk.len();
            }
        }
        let k = stats.minibatches as f64;
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.approx_kl = kl_sum / samples as f64;
        stats.clip_fraction = clipped as f64 / samples as f64;
        Ok(stats)
    }

    fn minibatch_step(
        &mut self,
        policy: &mut GaussianPolicy,
        value: &mut ValueNet,
        buffer: &TrajectoryBuffer,
        idx: &[usize],
    ) -> Result<MinibatchOut> {
        let cfg = &self.config;
        let tr = &buffer.transitions;
        let col = |f: &dyn Fn(usize) -> f64| Tensor::column(&idx.iter().map(|&i| f(i)).collect::<Vec<_>>());

        let mut tape = Tape::new();
        let pv = policy.register(&mut tape);
        let vv = value.net.register(&mut tape);
        let states = tape.leaf(rows_tensor(idx.iter().map(|&i| tr[i].state.as_slice())));
        let actions = tape.leaf(rows_tensor(idx.iter().map(|&i| tr[i].action.as_slice())));
        let old_lp = tape.leaf(col(&|i| tr[i].log_prob_old));
        let adv = tape.leaf(col(&|i| tr[i].advantage));
        let target = tape.leaf(col(&|i| tr[i].return_target));

        let lp = policy.log_prob_tape(&mut tape, &pv, states, actions)?;
        let log_ratio = tape.sub(lp, old_lp)?;
        let ratio = tape.exp(log_ratio)?;
        let unclipped = tape.mul(ratio, adv)?;
        let bounded = tape.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)?;
        let clipped_obj = tape.mul(bounded, adv)?;
        let surr = tape.minimum(unclipped, clipped_obj)?;
        let surr = tape.mean(surr)?;
        let policy_loss = tape.neg(surr)?;

        let v = value.net.forward_tape(&mut tape, &vv, states)?;
        let err = tape.sub(v, target)?;
        let sq = tape.square(err)?;
        let value_loss = tape.mean(sq)?;
        let entropy = policy.entropy_tape(&mut tape, &pv)?;

        let weighted_v = tape.scale(value_loss, cfg.value_coef)?;
        let weighted_h = tape.scale(entropy, -cfg.entropy_coef)?;
        let total = tape.add(policy_loss, weighted_v)?;
        let total = tape.add(total, weighted_h)?;

        let total_value = tape.value(total).item();
        if !total_value.is_finite() {
            return Err(Error::NonFinite {
                what: format!("PPO loss ({total_value})"),
                iteration: 0,
            });
        }

        let ratios = tape.value(ratio).data();
        let kl_sum: f64 = tape.value(log_ratio).data().iter().map(|l| -l).sum();
        let clipped = ratios.iter().filter(|r| (*r - 1.0).abs() > cfg.clip_eps).count();
        let out = MinibatchOut {
            policy_loss: tape.value(policy_loss).item(),
            value_loss: tape.value(value_loss).item(),
            entropy: tape.value(entropy).item(),
            kl_sum,
            clipped,
            grad_norm: 0.0,
        };

        let g = tape.backward(total)?;
        let mut grads: Vec<Tensor> = pv.mean.iter().chain(std::iter::once(&pv.log_std)).chain(vv.iter()).map(|&p| g.wrt(p)).collect();
        let grad_norm = clip_grad_norm(&mut grads, cfg.max_grad_norm);
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite {
                what: "PPO gradient norm".into(),
                iteration: 0,
            });
        }
        let mut params = policy.tensors_mut();
        params.extend(value.net.params_mut().iter_mut());
        self.adam.step(&mut params, &grads);
        policy.clamp_log_std();
        Ok(MinibatchOut { grad_norm, ..out })
    }
}

/// One stateless PPO update with a fresh optimizer.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    value: &mut ValueNet,
    buffer: &TrajectoryBuffer,
    config: &PpoConfig,
    seed: u64,
) -> Result<UpdateStats> {
    PpoLearner::new(config.clone(), seed)?.update(policy, value, buffer)
}
