use std::f64::consts::{E, PI};

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{Mlp, NetworkSpec};
use crate::autodiff::{Tape, Tensor, Var};
use crate::rng::Rng;
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Output-layer gain of the mean network; keeps initial means near zero.
pub const POLICY_OUTPUT_GAIN: f64 = 0.01;

/// Diagonal Gaussian policy with a state-independent log standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Tensor,
}

/// Parameter nodes of a policy registered on a tape.
pub struct PolicyVars {
    pub mean: Vec<Var>,
    pub log_std: Var,
}

impl GaussianPolicy {
    pub fn new(spec: NetworkSpec, seed: u64) -> Self {
        let act_dim = spec.output_dim;
        Self {
            mean: Mlp::init(spec, POLICY_OUTPUT_GAIN, seed),
            log_std: Tensor::zeros(1, act_dim),
        }
    }

    pub fn from_parts(mean: Mlp, log_std: Tensor) -> Result<Self> {
        if log_std.shape() != [1, mean.spec().output_dim] {
            return Err(Error::Invalid(format!(
                "log_std shape {:?} does not match action dim {}",
                log_std.shape(),
                mean.spec().output_dim
            )));
        }
        let mut p = Self { mean, log_std };
        p.clamp_log_std();
        Ok(p)
    }

    pub fn obs_dim(&self) -> usize {
        self.mean.spec().input_dim
    }

    pub fn act_dim(&self) -> usize {
        self.mean.spec().output_dim
    }

    pub fn clamp_log_std(&mut self) {
        for v in self.log_std.data_mut() {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.obs_dim() {
            return Err(Error::Dimension {
                what: "policy state",
                expected: self.obs_dim(),
                got: state.len(),
            });
        }
        Ok(())
    }

    /// Action mean and log standard deviation at `state`.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_state(state)?;
        let mean = self.mean.forward(&Tensor::row(state))?.into_data();
        Ok((mean, self.log_std.data().to_vec()))
    }

    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(state)?.0)
    }

    /// Draw an action and return it with its log-probability.
    pub fn sample(&self, state: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let (mean, log_std) = self.forward(state)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(&m, &ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = gaussian_log_prob(&mean, &log_std, &action);
        Ok((action, lp))
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.act_dim() {
            return Err(Error::Dimension {
                what: "policy action",
                expected: self.act_dim(),
                got: action.len(),
            });
        }
        let (mean, log_std) = self.forward(state)?;
        Ok(gaussian_log_prob(&mean, &log_std, action))
    }

    pub fn entropy(&self) -> f64 {
        gaussian_entropy(self.log_std.data())
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.mean.params().iter().chain(std::iter::once(&self.log_std)).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.mean
            .params_mut()
            .iter_mut()
            .chain(std::iter::once(&mut self.log_std))
            .collect()
    }

    pub fn register(&self, tape: &mut Tape) -> PolicyVars {
        PolicyVars {
            mean: self.mean.register(tape),
            log_std: tape.leaf(self.log_std.clone()),
        }
    }

    /// Per-row log-probabilities `[n, 1]` of `actions` under the recorded policy.
    pub fn log_prob_tape(&self, tape: &mut Tape, vars: &PolicyVars, states: Var, actions: Var) -> Result<Var> {
        let mu = self.mean.forward_tape(tape, &vars.mean, states)?;
        let diff = tape.sub(actions, mu)?;
        let std = tape.exp(vars.log_std)?;
        let z = tape.div(diff, std)?;
        let z2 = tape.square(z)?;
        let quad = tape.sum_cols(z2)?;
        let quad = tape.scale(quad, -0.5)?;
        let log_det = tape.sum(vars.log_std)?;
        let lp = tape.sub(quad, log_det)?;
        let norm = -0.5 * self.act_dim() as f64 * (2.0 * PI).ln();
        Ok(tape.add_scalar(lp, norm)?)
    }

    pub fn entropy_tape(&self, tape: &mut Tape, vars: &PolicyVars) -> Result<Var> {
        let s = tape.sum(vars.log_std)?;
        Ok(tape.add_scalar(s, self.act_dim() as f64 * 0.5 * (2.0 * PI * E).ln())?)
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - half_log_2pi
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    let c = 0.5 * (2.0 * PI * E).ln();
    log_std.iter().map(|ls| ls + c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn policy(obs: usize, act: usize) -> GaussianPolicy {
        GaussianPolicy::new(NetworkSpec::new(obs, vec![64, 64], act).unwrap(), 0)
    }

    #[test]
    fn log_prob_reference_values() {
        let lp0 = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp0 + 0.918_938_533_204_672_7).abs() < 1e-12);
        let lp1 = gaussian_log_prob(&[0.0], &[0.0], &[1.0]);
        assert!((lp1 + 1.418_938_533_204_672_7).abs() < 1e-12);
        let two = gaussian_log_prob(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]);
        assert!((two - (lp0 + lp1)).abs() < 1e-12);
    }

    #[test]
    fn entropy_reference_values() {
        assert!((gaussian_entropy(&[0.0]) - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((gaussian_entropy(&[0.0, 0.0]) - 2.837_877_066_409_345_5).abs() < 1e-12);
        assert!((gaussian_entropy(&[1.0]) - 2.418_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn initial_std_is_one_and_means_small() {
        let p = policy(4, 2);
        let (_, log_std) = p.forward(&[0.0; 4]).unwrap();
        assert!(log_std.iter().all(|&l| l.exp() == 1.0));
        let mut rng = rng_from(1, 1);
        for _ in 0..200 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (mean, _) = p.forward(&s).unwrap();
            assert!(mean.iter().all(|m| m.abs() < 0.5), "{mean:?}");
        }
    }

    #[test]
    fn forward_is_deterministic_and_checks_dims() {
        let p = policy(3, 1);
        assert_eq!(p.forward(&[0.1, 0.2, 0.3]).unwrap(), p.forward(&[0.1, 0.2, 0.3]).unwrap());
        assert!(matches!(p.forward(&[0.0; 2]), Err(Error::Dimension { .. })));
        assert!(p.log_prob(&[0.0; 3], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn log_std_is_clamped() {
        let mut p = policy(2, 2);
        p.log_std.data_mut().copy_from_slice(&[-9.0, 7.0]);
        p.clamp_log_std();
        assert_eq!(p.log_std.data(), &[LOG_STD_MIN, LOG_STD_MAX]);
    }

    #[test]
    fn recorded_log_prob_and_entropy_match_plain() {
        let mut p = policy(3, 2);
        p.log_std.data_mut().copy_from_slice(&[-0.3, 0.4]);
        let states = Tensor::new(2, 3, vec![0.1, 0.2, -0.3, 1.0, -1.0, 0.5]).unwrap();
        let actions = Tensor::new(2, 2, vec![0.5, -0.2, 1.5, 0.0]).unwrap();
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let s = tape.leaf(states.clone());
        let a = tape.leaf(actions.clone());
        let lp = p.log_prob_tape(&mut tape, &vars, s, a).unwrap();
        for r in 0..2 {
            let plain = p.log_prob(states.row_slice(r), actions.row_slice(r)).unwrap();
            assert!((tape.value(lp).get(r, 0) - plain).abs() < 1e-12);
        }
        let h = p.entropy_tape(&mut tape, &vars).unwrap();
        assert!((tape.value(h).item() - p.entropy()).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let (mu, ls) = (0.3, -0.2_f64);
        let sigma = ls.exp();
        let n = 20_000;
        let (lo, hi) = (mu - 6.0 * sigma, mu + 6.0 * sigma);
        let h = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| gaussian_log_prob(&[mu], &[ls], &[lo + (i as f64 + 0.5) * h]).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn entropy_matches_negative_mean_log_prob() {
        let mut p = policy(2, 2);
        p.log_std.data_mut().copy_from_slice(&[0.2, -0.7]);
        let mut rng = rng_from(9, 0);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| -p.sample(&[0.5, -0.5], &mut rng).unwrap().1)
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - p.entropy()).abs() < 3.0 * se, "{mean} vs {}", p.entropy());
    }
}
