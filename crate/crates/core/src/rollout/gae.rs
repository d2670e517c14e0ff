use super::TrajectoryBuffer;
use crate::nets::ValueNet;
use crate::{Error, Result};

/// Generalized advantage estimates for one contiguous stretch of transitions.
///
/// `bootstrap` is `V(s_T)` for the state after the last transition; it is
/// ignored when that transition is terminal.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n);
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    adv
}

/// Shift and scale to zero mean and unit (population) standard deviation.
pub fn standardize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
}

/// Fill `advantage` and `return_target` of every transition, then standardize
/// the advantages across the buffer. Return targets use the raw advantages.
pub fn compute_gae(buffer: &mut TrajectoryBuffer, value: &ValueNet, gamma: f64, lambda: f64) -> Result<()> {
    let rewards = buffer
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.imitation_reward.ok_or_else(|| {
                Error::Invalid(format!("transition {i} has no reward; label rewards before computing advantages"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = buffer.transitions.iter().map(|t| t.value).collect();
    let dones: Vec<bool> = buffer.transitions.iter().map(|t| t.done).collect();
    let bootstrap = match buffer.transitions.last() {
        Some(last) if !last.done => value.value(&buffer.last_state)?,
        _ => 0.0,
    };
    let mut adv = gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
    for (t, a) in buffer.transitions.iter_mut().zip(&adv) {
        t.return_target = a + t.value;
    }
    standardize(&mut adv);
    for (t, a) in buffer.transitions.iter_mut().zip(adv) {
        t.advantage = a;
    }
    buffer.advantages_ready = true;
    Ok(())
}
