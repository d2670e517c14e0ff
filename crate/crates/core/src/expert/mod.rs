//! Expert policies, demonstration datasets and the behavior-cloning baseline.

mod bc;
mod demos;
mod train;

pub use bc::{bc_train, BcConfig, BcResult};
pub use demos::{
    load_demos, record_demos, record_episode_seed, save_demos, DemoDataset, DemoPair, MAGIC, MAX_TRAJECTORY_PAIRS, VERSION,
};
pub use train::{evaluate_agent, train_expert, ExpertTrainConfig, TrainedExpert};

use crate::envs::{Controller, GOAL};
use crate::Result;

pub const PD_POSITION_GAIN: f64 = 4.0;
pub const PD_VELOCITY_GAIN: f64 = 1.0;

/// PD controller for PointMass: `clamp(4 (g - p) - v, -1, 1)` per axis, on
/// the raw observation `(px, py, vx, vy)`.
pub fn scripted_expert_pointmass(obs: &[f64]) -> Vec<f64> {
    (0..2)
        .map(|i| (PD_POSITION_GAIN * (GOAL[i] - obs[i]) - PD_VELOCITY_GAIN * obs[2 + i]).clamp(-1.0, 1.0))
        .collect()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptedPointMass;

impl Controller for ScriptedPointMass {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != 4 {
            return Err(crate::Error::Dimension {
                what: "PointMass observation",
                expected: 4,
                got: obs.len(),
            });
        }
        Ok(scripted_expert_pointmass(obs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_examples() {
        assert_eq!(scripted_expert_pointmass(&[0.5, 0.5, 0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(scripted_expert_pointmass(&[0.0, 0.0, 0.0, 0.0]), vec![1.0, 1.0]);
        let a = scripted_expert_pointmass(&[0.45, 0.5, 0.1, 0.0]);
        assert!((a[0] - 0.1).abs() < 1e-12 && a[1] == 0.0, "{a:?}");
        assert!(ScriptedPointMass.act(&[0.0; 3]).is_err());
    }
}
