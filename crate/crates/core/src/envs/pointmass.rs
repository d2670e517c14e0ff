use rand::Rng as _;

use super::{check_action, Env, EnvSpec, Step};
use crate::rng::rng_from;
use crate::Result;

pub const GOAL: [f64; 2] = [0.5, 0.5];
const VELOCITY_KEEP: f64 = 0.95;
const ACTION_GAIN: f64 = 0.05;
const DT: f64 = 0.05;
const ACTION_COST: f64 = 0.01;
const INIT_RANGE: f64 = 0.1;

/// Observation `(px, py, vx, vy)`, action in `[-1, 1]^2`.
///
/// `v <- 0.95 v + 0.05 a`, then `p <- p + 0.05 v`; the reward
/// `-|p - g|^2 - 0.01 |a|^2` is taken at the new position. Episodes start at
/// rest with `p` uniform in `[-0.1, 0.1]^2`.
pub struct PointMass {
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    elapsed: usize,
}

impl PointMass {
    pub const HORIZON: usize = 200;

    pub fn new() -> Self {
        Self::with_horizon(Self::HORIZON)
    }

    pub fn with_horizon(horizon: usize) -> Self {
        let mut env = Self {
            spec: EnvSpec {
                obs_dim: 4,
                act_dim: 2,
                act_low: vec![-1.0; 2],
                act_high: vec![1.0; 2],
                horizon: horizon.max(1),
            },
            pos: [0.0; 2],
            vel: [0.0; 2],
            elapsed: 0,
        };
        env.reset(0);
        env
    }

    /// Place the mass at an arbitrary state and restart the step counter.
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) -> Vec<f64> {
        self.pos = pos;
        self.vel = vel;
        self.elapsed = 0;
        self.observe()
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.vel
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed, 0);
        let pos = [
            rng.gen_range(-INIT_RANGE..=INIT_RANGE),
            rng.gen_range(-INIT_RANGE..=INIT_RANGE),
        ];
        self.set_state(pos, [0.0; 2])
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let a = check_action(&self.spec, action, self.elapsed)?;
        let mut reward = 0.0;
        for i in 0..2 {
            self.vel[i] = VELOCITY_KEEP * self.vel[i] + ACTION_GAIN * a[i];
            self.pos[i] += DT * self.vel[i];
            reward -= (self.pos[i] - GOAL[i]).powi(2) + ACTION_COST * a[i] * a[i];
        }
        self.elapsed += 1;
        Ok(Step {
            obs: self.observe(),
            reward,
            done: self.elapsed >= self.spec.horizon,
        })
    }

    fn elapsed(&self) -> usize {
        self.elapsed
    }
}
