use std::f64::consts::PI;

use rand::Rng as _;

use super::{check_action, Env, EnvSpec, Step};
use crate::rng::rng_from;
use crate::Result;

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_TORQUE: f64 = 2.0;

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// Torque-limited pendulum, `theta = 0` pointing up.
///
/// `theta'' = (3 g / 2 l) sin(theta) + (3 / m l^2) u`, integrated with
/// semi-implicit Euler (velocity first, then angle with the new velocity).
/// The reward `-(wrap(theta)^2 + 0.1 theta'^2 + 0.001 u^2)` is charged on the
/// state before the step. Observation `(cos theta, sin theta, theta')`.
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    elapsed: usize,
}

impl Pendulum {
    pub const HORIZON: usize = 200;

    pub fn new() -> Self {
        Self::with_horizon(Self::HORIZON)
    }

    pub fn with_horizon(horizon: usize) -> Self {
        let mut env = Self {
            spec: EnvSpec {
                obs_dim: 3,
                act_dim: 1,
                act_low: vec![-MAX_TORQUE],
                act_high: vec![MAX_TORQUE],
                horizon: horizon.max(1),
            },
            theta: 0.0,
            theta_dot: 0.0,
            elapsed: 0,
        };
        env.reset(0);
        env
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) -> Vec<f64> {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.elapsed = 0;
        self.observe()
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    /// Mechanical energy per unit inertia, `theta'^2 / 2 + (3 g / 2 l) cos(theta)`.
    pub fn energy(&self) -> f64 {
        0.5 * self.theta_dot * self.theta_dot + 1.5 * GRAVITY / LENGTH * self.theta.cos()
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed, 0);
        let theta = rng.gen_range(-PI..=PI);
        let theta_dot = rng.gen_range(-1.0..=1.0);
        self.set_state(theta, theta_dot)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let u = check_action(&self.spec, action, self.elapsed)?[0];
        let th = wrap_angle(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);
        let accel = 1.5 * GRAVITY / LENGTH * self.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot += accel * DT;
        self.theta += self.theta_dot * DT;
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
