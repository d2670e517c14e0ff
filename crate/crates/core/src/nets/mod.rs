//! Policy, value and discriminator networks.
//!
//! Defaults: policy and value networks have two hidden layers of 64 tanh
//! units, the discriminator one hidden layer of 100 tanh units.

pub mod checkpoint;
mod disc;
mod mlp;
mod policy;
mod value;

pub use disc::{Discriminator, LipschitzMode, DEFAULT_WEIGHT_CLIP};
pub use mlp::{Activation, Mlp, NetworkSpec};
pub use policy::{
    gaussian_entropy, gaussian_log_prob, GaussianPolicy, PolicyVars, LOG_STD_MAX, LOG_STD_MIN, POLICY_OUTPUT_GAIN,
};
pub use value::ValueNet;

pub const DEFAULT_POLICY_HIDDEN: [usize; 2] = [64, 64];
pub const DEFAULT_VALUE_HIDDEN: [usize; 2] = [64, 64];
pub const DEFAULT_DISC_HIDDEN: [usize; 1] = [100];

/// Weights for a network of `spec` with the output gain of its role
/// (policy 0.01, value and discriminator 1.0).
pub fn init_params(spec: NetworkSpec, output_gain: f64, seed: u64) -> Mlp {
    Mlp::init(spec, output_gain, seed)
}
