use super::{Mlp, NetworkSpec};
use crate::autodiff::Tensor;
use crate::{Error, Result};

/// State-value function `V(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueNet {
    pub net: Mlp,
}

impl ValueNet {
    pub fn new(obs_dim: usize, hidden: Vec<usize>, seed: u64) -> Result<Self> {
        let spec = NetworkSpec::new(obs_dim, hidden, 1)?;
        Ok(Self {
            net: Mlp::init(spec, 1.0, seed),
        })
    }

    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.spec().output_dim != 1 {
            return Err(Error::Invalid("value network must have one output".into()));
        }
        Ok(Self { net })
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.net.forward(&Tensor::row(state))?.item())
    }

    pub fn values(&self, states: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.forward(states)?.into_data())
    }
}
