use super::{Mlp, NetworkSpec};
use crate::autodiff::Tensor;
use crate::{Error, Result};

/// Weight clip constant used when none is configured.
pub const DEFAULT_WEIGHT_CLIP: f64 = 0.01;

/// How the critic is kept (approximately) 1-Lipschitz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LipschitzMode {
    GradientPenalty,
    WeightClipping { clip: f64 },
}

/// Scores a concatenated `(state, action)` row with an unbounded scalar.
/// There is no squashing on the output; reward shapes apply their own.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub net: Mlp,
    pub mode: LipschitzMode,
}

impl Discriminator {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: Vec<usize>, mode: LipschitzMode, seed: u64) -> Result<Self> {
        let spec = NetworkSpec::new(obs_dim + act_dim, hidden, 1)?;
        let mut d = Self {
            net: Mlp::init(spec, 1.0, seed),
            mode,
        };
        d.enforce_clip();
        Ok(d)
    }

    pub fn from_mlp(net: Mlp, mode: LipschitzMode) -> Result<Self> {
        if net.spec().output_dim != 1 {
            return Err(Error::Invalid("discriminator must have one output".into()));
        }
        Ok(Self { net, mode })
    }

    pub fn input_dim(&self) -> usize {
        self.net.spec().input_dim
    }

    pub fn score(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mut row = state.to_vec();
        row.extend_from_slice(action);
        if row.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "discriminator input",
                expected: self.input_dim(),
                got: row.len(),
            });
        }
        Ok(self.net.forward(&Tensor::row(&row))?.item())
    }

    /// Scores for a batch of concatenated pairs `[n, obs + act]`.
    pub fn scores(&self, pairs: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.forward(pairs)?.into_data())
    }

    /// In weight-clipping mode clamp every parameter into `[-c, c]`.
    pub fn enforce_clip(&mut self) {
        if let LipschitzMode::WeightClipping { clip } = self.mode {
            for p in self.net.params_mut() {
                for v in p.data_mut() {
                    *v = v.clamp(-clip, clip);
                }
            }
        }
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.net
            .params()
            .iter()
            .flat_map(|p| p.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_weights_score_zero() {
        let d = Discriminator::from_mlp(
            Mlp::zeros(NetworkSpec::new(4, vec![100], 1).unwrap()),
            LipschitzMode::GradientPenalty,
        )
        .unwrap();
        assert_eq!(d.score(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn scores_are_finite_for_large_inputs() {
        let d = Discriminator::new(4, 2, vec![100], LipschitzMode::GradientPenalty, 3).unwrap();
        let mut rng = crate::rng::rng_from(0, 0);
        for _ in 0..500 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1e3..1e3)).collect();
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1e3..1e3)).collect();
            let x = d.score(&s, &a).unwrap();
            assert!(x.is_finite());
            assert_eq!(x, d.score(&s, &a).unwrap());
        }
        assert!(d.score(&[0.0; 3], &[0.0; 2]).is_err());
    }

    #[test]
    fn clipping_mode_bounds_weights() {
        let d = Discriminator::new(3, 1, vec![100], LipschitzMode::WeightClipping { clip: 0.01 }, 0).unwrap();
        assert!(d.max_abs_weight() <= 0.01);
    }
}
