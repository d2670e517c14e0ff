use std::fmt;
use std::str::FromStr;

use crate::autodiff::sigmoid;
use crate::{Error, Result};

/// Map from the critic output `x` to the imitation reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RewardShape {
    /// `x` (also accepted as `airl`).
    Linear,
    /// `sigma(x)`.
    Sigmoid,
    /// `e^x`.
    Exp,
    /// `-e^-x`.
    NegExp,
    /// `log sigma(x)`.
    LogSig,
    /// `-log(1 - sigma(x))`.
    NLog1mSig,
}

impl RewardShape {
    pub const ALL: [RewardShape; 6] = [
        RewardShape::Linear,
        RewardShape::Sigmoid,
        RewardShape::Exp,
        RewardShape::NegExp,
        RewardShape::LogSig,
        RewardShape::NLog1mSig,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardShape::Linear => "linear",
            RewardShape::Sigmoid => "sigmoid",
            RewardShape::Exp => "exp",
            RewardShape::NegExp => "negexp",
            RewardShape::LogSig => "logsig",
            RewardShape::NLog1mSig => "nlog1msig",
        }
    }

    /// Strictly positive for every finite input.
    pub fn is_positive(self) -> bool {
        matches!(self, RewardShape::Sigmoid | RewardShape::Exp | RewardShape::NLog1mSig)
    }

    /// Strictly negative for every finite input.
    pub fn is_negative(self) -> bool {
        matches!(self, RewardShape::NegExp | RewardShape::LogSig)
    }
}

impl fmt::Display for RewardShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "airl" => RewardShape::Linear,
            "sigmoid" => RewardShape::Sigmoid,
            "exp" => RewardShape::Exp,
            "negexp" => RewardShape::NegExp,
            "logsig" => RewardShape::LogSig,
            "nlog1msig" => RewardShape::NLog1mSig,
            other => {
                return Err(Error::Config(format!(
                    "unknown reward shape {other:?}; expected one of linear, airl, sigmoid, exp, negexp, logsig, nlog1msig"
                )))
            }
        })
    }
}

/// `log(1 + e^x)` without overflow or cancellation.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// The two log shapes use `log sigma(x) = -softplus(-x)` and
/// `-log(1 - sigma(x)) = softplus(x)`, which are exact where a clamped
/// sigmoid would saturate (|x| > 18.4 for a 1e-8 clamp).
pub fn shape_reward(x: f64, shape: RewardShape) -> f64 {
    match shape {
        RewardShape::Linear => x,
        RewardShape::Sigmoid => sigmoid(x),
        RewardShape::Exp => x.exp(),
        RewardShape::NegExp => -(-x).exp(),
        RewardShape::LogSig => -softplus(-x),
        RewardShape::NLog1mSig => softplus(x),
    }
}

/// Probability clamp used by the GAIL reward.
pub const PROB_CLAMP: f64 = 1e-8;

/// GAIL reward `-log D` for `D` in `(0, 1)`, with `D` clamped away from 0 and 1.
pub fn gail_reward(d: f64) -> f64 {
    -d.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

pub(crate) fn check_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: format!("{what} ({v})"),
            iteration: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(shape_reward(0.0, RewardShape::Sigmoid), 0.5);
        assert_eq!(shape_reward(0.0, RewardShape::Exp), 1.0);
        assert_eq!(shape_reward(0.0, RewardShape::Linear), 0.0);
        assert_eq!(shape_reward(0.0, RewardShape::NegExp), -1.0);
        assert!((shape_reward(0.0, RewardShape::LogSig) - 0.5f64.ln()).abs() < 1e-15);
        assert!((shape_reward(0.0, RewardShape::NLog1mSig) + 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn names_round_trip() {
        for s in RewardShape::ALL {
            assert_eq!(s.as_str().parse::<RewardShape>().unwrap(), s);
        }
        assert_eq!("airl".parse::<RewardShape>().unwrap(), RewardShape::Linear);
        assert!("tanh".parse::<RewardShape>().is_err());
    }

    #[test]
    fn gail_reward_at_half() {
        assert!((gail_reward(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(gail_reward(0.0).is_finite() && gail_reward(1.0) >= 0.0);
    }
}
