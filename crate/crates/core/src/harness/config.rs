//! Flat `key = value` run configuration.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adversary::AdversaryConfig;
use crate::envs::EnvId;
use crate::expert::BcConfig;
use crate::nets::{LipschitzMode, DEFAULT_DISC_HIDDEN, DEFAULT_POLICY_HIDDEN, DEFAULT_VALUE_HIDDEN, DEFAULT_WEIGHT_CLIP};
use crate::ppo::PpoConfig;
use crate::rollout::{DEFAULT_GAE_LAMBDA, DEFAULT_GAMMA, DEFAULT_ROLLOUT_STEPS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Wdail,
    Gail,
    Bc,
    PpoTrueReward,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Wdail => "wdail",
            Algorithm::Gail => "gail",
            Algorithm::Bc => "bc",
            Algorithm::PpoTrueReward => "ppo-true-reward",
        }
    }

    pub fn needs_demos(self) -> bool {
        self != Algorithm::PpoTrueReward
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "wdail" => Algorithm::Wdail,
            "gail" => Algorithm::Gail,
            "bc" => Algorithm::Bc,
            "ppo-true-reward" | "ppo" => Algorithm::PpoTrueReward,
            other => {
                return Err(Error::Config(format!(
                    "unknown algorithm {other:?}; expected wdail, gail, bc or ppo-true-reward"
                )))
            }
        })
    }
}

/// Every knob of a run. [`RunConfig::to_text`] writes all of them, so the
/// resolved file alone reproduces the run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvId,
    pub algo: Algorithm,
    pub demos: Option<PathBuf>,
    /// Use only the first `n` demo trajectories; 0 keeps all of them.
    pub n_trajectories: usize,
    pub seed: u64,
    /// Environment-step budget; rounded down to whole rollouts.
    pub steps: usize,
    pub rollout_steps: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub ppo: PpoConfig,
    pub adversary: AdversaryConfig,
    /// Clip constant used whenever `lipschitz = clip`.
    pub weight_clip: f64,
    pub bc: BcConfig,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    /// Evaluate every this many iterations (and after the last one).
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Number of trailing evaluations averaged into the final score.
    pub final_window: usize,
    /// Overrides the expert reference return used for normalization.
    pub expert_return: Option<f64>,
    /// Record real wall-clock times in the metrics (breaks byte identity).
    pub wall_clock: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvId::PointMass,
            algo: Algorithm::Wdail,
            demos: None,
            n_trajectories: 0,
            seed: 0,
            steps: 300_000,
            rollout_steps: DEFAULT_ROLLOUT_STEPS,
            gamma: DEFAULT_GAMMA,
            gae_lambda: DEFAULT_GAE_LAMBDA,
            ppo: PpoConfig::default(),
            adversary: AdversaryConfig::default(),
            weight_clip: DEFAULT_WEIGHT_CLIP,
            bc: BcConfig::default(),
            policy_hidden: DEFAULT_POLICY_HIDDEN.to_vec(),
            value_hidden: DEFAULT_VALUE_HIDDEN.to_vec(),
            disc_hidden: DEFAULT_DISC_HIDDEN.to_vec(),
            eval_every: 1,
            eval_episodes: 10,
            final_window: 5,
            expert_return: None,
            wall_clock: false,
            out: PathBuf::from("runs/default"),
        }
    }
}

/// Keys accepted by [`RunConfig::set`], in the order they are written.
pub const KEYS: &[&str] = &[
    "env",
    "algo",
    "reward_shape",
    "demos",
    "n_trajectories",
    "seed",
    "steps",
    "rollout_steps",
    "gamma",
    "gae_lambda",
    "clip_eps",
    "ppo_epochs",
    "minibatch",
    "lr_policy",
    "value_coef",
    "entropy_coef",
    "max_grad_norm",
    "lr_disc",
    "gp_lambda",
    "disc_steps",
    "disc_batch",
    "lipschitz",
    "weight_clip",
    "bc_epochs",
    "bc_minibatch",
    "bc_lr",
    "policy_hidden",
    "value_hidden",
    "disc_hidden",
    "eval_every",
    "eval_episodes",
    "final_window",
    "expert_return",
    "wall_clock",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = value
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect::<Result<_>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err(Error::Config(format!("{key} needs one or more positive layer sizes")));
    }
    Ok(v)
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "env" => self.env = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "algo" => self.algo = v.parse()?,
            "reward_shape" => self.adversary.reward_shape = v.parse()?,
            "demos" => self.demos = (!v.is_empty()).then(|| PathBuf::from(v)),
            "n_trajectories" => self.n_trajectories = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "rollout_steps" => self.rollout_steps = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "gae_lambda" => self.gae_lambda = parse(key, v)?,
            "clip_eps" => self.ppo.clip_eps = parse(key, v)?,
            "ppo_epochs" => self.ppo.epochs = parse(key, v)?,
            "minibatch" => self.ppo.minibatch = parse(key, v)?,
            "lr_policy" => self.ppo.lr = parse(key, v)?,
            "value_coef" => self.ppo.value_coef = parse(key, v)?,
            "entropy_coef" => self.ppo.entropy_coef = parse(key, v)?,
            "max_grad_norm" => self.ppo.max_grad_norm = parse(key, v)?,
            "lr_disc" => self.adversary.lr = parse(key, v)?,
            "gp_lambda" => self.adversary.gp_lambda = parse(key, v)?,
            "disc_steps" => self.adversary.steps = parse(key, v)?,
            "disc_batch" => self.adversary.batch = parse(key, v)?,
            "lipschitz" => {
                self.adversary.lipschitz = match v {
                    "gp" => LipschitzMode::GradientPenalty,
                    "clip" => LipschitzMode::WeightClipping { clip: self.weight_clip },
                    _ => return Err(Error::Config(format!("lipschitz must be gp or clip, got {v:?}"))),
                }
            }
            "weight_clip" => {
                self.weight_clip = parse(key, v)?;
                if let LipschitzMode::WeightClipping { clip } = &mut self.adversary.lipschitz {
                    *clip = self.weight_clip;
                }
            }
            "bc_epochs" => self.bc.epochs = parse(key, v)?,
            "bc_minibatch" => self.bc.minibatch = parse(key, v)?,
            "bc_lr" => self.bc.lr = parse(key, v)?,
            "policy_hidden" => {
                self.policy_hidden = parse_list(key, v)?;
                self.bc.hidden = self.policy_hidden.clone();
            }
            "value_hidden" => self.value_hidden = parse_list(key, v)?,
            "disc_hidden" => self.disc_hidden = parse_list(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "final_window" => self.final_window = parse(key, v)?,
            "expert_return" => self.expert_return = if v.is_empty() || v == "auto" { None } else { Some(parse(key, v)?) },
            "wall_clock" => self.wall_clock = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Current value of `key` in the same syntax `set` accepts.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "env" => self.env.to_string(),
            "algo" => self.algo.to_string(),
            "reward_shape" => self.adversary.reward_shape.to_string(),
            "demos" => self.demos.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "n_trajectories" => self.n_trajectories.to_string(),
            "seed" => self.seed.to_string(),
            "steps" => self.steps.to_string(),
            "rollout_steps" => self.rollout_steps.to_string(),
            "gamma" => self.gamma.to_string(),
            "gae_lambda" => self.gae_lambda.to_string(),
            "clip_eps" => self.ppo.clip_eps.to_string(),
            "ppo_epochs" => self.ppo.epochs.to_string(),
            "minibatch" => self.ppo.minibatch.to_string(),
            "lr_policy" => self.ppo.lr.to_string(),
            "value_coef" => self.ppo.value_coef.to_string(),
            "entropy_coef" => self.ppo.entropy_coef.to_string(),
            "max_grad_norm" => self.ppo.max_grad_norm.to_string(),
            "lr_disc" => self.adversary.lr.to_string(),
            "gp_lambda" => self.adversary.gp_lambda.to_string(),
            "disc_steps" => self.adversary.steps.to_string(),
            "disc_batch" => self.adversary.batch.to_string(),
            "lipschitz" => match self.adversary.lipschitz {
                LipschitzMode::GradientPenalty => "gp".into(),
                LipschitzMode::WeightClipping { .. } => "clip".into(),
            },
            "weight_clip" => self.weight_clip.to_string(),
            "bc_epochs" => self.bc.epochs.to_string(),
            "bc_minibatch" => self.bc.minibatch.to_string(),
            "bc_lr" => self.bc.lr.to_string(),
            "policy_hidden" => join(&self.policy_hidden),
            "value_hidden" => join(&self.value_hidden),
            "disc_hidden" => join(&self.disc_hidden),
            "eval_every" => self.eval_every.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "final_window" => self.final_window.to_string(),
            "expert_return" => self.expert_return.map(|v| v.to_string()).unwrap_or_else(|| "auto".into()),
            "wall_clock" => self.wall_clock.to_string(),
            "out" => self.out.display().to_string(),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        })
    }

    /// Apply `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value, line) in parse_pairs(text)? {
            self.set(&key, &value)
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Every key with its resolved value, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("listed key"));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.adversary.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rollout_steps == 0 {
            return bad("rollout_steps must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if self.eval_every == 0 || self.eval_episodes == 0 || self.final_window == 0 {
            return bad("eval_every, eval_episodes and final_window must be at least 1");
        }
        if self.algo.needs_demos() && self.demos.is_none() {
            return Err(Error::Config(format!("algorithm {} needs a demos path", self.algo)));
        }
        if !(self.weight_clip > 0.0) {
            return bad("weight_clip must be positive");
        }
        Ok(())
    }
}

/// `(key, value, line number)` triples of a flat config text.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}
