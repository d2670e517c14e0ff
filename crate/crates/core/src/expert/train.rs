use log::info;

use crate::envs::{true_return, EnvId};
use crate::nets::{GaussianPolicy, NetworkSpec, ValueNet, DEFAULT_POLICY_HIDDEN, DEFAULT_VALUE_HIDDEN};
use crate::ppo::{PpoConfig, PpoLearner};
use crate::rng::{derive_seed, tags};
use crate::rollout::{compute_gae, Agent, Collector, RunningNormalizer, DEFAULT_GAE_LAMBDA, DEFAULT_GAMMA, DEFAULT_ROLLOUT_STEPS};
use crate::{Error, Result};

/// PPO on the environment's true reward.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertTrainConfig {
    pub ppo: PpoConfig,
    pub rollout_steps: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub max_iterations: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub target_score: f64,
}

impl ExpertTrainConfig {
    /// Documented budget and reachable target for each environment.
    pub fn for_env(env: EnvId) -> Self {
        let (max_iterations, target_score) = match env {
            EnvId::PointMass => (300, -6.5),
            EnvId::Pendulum => (1000, -300.0),
        };
        Self {
            ppo: PpoConfig::default(),
            rollout_steps: DEFAULT_ROLLOUT_STEPS,
            gamma: DEFAULT_GAMMA,
            gae_lambda: DEFAULT_GAE_LAMBDA,
            policy_hidden: DEFAULT_POLICY_HIDDEN.to_vec(),
            value_hidden: DEFAULT_VALUE_HIDDEN.to_vec(),
            max_iterations,
            eval_every: 5,
            eval_episodes: 10,
            target_score,
        }
    }
}

pub struct TrainedExpert {
    pub agent: Agent,
    pub score: f64,
    pub iterations: usize,
}

/// Mean deterministic return of `agent` on evaluation episodes from `seed`.
pub fn evaluate_agent(env: EnvId, agent: &Agent, episodes: usize, seed: u64) -> Result<f64> {
    let mut agent = agent.clone();
    true_return(env.make().as_mut(), &mut agent, episodes, derive_seed(seed, tags::EVAL))
}

/// Train until the deterministic evaluation return reaches the target. The
/// first evaluation that meets the target stops training.
pub fn train_expert(env: EnvId, config: &ExpertTrainConfig, seed: u64) -> Result<TrainedExpert> {
    if config.max_iterations == 0 || config.eval_every == 0 || config.eval_episodes == 0 {
        return Err(Error::Config("max_iterations, eval_every and eval_episodes must be positive".into()));
    }
    let proto = env.make();
    let spec = proto.spec().clone();
    let mut policy = GaussianPolicy::new(
        NetworkSpec::new(spec.obs_dim, config.policy_hidden.clone(), spec.act_dim)?,
        derive_seed(seed, tags::POLICY_INIT),
    );
    let mut value = ValueNet::new(spec.obs_dim, config.value_hidden.clone(), derive_seed(seed, tags::VALUE_INIT))?;
    let mut normalizer = RunningNormalizer::new(spec.obs_dim);
    let mut collector = Collector::new(proto, seed);
    let mut learner = PpoLearner::new(config.ppo.clone(), seed)?;
    let mut best = f64::NEG_INFINITY;

    for it in 1..=config.max_iterations {
        let mut buf = collector.collect(&policy, &value, &mut normalizer, config.rollout_steps)?;
        buf.use_true_rewards();
        compute_gae(&mut buf, &value, config.gamma, config.gae_lambda)?;
        learner.update(&mut policy, &mut value, &buf)?;
        if it % config.eval_every == 0 || it == config.max_iterations {
            let agent = Agent::new(policy.clone(), normalizer.clone());
            let score = evaluate_agent(env, &agent, config.eval_episodes, seed)?;
            info!("expert {env} iteration {it}: eval return {score:.3}");
            best = best.max(score);
            if score >= config.target_score {
                return Ok(TrainedExpert {
                    agent,
                    score,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::TargetNotReached {
        target: config.target_score,
        best,
        iterations: config.max_iterations,
    })
}
