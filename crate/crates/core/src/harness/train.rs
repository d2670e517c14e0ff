//! The training loop: collect, train the critic, label rewards, GAE, PPO.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use super::config::{Algorithm, RunConfig};
use super::metrics::{MetricsRow, MetricsWriter};
use super::score::{final_score, normalized_score, References};
use crate::adversary::{label_gail_rewards, label_rewards, DiscStats, DiscTrainer};
use crate::autodiff::Tensor;
use crate::envs::EnvId;
use crate::expert::{bc_train, evaluate_agent, DemoDataset};
use crate::nets::checkpoint::save_tensors;
use crate::nets::{Discriminator, GaussianPolicy, NetworkSpec, ValueNet};
use crate::ppo::{PpoLearner, UpdateStats};
use crate::rng::{derive_seed, tags};
use crate::rollout::{compute_gae, Agent, Collector, RunningNormalizer, TrajectoryBuffer};
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const AGENT_FILE: &str = "agent.wdnp";
pub const VALUE_FILE: &str = "value.wdnp";
pub const DISC_FILE: &str = "disc.wdnp";
pub const TIMING_FILE: &str = "timing.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub iterations: usize,
    pub env_steps: usize,
    pub references: References,
    /// Mean of the last `final_window` evaluation scores.
    pub final_score: f64,
    pub best_score: f64,
    /// Mean normalized score over the run's env-step axis (trapezoid rule).
    pub auc: f64,
    pub final_return: f64,
}

/// Keep only the first `n` trajectories (all when `n` is 0 or too large).
pub fn take_trajectories(demos: &DemoDataset, n: usize) -> Result<DemoDataset> {
    if n == 0 || n >= demos.n_trajectories() {
        return Ok(demos.clone());
    }
    let end = demos.starts()[n];
    DemoDataset::new(
        demos.obs_dim(),
        demos.act_dim(),
        demos.pairs()[..end].to_vec(),
        demos.starts()[..n].to_vec(),
        demos.returns()[..n].to_vec(),
    )
}

fn load_run_demos(config: &RunConfig, env: EnvId) -> Result<Option<DemoDataset>> {
    let Some(path) = config.demos.as_ref().filter(|_| config.algo.needs_demos()) else {
        return Ok(None);
    };
    let demos = take_trajectories(&DemoDataset::load(path)?, config.n_trajectories)?;
    let spec = env.make().spec().clone();
    if demos.obs_dim() != spec.obs_dim || demos.act_dim() != spec.act_dim {
        return Err(Error::Config(format!(
            "demos {} are {}x{} but {} needs {}x{}",
            path.display(),
            demos.obs_dim(),
            demos.act_dim(),
            env,
            spec.obs_dim,
            spec.act_dim
        )));
    }
    Ok(Some(demos))
}

/// Rows `[normalize(raw_state), applied_action]` of the policy buffer.
pub fn policy_pairs(buffer: &TrajectoryBuffer, normalizer: &RunningNormalizer) -> Tensor {
    let t = &buffer.transitions;
    let cols = t.first().map_or(0, |x| x.raw_state.len() + x.applied_action.len());
    let mut data = Vec::with_capacity(t.len() * cols);
    for x in t {
        data.extend(normalizer.normalize(&x.raw_state));
        data.extend_from_slice(&x.applied_action);
    }
    Tensor::new(t.len(), cols, data).expect("uniform rows")
}

struct Recorder {
    writer: MetricsWriter,
    rows: Vec<MetricsRow>,
    timing: Option<Vec<u64>>,
    start: Instant,
}

impl Recorder {
    fn push(&mut self, mut row: MetricsRow, wall_clock: bool) -> Result<()> {
        let elapsed = self.start.elapsed().as_millis() as u64;
        if wall_clock {
            row.wall_ms = elapsed;
        }
        if let Some(t) = self.timing.as_mut() {
            t.push(elapsed);
        }
        let bad = row.non_finite_field();
        self.writer.write(&row)?;
        self.rows.push(row);
        match bad {
            Some(field) => Err(Error::NonFinite {
                what: format!("metric {field}"),
                iteration: self.rows.len(),
            }),
            None => Ok(()),
        }
    }
}

/// Run one experiment into `config.out`. The directory receives the
/// resolved config, the metrics CSV (flushed row by row, so it survives an
/// abort) and the final checkpoints.
pub fn run_training(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let env = config.env;
    let dir = config.out.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write_file(&dir.join(CONFIG_FILE), config.to_text().as_bytes())?;
    let demos = load_run_demos(config, env)?;
    let references = References::compute(config, demos.as_ref())?;
    info!(
        "{} on {env}, seed {}: random reference {:.3}, expert reference {:.3}",
        config.algo, config.seed, references.random, references.expert
    );
    let mut rec = Recorder {
        writer: MetricsWriter::create(&dir.join(METRICS_FILE))?,
        rows: Vec::new(),
        timing: Some(Vec::new()),
        start: Instant::now(),
    };
    let outcome = match config.algo {
        Algorithm::Bc => run_bc(config, demos.as_ref().expect("bc needs demos"), &references, &mut rec),
        _ => run_on_policy(config, demos.as_ref(), &references, &mut rec),
    };
    let timing = rec.timing.take().unwrap_or_default();
    let timing_text: String = timing.iter().map(|t| format!("{t}\n")).collect();
    write_file(&dir.join(TIMING_FILE), timing_text.as_bytes())?;
    let iterations = outcome?;
    let rows = rec.rows;
    // Only rows holding a fresh evaluation enter the summary.
    let evaluated: Vec<MetricsRow> = rows
        .iter()
        .filter(|r| r.iteration % config.eval_every == 0 || r.iteration == iterations)
        .cloned()
        .collect();
    let (final_score, best_score, auc, final_return) = summarize(&evaluated, config.final_window);
    if let Some(last) = rows.last() {
        if !(0.0..=1.0).contains(&last.normalized_score) {
            warn!("normalized score {:.3} lies outside [0, 1]", last.normalized_score);
        }
    }
    Ok(RunSummary {
        dir,
        iterations,
        env_steps: rows.last().map_or(0, |r| r.env_steps),
        references,
        final_score,
        best_score,
        auc,
        final_return,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// `(final, best, auc, final_return)` of a metrics series; zeros when empty.
pub fn summarize(rows: &[MetricsRow], window: usize) -> (f64, f64, f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.normalized_score).collect();
    let returns: Vec<f64> = rows.iter().map(|r| r.mean_true_return).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let auc = if rows.len() == 1 {
        scores[0]
    } else {
        let span = (rows.last().unwrap().env_steps - rows[0].env_steps) as f64;
        let area: f64 = rows
            .windows(2)
            .map(|w| 0.5 * (w[0].normalized_score + w[1].normalized_score) * (w[1].env_steps - w[0].env_steps) as f64)
            .sum();
        if span > 0.0 {
            area / span
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        }
    };
    (final_score(&scores, window), best, auc, final_score(&returns, window))
}

fn run_bc(config: &RunConfig, demos: &DemoDataset, refs: &References, rec: &mut Recorder) -> Result<usize> {
    if config.steps == 0 {
        return Ok(0);
    }
    let result = bc_train(demos, &config.bc, config.seed)?;
    let ret = evaluate_agent(config.env, &result.agent, config.eval_episodes, config.seed)?;
    result.agent.save(&config.out.join(AGENT_FILE))?;
    rec.push(
        MetricsRow {
            iteration: 1,
            env_steps: 0,
            mean_true_return: ret,
            normalized_score: normalized_score(ret, refs.random, refs.expert)?,
            policy_loss: result.epoch_losses.last().copied().unwrap_or(0.0),
            entropy: result.agent.policy.entropy(),
            ..Default::default()
        },
        config.wall_clock,
    )?;
    Ok(1)
}

/// The policy an on-policy run starts from, before any update.
pub fn initial_policy(config: &RunConfig) -> Result<GaussianPolicy> {
    let spec = config.env.make().spec().clone();
    Ok(GaussianPolicy::new(
        NetworkSpec::new(spec.obs_dim, config.policy_hidden.clone(), spec.act_dim)?,
        derive_seed(config.seed, tags::POLICY_INIT),
    ))
}

fn run_on_policy(config: &RunConfig, demos: Option<&DemoDataset>, refs: &References, rec: &mut Recorder) -> Result<usize> {
    let env = config.env;
    let proto = env.make();
    let spec = proto.spec().clone();
    let seed = config.seed;
    let mut policy = initial_policy(config)?;
    let mut value = ValueNet::new(spec.obs_dim, config.value_hidden.clone(), derive_seed(seed, tags::VALUE_INIT))?;
    let mut disc = Discriminator::new(
        spec.obs_dim,
        spec.act_dim,
        config.disc_hidden.clone(),
        config.adversary.lipschitz,
        derive_seed(seed, tags::DISC_INIT),
    )?;
    let mut normalizer = RunningNormalizer::new(spec.obs_dim);
    let mut collector = Collector::new(proto, seed);
    let mut learner = PpoLearner::new(config.ppo.clone(), seed)?;
    let mut critic = DiscTrainer::new(config.adversary.clone(), seed)?;

    let iterations = config.steps / config.rollout_steps;
    let mut env_steps = 0;
    // Rows between evaluations carry the latest one, starting from the initial policy.
    let mut last_eval = (0.0, 0.0);
    if config.eval_every > 1 && iterations > 1 {
        let ret = evaluate_agent(env, &Agent::new(policy.clone(), normalizer.clone()), config.eval_episodes, seed)?;
        last_eval = (ret, normalized_score(ret, refs.random, refs.expert)?);
    }
    for it in 1..=iterations {
        let mut buf = collector.collect(&policy, &value, &mut normalizer, config.rollout_steps)?;
        env_steps += buf.len();
        let (disc_stats, rewards) = match config.algo {
            Algorithm::PpoTrueReward => (DiscStats::default(), None),
            algo => {
                let demos = demos.expect("imitation needs demos");
                let expert = demos.normalized_pairs(&normalizer);
                let pol = policy_pairs(&buf, &normalizer);
                if algo == Algorithm::Wdail {
                    let s = critic.wasserstein_update(&mut disc, &pol, &expert)?;
                    (s, Some(label_rewards(&disc, &pol, config.adversary.reward_shape)?))
                } else {
                    let s = critic.gail_update(&mut disc, &pol, &expert)?;
                    (s, Some(label_gail_rewards(&disc, &pol)?))
                }
            }
        };
        match rewards {
            Some(r) => buf.set_rewards(&r)?,
            None => buf.use_true_rewards(),
        }
        compute_gae(&mut buf, &value, config.gamma, config.gae_lambda)?;
        let ppo: UpdateStats = learner.update(&mut policy, &mut value, &buf)?;

        if it % config.eval_every == 0 || it == iterations {
            let agent = Agent::new(policy.clone(), normalizer.clone());
            let ret = evaluate_agent(env, &agent, config.eval_episodes, seed)?;
            last_eval = (ret, normalized_score(ret, refs.random, refs.expert)?);
        }
        info!(
            "iteration {it}/{iterations}: return {:.3} score {:.3} wd {:.4}",
            last_eval.0, last_eval.1, disc_stats.wd_estimate
        );
        rec.push(
            MetricsRow {
                iteration: it,
                env_steps,
                mean_true_return: last_eval.0,
                normalized_score: last_eval.1,
                wd_estimate: disc_stats.wd_estimate,
                gp_value: disc_stats.gp_value,
                disc_loss: disc_stats.loss,
                policy_loss: ppo.policy_loss,
                value_loss: ppo.value_loss,
                entropy: ppo.entropy,
                approx_kl: ppo.approx_kl,
                clip_fraction: ppo.clip_fraction,
                wall_ms: 0,
            },
            config.wall_clock,
        )?;
    }
    Agent::new(policy, normalizer).save(&config.out.join(AGENT_FILE))?;
    save_tensors(&config.out.join(VALUE_FILE), value.net.params())?;
    if config.algo.needs_demos() {
        save_tensors(&config.out.join(DISC_FILE), disc.net.params())?;
    }
    Ok(iterations)
}

