//! Command-line front end for the imitation learning lab.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use wdail::envs::{true_return, EnvId};
use wdail::expert::{evaluate_agent, record_demos, train_expert, ExpertTrainConfig, ScriptedPointMass};
use wdail::harness::{emit_plot, run_training, sweep, RunConfig, SweepConfig};
use wdail::rng::{derive_seed, tags};
use wdail::rollout::Agent;

#[derive(Parser)]
#[command(name = "wdail", version, about = "Wasserstein adversarial imitation learning on toy control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train or record experts.
    #[command(subcommand)]
    Expert(ExpertCommand),
    /// Run one training experiment.
    Train(TrainArgs),
    /// Evaluate a policy checkpoint with deterministic actions.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "pointmass")]
        env: EnvId,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a grid of experiments described by a sweep file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Plot normalized score curves from metrics files.
    Plot {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExpertCommand {
    /// PPO on the true reward until the target return is reached.
    Train {
        #[arg(long)]
        env: EnvId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the documented target of the environment.
        #[arg(long, allow_hyphen_values = true)]
        target: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Record demonstrations from a checkpoint or the scripted controller.
    Record {
        #[arg(long)]
        env: EnvId,
        #[arg(long, conflicts_with = "scripted", required_unless_present = "scripted")]
        ckpt: Option<PathBuf>,
        /// Use the PointMass PD controller.
        #[arg(long)]
        scripted: bool,
        #[arg(long)]
        n_traj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Config file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    demos: Option<String>,
    #[arg(long)]
    reward_shape: Option<String>,
    #[arg(long)]
    n_traj: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    gae_lambda: Option<String>,
    #[arg(long)]
    clip_eps: Option<String>,
    #[arg(long)]
    ppo_epochs: Option<String>,
    #[arg(long)]
    minibatch: Option<String>,
    #[arg(long)]
    lr_policy: Option<String>,
    #[arg(long)]
    lr_disc: Option<String>,
    #[arg(long)]
    gp_lambda: Option<String>,
    #[arg(long)]
    disc_steps: Option<String>,
    /// `gp` or `clip`.
    #[arg(long)]
    lipschitz: Option<String>,
    /// Any config key, as `key=value`; applied last. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl TrainArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("algo", &self.algo),
            ("env", &self.env),
            ("demos", &self.demos),
            ("reward_shape", &self.reward_shape),
            ("n_trajectories", &self.n_traj),
            ("seed", &self.seed),
            ("steps", &self.steps),
            ("out", &self.out),
            ("gamma", &self.gamma),
            ("gae_lambda", &self.gae_lambda),
            ("clip_eps", &self.clip_eps),
            ("ppo_epochs", &self.ppo_epochs),
            ("minibatch", &self.minibatch),
            ("lr_policy", &self.lr_policy),
            ("lr_disc", &self.lr_disc),
            ("gp_lambda", &self.gp_lambda),
            ("disc_steps", &self.disc_steps),
            ("lipschitz", &self.lipschitz),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects key=value, got {kv:?}");
            };
            c.set(k, v).with_context(|| format!("--set {kv}"))?;
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Expert(ExpertCommand::Train {
            env,
            seed,
            out,
            target,
            max_iterations,
        }) => {
            let mut cfg = ExpertTrainConfig::for_env(env);
            if let Some(t) = target {
                cfg.target_score = t;
            }
            if let Some(m) = max_iterations {
                cfg.max_iterations = m;
            }
            let trained = train_expert(env, &cfg, seed)?;
            trained.agent.save(&out)?;
            println!(
                "expert for {env} reached {:.3} after {} iterations; saved {}",
                trained.score,
                trained.iterations,
                out.display()
            );
        }
        Command::Expert(ExpertCommand::Record {
            env,
            ckpt,
            scripted,
            n_traj,
            seed,
            out,
        }) => {
            let mut e = env.make();
            let demos = match ckpt {
                Some(path) => record_demos(e.as_mut(), &mut Agent::load(&path)?, n_traj, seed)?,
                None => {
                    if scripted && env != EnvId::PointMass {
                        bail!("the scripted expert exists only for pointmass");
                    }
                    record_demos(e.as_mut(), &mut ScriptedPointMass, n_traj, seed)?
                }
            };
            demos.save(&out)?;
            println!(
                "recorded {} trajectories ({} pairs, mean return {:.3}) to {}",
                demos.n_trajectories(),
                demos.len(),
                demos.mean_return(),
                out.display()
            );
        }
        Command::Train(args) => {
            let config = args.resolve()?;
            let summary = run_training(&config)?;
            println!(
                "{} iterations, {} env steps: final score {:.4}, best {:.4}, final return {:.3}; outputs in {}",
                summary.iterations,
                summary.env_steps,
                summary.final_score,
                summary.best_score,
                summary.final_return,
                summary.dir.display()
            );
        }
        Command::Eval {
            ckpt,
            env,
            episodes,
            seed,
        } => {
            let agent = Agent::load(&ckpt)?;
            let ret = evaluate_agent(env, &agent, episodes, seed)?;
            println!("mean return over {episodes} episodes: {ret:.6}");
            if env == EnvId::PointMass {
                let eval_seed = derive_seed(seed, tags::EVAL);
                let expert = true_return(env.make().as_mut(), &mut ScriptedPointMass, episodes, eval_seed)?;
                info!("scripted expert on the same episodes: {expert:.6}");
            }
        }
        Command::Sweep { config } => {
            let cfg = SweepConfig::from_file(&config)?;
            let cells = sweep(&cfg)?;
            let failed = cells.iter().filter(|c| c.result.is_err()).count();
            println!(
                "{} cells ({failed} failed); aggregate in {}",
                cells.len(),
                cfg.out.join(wdail::harness::AGGREGATE_FILE).display()
            );
        }
        Command::Plot { out, metrics } => {
            emit_plot(&metrics, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
