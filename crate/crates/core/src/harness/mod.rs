//! Experiment orchestration: configuration, the training loop, metrics,
//! normalized scoring, sweeps and plots.

mod config;
mod metrics;
mod plot;
mod score;
mod sweep;
mod train;

pub use config::{parse_pairs, Algorithm, RunConfig, KEYS};
pub use metrics::{read_metrics, MetricsRow, MetricsWriter, HEADER};
pub use plot::{emit_plot, render_svg, Series};
pub use score::{final_score, normalized_score, References};
pub use sweep::{mean_final_by_shape, sweep, SweepCell, SweepConfig, AGGREGATE_FILE, SUMMARY_FILE};
pub use train::{
    initial_policy, policy_pairs, run_training, summarize, take_trajectories, RunSummary, AGENT_FILE, CONFIG_FILE, DISC_FILE, METRICS_FILE,
    TIMING_FILE, VALUE_FILE,
};
