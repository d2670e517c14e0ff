//! End-to-end runs at toy budgets: outputs, determinism and sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use wdail::adversary::RewardShape;
use wdail::envs::EnvId;
use wdail::expert::{record_demos, ScriptedPointMass};
use wdail::harness::{
    emit_plot, normalized_score, read_metrics, run_training, sweep, Algorithm, RunConfig, SweepConfig, AGENT_FILE,
    CONFIG_FILE, DISC_FILE, HEADER, METRICS_FILE, TIMING_FILE, VALUE_FILE,
};
use wdail::Error;

fn demos(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join(format!("pm_{n}.wdil"));
    if !path.exists() {
        record_demos(EnvId::PointMass.make().as_mut(), &mut ScriptedPointMass, n, 0)
            .unwrap()
            .save(&path)
            .unwrap();
    }
    path
}

/// A run small enough for a unit-test budget.
fn tiny(dir: &Path, name: &str, algo: Algorithm) -> RunConfig {
    let mut c = RunConfig::default();
    c.algo = algo;
    c.demos = Some(demos(dir, 3));
    c.steps = 1536;
    c.out = dir.join(name);
    for (k, v) in [
        ("rollout_steps", "512"),
        ("policy_hidden", "16,16"),
        ("value_hidden", "16,16"),
        ("disc_hidden", "16"),
        ("disc_batch", "64"),
        ("disc_steps", "2"),
        ("ppo_epochs", "2"),
        ("eval_episodes", "2"),
        ("bc_epochs", "3"),
    ] {
        c.set(k, v).unwrap();
    }
    c
}

#[test]
fn zero_budget_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), "zero", Algorithm::Wdail);
    c.steps = 0;
    let summary = run_training(&c).unwrap();
    assert_eq!(summary.iterations, 0);
    let text = fs::read_to_string(c.out.join(METRICS_FILE)).unwrap();
    assert_eq!(text, format!("{}\n", HEADER.join(",")));
}

#[test]
fn identical_configs_give_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    for algo in [Algorithm::Wdail, Algorithm::Gail, Algorithm::PpoTrueReward, Algorithm::Bc] {
        let a = tiny(dir.path(), &format!("{algo}_a"), algo);
        let b = tiny(dir.path(), &format!("{algo}_b"), algo);
        run_training(&a).unwrap();
        run_training(&b).unwrap();
        let ma = fs::read(a.out.join(METRICS_FILE)).unwrap();
        let mb = fs::read(b.out.join(METRICS_FILE)).unwrap();
        assert_eq!(ma, mb, "{algo}");
        assert!(!ma.contains(&b'\r'));
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), "orig", Algorithm::Wdail);
    c.adversary.reward_shape = RewardShape::NLog1mSig;
    c.seed = 5;
    run_training(&c).unwrap();
    let mut again = RunConfig::from_file(&c.out.join(CONFIG_FILE)).unwrap();
    assert_eq!(again, c);
    again.out = dir.path().join("again");
    run_training(&again).unwrap();
    assert_eq!(
        fs::read(c.out.join(METRICS_FILE)).unwrap(),
        fs::read(again.out.join(METRICS_FILE)).unwrap()
    );
}

#[test]
fn reward_shape_reaches_the_learner() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for shape in [RewardShape::Sigmoid, RewardShape::NegExp, RewardShape::Linear] {
        let mut c = tiny(dir.path(), &format!("shape_{shape}"), Algorithm::Wdail);
        c.set("reward_shape", &shape.to_string()).unwrap();
        run_training(&c).unwrap();
        let metrics = fs::read(c.out.join(METRICS_FILE)).unwrap();
        assert!(!seen.contains(&metrics), "{shape} reproduced another shape's run");
        seen.push(metrics);
    }
}

#[test]
fn sparse_evaluation_summarizes_fresh_rows_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), "sparse", Algorithm::PpoTrueReward);
    c.eval_every = 2;
    let summary = run_training(&c).unwrap();
    let rows = read_metrics(&c.out.join(METRICS_FILE)).unwrap();
    assert_eq!(rows.len(), 3);
    // Row 1 carries the initial policy's evaluation, not a placeholder.
    assert!(rows[0].mean_true_return < 0.0);
    let fresh = (rows[1].mean_true_return + rows[2].mean_true_return) / 2.0;
    assert!((summary.final_return - fresh).abs() < 1e-12);
    let best = rows[1].normalized_score.max(rows[2].normalized_score);
    assert_eq!(summary.best_score, best);
}

#[test]
fn metrics_rows_are_finite_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny(dir.path(), "rows", Algorithm::Wdail);
    let summary = run_training(&c).unwrap();
    let rows = read_metrics(&c.out.join(METRICS_FILE)).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(summary.iterations, 3);
    assert!(rows.windows(2).all(|w| w[1].env_steps > w[0].env_steps));
    assert!(rows.iter().all(|r| r.non_finite_field().is_none()));
    assert_eq!(rows.last().unwrap().env_steps, 1536);
    for file in [AGENT_FILE, VALUE_FILE, DISC_FILE, CONFIG_FILE, TIMING_FILE] {
        assert!(c.out.join(file).exists(), "{file}");
    }
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let a = tiny(dir.path(), "s0", Algorithm::Wdail);
    let mut b = tiny(dir.path(), "s1", Algorithm::Wdail);
    b.seed = 1;
    run_training(&a).unwrap();
    run_training(&b).unwrap();
    assert_ne!(
        fs::read(a.out.join(METRICS_FILE)).unwrap(),
        fs::read(b.out.join(METRICS_FILE)).unwrap()
    );
}

#[test]
fn divergence_aborts_with_partial_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), "boom", Algorithm::Wdail);
    c.set("lr_policy", "1e300").unwrap();
    let err = run_training(&c).unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    let text = fs::read_to_string(c.out.join(METRICS_FILE)).unwrap();
    assert!(text.starts_with(&HEADER.join(",")));
}

#[test]
fn missing_demos_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), "nodemo", Algorithm::Gail);
    c.demos = Some(dir.path().join("absent.wdil"));
    assert!(run_training(&c).is_err());
    c.demos = None;
    assert!(run_training(&c).is_err());
}

#[test]
fn score_normalization() {
    assert_eq!(normalized_score(-10.0, -50.0, -10.0).unwrap(), 1.0);
    assert_eq!(normalized_score(-50.0, -50.0, -10.0).unwrap(), 0.0);
    assert_eq!(normalized_score(-30.0, -50.0, -10.0).unwrap(), 0.5);
    assert_eq!(normalized_score(0.0, -50.0, -10.0).unwrap(), 1.25);
    assert!(normalized_score(1.0, 2.0, 2.0).is_err());
}

fn sweep_text(dir: &Path, extra: &str) -> String {
    demos(dir, 3);
    format!(
        "demos = {}\nout = {}\nsteps = 1024\nrollout_steps = 512\npolicy_hidden = 16,16\nvalue_hidden = 16,16\n\
         disc_hidden = 16\ndisc_batch = 64\ndisc_steps = 2\nppo_epochs = 2\neval_episodes = 2\n{extra}",
        dir.join("pm_{n}.wdil").display(),
        dir.join("sweep").display()
    )
}

#[test]
fn single_cell_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig::from_text(&sweep_text(dir.path(), "shapes = exp\ntrajectories = 3\nseeds = 2\n")).unwrap();
    let cells = sweep(&cfg).unwrap();
    assert_eq!(cells.len(), 1);
    assert!(cells[0].result.is_ok());
    let agg = fs::read_to_string(cfg.out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
    assert!(agg.lines().nth(1).unwrap().starts_with("exp,3,2,ok"));
    assert!(cfg.out.join("curves_n3.svg").exists());
}

#[test]
fn failed_cells_are_recorded_and_the_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig::from_text(&sweep_text(dir.path(), "shapes = sigmoid\ntrajectories = 3,7\nseeds = 0\njobs = 2\n")).unwrap();
    let cells = sweep(&cfg).unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells[0].result.is_ok());
    assert!(cells[1].result.is_err());
    let agg = fs::read_to_string(cfg.out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
    assert!(agg.contains("sigmoid,7,0,failed"), "{agg}");
}

#[test]
fn plots_are_deterministic_and_reject_bad_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = vec![];
    for seed in 0..2 {
        let mut c = tiny(dir.path(), &format!("p{seed}"), Algorithm::Wdail);
        c.seed = seed;
        run_training(&c).unwrap();
        files.push(c.out.join(METRICS_FILE));
    }
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    emit_plot(&files, &a).unwrap();
    emit_plot(&files, &b).unwrap();
    let svg = fs::read(&a).unwrap();
    assert_eq!(svg, fs::read(&b).unwrap());
    assert!(String::from_utf8(svg).unwrap().starts_with("<svg"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, format!("{}\n1,2,x\n", HEADER.join(","))).unwrap();
    let err = emit_plot(&[bad.clone()], &dir.path().join("c.svg")).unwrap_err();
    assert!(matches!(err, Error::Csv { line: 2, .. }), "{err}");
    assert!(err.to_string().contains("bad.csv"));
    assert!(emit_plot(&[], &dir.path().join("d.svg")).is_err());
}
