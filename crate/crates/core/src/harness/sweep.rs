//! Grid sweeps over reward shapes, demo counts and seeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};

use super::config::{parse_pairs, RunConfig};
use super::plot::emit_plot;
use super::train::{run_training, RunSummary, METRICS_FILE};
use crate::adversary::RewardShape;
use crate::{Error, Result};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// A sweep file is a run config plus the keys `shapes`, `trajectories`,
/// `seeds` (comma lists), `demos` (a path where `{n}` is replaced by the
/// trajectory count), `out` (the sweep root) and `jobs` (worker threads).
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub shapes: Vec<RewardShape>,
    pub trajectories: Vec<usize>,
    pub seeds: Vec<u64>,
    pub demos_pattern: String,
    pub out: PathBuf,
    pub jobs: usize,
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid entry {s:?} in {key}")))
        })
        .collect()
}

impl SweepConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut base = RunConfig::default();
        let mut shapes = RewardShape::ALL.to_vec();
        let mut trajectories = vec![1, 5, 10, 50];
        let mut seeds = vec![0, 1, 2, 3];
        let mut demos_pattern = None;
        let mut out = PathBuf::from("runs/sweep");
        let mut jobs = 1;
        for (key, value, line) in parse_pairs(text)? {
            let r = match key.as_str() {
                "shapes" => list(&key, &value).map(|v| shapes = v),
                "trajectories" => list(&key, &value).map(|v| trajectories = v),
                "seeds" => list(&key, &value).map(|v| seeds = v),
                "demos" => {
                    demos_pattern = Some(value.clone());
                    Ok(())
                }
                "out" => {
                    out = PathBuf::from(&value);
                    Ok(())
                }
                "jobs" => value
                    .parse()
                    .map(|v| jobs = v)
                    .map_err(|_| Error::Config(format!("invalid jobs {value:?}"))),
                _ => base.set(&key, &value),
            };
            r.map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        let demos_pattern = demos_pattern.ok_or_else(|| Error::Config("sweep needs a demos pattern".into()))?;
        if shapes.is_empty() || trajectories.is_empty() || seeds.is_empty() || jobs == 0 {
            return Err(Error::Config("shapes, trajectories, seeds and jobs must be non-empty".into()));
        }
        Ok(Self {
            base,
            shapes,
            trajectories,
            seeds,
            demos_pattern,
            out,
            jobs,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn demos_for(&self, n: usize) -> PathBuf {
        PathBuf::from(self.demos_pattern.replace("{n}", &n.to_string()))
    }

    /// Grid cells in (shape, n, seed) order.
    pub fn cells(&self) -> Vec<(RewardShape, usize, u64)> {
        let mut v = Vec::new();
        for &s in &self.shapes {
            for &n in &self.trajectories {
                for &seed in &self.seeds {
                    v.push((s, n, seed));
                }
            }
        }
        v
    }

    fn cell_config(&self, shape: RewardShape, n: usize, seed: u64) -> RunConfig {
        let mut c = self.base.clone();
        c.adversary.reward_shape = shape;
        c.n_trajectories = n;
        c.seed = seed;
        c.demos = Some(self.demos_for(n));
        c.out = self.out.join(format!("{shape}_n{n}_s{seed}"));
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub shape: RewardShape,
    pub n_traj: usize,
    pub seed: u64,
    pub result: std::result::Result<RunSummary, String>,
}

/// Run every cell; failures are recorded per cell and do not stop the
/// sweep. Writes the aggregate table, a per-(shape, n) summary and one
/// chart per trajectory count into `out`.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepCell>> {
    std::fs::create_dir_all(&config.out).map_err(|e| Error::io(format!("creating {}", config.out.display()), e))?;
    let cells = config.cells();
    let results: Mutex<Vec<Option<SweepCell>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(shape, n, seed)) = cells.get(i) else { break };
        info!("sweep cell {}/{}: {shape} n={n} seed={seed}", i + 1, cells.len());
        let result = run_training(&config.cell_config(shape, n, seed)).map_err(|e| {
            warn!("sweep cell {shape} n={n} seed={seed} failed: {e}");
            e.to_string()
        });
        results.lock().unwrap()[i] = Some(SweepCell {
            shape,
            n_traj: n,
            seed,
            result,
        });
    };
    std::thread::scope(|s| {
        for _ in 0..config.jobs.min(cells.len()) {
            s.spawn(worker);
        }
    });
    let cells: Vec<SweepCell> = results.into_inner().unwrap().into_iter().map(|c| c.expect("every cell ran")).collect();
    write_aggregate(&config.out.join(AGGREGATE_FILE), &cells)?;
    write_summary(&config.out.join(SUMMARY_FILE), &cells)?;
    for &n in &config.trajectories {
        let files: Vec<PathBuf> = cells
            .iter()
            .filter(|c| c.n_traj == n)
            .filter_map(|c| c.result.as_ref().ok())
            .map(|r| r.dir.join(METRICS_FILE))
            .collect();
        if !files.is_empty() {
            emit_plot(&files, &config.out.join(format!("curves_n{n}.svg")))?;
        }
    }
    Ok(cells)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: 0,
            detail: e.to_string(),
        })
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        line: 0,
        detail: e.to_string(),
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_aggregate(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let rows = cells
        .iter()
        .map(|c| {
            let mut r = vec![c.shape.to_string(), c.n_traj.to_string(), c.seed.to_string()];
            match &c.result {
                Ok(s) => r.extend([
                    "ok".to_string(),
                    s.final_score.to_string(),
                    s.best_score.to_string(),
                    s.auc.to_string(),
                    s.final_return.to_string(),
                    String::new(),
                ]),
                Err(e) => r.extend(["failed".to_string(), String::new(), String::new(), String::new(), String::new(), e.clone()]),
            }
            r
        })
        .collect();
    write_rows(
        path,
        &["shape", "n_traj", "seed", "status", "final_score", "best_score", "auc", "final_return", "error"],
        rows,
    )
}

fn write_summary(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let mut groups: BTreeMap<(usize, usize), Vec<&SweepCell>> = BTreeMap::new();
    for c in cells {
        let shape_idx = RewardShape::ALL.iter().position(|s| *s == c.shape).unwrap_or(0);
        groups.entry((shape_idx, c.n_traj)).or_default().push(c);
    }
    let rows = groups
        .values()
        .map(|g| {
            let ok: Vec<&RunSummary> = g.iter().filter_map(|c| c.result.as_ref().ok()).collect();
            let finals: Vec<f64> = ok.iter().map(|s| s.final_score).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            let per_seed: Vec<String> = g
                .iter()
                .map(|c| match &c.result {
                    Ok(s) => format!("{}:{:.4}", c.seed, s.final_score),
                    Err(_) => format!("{}:failed", c.seed),
                })
                .collect();
            let shape = g[0].shape;
            let class = if shape.is_positive() {
                "positive"
            } else if shape.is_negative() {
                "negative"
            } else {
                "mixed"
            };
            vec![
                shape.to_string(),
                class.to_string(),
                g[0].n_traj.to_string(),
                format!("{}/{}", ok.len(), g.len()),
                mean(&finals).to_string(),
                finals.iter().copied().fold(f64::INFINITY, f64::min).to_string(),
                finals.iter().copied().fold(f64::NEG_INFINITY, f64::max).to_string(),
                mean(&ok.iter().map(|s| s.auc).collect::<Vec<_>>()).to_string(),
                per_seed.join(" "),
            ]
        })
        .collect();
    write_rows(
        path,
        &["shape", "sign", "n_traj", "runs_ok", "mean_final", "min_final", "max_final", "mean_auc", "per_seed_final"],
        rows,
    )
}

/// Mean final score of the finished cells for each shape, in `ALL` order.
pub fn mean_final_by_shape(cells: &[SweepCell]) -> Vec<(RewardShape, f64)> {
    RewardShape::ALL
        .iter()
        .filter_map(|&s| {
            let v: Vec<f64> = cells
                .iter()
                .filter(|c| c.shape == s)
                .filter_map(|c| c.result.as_ref().ok().map(|r| r.final_score))
                .collect();
            (!v.is_empty()).then(|| (s, v.iter().sum::<f64>() / v.len() as f64))
        })
        .collect()
}

