//! Demonstration datasets and their file format.
//!
//! ```text
//! "WDIL" | u32 version = 1 | u32 obs_dim | u32 act_dim
//! u64 n_transitions | u64 n_trajectories
//! u64 start index * n_trajectories
//! f64 return * n_trajectories
//! per transition: f64 * obs_dim | f64 * act_dim | u8 done
//! ```
//!
//! Everything is little-endian. States are stored raw (unnormalized).

use std::path::Path;

use crate::autodiff::Tensor;
use crate::codec::ByteReader;
use crate::envs::{episode_seed, Controller, Env};
use crate::rng::{derive_seed, tags};
use crate::rollout::RunningNormalizer;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WDIL";
pub const VERSION: u32 = 1;
/// Longest trajectory a dataset may hold.
pub const MAX_TRAJECTORY_PAIRS: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct DemoPair {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// Set on the last pair of every trajectory.
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoDataset {
    obs_dim: usize,
    act_dim: usize,
    pairs: Vec<DemoPair>,
    starts: Vec<usize>,
    returns: Vec<f64>,
}

impl DemoDataset {
    /// Checks dimensions, that `starts` begins at 0 and strictly increases,
    /// one return per trajectory, and the per-trajectory cap.
    pub fn new(obs_dim: usize, act_dim: usize, pairs: Vec<DemoPair>, starts: Vec<usize>, returns: Vec<f64>) -> Result<Self> {
        let d = Self {
            obs_dim,
            act_dim,
            pairs,
            starts,
            returns,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(format!("demo dataset: {m}")));
        if self.pairs.is_empty() {
            return bad("no transitions".into());
        }
        if self.starts.first() != Some(&0) {
            return bad("first trajectory must start at index 0".into());
        }
        if self.starts.windows(2).any(|w| w[0] >= w[1]) || *self.starts.last().unwrap() >= self.pairs.len() {
            return bad("trajectory boundaries must strictly increase inside the transition list".into());
        }
        if self.returns.len() != self.starts.len() {
            return bad(format!("{} returns for {} trajectories", self.returns.len(), self.starts.len()));
        }
        for (i, len) in self.trajectory_lengths().into_iter().enumerate() {
            if len > MAX_TRAJECTORY_PAIRS {
                return bad(format!(
                    "trajectory {i} has {len} pairs, more than the cap of {MAX_TRAJECTORY_PAIRS}"
                ));
            }
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if p.state.len() != self.obs_dim || p.action.len() != self.act_dim {
                return bad(format!("transition {i} has wrong state or action length"));
            }
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[DemoPair] {
        &self.pairs
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn n_trajectories(&self) -> usize {
        self.starts.len()
    }

    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }

    pub fn trajectory_lengths(&self) -> Vec<usize> {
        let mut ends: Vec<usize> = self.starts[1..].to_vec();
        ends.push(self.pairs.len());
        self.starts.iter().zip(ends).map(|(s, e)| e - s).collect()
    }

    pub fn trajectory(&self, i: usize) -> &[DemoPair] {
        let end = self.starts.get(i + 1).copied().unwrap_or(self.pairs.len());
        &self.pairs[self.starts[i]..end]
    }

    /// Rows `[normalize(state), action]` for the discriminator.
    pub fn normalized_pairs(&self, normalizer: &RunningNormalizer) -> Tensor {
        let mut data = Vec::with_capacity(self.len() * (self.obs_dim + self.act_dim));
        for p in &self.pairs {
            data.extend(normalizer.normalize(&p.state));
            data.extend_from_slice(&p.action);
        }
        Tensor::new(self.len(), self.obs_dim + self.act_dim, data).expect("dimensions validated")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let per = 8 * (self.obs_dim + self.act_dim) + 1;
        let mut out = Vec::with_capacity(32 + 16 * self.starts.len() + per * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.obs_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.act_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.starts.len() as u64).to_le_bytes());
        for &s in &self.starts {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for r in &self.returns {
            out.extend_from_slice(&r.to_le_bytes());
        }
        for p in &self.pairs {
            for v in p.state.iter().chain(&p.action) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(p.done as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new("demo file", bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error(format!("unsupported version {version}, expected {VERSION}")));
        }
        let obs_dim = r.u32()? as usize;
        let act_dim = r.u32()? as usize;
        let n = r.u64()?;
        let n_traj = r.u64()?;
        let per = 8 * (obs_dim as u64 + act_dim as u64) + 1;
        let need = n_traj
            .checked_mul(16)
            .and_then(|h| n.checked_mul(per).and_then(|b| b.checked_add(h)));
        match need {
            Some(need) if need <= bytes.len() as u64 - r.offset() => {}
            _ => {
                return Err(r.error(format!(
                    "truncated: header declares {n} transitions and {n_traj} trajectories, only {} bytes follow",
                    bytes.len() as u64 - r.offset()
                )))
            }
        }
        let mut starts = Vec::with_capacity(n_traj as usize);
        for _ in 0..n_traj {
            let at = r.offset();
            let s = r.u64()?;
            if starts.last().map_or(s != 0, |&prev| s <= prev as u64) || s >= n {
                return Err(Error::Format {
                    what: "demo file",
                    offset: at,
                    detail: format!("invalid trajectory boundary {s}"),
                });
            }
            starts.push(s as usize);
        }
        let returns = (0..n_traj).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let state = (0..obs_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let action = (0..act_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let at = r.offset();
            let done = match r.u8()? {
                0 => false,
                1 => true,
                other => {
                    return Err(Error::Format {
                        what: "demo file",
                        offset: at,
                        detail: format!("done flag must be 0 or 1, found {other}"),
                    })
                }
            };
            pairs.push(DemoPair { state, action, done });
        }
        r.finish()?;
        let d = Self {
            obs_dim,
            act_dim,
            pairs,
            starts,
            returns,
        };
        d.validate().map_err(|e| Error::Format {
            what: "demo file",
            offset: 0,
            detail: e.to_string(),
        })?;
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_demos(dataset: &DemoDataset, path: &Path) -> Result<()> {
    dataset.save(path)
}

pub fn load_demos(path: &Path) -> Result<DemoDataset> {
    DemoDataset::load(path)
}

/// Seed of recorded episode `i`.
pub fn record_episode_seed(seed: u64, i: usize) -> u64 {
    episode_seed(derive_seed(seed, tags::RECORD), i)
}

/// Run `n_trajectories` episodes of `expert` and store raw states. An
/// episode longer than the cap is cut after [`MAX_TRAJECTORY_PAIRS`] pairs,
/// and its recorded return covers only the stored pairs.
pub fn record_demos(env: &mut dyn Env, expert: &mut dyn Controller, n_trajectories: usize, seed: u64) -> Result<DemoDataset> {
    if n_trajectories == 0 {
        return Err(Error::Invalid("record at least one trajectory".into()));
    }
    let spec = env.spec().clone();
    let mut pairs = Vec::new();
    let mut starts = Vec::with_capacity(n_trajectories);
    let mut returns = Vec::with_capacity(n_trajectories);
    for i in 0..n_trajectories {
        starts.push(pairs.len());
        let mut obs = env.reset(record_episode_seed(seed, i));
        let mut total = 0.0;
        for k in 0..MAX_TRAJECTORY_PAIRS {
            let action = spec.clip_action(&expert.act(&obs)?);
            let step = env.step(&action)?;
            total += step.reward;
            let done = step.done || k + 1 == MAX_TRAJECTORY_PAIRS;
            pairs.push(DemoPair {
                state: std::mem::replace(&mut obs, step.obs),
                action,
                done,
            });
            if done {
                break;
            }
        }
        returns.push(total);
    }
    DemoDataset::new(spec.obs_dim, spec.act_dim, pairs, starts, returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DemoDataset {
        let pair = |s: f64, done| DemoPair {
            state: vec![s, -s],
            action: vec![0.5 * s],
            done,
        };
        DemoDataset::new(
            2,
            1,
            vec![pair(1.0, false), pair(2.0, true), pair(3.0, true)],
            vec![0, 2],
            vec![-1.5, 2.25],
        )
        .unwrap()
    }

    #[test]
    fn byte_layout() {
        let b = tiny().to_bytes();
        assert_eq!(&b[..4], b"WDIL");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(b[24..32].try_into().unwrap()), 2);
        assert_eq!(b.len(), 32 + 16 + 16 + 3 * 25);
        assert_eq!(b[32 + 32 + 24], 0);
        assert_eq!(*b.last().unwrap(), 1);
    }

    #[test]
    fn round_trip() {
        let d = tiny();
        assert_eq!(DemoDataset::from_bytes(&d.to_bytes()).unwrap(), d);
    }

    #[test]
    fn boundaries_validated() {
        let d = tiny();
        assert!(DemoDataset::new(2, 1, d.pairs.clone(), vec![1], vec![0.0]).is_err());
        assert!(DemoDataset::new(2, 1, d.pairs.clone(), vec![0, 0], vec![0.0, 0.0]).is_err());
        assert!(DemoDataset::new(2, 1, d.pairs.clone(), vec![0, 2], vec![0.0]).is_err());
    }
}
