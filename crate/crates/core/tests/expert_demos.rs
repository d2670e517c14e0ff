//! Demonstration files, recording and behavior cloning.

mod common;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use wdail::envs::{EnvId, PointMass};
use wdail::expert::{bc_train, record_demos, BcConfig, DemoDataset, DemoPair, ScriptedPointMass, MAX_TRAJECTORY_PAIRS};
use wdail::Error;

fn random_dataset(seed: u64) -> DemoDataset {
    let mut r = rng(seed);
    let (obs, act) = (r.gen_range(1..5), r.gen_range(1..3));
    let n_traj = r.gen_range(1..5);
    let (mut pairs, mut starts, mut returns) = (vec![], vec![], vec![]);
    for _ in 0..n_traj {
        starts.push(pairs.len());
        returns.push(r.gen_range(-100.0..0.0));
        let len = r.gen_range(1..20);
        for k in 0..len {
            pairs.push(DemoPair {
                state: (0..obs).map(|_| r.gen_range(-1e3..1e3)).collect(),
                action: (0..act).map(|_| r.gen_range(-1.0..1.0)).collect(),
                done: k + 1 == len,
            });
        }
    }
    DemoDataset::new(obs, act, pairs, starts, returns).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn round_trip_is_bitwise(seed in any::<u64>()) {
        let d = random_dataset(seed);
        let bytes = d.to_bytes();
        let back = DemoDataset::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn every_truncation_is_rejected_with_an_offset(seed in any::<u64>()) {
        let bytes = random_dataset(seed).to_bytes();
        let cut = rng(seed).gen_range(0..bytes.len());
        match DemoDataset::from_bytes(&bytes[..cut]) {
            Err(Error::Format { offset, .. }) => prop_assert!(offset <= cut as u64),
            other => prop_assert!(false, "cut {}: {:?}", cut, other.map(|d| d.len())),
        }
    }

    #[test]
    fn single_byte_corruption_never_panics(seed in any::<u64>(), pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut bytes = random_dataset(seed).to_bytes();
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        let _ = DemoDataset::from_bytes(&bytes);
    }
}

#[test]
fn corrupt_headers_are_named() {
    let good = random_dataset(1).to_bytes();
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    let e = DemoDataset::from_bytes(&bad_magic).unwrap_err();
    assert!(matches!(e, Error::Format { offset: 0, .. }), "{e}");

    let mut bad_version = good.clone();
    bad_version[4] = 9;
    let e = DemoDataset::from_bytes(&bad_version).unwrap_err();
    assert!(e.to_string().contains("version"), "{e}");

    let mut trailing = good.clone();
    trailing.push(0);
    assert!(DemoDataset::from_bytes(&trailing).is_err());

    let mut bad_done = good;
    let last = bad_done.len() - 1;
    bad_done[last] = 7;
    let e = DemoDataset::from_bytes(&bad_done).unwrap_err();
    assert!(matches!(e, Error::Format { offset, .. } if offset == last as u64), "{e}");
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.wdil");
    let d = random_dataset(7);
    d.save(&path).unwrap();
    assert_eq!(DemoDataset::load(&path).unwrap(), d);
    assert!(DemoDataset::load(&dir.path().join("missing.wdil")).is_err());
}

#[test]
fn recording_is_deterministic() {
    let a = record_demos(EnvId::PointMass.make().as_mut(), &mut ScriptedPointMass, 4, 11).unwrap();
    let b = record_demos(EnvId::PointMass.make().as_mut(), &mut ScriptedPointMass, 4, 11).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let c = record_demos(EnvId::PointMass.make().as_mut(), &mut ScriptedPointMass, 4, 12).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
    assert_eq!(a.trajectory_lengths(), vec![PointMass::HORIZON; 4]);
}

#[test]
fn long_episodes_are_capped() {
    let mut env = EnvId::PointMass.make_with_horizon(3000);
    let d = record_demos(env.as_mut(), &mut ScriptedPointMass, 2, 0).unwrap();
    assert_eq!(d.trajectory_lengths(), vec![MAX_TRAJECTORY_PAIRS; 2]);
    for i in 0..2 {
        let t = d.trajectory(i);
        assert!(t.last().unwrap().done);
        assert!(t[..t.len() - 1].iter().all(|p| !p.done));
    }
    let mut short = EnvId::Pendulum.make_with_horizon(50);
    let mut zero = |_: &[f64]| vec![0.0];
    let d = record_demos(short.as_mut(), &mut zero, 3, 0).unwrap();
    assert!(d.trajectory_lengths().iter().all(|&n| n <= 50.min(MAX_TRAJECTORY_PAIRS)));
}

/// Demonstrations from a known linear map `a = W s`.
fn linear_demos(seed: u64) -> (DemoDataset, [[f64; 3]; 2]) {
    let w = [[0.4, -0.3, 0.2], [-0.1, 0.5, 0.3]];
    let mut r = rng(seed);
    let mut pairs = vec![];
    let mut starts = vec![];
    for t in 0..10 {
        starts.push(t * 50);
        for k in 0..50 {
            let s: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
            let a = w.iter().map(|row| row.iter().zip(&s).map(|(x, y)| x * y).sum()).collect();
            pairs.push(DemoPair { state: s, action: a, done: k == 49 });
        }
    }
    (DemoDataset::new(3, 2, pairs, starts, vec![0.0; 10]).unwrap(), w)
}

#[test]
fn bc_recovers_a_linear_expert() {
    let (demos, w) = linear_demos(0);
    let res = bc_train(&demos, &BcConfig { epochs: 150, ..Default::default() }, 0).unwrap();
    let mut r = rng(99);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let s: Vec<f64> = (0..3).map(|_| r.gen_range(-0.8..0.8)).collect();
        let got = res.agent.mean_action(&s).unwrap();
        for (j, row) in w.iter().enumerate() {
            let want: f64 = row.iter().zip(&s).map(|(x, y)| x * y).sum();
            worst = worst.max((got[j] - want).abs());
        }
    }
    assert!(worst < 0.05, "max action error {worst}");
}

#[test]
fn bc_loss_trends_down() {
    let (demos, _) = linear_demos(1);
    let res = bc_train(&demos, &BcConfig { epochs: 60, ..Default::default() }, 1).unwrap();
    let l = &res.epoch_losses;
    assert_eq!(l.len(), 60);
    let head = l[..10].iter().sum::<f64>() / 10.0;
    let tail = l[50..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");
    // Epoch-to-epoch noise aside, later windows never exceed earlier ones.
    let windows: Vec<f64> = l.chunks(10).map(|c| c.iter().sum::<f64>() / 10.0).collect();
    assert!(windows.windows(2).all(|w| w[1] <= w[0]), "{windows:?}");
}

#[test]
fn bc_handles_a_single_pair() {
    let d = DemoDataset::new(
        2,
        1,
        vec![DemoPair {
            state: vec![0.2, -0.1],
            action: vec![0.3],
            done: true,
        }],
        vec![0],
        vec![-1.0],
    )
    .unwrap();
    let res = bc_train(&d, &BcConfig { epochs: 300, ..Default::default() }, 0).unwrap();
    let a = res.agent.mean_action(&[0.2, -0.1]).unwrap();
    assert!((a[0] - 0.3).abs() < 0.05, "{a:?}");
    assert!(res.epoch_losses.iter().all(|v| v.is_finite()));
}

#[test]
fn bc_is_deterministic() {
    let (demos, _) = linear_demos(2);
    let cfg = BcConfig { epochs: 5, ..Default::default() };
    let a = bc_train(&demos, &cfg, 3).unwrap();
    let b = bc_train(&demos, &cfg, 3).unwrap();
    assert_eq!(a.epoch_losses, b.epoch_losses);
    assert!(bc_train(&demos, &BcConfig { epochs: 0, ..Default::default() }, 3).is_err());
}
