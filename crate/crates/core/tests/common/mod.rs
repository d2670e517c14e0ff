#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdail::adversary::gradient_penalty;
use wdail::autodiff::{Tape, Tensor};
use wdail::nets::{Discriminator, LipschitzMode, Mlp, NetworkSpec};

pub const FD_STEP: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| / max(|a|, |b|, 1)`: relative error, absolute below unit scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn central_diff(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.clone();
            p.data_mut()[i] += FD_STEP;
            let mut m = x.clone();
            m.data_mut()[i] -= FD_STEP;
            (f(&p) - f(&m)) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| rel_err(x, y)).fold(0.0, f64::max)
}

/// Random 4 -> 8 -> 8 -> 1 tanh network with non-trivial biases.
pub fn random_mlp(seed: u64) -> Mlp {
    let mut r = rng(seed);
    let spec = NetworkSpec::new(4, vec![8, 8], 1).unwrap();
    let mut net = Mlp::init(spec, 1.0, seed);
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += r.gen_range(-0.3..0.3);
        }
    }
    net
}

/// Scalar `sum(net(x))` recorded on a fresh tape; returns the value and the
/// analytic gradient of every parameter.
pub fn mlp_output_and_grads(net: &Mlp, x: &Tensor) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new();
    let params = net.register(&mut tape);
    let xv = tape.leaf(x.clone());
    let y = net.forward_tape(&mut tape, &params, xv).unwrap();
    let s = tape.sum(y).unwrap();
    let g = tape.backward(s).unwrap();
    (tape.value(s).item(), params.iter().map(|&p| g.wrt(p)).collect())
}

/// Largest relative error between backprop and central differences over all
/// parameters of a random MLP.
pub fn mlp_fd_error(seed: u64) -> f64 {
    let net = random_mlp(seed);
    let x = uniform(&mut rng(seed ^ 0xabc), 3, 4, -1.5, 1.5);
    let (_, grads) = mlp_output_and_grads(&net, &x);
    let mut worst = 0.0f64;
    for (k, g) in grads.iter().enumerate() {
        let fd = central_diff(&net.params()[k], |p| {
            let mut n = net.clone();
            n.params_mut()[k] = p.clone();
            n.forward(&x).unwrap().sum()
        });
        worst = worst.max(max_rel_err(g.data(), &fd));
    }
    worst
}

/// Random discriminator over 3-d states and 2-d actions.
pub fn random_disc(seed: u64) -> Discriminator {
    let mut r = rng(seed);
    let hidden = match seed % 3 {
        0 => vec![12],
        1 => vec![8, 6],
        _ => vec![20],
    };
    let mut d = Discriminator::new(3, 2, hidden, LipschitzMode::GradientPenalty, seed).unwrap();
    for p in d.net.params_mut() {
        for v in p.data_mut() {
            *v = *v * 1.5 + r.gen_range(-0.2..0.2);
        }
    }
    d
}

/// Analytic d(GP)/d(params) via the differentiable input gradient.
pub fn gp_param_grads(disc: &Discriminator, x: &Tensor) -> Vec<Tensor> {
    let mut tape = Tape::new();
    let params = disc.net.register(&mut tape);
    let xv = tape.leaf(x.clone());
    let gp = wdail::adversary::gradient_penalty_tape(&mut tape, disc, &params, xv).unwrap();
    let g = tape.backward(gp).unwrap();
    params.iter().map(|&p| g.wrt(p)).collect()
}

/// Largest relative error of the second-order gradient against central
/// differences of the penalty scalar itself.
pub fn gp_fd_error(seed: u64) -> f64 {
    let disc = random_disc(seed);
    let x = uniform(&mut rng(seed ^ 0x5eed), 6, 5, -2.0, 2.0);
    let grads = gp_param_grads(&disc, &x);
    let mut worst = 0.0f64;
    for (k, g) in grads.iter().enumerate() {
        let fd = central_diff(&disc.net.params()[k], |p| {
            let mut d = disc.clone();
            d.net.params_mut()[k] = p.clone();
            gradient_penalty(&d, &x).unwrap()
        });
        worst = worst.max(max_rel_err(g.data(), &fd));
    }
    worst
}

/// Penalty of the unit-slope linear critic `D(z) = w.z`, `|w| = 1`, built
/// directly on the tape.
pub fn unit_linear_penalty(seed: u64) -> f64 {
    let mut r = rng(seed);
    let raw: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let w: Vec<f64> = raw.iter().map(|v| v / n).collect();
    let mut tape = Tape::new();
    let x = tape.leaf(uniform(&mut r, 16, 5, -3.0, 3.0));
    let wv = tape.leaf(Tensor::column(&w));
    let d = tape.matmul(x, wv).unwrap();
    let gp = wdail::adversary::penalty_of_scores(&mut tape, d, x).unwrap();
    tape.value(gp).item()
}

/// Discounted return-minus-baseline computed directly, episode by episode.
pub fn brute_force_advantages(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut ret = 0.0;
            let mut disc = 1.0;
            for k in t..n {
                ret += disc * rewards[k];
                if dones[k] {
                    break;
                }
                disc *= gamma;
            }
            ret - values[t]
        })
        .collect()
}
