use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::autodiff::{Tape, Tensor, Var};
use crate::rng::{rng_from, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

/// Layer sizes of a fully connected network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub output_dim: usize,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::Invalid("network needs at least one hidden layer".into()));
        }
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(Error::Invalid(format!(
                "network dimensions must be >= 1 (input {input_dim}, hidden {hidden:?}, output {output_dim})"
            )));
        }
        Ok(Self {
            input_dim,
            hidden,
            activation: Activation::Tanh,
            output_dim,
        })
    }

    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }
}

/// Orthogonal `fan_in x fan_out` matrix scaled by `gain`.
fn orthogonal(fan_in: usize, fan_out: usize, gain: f64, rng: &mut Rng) -> Tensor {
    let (tall, short) = (fan_in.max(fan_out), fan_in.min(fan_out));
    let a = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if fan_in >= fan_out { q } else { q.transpose() };
    let mut data = Vec::with_capacity(fan_in * fan_out);
    for i in 0..fan_in {
        for j in 0..fan_out {
            data.push(gain * q[(i, j)]);
        }
    }
    Tensor::new(fan_in, fan_out, data).expect("orthogonal shape")
}

/// Tanh MLP with parameters stored as `[w0, b0, w1, b1, ...]`, weights laid
/// out `fan_in x fan_out` and biases as `1 x fan_out` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: NetworkSpec,
    params: Vec<Tensor>,
}

impl Mlp {
    /// Orthogonal weights with gain sqrt(2) on hidden layers and
    /// `output_gain` on the last layer; zero biases.
    pub fn init(spec: NetworkSpec, output_gain: f64, seed: u64) -> Self {
        let mut rng = rng_from(seed, 0);
        let dims = spec.layer_dims();
        let last = dims.len() - 1;
        let mut params = Vec::with_capacity(2 * dims.len());
        for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let gain = if i == last { output_gain } else { std::f64::consts::SQRT_2 };
            params.push(orthogonal(fan_in, fan_out, gain, &mut rng));
            params.push(Tensor::zeros(1, fan_out));
        }
        Self { spec, params }
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let params = spec
            .layer_dims()
            .into_iter()
            .flat_map(|(i, o)| [Tensor::zeros(i, o), Tensor::zeros(1, o)])
            .collect();
        Self { spec, params }
    }

    /// Rebuild from stored tensors, inferring the layer sizes.
    pub fn from_params(params: Vec<Tensor>) -> Result<Self> {
        if params.len() < 4 || params.len() % 2 != 0 {
            return Err(Error::Invalid(format!(
                "an MLP needs an even number (>= 4) of tensors, got {}",
                params.len()
            )));
        }
        let input_dim = params[0].rows();
        let mut hidden = Vec::new();
        let mut prev = input_dim;
        for pair in params.chunks(2) {
            let (w, b) = (&pair[0], &pair[1]);
            if w.rows() != prev || b.shape() != [1, w.cols()] {
                return Err(Error::Invalid(format!(
                    "inconsistent layer shapes {:?} / {:?}",
                    w.shape(),
                    b.shape()
                )));
            }
            prev = w.cols();
            hidden.push(prev);
        }
        let output_dim = hidden.pop().expect("at least two layers");
        let spec = NetworkSpec::new(input_dim, hidden, output_dim)?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn num_layers(&self) -> usize {
        self.params.len() / 2
    }

    /// Forward pass on a batch `x` of shape `[n, input_dim]` without recording.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.spec.input_dim,
                got: x.cols(),
            });
        }
        let last = self.num_layers() - 1;
        let mut h = x.clone();
        for (i, pair) in self.params.chunks(2).enumerate() {
            let (w, b) = (&pair[0], &pair[1]);
            let mut z = h.matmul(w);
            let cols = z.cols();
            for (j, v) in z.data_mut().iter_mut().enumerate() {
                *v += b.data()[j % cols];
                if i != last {
                    *v = v.tanh();
                }
            }
            h = z;
        }
        Ok(h)
    }

    /// Put every parameter on `tape` as a leaf.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.clone())).collect()
    }

    /// Recorded forward pass using parameter nodes from [`Mlp::register`].
    pub fn forward_tape(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.spec.input_dim {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.spec.input_dim,
                got: cols,
            });
        }
        let last = self.num_layers() - 1;
        let mut h = x;
        for (i, pair) in params.chunks(2).enumerate() {
            let z = tape.matmul(h, pair[0])?;
            let z = tape.add(z, pair[1])?;
            h = if i == last { z } else { tape.tanh(z)? };
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(3, vec![], 1).is_err());
        assert!(NetworkSpec::new(0, vec![4], 1).is_err());
        assert!(NetworkSpec::new(3, vec![4, 0], 1).is_err());
        let s = NetworkSpec::new(3, vec![64, 64], 2).unwrap();
        assert_eq!(s.layer_dims(), vec![(3, 64), (64, 64), (64, 2)]);
    }

    #[test]
    fn init_is_deterministic_and_orthogonal() {
        let spec = NetworkSpec::new(4, vec![8, 8], 1).unwrap();
        let a = Mlp::init(spec.clone(), 1.0, 11);
        let b = Mlp::init(spec.clone(), 1.0, 11);
        assert_eq!(a, b);
        assert_ne!(a, Mlp::init(spec, 1.0, 12));
        // Columns of the 4x8 first layer are not orthonormal, but its rows are
        // (scaled by sqrt 2).
        let w = &a.params()[0];
        let wwt = w.matmul(&w.transpose());
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 2.0 } else { 0.0 };
                assert!((wwt.get(i, j) - expect).abs() < 1e-10);
            }
        }
        assert!(a.params().iter().skip(1).step_by(2).all(|b| b.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn plain_and_recorded_forward_agree() {
        let spec = NetworkSpec::new(3, vec![5, 4], 2).unwrap();
        let net = Mlp::init(spec, 1.0, 5);
        let x = Tensor::new(2, 3, vec![0.1, -0.4, 2.0, 1.0, 0.0, -1.5]).unwrap();
        let plain = net.forward(&x).unwrap();
        let mut tape = Tape::new();
        let p = net.register(&mut tape);
        let xv = tape.leaf(x);
        let y = net.forward_tape(&mut tape, &p, xv).unwrap();
        for (a, b) in plain.data().iter().zip(tape.value(y).data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn from_params_round_trips_spec() {
        let spec = NetworkSpec::new(6, vec![100], 1).unwrap();
        let net = Mlp::init(spec.clone(), 1.0, 0);
        let again = Mlp::from_params(net.params().to_vec()).unwrap();
        assert_eq!(again.spec(), &spec);
        assert!(Mlp::from_params(vec![Tensor::zeros(2, 2)]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let net = Mlp::zeros(NetworkSpec::new(3, vec![4], 1).unwrap());
        assert!(matches!(
            net.forward(&Tensor::zeros(1, 2)),
            Err(Error::Dimension { expected: 3, got: 2, .. })
        ));
    }
}
