//! Reverse-mode automatic differentiation on a recorded operation tape.
//!
//! A [`Tape`] records every operation together with its eagerly computed
//! value. [`Tape::backward`] sweeps the tape once in reverse to produce a
//! [`GradMap`]. [`Tape::input_gradient_as_node`] instead records the reverse
//! sweep as ordinary tape operations, which is what lets the gradient penalty
//! `(|grad_x D(x)| - 1)^2` be differentiated with respect to the weights of `D`.

mod tape;
mod tensor;

pub use tape::{sigmoid, GradMap, OpKind, Tape, Var, L2_NORM_EPS};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: [usize; 2],
        rhs: [usize; 2],
    },
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("{op}: expected {expected} inputs, got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("backward requires a scalar output, got shape {shape:?}")]
    NotScalar { shape: [usize; 2] },
    #[error("node {0} is not on this tape")]
    UnknownVar(usize),
    #[error("buffer of length {len} does not fit shape {shape:?}")]
    BadBuffer { shape: [usize; 2], len: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_values() {
        let mut t = Tape::new();
        let z = t.scalar(0.0);
        let th = t.tanh(z).unwrap();
        assert_eq!(t.value(th).item(), 0.0);
        let s = t.sigmoid(z).unwrap();
        assert_eq!(t.value(s).item(), 0.5);
        let a = t.leaf(Tensor::row(&[1.0, 2.0]));
        let b = t.leaf(Tensor::column(&[3.0, 4.0]));
        let m = t.matmul(a, b).unwrap();
        assert_eq!(t.value(m).shape(), [1, 1]);
        assert_eq!(t.value(m).item(), 11.0);
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(2, 3));
        let b = t.leaf(Tensor::zeros(2, 3));
        let err = t.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            AutodiffError::Shape {
                op: "matmul",
                lhs: [2, 3],
                rhs: [2, 3]
            }
        );
        assert!(err.to_string().contains("matmul"));
        let c = t.leaf(Tensor::zeros(3, 2));
        assert!(matches!(t.add(a, c), Err(AutodiffError::Shape { op: "add", .. })));
    }

    #[test]
    fn log_and_sqrt_reject_non_positive() {
        let mut t = Tape::new();
        let z = t.scalar(0.0);
        let n = t.scalar(-1.0);
        assert!(matches!(t.log(z), Err(AutodiffError::Domain { op: "log", .. })));
        assert!(matches!(t.sqrt(n), Err(AutodiffError::Domain { op: "sqrt", .. })));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(2, 1));
        let b = t.tanh(a).unwrap();
        assert!(matches!(t.backward(b), Err(AutodiffError::NotScalar { .. })));
    }

    #[test]
    fn simple_gradients() {
        let mut t = Tape::new();
        let x = t.scalar(3.0);
        let y = t.mul(x, x).unwrap();
        assert_eq!(t.backward(y).unwrap().wrt(x).item(), 6.0);

        let z = t.scalar(0.0);
        let th = t.tanh(z).unwrap();
        assert_eq!(t.backward(th).unwrap().wrt(z).item(), 1.0);
    }

    #[test]
    fn backward_is_reentrant() {
        let mut t = Tape::new();
        let x = t.scalar(1.5);
        let y = t.exp(x).unwrap();
        let g1 = t.backward(y).unwrap().wrt(x);
        let g2 = t.backward(y).unwrap().wrt(x);
        assert_eq!(g1, g2);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn unreachable_nodes_get_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(&[1.0, 2.0]));
        let y = t.scalar(2.0);
        let out = t.square(y).unwrap();
        let g = t.backward(out).unwrap();
        assert!(g.get(x).is_none());
        assert_eq!(g.wrt(x), Tensor::zeros(1, 2));
    }

    #[test]
    fn second_order_scalar_chain() {
        // f(x) = x^2, g = f'(x) = 2x, h = (|g| - 1)^2, dh/dx = 2(2x - 1) * 2.
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(&[3.0]));
        let f = t.square(x).unwrap();
        let f = t.sum(f).unwrap();
        let g = t.input_gradient_as_node(f, x).unwrap();
        assert_eq!(t.value(g).item(), 6.0);
        let norm = t.l2norm_rows(g).unwrap();
        let shifted = t.add_scalar(norm, -1.0).unwrap();
        let h = t.square(shifted).unwrap();
        let h = t.sum(h).unwrap();
        assert!((t.value(h).item() - 25.0).abs() < 1e-9);
        let dh = t.backward(h).unwrap().wrt(x).item();
        assert!((dh - 20.0).abs() < 1e-9, "{dh}");
    }

    #[test]
    fn unit_linear_map_has_unit_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w: Vec<f64> = raw.iter().map(|v| v / n).collect();
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(5, 4, (0..20).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap());
        let wv = t.leaf(Tensor::column(&w));
        let d = t.matmul(x, wv).unwrap();
        let s = t.sum(d).unwrap();
        let g = t.input_gradient_as_node(s, x).unwrap();
        let norms = t.l2norm_rows(g).unwrap();
        let shifted = t.add_scalar(norms, -1.0).unwrap();
        let sq = t.square(shifted).unwrap();
        let gp = t.mean(sq).unwrap();
        assert!(t.value(gp).item() < 1e-10);
    }

    #[test]
    fn gradient_of_independent_output_is_zero_node() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(&[1.0, 2.0]));
        let y = t.scalar(4.0);
        let out = t.square(y).unwrap();
        let g = t.input_gradient_as_node(out, x).unwrap();
        assert_eq!(t.value(g), &Tensor::zeros(1, 2));
    }

    #[test]
    fn identical_op_sequences_are_bitwise_identical() {
        let build = || {
            let mut t = Tape::new();
            let x = t.leaf(Tensor::new(2, 2, vec![0.3, -0.7, 1.1, 0.05]).unwrap());
            let w = t.leaf(Tensor::new(2, 2, vec![0.9, 0.1, -0.4, 0.2]).unwrap());
            let h = t.matmul(x, w).unwrap();
            let h = t.tanh(h).unwrap();
            let s = t.sum(h).unwrap();
            let g = t.input_gradient_as_node(s, x).unwrap();
            (t.len(), g, t.value(g).clone(), t.backward(s).unwrap().wrt(w))
        };
        let a = build();
        let b = build();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(
            a.2.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.2.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.3, b.3);
    }
}
