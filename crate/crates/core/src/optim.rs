//! Adam and global-norm gradient clipping over lists of parameter tensors.

use crate::autodiff::Tensor;

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update. `params` and `grads` must line up; moment buffers are
    /// allocated on the first call.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            debug_assert_eq!(p.shape(), g.shape());
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (((w, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescale `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= k;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Tensor::row(&[1.0, -1.0]);
        let g = Tensor::row(&[0.5, -2.0]);
        let mut opt = Adam::new(0.1);
        opt.step(&mut [&mut p], &[g]);
        assert!((p.data()[0] - 0.9).abs() < 1e-6);
        assert!((p.data()[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = Tensor::row(&[3.0]);
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let g = Tensor::row(&[2.0 * (p.data()[0] - 1.0)]);
            opt.step(&mut [&mut p], &[g]);
        }
        assert!((p.data()[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = vec![Tensor::row(&[3.0, 4.0]), Tensor::row(&[12.0])];
        let before = clip_grad_norm(&mut g, 0.5);
        assert!((before - 13.0).abs() < 1e-12);
        assert!(global_norm(&g) <= 0.5 + 1e-9);
        let mut small = vec![Tensor::row(&[0.1])];
        clip_grad_norm(&mut small, 0.5);
        assert_eq!(small[0].data(), &[0.1]);
    }
}
