use crate::autodiff::Tensor;

/// Variance floor inside the normalization square root.
pub const NORM_EPS: f64 = 1e-8;
/// Normalized values are clipped to `[-CLIP, CLIP]`.
pub const NORM_CLIP: f64 = 10.0;

/// Per-dimension running mean and variance (Welford), used to map raw
/// observations to `clip((x - mean) / sqrt(var + 1e-8), -10, 10)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningNormalizer {
    count: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
    pub frozen: bool,
}

impl RunningNormalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            frozen: false,
        }
    }

    pub fn from_stats(count: f64, mean: Vec<f64>, var: Vec<f64>) -> Self {
        Self {
            count,
            mean,
            var,
            frozen: false,
        }
    }

    /// Statistics of a fixed set of rows.
    pub fn fit<R: AsRef<[f64]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Self {
        let mut n = Self::new(dim);
        for r in rows {
            n.update(r.as_ref());
        }
        n
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance; 1 before any update.
    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn update(&mut self, x: &[f64]) {
        if self.frozen {
            return;
        }
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for ((m, s2), &v) in self.mean.iter_mut().zip(self.var.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.count;
            *s2 = (*s2 + (delta * (v - *m) - *s2) / self.count).max(0.0);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((&v, &m), &s2)| ((v - m) / (s2 + NORM_EPS).sqrt()).clamp(-NORM_CLIP, NORM_CLIP))
            .collect()
    }

    /// Normalize every row of a `[n, dim]` tensor.
    pub fn normalize_rows(&self, x: &Tensor) -> Tensor {
        let mut data = Vec::with_capacity(x.len());
        for r in 0..x.rows() {
            data.extend(self.normalize(x.row_slice(r)));
        }
        Tensor::new(x.rows(), x.cols(), data).expect("shape preserved")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass_statistics() {
        let rows = [[1.0, -2.0], [3.0, 0.5], [-4.0, 1.5], [2.0, 2.0]];
        let n = RunningNormalizer::fit(2, rows.iter());
        for d in 0..2 {
            let mean = rows.iter().map(|r| r[d]).sum::<f64>() / 4.0;
            let var = rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / 4.0;
            assert!((n.mean()[d] - mean).abs() < 1e-12);
            assert!((n.var()[d] - var).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_is_clipped_and_frozen_stats_stay() {
        let mut n = RunningNormalizer::fit(1, [[0.0], [0.0], [0.0]]);
        assert_eq!(n.normalize(&[5.0]), vec![10.0]);
        assert_eq!(n.normalize(&[-5.0]), vec![-10.0]);
        n.frozen = true;
        n.update(&[100.0]);
        assert_eq!(n.count(), 3.0);
    }

    #[test]
    fn empty_normalizer_is_identity() {
        let n = RunningNormalizer::new(2);
        let out = n.normalize(&[0.3, -0.2]);
        assert!((out[0] - 0.3).abs() < 1e-7 && (out[1] + 0.2).abs() < 1e-7);
    }
}
