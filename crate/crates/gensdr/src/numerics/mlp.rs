//! ReLU multilayer perceptron with hand-derived backward pass.
//!
//! Layout: affine layers with ReLU between them, final layer affine, plus an
//! optional elementwise clamp on the output. The backward pass returns both
//! parameter gradients and the gradient with respect to the input batch, so a
//! downstream network can be chained into an upstream one.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Stream;

use super::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec<R> {
    pub layer_sizes: Vec<usize>,
    pub clamp: Option<(R, R)>,
    pub seed: u64,
}

impl<R: Real> MlpSpec<R> {
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Self {
        MlpSpec {
            layer_sizes,
            clamp: None,
            seed,
        }
    }

    pub fn with_clamp(mut self, lo: R, hi: R) -> Self {
        self.clamp = Some((lo, hi));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least input and output layer sizes, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!(
                "zero layer size in {:?}",
                self.layer_sizes
            )));
        }
        if let Some((lo, hi)) = self.clamp {
            if !(lo < hi) {
                return Err(Error::Config(format!("clamp_lo {lo} must be < clamp_hi {hi}")));
            }
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<R> {
    /// Per-layer weights, `W_l` of shape `d_l x d_{l-1}`.
    pub weights: Vec<Matrix<R>>,
    /// Per-layer biases, length `d_l`.
    pub biases: Vec<Vec<R>>,
    pub spec: MlpSpec<R>,
}

/// Cached intermediates from a forward call, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache<R> {
    input: Matrix<R>,
    /// Pre-activation of each layer; the last entry is the raw (pre-clamp) output.
    pre: Vec<Matrix<R>>,
}

/// Gradients with the same shapes as `MlpParams`.
#[derive(Debug, Clone)]
pub struct Gradients<R> {
    pub weights: Vec<Matrix<R>>,
    pub biases: Vec<Vec<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn zeros_like(params: &MlpParams<R>) -> Self {
        Gradients {
            weights: params
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: params.biases.iter().map(|b| vec![R::zero(); b.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&mut self, s: R) {
        for w in &mut self.weights {
            for x in w.data_mut() {
                *x *= s;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= s;
            }
        }
    }

    pub fn add(&mut self, other: &Gradients<R>) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in w.data_mut().iter_mut().zip(o.data()) {
                *x += *y;
            }
        }
        for (b, o) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in b.iter_mut().zip(o) {
                *x += *y;
            }
        }
    }
}

/// Initialize parameters: weights from the fan-in-scaled uniform
/// `U(-sqrt(6/d_in), +sqrt(6/d_in))`, biases zero. Deterministic given
/// `spec.seed` is irrelevant here; the caller supplies the stream.
pub fn mlp_init<R: Real>(spec: &MlpSpec<R>, rng: &mut Stream) -> Result<MlpParams<R>> {
    spec.validate()?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 1..spec.layer_sizes.len() {
        let d_in = spec.layer_sizes[l - 1];
        let d_out = spec.layer_sizes[l];
        let bound = R::of((1.0 / d_in as f64).sqrt());
        let mut w = Matrix::zeros(d_out, d_in);
        for x in w.data_mut() {
            *x = rng.uniform_in(-bound, bound);
        }
        weights.push(w);
        let mut b = vec![R::zero(); d_out];
        for x in b.iter_mut() {
            *x = rng.uniform_in(-bound, bound);
        }
        biases.push(b);
    }
    Ok(MlpParams {
        weights,
        biases,
        spec: spec.clone(),
    })
}

impl<R: Real> MlpParams<R> {
    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass on a row-major batch (one observation per row).
    pub fn forward(&self, batch: &Matrix<R>) -> Result<(Matrix<R>, ForwardCache<R>)> {
        if batch.cols() != self.spec.input_size() {
            return Err(Error::shape(
                "mlp_forward input",
                self.spec.input_size(),
                batch.cols(),
            ));
        }
        let last = self.num_layers() - 1;
        let mut pre = Vec::with_capacity(self.num_layers());
        let mut act = batch.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = act.matmul_nt(w)?;
            z.add_row_vector(b);
            pre.push(z.clone());
            if l < last {
                act = z.map(|x| x.max(R::zero()));
            } else {
                act = z;
            }
        }
        if let Some((lo, hi)) = self.spec.clamp {
            act = act.map(|x| x.max(lo).min(hi));
        }
        Ok((
            act,
            ForwardCache {
                input: batch.clone(),
                pre,
            },
        ))
    }

    /// Backward pass. `grad_out` is the loss gradient with respect to the
    /// (possibly clamped) output; returns parameter gradients and the
    /// gradient with respect to the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache<R>,
        grad_out: &Matrix<R>,
    ) -> Result<(Gradients<R>, Matrix<R>)> {
        let last = self.num_layers() - 1;
        if cache.pre.len() != self.num_layers() {
            return Err(Error::shape("mlp_backward cache", self.num_layers(), cache.pre.len()));
        }
        let raw_out = &cache.pre[last];
        if grad_out.rows() != raw_out.rows() || grad_out.cols() != raw_out.cols() {
            return Err(Error::shape(
                "mlp_backward grad_out",
                format!("{}x{}", raw_out.rows(), raw_out.cols()),
                format!("{}x{}", grad_out.rows(), grad_out.cols()),
            ));
        }

        let mut g = grad_out.clone();
        if let Some((lo, hi)) = self.spec.clamp {
            // Zero subgradient where the raw output saturated the clamp.
            for i in 0..g.rows() {
                let raw = raw_out.row(i);
                for (j, x) in g.row_mut(i).iter_mut().enumerate() {
                    if raw[j] < lo || raw[j] > hi {
                        *x = R::zero();
                    }
                }
            }
        }

        let mut grads = Gradients::zeros_like(self);
        for l in (0..=last).rev() {
            let prev_act;
            let prev: &Matrix<R> = if l == 0 {
                &cache.input
            } else {
                prev_act = cache.pre[l - 1].map(|x| x.max(R::zero()));
                &prev_act
            };
            grads.weights[l] = g.matmul_tn(prev)?;
            grads.biases[l] = g.col_sums();
            let mut g_prev = g.matmul(&self.weights[l])?;
            if l > 0 {
                // ReLU subgradient: 0 at and below 0.
                let pre_prev = &cache.pre[l - 1];
                for i in 0..g_prev.rows() {
                    let zs = pre_prev.row(i);
                    for (j, x) in g_prev.row_mut(i).iter_mut().enumerate() {
                        if zs[j] <= R::zero() {
                            *x = R::zero();
                        }
                    }
                }
            }
            g = g_prev;
        }
        Ok((grads, g))
    }

    /// Flatten every parameter tensor into `f64` in a fixed order
    /// (per layer: row-major weights, then biases).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.data().iter().map(|x| x.as_f64()));
            out.extend(b.iter().map(|x| x.as_f64()));
        }
        out
    }

    /// Inverse of [`flatten`].
    pub fn unflatten_into(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("unflatten", self.param_count(), flat.len()));
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            for x in w.data_mut() {
                *x = R::of(flat[k]);
                k += 1;
            }
            for x in b.iter_mut() {
                *x = R::of(flat[k]);
                k += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sizes: &[usize]) -> MlpSpec<f64> {
        MlpSpec::new(sizes.to_vec(), 0)
    }

    #[test]
    fn param_counts() {
        let mut rng = Stream::new(1);
        let p = mlp_init(&spec(&[50, 64, 256, 128, 1]), &mut rng).unwrap();
        assert_eq!(p.param_count(), 52_929);
        let p = mlp_init(&spec(&[3, 3]), &mut rng).unwrap();
        assert_eq!(p.param_count(), 12);
    }

    #[test]
    fn init_is_deterministic() {
        let s = spec(&[4, 8, 2]);
        let a = mlp_init(&s, &mut Stream::new(9)).unwrap();
        let b = mlp_init(&s, &mut Stream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_rejects_zero_layer() {
        assert!(mlp_init(&spec(&[3, 0, 2]), &mut Stream::new(0)).is_err());
    }

    #[test]
    fn identity_forward() {
        let mut p = mlp_init(&spec(&[3, 3]), &mut Stream::new(0)).unwrap();
        p.weights[0] = Matrix::identity(3);
        p.biases[0] = vec![0.0; 3];
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5]]).unwrap();
        let (y, _) = p.forward(&x).unwrap();
        assert_eq!(y.row(0), x.row(0));
    }

    #[test]
    fn two_layer_hand_example() {
        // W1 = [[1], [-1]], b1 = 0; W2 = [[1, 1]], b2 = 0; x = -2
        let mut p = mlp_init(&spec(&[1, 2, 1]), &mut Stream::new(0)).unwrap();
        p.weights[0] = Matrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap();
        p.weights[1] = Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        p.biases = vec![vec![0.0; 2], vec![0.0]];
        let (y, _) = p.forward(&Matrix::from_rows(&[vec![-2.0]]).unwrap()).unwrap();
        assert_eq!(y[(0, 0)], 2.0);
    }

    #[test]
    fn clamp_saturates_and_zeroes_gradient() {
        let mut p = mlp_init(&spec(&[1, 1]).with_clamp(0.0, 1.0), &mut Stream::new(0)).unwrap();
        p.weights[0] = Matrix::from_vec(1, 1, vec![3.0]).unwrap();
        p.biases[0] = vec![0.0];
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let (y, cache) = p.forward(&x).unwrap();
        assert_eq!(y[(0, 0)], 1.0); // raw output 3 clamped to 1
        let g = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let (grads, gin) = p.backward(&cache, &g).unwrap();
        assert_eq!(grads.weights[0][(0, 0)], 0.0);
        assert_eq!(gin[(0, 0)], 0.0);
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        let mut p = mlp_init(&spec(&[1, 2, 1]), &mut Stream::new(0)).unwrap();
        p.weights[0] = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        p.weights[1] = Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        p.biases = vec![vec![0.0; 2], vec![0.0]];
        let x = Matrix::from_rows(&[vec![-3.0]]).unwrap();
        let (_, cache) = p.forward(&x).unwrap();
        let (grads, gin) = p
            .backward(&cache, &Matrix::from_rows(&[vec![1.0]]).unwrap())
            .unwrap();
        assert_eq!(grads.weights[0].data(), &[0.0, 0.0]);
        assert_eq!(gin[(0, 0)], 0.0);
    }

    #[test]
    fn linear_net_gradient_pattern() {
        // y = W x on a 2x2 case: dW must equal G^T X.
        let mut p = mlp_init(&spec(&[2, 2]), &mut Stream::new(0)).unwrap();
        p.weights[0] = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        p.biases[0] = vec![0.0; 2];
        let x = Matrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let (_, cache) = p.forward(&x).unwrap();
        let g = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (grads, _) = p.backward(&cache, &g).unwrap();
        let expected = g.matmul_tn(&x).unwrap();
        assert_eq!(grads.weights[0], expected);
    }

    /// Central finite-difference oracle for the full parameter gradient.
    fn fd_check(sizes: &[usize], seed: u64) -> f64 {
        let s = spec(sizes);
        let mut rng = Stream::new(seed);
        let p = mlp_init(&s, &mut rng).unwrap();
        let n = 3;
        let mut x = Matrix::zeros(n, sizes[0]);
        for v in x.data_mut() {
            *v = rng.normal::<f64>();
        }
        let mut target = Matrix::zeros(n, *sizes.last().unwrap());
        for v in target.data_mut() {
            *v = rng.normal::<f64>();
        }
        let loss = |p: &MlpParams<f64>| -> f64 {
            let (y, _) = p.forward(&x).unwrap();
            let mut s = 0.0;
            for (a, b) in y.data().iter().zip(target.data()) {
                s += (a - b) * (a - b);
            }
            s / n as f64
        };
        let (y, cache) = p.forward(&x).unwrap();
        let mut g = Matrix::zeros(y.rows(), y.cols());
        for ((gv, yv), tv) in g.data_mut().iter_mut().zip(y.data()).zip(target.data()) {
            *gv = 2.0 * (yv - tv) / n as f64;
        }
        let (grads, _) = p.backward(&cache, &g).unwrap();
        let analytic: Vec<f64> = {
            let mut tmp = p.clone();
            tmp.weights = grads.weights.clone();
            tmp.biases = grads.biases.clone();
            tmp.flatten()
        };
        let flat = p.flatten();
        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for k in 0..flat.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            let mut fp = flat.clone();
            fp[k] += h;
            plus.unflatten_into(&fp).unwrap();
            fp[k] -= 2.0 * h;
            minus.unflatten_into(&fp).unwrap();
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let denom = analytic[k].abs().max(fd.abs()).max(1e-4);
            max_rel = max_rel.max((analytic[k] - fd).abs() / denom);
        }
        max_rel
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..4u64 {
            let err = fd_check(&[4, 6, 8, 2], seed + 1);
            assert!(err < 1e-5, "seed {seed}: rel err {err}");
        }
    }
}
