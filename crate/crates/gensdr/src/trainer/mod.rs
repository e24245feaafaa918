//! Joint estimation of the representation map and the conditional velocity
//! field by minibatch Adam on the interpolation regression loss
//! `(1/n) sum_i || da_t eta_i + db_t Y_i - g(R(X_i), Y_{i,t_i}, t_i) ||^2`.
//!
//! Gradients flow from the velocity network back through its first `d` input
//! columns into the representation network (the g-after-R chain rule).

pub mod ensemble;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolant::{make_batch, CsiBatch, Schedule};
use crate::numerics::{adam_step, AdamHyper, AdamState, Gradients, Matrix, MlpParams, MlpSpec};
use crate::real::Real;
use crate::rng::{derive_seed, Stream};

/// Hidden layer widths shared by both networks in the benchmarks.
pub const DEFAULT_HIDDEN: [usize; 3] = [64, 256, 128];

/// A fitted pair: representation `R: d_x -> d` and velocity field
/// `g: (d + d_y + 1) -> d_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSdrModel<R> {
    pub r_net: MlpParams<R>,
    pub g_net: MlpParams<R>,
    pub sched: Schedule,
    pub tau: R,
    /// Column means and standard deviations when z-scoring was requested.
    pub standardize: Option<(Vec<R>, Vec<R>)>,
    pub d_x: usize,
    pub d: usize,
    pub d_y: usize,
}

impl<R: Real> GenSdrModel<R> {
    fn apply_standardize(&self, x: &Matrix<R>) -> Matrix<R> {
        match &self.standardize {
            None => x.clone(),
            Some((means, stds)) => {
                let mut out = x.clone();
                for i in 0..out.rows() {
                    for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                        *v = (*v - means[j]) / stds[j];
                    }
                }
                out
            }
        }
    }

    /// Estimated representation, one row per observation.
    pub fn represent(&self, x: &Matrix<R>) -> Result<Matrix<R>> {
        let (r, _) = self.r_net.forward(&self.apply_standardize(x))?;
        Ok(r)
    }

    /// Velocity field at a common time `t` for a batch of states, given
    /// precomputed representations.
    pub fn velocity(&self, r: &Matrix<R>, state: &Matrix<R>, t: R) -> Result<Matrix<R>> {
        let input = g_input(r, state, |_| t);
        let (out, _) = self.g_net.forward(&input)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub tau: f64,
    pub seed: u64,
    /// Redraw noise and times each epoch; `false` keeps the single draw of
    /// the plain empirical estimator.
    pub resample: bool,
    /// Optional output clamp on the velocity network.
    pub clamp: Option<(f64, f64)>,
    /// Z-score the covariate columns before training.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            lr: 0.001,
            tau: 0.001,
            seed: 0,
            resample: true,
            clamp: None,
            standardize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1/2)", self.tau)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Assemble the velocity-network input `[r | state | t]` rowwise.
pub(crate) fn g_input<R: Real>(
    r: &Matrix<R>,
    state: &Matrix<R>,
    t: impl Fn(usize) -> R,
) -> Matrix<R> {
    let (n, d, d_y) = (r.rows(), r.cols(), state.cols());
    let mut input = Matrix::zeros(n, d + d_y + 1);
    for i in 0..n {
        let row = input.row_mut(i);
        row[..d].copy_from_slice(r.row(i));
        row[d..d + d_y].copy_from_slice(state.row(i));
        row[d + d_y] = t(i);
    }
    input
}

/// Loss and parameter gradients for one minibatch, chaining the velocity
/// network's input gradient into the representation network.
pub fn joint_loss_grads<R: Real>(
    r_net: &MlpParams<R>,
    g_net: &MlpParams<R>,
    xb: &Matrix<R>,
    y_tb: &Matrix<R>,
    tb: &[R],
    targetb: &Matrix<R>,
) -> Result<(f64, Gradients<R>, Gradients<R>)> {
    let b = xb.rows();
    let d = r_net.spec.output_size();
    let (r, r_cache) = r_net.forward(xb)?;
    let input = g_input(&r, y_tb, |i| tb[i]);
    let (out, g_cache) = g_net.forward(&input)?;
    if !out.is_finite() {
        return Err(Error::NonFinite { what: "velocity network output".into() });
    }
    let mut loss = 0.0f64;
    let mut grad_out = Matrix::zeros(out.rows(), out.cols());
    let scale = R::of(2.0 / b as f64);
    for ((g, o), t) in grad_out.data_mut().iter_mut().zip(out.data()).zip(targetb.data()) {
        let diff = *o - *t;
        loss += diff.as_f64() * diff.as_f64();
        *g = scale * diff;
    }
    loss /= b as f64;
    let (g_grads, grad_input) = g_net.backward(&g_cache, &grad_out)?;
    let grad_r = grad_input.slice_cols(0, d);
    let (r_grads, _) = r_net.backward(&r_cache, &grad_r)?;
    Ok((loss, r_grads, g_grads))
}

/// The empirical objective on a full batch.
pub fn csi_loss<R: Real>(model: &GenSdrModel<R>, batch: &CsiBatch<R>) -> Result<f64> {
    let r = model.represent(&batch.x)?;
    let input = g_input(&r, &batch.y_t, |i| batch.t[i]);
    let (out, _) = model.g_net.forward(&input)?;
    if !out.is_finite() {
        return Err(Error::NonFinite { what: "velocity network output".into() });
    }
    let n = batch.x.rows() as f64;
    let mut loss = 0.0f64;
    for (o, t) in out.data().iter().zip(batch.target.data()) {
        let diff = o.as_f64() - t.as_f64();
        loss += diff * diff;
    }
    Ok(loss / n)
}

fn column_stats<R: Real>(x: &Matrix<R>) -> (Vec<R>, Vec<R>) {
    let n = R::of(x.rows() as f64);
    let means: Vec<R> = x
        .col_sums()
        .into_iter()
        .map(|s| s / n)
        .collect();
    let mut vars = vec![R::zero(); x.cols()];
    for i in 0..x.rows() {
        for (j, v) in x.row(i).iter().enumerate() {
            let c = *v - means[j];
            vars[j] += c * c;
        }
    }
    let stds: Vec<R> = vars
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > R::zero() {
                s
            } else {
                R::one()
            }
        })
        .collect();
    (means, stds)
}

/// Train the joint model. `hidden_r`/`hidden_g` are the hidden layer widths
/// of the two networks. Returns the fitted model and the per-epoch loss
/// trace. Fully deterministic given `cfg.seed`.
pub fn train<R: Real>(
    x: &Matrix<R>,
    y: &Matrix<R>,
    d: usize,
    hidden_r: &[usize],
    hidden_g: &[usize],
    sched: Schedule,
    cfg: &TrainConfig,
) -> Result<(GenSdrModel<R>, Vec<f64>)> {
    cfg.validate()?;
    if x.rows() != y.rows() {
        return Err(Error::shape("train rows", x.rows(), y.rows()));
    }
    if x.rows() < cfg.batch_size {
        return Err(Error::Config(format!(
            "n = {} smaller than batch_size = {}",
            x.rows(),
            cfg.batch_size
        )));
    }
    if d == 0 {
        return Err(Error::Config("representation dimension d must be >= 1".into()));
    }
    let (n, d_x, d_y) = (x.rows(), x.cols(), y.cols());

    let standardize = cfg.standardize.then(|| column_stats(x));
    let x_train = match &standardize {
        None => x.clone(),
        Some((means, stds)) => {
            let mut out = x.clone();
            for i in 0..n {
                for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                    *v = (*v - means[j]) / stds[j];
                }
            }
            out
        }
    };

    let mut r_sizes = vec![d_x];
    r_sizes.extend_from_slice(hidden_r);
    r_sizes.push(d);
    let mut g_sizes = vec![d + d_y + 1];
    g_sizes.extend_from_slice(hidden_g);
    g_sizes.push(d_y);
    let r_spec = MlpSpec::new(r_sizes, cfg.seed);
    let mut g_spec = MlpSpec::new(g_sizes, cfg.seed);
    if let Some((lo, hi)) = cfg.clamp {
        g_spec = g_spec.with_clamp(R::of(lo), R::of(hi));
    }

    let mut r_net = crate::numerics::mlp_init(&r_spec, &mut Stream::new(derive_seed(cfg.seed, 0, "r-init")))?;
    let mut g_net = crate::numerics::mlp_init(&g_spec, &mut Stream::new(derive_seed(cfg.seed, 0, "g-init")))?;
    let hyper = AdamHyper::with_lr(R::of(cfg.lr));
    let mut r_state = AdamState::for_params(&r_net, hyper.clone());
    let mut g_state = AdamState::for_params(&g_net, hyper);

    let mut draw_rng = Stream::new(derive_seed(cfg.seed, 0, "batchdraw"));
    let mut shuffle_rng = Stream::new(derive_seed(cfg.seed, 0, "shuffle"));
    let tau = R::of(cfg.tau);
    let fixed = (!cfg.resample).then(|| make_batch(&x_train, y, sched, tau, &mut draw_rng)).transpose()?;

    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batch = match &fixed {
            Some(b) => b.clone(),
            None => make_batch(&x_train, y, sched, tau, &mut draw_rng)?,
        };
        let mut perm: Vec<usize> = (0..n).collect();
        shuffle_rng.shuffle(&mut perm);
        let mut epoch_loss = 0.0f64;
        for chunk in perm.chunks(cfg.batch_size) {
            let xb = batch.x.select_rows(chunk);
            let y_tb = batch.y_t.select_rows(chunk);
            let targetb = batch.target.select_rows(chunk);
            let tb: Vec<R> = chunk.iter().map(|&i| batch.t[i]).collect();
            let (loss, r_grads, g_grads) =
                joint_loss_grads(&r_net, &g_net, &xb, &y_tb, &tb, &targetb)?;
            adam_step(&mut r_net, &r_grads, &mut r_state)?;
            adam_step(&mut g_net, &g_grads, &mut g_state)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch, trace });
        }
        trace.push(epoch_loss);
    }

    Ok((
        GenSdrModel {
            r_net,
            g_net,
            sched,
            tau,
            standardize,
            d_x,
            d,
            d_y,
        },
        trace,
    ))
}
