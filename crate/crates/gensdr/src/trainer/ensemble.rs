//! Kernel-ensemble training for SPD-matrix responses.
//!
//! Each reference response `y_l` induces a scalar feature
//! `h_l(Y) = exp(-omega ||Y - y_l||_F)`; one interpolation model per feature
//! is fitted jointly, all sharing the representation network. The heads are
//! realized either as one trunk network with a learned per-head embedding
//! (scales to many heads) or as independent per-head networks (exact mode,
//! small head counts only).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolant::Schedule;
use crate::numerics::{
    adam_step, adam_step_flat, AdamHyper, AdamState, Matrix, MlpParams, MlpSpec,
};
use crate::real::Real;
use crate::rng::{derive_seed, Stream};
use crate::simgen::spd::SpdMatrix2;

use super::{g_input, TrainConfig};

/// Kernel reference set and bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec<R> {
    /// Reference responses drawn from the observed sample.
    pub references: Vec<SpdMatrix2<R>>,
    /// Kernel bandwidth, the inverse median Frobenius distance.
    pub omega: R,
    /// Active heads, as indices into `references`.
    pub head_indices: Vec<usize>,
}

impl<R: Real> EnsembleSpec<R> {
    pub fn num_heads(&self) -> usize {
        self.head_indices.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Number of active heads.
    pub m: usize,
    /// Heads evaluated per minibatch (trunk mode).
    pub heads_per_batch: usize,
    /// Per-head embedding width (trunk mode).
    pub embed_dim: usize,
    /// Fraction of the sample used as the kernel reference set.
    pub fraction: f64,
    /// Instantiate independent per-head networks instead of the shared
    /// trunk; only sensible for small `m`.
    pub exact: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        // All heads in every minibatch: subsampling heads leaves embeddings
        // stale and the representation network can collapse to a constant.
        EnsembleConfig {
            m: 16,
            heads_per_batch: 16,
            embed_dim: 8,
            fraction: 0.5,
            exact: false,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.heads_per_batch == 0 {
            return Err(Error::Config("ensemble needs m >= 1 and heads_per_batch >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fraction) || self.fraction == 0.0 {
            return Err(Error::Config(format!("fraction {} outside (0, 1]", self.fraction)));
        }
        if self.exact && self.m > 8 {
            return Err(Error::Config(format!(
                "exact mode instantiates independent heads; m = {} is too many (max 8)",
                self.m
            )));
        }
        if !self.exact && self.embed_dim == 0 {
            return Err(Error::Config("trunk mode needs embed_dim >= 1".into()));
        }
        Ok(())
    }
}

/// Build the kernel ensemble: a random reference subset of the responses,
/// bandwidth `omega = 1 / median Frobenius distance` between the full sample
/// and the reference set, and `m` randomly selected heads.
pub fn build_kernel_ensemble<R: Real>(
    ys: &[SpdMatrix2<R>],
    fraction: f64,
    m: usize,
    rng: &mut Stream,
) -> Result<EnsembleSpec<R>> {
    if ys.len() < 2 {
        return Err(Error::Config(format!("need >= 2 responses, got {}", ys.len())));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction {fraction} outside (0, 1]")));
    }
    let n_ref = ((fraction * ys.len() as f64).floor() as usize).max(1);
    let ref_idx = rng.sample_indices(ys.len(), n_ref);
    let references: Vec<SpdMatrix2<R>> = ref_idx.iter().map(|&i| ys[i]).collect();
    let mut dists: Vec<f64> = Vec::with_capacity(ys.len() * n_ref);
    for y in ys {
        for r in &references {
            dists.push(y.frobenius_distance(r).as_f64());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median <= 0.0 {
        return Err(Error::DegenerateEnsemble);
    }
    let head_indices = rng.sample_indices(n_ref, m.min(n_ref));
    Ok(EnsembleSpec {
        references,
        omega: R::of(1.0 / median),
        head_indices,
    })
}

/// Kernel feature of head `l`: `exp(-omega ||y - y_l||_F)`, in `(0, 1]`.
pub fn ensemble_feature<R: Real>(spec: &EnsembleSpec<R>, y: &SpdMatrix2<R>, l: usize) -> R {
    let center = &spec.references[spec.head_indices[l]];
    (-spec.omega * y.frobenius_distance(center)).exp()
}

/// Per-head scalar features of every response, one row per observation.
pub fn feature_matrix<R: Real>(spec: &EnsembleSpec<R>, ys: &[SpdMatrix2<R>]) -> Matrix<R> {
    let m = spec.num_heads();
    let mut out = Matrix::zeros(ys.len(), m);
    for (i, y) in ys.iter().enumerate() {
        for l in 0..m {
            out[(i, l)] = ensemble_feature(spec, y, l);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleMode<R> {
    /// One shared network over `[r | state | t | embedding]`.
    Trunk {
        g_net: MlpParams<R>,
        /// `m x embed_dim`, learned jointly.
        embeddings: Matrix<R>,
    },
    /// Independent per-head networks over `[r | state | t]`.
    Exact { heads: Vec<MlpParams<R>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel<R> {
    pub r_net: MlpParams<R>,
    pub mode: EnsembleMode<R>,
    pub spec: EnsembleSpec<R>,
    pub sched: Schedule,
    pub tau: R,
    pub d_x: usize,
    pub d: usize,
}

impl<R: Real> EnsembleModel<R> {
    pub fn represent(&self, x: &Matrix<R>) -> Result<Matrix<R>> {
        let (r, _) = self.r_net.forward(x)?;
        Ok(r)
    }
}

/// Head-averaged loss over all heads with the supplied noise/time draws:
/// `(1/(m n)) sum_l sum_i (target_il - g_l(R(x_i), y_t_il, t_i))^2`.
pub fn ensemble_loss<R: Real>(
    model: &EnsembleModel<R>,
    x: &Matrix<R>,
    feats: &Matrix<R>,
    eta: &[R],
    t: &[R],
) -> Result<f64> {
    let n = x.rows();
    let m = feats.cols();
    let r = model.represent(x)?;
    let mut total = 0.0f64;
    for l in 0..m {
        let mut state = Matrix::zeros(n, 1);
        let mut target = vec![R::zero(); n];
        for i in 0..n {
            let c = model.sched.eval(t[i])?;
            state[(i, 0)] = c.alpha * eta[i] + c.beta * feats[(i, l)];
            target[i] = c.dalpha * eta[i] + c.dbeta * feats[(i, l)];
        }
        let out = match &model.mode {
            EnsembleMode::Exact { heads } => {
                let input = g_input(&r, &state, |i| t[i]);
                heads[l].forward(&input)?.0
            }
            EnsembleMode::Trunk { g_net, embeddings } => {
                let d = r.cols();
                let p = embeddings.cols();
                let mut input = Matrix::zeros(n, d + 2 + p);
                for i in 0..n {
                    let row = input.row_mut(i);
                    row[..d].copy_from_slice(r.row(i));
                    row[d] = state[(i, 0)];
                    row[d + 1] = t[i];
                    row[d + 2..].copy_from_slice(embeddings.row(l));
                }
                g_net.forward(&input)?.0
            }
        };
        for i in 0..n {
            let diff = (out[(i, 0)] - target[i]).as_f64();
            total += diff * diff;
        }
    }
    Ok(total / (m * n) as f64)
}

/// Train the shared representation network and the head networks on the
/// kernel features of SPD responses. Deterministic given `cfg.seed`.
pub fn train_ensemble<R: Real>(
    x: &Matrix<R>,
    ys: &[SpdMatrix2<R>],
    spec: EnsembleSpec<R>,
    d: usize,
    hidden: &[usize],
    sched: Schedule,
    cfg: &TrainConfig,
    ecfg: &EnsembleConfig,
) -> Result<(EnsembleModel<R>, Vec<f64>)> {
    cfg.validate()?;
    ecfg.validate()?;
    if x.rows() != ys.len() {
        return Err(Error::shape("train_ensemble rows", x.rows(), ys.len()));
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
    let (n, d_x) = (x.rows(), x.cols());
    let m = spec.num_heads();
    let p = ecfg.embed_dim;
    // Standardize each head's feature column. Raw kernel features live in
    // (0, 1] with small spread, so the interpolation noise drowns the signal
    // that reaches the representation network and training can collapse to a
    // constant R. Only training sees the features, so this rescaling does not
    // touch inference.
    let mut feats = feature_matrix(&spec, ys);
    for l in 0..feats.cols() {
        let nr = R::of(n as f64);
        let mut mean = R::zero();
        for i in 0..n {
            mean += feats[(i, l)];
        }
        mean /= nr;
        let mut var = R::zero();
        for i in 0..n {
            let c = feats[(i, l)] - mean;
            var += c * c;
        }
        let std = (var / nr).sqrt();
        let scale = if std > R::zero() { std } else { R::one() };
        for i in 0..n {
            feats[(i, l)] = (feats[(i, l)] - mean) / scale;
        }
    }

    let mut r_sizes = vec![d_x];
    r_sizes.extend_from_slice(hidden);
    r_sizes.push(d);
    let mut r_net = crate::numerics::mlp_init(
        &MlpSpec::new(r_sizes, cfg.seed),
        &mut Stream::new(derive_seed(cfg.seed, 0, "r-init")),
    )?;
    let hyper = AdamHyper::with_lr(R::of(cfg.lr));
    let mut r_state = AdamState::for_params(&r_net, hyper.clone());

    let g_sizes = |input: usize| -> Vec<usize> {
        let mut s = vec![input];
        s.extend_from_slice(hidden);
        s.push(1);
        s
    };
    let mut mode = if ecfg.exact {
        let heads = (0..m)
            .map(|l| {
                crate::numerics::mlp_init(
                    &MlpSpec::new(g_sizes(d + 2), cfg.seed),
                    &mut Stream::new(derive_seed(cfg.seed, l as u64, "g-init")),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        EnsembleMode::Exact { heads }
    } else {
        let g_net = crate::numerics::mlp_init(
            &MlpSpec::new(g_sizes(d + 2 + p), cfg.seed),
            &mut Stream::new(derive_seed(cfg.seed, 0, "g-init")),
        )?;
        let mut embeddings = Matrix::zeros(m, p);
        let mut erng = Stream::new(derive_seed(cfg.seed, 0, "embed-init"));
        for v in embeddings.data_mut() {
            *v = erng.normal();
        }
        EnsembleMode::Trunk { g_net, embeddings }
    };
    let mut head_states: Vec<AdamState<R>> = match &mode {
        EnsembleMode::Exact { heads } => heads
            .iter()
            .map(|h| AdamState::for_params(h, hyper.clone()))
            .collect(),
        EnsembleMode::Trunk { g_net, .. } => vec![AdamState::for_params(g_net, hyper.clone())],
    };
    let mut embed_state = AdamState::for_flat(m * p, hyper);

    let mut draw_rng = Stream::new(derive_seed(cfg.seed, 0, "batchdraw"));
    let mut shuffle_rng = Stream::new(derive_seed(cfg.seed, 0, "shuffle"));
    let mut head_rng = Stream::new(derive_seed(cfg.seed, 0, "headdraw"));
    let tau = R::of(cfg.tau);
    let hi = R::one() - tau;

    // Fixed-draw mode keeps the first epoch's noise and times.
    let mut fixed: Option<(Vec<R>, Vec<R>)> = None;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (eta, t): (Vec<R>, Vec<R>) = match (&fixed, cfg.resample) {
            (Some(f), false) => f.clone(),
            _ => {
                let eta: Vec<R> = (0..n).map(|_| draw_rng.normal()).collect();
                let t: Vec<R> = (0..n).map(|_| draw_rng.uniform_in(R::zero(), hi)).collect();
                if !cfg.resample {
                    fixed = Some((eta.clone(), t.clone()));
                }
                (eta, t)
            }
        };
        let mut perm: Vec<usize> = (0..n).collect();
        shuffle_rng.shuffle(&mut perm);
        let mut epoch_loss = 0.0f64;
        let mut epoch_rows = 0usize;
        for chunk in perm.chunks(cfg.batch_size) {
            let b = chunk.len();
            let active: Vec<usize> = match &mode {
                EnsembleMode::Exact { .. } => (0..m).collect(),
                EnsembleMode::Trunk { .. } => {
                    head_rng.sample_indices(m, ecfg.heads_per_batch.min(m))
                }
            };
            let s_count = active.len();
            let xb = x.select_rows(chunk);
            let (r, r_cache) = r_net.forward(&xb)?;
            // Per-observation interpolated scalar state and target per head.
            let coeffs: Vec<_> = chunk
                .iter()
                .map(|&i| sched.eval(t[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut loss = 0.0f64;
            let mut grad_r = Matrix::zeros(b, d);
            let row_scale = R::of(2.0 / (b * s_count) as f64);

            match &mut mode {
                EnsembleMode::Trunk { g_net, embeddings } => {
                    let rows = b * s_count;
                    let mut input = Matrix::zeros(rows, d + 2 + p);
                    let mut target = vec![R::zero(); rows];
                    for (a, &i) in chunk.iter().enumerate() {
                        let c = &coeffs[a];
                        for (s, &l) in active.iter().enumerate() {
                            let k = a * s_count + s;
                            let row = input.row_mut(k);
                            row[..d].copy_from_slice(r.row(a));
                            row[d] = c.alpha * eta[i] + c.beta * feats[(i, l)];
                            row[d + 1] = t[i];
                            row[d + 2..].copy_from_slice(embeddings.row(l));
                            target[k] = c.dalpha * eta[i] + c.dbeta * feats[(i, l)];
                        }
                    }
                    let (out, g_cache) = g_net.forward(&input)?;
                    if !out.is_finite() {
                        return Err(Error::NonFinite { what: "trunk output".into() });
                    }
                    let mut grad_out = Matrix::zeros(rows, 1);
                    for k in 0..rows {
                        let diff = out[(k, 0)] - target[k];
                        loss += diff.as_f64() * diff.as_f64();
                        grad_out[(k, 0)] = row_scale * diff;
                    }
                    loss /= (b * s_count) as f64;
                    let (g_grads, grad_input) = g_net.backward(&g_cache, &grad_out)?;
                    let mut grad_embed = vec![R::zero(); m * p];
                    for (a, _) in chunk.iter().enumerate() {
                        for (s, &l) in active.iter().enumerate() {
                            let gi = grad_input.row(a * s_count + s);
                            for (j, v) in gi[..d].iter().enumerate() {
                                grad_r[(a, j)] += *v;
                            }
                            for (j, v) in gi[d + 2..].iter().enumerate() {
                                grad_embed[l * p + j] += *v;
                            }
                        }
                    }
                    adam_step(g_net, &g_grads, &mut head_states[0])?;
                    adam_step_flat(embeddings.data_mut(), &grad_embed, &mut embed_state)?;
                }
                EnsembleMode::Exact { heads } => {
                    for (s, &l) in active.iter().enumerate() {
                        let mut state = Matrix::zeros(b, 1);
                        let mut target = vec![R::zero(); b];
                        for (a, &i) in chunk.iter().enumerate() {
                            let c = &coeffs[a];
                            state[(a, 0)] = c.alpha * eta[i] + c.beta * feats[(i, l)];
                            target[a] = c.dalpha * eta[i] + c.dbeta * feats[(i, l)];
                        }
                        let input = g_input(&r, &state, |a| t[chunk[a]]);
                        let (out, g_cache) = heads[l].forward(&input)?;
                        if !out.is_finite() {
                            return Err(Error::NonFinite { what: format!("head {l} output") });
                        }
                        let mut grad_out = Matrix::zeros(b, 1);
                        for a in 0..b {
                            let diff = out[(a, 0)] - target[a];
                            loss += diff.as_f64() * diff.as_f64();
                            grad_out[(a, 0)] = row_scale * diff;
                        }
                        let (g_grads, grad_input) = heads[l].backward(&g_cache, &grad_out)?;
                        for a in 0..b {
                            for (j, v) in grad_input.row(a)[..d].iter().enumerate() {
                                grad_r[(a, j)] += *v;
                            }
                        }
                        adam_step(&mut heads[l], &g_grads, &mut head_states[s])?;
                    }
                    loss /= (b * s_count) as f64;
                }
            }

            let (r_grads, _) = r_net.backward(&r_cache, &grad_r)?;
            adam_step(&mut r_net, &r_grads, &mut r_state)?;
            epoch_loss += loss * (b * s_count) as f64;
            epoch_rows += b * s_count;
        }
        epoch_loss /= epoch_rows as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch, trace });
        }
        trace.push(epoch_loss);
    }

    Ok((
        EnsembleModel {
            r_net,
            mode,
            spec,
            sched,
            tau,
            d_x,
            d,
        },
        trace,
    ))
}
