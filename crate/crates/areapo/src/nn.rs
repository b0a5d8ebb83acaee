//! Dense-network toolkit: ReLU MLPs with analytic backprop, a diagonal
//! Gaussian policy head with one learnable log-std, a two-headed critic, and
//! an adaptive-moment optimizer over a flat parameter vector.
//!
//! Weights are stored `[in, out]` so a batched forward is `x.dot(&w) + b`.
//! Everything is f64; the nets are small enough that precision beats speed
//! and gradient checks stay sharp.

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

// ---------------------------------------------------------------------------
// Orthogonal initialization
// ---------------------------------------------------------------------------

/// Gain-scaled orthogonal matrix of shape `[rows, cols]`: orthonormal columns
/// when `rows ≥ cols`, orthonormal rows otherwise. Deterministic given the
/// RNG state (QR sign ambiguity fixed from R's diagonal).
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, m) = (rows.max(cols), rows.min(cols));
    let a = nalgebra::DMatrix::<f64>::from_fn(n, m, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let mut out = Array2::<f64>::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            out[(i, j)] = gain * v;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `[in, out]`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Fully-connected net, ReLU on hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Activations retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `acts[0]` is the input; `acts[l]` the post-ReLU output of hidden
    /// layer `l`.
    acts: Vec<Array2<f64>>,
    /// Pre-activations of hidden layers (ReLU masks for backward).
    pre: Vec<Array2<f64>>,
}

/// Same shapes as the network's parameters.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer { w: Array2::zeros(l.w.raw_dim()), b: Array1::zeros(l.b.raw_dim()) })
                .collect(),
        }
    }
}

impl Mlp {
    /// Builds `sizes[0] → … → sizes[last]` with orthogonal init: gain √2 on
    /// hidden layers, `out_gain` on the output layer, zero biases.
    pub fn new(sizes: &[usize], out_gain: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidInput(format!("bad layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, pair)| {
                let gain = if l == last { out_gain } else { std::f64::consts::SQRT_2 };
                Layer {
                    w: orthogonal(pair[0], pair[1], gain, rng),
                    b: Array1::zeros(pair[1]),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].w.ncols()
    }

    /// Batched forward: `x` is `[batch, input_dim]`.
    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "input width {} does not match first layer {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let n_hidden = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(n_hidden);
        acts.push(x.clone());
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w);
            z += &layer.b;
            if l < n_hidden {
                pre.push(z.clone());
                z.mapv_inplace(|v| v.max(0.0));
                acts.push(z.clone());
                h = z;
            } else {
                h = z;
            }
        }
        Ok((h, MlpCache { acts, pre }))
    }

    /// Single-row convenience forward without keeping the cache.
    pub fn forward_single(&self, x: &[f64]) -> Result<Vec<f64>> {
        let arr = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let (out, _) = self.forward(&arr)?;
        Ok(out.row(0).to_vec())
    }

    /// Reverse-mode gradients for the batch that produced `cache`.
    /// Returns parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, dout: &Array2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        if cache.acts.len() != self.layers.len() || cache.pre.len() != self.layers.len() - 1 {
            return Err(Error::InvalidInput(
                "activation cache does not match this network".into(),
            ));
        }
        let batch = cache.acts[0].nrows();
        if dout.nrows() != batch || dout.ncols() != self.output_dim() {
            return Err(Error::InvalidInput(format!(
                "output gradient shape {:?} does not match batch {batch} x {}",
                dout.shape(),
                self.output_dim()
            )));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = dout.clone();
        for l in (0..self.layers.len()).rev() {
            grads.layers[l].w = cache.acts[l].t().dot(&delta);
            grads.layers[l].b = delta.sum_axis(Axis(0));
            let back = delta.dot(&self.layers[l].w.t());
            if l > 0 {
                delta = back * cache.pre[l - 1].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            } else {
                delta = back;
            }
        }
        Ok((grads, delta))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Serializes parameters into `dst` in layer order (weights row-major,
    /// then biases). Returns the number written.
    pub fn write_params(&self, dst: &mut [f64]) -> usize {
        let mut k = 0;
        for l in &self.layers {
            for &v in l.w.iter() {
                dst[k] = v;
                k += 1;
            }
            for &v in l.b.iter() {
                dst[k] = v;
                k += 1;
            }
        }
        k
    }

    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut() {
                *v = src[k];
                k += 1;
            }
            for v in l.b.iter_mut() {
                *v = src[k];
                k += 1;
            }
        }
        k
    }
}

impl MlpGrads {
    pub fn write_params(&self, dst: &mut [f64]) -> usize {
        let mut k = 0;
        for l in &self.layers {
            for &v in l.w.iter() {
                dst[k] = v;
                k += 1;
            }
            for &v in l.b.iter() {
                dst[k] = v;
                k += 1;
            }
        }
        k
    }
}

// ---------------------------------------------------------------------------
// Gaussian policy
// ---------------------------------------------------------------------------

/// One action drawn from the policy. `pre_clamp` is the raw Gaussian draw
/// whose density `log_prob` reports; the executed `action` is its clamp to
/// [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub action: f64,
    pub pre_clamp: f64,
    pub log_prob: f64,
}

/// Scalar-action Gaussian policy: an MLP mean plus a single state-independent
/// learnable log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: f64,
}

impl GaussianPolicy {
    pub fn new(obs_dim: usize, hidden: &[usize], log_std_init: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Self {
            mean_net: Mlp::new(&sizes, 0.01, rng)?,
            log_std: log_std_init,
        })
    }

    /// Gaussian log-density of the pre-clamp value `u` under mean `m`.
    pub fn log_density(m: f64, log_std: f64, u: f64) -> f64 {
        let z = (u - m) / log_std.exp();
        -0.5 * z * z - log_std - HALF_LN_2PI
    }

    /// Batched means for a `[batch, obs_dim]` input, with cache for backward.
    pub fn mean_batch(&self, obs: &Array2<f64>) -> Result<(Array1<f64>, MlpCache)> {
        let (out, cache) = self.mean_net.forward(obs)?;
        Ok((out.column(0).to_owned(), cache))
    }

    /// Samples one action per row of `obs`, consuming one standard-normal
    /// draw per row in order.
    pub fn act_batch(&self, obs: &Array2<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<SampledAction>> {
        let (means, _) = self.mean_batch(obs)?;
        let sigma = self.log_std.exp();
        Ok(means
            .iter()
            .map(|&m| {
                let n: f64 = StandardNormal.sample(rng);
                let u = m + sigma * n;
                SampledAction {
                    action: u.clamp(-1.0, 1.0),
                    pre_clamp: u,
                    log_prob: Self::log_density(m, self.log_std, u),
                }
            })
            .collect())
    }

    /// Deterministic controller output: the clamped mean.
    pub fn mean_action(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.mean_net.forward_single(obs)?[0].clamp(-1.0, 1.0))
    }

    /// Log-densities of stored pre-clamp actions under the current
    /// parameters, plus everything backward_log_prob needs.
    pub fn log_prob_batch(
        &self,
        obs: &Array2<f64>,
        pre_clamp: &Array1<f64>,
    ) -> Result<(Array1<f64>, Array1<f64>, MlpCache)> {
        if pre_clamp.len() != obs.nrows() {
            return Err(Error::InvalidInput("action batch length mismatch".into()));
        }
        let (means, cache) = self.mean_batch(obs)?;
        let lp = Array1::from_iter(
            means
                .iter()
                .zip(pre_clamp.iter())
                .map(|(&m, &u)| Self::log_density(m, self.log_std, u)),
        );
        Ok((lp, means, cache))
    }

    /// Backpropagates `d loss / d log_prob` (one entry per row) into mean-net
    /// gradients and the log-std gradient:
    /// `∂lp/∂m = (u−m)/σ²`, `∂lp/∂log_std = z² − 1`.
    pub fn backward_log_prob(
        &self,
        cache: &MlpCache,
        means: &Array1<f64>,
        pre_clamp: &Array1<f64>,
        dlp: &Array1<f64>,
    ) -> Result<(MlpGrads, f64)> {
        let sigma = self.log_std.exp();
        let mut dmean = Array2::<f64>::zeros((means.len(), 1));
        let mut dlog_std = 0.0;
        for i in 0..means.len() {
            let z = (pre_clamp[i] - means[i]) / sigma;
            dmean[(i, 0)] = dlp[i] * z / sigma;
            dlog_std += dlp[i] * (z * z - 1.0);
        }
        let (grads, _) = self.mean_net.backward(cache, &dmean)?;
        Ok((grads, dlog_std))
    }

    /// Analytic differential entropy: `½ln(2πe) + log_std`.
    pub fn entropy(&self) -> f64 {
        HALF_LN_2PI + 0.5 + self.log_std
    }

    pub fn param_count(&self) -> usize {
        self.mean_net.param_count() + 1
    }

    /// Mean-net parameters followed by log_std.
    pub fn write_params(&self, dst: &mut [f64]) -> usize {
        let k = self.mean_net.write_params(dst);
        dst[k] = self.log_std;
        k + 1
    }

    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let k = self.mean_net.read_params(src);
        self.log_std = src[k];
        k + 1
    }
}

// ---------------------------------------------------------------------------
// Two-headed critic
// ---------------------------------------------------------------------------

/// Shared-trunk critic with two outputs: head 0 predicts the reward bias
/// value, head 1 the entropy bias value.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub net: Mlp,
}

impl Critic {
    pub fn new(obs_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        Ok(Self { net: Mlp::new(&sizes, 1.0, rng)? })
    }

    /// `[batch, 2]` of (reward value, entropy value).
    pub fn values_batch(&self, obs: &Array2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        self.net.forward(obs)
    }

    pub fn value_single(&self, obs: &[f64]) -> Result<[f64; 2]> {
        let v = self.net.forward_single(obs)?;
        Ok([v[0], v[1]])
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn write_params(&self, dst: &mut [f64]) -> usize {
        self.net.write_params(dst)
    }

    pub fn read_params(&mut self, src: &[f64]) -> usize {
        self.net.read_params(src)
    }
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// What one optimizer step saw and did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Scale factor applied to the gradient (1.0 when under the cap).
    pub clip_scale: f64,
}

/// Adaptive-moment estimation over one flat parameter vector, with global
/// gradient-norm clipping applied before the moment update.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// Applies one update in place. Non-finite gradients abort with the
    /// parameters (and moments) untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], max_grad_norm: f64) -> Result<StepReport> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::InvalidInput(format!(
                "optimizer sized for {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let mut sq = 0.0;
        for &g in grads {
            if !g.is_finite() {
                return Err(Error::Numerical(
                    "non-finite gradient; update aborted, parameters untouched".into(),
                ));
            }
            sq += g * g;
        }
        let grad_norm = sq.sqrt();
        let clip_scale = if grad_norm > max_grad_norm && grad_norm > 0.0 {
            max_grad_norm / grad_norm
        } else {
            1.0
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i] * clip_scale;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(StepReport { grad_norm, clip_scale })
    }
}
