//! One-hidden-layer network for the natural parameters.
//!
//! `x ↦ (o₁, o₂)` through `H` hidden units, with `η₁ = o₁` and
//! `η₂ = −½ exp(o₂)`. Trained full-batch with Adam on the mean negative
//! log-likelihood and hand-written backpropagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use bytemuck::cast;
use wide::{f64x8, u64x8};

use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::fit::{FittedLSNM, Predictor};
use crate::model::{NaturalParams, LOG_NORM_CONST};

/// `o₂` is clamped to this range before the exponential link.
pub const LOG_PRECISION_CLAMP: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Cosine,
    Constant,
}

/// Which outputs are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MlpHead {
    /// Both `η₁(x)` and `η₂(x)` depend on `x`.
    #[default]
    Heteroscedastic,
    /// `o₂` is a single trained constant: a fixed-variance (additive-noise) model.
    Homoscedastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_width: usize,
    pub activation: Activation,
    pub steps: usize,
    pub lr_init: f64,
    pub lr_final: f64,
    pub schedule: Schedule,
    pub seed: u64,
    /// Rescale the gradient to at most this Euclidean norm. Off by default.
    pub grad_clip: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_width: 100,
            activation: Activation::Tanh,
            steps: 5000,
            lr_init: 1e-2,
            lr_final: 1e-6,
            schedule: Schedule::Cosine,
            seed: 0,
            grad_clip: None,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.lr_final > 0.0 && self.lr_final <= self.lr_init && self.lr_init.is_finite()) {
            return Err(Error::Config(format!(
                "learning rates must satisfy 0 < lr_final <= lr_init (got {} and {})",
                self.lr_final, self.lr_init
            )));
        }
        Ok(())
    }

    /// Learning rate used at step `t` (0-based).
    pub fn learning_rate(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr_init,
            Schedule::Cosine => {
                let frac = t as f64 / self.steps as f64;
                self.lr_final + 0.5 * (self.lr_init - self.lr_final) * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

/// Weights of the `1 → H → 2` network.
///
/// Layout of `values`: input weights (H), hidden biases (H), output weights
/// for `o₁` (H), output weights for `o₂` (H), then the two output biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub activation: Activation,
    pub values: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(hidden: usize, activation: Activation) -> Self {
        Self { hidden, activation, values: vec![0.0; 4 * hidden + 2] }
    }

    /// Uniform `±1/√fan_in` for every weight and bias.
    pub fn init(hidden: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(hidden, activation);
        let out_bound = 1.0 / (hidden as f64).sqrt();
        let h = hidden;
        for (k, v) in p.values.iter_mut().enumerate() {
            let bound = if k < 2 * h { 1.0 } else { out_bound };
            *v = rng.random_range(-bound..bound);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn w_in(&self) -> &[f64] {
        &self.values[..self.hidden]
    }
    pub fn b_in(&self) -> &[f64] {
        &self.values[self.hidden..2 * self.hidden]
    }
    pub fn v1(&self) -> &[f64] {
        &self.values[2 * self.hidden..3 * self.hidden]
    }
    pub fn v2(&self) -> &[f64] {
        &self.values[3 * self.hidden..4 * self.hidden]
    }
    pub fn c1(&self) -> f64 {
        self.values[4 * self.hidden]
    }
    pub fn c2(&self) -> f64 {
        self.values[4 * self.hidden + 1]
    }

    pub fn v2_mut(&mut self) -> &mut [f64] {
        &mut self.values[3 * self.hidden..4 * self.hidden]
    }
    pub fn c1_mut(&mut self) -> &mut f64 {
        &mut self.values[4 * self.hidden]
    }
    pub fn c2_mut(&mut self) -> &mut f64 {
        &mut self.values[4 * self.hidden + 1]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

const SIGN_MASK: f64 = -0.0;
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// `eˣ` for `x ≤ 0`.
#[inline(always)]
fn exp_nonpositive(x: f64x8) -> f64x8 {
    let c = f64x8::splat;
    let x = x.max(c(-700.0));
    let kd = x.mul_add(c(std::f64::consts::LOG2_E), c(ROUND_MAGIC));
    let k = kd - c(ROUND_MAGIC);
    let r = k.mul_neg_add(c(2.319_046_813_846_299_6e-17), k.mul_neg_add(c(std::f64::consts::LN_2), x));
    // Taylor terms up to r¹³, grouped for a short dependency chain.
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let pair = |hi: f64, lo: f64| r.mul_add(c(hi), c(lo));
    let p01 = pair(1.0, 1.0);
    let p23 = pair(1.0 / 6.0, 0.5);
    let p45 = pair(1.0 / 120.0, 1.0 / 24.0);
    let p67 = pair(1.0 / 5_040.0, 1.0 / 720.0);
    let p89 = pair(1.0 / 362_880.0, 1.0 / 40_320.0);
    let p1011 = pair(1.0 / 39_916_800.0, 1.0 / 3_628_800.0);
    let p1213 = pair(1.0 / 6_227_020_800.0, 1.0 / 479_001_600.0);
    let lo = r4.mul_add(r2.mul_add(p67, p45), r2.mul_add(p23, p01));
    let hi = r4.mul_add(p1213, r2.mul_add(p1011, p89));
    let p = r8.mul_add(hi, lo);
    let bits: u64x8 = cast(kd);
    let scale = (bits - u64x8::splat(ROUND_MAGIC.to_bits()) + u64x8::splat(1023)) << 52;
    p * cast::<u64x8, f64x8>(scale)
}

/// `tanh` from `exp(−2|z|)`.
#[inline(always)]
fn tanh4(z: f64x8) -> f64x8 {
    let e = exp_nonpositive(z.abs() * f64x8::splat(-2.0));
    let r = (f64x8::ONE - e) / (f64x8::ONE + e);
    r | (z & f64x8::splat(SIGN_MASK))
}

#[cfg(test)]
fn tanh_fast(z: f64) -> f64 {
    tanh4(f64x8::splat(z)).to_array()[0]
}

#[inline(always)]
fn relu4(z: f64x8) -> f64x8 {
    z.max(f64x8::ZERO)
}

/// Buffers for one batch, padded to a multiple of eight points. Padding
/// points sit at `x = 0` and receive zero output gradients.
struct Workspace {
    t: usize,
    stride: usize,
    x: Vec<f64>,
    /// Hidden activations, hidden-major with row length `stride`.
    hidden: Vec<f64>,
    o1: Vec<f64>,
    o2: Vec<f64>,
}

impl Workspace {
    fn new(hidden: usize, x: &[f64]) -> Self {
        let t = x.len();
        let stride = t.div_ceil(8) * 8;
        let mut xp = vec![0.0; stride];
        xp[..t].copy_from_slice(x);
        Self { t, stride, x: xp, hidden: vec![0.0; hidden * stride], o1: vec![0.0; stride], o2: vec![0.0; stride] }
    }
}

fn lanes(s: &[f64]) -> impl Iterator<Item = f64x8> + '_ {
    s.chunks_exact(8).map(|c| f64x8::from(<[f64; 8]>::try_from(c).expect("eight lanes")))
}

/// Hidden activations and the two raw outputs for every input.
fn forward_raw(params: &MlpParams, ws: &mut Workspace) {
    match params.activation {
        Activation::Tanh => forward_with(params, ws, tanh4),
        Activation::Relu => forward_with(params, ws, relu4),
    }
}

#[inline(always)]
fn forward_with(params: &MlpParams, ws: &mut Workspace, act: impl Fn(f64x8) -> f64x8) {
    let n = ws.stride;
    ws.o1.fill(params.c1());
    ws.o2.fill(params.c2());
    let (w_in, b_in, v1, v2) = (params.w_in(), params.b_in(), params.v1(), params.v2());
    for j in 0..params.hidden {
        let row = &mut ws.hidden[j * n..(j + 1) * n];
        let (a, b) = (f64x8::splat(w_in[j]), f64x8::splat(b_in[j]));
        let (c1, c2) = (f64x8::splat(v1[j]), f64x8::splat(v2[j]));
        let outs = row.chunks_exact_mut(8).zip(ws.o1.chunks_exact_mut(8)).zip(ws.o2.chunks_exact_mut(8));
        for (xv, ((h, p1), p2)) in lanes(&ws.x).zip(outs) {
            let hv = act(a.mul_add(xv, b));
            h.copy_from_slice(hv.as_array());
            let q1 = hv.mul_add(c1, f64x8::from(<[f64; 8]>::try_from(&*p1).expect("eight lanes")));
            let q2 = hv.mul_add(c2, f64x8::from(<[f64; 8]>::try_from(&*p2).expect("eight lanes")));
            p1.copy_from_slice(q1.as_array());
            p2.copy_from_slice(q2.as_array());
        }
    }
}

/// Natural parameters predicted at each input.
pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Vec<NaturalParams> {
    let mut ws = Workspace::new(params.hidden, x);
    forward_raw(params, &mut ws);
    ws.o1[..ws.t]
        .iter()
        .zip(&ws.o2)
        .map(|(&a, &b)| {
            let e = b.clamp(-LOG_PRECISION_CLAMP, LOG_PRECISION_CLAMP).exp();
            NaturalParams::new(a, -0.5 * e).expect("exponential link keeps eta2 negative")
        })
        .collect()
}

/// Mean NLL and its gradient, written into `grad`.
fn loss_and_grad(params: &MlpParams, y: &[f64], ws: &mut Workspace, grad: &mut [f64]) -> f64 {
    let t = ws.t;
    let h = params.hidden;
    let inv_t = 1.0 / t as f64;
    forward_raw(params, ws);

    // Per-point loss, then overwrite the outputs with dLoss/do.
    let mut nll = 0.0;
    let (mut g_c1, mut g_c2) = (0.0, 0.0);
    for i in 0..t {
        let (a, raw, yi) = (ws.o1[i], ws.o2[i], y[i]);
        let b = raw.clamp(-LOG_PRECISION_CLAMP, LOG_PRECISION_CLAMP);
        let e = b.exp();
        nll -= LOG_NORM_CONST + a * yi - 0.5 * e * yi * yi - a * a / (2.0 * e) + 0.5 * b;
        let d1 = -(yi - a / e) * inv_t;
        let d2 = if raw.abs() > LOG_PRECISION_CLAMP { 0.0 } else { -(-0.5 * e * yi * yi + a * a / (2.0 * e) + 0.5) * inv_t };
        ws.o1[i] = d1;
        ws.o2[i] = d2;
        g_c1 += d1;
        g_c2 += d2;
    }
    ws.o1[t..].fill(0.0);
    ws.o2[t..].fill(0.0);

    let (w_gin, rest) = grad.split_at_mut(h);
    let (g_bin, rest) = rest.split_at_mut(h);
    let (g_v1, rest) = rest.split_at_mut(h);
    let (g_v2, g_c) = rest.split_at_mut(h);
    let hidden_grads = HiddenGrads { w_in: w_gin, b_in: g_bin, v1: g_v1, v2: g_v2 };
    match params.activation {
        Activation::Tanh => backward_with(params, ws, hidden_grads, |a| a.mul_neg_add(a, f64x8::ONE)),
        Activation::Relu => backward_with(params, ws, hidden_grads, |a| a.simd_gt(f64x8::ZERO) & f64x8::ONE),
    }
    g_c[0] = g_c1;
    g_c[1] = g_c2;
    nll * inv_t
}

struct HiddenGrads<'a> {
    w_in: &'a mut [f64],
    b_in: &'a mut [f64],
    v1: &'a mut [f64],
    v2: &'a mut [f64],
}

/// Accumulates the hidden-layer gradients from `dLoss/do` stored in `ws.o1`, `ws.o2`.
#[inline(always)]
fn backward_with(params: &MlpParams, ws: &Workspace, g: HiddenGrads<'_>, slope: impl Fn(f64x8) -> f64x8) {
    let n = ws.stride;
    let (v1, v2) = (params.v1(), params.v2());
    for j in 0..params.hidden {
        let row = &ws.hidden[j * n..(j + 1) * n];
        let (c1, c2) = (f64x8::splat(v1[j]), f64x8::splat(v2[j]));
        // Alternating accumulator pairs hide the add latency.
        let mut acc = [f64x8::ZERO; 8];
        let points = lanes(row).zip(lanes(&ws.o1)).zip(lanes(&ws.o2)).zip(lanes(&ws.x));
        for ((((h, d1), d2), xv), k) in points.zip(0..) {
            let u = k & 1;
            acc[u] = d1.mul_add(h, acc[u]);
            acc[2 + u] = d2.mul_add(h, acc[2 + u]);
            let dz = d1.mul_add(c1, d2 * c2) * slope(h);
            acc[4 + u] = dz.mul_add(xv, acc[4 + u]);
            acc[6 + u] += dz;
        }
        let sum = |k: usize| (acc[2 * k] + acc[2 * k + 1]).reduce_add();
        g.v1[j] = sum(0);
        g.v2[j] = sum(1);
        g.w_in[j] = sum(2);
        g.b_in[j] = sum(3);
    }
}

/// Mean negative log-likelihood and its gradient with respect to
/// `params.values`.
pub fn mlp_backward(params: &MlpParams, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let mut ws = Workspace::new(params.hidden, x);
    let mut grad = vec![0.0; params.len()];
    let loss = loss_and_grad(params, y, &mut ws, &mut grad);
    Ok((loss, grad))
}

/// Mean negative log-likelihood only.
pub fn mlp_loss(params: &MlpParams, x: &[f64], y: &[f64]) -> f64 {
    let nat = mlp_forward(params, x);
    -y.iter().zip(&nat).map(|(&y, p)| p.loglik(y)).sum::<f64>() / x.len() as f64
}

pub fn fit_mlp(pair: &SamplePair, cfg: &MlpConfig) -> Result<FittedLSNM> {
    fit_mlp_with_head(pair, cfg, MlpHead::Heteroscedastic)
}

/// Train from a seeded initialization. `objective_trace` holds the mean NLL
/// before each step followed by the value at the returned parameters.
pub fn fit_mlp_with_head(pair: &SamplePair, cfg: &MlpConfig, head: MlpHead) -> Result<FittedLSNM> {
    cfg.validate()?;
    if pair.is_empty() {
        return Err(Error::TooFewSamples { got: 0, required: 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = MlpParams::init(cfg.hidden_width, cfg.activation, &mut rng);
    if head == MlpHead::Homoscedastic {
        params.v2_mut().fill(0.0);
    }
    let n = params.len();
    let h = cfg.hidden_width;
    let mut ws = Workspace::new(h, &pair.x);
    let mut grad = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let (mut b1t, mut b2t) = (1.0, 1.0);

    for step in 0..cfg.steps {
        let loss = loss_and_grad(&params, &pair.y, &mut ws, &mut grad);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
        trace.push(loss);
        if head == MlpHead::Homoscedastic {
            grad[3 * h..4 * h].fill(0.0);
        }
        if let Some(limit) = cfg.grad_clip {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > limit {
                grad.iter_mut().for_each(|g| *g *= limit / norm);
            }
        }
        let lr = cfg.learning_rate(step);
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for k in 0..n {
            let g = grad[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[k] / (1.0 - b1t);
            let v_hat = v[k] / (1.0 - b2t);
            params.values[k] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        if !params.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
    }

    let natural = mlp_forward(&params, &pair.x);
    let fitted = FittedLSNM::from_natural(Predictor::Network { params }, &pair.y, &natural, true, cfg.steps, trace);
    let final_loss = -fitted.loglik.mean();
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: cfg.steps });
    }
    let mut fitted = fitted;
    fitted.objective_trace.push(final_loss);
    Ok(fitted)
}
