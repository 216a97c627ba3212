//! GRU sequence classifier.
//!
//! A single GRU layer reads one occupancy vector per slot; a dense head maps
//! each hidden state to five class logits and a softmax turns them into a
//! probability distribution over the jamming policies. The cell update is
//!
//! ```text
//! r_t = sigmoid(Wxr'x_t + Whr'h_{t-1} + br)
//! z_t = sigmoid(Wxz'x_t + Whz'h_{t-1} + bz)
//! hc_t = tanh(Wxh'x_t + Whh'(r_t * h_{t-1}) + bh)
//! h_t = z_t * h_{t-1} + (1 - z_t) * hc_t
//! ```
//!
//! with `*` elementwise, so a saturated update gate (`z = 1`) carries the
//! previous hidden state through unchanged.

mod backward;
mod checkpoint;
mod optimizer;
mod train;

pub use backward::backward_bptt;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use optimizer::{optimizer_step, AdamState, OptimizerKind, OptimizerState};
pub use train::train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::TestWindow;
use crate::error::{Error, Result};
use crate::sim::{PolicyKind, POLICY_COUNT};

/// Dense row-major matrix of learned weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect();
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// All learned weights and biases of the GRU cell and the dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    /// Input-to-gate weights, `input_dim x hidden_dim`.
    pub w_xr: Matrix,
    pub w_xz: Matrix,
    pub w_xh: Matrix,
    /// Hidden-to-gate weights, `hidden_dim x hidden_dim`.
    pub w_hr: Matrix,
    pub w_hz: Matrix,
    pub w_hh: Matrix,
    /// Gate biases, length `hidden_dim`.
    pub b_r: Vec<f64>,
    pub b_z: Vec<f64>,
    pub b_h: Vec<f64>,
    /// Head weights `hidden_dim x n_classes` and bias.
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl GruParams {
    /// Zero-valued parameters; also serves as the gradient container.
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        GruParams {
            input_dim,
            hidden_dim,
            n_classes: POLICY_COUNT,
            w_xr: Matrix::zeros(input_dim, hidden_dim),
            w_xz: Matrix::zeros(input_dim, hidden_dim),
            w_xh: Matrix::zeros(input_dim, hidden_dim),
            w_hr: Matrix::zeros(hidden_dim, hidden_dim),
            w_hz: Matrix::zeros(hidden_dim, hidden_dim),
            w_hh: Matrix::zeros(hidden_dim, hidden_dim),
            b_r: vec![0.0; hidden_dim],
            b_z: vec![0.0; hidden_dim],
            b_h: vec![0.0; hidden_dim],
            w_out: Matrix::zeros(hidden_dim, POLICY_COUNT),
            b_out: vec![0.0; POLICY_COUNT],
        }
    }

    /// Weights drawn uniformly from `[-scale, scale]`, biases zero.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        GruParams {
            input_dim,
            hidden_dim,
            n_classes: POLICY_COUNT,
            w_xr: Matrix::uniform(input_dim, hidden_dim, scale, rng),
            w_xz: Matrix::uniform(input_dim, hidden_dim, scale, rng),
            w_xh: Matrix::uniform(input_dim, hidden_dim, scale, rng),
            w_hr: Matrix::uniform(hidden_dim, hidden_dim, scale, rng),
            w_hz: Matrix::uniform(hidden_dim, hidden_dim, scale, rng),
            w_hh: Matrix::uniform(hidden_dim, hidden_dim, scale, rng),
            b_r: vec![0.0; hidden_dim],
            b_z: vec![0.0; hidden_dim],
            b_h: vec![0.0; hidden_dim],
            w_out: Matrix::uniform(hidden_dim, POLICY_COUNT, scale, rng),
            b_out: vec![0.0; POLICY_COUNT],
        }
    }

    pub fn zeros_like(&self) -> Self {
        GruParams::zeros(self.input_dim, self.hidden_dim)
    }

    /// Tensors in the fixed serialization order: `w_xr, w_xz, w_xh, w_hr,
    /// w_hz, w_hh, b_r, b_z, b_h, w_out, b_out`.
    pub fn tensors(&self) -> [&[f64]; 11] {
        [
            &self.w_xr.data,
            &self.w_xz.data,
            &self.w_xh.data,
            &self.w_hr.data,
            &self.w_hz.data,
            &self.w_hh.data,
            &self.b_r,
            &self.b_z,
            &self.b_h,
            &self.w_out.data,
            &self.b_out,
        ]
    }

    /// Mutable tensor views in the same fixed order as [`Self::tensors`].
    pub fn tensors_mut(&mut self) -> [&mut [f64]; 11] {
        let GruParams {
            w_xr, w_xz, w_xh, w_hr, w_hz, w_hh, b_r, b_z, b_h, w_out, b_out, ..
        } = self;
        [
            &mut w_xr.data,
            &mut w_xz.data,
            &mut w_xh.data,
            &mut w_hr.data,
            &mut w_hz.data,
            &mut w_hh.data,
            b_r,
            b_z,
            b_h,
            &mut w_out.data,
            b_out,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &GruParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for tensor in self.tensors_mut() {
            for v in tensor.iter_mut() {
                *v *= factor;
            }
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.n_classes);
        let expect = [
            (self.w_xr.rows, self.w_xr.cols, d, h, "w_xr"),
            (self.w_xz.rows, self.w_xz.cols, d, h, "w_xz"),
            (self.w_xh.rows, self.w_xh.cols, d, h, "w_xh"),
            (self.w_hr.rows, self.w_hr.cols, h, h, "w_hr"),
            (self.w_hz.rows, self.w_hz.cols, h, h, "w_hz"),
            (self.w_hh.rows, self.w_hh.cols, h, h, "w_hh"),
            (self.w_out.rows, self.w_out.cols, h, c, "w_out"),
        ];
        for (rows, cols, want_rows, want_cols, name) in expect {
            if rows != want_rows || cols != want_cols {
                return Err(Error::Dimension(format!(
                    "{name} is {rows}x{cols}, expected {want_rows}x{want_cols}"
                )));
            }
        }
        if self.b_r.len() != h || self.b_z.len() != h || self.b_h.len() != h {
            return Err(Error::Dimension("gate bias length mismatch".into()));
        }
        if self.b_out.len() != c {
            return Err(Error::Dimension("head bias length mismatch".into()));
        }
        Ok(())
    }
}

/// Cached activations of one recurrent step, kept for backpropagation.
///
/// `logits` and `probs` are filled once the dense head has run (see
/// [`forward_sequence`]); a bare [`gru_cell_forward`] leaves them empty.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStepTrace {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub h_cand: Vec<f64>,
    pub h: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl GruStepTrace {
    pub fn distribution(&self) -> PolicyDistribution {
        let mut probs = [0.0; POLICY_COUNT];
        probs.copy_from_slice(&self.probs);
        PolicyDistribution { probs }
    }
}

/// A probability distribution over the five jamming policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyDistribution {
    pub probs: [f64; POLICY_COUNT],
}

impl PolicyDistribution {
    /// Most probable policy; ties break toward the lowest class code.
    pub fn argmax(&self) -> PolicyKind {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        PolicyKind::ALL[best]
    }
}

/// Network hyperparameters; everything the training loop needs besides data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// Chunks per gradient step.
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    /// Half-width of the uniform weight init; defaults to `1/sqrt(hidden_dim)`.
    pub init_scale: Option<f64>,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hidden_dim: 64,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            optimizer: OptimizerKind::Adam,
            init_scale: None,
            seed: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0) {
                return Err(Error::InvalidConfig("init_scale must be positive".into()));
            }
        }
        Ok(())
    }

    /// Effective init half-width.
    pub fn effective_init_scale(&self) -> f64 {
        self.init_scale.unwrap_or(1.0 / (self.hidden_dim as f64).sqrt())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out = b + x'Wx + h'Wh`, accumulating over the rows of both matrices.
fn affine(x: &[f64], wx: &Matrix, h: &[f64], wh: &Matrix, b: &[f64]) -> Vec<f64> {
    let mut out = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        // Occupancy inputs are mostly zeros; skipping them is exact.
        if xi == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(wx.row(i)) {
            *o += xi * w;
        }
    }
    for (k, &hk) in h.iter().enumerate() {
        if hk == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(wh.row(k)) {
            *o += hk * w;
        }
    }
    out
}

/// One GRU cell step. Head outputs (`logits`, `probs`) are left empty.
pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], params: &GruParams) -> Result<GruStepTrace> {
    params.check_shapes()?;
    if x.len() != params.input_dim {
        return Err(Error::Dimension(format!(
            "input has length {}, expected {}",
            x.len(),
            params.input_dim
        )));
    }
    if h_prev.len() != params.hidden_dim {
        return Err(Error::Dimension(format!(
            "hidden state has length {}, expected {}",
            h_prev.len(),
            params.hidden_dim
        )));
    }
    if x.iter().chain(h_prev).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite input to GRU cell".into()));
    }

    let mut r = affine(x, &params.w_xr, h_prev, &params.w_hr, &params.b_r);
    for v in r.iter_mut() {
        *v = sigmoid(*v);
    }
    let mut z = affine(x, &params.w_xz, h_prev, &params.w_hz, &params.b_z);
    for v in z.iter_mut() {
        *v = sigmoid(*v);
    }
    let gated: Vec<f64> = r.iter().zip(h_prev).map(|(&rk, &hk)| rk * hk).collect();
    let mut h_cand = affine(x, &params.w_xh, &gated, &params.w_hh, &params.b_h);
    for v in h_cand.iter_mut() {
        *v = v.tanh();
    }
    let h: Vec<f64> = z
        .iter()
        .zip(h_prev)
        .zip(&h_cand)
        .map(|((&zj, &hj), &cj)| zj * hj + (1.0 - zj) * cj)
        .collect();

    Ok(GruStepTrace {
        x: x.to_vec(),
        r,
        z,
        h_cand,
        h,
        logits: Vec::new(),
        probs: Vec::new(),
    })
}

/// Numerically safe softmax (max-logit subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Run the cell and head over a whole sequence from a zero hidden state.
///
/// Returns the per-step class distributions and the cached step traces
/// needed by [`backward_bptt`].
pub fn forward_sequence(
    inputs: &[Vec<f64>],
    params: &GruParams,
) -> Result<(Vec<PolicyDistribution>, Vec<GruStepTrace>)> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("empty input sequence".into()));
    }
    let mut traces: Vec<GruStepTrace> = Vec::with_capacity(inputs.len());
    let mut distributions = Vec::with_capacity(inputs.len());
    let h0 = vec![0.0; params.hidden_dim];
    for (step, x) in inputs.iter().enumerate() {
        let h_prev = if step == 0 { &h0 } else { &traces[step - 1].h };
        let mut trace = gru_cell_forward(x, h_prev, params)?;
        let mut logits = params.b_out.clone();
        for (k, &hk) in trace.h.iter().enumerate() {
            for (l, &w) in logits.iter_mut().zip(params.w_out.row(k)) {
                *l += hk * w;
            }
        }
        trace.probs = softmax(&logits);
        trace.logits = logits;
        distributions.push(trace.distribution());
        traces.push(trace);
    }
    Ok((distributions, traces))
}

/// Probability floor applied before taking logs in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean over steps of the negative log probability assigned to the target.
pub fn cross_entropy(predictions: &[PolicyDistribution], targets: &[u8]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("empty prediction sequence".into()));
    }
    let mut total = 0.0;
    for (dist, &target) in predictions.iter().zip(targets) {
        if target as usize >= POLICY_COUNT {
            return Err(Error::InvalidArgument(format!(
                "target {target} out of range 0..=4"
            )));
        }
        total -= dist.probs[target as usize].max(PROB_FLOOR).ln();
    }
    Ok(total / predictions.len() as f64)
}

/// Classify the policy active at the last slot of a test window: run the
/// network over the window from a zero hidden state and take the argmax of
/// the final step's distribution.
pub fn predict_policy(window: &TestWindow, params: &GruParams) -> Result<PolicyKind> {
    let (distributions, _) = forward_sequence(&window.inputs, params)?;
    Ok(distributions.last().expect("sequence is non-empty").argmax())
}
