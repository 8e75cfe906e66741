//! The shallow CNN: two 3x3 valid convolutions (32 filters each, no pooling)
//! over the chroma channels, then two dense layers with dropout in between.
//!
//!   input (32,32,3) -> chroma (32,32,2) -> conv1+ReLU (30,30,32)
//!   -> conv2+ReLU (28,28,32) -> flatten 25088 -> dense1+ReLU 64
//!   -> dropout -> dense2 1 -> sigmoid
//!
//! A fifth of the first convolution's filters are seeded with the Laplacian
//! kernel so the net starts out sensitive to edges and resampling traces.

use std::fs;
use std::path::Path;

use crate::color::{rgb_to_crcb, ColorConstants, ColorSpace, ImageBuffer, BT601};
use crate::error::{Error, Result};
use crate::nn::{
    bce_grad, bce_loss, conv2d_valid, conv2d_valid_backward, dense, dense_backward,
    dropout_with_mask, relu, relu_backward, sigmoid_scalar, Mode,
};
use crate::rng::Pcg32;
use crate::tensor::Tensor;

pub const INPUT_SIZE: usize = 32;
pub const CONV_FILTERS: usize = 32;
pub const FLAT_LEN: usize = 28 * 28 * CONV_FILTERS; // 25088
pub const HIDDEN: usize = 64;

/// Per-layer trainable parameter counts (weights + biases).
pub const CONV1_PARAM_COUNT: usize = CONV_FILTERS * (3 * 3 * 2) + CONV_FILTERS; // 608
pub const CONV2_PARAM_COUNT: usize = CONV_FILTERS * (3 * 3 * CONV_FILTERS) + CONV_FILTERS; // 9248
pub const DENSE1_PARAM_COUNT: usize = FLAT_LEN * HIDDEN + HIDDEN; // 1605696
pub const DENSE2_PARAM_COUNT: usize = HIDDEN + 1; // 65

/// The 3x3 Laplacian kernel used to seed a fraction of conv1 filters.
pub const LAPLACIAN_KERNEL: [[f32; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

/// Training defaults. The learning rate is hot because the chroma inputs
/// live in [-0.5, 0.5] and are fed to Glorot-initialized layers without any
/// normalization stage; at 1e-3 the net cannot escape the class prior within
/// the 20-epoch budget.
pub const DEFAULT_LEARNING_RATE: f32 = 5e-2;
pub const DEFAULT_MOMENTUM: f32 = 0.9;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_MAX_EPOCHS: usize = 20;
pub const DEFAULT_DROPOUT_RATE: f32 = 0.3;
pub const DEFAULT_LAPLACIAN_FRACTION: f32 = 0.2;

/// All trainable tensors of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ScnnParams {
    pub conv1_w: Tensor, // (32, 3, 3, 2)
    pub conv1_b: Tensor, // (32)
    pub conv2_w: Tensor, // (32, 3, 3, 32)
    pub conv2_b: Tensor, // (32)
    pub dense1_w: Tensor, // (25088, 64)
    pub dense1_b: Tensor, // (64)
    pub dense2_w: Tensor, // (64, 1)
    pub dense2_b: Tensor, // (1)
}

impl ScnnParams {
    /// (name, tensor) pairs in serialization order.
    pub fn tensors(&self) -> [(&'static str, &Tensor); 8] {
        [
            ("conv1_w", &self.conv1_w),
            ("conv1_b", &self.conv1_b),
            ("conv2_w", &self.conv2_w),
            ("conv2_b", &self.conv2_b),
            ("dense1_w", &self.dense1_w),
            ("dense1_b", &self.dense1_b),
            ("dense2_w", &self.dense2_w),
            ("dense2_b", &self.dense2_b),
        ]
    }

    pub fn expected_dims(name: &str) -> Option<Vec<usize>> {
        match name {
            "conv1_w" => Some(vec![CONV_FILTERS, 3, 3, 2]),
            "conv1_b" => Some(vec![CONV_FILTERS]),
            "conv2_w" => Some(vec![CONV_FILTERS, 3, 3, CONV_FILTERS]),
            "conv2_b" => Some(vec![CONV_FILTERS]),
            "dense1_w" => Some(vec![FLAT_LEN, HIDDEN]),
            "dense1_b" => Some(vec![HIDDEN]),
            "dense2_w" => Some(vec![HIDDEN, 1]),
            "dense2_b" => Some(vec![1]),
            _ => None,
        }
    }

    /// Parameter count per layer: conv1, conv2, dense1, dense2.
    pub fn layer_param_counts(&self) -> [usize; 4] {
        [
            self.conv1_w.len() + self.conv1_b.len(),
            self.conv2_w.len() + self.conv2_b.len(),
            self.dense1_w.len() + self.dense1_b.len(),
            self.dense2_w.len() + self.dense2_b.len(),
        ]
    }

    pub fn total_param_count(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }
}

/// Gradients for every parameter tensor, with matching shapes.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub dense1_w: Tensor,
    pub dense1_b: Tensor,
    pub dense2_w: Tensor,
    pub dense2_b: Tensor,
}

impl Gradients {
    fn zeros_like(params: &ScnnParams) -> Self {
        Gradients {
            conv1_w: Tensor::zeros(params.conv1_w.dims().to_vec()),
            conv1_b: Tensor::zeros(params.conv1_b.dims().to_vec()),
            conv2_w: Tensor::zeros(params.conv2_w.dims().to_vec()),
            conv2_b: Tensor::zeros(params.conv2_b.dims().to_vec()),
            dense1_w: Tensor::zeros(params.dense1_w.dims().to_vec()),
            dense1_b: Tensor::zeros(params.dense1_b.dims().to_vec()),
            dense2_w: Tensor::zeros(params.dense2_w.dims().to_vec()),
            dense2_b: Tensor::zeros(params.dense2_b.dims().to_vec()),
        }
    }

    fn accumulate(&mut self, other: &Gradients) {
        self.conv1_w.add_assign(&other.conv1_w).unwrap();
        self.conv1_b.add_assign(&other.conv1_b).unwrap();
        self.conv2_w.add_assign(&other.conv2_w).unwrap();
        self.conv2_b.add_assign(&other.conv2_b).unwrap();
        self.dense1_w.add_assign(&other.dense1_w).unwrap();
        self.dense1_b.add_assign(&other.dense1_b).unwrap();
        self.dense2_w.add_assign(&other.dense2_w).unwrap();
        self.dense2_b.add_assign(&other.dense2_b).unwrap();
    }

    fn scale(&mut self, factor: f32) {
        self.conv1_w.scale(factor);
        self.conv1_b.scale(factor);
        self.conv2_w.scale(factor);
        self.conv2_b.scale(factor);
        self.dense1_w.scale(factor);
        self.dense1_b.scale(factor);
        self.dense2_w.scale(factor);
        self.dense2_b.scale(factor);
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout_rate: f32,
    pub seed: u64,
    pub laplacian_fraction: f32,
    pub color: ColorConstants,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            batch_size: DEFAULT_BATCH_SIZE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            dropout_rate: DEFAULT_DROPOUT_RATE,
            seed: 0,
            laplacian_fraction: DEFAULT_LAPLACIAN_FRACTION,
            color: BT601,
        }
    }
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f32 {
    (6.0 / (fan_in + fan_out) as f32).sqrt()
}

/// Initialize all parameters: Glorot-uniform weights, zero biases, then
/// floor(laplacian_fraction * 32) randomly chosen conv1 filters overwritten
/// with the Laplacian kernel on every input channel.
pub fn init_params(config: &TrainConfig, rng: &mut Pcg32) -> ScnnParams {
    let uniform = |rng: &mut Pcg32, dims: Vec<usize>, bound: f32| {
        Tensor::from_fn(dims, |_| rng.range_f32(-bound, bound))
    };

    // Convolution fan-in/out use the kernel receptive field.
    let conv1_bound = glorot_bound(3 * 3 * 2, 3 * 3 * CONV_FILTERS);
    let conv2_bound = glorot_bound(3 * 3 * CONV_FILTERS, 3 * 3 * CONV_FILTERS);
    let dense1_bound = glorot_bound(FLAT_LEN, HIDDEN);
    let dense2_bound = glorot_bound(HIDDEN, 1);

    let mut conv1_w = uniform(rng, vec![CONV_FILTERS, 3, 3, 2], conv1_bound);
    let conv2_w = uniform(rng, vec![CONV_FILTERS, 3, 3, CONV_FILTERS], conv2_bound);
    let dense1_w = uniform(rng, vec![FLAT_LEN, HIDDEN], dense1_bound);
    let dense2_w = uniform(rng, vec![HIDDEN, 1], dense2_bound);

    // Pick distinct filters to seed with the Laplacian kernel.
    let n_seeded = (config.laplacian_fraction * CONV_FILTERS as f32).floor() as usize;
    let mut indices: Vec<usize> = (0..CONV_FILTERS).collect();
    rng.shuffle(&mut indices);
    for &k in indices.iter().take(n_seeded) {
        let w = conv1_w.data_mut();
        for di in 0..3 {
            for dj in 0..3 {
                for c in 0..2 {
                    w[((k * 3 + di) * 3 + dj) * 2 + c] = LAPLACIAN_KERNEL[di][dj];
                }
            }
        }
    }

    ScnnParams {
        conv1_w,
        conv1_b: Tensor::zeros(vec![CONV_FILTERS]),
        conv2_w,
        conv2_b: Tensor::zeros(vec![CONV_FILTERS]),
        dense1_w,
        dense1_b: Tensor::zeros(vec![HIDDEN]),
        dense2_w,
        dense2_b: Tensor::zeros(vec![1]),
    }
}

/// Intermediate activations of one forward pass, recorded for backprop.
#[derive(Clone, Debug)]
struct Trace {
    chroma: Tensor,
    conv1_pre: Tensor,
    conv1_act: Tensor,
    conv2_pre: Tensor,
    conv2_act: Tensor,
    dense1_pre: Tensor,
    dropout_mask: Vec<f32>,
    dropped: Tensor,
    prob: f32,
}

/// Records a forward pass for [`backward`]. Calling backward on a tape with
/// no recorded pass is a state error.
#[derive(Default, Debug)]
pub struct Tape {
    trace: Option<Trace>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { trace: None }
    }
}

fn check_patch(patch: &ImageBuffer) -> Result<()> {
    if patch.space != ColorSpace::Rgb {
        return Err(Error::Space(format!(
            "network input must be RGB, got {:?}",
            patch.space
        )));
    }
    if patch.height != INPUT_SIZE || patch.width != INPUT_SIZE {
        return Err(Error::Shape(format!(
            "network input must be {INPUT_SIZE}x{INPUT_SIZE}x3, got {}x{}x{}",
            patch.height, patch.width, patch.channels
        )));
    }
    Ok(())
}

fn chroma_tensor(patch: &ImageBuffer, color: &ColorConstants) -> Result<Tensor> {
    let crcb = rgb_to_crcb(patch, color)?;
    let (h, w) = (crcb.height, crcb.width);
    Tensor::new(vec![h, w, 2], crcb.into_data())
}

fn run_forward(
    params: &ScnnParams,
    patch: &ImageBuffer,
    mode: Mode,
    rng: &mut Pcg32,
    dropout_rate: f32,
    color: &ColorConstants,
) -> Result<Trace> {
    check_patch(patch)?;
    let chroma = chroma_tensor(patch, color)?;
    let conv1_pre = conv2d_valid(&chroma, &params.conv1_w, &params.conv1_b)?;
    let conv1_act = relu(&conv1_pre);
    let conv2_pre = conv2d_valid(&conv1_act, &params.conv2_w, &params.conv2_b)?;
    let conv2_act = relu(&conv2_pre);
    let flat = conv2_act.clone().flatten();
    let dense1_pre = dense(&flat, &params.dense1_w, &params.dense1_b)?;
    let dense1_act = relu(&dense1_pre);
    let (dropped, dropout_mask) = dropout_with_mask(&dense1_act, dropout_rate, mode, rng)?;
    let dense2_pre = dense(&dropped, &params.dense2_w, &params.dense2_b)?;
    let prob = sigmoid_scalar(dense2_pre.data()[0]);
    Ok(Trace {
        chroma,
        conv1_pre,
        conv1_act,
        conv2_pre,
        conv2_act,
        dense1_pre,
        dropout_mask,
        dropped,
        prob,
    })
}

/// Score one 32x32 RGB patch. Values near 1 mean "tampered boundary".
///
/// In infer mode the pass is deterministic and `rng` is untouched.
pub fn forward(params: &ScnnParams, patch: &ImageBuffer, mode: Mode, rng: &mut Pcg32) -> Result<f32> {
    forward_with(params, patch, mode, rng, DEFAULT_DROPOUT_RATE, &BT601)
}

pub fn forward_with(
    params: &ScnnParams,
    patch: &ImageBuffer,
    mode: Mode,
    rng: &mut Pcg32,
    dropout_rate: f32,
    color: &ColorConstants,
) -> Result<f32> {
    Ok(run_forward(params, patch, mode, rng, dropout_rate, color)?.prob)
}

/// Forward pass that records activations onto `tape` for a later [`backward`].
pub fn forward_recorded(
    params: &ScnnParams,
    patch: &ImageBuffer,
    mode: Mode,
    rng: &mut Pcg32,
    dropout_rate: f32,
    color: &ColorConstants,
    tape: &mut Tape,
) -> Result<f32> {
    let trace = run_forward(params, patch, mode, rng, dropout_rate, color)?;
    let prob = trace.prob;
    tape.trace = Some(trace);
    Ok(prob)
}

/// Backpropagate `loss_grad` (d loss / d probability) through the recorded
/// pass, producing gradients for every parameter tensor.
pub fn backward(params: &ScnnParams, tape: &Tape, loss_grad: f32) -> Result<Gradients> {
    let trace = tape
        .trace
        .as_ref()
        .ok_or_else(|| Error::State("backward called with no recorded forward pass".into()))?;

    // Through the sigmoid.
    let p = trace.prob;
    let d_logit = loss_grad * p * (1.0 - p);

    let g_dense2_out = Tensor::new(vec![1], vec![d_logit])?;
    let (g_dropped, g_dense2_w, g_dense2_b) =
        dense_backward(&trace.dropped, &params.dense2_w, &g_dense2_out)?;

    // Dropout backward: multiply by the recorded keep/scale mask.
    let g_dense1_act = Tensor::new(
        vec![HIDDEN],
        g_dropped
            .data()
            .iter()
            .zip(&trace.dropout_mask)
            .map(|(&g, &m)| g * m)
            .collect(),
    )?;
    let g_dense1_pre = relu_backward(&trace.dense1_pre, &g_dense1_act)?;

    let flat = trace.conv2_act.clone().flatten();
    let (g_flat, g_dense1_w, g_dense1_b) = dense_backward(&flat, &params.dense1_w, &g_dense1_pre)?;
    let g_conv2_act = Tensor::new(trace.conv2_act.dims().to_vec(), g_flat.into_data())?;
    let g_conv2_pre = relu_backward(&trace.conv2_pre, &g_conv2_act)?;
    let (g_conv1_act, g_conv2_w, g_conv2_b) =
        conv2d_valid_backward(&trace.conv1_act, &params.conv2_w, &g_conv2_pre)?;
    let g_conv1_pre = relu_backward(&trace.conv1_pre, &g_conv1_act)?;
    let (_, g_conv1_w, g_conv1_b) =
        conv2d_valid_backward(&trace.chroma, &params.conv1_w, &g_conv1_pre)?;

    Ok(Gradients {
        conv1_w: g_conv1_w,
        conv1_b: g_conv1_b,
        conv2_w: g_conv2_w,
        conv2_b: g_conv2_b,
        dense1_w: g_dense1_w,
        dense1_b: g_dense1_b,
        dense2_w: g_dense2_w,
        dense2_b: g_dense2_b,
    })
}

/// One mini-batch SGD-with-momentum step over already-averaged gradients:
/// v <- momentum * v + g; w <- w - lr * v.
struct Momentum {
    velocity: Gradients,
}

impl Momentum {
    fn new(params: &ScnnParams) -> Self {
        Momentum {
            velocity: Gradients::zeros_like(params),
        }
    }

    fn apply(&mut self, params: &mut ScnnParams, grads: &Gradients, lr: f32, momentum: f32) {
        let pairs: [(&mut Tensor, &Tensor, &mut Tensor); 8] = [
            (&mut params.conv1_w, &grads.conv1_w, &mut self.velocity.conv1_w),
            (&mut params.conv1_b, &grads.conv1_b, &mut self.velocity.conv1_b),
            (&mut params.conv2_w, &grads.conv2_w, &mut self.velocity.conv2_w),
            (&mut params.conv2_b, &grads.conv2_b, &mut self.velocity.conv2_b),
            (&mut params.dense1_w, &grads.dense1_w, &mut self.velocity.dense1_w),
            (&mut params.dense1_b, &grads.dense1_b, &mut self.velocity.dense1_b),
            (&mut params.dense2_w, &grads.dense2_w, &mut self.velocity.dense2_w),
            (&mut params.dense2_b, &grads.dense2_b, &mut self.velocity.dense2_b),
        ];
        for (w, g, v) in pairs {
            for ((w, &g), v) in w.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                *v = momentum * *v + g;
                *w -= lr * *v;
            }
        }
    }
}

/// Loss and validation accuracy of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

use crate::dataset::{PatchLabel, PatchRecord};

fn label_value(label: PatchLabel) -> f32 {
    match label {
        PatchLabel::Boundary => 1.0,
        PatchLabel::Normal => 0.0,
    }
}

fn has_both_classes(records: &[PatchRecord]) -> bool {
    records.iter().any(|r| r.label == PatchLabel::Boundary)
        && records.iter().any(|r| r.label == PatchLabel::Normal)
}

/// Classification accuracy at threshold 0.5 in infer mode.
pub fn accuracy(params: &ScnnParams, records: &[PatchRecord], color: &ColorConstants) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Data("accuracy over an empty set".into()));
    }
    let mut rng = Pcg32::new(0);
    let mut correct = 0usize;
    for rec in records {
        let p = forward_with(params, &rec.pixels, Mode::Infer, &mut rng, 0.0, color)?;
        let predicted = p > 0.5;
        if predicted == (rec.label == PatchLabel::Boundary) {
            correct += 1;
        }
    }
    Ok(correct as f64 / records.len() as f64)
}

/// Mini-batch gradient descent with momentum on binary cross-entropy.
/// Shuffles per epoch with the seeded generator, evaluates validation
/// accuracy each epoch, and returns the parameters from the best epoch.
pub fn train(
    mut params: ScnnParams,
    train_set: &[PatchRecord],
    val_set: &[PatchRecord],
    config: &TrainConfig,
) -> Result<(ScnnParams, Vec<EpochStats>)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("train and val sets must be non-empty".into()));
    }
    if !has_both_classes(train_set) || !has_both_classes(val_set) {
        return Err(Error::Data("train and val sets must contain both classes".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Parameter("batch size must be >= 1".into()));
    }

    let mut rng = Pcg32::new(config.seed);
    let mut momentum = Momentum::new(&params);
    let mut history = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, ScnnParams)> = None;
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.max_epochs {
        rng.shuffle(&mut indices);
        let mut loss_sum = 0.0f64;
        for batch in indices.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&params);
            let mut tape = Tape::new();
            for &idx in batch {
                let rec = &train_set[idx];
                let label = label_value(rec.label);
                let p = forward_recorded(
                    &params,
                    &rec.pixels,
                    Mode::Train,
                    &mut rng,
                    config.dropout_rate,
                    &config.color,
                    &mut tape,
                )?;
                loss_sum += bce_loss(p, label) as f64;
                let g = backward(&params, &tape, bce_grad(p, label))?;
                grads.accumulate(&g);
            }
            grads.scale(1.0 / batch.len() as f32);
            momentum.apply(&mut params, &grads, config.learning_rate, config.momentum);
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_accuracy: accuracy(&params, val_set, &config.color)?,
        };
        history.push(stats);
        if best.as_ref().is_none_or(|(acc, _)| stats.val_accuracy > *acc) {
            best = Some((stats.val_accuracy, params.clone()));
        }
    }

    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, history))
}

// ---------------------------------------------------------------------------
// SCNW weight file format
// ---------------------------------------------------------------------------

const SCNW_MAGIC: &[u8; 4] = b"SCNW";
const SCNW_VERSION: u32 = 1;

/// Serialize parameters: magic "SCNW", u32 version, u32 tensor count, then per
/// tensor a u32 name length, ASCII name, u32 rank, u32 dims, and the raw
/// little-endian f32 data in row-major order.
pub fn save_params(params: &ScnnParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    out.extend_from_slice(SCNW_MAGIC);
    out.extend_from_slice(&SCNW_VERSION.to_le_bytes());
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, tensor) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &d in tensor.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(e, path))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format_at(
                format!("truncated while reading {what}"),
                self.pos as u64,
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ScnnParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(e, path))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4, "magic")? != SCNW_MAGIC {
        return Err(Error::format_at("bad SCNW magic", 0));
    }
    let version = r.u32("version")?;
    if version != SCNW_VERSION {
        return Err(Error::format_at(format!("unsupported version {version}"), 4));
    }
    let count = r.u32("tensor count")?;
    if count != 8 {
        return Err(Error::format_at(format!("expected 8 tensors, found {count}"), 8));
    }

    let mut loaded: Vec<(String, Tensor)> = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        if name_len > 64 {
            return Err(Error::format_at(
                format!("implausible tensor name length {name_len}"),
                (r.pos - 4) as u64,
            ));
        }
        let name = String::from_utf8(r.take(name_len, "tensor name")?.to_vec())
            .map_err(|_| Error::format("tensor name is not ASCII"))?;
        let rank = r.u32("rank")? as usize;
        if rank == 0 || rank > 4 {
            return Err(Error::format(format!("{name}: invalid rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dim")? as usize);
        }
        let expected = ScnnParams::expected_dims(&name)
            .ok_or_else(|| Error::format(format!("unknown tensor \"{name}\"")))?;
        if dims != expected {
            return Err(Error::format(format!(
                "{name}: expected dims {expected:?}, found {dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * 4, &format!("data of {name}"))?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        loaded.push((name, Tensor::new(dims, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::format_at("trailing bytes after last tensor", r.pos as u64));
    }

    let mut take = |want: &str| -> Result<Tensor> {
        loaded
            .iter()
            .position(|(n, _)| n == want)
            .map(|i| loaded.remove(i).1)
            .ok_or_else(|| Error::format(format!("missing tensor \"{want}\"")))
    };
    Ok(ScnnParams {
        conv1_w: take("conv1_w")?,
        conv1_b: take("conv1_b")?,
        conv2_w: take("conv2_w")?,
        conv2_b: take("conv2_b")?,
        dense1_w: take("dense1_w")?,
        dense1_b: take("dense1_b")?,
        dense2_w: take("dense2_w")?,
        dense2_b: take("dense2_b")?,
    })
}
