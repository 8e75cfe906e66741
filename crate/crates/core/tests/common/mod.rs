//! Shared test support: an independent plain-loop f64 reference
//! implementation of the network, used as the oracle for gradient checks and
//! forward-pass cross-validation. It deliberately shares no code with the
//! production kernels, and index-style loops are intentional here.
#![allow(clippy::needless_range_loop, dead_code)]

use forgescan_core::model::ScnnParams;
use forgescan_core::tensor::Tensor;

pub const KR: f64 = 0.299;
pub const KG: f64 = 0.587;
pub const KB: f64 = 0.114;

/// Which parameter tensor a gradient-check coordinate addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    Conv1W,
    Conv1B,
    Conv2W,
    Conv2B,
    Dense1W,
    Dense1B,
    Dense2W,
    Dense2B,
}

pub const ALL_PARAMS: [Param; 8] = [
    Param::Conv1W,
    Param::Conv1B,
    Param::Conv2W,
    Param::Conv2B,
    Param::Dense1W,
    Param::Dense1B,
    Param::Dense2W,
    Param::Dense2B,
];

pub fn param_name(p: Param) -> &'static str {
    match p {
        Param::Conv1W => "conv1_w",
        Param::Conv1B => "conv1_b",
        Param::Conv2W => "conv2_w",
        Param::Conv2B => "conv2_b",
        Param::Dense1W => "dense1_w",
        Param::Dense1B => "dense1_b",
        Param::Dense2W => "dense2_w",
        Param::Dense2B => "dense2_b",
    }
}

pub fn param_tensor(params: &ScnnParams, p: Param) -> &Tensor {
    match p {
        Param::Conv1W => &params.conv1_w,
        Param::Conv1B => &params.conv1_b,
        Param::Conv2W => &params.conv2_w,
        Param::Conv2B => &params.conv2_b,
        Param::Dense1W => &params.dense1_w,
        Param::Dense1B => &params.dense1_b,
        Param::Dense2W => &params.dense2_w,
        Param::Dense2B => &params.dense2_b,
    }
}

fn param_tensor_mut(params: &mut ScnnParams, p: Param) -> &mut Tensor {
    match p {
        Param::Conv1W => &mut params.conv1_w,
        Param::Conv1B => &mut params.conv1_b,
        Param::Conv2W => &mut params.conv2_w,
        Param::Conv2B => &mut params.conv2_b,
        Param::Dense1W => &mut params.dense1_w,
        Param::Dense1B => &mut params.dense1_b,
        Param::Dense2W => &mut params.dense2_w,
        Param::Dense2B => &mut params.dense2_b,
    }
}

/// f64 copies of all parameter tensors.
pub struct NaiveNet {
    conv1_w: Vec<f64>,
    conv1_b: Vec<f64>,
    conv2_w: Vec<f64>,
    conv2_b: Vec<f64>,
    dense1_w: Vec<f64>,
    dense1_b: Vec<f64>,
    dense2_w: Vec<f64>,
    dense2_b: Vec<f64>,
}

fn widen(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

impl NaiveNet {
    pub fn from_params(params: &ScnnParams) -> Self {
        NaiveNet {
            conv1_w: widen(&params.conv1_w),
            conv1_b: widen(&params.conv1_b),
            conv2_w: widen(&params.conv2_w),
            conv2_b: widen(&params.conv2_b),
            dense1_w: widen(&params.dense1_w),
            dense1_b: widen(&params.dense1_b),
            dense2_w: widen(&params.dense2_w),
            dense2_b: widen(&params.dense2_b),
        }
    }

    /// Full forward pass on a 32x32x3 RGB patch (values in [0, 1]).
    /// Also returns a hash of every ReLU unit's sign: a finite-difference
    /// stencil is only trustworthy when both evaluations share it (no kink
    /// crossed between the two points).
    pub fn probability_and_signs(&self, patch: &[f32]) -> (f64, u64) {
        assert_eq!(patch.len(), 32 * 32 * 3);

        // Chroma conversion.
        let mut chroma = vec![0.0f64; 32 * 32 * 2];
        for p in 0..32 * 32 {
            let r = patch[p * 3] as f64;
            let g = patch[p * 3 + 1] as f64;
            let b = patch[p * 3 + 2] as f64;
            let y = KR * r + KG * g + KB * b;
            chroma[p * 2] = ((r - y) / (2.0 * (1.0 - KR))).clamp(-0.5, 0.5);
            chroma[p * 2 + 1] = ((b - y) / (2.0 * (1.0 - KB))).clamp(-0.5, 0.5);
        }

        let mut signs = 0xcbf2_9ce4_8422_2325u64; // FNV offset basis
        // conv1 + ReLU: (32,32,2) -> (30,30,32).
        let a1 = naive_conv_relu(&chroma, 32, 32, 2, &self.conv1_w, &self.conv1_b, 32, &mut signs);
        // conv2 + ReLU: (30,30,32) -> (28,28,32).
        let a2 = naive_conv_relu(&a1, 30, 30, 32, &self.conv2_w, &self.conv2_b, 32, &mut signs);

        // dense1 + ReLU on the row-major flatten.
        let mut hidden = self.dense1_b.clone();
        for (i, &x) in a2.iter().enumerate() {
            if x != 0.0 {
                for j in 0..64 {
                    hidden[j] += x * self.dense1_w[i * 64 + j];
                }
            }
        }
        for h in hidden.iter_mut() {
            mix_sign(&mut signs, *h > 0.0);
            if *h < 0.0 {
                *h = 0.0;
            }
        }

        // dense2 + sigmoid (dropout is the identity at inference).
        let mut z = self.dense2_b[0];
        for (j, &h) in hidden.iter().enumerate() {
            z += h * self.dense2_w[j];
        }
        (1.0 / (1.0 + (-z).exp()), signs)
    }

    pub fn probability(&self, patch: &[f32]) -> f64 {
        self.probability_and_signs(patch).0
    }

    /// Binary cross-entropy at the naive probability, plus the sign hash.
    pub fn loss_and_signs(&self, patch: &[f32], label: f64) -> (f64, u64) {
        let (p, signs) = self.probability_and_signs(patch);
        let p = p.clamp(1e-7, 1.0 - 1e-7);
        (-(label * p.ln() + (1.0 - label) * (1.0 - p).ln()), signs)
    }

    pub fn loss(&self, patch: &[f32], label: f64) -> f64 {
        self.loss_and_signs(patch, label).0
    }
}

#[inline]
fn mix_sign(hash: &mut u64, positive: bool) {
    *hash ^= positive as u64 + 1;
    *hash = hash.wrapping_mul(0x0000_0100_0000_01b3); // FNV prime
}

/// ReLU on/off pattern of one forward pass, layer by layer.
pub struct ReluMasks {
    conv1: Vec<bool>,
    conv2: Vec<bool>,
    dense1: Vec<bool>,
}

impl NaiveNet {
    /// Capture the ReLU masks at the (unperturbed) evaluation point.
    pub fn relu_masks(&self, patch: &[f32]) -> ReluMasks {
        let chroma = self.chroma(patch);
        let mut conv1 = Vec::new();
        let a1 = conv_capture(&chroma, 32, 32, 2, &self.conv1_w, &self.conv1_b, 32, &mut conv1);
        let mut conv2 = Vec::new();
        let a2 = conv_capture(&a1, 30, 30, 32, &self.conv2_w, &self.conv2_b, 32, &mut conv2);
        let mut dense1 = Vec::with_capacity(64);
        let mut hidden = self.dense1_b.clone();
        for (i, &x) in a2.iter().enumerate() {
            if x != 0.0 {
                for j in 0..64 {
                    hidden[j] += x * self.dense1_w[i * 64 + j];
                }
            }
        }
        for &h in &hidden {
            dense1.push(h > 0.0);
        }
        ReluMasks { conv1, conv2, dense1 }
    }

    fn chroma(&self, patch: &[f32]) -> Vec<f64> {
        let mut chroma = vec![0.0f64; 32 * 32 * 2];
        for p in 0..32 * 32 {
            let r = patch[p * 3] as f64;
            let g = patch[p * 3 + 1] as f64;
            let b = patch[p * 3 + 2] as f64;
            let y = KR * r + KG * g + KB * b;
            chroma[p * 2] = ((r - y) / (2.0 * (1.0 - KR))).clamp(-0.5, 0.5);
            chroma[p * 2 + 1] = ((b - y) / (2.0 * (1.0 - KB))).clamp(-0.5, 0.5);
        }
        chroma
    }

    /// Loss along the locally-linear branch selected by `masks`: every ReLU
    /// gate is pinned to its state at the base point, which is exactly the
    /// function whose derivative backpropagation computes. Central
    /// differences of this function are kink-free.
    pub fn loss_frozen(&self, patch: &[f32], label: f64, masks: &ReluMasks) -> f64 {
        let chroma = self.chroma(patch);
        let a1 = conv_frozen(&chroma, 32, 32, 2, &self.conv1_w, &self.conv1_b, 32, &masks.conv1);
        let a2 = conv_frozen(&a1, 30, 30, 32, &self.conv2_w, &self.conv2_b, 32, &masks.conv2);
        let mut hidden = self.dense1_b.clone();
        for (i, &x) in a2.iter().enumerate() {
            if x != 0.0 {
                for j in 0..64 {
                    hidden[j] += x * self.dense1_w[i * 64 + j];
                }
            }
        }
        let mut z = self.dense2_b[0];
        for (j, (&h, &open)) in hidden.iter().zip(&masks.dense1).enumerate() {
            if open {
                z += h * self.dense2_w[j];
            }
        }
        let p = (1.0 / (1.0 + (-z).exp())).clamp(1e-7, 1.0 - 1e-7);
        -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_capture(
    input: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    filters: &[f64],
    bias: &[f64],
    cout: usize,
    masks: &mut Vec<bool>,
) -> Vec<f64> {
    let mut signs = 0u64;
    let out = naive_conv_relu(input, h, w, cin, filters, bias, cout, &mut signs);
    masks.extend(out.iter().map(|&v| v > 0.0));
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_frozen(
    input: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    filters: &[f64],
    bias: &[f64],
    cout: usize,
    mask: &[bool],
) -> Vec<f64> {
    let (oh, ow) = (h - 2, w - 2);
    let mut out = vec![0.0f64; oh * ow * cout];
    for i in 0..oh {
        for j in 0..ow {
            for k in 0..cout {
                let idx = (i * ow + j) * cout + k;
                if !mask[idx] {
                    continue;
                }
                let mut s = bias[k];
                for di in 0..3 {
                    for dj in 0..3 {
                        for c in 0..cin {
                            s += input[((i + di) * w + (j + dj)) * cin + c]
                                * filters[((k * 3 + di) * 3 + dj) * cin + c];
                        }
                    }
                }
                out[idx] = s;
            }
        }
    }
    out
}

/// Frozen-mask loss with one parameter coordinate perturbed by `delta`.
pub fn perturbed_loss_frozen(
    params: &ScnnParams,
    which: Param,
    coord: usize,
    delta: f32,
    patch: &[f32],
    label: f64,
    masks: &ReluMasks,
) -> f64 {
    let mut perturbed = params.clone();
    param_tensor_mut(&mut perturbed, which).data_mut()[coord] += delta;
    NaiveNet::from_params(&perturbed).loss_frozen(patch, label, masks)
}

#[allow(clippy::too_many_arguments)]
fn naive_conv_relu(
    input: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    filters: &[f64],
    bias: &[f64],
    cout: usize,
    signs: &mut u64,
) -> Vec<f64> {
    let (oh, ow) = (h - 2, w - 2);
    let mut out = vec![0.0f64; oh * ow * cout];
    for i in 0..oh {
        for j in 0..ow {
            for k in 0..cout {
                let mut s = bias[k];
                for di in 0..3 {
                    for dj in 0..3 {
                        for c in 0..cin {
                            s += input[((i + di) * w + (j + dj)) * cin + c]
                                * filters[((k * 3 + di) * 3 + dj) * cin + c];
                        }
                    }
                }
                mix_sign(signs, s > 0.0);
                out[(i * ow + j) * cout + k] = if s > 0.0 { s } else { 0.0 };
            }
        }
    }
    out
}

/// Loss of the network with one parameter coordinate perturbed by `delta`,
/// evaluated by the naive f64 forward pass, together with the ReLU sign hash.
pub fn perturbed_loss_and_signs(
    params: &ScnnParams,
    which: Param,
    coord: usize,
    delta: f32,
    patch: &[f32],
    label: f64,
) -> (f64, u64) {
    let mut perturbed = params.clone();
    param_tensor_mut(&mut perturbed, which).data_mut()[coord] += delta;
    NaiveNet::from_params(&perturbed).loss_and_signs(patch, label)
}

pub fn perturbed_loss(
    params: &ScnnParams,
    which: Param,
    coord: usize,
    delta: f32,
    patch: &[f32],
    label: f64,
) -> f64 {
    perturbed_loss_and_signs(params, which, coord, delta, patch, label).0
}
