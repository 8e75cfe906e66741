//! Numeric kernels: valid 2D convolution, dense layers, activations, dropout
//! and binary cross-entropy, each with an exact backward pass.
//!
//! All kernels are pure functions over [`Tensor`]s in 32-bit floats. Per-output
//! accumulation order is fixed and independent of absolute position, which makes
//! valid convolution exactly translation-equivariant in floating point — the
//! property the shared-feature-map inference path relies on.

use crate::error::{Error, Result};
use crate::rng::Pcg32;
use crate::tensor::Tensor;

/// Whether stochastic layers (dropout) are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Loss clamp keeping ln() arguments away from zero.
pub const BCE_EPSILON: f32 = 1e-7;

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let a4 = &a[i * 4..i * 4 + 4];
        let b4 = &b[i * 4..i * 4 + 4];
        acc[0] += a4[0] * b4[0];
        acc[1] += a4[1] * b4[1];
        acc[2] += a4[2] * b4[2];
        acc[3] += a4[3] * b4[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(acc: &mut [f32], v: f32, row: &[f32]) {
    debug_assert_eq!(acc.len(), row.len());
    for (a, r) in acc.iter_mut().zip(row) {
        *a += v * r;
    }
}

fn check_conv_shapes(input: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize, usize)> {
    let (h, w, cin) = match input.dims() {
        [h, w, c] => (*h, *w, *c),
        d => return Err(Error::Shape(format!("conv input must be rank 3, got {d:?}"))),
    };
    let (cout, kh, kw, fcin) = match filters.dims() {
        [o, kh, kw, c] => (*o, *kh, *kw, *c),
        d => return Err(Error::Shape(format!("conv filters must be rank 4, got {d:?}"))),
    };
    if (kh, kw) != (3, 3) {
        return Err(Error::Shape(format!(
            "conv kernel must be 3x3, got {kh}x{kw}"
        )));
    }
    if fcin != cin {
        return Err(Error::Shape(format!(
            "conv input has {cin} channels but filters expect {fcin}"
        )));
    }
    if bias.dims() != [cout] {
        return Err(Error::Shape(format!(
            "conv bias must have {cout} entries, got {:?}",
            bias.dims()
        )));
    }
    if h < 3 || w < 3 {
        return Err(Error::Shape(format!(
            "conv input must be at least 3x3, got {h}x{w}"
        )));
    }
    Ok((h, w, cin, cout))
}

/// Filters transposed to (kh, kw, cin, cout) so the out-channel axis is
/// contiguous for the inner accumulation loop.
fn transpose_filters(filters: &Tensor, cin: usize, cout: usize) -> Vec<f32> {
    let f = filters.data();
    let mut wt = vec![0.0f32; 9 * cin * cout];
    for k in 0..cout {
        for di in 0..3 {
            for dj in 0..3 {
                for c in 0..cin {
                    wt[((di * 3 + dj) * cin + c) * cout + k] = f[((k * 3 + di) * 3 + dj) * cin + c];
                }
            }
        }
    }
    wt
}

/// Valid (no-padding) 3x3 convolution: (h, w, cin) -> (h-2, w-2, cout).
///
/// output[i,j,k] = bias[k] + sum over (di,dj,c) of input[i+di, j+dj, c] * filters[k,di,dj,c]
pub fn conv2d_valid(input: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (h, w, cin, cout) = check_conv_shapes(input, filters, bias)?;
    let wt = transpose_filters(filters, cin, cout);
    let (oh, ow) = (h - 2, w - 2);
    let x = input.data();
    let b = bias.data();
    let mut out = vec![0.0f32; oh * ow * cout];
    let row_stride = w * cin;
    // The 32-filter case accumulates into a fixed-width local that stays in
    // vector registers across all taps; post-ReLU inputs are ~half zeros, so
    // skipping them also halves the filter-row traffic.
    if cout == 32 {
        let taps = 3 * cin;
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = [0.0f32; 32];
                acc.copy_from_slice(b);
                for di in 0..3 {
                    let seg = &x[(i + di) * row_stride + j * cin..][..taps];
                    let wrows = &wt[di * taps * 32..][..taps * 32];
                    for (t, &v) in seg.iter().enumerate() {
                        if v != 0.0 {
                            let wrow: &[f32; 32] = wrows[t * 32..][..32].try_into().unwrap();
                            for k in 0..32 {
                                acc[k] += v * wrow[k];
                            }
                        }
                    }
                }
                out[(i * ow + j) * 32..][..32].copy_from_slice(&acc);
            }
        }
        return Tensor::new(vec![oh, ow, cout], out);
    }
    for i in 0..oh {
        for j in 0..ow {
            let acc = &mut out[(i * ow + j) * cout..][..cout];
            acc.copy_from_slice(b);
            for di in 0..3 {
                // One input row segment covers the (dj, c) loop contiguously.
                let seg = &x[(i + di) * row_stride + j * cin..][..3 * cin];
                let wrow_base = di * 3 * cin;
                for (t, &v) in seg.iter().enumerate() {
                    axpy(acc, v, &wt[(wrow_base + t) * cout..][..cout]);
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, cout], out)
}

/// Gradients of [`conv2d_valid`] with respect to input, filters and bias.
pub fn conv2d_valid_backward(
    input: &Tensor,
    filters: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (h, w, cin, cout) = match (input.dims(), filters.dims()) {
        ([h, w, c], [o, 3, 3, fc]) if c == fc => (*h, *w, *c, *o),
        _ => {
            return Err(Error::Shape(format!(
                "conv backward: incompatible input {:?} / filters {:?}",
                input.dims(),
                filters.dims()
            )))
        }
    };
    let (oh, ow) = (h - 2, w - 2);
    if grad_out.dims() != [oh, ow, cout] {
        return Err(Error::Shape(format!(
            "conv backward: grad_out must be {:?}, got {:?}",
            [oh, ow, cout],
            grad_out.dims()
        )));
    }
    let x = input.data();
    let g = grad_out.data();
    let wt = transpose_filters(filters, cin, cout);
    let row_stride = w * cin;

    let mut grad_in = vec![0.0f32; h * w * cin];
    let mut grad_wt = vec![0.0f32; 9 * cin * cout];
    let mut grad_b = vec![0.0f32; cout];

    for i in 0..oh {
        for j in 0..ow {
            let go = &g[(i * ow + j) * cout..][..cout];
            for (gb, &gv) in grad_b.iter_mut().zip(go) {
                *gb += gv;
            }
            for di in 0..3 {
                let seg_base = (i + di) * row_stride + j * cin;
                let seg = &x[seg_base..][..3 * cin];
                let gseg = &mut grad_in[seg_base..][..3 * cin];
                let wrow_base = di * 3 * cin;
                for (t, &v) in seg.iter().enumerate() {
                    let row = (wrow_base + t) * cout;
                    gseg[t] += dot(&wt[row..][..cout], go);
                    axpy(&mut grad_wt[row..][..cout], v, go);
                }
            }
        }
    }

    // Back to the public (cout, 3, 3, cin) layout.
    let mut grad_w = vec![0.0f32; cout * 9 * cin];
    for k in 0..cout {
        for di in 0..3 {
            for dj in 0..3 {
                for c in 0..cin {
                    grad_w[((k * 3 + di) * 3 + dj) * cin + c] =
                        grad_wt[((di * 3 + dj) * cin + c) * cout + k];
                }
            }
        }
    }

    Ok((
        Tensor::new(vec![h, w, cin], grad_in)?,
        Tensor::new(vec![cout, 3, 3, cin], grad_w)?,
        Tensor::new(vec![cout], grad_b)?,
    ))
}

/// Fully-connected layer: out[j] = bias[j] + sum_i input[i] * weights[i,j].
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let n = match input.dims() {
        [n] => *n,
        d => return Err(Error::Shape(format!("dense input must be rank 1, got {d:?}"))),
    };
    let (wn, m) = match weights.dims() {
        [wn, m] => (*wn, *m),
        d => return Err(Error::Shape(format!("dense weights must be rank 2, got {d:?}"))),
    };
    if wn != n {
        return Err(Error::Shape(format!(
            "dense: input length {n} does not match weight rows {wn}"
        )));
    }
    if bias.dims() != [m] {
        return Err(Error::Shape(format!(
            "dense bias must have {m} entries, got {:?}",
            bias.dims()
        )));
    }
    let x = input.data();
    let wdat = weights.data();
    let mut out = bias.data().to_vec();
    for (i, &v) in x.iter().enumerate() {
        if v != 0.0 {
            axpy(&mut out, v, &wdat[i * m..][..m]);
        }
    }
    Tensor::new(vec![m], out)
}

/// Gradients of [`dense`] with respect to input, weights and bias.
pub fn dense_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (n, m) = match weights.dims() {
        [n, m] => (*n, *m),
        d => return Err(Error::Shape(format!("dense weights must be rank 2, got {d:?}"))),
    };
    if input.dims() != [n] || grad_out.dims() != [m] {
        return Err(Error::Shape(format!(
            "dense backward: input {:?} / grad_out {:?} incompatible with weights [{n}, {m}]",
            input.dims(),
            grad_out.dims()
        )));
    }
    let x = input.data();
    let wdat = weights.data();
    let go = grad_out.data();
    let mut grad_in = vec![0.0f32; n];
    let mut grad_w = vec![0.0f32; n * m];
    for i in 0..n {
        let wrow = &wdat[i * m..][..m];
        grad_in[i] = dot(wrow, go);
        let v = x[i];
        if v != 0.0 {
            axpy(&mut grad_w[i * m..][..m], v, go);
        }
    }
    Ok((
        Tensor::new(vec![n], grad_in)?,
        Tensor::new(vec![n, m], grad_w)?,
        Tensor::new(vec![m], go.to_vec())?,
    ))
}

/// Elementwise max(0, x).
pub fn relu(input: &Tensor) -> Tensor {
    Tensor::new(
        input.dims().to_vec(),
        input.data().iter().map(|&v| v.max(0.0)).collect(),
    )
    .expect("relu preserves shape")
}

/// Gradient through ReLU given the pre-activation values.
pub fn relu_backward(pre: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if pre.dims() != grad_out.dims() {
        return Err(Error::Shape(format!(
            "relu backward: {:?} vs {:?}",
            pre.dims(),
            grad_out.dims()
        )));
    }
    Tensor::new(
        pre.dims().to_vec(),
        pre.data()
            .iter()
            .zip(grad_out.data())
            .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

/// Numerically stable logistic function, clamped so the output stays
/// strictly inside (0, 1) even for saturating finite inputs.
pub fn sigmoid_scalar(x: f32) -> f32 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(f32::MIN_POSITIVE, 1.0 - f32::EPSILON / 2.0)
}

/// Elementwise logistic function.
pub fn sigmoid(input: &Tensor) -> Tensor {
    Tensor::new(
        input.dims().to_vec(),
        input.data().iter().map(|&v| sigmoid_scalar(v)).collect(),
    )
    .expect("sigmoid preserves shape")
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); in infer mode the input is
/// returned unchanged.
pub fn dropout(input: &Tensor, rate: f32, mode: Mode, rng: &mut Pcg32) -> Result<Tensor> {
    let (out, _) = dropout_with_mask(input, rate, mode, rng)?;
    Ok(out)
}

/// Like [`dropout`] but also returns the per-element scale mask
/// (0 for dropped, 1/(1-rate) for kept; all 1 in infer mode), which is the
/// exact multiplier the backward pass needs.
pub fn dropout_with_mask(
    input: &Tensor,
    rate: f32,
    mode: Mode,
    rng: &mut Pcg32,
) -> Result<(Tensor, Vec<f32>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    match mode {
        Mode::Infer => Ok((input.clone(), vec![1.0; input.len()])),
        Mode::Train => {
            let scale = 1.0 / (1.0 - rate);
            let mask: Vec<f32> = (0..input.len())
                .map(|_| if rng.next_f32() < rate { 0.0 } else { scale })
                .collect();
            let data = input
                .data()
                .iter()
                .zip(&mask)
                .map(|(&v, &m)| v * m)
                .collect();
            Ok((Tensor::new(input.dims().to_vec(), data)?, mask))
        }
    }
}

/// Binary cross-entropy with predictions clamped to [eps, 1-eps].
pub fn bce_loss(prediction: f32, label: f32) -> f32 {
    let p = prediction.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// d(bce_loss)/d(prediction) at the clamped prediction.
pub fn bce_grad(prediction: f32, label: f32) -> f32 {
    let p = prediction.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    (p - label) / (p * (1.0 - p))
}
