//! Whole-image localization back ends.
//!
//! Sliding Window Detection (SWD) crops every stride-spaced 32x32 window and
//! scores it with the network — exhaustive and simple, the reference the fast
//! path is checked against. The fast path instead runs both convolutions once
//! over the full image and applies the dense head to 28x28x32 slices of the
//! shared feature volume; valid convolution is translation-equivariant, so
//! the two produce identical maps while the conv work stops scaling with the
//! window count.

use std::fs;
use std::path::Path;

use crate::color::{rgb_to_crcb, ColorConstants, ColorSpace, ImageBuffer, BT601};
use crate::error::{Error, Result};
use crate::model::{ScnnParams, CONV_FILTERS, FLAT_LEN, HIDDEN, INPUT_SIZE};
use crate::nn::{conv2d_valid, dense, relu, sigmoid_scalar, Mode};
use crate::rng::Pcg32;
use crate::tensor::Tensor;

/// Default inference stride.
pub const DEFAULT_STRIDE: usize = 2;

/// Grid of per-window confidence scores. Cell (r, c) scores the 32x32 window
/// whose top-left pixel is (r * stride, c * stride).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
    pub window: usize,
    scores: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(rows: usize, cols: usize, stride: usize, window: usize, scores: Vec<f32>) -> Result<Self> {
        if scores.len() != rows * cols {
            return Err(Error::Shape(format!(
                "map {rows}x{cols} expects {} scores, got {}",
                rows * cols,
                scores.len()
            )));
        }
        Ok(ProbabilityMap { rows, cols, stride, window, scores })
    }

    #[inline]
    pub fn score(&self, row: usize, col: usize) -> f32 {
        self.scores[row * self.cols + col]
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    /// Top-left pixel of the window a cell scores.
    pub fn anchor(&self, row: usize, col: usize) -> (usize, usize) {
        (row * self.stride, col * self.stride)
    }

    /// Largest per-cell absolute difference against another map.
    pub fn max_abs_diff(&self, other: &ProbabilityMap) -> Option<f32> {
        if self.rows != other.rows || self.cols != other.cols {
            return None;
        }
        Some(
            self.scores
                .iter()
                .zip(&other.scores)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max),
        )
    }

    /// 8-bit grayscale export (score * 255, rounded).
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::new(
            self.rows,
            self.cols,
            1,
            ColorSpace::ScalarMask,
            self.scores
                .iter()
                .map(|&s| (s.clamp(0.0, 1.0) * 255.0).round() / 255.0)
                .collect(),
        )
        .expect("map dims are consistent")
    }
}

/// Cell-grid geometry for an image scanned with the given stride:
/// floor((n - 32) / stride) + 1 windows per axis.
pub fn map_geometry(height: usize, width: usize, stride: usize) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::Parameter("stride must be >= 1".into()));
    }
    if height < INPUT_SIZE || width < INPUT_SIZE {
        return Err(Error::Shape(format!(
            "image {height}x{width} is smaller than the {INPUT_SIZE}x{INPUT_SIZE} window"
        )));
    }
    Ok(((height - INPUT_SIZE) / stride + 1, (width - INPUT_SIZE) / stride + 1))
}

fn check_rgb(image: &ImageBuffer) -> Result<()> {
    if image.space != ColorSpace::Rgb {
        return Err(Error::Space(format!(
            "localization requires an RGB image, got {:?}",
            image.space
        )));
    }
    Ok(())
}

/// Sliding Window Detection: run the full network on every window crop.
pub fn swd(params: &ScnnParams, image: &ImageBuffer, stride: usize) -> Result<ProbabilityMap> {
    swd_with(params, image, stride, &BT601)
}

pub fn swd_with(
    params: &ScnnParams,
    image: &ImageBuffer,
    stride: usize,
    color: &ColorConstants,
) -> Result<ProbabilityMap> {
    check_rgb(image)?;
    let (rows, cols) = map_geometry(image.height, image.width, stride)?;
    let mut rng = Pcg32::new(0); // untouched in infer mode
    let mut scores = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let crop = image.crop(r * stride, c * stride, INPUT_SIZE, INPUT_SIZE)?;
            scores.push(crate::model::forward_with(
                params, &crop, Mode::Infer, &mut rng, 0.0, color,
            )?);
        }
    }
    ProbabilityMap::new(rows, cols, stride, INPUT_SIZE, scores)
}

/// Fast path: convert the whole image to chroma once, run conv1+ReLU and
/// conv2+ReLU over it (feature volume (n-4, m-4, 32)), then apply the dense
/// head to the 28x28x32 slice at each window anchor, flattened in the same
/// row-major order used in training.
pub fn fast_scnn(params: &ScnnParams, image: &ImageBuffer, stride: usize) -> Result<ProbabilityMap> {
    fast_scnn_with(params, image, stride, &BT601)
}

pub fn fast_scnn_with(
    params: &ScnnParams,
    image: &ImageBuffer,
    stride: usize,
    color: &ColorConstants,
) -> Result<ProbabilityMap> {
    check_rgb(image)?;
    let (rows, cols) = map_geometry(image.height, image.width, stride)?;
    let crcb = rgb_to_crcb(image, color)?;
    let chroma = Tensor::new(vec![image.height, image.width, 2], crcb.into_data())?;
    let features = relu(&conv2d_valid(&chroma, &params.conv1_w, &params.conv1_b)?);
    let features = relu(&conv2d_valid(&features, &params.conv2_w, &params.conv2_b)?);
    let [fh, fw, fc] = *features.dims() else {
        unreachable!("conv output is rank 3")
    };
    debug_assert_eq!((fh, fw, fc), (image.height - 4, image.width - 4, CONV_FILTERS));

    let slice_side = INPUT_SIZE - 4; // 28
    let fdata = features.data();
    let mut scores = Vec::with_capacity(rows * cols);

    // The dense head is evaluated in batches of window slices so each
    // dense1 weight row is streamed once per batch instead of once per
    // window. Per-window accumulation order is unchanged, so the scores are
    // bit-identical to one-at-a-time evaluation.
    const BATCH: usize = 16;
    let anchors: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .collect();
    let w1 = params.dense1_w.data();
    let b1 = params.dense1_b.data();
    let mut slices = vec![0.0f32; BATCH * FLAT_LEN];
    let mut hidden = vec![0.0f32; BATCH * HIDDEN];
    for chunk in anchors.chunks(BATCH) {
        for (s, &(r, c)) in chunk.iter().enumerate() {
            let (top, left) = (r * stride, c * stride);
            // Materialize the slice contiguously; this is the same row-major
            // (h, w, channel) order the flatten in training uses.
            let window = &mut slices[s * FLAT_LEN..][..FLAT_LEN];
            for y in 0..slice_side {
                let src = ((top + y) * fw + left) * fc;
                let dst = y * slice_side * fc;
                window[dst..dst + slice_side * fc]
                    .copy_from_slice(&fdata[src..src + slice_side * fc]);
            }
            hidden[s * HIDDEN..][..HIDDEN].copy_from_slice(b1);
        }
        for i in 0..FLAT_LEN {
            let wrow = &w1[i * HIDDEN..][..HIDDEN];
            for s in 0..chunk.len() {
                let v = slices[s * FLAT_LEN + i];
                if v != 0.0 {
                    let acc = &mut hidden[s * HIDDEN..][..HIDDEN];
                    for (a, &wv) in acc.iter_mut().zip(wrow) {
                        *a += v * wv;
                    }
                }
            }
        }
        for s in 0..chunk.len() {
            let h = Tensor::new(
                vec![HIDDEN],
                hidden[s * HIDDEN..][..HIDDEN]
                    .iter()
                    .map(|&v| v.max(0.0))
                    .collect(),
            )?;
            let logit = dense(&h, &params.dense2_w, &params.dense2_b)?;
            scores.push(sigmoid_scalar(logit.data()[0]));
        }
    }
    ProbabilityMap::new(rows, cols, stride, INPUT_SIZE, scores)
}

// ---------------------------------------------------------------------------
// Work accounting
// ---------------------------------------------------------------------------

const CONV1_MACS_PER_CELL: u64 = (CONV_FILTERS * 3 * 3 * 2) as u64;
const CONV2_MACS_PER_CELL: u64 = (CONV_FILTERS * 3 * 3 * CONV_FILTERS) as u64;
const DENSE_HEAD_MACS: u64 = (FLAT_LEN * 64 + 64) as u64;

/// Multiply-accumulates for one 32x32 window through the full network.
pub fn window_mac_count() -> u64 {
    let conv1 = 30 * 30 * CONV1_MACS_PER_CELL;
    let conv2 = 28 * 28 * CONV2_MACS_PER_CELL;
    conv1 + conv2 + DENSE_HEAD_MACS
}

/// Nominal multiply-accumulate count of SWD: one full network per window.
pub fn swd_mac_count(height: usize, width: usize, stride: usize) -> Result<u64> {
    let (rows, cols) = map_geometry(height, width, stride)?;
    Ok(rows as u64 * cols as u64 * window_mac_count())
}

/// Nominal multiply-accumulate count of the fast path: the conv work covers
/// the image once regardless of stride; only the dense head scales with the
/// window count.
pub fn fast_scnn_mac_count(height: usize, width: usize, stride: usize) -> Result<u64> {
    let (rows, cols) = map_geometry(height, width, stride)?;
    let conv1 = ((height - 2) * (width - 2)) as u64 * CONV1_MACS_PER_CELL;
    let conv2 = ((height - 4) * (width - 4)) as u64 * CONV2_MACS_PER_CELL;
    Ok(conv1 + conv2 + rows as u64 * cols as u64 * DENSE_HEAD_MACS)
}

// ---------------------------------------------------------------------------
// Map serialization: text header "rows cols stride window\n" followed by
// row-major little-endian f32 scores.
// ---------------------------------------------------------------------------

pub fn encode_map(map: &ProbabilityMap) -> Vec<u8> {
    let mut out = format!("{} {} {} {}\n", map.rows, map.cols, map.stride, map.window).into_bytes();
    for &s in &map.scores {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode_map(bytes: &[u8]) -> Result<ProbabilityMap> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format_at("missing map header line", 0))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::format_at("map header is not UTF-8", 0))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::format_at(
            format!("map header needs 4 fields, got {}", fields.len()),
            0,
        ));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::format(format!("bad {what} in map header: {s:?}")))
    };
    let rows = parse(fields[0], "rows")?;
    let cols = parse(fields[1], "cols")?;
    let stride = parse(fields[2], "stride")?;
    let window = parse(fields[3], "window")?;
    let payload = &bytes[newline + 1..];
    let expected = rows * cols * 4;
    if payload.len() != expected {
        return Err(Error::format_at(
            format!("map payload: expected {expected} bytes, found {}", payload.len()),
            (newline + 1 + payload.len()) as u64,
        ));
    }
    let scores = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ProbabilityMap::new(rows, cols, stride, window, scores)
}

pub fn write_map(map: &ProbabilityMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_map(map)).map_err(|e| Error::io(e, path))
}

pub fn read_map(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(e, path))?;
    decode_map(&bytes)
}
