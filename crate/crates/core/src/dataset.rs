//! Training-set construction: ground-truth masks from image pairs, boundary /
//! normal patch extraction, and a synthetic splice generator that produces
//! tampered images with exact masks.

use std::fs;
use std::path::Path;

use crate::color::{ColorSpace, ImageBuffer};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Pcg32};

/// Patch geometry: 32x32 windows, stride 10 while building the training set.
pub const PATCH_WINDOW: usize = 32;
pub const PATCH_STRIDE: usize = 10;

/// Boundary-patch band: tampered fraction strictly between these bounds.
pub const BOUNDARY_MIN_FRACTION: f64 = 0.35;
pub const BOUNDARY_MAX_FRACTION: f64 = 0.65;

/// Default threshold for mask derivation by image differencing (8/255 absorbs
/// quantization noise from 8-bit round trips).
pub const DEFAULT_DIFF_TAU: f32 = 8.0 / 255.0;

/// Synthetic corpus defaults.
pub const DEFAULT_CORPUS_COUNT: usize = 64;
pub const DEFAULT_IMAGE_SIZE: usize = 128;
pub const DEFAULT_CHROMA_SHIFT: f32 = 0.08;
pub const DEFAULT_BLUR_RADIUS: usize = 1;

/// Default per-class cap and validation fraction for [`balance_and_split`].
pub const DEFAULT_MAX_PER_CLASS: usize = 700;
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;

/// Binary per-pixel tamper mask (1 = tampered).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthMask {
    pub height: usize,
    pub width: usize,
    bits: Vec<bool>,
}

impl GroundTruthMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape(format!(
                "mask {height}x{width} expects {} bits, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(GroundTruthMask { height, width, bits })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        GroundTruthMask {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Tampered-pixel count inside a window anchored at (top, left).
    pub fn window_count(&self, top: usize, left: usize, window: usize) -> usize {
        let mut n = 0;
        for r in top..top + window {
            let row = &self.bits[r * self.width + left..r * self.width + left + window];
            n += row.iter().filter(|&&b| b).count();
        }
        n
    }

    /// 0/255 single-channel raster for PGM storage.
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::new(
            self.height,
            self.width,
            1,
            ColorSpace::ScalarMask,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask dims are consistent")
    }

    pub fn from_image(image: &ImageBuffer) -> Result<Self> {
        if image.channels != 1 {
            return Err(Error::Space(format!(
                "mask image must be single-channel, got {} channels",
                image.channels
            )));
        }
        GroundTruthMask::new(
            image.height,
            image.width,
            image.data().iter().map(|&v| v >= 0.5).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchLabel {
    Boundary,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchOrigin {
    pub image_id: u32,
    pub top: usize,
    pub left: usize,
}

/// A 32x32 RGB patch with its label and provenance.
#[derive(Clone, Debug)]
pub struct PatchRecord {
    pub pixels: ImageBuffer,
    pub label: PatchLabel,
    pub origin: PatchOrigin,
}

impl PatchRecord {
    pub fn new(pixels: ImageBuffer, label: PatchLabel, origin: PatchOrigin) -> Result<Self> {
        if pixels.height != PATCH_WINDOW || pixels.width != PATCH_WINDOW || pixels.channels != 3 {
            return Err(Error::Shape(format!(
                "patch must be {PATCH_WINDOW}x{PATCH_WINDOW}x3, got {}x{}x{}",
                pixels.height, pixels.width, pixels.channels
            )));
        }
        Ok(PatchRecord { pixels, label, origin })
    }
}

/// Region geometry pasted by the splice generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionShape {
    Rect { height: usize, width: usize },
    Ellipse { height: usize, width: usize },
}

impl RegionShape {
    pub fn extent(&self) -> (usize, usize) {
        match *self {
            RegionShape::Rect { height, width } | RegionShape::Ellipse { height, width } => {
                (height, width)
            }
        }
    }

    /// Membership test for the pixel at (row, col) given the region's
    /// top-left placement. Ellipses are inscribed in their bounding box and
    /// sampled at pixel centers.
    fn contains(&self, offset: (usize, usize), row: usize, col: usize) -> bool {
        let (top, left) = offset;
        match *self {
            RegionShape::Rect { height, width } => {
                row >= top && row < top + height && col >= left && col < left + width
            }
            RegionShape::Ellipse { height, width } => {
                if row < top || row >= top + height || col < left || col >= left + width {
                    return false;
                }
                let ry = height as f64 / 2.0;
                let rx = width as f64 / 2.0;
                let dy = (row as f64 + 0.5 - (top as f64 + ry)) / ry;
                let dx = (col as f64 + 0.5 - (left as f64 + rx)) / rx;
                dy * dy + dx * dx <= 1.0
            }
        }
    }
}

/// Everything needed to reproduce one synthetic splice.
#[derive(Clone, Copy, Debug)]
pub struct ForgerySpec {
    /// Seed the host image was generated from (provenance, recorded in manifests).
    pub host_seed: u64,
    pub shape: RegionShape,
    /// Top-left placement of the donor region, in host coordinates.
    pub offset: (usize, usize),
    pub chroma_shift: f32,
    pub blur_radius: usize,
    /// Seed driving the generator's own random choices (shift direction).
    pub seed: u64,
}

// BT.601 weights, fixed for the generator's internal round trip.
const KR: f32 = 0.299;
const KG: f32 = 0.587;
const KB: f32 = 0.114;

#[inline]
fn rgb_to_ycrcb(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let y = KR * r + KG * g + KB * b;
    let cr = (r - y) / (2.0 * (1.0 - KR));
    let cb = (b - y) / (2.0 * (1.0 - KB));
    (y, cr, cb)
}

#[inline]
fn ycrcb_to_rgb(y: f32, cr: f32, cb: f32) -> (f32, f32, f32) {
    let r = y + 2.0 * (1.0 - KR) * cr;
    let b = y + 2.0 * (1.0 - KB) * cb;
    let g = (y - KR * r - KB * b) / KG;
    (r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0))
}

/// Ground-truth mask from a tampered/original pair: a pixel is tampered when
/// any channel differs by more than `tau`, followed by an isolated-speckle
/// cleanup pass over the 3x3 neighborhood.
pub fn diff_mask(tampered: &ImageBuffer, original: &ImageBuffer, tau: f32) -> Result<GroundTruthMask> {
    if tampered.height != original.height
        || tampered.width != original.width
        || tampered.channels != original.channels
    {
        return Err(Error::Shape(format!(
            "diff_mask: {}x{}x{} vs {}x{}x{}",
            tampered.height,
            tampered.width,
            tampered.channels,
            original.height,
            original.width,
            original.channels
        )));
    }
    let (h, w, c) = (tampered.height, tampered.width, tampered.channels);
    let mut raw = vec![false; h * w];
    for (i, flag) in raw.iter_mut().enumerate() {
        let a = &tampered.data()[i * c..(i + 1) * c];
        let b = &original.data()[i * c..(i + 1) * c];
        *flag = a.iter().zip(b).any(|(&x, &y)| (x - y).abs() > tau);
    }

    // Cleanup: a set pixel with no set 8-neighbor is a speckle and is cleared.
    // A full 3x3 majority vote would also erode the corners of solid regions,
    // so only genuinely isolated pixels are removed.
    let mut bits = raw.clone();
    for r in 0..h {
        for cidx in 0..w {
            if !raw[r * w + cidx] {
                continue;
            }
            let mut neighbors = 0;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let nr = r as isize + dr;
                    let nc = cidx as isize + dc;
                    if nr >= 0
                        && nr < h as isize
                        && nc >= 0
                        && nc < w as isize
                        && raw[nr as usize * w + nc as usize]
                    {
                        neighbors += 1;
                    }
                }
            }
            if neighbors == 0 {
                bits[r * w + cidx] = false;
            }
        }
    }
    GroundTruthMask::new(h, w, bits)
}

/// Slide a 32x32 window with the given stride over the image, labelling each
/// window by its tampered fraction f: boundary when 0.35 < f < 0.65 (strict),
/// normal when f == 0, discarded otherwise.
pub fn extract_patches(
    image: &ImageBuffer,
    mask: &GroundTruthMask,
    stride: usize,
    image_id: u32,
) -> Result<Vec<PatchRecord>> {
    if image.space != ColorSpace::Rgb {
        return Err(Error::Space(format!(
            "extract_patches requires an RGB image, got {:?}",
            image.space
        )));
    }
    if image.height != mask.height || image.width != mask.width {
        return Err(Error::Shape(format!(
            "image {}x{} vs mask {}x{}",
            image.height, image.width, mask.height, mask.width
        )));
    }
    if stride == 0 {
        return Err(Error::Parameter("stride must be >= 1".into()));
    }
    let mut records = Vec::new();
    if image.height < PATCH_WINDOW || image.width < PATCH_WINDOW {
        return Ok(records);
    }
    let area = (PATCH_WINDOW * PATCH_WINDOW) as u64;
    let mut top = 0;
    while top + PATCH_WINDOW <= image.height {
        let mut left = 0;
        while left + PATCH_WINDOW <= image.width {
            let count = mask.window_count(top, left, PATCH_WINDOW) as u64;
            // Strict 35% / 65% band in exact integer arithmetic:
            // 0.35 = 7/20 and 0.65 = 13/20.
            let label = if count == 0 {
                Some(PatchLabel::Normal)
            } else if count * 20 > 7 * area && count * 20 < 13 * area {
                Some(PatchLabel::Boundary)
            } else {
                None
            };
            if let Some(label) = label {
                let pixels = image.crop(top, left, PATCH_WINDOW, PATCH_WINDOW)?;
                records.push(PatchRecord::new(
                    pixels,
                    label,
                    PatchOrigin { image_id, top, left },
                )?);
            }
            left += stride;
        }
        top += stride;
    }
    Ok(records)
}

/// Paste the donor region into the host, shift the pasted pixels' chroma,
/// optionally blur a 2-pixel band around the region boundary, and return the
/// composite together with its exact mask. Deterministic given the spec.
pub fn synthesize_forgery(
    host: &ImageBuffer,
    donor: &ImageBuffer,
    spec: &ForgerySpec,
) -> Result<(ImageBuffer, GroundTruthMask)> {
    if host.space != ColorSpace::Rgb || donor.space != ColorSpace::Rgb {
        return Err(Error::Space("synthesize_forgery requires RGB images".into()));
    }
    let (h, w) = (host.height, host.width);
    let (rh, rw) = spec.shape.extent();
    let (top, left) = spec.offset;
    if top + rh > h || left + rw > w || top + rh > donor.height || left + rw > donor.width {
        return Err(Error::Parameter(format!(
            "region {rh}x{rw}@({top},{left}) does not fit in {h}x{w} host and {}x{} donor",
            donor.height, donor.width
        )));
    }

    let mut rng = Pcg32::new(spec.seed);
    let angle = rng.next_f32() * std::f32::consts::TAU;
    let (shift_cr, shift_cb) = (spec.chroma_shift * angle.cos(), spec.chroma_shift * angle.sin());

    let mut mask = GroundTruthMask::zeros(h, w);
    let mut composite = host.clone();
    for r in top..top + rh {
        for c in left..left + rw {
            if !spec.shape.contains(spec.offset, r, c) {
                continue;
            }
            mask.set(r, c, true);
            let px = donor.pixel(r, c);
            // Zero shift copies donor bytes untouched (no round trip noise).
            let value = if spec.chroma_shift == 0.0 {
                [px[0], px[1], px[2]]
            } else {
                let (y, cr, cb) = rgb_to_ycrcb(px[0], px[1], px[2]);
                let (nr, ng, nb) = ycrcb_to_rgb(y, cr + shift_cr, cb + shift_cb);
                [nr, ng, nb]
            };
            composite.pixel_mut(r, c).copy_from_slice(&value);
        }
    }

    if spec.blur_radius > 0 {
        blur_boundary_band(&mut composite, &mask, spec.blur_radius);
    }

    Ok((composite, mask))
}

/// Box-blur (radius `radius`) applied only to pixels within Chebyshev
/// distance 2 of the region boundary. Reads from a snapshot so the result is
/// order-independent.
fn blur_boundary_band(image: &mut ImageBuffer, mask: &GroundTruthMask, radius: usize) {
    let (h, w) = (image.height, image.width);
    let snapshot = image.clone();
    let band = 2i64;
    let radius = radius as i64;
    for r in 0..h {
        for c in 0..w {
            let inside = mask.get(r, c);
            let mut mixed = false;
            'scan: for dr in -band..=band {
                for dc in -band..=band {
                    let nr = r as i64 + dr;
                    let nc = c as i64 + dc;
                    if nr < 0 || nr >= h as i64 || nc < 0 || nc >= w as i64 {
                        continue;
                    }
                    if mask.get(nr as usize, nc as usize) != inside {
                        mixed = true;
                        break 'scan;
                    }
                }
            }
            if !mixed {
                continue;
            }
            let mut acc = [0.0f32; 3];
            let mut n = 0.0f32;
            for dr in -radius..=radius {
                for dc in -radius..=radius {
                    let nr = r as i64 + dr;
                    let nc = c as i64 + dc;
                    if nr < 0 || nr >= h as i64 || nc < 0 || nc >= w as i64 {
                        continue;
                    }
                    let px = snapshot.pixel(nr as usize, nc as usize);
                    acc[0] += px[0];
                    acc[1] += px[1];
                    acc[2] += px[2];
                    n += 1.0;
                }
            }
            let out = image.pixel_mut(r, c);
            out[0] = acc[0] / n;
            out[1] = acc[1] / n;
            out[2] = acc[2] / n;
        }
    }
}

/// Cap each class at `max_per_class` by seeded subsampling, then split off a
/// validation fraction with class proportions preserved within one record.
pub fn balance_and_split(
    records: Vec<PatchRecord>,
    max_per_class: usize,
    val_fraction: f64,
    rng: &mut Pcg32,
) -> Result<(Vec<PatchRecord>, Vec<PatchRecord>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Parameter(format!(
            "val fraction must be in [0, 1), got {val_fraction}"
        )));
    }
    let mut normal = Vec::new();
    let mut boundary = Vec::new();
    for rec in records {
        match rec.label {
            PatchLabel::Normal => normal.push(rec),
            PatchLabel::Boundary => boundary.push(rec),
        }
    }
    if normal.is_empty() || boundary.is_empty() {
        return Err(Error::Data(format!(
            "both classes required: {} normal, {} boundary",
            normal.len(),
            boundary.len()
        )));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [&mut normal, &mut boundary] {
        rng.shuffle(class);
        class.truncate(max_per_class);
        let n_val = (class.len() as f64 * val_fraction).round() as usize;
        let n_val = n_val.min(class.len().saturating_sub(1));
        val.extend(class.drain(..n_val));
        train.append(class);
    }
    Ok((train, val))
}

// ---------------------------------------------------------------------------
// Synthetic scene generation
// ---------------------------------------------------------------------------

struct SceneShape {
    shape: RegionShape,
    offset: (usize, usize),
    luma_delta: f32,
}

/// Generate a synthetic photograph stand-in: a smoothly varying chroma field
/// with sharp luminance-only shapes on top. Original edges therefore carry no
/// chroma contrast, while spliced boundaries do — the signal the detector is
/// trained on.
pub fn generate_scene(seed: u64, height: usize, width: usize) -> ImageBuffer {
    let mut rng = Pcg32::new(seed);
    let dim = height.min(width) as f32;

    // Low-frequency sinusoid parameters: (row freq, col freq, phase, amplitude).
    let field = |rng: &mut Pcg32, lo_f: f32, hi_f: f32, amp_lo: f32, amp_hi: f32| {
        (
            rng.range_f32(lo_f, hi_f) / dim,
            rng.range_f32(lo_f, hi_f) / dim,
            rng.range_f32(0.0, std::f32::consts::TAU),
            rng.range_f32(amp_lo, amp_hi),
        )
    };
    let luma1 = field(&mut rng, 0.4, 1.4, 0.05, 0.10);
    let luma2 = field(&mut rng, 0.4, 1.4, 0.03, 0.06);
    // Chroma varies slowly and gently; scene identity lives mostly in the
    // constant bias. Splice boundaries then show up as clean chroma steps
    // while pasted interiors stay flat, inside the bias range that normal
    // patches cover during training (donor bias plus the largest shift is
    // still within host bias + field amplitude).
    let cr_field = field(&mut rng, 0.3, 0.9, 0.04, 0.08);
    let cb_field = field(&mut rng, 0.3, 0.9, 0.03, 0.06);
    let dc_cr = rng.range_f32(-0.12, 0.12);
    let dc_cb = rng.range_f32(-0.07, 0.07);
    let base_luma = rng.range_f32(0.47, 0.53);

    let n_shapes = 3 + rng.below(4);
    let shapes: Vec<SceneShape> = (0..n_shapes)
        .map(|_| {
            let sh = rng.range_usize((0.10 * dim) as usize, (0.35 * dim) as usize);
            let sw = rng.range_usize((0.10 * dim) as usize, (0.35 * dim) as usize);
            let top = rng.below(height - sh);
            let left = rng.below(width - sw);
            let shape = if rng.next_f32() < 0.5 {
                RegionShape::Rect { height: sh, width: sw }
            } else {
                RegionShape::Ellipse { height: sh, width: sw }
            };
            let magnitude = rng.range_f32(0.10, 0.22);
            let luma_delta = if rng.next_f32() < 0.5 { magnitude } else { -magnitude };
            SceneShape { shape, offset: (top, left), luma_delta }
        })
        .collect();

    let eval = |p: (f32, f32, f32, f32), r: usize, c: usize| -> f32 {
        let (fr, fc, phase, amp) = p;
        amp * (std::f32::consts::TAU * (fr * r as f32 + fc * c as f32) + phase).sin()
    };

    let mut data = Vec::with_capacity(height * width * 3);
    for r in 0..height {
        for c in 0..width {
            let mut y = base_luma + eval(luma1, r, c) + eval(luma2, r, c);
            for s in &shapes {
                if s.shape.contains(s.offset, r, c) {
                    y += s.luma_delta;
                }
            }
            // Luma in [0.39, 0.61] with |cr| <= 0.28 and |cb| <= 0.21
            // (bias + field amplitude + the largest splice shift) keeps every
            // RGB channel inside [0, 1], so shape edges never leak into the
            // chroma channels through clamping.
            let y = y.clamp(0.39, 0.61);
            let cr = dc_cr + eval(cr_field, r, c);
            let cb = dc_cb + eval(cb_field, r, c);
            let (pr, pg, pb) = ycrcb_to_rgb(y, cr, cb);
            data.extend_from_slice(&[pr, pg, pb]);
        }
    }
    ImageBuffer::new(height, width, 3, ColorSpace::Rgb, data).expect("scene dims")
}

/// Pick the splice geometry for image `image_id` of a corpus. Most splices
/// are corner blocks (background-replacement analogue: two sides flush with
/// the image border, two sides visible as forged boundaries), plus a share
/// of large near-full-frame pastes and small free-floating objects.
pub fn plan_forgery(
    master_seed: u64,
    image_id: u32,
    height: usize,
    width: usize,
    chroma_shift: f32,
    blur_radius: usize,
) -> ForgerySpec {
    let host_seed = derive_seed(master_seed, image_id as u64 * 3);
    let seed = derive_seed(master_seed, image_id as u64 * 3 + 2);
    let mut rng = Pcg32::new(derive_seed(master_seed, image_id as u64 * 3 + 1));
    let style = rng.next_f32();
    let frac = |rng: &mut Pcg32, lo: f32, hi: f32, dim: usize| -> usize {
        (rng.range_f32(lo, hi) * dim as f32) as usize
    };
    let (shape, offset) = if style < 0.65 {
        // Corner block flush with two image borders. Extents are kept large
        // enough that the block covers over half the frame area.
        let rh = frac(&mut rng, 0.74, 0.84, height);
        let rw = frac(&mut rng, 0.74, 0.84, width);
        let corner = rng.below(4);
        let top = if corner < 2 { 0 } else { height - rh };
        let left = if corner.is_multiple_of(2) { 0 } else { width - rw };
        (RegionShape::Rect { height: rh, width: rw }, (top, left))
    } else if style < 0.85 {
        // Large interior paste covering most of the frame, kept at least 12
        // pixels away from every border so all four boundaries are visible
        // to 32x32 windows at the patch-band overlap.
        let rh = frac(&mut rng, 0.74, 0.81, height);
        let rw = frac(&mut rng, 0.74, 0.81, width);
        let top = 12 + rng.below(height - rh - 23);
        let left = 12 + rng.below(width - rw - 23);
        (RegionShape::Rect { height: rh, width: rw }, (top, left))
    } else {
        // Small free-floating object splice.
        let rh = frac(&mut rng, 0.28, 0.46, height);
        let rw = frac(&mut rng, 0.28, 0.46, width);
        let top = rng.below(height - rh);
        let left = rng.below(width - rw);
        let shape = if rng.next_f32() < 0.5 {
            RegionShape::Rect { height: rh, width: rw }
        } else {
            RegionShape::Ellipse { height: rh, width: rw }
        };
        (shape, (top, left))
    };
    ForgerySpec {
        host_seed,
        shape,
        offset,
        chroma_shift,
        blur_radius,
        seed,
    }
}

/// Seed for the donor scene paired with a forgery spec.
pub fn donor_seed(spec: &ForgerySpec) -> u64 {
    derive_seed(spec.seed, 0xD0)
}

// ---------------------------------------------------------------------------
// FPD1 corpus file format
// ---------------------------------------------------------------------------

const FPD1_MAGIC: &[u8; 4] = b"FPD1";
const PATCH_BYTES: usize = PATCH_WINDOW * PATCH_WINDOW * 3;

/// Write a patch corpus: magic "FPD1", little-endian u32 record count, then
/// per record a label byte (1 = boundary), u32 image id, u16 top row, u16
/// left col, and 3072 bytes of 8-bit RGB.
pub fn save_corpus(records: &[PatchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(8 + records.len() * (9 + PATCH_BYTES));
    out.extend_from_slice(FPD1_MAGIC);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for rec in records {
        if rec.origin.top > u16::MAX as usize || rec.origin.left > u16::MAX as usize {
            return Err(Error::format(format!(
                "patch origin ({}, {}) exceeds the u16 range of the corpus format",
                rec.origin.top, rec.origin.left
            )));
        }
        out.push(match rec.label {
            PatchLabel::Boundary => 1,
            PatchLabel::Normal => 0,
        });
        out.extend_from_slice(&rec.origin.image_id.to_le_bytes());
        out.extend_from_slice(&(rec.origin.top as u16).to_le_bytes());
        out.extend_from_slice(&(rec.origin.left as u16).to_le_bytes());
        out.extend(
            rec.pixels
                .data()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    fs::write(path, out).map_err(|e| Error::io(e, path))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<PatchRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(e, path))?;
    if bytes.len() < 8 || &bytes[..4] != FPD1_MAGIC {
        return Err(Error::format_at("bad FPD1 magic", 0));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let record_size = 9 + PATCH_BYTES;
    let expected = 8 + count * record_size;
    if bytes.len() != expected {
        return Err(Error::format_at(
            format!(
                "expected {expected} bytes for {count} records, found {}",
                bytes.len()
            ),
            bytes.len() as u64,
        ));
    }
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let base = 8 + i * record_size;
        let label = match bytes[base] {
            0 => PatchLabel::Normal,
            1 => PatchLabel::Boundary,
            other => {
                return Err(Error::format_at(
                    format!("invalid label byte {other}"),
                    base as u64,
                ))
            }
        };
        let image_id = u32::from_le_bytes(bytes[base + 1..base + 5].try_into().unwrap());
        let top = u16::from_le_bytes(bytes[base + 5..base + 7].try_into().unwrap()) as usize;
        let left = u16::from_le_bytes(bytes[base + 7..base + 9].try_into().unwrap()) as usize;
        let pixels: Vec<f32> = bytes[base + 9..base + 9 + PATCH_BYTES]
            .iter()
            .map(|&b| b as f32 / 255.0)
            .collect();
        records.push(PatchRecord::new(
            ImageBuffer::new(PATCH_WINDOW, PATCH_WINDOW, 3, ColorSpace::Rgb, pixels)?,
            label,
            PatchOrigin { image_id, top, left },
        )?);
    }
    Ok(records)
}
