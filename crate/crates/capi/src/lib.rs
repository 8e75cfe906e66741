//! C ABI for the detector: opaque handles, status codes, caller-owned
//! buffers released through the matching `_free` functions.
//!
//! The generated header lives at `include/forgescan.h`.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use forgescan_core::color::{ColorSpace, ImageBuffer};
use forgescan_core::error::Error;
use forgescan_core::localize::{fast_scnn, swd, DEFAULT_STRIDE};
use forgescan_core::model::{load_params, ScnnParams};
use forgescan_core::postproc::{
    components_to_boxes, median_filter, threshold, DEFAULT_MEDIAN_K, DEFAULT_THRESHOLD,
};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FgsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    Parameter = 2,
    Data = 3,
    Io = 4,
    Format = 5,
    Shape = 6,
    ColorSpace = 7,
    State = 8,
    /// An internal invariant failed; the library state is unspecified.
    Internal = 9,
}

fn status_of(err: &Error) -> FgsStatus {
    match err {
        Error::Parameter(_) => FgsStatus::Parameter,
        Error::Data(_) => FgsStatus::Data,
        Error::Io { .. } => FgsStatus::Io,
        Error::Format { .. } => FgsStatus::Format,
        Error::Shape(_) => FgsStatus::Shape,
        Error::Space(_) => FgsStatus::ColorSpace,
        Error::State(_) => FgsStatus::State,
    }
}

/// Which localization back end to run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FgsBackend {
    /// Exhaustive sliding-window detection.
    Swd = 0,
    /// Shared-feature-map path (identical output, less conv work).
    Fast = 1,
}

/// Detection tuning knobs. Obtain defaults from `fgs_options_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FgsOptions {
    pub backend: FgsBackend,
    /// Window stride in pixels (>= 1).
    pub stride: u32,
    /// Probability-map binarization threshold in (0, 1).
    pub threshold: f32,
    /// Median filter kernel (odd) applied to the binary map.
    pub median_k: u32,
}

/// Axis-aligned pixel rectangle, half-open on bottom/right.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FgsBox {
    pub top: u32,
    pub left: u32,
    pub bottom: u32,
    pub right: u32,
}

/// Opaque handle around loaded network weights.
pub struct FgsDetector {
    params: ScnnParams,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fgs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Default detection options (fast back end, stride 2, threshold 0.5,
/// median kernel 5).
#[no_mangle]
pub extern "C" fn fgs_options_default() -> FgsOptions {
    FgsOptions {
        backend: FgsBackend::Fast,
        stride: DEFAULT_STRIDE as u32,
        threshold: DEFAULT_THRESHOLD,
        median_k: DEFAULT_MEDIAN_K as u32,
    }
}

/// Load SCNW weights from `path` into a new detector.
///
/// On success writes the handle to `out` and returns `FGS_STATUS_OK`.
/// The handle must be released with `fgs_detector_close`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fgs_detector_open(
    path: *const c_char,
    out: *mut *mut FgsDetector,
) -> FgsStatus {
    if path.is_null() || out.is_null() {
        return FgsStatus::NullArgument;
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        let path = PathBuf::from(CStr::from_ptr(path).to_string_lossy().into_owned());
        match load_params(&path) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(FgsDetector { params }));
                FgsStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    }));
    result.unwrap_or(FgsStatus::Internal)
}

/// Release a detector handle. Passing null is a no-op.
///
/// # Safety
/// `detector` must come from `fgs_detector_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fgs_detector_close(detector: *mut FgsDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

fn image_from_rgb8(pixels: &[u8], height: usize, width: usize) -> Result<ImageBuffer, Error> {
    let data = pixels.iter().map(|&b| b as f32 / 255.0).collect();
    ImageBuffer::new(height, width, 3, ColorSpace::Rgb, data)
}

unsafe fn detect_impl(
    detector: *const FgsDetector,
    pixels: *const u8,
    height: u32,
    width: u32,
    options: *const FgsOptions,
    out_boxes: *mut *mut FgsBox,
    out_count: *mut usize,
) -> Result<(), FgsStatus> {
    if detector.is_null() || pixels.is_null() || out_boxes.is_null() || out_count.is_null() {
        return Err(FgsStatus::NullArgument);
    }
    let opts = if options.is_null() {
        fgs_options_default()
    } else {
        *options
    };
    let (h, w) = (height as usize, width as usize);
    let raw = std::slice::from_raw_parts(pixels, h * w * 3);
    let image = image_from_rgb8(raw, h, w).map_err(|e| status_of(&e))?;

    let detector = &*detector;
    let map = match opts.backend {
        FgsBackend::Swd => swd(&detector.params, &image, opts.stride as usize),
        FgsBackend::Fast => fast_scnn(&detector.params, &image, opts.stride as usize),
    }
    .map_err(|e| status_of(&e))?;
    let binary = median_filter(&threshold(&map, opts.threshold), opts.median_k as usize)
        .map_err(|e| status_of(&e))?;
    let boxes = components_to_boxes(&binary);

    let mut ffi_boxes: Vec<FgsBox> = boxes
        .iter()
        .map(|b| FgsBox {
            top: b.top as u32,
            left: b.left as u32,
            bottom: b.bottom as u32,
            right: b.right as u32,
        })
        .collect();
    ffi_boxes.shrink_to_fit();
    *out_count = ffi_boxes.len();
    if ffi_boxes.is_empty() {
        *out_boxes = std::ptr::null_mut();
    } else {
        let mut boxed = ffi_boxes.into_boxed_slice();
        *out_boxes = boxed.as_mut_ptr();
        std::mem::forget(boxed);
    }
    Ok(())
}

/// Localize forged regions in an 8-bit interleaved RGB image (row-major,
/// `height * width * 3` bytes). On success `*out_boxes` points to
/// `*out_count` boxes owned by the library; release them with
/// `fgs_boxes_free`. `options` may be null for defaults.
///
/// # Safety
/// `detector` must be a live handle, `pixels` must reference at least
/// `height * width * 3` readable bytes, and the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fgs_detect_rgb8(
    detector: *const FgsDetector,
    pixels: *const u8,
    height: u32,
    width: u32,
    options: *const FgsOptions,
    out_boxes: *mut *mut FgsBox,
    out_count: *mut usize,
) -> FgsStatus {
    let result = catch_unwind(AssertUnwindSafe(|| {
        match detect_impl(detector, pixels, height, width, options, out_boxes, out_count) {
            Ok(()) => FgsStatus::Ok,
            Err(status) => status,
        }
    }));
    result.unwrap_or(FgsStatus::Internal)
}

/// Release a box array returned by `fgs_detect_rgb8`. Passing null is a no-op.
///
/// # Safety
/// `boxes`/`count` must match a previous successful `fgs_detect_rgb8` call.
#[no_mangle]
pub unsafe extern "C" fn fgs_boxes_free(boxes: *mut FgsBox, count: usize) {
    if !boxes.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(boxes, count)));
    }
}

/// Compute the raw probability map for an RGB8 image. On success
/// `*out_scores` holds `*out_rows * *out_cols` row-major scores owned by the
/// library; release with `fgs_scores_free`. `options` may be null; only its
/// backend and stride are used.
///
/// # Safety
/// Same contract as [`fgs_detect_rgb8`].
#[no_mangle]
pub unsafe extern "C" fn fgs_probability_map_rgb8(
    detector: *const FgsDetector,
    pixels: *const u8,
    height: u32,
    width: u32,
    options: *const FgsOptions,
    out_scores: *mut *mut f32,
    out_rows: *mut usize,
    out_cols: *mut usize,
) -> FgsStatus {
    let result = catch_unwind(AssertUnwindSafe(|| {
        if detector.is_null()
            || pixels.is_null()
            || out_scores.is_null()
            || out_rows.is_null()
            || out_cols.is_null()
        {
            return FgsStatus::NullArgument;
        }
        let opts = if options.is_null() {
            fgs_options_default()
        } else {
            *options
        };
        let (h, w) = (height as usize, width as usize);
        let raw = std::slice::from_raw_parts(pixels, h * w * 3);
        let image = match image_from_rgb8(raw, h, w) {
            Ok(i) => i,
            Err(e) => return status_of(&e),
        };
        let detector = &*detector;
        let map = match opts.backend {
            FgsBackend::Swd => swd(&detector.params, &image, opts.stride as usize),
            FgsBackend::Fast => fast_scnn(&detector.params, &image, opts.stride as usize),
        };
        match map {
            Ok(map) => {
                *out_rows = map.rows;
                *out_cols = map.cols;
                let mut scores = map.scores().to_vec().into_boxed_slice();
                *out_scores = scores.as_mut_ptr();
                std::mem::forget(scores);
                FgsStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    }));
    result.unwrap_or(FgsStatus::Internal)
}

/// Release a score array returned by `fgs_probability_map_rgb8`.
///
/// # Safety
/// `scores`/`len` must match a previous successful call (`len = rows * cols`).
#[no_mangle]
pub unsafe extern "C" fn fgs_scores_free(scores: *mut f32, len: usize) {
    if !scores.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(scores, len)));
    }
}
