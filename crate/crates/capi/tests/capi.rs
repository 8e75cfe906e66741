//! Exercises the C ABI through the exported extern "C" functions.

use std::ffi::CString;

use forgescan_capi::{
    fgs_boxes_free, fgs_detect_rgb8, fgs_detector_close, fgs_detector_open, fgs_options_default,
    fgs_probability_map_rgb8, fgs_scores_free, fgs_version, FgsBackend, FgsBox, FgsDetector,
    FgsStatus,
};
use forgescan_core::dataset;
use forgescan_core::model::{init_params, save_params, TrainConfig};
use forgescan_core::rng::Pcg32;

fn weights_file(dir: &std::path::Path) -> CString {
    let params = init_params(&TrainConfig::default(), &mut Pcg32::new(9));
    let path = dir.join("w.scnw");
    save_params(&params, &path).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn rgb8_scene(seed: u64, side: usize) -> Vec<u8> {
    dataset::generate_scene(seed, side, side)
        .data()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect()
}

#[test]
fn version_is_a_nul_terminated_string() {
    let ptr = fgs_version();
    assert!(!ptr.is_null());
    let s = unsafe { std::ffi::CStr::from_ptr(ptr) }.to_str().unwrap();
    assert!(!s.is_empty());
}

#[test]
fn open_detect_close_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = weights_file(dir.path());

    let mut detector: *mut FgsDetector = std::ptr::null_mut();
    let status = unsafe { fgs_detector_open(path.as_ptr(), &mut detector) };
    assert_eq!(status, FgsStatus::Ok);
    assert!(!detector.is_null());

    let pixels = rgb8_scene(4, 64);
    let mut boxes: *mut FgsBox = std::ptr::null_mut();
    let mut count: usize = usize::MAX;
    let opts = fgs_options_default();
    let status = unsafe {
        fgs_detect_rgb8(detector, pixels.as_ptr(), 64, 64, &opts, &mut boxes, &mut count)
    };
    assert_eq!(status, FgsStatus::Ok);
    assert_ne!(count, usize::MAX);
    if count > 0 {
        let slice = unsafe { std::slice::from_raw_parts(boxes, count) };
        for b in slice {
            assert!(b.bottom > b.top && b.right > b.left);
            assert!(b.bottom <= 64 && b.right <= 64);
        }
    }
    unsafe { fgs_boxes_free(boxes, count) };
    unsafe { fgs_detector_close(detector) };
}

#[test]
fn both_backends_agree_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let path = weights_file(dir.path());
    let mut detector: *mut FgsDetector = std::ptr::null_mut();
    assert_eq!(
        unsafe { fgs_detector_open(path.as_ptr(), &mut detector) },
        FgsStatus::Ok
    );

    let pixels = rgb8_scene(12, 72);
    let collect = |backend: FgsBackend| -> Vec<f32> {
        let mut opts = fgs_options_default();
        opts.backend = backend;
        opts.stride = 4;
        let mut scores: *mut f32 = std::ptr::null_mut();
        let (mut rows, mut cols) = (0usize, 0usize);
        let status = unsafe {
            fgs_probability_map_rgb8(
                detector,
                pixels.as_ptr(),
                72,
                72,
                &opts,
                &mut scores,
                &mut rows,
                &mut cols,
            )
        };
        assert_eq!(status, FgsStatus::Ok);
        assert_eq!((rows, cols), (11, 11));
        let v = unsafe { std::slice::from_raw_parts(scores, rows * cols) }.to_vec();
        unsafe { fgs_scores_free(scores, rows * cols) };
        v
    };
    let fast = collect(FgsBackend::Fast);
    let swd = collect(FgsBackend::Swd);
    assert_eq!(fast, swd);
    unsafe { fgs_detector_close(detector) };
}

#[test]
fn status_codes_for_bad_inputs() {
    // Null arguments.
    let mut detector: *mut FgsDetector = std::ptr::null_mut();
    assert_eq!(
        unsafe { fgs_detector_open(std::ptr::null(), &mut detector) },
        FgsStatus::NullArgument
    );

    // Missing weight file.
    let missing = CString::new("/nonexistent/void.scnw").unwrap();
    assert_eq!(
        unsafe { fgs_detector_open(missing.as_ptr(), &mut detector) },
        FgsStatus::Io
    );

    // Malformed weight file.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scnw");
    std::fs::write(&bad, b"garbage").unwrap();
    let bad_c = CString::new(bad.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { fgs_detector_open(bad_c.as_ptr(), &mut detector) },
        FgsStatus::Format
    );

    // Undersized image and invalid options against a real detector.
    let path = weights_file(dir.path());
    assert_eq!(
        unsafe { fgs_detector_open(path.as_ptr(), &mut detector) },
        FgsStatus::Ok
    );
    let pixels = rgb8_scene(1, 16);
    let mut boxes: *mut FgsBox = std::ptr::null_mut();
    let mut count = 0usize;
    assert_eq!(
        unsafe {
            fgs_detect_rgb8(
                detector,
                pixels.as_ptr(),
                16,
                16,
                std::ptr::null(),
                &mut boxes,
                &mut count,
            )
        },
        FgsStatus::Shape
    );
    let pixels = rgb8_scene(1, 64);
    let mut opts = fgs_options_default();
    opts.median_k = 4; // even kernel is invalid
    assert_eq!(
        unsafe {
            fgs_detect_rgb8(detector, pixels.as_ptr(), 64, 64, &opts, &mut boxes, &mut count)
        },
        FgsStatus::Parameter
    );
    unsafe { fgs_detector_close(detector) };

    // Null frees are harmless.
    unsafe {
        fgs_boxes_free(std::ptr::null_mut(), 0);
        fgs_scores_free(std::ptr::null_mut(), 0);
        fgs_detector_close(std::ptr::null_mut());
    }
}
