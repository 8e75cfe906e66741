//! Boundary-based image forgery localization.
//!
//! A shallow CNN classifies 32x32 patches as forged-boundary vs. original-edge
//! from chroma information alone. Whole images are localized either by
//! exhaustive sliding-window detection or by a shared-feature-map path that
//! runs the convolutions once per image, and the two back ends produce
//! identical probability maps. Post-processing turns a map into bounding
//! boxes that are scored against ground truth with IoU.

pub mod cli;
pub mod color;
pub mod dataset;
pub mod error;
pub mod localize;
pub mod model;
pub mod nn;
pub mod pnm;
pub mod postproc;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
