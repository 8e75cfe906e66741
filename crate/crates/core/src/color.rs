//! RGB to chroma (CrCb) conversion. The luminance channel is computed and
//! discarded so downstream layers see only chroma information.

use crate::error::{Error, Result};

/// Luma weights for the conversion. They must be positive and sum to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorConstants {
    pub kr: f64,
    pub kg: f64,
    pub kb: f64,
}

/// ITU-R BT.601 weights, the conventional choice for YCrCb.
pub const BT601: ColorConstants = ColorConstants {
    kr: 0.299,
    kg: 0.587,
    kb: 0.114,
};

impl ColorConstants {
    pub fn new(kr: f64, kg: f64, kb: f64) -> Result<Self> {
        if kr <= 0.0 || kg <= 0.0 || kb <= 0.0 {
            return Err(Error::Parameter(format!(
                "color constants must be strictly positive, got ({kr}, {kg}, {kb})"
            )));
        }
        if (kr + kg + kb - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "color constants must sum to 1, got {}",
                kr + kg + kb
            )));
        }
        Ok(ColorConstants { kr, kg, kb })
    }
}

/// Color space tag carried by every [`ImageBuffer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    /// 3 channels in [0, 1].
    Rgb,
    /// 2 chroma channels (Cr, Cb) in [-0.5, 0.5].
    CrCb,
    /// 1 channel in [0, 1].
    ScalarMask,
}

/// H x W x C float raster, row-major with the channel axis innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub space: ColorSpace,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        space: ColorSpace,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 || channels > 3 {
            return Err(Error::Shape(format!(
                "image must have 1..=3 channels, got {channels}"
            )));
        }
        let expected = match space {
            ColorSpace::Rgb => 3,
            ColorSpace::CrCb => 2,
            ColorSpace::ScalarMask => 1,
        };
        if channels != expected {
            return Err(Error::Space(format!(
                "{space:?} requires {expected} channels, got {channels}"
            )));
        }
        if height * width * channels != data.len() {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} image expects {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(ImageBuffer {
            height,
            width,
            channels,
            space,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, space: ColorSpace) -> Self {
        let channels = match space {
            ColorSpace::Rgb => 3,
            ColorSpace::CrCb => 2,
            ColorSpace::ScalarMask => 1,
        };
        ImageBuffer::new(height, width, channels, space, vec![0.0; height * width * channels])
            .expect("zeros: valid dims")
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let base = (row * self.width + col) * self.channels;
        &self.data[base..base + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let base = (row * self.width + col) * self.channels;
        &mut self.data[base..base + self.channels]
    }

    /// Copy a rectangular window into a new buffer of the same space.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<ImageBuffer> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Shape(format!(
                "crop {height}x{width}@({top},{left}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(height * width * c);
        for r in 0..height {
            let base = ((top + r) * self.width + left) * c;
            data.extend_from_slice(&self.data[base..base + width * c]);
        }
        ImageBuffer::new(height, width, c, self.space, data)
    }
}

/// Convert an RGB image to its two chroma channels:
///
/// Y  = kr*R + kg*G + kb*B
/// Cr = (R - Y) / (2*(1 - kr))
/// Cb = (B - Y) / (2*(1 - kb))
///
/// The output carries (Cr, Cb) per pixel; Y is discarded. Values are clamped
/// to [-0.5, 0.5], the analytic range for RGB inputs in [0, 1].
pub fn rgb_to_crcb(image: &ImageBuffer, constants: &ColorConstants) -> Result<ImageBuffer> {
    if image.space != ColorSpace::Rgb {
        return Err(Error::Space(format!(
            "rgb_to_crcb requires an RGB input, got {:?}",
            image.space
        )));
    }
    let kr = constants.kr as f32;
    let kg = constants.kg as f32;
    let kb = constants.kb as f32;
    let cr_norm = 1.0 / (2.0 * (1.0 - kr));
    let cb_norm = 1.0 / (2.0 * (1.0 - kb));
    let mut out = Vec::with_capacity(image.height * image.width * 2);
    for px in image.data().chunks_exact(3) {
        let (r, g, b) = (px[0], px[1], px[2]);
        let y = kr * r + kg * g + kb * b;
        out.push(((r - y) * cr_norm).clamp(-0.5, 0.5));
        out.push(((b - y) * cb_norm).clamp(-0.5, 0.5));
    }
    ImageBuffer::new(image.height, image.width, 2, ColorSpace::CrCb, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb1x1(r: f32, g: f32, b: f32) -> ImageBuffer {
        ImageBuffer::new(1, 1, 3, ColorSpace::Rgb, vec![r, g, b]).unwrap()
    }

    #[test]
    fn constants_validate() {
        assert!(ColorConstants::new(0.299, 0.587, 0.114).is_ok());
        assert!(ColorConstants::new(0.3, 0.6, 0.2).is_err());
        assert!(ColorConstants::new(-0.1, 0.9, 0.2).is_err());
    }

    #[test]
    fn gray_pixels_have_zero_chroma() {
        for v in [0.0f32, 0.25, 0.5, 1.0] {
            let out = rgb_to_crcb(&rgb1x1(v, v, v), &BT601).unwrap();
            assert!(out.data()[0].abs() <= 1e-6, "Cr for gray {v}");
            assert!(out.data()[1].abs() <= 1e-6, "Cb for gray {v}");
        }
    }

    #[test]
    fn pure_red_chroma() {
        let out = rgb_to_crcb(&rgb1x1(1.0, 0.0, 0.0), &BT601).unwrap();
        assert!((out.data()[0] - 0.5).abs() <= 1e-6, "Cr {}", out.data()[0]);
        assert!((out.data()[1] - (-0.168_736)).abs() <= 1e-5, "Cb {}", out.data()[1]);
    }

    #[test]
    fn pure_blue_chroma() {
        let out = rgb_to_crcb(&rgb1x1(0.0, 0.0, 1.0), &BT601).unwrap();
        assert!((out.data()[1] - 0.5).abs() <= 1e-6, "Cb {}", out.data()[1]);
        assert!((out.data()[0] - (-0.081_312)).abs() <= 1e-5, "Cr {}", out.data()[0]);
    }

    #[test]
    fn rejects_non_rgb_input() {
        let mask = ImageBuffer::zeros(2, 2, ColorSpace::ScalarMask);
        assert!(matches!(rgb_to_crcb(&mask, &BT601), Err(Error::Space(_))));
    }

    proptest! {
        #[test]
        fn chroma_stays_in_half_unit_box(r in 0.0f32..=1.0, g in 0.0f32..=1.0, b in 0.0f32..=1.0) {
            let out = rgb_to_crcb(&rgb1x1(r, g, b), &BT601).unwrap();
            prop_assert!(out.data()[0] >= -0.5 && out.data()[0] <= 0.5);
            prop_assert!(out.data()[1] >= -0.5 && out.data()[1] <= 0.5);
        }

        #[test]
        fn gray_offset_leaves_chroma_unchanged(
            r in 0.0f32..=0.5, g in 0.0f32..=0.5, b in 0.0f32..=0.5, d in 0.0f32..=0.5
        ) {
            let base = rgb_to_crcb(&rgb1x1(r, g, b), &BT601).unwrap();
            let offset = rgb_to_crcb(&rgb1x1(r + d, g + d, b + d), &BT601).unwrap();
            prop_assert!((base.data()[0] - offset.data()[0]).abs() <= 1e-5);
            prop_assert!((base.data()[1] - offset.data()[1]).abs() <= 1e-5);
        }

        #[test]
        fn conversion_is_linear_under_convex_mix(
            r0 in 0.0f32..=1.0, g0 in 0.0f32..=1.0, b0 in 0.0f32..=1.0,
            r1 in 0.0f32..=1.0, g1 in 0.0f32..=1.0, b1 in 0.0f32..=1.0,
            t in 0.0f32..=1.0
        ) {
            let mix = rgb1x1(
                t * r0 + (1.0 - t) * r1,
                t * g0 + (1.0 - t) * g1,
                t * b0 + (1.0 - t) * b1,
            );
            let a = rgb_to_crcb(&rgb1x1(r0, g0, b0), &BT601).unwrap();
            let b = rgb_to_crcb(&rgb1x1(r1, g1, b1), &BT601).unwrap();
            let m = rgb_to_crcb(&mix, &BT601).unwrap();
            for ch in 0..2 {
                let expect = t * a.data()[ch] + (1.0 - t) * b.data()[ch];
                prop_assert!((m.data()[ch] - expect).abs() <= 1e-5);
            }
        }
    }
}
