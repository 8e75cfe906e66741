//! Binary PPM (P6) and PGM (P5) readers and writers.
//!
//! Only 8-bit rasters (maxval 255) are supported; pixel values map to [0, 1]
//! by dividing by 255. Malformed headers and truncated payloads report the
//! byte offset of the failure.

use std::fs;
use std::path::Path;

use crate::color::{ColorSpace, ImageBuffer};
use crate::error::{Error, Result};

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderParser { bytes, pos: 0 }
    }

    /// Skip whitespace and `#` comments (comments run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn read_number(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format_at(format!("expected {what}"), start as u64));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("digits are utf8");
        text.parse::<usize>()
            .map_err(|_| Error::format_at(format!("{what} out of range"), start as u64))
    }

    /// Exactly one whitespace byte separates the header from the payload.
    fn expect_single_whitespace(&mut self) -> Result<()> {
        match self.bytes.get(self.pos) {
            Some(b' ' | b'\t' | b'\r' | b'\n') => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::format_at(
                "expected single whitespace before pixel data",
                self.pos as u64,
            )),
        }
    }
}

fn parse_pnm(bytes: &[u8], magic: &[u8; 2], channels: usize) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::format_at(
            format!("bad magic, expected {}", std::str::from_utf8(magic).unwrap()),
            0,
        ));
    }
    let mut parser = HeaderParser::new(bytes);
    parser.pos = 2;
    let width = parser.read_number("width")?;
    let height = parser.read_number("height")?;
    let maxval = parser.read_number("maxval")?;
    if maxval != 255 {
        return Err(Error::format_at(
            format!("only maxval 255 is supported, got {maxval}"),
            (parser.pos - 1) as u64,
        ));
    }
    parser.expect_single_whitespace()?;
    let expected = height * width * channels;
    let payload = &bytes[parser.pos..];
    if payload.len() < expected {
        return Err(Error::format_at(
            format!(
                "truncated payload: expected {expected} bytes, found {}",
                payload.len()
            ),
            bytes.len() as u64,
        ));
    }
    let data = payload[..expected].iter().map(|&b| b as f32 / 255.0).collect();
    Ok((height, width, data))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    let (height, width, data) = parse_pnm(bytes, b"P6", 3)?;
    ImageBuffer::new(height, width, 3, ColorSpace::Rgb, data)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImageBuffer> {
    let (height, width, data) = parse_pnm(bytes, b"P5", 1)?;
    ImageBuffer::new(height, width, 1, ColorSpace::ScalarMask, data)
}

pub fn encode_ppm(image: &ImageBuffer) -> Result<Vec<u8>> {
    if image.space != ColorSpace::Rgb {
        return Err(Error::Space(format!(
            "PPM encoding requires an RGB image, got {:?}",
            image.space
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

pub fn encode_pgm(image: &ImageBuffer) -> Result<Vec<u8>> {
    if image.channels != 1 {
        return Err(Error::Space(format!(
            "PGM encoding requires a single-channel image, got {} channels",
            image.channels
        )));
    }
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(e, path))?;
    match bytes.get(..2) {
        Some(b"P6") => decode_ppm(&bytes),
        Some(b"P5") => decode_pgm(&bytes),
        _ => Err(Error::format_at("not a P6/P5 netpbm file", 0)),
    }
}

pub fn write_image(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match image.channels {
        3 => encode_ppm(image)?,
        1 => encode_pgm(image)?,
        c => {
            return Err(Error::Space(format!(
                "no netpbm encoding for {c}-channel images"
            )))
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(e, path))
}
