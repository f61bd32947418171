//! Netpbm persistence: binary PGM (`P5`) for images and masks, plain PBM
//! (`P1`) for masks.

use std::fs;
use std::path::Path;

use crate::error::{Result, ShapeError};
use crate::mask::BinaryMask;

/// Grayscale intensity grid with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

fn bad(detail: impl Into<String>) -> ShapeError {
    ShapeError::Format {
        what: "netpbm file",
        detail: detail.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("expected a number at byte {start}")))
    }
}

/// Parsed raster: dimensions plus raw samples and their maximum value.
struct Raster {
    width: usize,
    height: usize,
    maxval: usize,
    samples: Vec<u16>,
    bitmap: bool,
}

fn parse(bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(bad("missing magic number"));
    }
    let kind = bytes[1];
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    let n = width * height;
    match kind {
        b'1' => {
            let mut samples = Vec::with_capacity(n);
            while samples.len() < n {
                h.skip_space();
                match bytes.get(h.pos) {
                    Some(b'0') => samples.push(0),
                    Some(b'1') => samples.push(1),
                    Some(&b) => return Err(bad(format!("unexpected byte {b:#x} in bitmap"))),
                    None => return Err(bad("truncated bitmap")),
                }
                h.pos += 1;
            }
            Ok(Raster {
                width,
                height,
                maxval: 1,
                samples,
                bitmap: true,
            })
        }
        b'5' => {
            let maxval = h.number()?;
            if maxval == 0 || maxval > 255 {
                return Err(bad(format!("unsupported maxval {maxval}")));
            }
            // exactly one whitespace byte separates the header from the data
            let data = bytes
                .get(h.pos + 1..h.pos + 1 + n)
                .ok_or_else(|| bad("truncated raster"))?;
            Ok(Raster {
                width,
                height,
                maxval,
                samples: data.iter().map(|&b| b as u16).collect(),
                bitmap: false,
            })
        }
        other => Err(bad(format!("unsupported format P{}", other as char))),
    }
}

/// Reads a mask from `P1` (1 = foreground) or `P5` (any nonzero = foreground).
pub fn parse_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let r = parse(bytes)?;
    BinaryMask::new(
        r.width,
        r.height,
        r.samples.iter().map(|&s| (s != 0) as u8).collect(),
    )
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    parse_mask(&fs::read(path)?)
}

/// Plain PBM (`P1`) text.
pub fn encode_pbm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P1\n{} {}\n", mask.width(), mask.height()).into_bytes();
    for r in 0..mask.height() {
        let row: Vec<&str> = (0..mask.width())
            .map(|c| if mask.get(r, c) { "1" } else { "0" })
            .collect();
        out.extend_from_slice(row.join(" ").as_bytes());
        out.push(b'\n');
    }
    out
}

pub fn write_pbm(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    Ok(fs::write(path, encode_pbm(mask))?)
}

fn encode_p5(width: usize, height: usize, data: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(data);
    out
}

/// Binary PGM of a mask: foreground 255, background 0.
pub fn encode_mask_pgm(mask: &BinaryMask) -> Vec<u8> {
    encode_p5(
        mask.width(),
        mask.height(),
        mask.data().iter().map(|&v| v * 255),
    )
}

pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    Ok(fs::write(path, encode_mask_pgm(mask))?)
}

/// Binary PGM of an image, quantised to 8 bits.
pub fn encode_image_pgm(img: &GrayImage) -> Vec<u8> {
    encode_p5(
        img.width,
        img.height,
        img.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    )
}

pub fn write_image_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    Ok(fs::write(path, encode_image_pgm(img))?)
}

/// Reads a `P5` (or `P1`) file as intensities in `[0, 1]`.
pub fn parse_image(bytes: &[u8]) -> Result<GrayImage> {
    let r = parse(bytes)?;
    let scale = r.maxval as f64;
    let pixels = r
        .samples
        .iter()
        .map(|&s| {
            let v = s as f64 / scale;
            // PBM uses 1 for black
            if r.bitmap {
                1.0 - v
            } else {
                v
            }
        })
        .collect();
    Ok(GrayImage {
        width: r.width,
        height: r.height,
        pixels,
    })
}

pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    parse_image(&fs::read(path)?)
}
