//! 8-bit grayscale images: binary PGM read/write and PNG read.

use std::io::Cursor;
use std::path::Path;

use fse_core::SampleGrid;

use crate::error::{ConcealError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ConcealError::Format(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            maxval: 255,
            pixels,
        })
    }

    pub fn to_grid(&self) -> SampleGrid {
        SampleGrid::new(
            self.width,
            self.height,
            self.pixels.iter().map(|&p| f64::from(p)).collect(),
        )
        .expect("dimensions checked on construction")
    }

    /// Clamps to `[0, 255]` and rounds to the nearest integer.
    pub fn from_grid(grid: &SampleGrid) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            maxval: 255,
            pixels: grid.samples().iter().map(|&v| quantize(v)).collect(),
        }
    }
}

pub fn quantize(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

/// ITU-R BT.601 luma, rounded.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    quantize(0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
}

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ConcealError::Format("malformed PGM header".into()))
    }
}

pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    if !data.starts_with(b"P5") {
        return Err(ConcealError::Format("not a binary PGM (P5)".into()));
    }
    let mut h = Header { data, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(ConcealError::Format(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates header and raster
    if h.pos >= data.len() || !data[h.pos].is_ascii_whitespace() {
        return Err(ConcealError::Format("malformed PGM header".into()));
    }
    let raster = &data[h.pos + 1..];
    let n = width * height;
    if raster.len() < n {
        return Err(ConcealError::Format(format!(
            "raster has {} of {n} bytes",
            raster.len()
        )));
    }
    let mut img = GrayImage::new(width, height, raster[..n].to_vec())?;
    img.maxval = maxval as u8;
    Ok(img)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Decodes any PNG to 8-bit luma; alpha is dropped.
pub fn decode_png(data: &[u8]) -> Result<GrayImage> {
    let fmt = |e: png::DecodingError| ConcealError::Format(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(data));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(fmt)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ConcealError::Format("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(fmt)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    use png::ColorType::*;
    let channels = match info.color_type {
        Grayscale => 1,
        GrayscaleAlpha => 2,
        Rgb => 3,
        Rgba => 4,
        Indexed => return Err(ConcealError::Format("unexpanded palette".into())),
    };
    let stride = info.line_size;
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf.chunks(stride).take(h) {
        for px in row.chunks(channels).take(w) {
            pixels.push(if channels < 3 {
                px[0]
            } else {
                luma(px[0], px[1], px[2])
            });
        }
    }
    GrayImage::new(w, h, pixels)
}

/// Reads a PGM or PNG file, picked by its signature.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let data = std::fs::read(path).map_err(|e| ConcealError::io(path, e))?;
    if data.starts_with(b"\x89PNG") {
        decode_png(&data)
    } else {
        decode_pgm(&data)
    }
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img)).map_err(|e| ConcealError::io(path, e))
}
