//! 8-bit grayscale image files: binary PGM (P5) and PNG.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Result, VlxError};
use crate::io::write_atomic;
use crate::model::ImageInput;

const PNG_SIGNATURE: &[u8] = &[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Row-major grayscale pixels scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

pub fn decode_image(bytes: &[u8], origin: &str) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes, origin)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes, origin)
    } else if bytes.starts_with(b"P2") {
        Err(VlxError::format(origin, "ASCII PGM (P2) is not supported, use P5"))
    } else {
        Err(VlxError::format(origin, "unrecognized image format"))
    }
}

fn decode_pgm(bytes: &[u8], origin: &str) -> Result<GrayImage> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| VlxError::format(origin, "malformed PGM header"))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(VlxError::format(
            origin,
            format!("PGM maxval {maxval} is not 8-bit"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(VlxError::format(origin, "malformed PGM header"));
    }
    pos += 1;
    let raster = &bytes[pos..];
    if width == 0 || height == 0 || raster.len() < width * height {
        return Err(VlxError::format(origin, "PGM raster is truncated"));
    }
    let scale = maxval as f64;
    let pixels = raster[..width * height]
        .iter()
        .map(|&b| (b as f64 / scale).min(1.0))
        .collect();
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

fn decode_png(bytes: &[u8], origin: &str) -> Result<GrayImage> {
    let fail = |e: png::DecodingError| VlxError::format(origin, e.to_string());
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(fail)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(VlxError::format(
            origin,
            format!("PNG color type {:?} is not 8-bit grayscale", info.color_type),
        ));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(VlxError::format(
            origin,
            format!("PNG bit depth {:?} is not 8", info.bit_depth),
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| VlxError::format(origin, "PNG too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(fail)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let pixels = buf[..width * height]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| VlxError::io(path, e))?;
    decode_image(&bytes, &path.display().to_string())
}

/// Nearest-neighbour resample: output `(i, j)` reads source
/// `(floor(i·h/side), floor(j·w/side))`.
pub fn resize_nearest(img: &GrayImage, side: usize) -> GrayImage {
    if img.width == side && img.height == side {
        return img.clone();
    }
    let mut pixels = Vec::with_capacity(side * side);
    for i in 0..side {
        let si = i * img.height / side;
        for j in 0..side {
            let sj = j * img.width / side;
            pixels.push(img.pixels[si * img.width + sj]);
        }
    }
    GrayImage {
        width: side,
        height: side,
        pixels,
    }
}

pub fn load_image(path: &Path, side: usize) -> Result<ImageInput> {
    let img = resize_nearest(&read_gray(path)?, side);
    ImageInput::new(side, img.pixels)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    assert_eq!(bytes.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    write_atomic(path, &out)
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let fail = |e: png::EncodingError| VlxError::format("png", e.to_string());
        let mut writer = enc.write_header().map_err(fail)?;
        writer.write_image_data(data).map_err(fail)?;
        writer.finish().map_err(fail)?;
    }
    Ok(out)
}

pub fn write_png_gray(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    assert_eq!(data.len(), width * height);
    write_atomic(path, &encode_png(width, height, png::ColorType::Grayscale, data)?)
}

pub fn write_png_rgb(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    assert_eq!(data.len(), width * height * 3);
    write_atomic(path, &encode_png(width, height, png::ColorType::Rgb, data)?)
}
