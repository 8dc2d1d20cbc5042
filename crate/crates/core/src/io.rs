//! Raster file formats: PNG for RGB observations, PFM for depth maps.
//!
//! Depth files are single-channel little-endian PFM (`Pf`, negative scale);
//! holes are stored as `NaN`. PFM rows run bottom-to-top.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::types::{DepthMap, ImageError, RasterImage};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("invalid raster: {0}")]
    Raster(#[from] ImageError),
    #[error("malformed PFM: {0}")]
    Pfm(String),
}

pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, IoError> {
    let img = image::load_from_memory(bytes)?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(RasterImage::from_raw(w, h, img.into_raw())?)
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, IoError> {
    let buf = image::RgbImage::from_raw(img.width(), img.height(), img.pixels().to_vec())
        .expect("raster buffer length checked at construction");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn load_png(path: impl AsRef<Path>) -> Result<RasterImage, IoError> {
    decode_png(&std::fs::read(path)?)
}

pub fn save_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<(), IoError> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

pub fn encode_pfm<T: Scalar>(depth: &DepthMap<T>) -> Vec<u8> {
    let (w, h) = (depth.width() as usize, depth.height() as usize);
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in (0..h).rev() {
        for d in &depth.depths()[row * w..(row + 1) * w] {
            let v = d.to_f32().unwrap_or(f32::NAN);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap<f64>, IoError> {
    let mut reader = BufReader::new(bytes);
    let mut header = Vec::new();
    while header.len() < 3 {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(IoError::Pfm("truncated header".into()));
        }
        let t = line.trim();
        if !t.is_empty() {
            header.push(t.to_string());
        }
    }
    if header[0] != "Pf" {
        return Err(IoError::Pfm(format!("expected single-channel 'Pf', got '{}'", header[0])));
    }
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| IoError::Pfm(format!("bad dimension '{s}'"))))
        .collect::<Result<_, _>>()?;
    if dims.len() != 2 {
        return Err(IoError::Pfm("expected 'width height'".into()));
    }
    let scale: f64 = header[2].parse().map_err(|_| IoError::Pfm("bad scale".into()))?;
    let little = scale < 0.0;
    let (w, h) = (dims[0], dims[1]);
    let mut raw = vec![0u8; w * h * 4];
    reader.read_exact(&mut raw).map_err(|_| IoError::Pfm("truncated pixel data".into()))?;
    let mut depths = vec![0.0f64; w * h];
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, col) = (i / w, i % w);
        depths[(h - 1 - row) * w + col] = if v.is_finite() && v > 0.0 { v as f64 } else { f64::NAN };
    }
    Ok(DepthMap::from_raw(w as u32, h as u32, depths)?)
}

pub fn save_pfm<T: Scalar>(depth: &DepthMap<T>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_pfm(depth))?;
    Ok(())
}

pub fn load_pfm(path: impl AsRef<Path>) -> Result<DepthMap<f64>, IoError> {
    decode_pfm(&std::fs::read(path)?)
}
