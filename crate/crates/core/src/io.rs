//! File formats: 16-bit depth PNG, 8-bit RGB PNG, and the raw little-endian
//! float formats `RDK1` (one plane) and `RDKF` (channel stack).
//!
//! `RDK1` layout: `b"RDK1"`, u32 width, u32 height, then width·height f32.
//! `RDKF` layout: `b"RDKF"`, u32 channels, u32 height, u32 width, then
//! channels·height·width f32. All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{DepthMap, RgbImage};

/// Raw-units-per-meter for KITTI-style depth PNGs.
pub const KITTI_DIVISOR: f64 = 256.0;
/// Raw-units-per-meter for NYU-style depth PNGs (millimeters).
pub const NYU_DIVISOR: f64 = 1000.0;

const RDK1_MAGIC: &[u8; 4] = b"RDK1";
const RDKF_MAGIC: &[u8; 4] = b"RDKF";

fn png_err(e: png::DecodingError) -> Error {
    Error::Format(e.to_string())
}

fn png_enc_err(e: png::EncodingError) -> Error {
    Error::Format(e.to_string())
}

fn check_divisor(divisor: f64) -> Result<()> {
    if !(divisor > 0.0 && divisor.is_finite()) {
        return Err(Error::InvalidConfig(format!("divisor {divisor} must be positive")));
    }
    Ok(())
}

fn decode_png(path: &Path) -> Result<(png::OutputInfo, Vec<u8>)> {
    let file = File::open(path)?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("png too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

fn encode_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<()> {
    let (w, h) = (to_u32(width)?, to_u32(height)?);
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w, h);
    encoder.set_color(color);
    encoder.set_depth(depth);
    encoder.set_compression(png::Compression::Balanced);
    encoder.set_filter(png::Filter::Adaptive);
    let mut writer = encoder.write_header().map_err(png_enc_err)?;
    writer.write_image_data(data).map_err(png_enc_err)?;
    writer.finish().map_err(png_enc_err)?;
    Ok(())
}

fn to_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} exceeds u32")))
}

/// Reads a 16-bit single-channel PNG as meters (`raw / divisor`); raw 0 is invalid.
pub fn read_depth_png(path: impl AsRef<Path>, divisor: f64) -> Result<DepthMap> {
    check_divisor(divisor)?;
    let (info, buf) = decode_png(path.as_ref())?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::Format(format!(
            "depth png must be 16-bit grayscale, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for px in buf.chunks_exact(2) {
        let raw = u16::from_be_bytes([px[0], px[1]]);
        valid.push(raw != 0);
        values.push(if raw == 0 { 0.0 } else { f64::from(raw) / divisor });
    }
    DepthMap::new(w, h, values, valid)
}

/// Quantizes one depth value: round-to-nearest of `value · divisor`,
/// saturated to `[1, 65535]` for valid pixels, 0 for invalid.
pub fn quantize_depth(value: f64, valid: bool, divisor: f64) -> u16 {
    if !valid {
        return 0;
    }
    (value * divisor).round().clamp(1.0, f64::from(u16::MAX)) as u16
}

/// Writes a depth map as a 16-bit grayscale PNG; inverse of [`read_depth_png`]
/// up to quantization.
pub fn write_depth_png(map: &DepthMap, path: impl AsRef<Path>, divisor: f64) -> Result<()> {
    check_divisor(divisor)?;
    let mut data = Vec::with_capacity(map.values().len() * 2);
    for (v, ok) in map.values().iter().zip(map.valid()) {
        data.extend_from_slice(&quantize_depth(*v, *ok, divisor).to_be_bytes());
    }
    encode_png(
        path.as_ref(),
        map.width(),
        map.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &data,
    )
}

/// Reads an 8-bit RGB (or RGBA, alpha dropped) PNG into `[0, 1]` samples.
pub fn read_rgb_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    let (info, buf) = decode_png(path.as_ref())?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!("rgb png must be 8-bit, got {:?}", info.bit_depth)));
    }
    let stride = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::Format(format!("rgb png has color type {other:?}"))),
    };
    let data = buf
        .chunks_exact(stride)
        .flat_map(|px| px[..3].iter().map(|b| f64::from(*b) / 255.0))
        .collect();
    RgbImage::new(info.width as usize, info.height as usize, data)
}

pub fn write_rgb_png(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<u8> = image.data().iter().map(|s| (s * 255.0).round() as u8).collect();
    encode_png(
        path.as_ref(),
        image.width(),
        image.height(),
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &data,
    )
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_payload(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after payload", rest.len())));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect())
}

fn check_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|_| Error::Format("file too short".into()))?;
    if &m != magic {
        return Err(Error::Format(format!("bad magic {m:?}")));
    }
    Ok(())
}

/// Reads an `RDK1` plane: `(width, height, values)`.
pub fn read_rdk1(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, RDK1_MAGIC)?;
    let w = read_u32(&mut r)? as usize;
    let h = read_u32(&mut r)? as usize;
    let values = read_payload(&mut r, w * h)?;
    Ok((w, h, values))
}

/// Writes an `RDK1` plane. Values are stored as f32.
pub fn write_rdk1(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::RejectedInput("plane length does not match dimensions".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(RDK1_MAGIC)?;
    w.write_all(&to_u32(width)?.to_le_bytes())?;
    w.write_all(&to_u32(height)?.to_le_bytes())?;
    for v in values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `RDKF` stack: `(channels, height, width, values)`.
pub fn read_rdkf(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, RDKF_MAGIC)?;
    let c = read_u32(&mut r)? as usize;
    let h = read_u32(&mut r)? as usize;
    let w = read_u32(&mut r)? as usize;
    let values = read_payload(&mut r, c * h * w)?;
    Ok((c, h, w, values))
}

pub fn write_rdkf(
    path: impl AsRef<Path>,
    channels: usize,
    height: usize,
    width: usize,
    values: &[f64],
) -> Result<()> {
    if values.len() != channels * height * width {
        return Err(Error::RejectedInput("stack length does not match dimensions".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(RDKF_MAGIC)?;
    for n in [channels, height, width] {
        w.write_all(&to_u32(n)?.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Depth from an `RDK1` plane; nonpositive or non-finite entries are invalid.
pub fn read_depth_rdk(path: impl AsRef<Path>) -> Result<DepthMap> {
    let (w, h, values) = read_rdk1(path)?;
    let valid: Vec<bool> = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
    let values = values.iter().zip(&valid).map(|(v, ok)| if *ok { *v } else { 0.0 }).collect();
    DepthMap::new(w, h, values, valid)
}

/// Depth to an `RDK1` plane; invalid pixels are written as 0.
pub fn write_depth_rdk(map: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let values: Vec<f64> = map
        .values()
        .iter()
        .zip(map.valid())
        .map(|(v, ok)| if *ok { *v } else { 0.0 })
        .collect();
    write_rdk1(path, map.width(), map.height(), &values)
}
