//! File boundary: PNG, binary PPM (P6), and a raw `f64` sidecar.
//!
//! PNG and PPM carry sRGB-encoded code values; they are decoded to linear
//! light on load and encoded (clamp, transfer curve, round-half-up) on save.
//! The raw sidecar stores linear `f64` samples verbatim:
//!
//! ```text
//! magic    8 bytes  "ORGBRAW1"
//! width    u32 LE
//! height   u32 LE
//! channels u32 LE   (1 or 3)
//! samples  f64 LE   width * height * channels, row-major, interleaved
//! ```

use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::{srgb, ChannelImage, LinearImage};
use crate::error::{Error, Result};

const PNG_SIGNATURE: &[u8] = &[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
pub const RAW_MAGIC: &[u8; 8] = b"ORGBRAW1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

impl TryFrom<u8> for BitDepth {
    type Error = Error;

    fn try_from(bits: u8) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::InvalidParameter(format!("bit depth must be 8 or 16, got {other}"))),
        }
    }
}

/// File container chosen from the output path's extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Container {
    Png,
    Ppm,
    Raw,
}

fn container_for(path: &Path) -> Container {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("ppm") => Container::Ppm,
        Some("f64") | Some("raw") => Container::Raw,
        _ => Container::Png,
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<LinearImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decodes PNG, PPM (P6) or raw-sidecar bytes, sniffed by magic number.
pub fn decode_image(bytes: &[u8]) -> Result<LinearImage> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.starts_with(RAW_MAGIC) {
        let (w, h, channels, data) = decode_raw(bytes)?;
        if channels != 3 {
            return Err(Error::Format(format!(
                "raw sidecar has {channels} channel(s), an RGB image needs 3"
            )));
        }
        LinearImage::from_vec(w, h, data)
    } else if bytes.starts_with(b"P") && bytes.len() > 1 {
        Err(Error::Format(format!(
            "PNM variant P{} is not supported, only binary P6",
            bytes[1] as char
        )))
    } else {
        Err(Error::Format("unrecognized file signature".into()))
    }
}

fn decode_png(bytes: &[u8]) -> Result<LinearImage> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    let channels = match color {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(Error::Format(format!(
                "png color type {other:?} is not supported, expected RGB or RGBA"
            )))
        }
    };
    let bytes_per_sample = match depth {
        png::BitDepth::Eight => 1,
        png::BitDepth::Sixteen => 2,
        other => {
            return Err(Error::Format(format!(
                "png bit depth {other:?} is not supported, expected 8 or 16"
            )))
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("png: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let row_len = frame.line_size;

    let lut = decode_lut(bytes_per_sample);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let row = &buf[y * row_len..(y + 1) * row_len];
        for x in 0..w {
            for c in 0..3 {
                let at = (x * channels + c) * bytes_per_sample;
                let code = if bytes_per_sample == 1 {
                    row[at] as usize
                } else {
                    u16::from_be_bytes([row[at], row[at + 1]]) as usize
                };
                data.push(lut[code]);
            }
        }
    }
    LinearImage::from_vec(w, h, data)
}

fn decode_lut(bytes_per_sample: usize) -> Vec<f64> {
    let max = if bytes_per_sample == 1 { 255 } else { 65535 };
    (0..=max)
        .map(|code| srgb::decode(code as f64 / max as f64))
        .collect()
}

fn ppm_header(bytes: &[u8]) -> Result<(usize, usize, u32, usize)> {
    // P6 <ws> width <ws> height <ws> maxval <single ws> raster; '#' comments allowed
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Format("ppm: truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("ppm: malformed header".into()))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::Format("ppm: malformed header".into()));
    }
    let [w, h, maxval] = fields;
    if maxval != 255 && maxval != 65535 {
        return Err(Error::Format(format!(
            "ppm maxval {maxval} is not supported, expected 255 or 65535"
        )));
    }
    Ok((w as usize, h as usize, maxval as u32, pos + 1))
}

fn decode_ppm(bytes: &[u8]) -> Result<LinearImage> {
    let (w, h, maxval, offset) = ppm_header(bytes)?;
    let bps = if maxval == 255 { 1 } else { 2 };
    let raster = &bytes[offset..];
    let needed = w * h * 3 * bps;
    if raster.len() < needed {
        return Err(Error::Format(format!(
            "ppm: raster has {} bytes, expected {needed}",
            raster.len()
        )));
    }
    let lut = decode_lut(bps);
    let data = raster[..needed]
        .chunks_exact(bps)
        .map(|s| {
            let code = if bps == 1 {
                s[0] as usize
            } else {
                u16::from_be_bytes([s[0], s[1]]) as usize
            };
            lut[code]
        })
        .collect();
    LinearImage::from_vec(w, h, data)
}

fn decode_raw(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let header = 8 + 12;
    if bytes.len() < header {
        return Err(Error::Format("raw sidecar: truncated header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, channels) = (word(0), word(1), word(2));
    let body = &bytes[header..];
    if body.len() != w * h * channels * 8 {
        return Err(Error::Format(format!(
            "raw sidecar: {} payload bytes, expected {}",
            body.len(),
            w * h * channels * 8
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((w, h, channels, data))
}

fn encode_raw(w: usize, h: usize, channels: usize, data: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + data.len() * 8);
    out.extend_from_slice(RAW_MAGIC);
    for v in [w, h, channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Loads a single-channel raw sidecar.
pub fn load_channel_raw(path: impl AsRef<Path>) -> Result<ChannelImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(RAW_MAGIC) {
        return Err(Error::Format("not a raw sidecar".into()));
    }
    let (w, h, channels, data) = decode_raw(&bytes)?;
    if channels != 1 {
        return Err(Error::Format(format!("raw sidecar has {channels} channels, expected 1")));
    }
    ChannelImage::from_vec(w, h, data)
}

/// Raw `f64` sidecar bytes of `img`; lossless, readable by [`decode_image`].
pub fn encode_float(img: &LinearImage) -> Vec<u8> {
    encode_raw(img.width(), img.height(), 3, img.as_slice())
}

/// Writes linear samples verbatim as a raw `f64` sidecar.
pub fn save_float(img: &LinearImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_float(img)).map_err(|e| Error::io(path, e))
}

/// Saves `img` sRGB-encoded at `depth`. The container follows the
/// extension: `.ppm` writes P6, `.f64`/`.raw` the float sidecar (depth
/// ignored), anything else PNG.
pub fn save_image(img: &LinearImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = match container_for(path) {
        Container::Raw => encode_raw(img.width(), img.height(), 3, img.as_slice()),
        Container::Ppm => encode_ppm(img, depth),
        Container::Png => encode_png_rgb(img, depth)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn quantized_samples(values: &[f64], depth: BitDepth) -> Vec<u8> {
    let max = depth.max_code();
    match depth {
        BitDepth::Eight => values.iter().map(|&v| srgb::quantize(v, max) as u8).collect(),
        BitDepth::Sixteen => values
            .iter()
            .flat_map(|&v| (srgb::quantize(v, max) as u16).to_be_bytes())
            .collect(),
    }
}

fn encode_ppm(img: &LinearImage, depth: BitDepth) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n{}\n", img.width(), img.height(), depth.max_code()).into_bytes();
    out.extend(quantized_samples(img.as_slice(), depth));
    out
}

fn png_depth(depth: BitDepth) -> png::BitDepth {
    match depth {
        BitDepth::Eight => png::BitDepth::Eight,
        BitDepth::Sixteen => png::BitDepth::Sixteen,
    }
}

fn write_png(
    w: usize,
    h: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, w as u32, h as u32);
        encoder.set_color(color);
        encoder.set_depth(depth);
        if let Some(p) = palette {
            encoder.set_palette(p);
        }
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Format(format!("png: {e}")))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::Format(format!("png: {e}")))?;
    }
    Ok(out)
}

/// sRGB PNG bytes for `img`.
pub fn encode_png_rgb(img: &LinearImage, depth: BitDepth) -> Result<Vec<u8>> {
    write_png(
        img.width(),
        img.height(),
        png::ColorType::Rgb,
        png_depth(depth),
        None,
        &quantized_samples(img.as_slice(), depth),
    )
}

/// Grayscale PNG of a display channel. Values are clamped to [0,1] and
/// quantized linearly (no transfer curve: these are not light values).
pub fn encode_png_gray(ch: &ChannelImage, depth: BitDepth) -> Result<Vec<u8>> {
    let max = depth.max_code() as f64;
    let code = |v: f64| (v.clamp(0.0, 1.0) * max + 0.5).floor() as u32;
    let data: Vec<u8> = match depth {
        BitDepth::Eight => ch.as_slice().iter().map(|&v| code(v) as u8).collect(),
        BitDepth::Sixteen => ch
            .as_slice()
            .iter()
            .flat_map(|&v| (code(v) as u16).to_be_bytes())
            .collect(),
    };
    write_png(
        ch.width(),
        ch.height(),
        png::ColorType::Grayscale,
        png_depth(depth),
        None,
        &data,
    )
}

pub fn save_channel(ch: &ChannelImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = match container_for(path) {
        Container::Raw => encode_raw(ch.width(), ch.height(), 1, ch.as_slice()),
        _ => encode_png_gray(ch, depth)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Deterministic 256-entry palette; index 0 is black.
pub fn label_palette() -> Vec<u8> {
    let mut pal = Vec::with_capacity(256 * 3);
    pal.extend_from_slice(&[0, 0, 0]);
    for i in 1u32..256 {
        // golden-angle hue walk
        let h = (i as f64 * 0.618_033_988_749_895).fract();
        let [r, g, b] = crate::color::hsv_to_rgb_pixel([h, 0.75, 0.95]);
        pal.extend([r, g, b].map(|c| (srgb::encode(c) * 255.0 + 0.5) as u8));
    }
    pal
}

/// Writes labels as an 8-bit palette PNG whose indices are the labels.
pub fn encode_png_labels(width: usize, height: usize, labels: &[u32]) -> Result<Vec<u8>> {
    if labels.len() != width * height {
        return Err(Error::InvalidParameter("label buffer does not match dimensions".into()));
    }
    let data = labels
        .iter()
        .map(|&l| {
            u8::try_from(l)
                .map_err(|_| Error::InvalidParameter(format!("label {l} does not fit a 256-entry palette")))
        })
        .collect::<Result<Vec<u8>>>()?;
    write_png(
        width,
        height,
        png::ColorType::Indexed,
        png::BitDepth::Eight,
        Some(label_palette()),
        &data,
    )
}

pub fn save_labels(width: usize, height: usize, labels: &[u32], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png_labels(width, height, labels)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads an 8-bit indexed or grayscale PNG as raw integer values
/// (palette indices or gray codes), for label maps and binary masks.
pub fn load_index_png(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(Cursor::new(bytes.as_slice()));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if !matches!(color, png::ColorType::Indexed | png::ColorType::Grayscale)
        || depth != png::BitDepth::Eight
    {
        return Err(Error::Format(format!(
            "label map must be 8-bit indexed or grayscale, found {color:?} {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("png: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &buf[y * frame.line_size..y * frame.line_size + w];
        out.extend(row.iter().map(|&b| b as u32));
    }
    Ok((w, h, out))
}
