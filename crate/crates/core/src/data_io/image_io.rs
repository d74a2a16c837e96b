//! Single-channel 8-bit raster I/O: binary PGM (P5) and grayscale PNG.
//! The codec is chosen by file extension.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::binary::atomic_write;
use crate::mask::{BinaryGrid, LabelMap, MaskError, Silhouette};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("{path}: {source}")]
    Content { path: String, source: MaskError },
}

/// Decoded 8-bit single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Codec {
    Pgm,
    Png,
}

fn codec_for(path: &Path) -> Result<Codec, ImageError> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => Ok(Codec::Pgm),
        Some("png") => Ok(Codec::Png),
        _ => Err(ImageError::Format {
            path: path.display().to_string(),
            reason: "expected .pgm or .png extension".into(),
        }),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ImageError + '_ {
    move |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn fmt_err(path: &Path, reason: impl Into<String>) -> ImageError {
    ImageError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn read_gray(path: &Path) -> Result<GrayImage, ImageError> {
    match codec_for(path)? {
        Codec::Pgm => {
            let mut bytes = Vec::new();
            File::open(path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(io_err(path))?;
            decode_pgm(&bytes).map_err(|r| fmt_err(path, r))
        }
        Codec::Png => {
            let file = File::open(path).map_err(io_err(path))?;
            decode_png(BufReader::new(file)).map_err(|r| fmt_err(path, r))
        }
    }
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<(), ImageError> {
    let codec = codec_for(path)?;
    atomic_write(path, |w| match codec {
        Codec::Pgm => w.write_all(&encode_pgm(img)),
        Codec::Png => encode_png(w, img),
    })
    .map_err(io_err(path))
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII PGM header")?);
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported PGM magic {:?}", fields[0]));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad PGM header field {s:?}"));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported PGM maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    let pixels = bytes
        .get(pos..pos + n)
        .ok_or_else(|| format!("PGM raster truncated: need {n} bytes"))?
        .to_vec();
    Ok(GrayImage { width, height, pixels })
}

fn decode_png<R: io::BufRead + io::Seek>(r: R) -> Result<GrayImage, String> {
    let mut decoder = png::Decoder::new(r);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let size = reader.output_buffer_size().ok_or("PNG too large")?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(format!(
            "expected 8-bit grayscale PNG, found {:?} {:?}",
            info.color_type, info.bit_depth
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut pixels = Vec::with_capacity(width * height);
    for row in buf.chunks(info.line_size).take(height) {
        pixels.extend_from_slice(&row[..width]);
    }
    Ok(GrayImage { width, height, pixels })
}

fn encode_png(w: &mut dyn Write, img: &GrayImage) -> io::Result<()> {
    let mut enc = png::Encoder::new(w, img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(io::Error::other)?;
    writer.write_image_data(&img.pixels).map_err(io::Error::other)?;
    writer.finish().map_err(io::Error::other)
}

pub fn read_label_map(path: &Path) -> Result<LabelMap, ImageError> {
    let img = read_gray(path)?;
    LabelMap::new(img.width, img.height, img.pixels).map_err(|source| ImageError::Content {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_label_map(path: &Path, map: &LabelMap) -> Result<(), ImageError> {
    write_gray(
        path,
        &GrayImage {
            width: map.width(),
            height: map.height(),
            pixels: map.labels().to_vec(),
        },
    )
}

/// Nonzero pixels are foreground.
pub fn read_mask(path: &Path) -> Result<BinaryGrid, ImageError> {
    let img = read_gray(path)?;
    BinaryGrid::from_cells(img.width, img.height, img.pixels).map_err(|source| ImageError::Content {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a 0/255 raster.
pub fn write_mask(path: &Path, grid: &BinaryGrid) -> Result<(), ImageError> {
    write_gray(
        path,
        &GrayImage {
            width: grid.width(),
            height: grid.height(),
            pixels: grid.cells().iter().map(|&v| v * 255).collect(),
        },
    )
}

pub fn read_silhouette(path: &Path) -> Result<Silhouette, ImageError> {
    Silhouette::from_grid(read_mask(path)?).map_err(|source| ImageError::Content {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_silhouette(path: &Path, sil: &Silhouette) -> Result<(), ImageError> {
    write_mask(path, sil.grid())
}
