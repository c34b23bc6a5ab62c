//! Frame input and output: 8-bit grayscale PNG and raw frame dumps.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use leyes_core::GrayImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header file naming the dimensions of `*.raw` frames in a directory.
pub const RAW_HEADER: &str = "header.json";

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("raw frame {path} has {found} bytes, header says {expected}")]
    RawSize {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("raw frame header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("raw frames found in {0} but no {RAW_HEADER}")]
    MissingHeader(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FrameError + '_ {
    move |source| FrameError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>, FrameError> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        img.levels(),
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::L8,
    )?;
    Ok(out)
}

/// Decodes any PNG, converting color or 16-bit input to 8-bit gray.
pub fn decode_png(bytes: &[u8]) -> Result<GrayImage, FrameError> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Png)?.into_luma8();
    let (w, h) = img.dimensions();
    Ok(GrayImage::from_levels(w as usize, h as usize, img.into_raw()).expect("decoder sizes match"))
}

pub fn write_png(path: &Path, img: &GrayImage) -> Result<(), FrameError> {
    fs::write(path, encode_png(img)?).map_err(io_err(path))
}

pub fn read_png(path: &Path) -> Result<GrayImage, FrameError> {
    decode_png(&fs::read(path).map_err(io_err(path))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Png,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRef {
    /// Position in the directory listing, sorted by file name.
    pub index: usize,
    pub stem: String,
    pub path: PathBuf,
    pub kind: FrameKind,
}

/// Frame files in `dir` (`*.png`, `*.raw`) sorted by name, and the raw
/// header when raw frames are present.
pub fn list_frames(dir: &Path) -> Result<(Vec<FrameRef>, Option<RawHeader>), FrameError> {
    let mut entries: Vec<(String, PathBuf, FrameKind)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let kind = match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => FrameKind::Png,
            Some(e) if e.eq_ignore_ascii_case("raw") => FrameKind::Raw,
            _ => continue,
        };
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        entries.push((name, path, kind));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let header = if entries.iter().any(|e| e.2 == FrameKind::Raw) {
        let hp = dir.join(RAW_HEADER);
        if !hp.exists() {
            return Err(FrameError::MissingHeader(dir.to_path_buf()));
        }
        Some(serde_json::from_slice(&fs::read(&hp).map_err(io_err(&hp))?)?)
    } else {
        None
    };
    let frames = entries
        .into_iter()
        .enumerate()
        .map(|(index, (_, path, kind))| FrameRef {
            index,
            stem: path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
            path,
            kind,
        })
        .collect();
    Ok((frames, header))
}

pub fn load_frame(frame: &FrameRef, raw: Option<RawHeader>) -> Result<GrayImage, FrameError> {
    match frame.kind {
        FrameKind::Png => read_png(&frame.path),
        FrameKind::Raw => {
            let h = raw.ok_or_else(|| FrameError::MissingHeader(frame.path.clone()))?;
            let bytes = fs::read(&frame.path).map_err(io_err(&frame.path))?;
            let expected = h.width * h.height;
            if bytes.len() != expected {
                return Err(FrameError::RawSize {
                    path: frame.path.clone(),
                    expected,
                    found: bytes.len(),
                });
            }
            Ok(GrayImage::from_levels(h.width, h.height, bytes).expect("size checked"))
        }
    }
}
