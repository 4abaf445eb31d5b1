//! PNG and JSON helpers. Every file goes through [`write_file`], which
//! writes a sibling temporary file and renames it into place.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageEncoder, Rgb};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tracelab_core::Image;

use crate::error::{LabError, Result};

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(LabError::io(path))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(LabError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(LabError::io(path))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(LabError::io(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| LabError::format(path, e))?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| LabError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Encodes an image as 8-bit RGB PNG bytes.
pub fn png_bytes(img: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&img.to_u8(), img.width() as u32, img.height() as u32, image::ExtendedColorType::Rgb8)
        .map_err(|source| LabError::Image { path: PathBuf::from("<memory>"), source })?;
    Ok(out)
}

pub fn save_png(path: &Path, img: &Image) -> Result<()> {
    let bytes = png_bytes(img).map_err(|e| match e {
        LabError::Image { source, .. } => LabError::Image { path: path.to_path_buf(), source },
        other => other,
    })?;
    write_file(path, &bytes)
}

pub fn load_png(path: &Path) -> Result<Image> {
    let bytes = read_file(path)?;
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|source| LabError::Image { path: path.to_path_buf(), source })?;
    let rgb: ImageBuffer<Rgb<u8>, Vec<u8>> = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Image::from_u8(h as usize, w as usize, rgb.as_raw())?)
}

/// `path` relative to the directory `base`, with `/` separators. Both must
/// exist.
pub fn relative(path: &Path, base: &Path) -> Result<String> {
    let path = fs::canonicalize(path).map_err(LabError::io(path))?;
    let base = fs::canonicalize(base).map_err(LabError::io(base))?;
    let rel = pathdiff::diff_paths(&path, &base)
        .ok_or_else(|| LabError::format(&path, format!("no relative path from {}", base.display())))?;
    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    Ok(parts.join("/"))
}
