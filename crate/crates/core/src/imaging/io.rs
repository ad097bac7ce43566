use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageFormat, ImageReader, RgbImage};

use super::{ImageU8, ImagingError};

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Loads an 8-bit PNG. Grayscale is expanded to three channels, alpha dropped.
pub fn load_png(path: impl AsRef<Path>) -> Result<ImageU8, ImagingError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| ImagingError::Io { path: display(path), source })?
        .with_guessed_format()
        .map_err(|source| ImagingError::Io { path: display(path), source })?;
    let decoded = reader
        .decode()
        .map_err(|e| ImagingError::Decode { path: display(path), detail: e.to_string() })?;
    let rgb = match decoded.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => decoded.to_rgb8(),
        other => {
            return Err(ImagingError::UnsupportedDepth {
                path: display(path),
                bits: other.bits_per_pixel() / other.channel_count() as u16,
            })
        }
    };
    let (w, h) = rgb.dimensions();
    ImageU8::new(h as usize, w as usize, rgb.into_raw())
}

pub fn save_png(img: &ImageU8, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .expect("extents match sample count");
    DynamicImage::ImageRgb8(buf)
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| ImagingError::Encode { path: display(path), detail: e.to_string() })
}

/// PNG files of a directory, sorted by file name.
pub fn list_pngs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, ImagingError> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| ImagingError::Io { path: display(dir), source })?;
    let mut out = Vec::new();
    for e in entries {
        let p = e.map_err(|source| ImagingError::Io { path: display(dir), source })?.path();
        if p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}
