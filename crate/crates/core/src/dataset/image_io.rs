use std::io::Cursor;
use std::path::Path;

use image::{ImageError, ImageFormat, ImageReader, RgbImage};

use super::{DatasetError, Result};
use crate::preprocess::ImageU8;

fn classify(path: &Path, e: ImageError) -> DatasetError {
    let path = path.display().to_string();
    match e {
        ImageError::Unsupported(e) => DatasetError::UnsupportedFormat { path, detail: e.to_string() },
        ImageError::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => {
            DatasetError::MissingFile { path, source: e }
        }
        other => DatasetError::CorruptStream { path, detail: other.to_string() },
    }
}

fn from_dynamic(img: image::DynamicImage) -> ImageU8 {
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    ImageU8::new(h as usize, w as usize, rgb.into_raw()).expect("decoder yields full RGB buffers")
}

/// Decodes PNG or JPEG (sniffed from content) into 8-bit RGB; grayscale is expanded.
pub fn decode_image(path: impl AsRef<Path>) -> Result<ImageU8> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| DatasetError::MissingFile { path: path.display().to_string(), source: e })?
        .with_guessed_format()
        .map_err(|e| classify(path, ImageError::IoError(e)))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg) => {}
        Some(other) => {
            return Err(DatasetError::UnsupportedFormat {
                path: path.display().to_string(),
                detail: format!("{other:?}"),
            })
        }
        None => {
            return Err(DatasetError::UnsupportedFormat {
                path: path.display().to_string(),
                detail: "unrecognized byte stream".into(),
            })
        }
    }
    reader.decode().map(from_dynamic).map_err(|e| classify(path, e))
}

/// Decodes an in-memory PNG or JPEG.
pub fn decode_image_bytes(bytes: &[u8]) -> Result<ImageU8> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| classify(Path::new("<memory>"), ImageError::IoError(e)))?;
    if !matches!(reader.format(), Some(ImageFormat::Png | ImageFormat::Jpeg)) {
        return Err(DatasetError::UnsupportedFormat { path: "<memory>".into(), detail: "not PNG or JPEG".into() });
    }
    reader.decode().map(from_dynamic).map_err(|e| classify(Path::new("<memory>"), e))
}

pub fn save_png(img: &ImageU8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .expect("buffer matches extents");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| DatasetError::Write(format!("{}: {e}", path.display())))
}
