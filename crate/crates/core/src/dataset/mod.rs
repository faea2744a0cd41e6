//! Dataset manifests, stratified splits, image decoding and the synthetic
//! lesion-image generator used for desk-scale training.

mod image_io;
mod manifest;
mod split;
mod synth;

pub use image_io::{decode_image, decode_image_bytes, save_png};
pub use manifest::{
    class_distribution, load_manifest, read_manifest, write_manifest, write_manifest_to, ClassDistribution,
    ManifestRecord, MANIFEST_HEADER,
};
pub use split::{stratified_split, stratified_split_indices};
pub use synth::{synth_dataset, synth_dataset_with, LesionCounts, SynthConfig, SynthSample};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    MissingFile { path: String, source: std::io::Error },
    #[error("bad manifest header {found:?}: expected image_path,grade[,ma_count,neovasc]")]
    BadHeader { found: String },
    #[error("line {line}: grade {value:?} is not in 0..=4")]
    BadGrade { line: u64, value: String },
    #[error("line {line}: {detail}")]
    Malformed { line: u64, detail: String },
    #[error("{file}: {source}")]
    InFile { file: String, source: Box<DatasetError> },
    #[error("{path}: unsupported image format ({detail})")]
    UnsupportedFormat { path: String, detail: String },
    #[error("{path}: corrupt image stream ({detail})")]
    CorruptStream { path: String, detail: String },
    #[error("write failed: {0}")]
    Write(String),
}

impl DatasetError {
    pub(crate) fn in_file(self, path: &Path) -> Self {
        DatasetError::InFile { file: path.display().to_string(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, DatasetError>;
