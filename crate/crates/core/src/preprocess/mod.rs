//! Retinal image enhancement: median + Gaussian denoising, contrast-limited
//! adaptive histogram equalization and bilinear resizing.

mod clahe;
mod filter;
mod resize;

pub use clahe::{build_lut, clahe, clip_counts, clip_histogram, clip_level, Histogram256, Lut};
pub use filter::{gaussian_blur, hybrid_filter, median_filter};
pub use resize::resize_bilinear;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

pub const CLIP_FRACTION_MIN: f64 = 0.002;
pub const CLIP_FRACTION_MAX: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("clip fraction {0} outside [{CLIP_FRACTION_MIN}, {CLIP_FRACTION_MAX}]")]
    ClipFractionOutOfRange(f64),
    #[error("invalid enhancement config: {0}")]
    InvalidConfig(String),
    #[error("image {h}×{w} is smaller than the {rows}×{cols} tile grid")]
    ImageSmallerThanGrid { h: usize, w: usize, rows: usize, cols: usize },
    #[error("empty histogram")]
    EmptyHistogram,
    #[error("image buffer of {len} bytes does not match {h}×{w}×3")]
    BadBuffer { h: usize, w: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width * Self::CHANNELS {
            return Err(PreprocessError::BadBuffer { h: height, w: width, len: data.len() });
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(height * width * 3).collect();
        Self::new(height, width, data).expect("positive extents")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// One channel as a dense `H·W` plane.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn from_channels(height: usize, width: usize, planes: [&[u8]; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for i in 0..height * width {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Self::new(height, width, data)
    }

    /// `H×W×3` tensor with intensities scaled to `[0, 1]`.
    pub fn to_unit_tensor(&self) -> Tensor<f32> {
        Tensor::new(
            &[self.height, self.width, 3],
            self.data.iter().map(|&v| f32::from(v) / 255.0).collect(),
        )
        .expect("image extents are positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// Equalize R, G and B independently.
    #[default]
    PerChannel,
    /// Equalize BT.601 luma and shift every channel by the luma change.
    Luminance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceConfig {
    pub clip_fraction: f64,
    pub tile_grid: (usize, usize),
    pub median_window: usize,
    pub gaussian_sigma: f64,
    pub channel_mode: ChannelMode,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            clip_fraction: CLIP_FRACTION_MIN,
            tile_grid: (8, 8),
            median_window: 3,
            gaussian_sigma: 1.0,
            channel_mode: ChannelMode::PerChannel,
        }
    }
}

impl EnhanceConfig {
    /// Settings for small synthetic images: luminance-only equalization on a coarse
    /// grid with the smoothing stage off, since both filters wash out one-pixel lesions.
    pub fn desk() -> Self {
        Self {
            tile_grid: (4, 4),
            median_window: 1,
            gaussian_sigma: 0.0,
            channel_mode: ChannelMode::Luminance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_clip_fraction(self.clip_fraction)?;
        if self.tile_grid.0 == 0 || self.tile_grid.1 == 0 {
            return Err(PreprocessError::InvalidConfig(format!("tile grid {:?} has a zero side", self.tile_grid)));
        }
        if self.median_window.is_multiple_of(2) {
            return Err(PreprocessError::InvalidConfig(format!(
                "median window {} must be odd",
                self.median_window
            )));
        }
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(PreprocessError::InvalidConfig(format!("gaussian sigma {} must be >= 0", self.gaussian_sigma)));
        }
        Ok(())
    }
}

pub fn check_clip_fraction(f: f64) -> Result<()> {
    if (CLIP_FRACTION_MIN..=CLIP_FRACTION_MAX).contains(&f) {
        Ok(())
    } else {
        Err(PreprocessError::ClipFractionOutOfRange(f))
    }
}

/// Hybrid filter, then CLAHE, then a resize to `out_hw` when given.
pub fn enhance(img: &ImageU8, cfg: &EnhanceConfig, out_hw: Option<(usize, usize)>) -> Result<ImageU8> {
    let filtered = hybrid_filter(img, cfg)?;
    let equalized = clahe(&filtered, cfg)?;
    Ok(match out_hw {
        Some((h, w)) if (h, w) != (equalized.height, equalized.width) => resize_bilinear(&equalized, h, w),
        _ => equalized,
    })
}

/// `round(v)` clamped into the 8-bit range.
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
