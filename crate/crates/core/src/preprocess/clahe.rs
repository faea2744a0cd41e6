use super::{check_clip_fraction, to_u8, ChannelMode, EnhanceConfig, ImageU8, PreprocessError, Result};

pub type Lut = [u8; 256];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    pub counts: [u32; 256],
}

impl Histogram256 {
    pub fn of(values: impl IntoIterator<Item = u8>) -> Self {
        let mut counts = [0u32; 256];
        for v in values {
            counts[v as usize] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// `max(1, round(clip_fraction · region_pixels))`.
pub fn clip_level(clip_fraction: f64, region_pixels: usize) -> u32 {
    ((clip_fraction * region_pixels as f64).round() as u32).max(1)
}

/// Caps every bin at `limit`, then spreads the excess once: `excess / n` to every
/// bin and the remainder one each to the first bins. Total count is conserved.
pub fn clip_counts(counts: &mut [u32], limit: u32) {
    let mut excess: u64 = 0;
    for c in counts.iter_mut() {
        if *c > limit {
            excess += u64::from(*c - limit);
            *c = limit;
        }
    }
    if excess == 0 || counts.is_empty() {
        return;
    }
    let n = counts.len() as u64;
    let share = (excess / n) as u32;
    let remainder = (excess % n) as usize;
    for (i, c) in counts.iter_mut().enumerate() {
        *c += share + u32::from(i < remainder);
    }
}

pub fn clip_histogram(h: &Histogram256, clip_fraction: f64, region_pixels: usize) -> Result<Histogram256> {
    check_clip_fraction(clip_fraction)?;
    let mut out = h.clone();
    clip_counts(&mut out.counts, clip_level(clip_fraction, region_pixels));
    Ok(out)
}

/// `LUT[v] = round(255 · CDF(v))`.
pub fn build_lut(h: &Histogram256) -> Result<Lut> {
    let total = h.total();
    if total == 0 {
        return Err(PreprocessError::EmptyHistogram);
    }
    let mut lut = [0u8; 256];
    let mut running = 0u64;
    for (slot, &c) in lut.iter_mut().zip(&h.counts) {
        running += u64::from(c);
        *slot = to_u8(255.0 * running as f64 / total as f64);
    }
    Ok(lut)
}

fn identity_lut() -> Lut {
    std::array::from_fn(|v| v as u8)
}

/// Edges `[0, …, n]` splitting `n` pixels into `parts` near-equal runs.
fn edges(n: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * n / parts).collect()
}

/// Lower neighbouring tile, upper neighbouring tile and the upper tile's weight
/// for pixel `p`, with tile centres at `(t + 0.5)·n/parts − 0.5`.
fn neighbours(p: usize, n: usize, parts: usize) -> (usize, usize, f64) {
    let g = ((p as f64 + 0.5) * parts as f64 / n as f64 - 0.5).clamp(0.0, (parts - 1) as f64);
    let lo = g.floor() as usize;
    let hi = (lo + 1).min(parts - 1);
    (lo, hi, g - lo as f64)
}

fn equalize_plane(plane: &[u8], h: usize, w: usize, cfg: &EnhanceConfig) -> Result<Vec<u8>> {
    let (rows, cols) = cfg.tile_grid;
    let (ye, xe) = (edges(h, rows), edges(w, cols));
    let mut luts = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let hist = Histogram256::of(
                (ye[r]..ye[r + 1]).flat_map(|y| plane[y * w + xe[c]..y * w + xe[c + 1]].iter().copied()),
            );
            // a single-intensity tile carries no contrast to redistribute
            let lut = if hist.occupied() == 1 {
                identity_lut()
            } else {
                let region = (ye[r + 1] - ye[r]) * (xe[c + 1] - xe[c]);
                build_lut(&clip_histogram(&hist, cfg.clip_fraction, region)?)?
            };
            luts.push(lut);
        }
    }

    let col_weights: Vec<(usize, usize, f64)> = (0..w).map(|x| neighbours(x, w, cols)).collect();
    let mut out = Vec::with_capacity(plane.len());
    for y in 0..h {
        let (r0, r1, wy) = neighbours(y, h, rows);
        for (x, &(c0, c1, wx)) in col_weights.iter().enumerate() {
            let v = plane[y * w + x] as usize;
            let at = |r: usize, c: usize| f64::from(luts[r * cols + c][v]);
            let top = at(r0, c0) * (1.0 - wx) + at(r0, c1) * wx;
            let bottom = at(r1, c0) * (1.0 - wx) + at(r1, c1) * wx;
            out.push(to_u8(top * (1.0 - wy) + bottom * wy));
        }
    }
    Ok(out)
}

/// Contrast-limited adaptive histogram equalization with bilinear LUT interpolation.
pub fn clahe(img: &ImageU8, cfg: &EnhanceConfig) -> Result<ImageU8> {
    cfg.validate()?;
    let (h, w) = (img.height(), img.width());
    let (rows, cols) = cfg.tile_grid;
    if h < rows || w < cols {
        return Err(PreprocessError::ImageSmallerThanGrid { h, w, rows, cols });
    }
    match cfg.channel_mode {
        ChannelMode::PerChannel => {
            let planes = (0..3)
                .map(|c| equalize_plane(&img.channel(c), h, w, cfg))
                .collect::<Result<Vec<_>>>()?;
            ImageU8::from_channels(h, w, [&planes[0], &planes[1], &planes[2]])
        }
        ChannelMode::Luminance => {
            let luma: Vec<u8> = img
                .data()
                .chunks_exact(3)
                .map(|p| to_u8(0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])))
                .collect();
            let eq = equalize_plane(&luma, h, w, cfg)?;
            let data = img
                .data()
                .chunks_exact(3)
                .zip(luma.iter().zip(&eq))
                .flat_map(|(p, (&y0, &y1))| {
                    let delta = f64::from(y1) - f64::from(y0);
                    [to_u8(f64::from(p[0]) + delta), to_u8(f64::from(p[1]) + delta), to_u8(f64::from(p[2]) + delta)]
                })
                .collect();
            ImageU8::new(h, w, data)
        }
    }
}
