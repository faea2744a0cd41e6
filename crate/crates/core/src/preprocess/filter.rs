use super::{to_u8, EnhanceConfig, ImageU8, Result};

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Median over a `window×window` neighbourhood with edge replication.
pub fn median_filter(plane: &[u8], h: usize, w: usize, window: usize) -> Vec<u8> {
    let r = (window / 2) as isize;
    let mut buf = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(plane.len());
    for y in 0..h as isize {
        for x in 0..w as isize {
            buf.clear();
            for dy in -r..=r {
                let row = clamp_index(y + dy, h) * w;
                for dx in -r..=r {
                    buf.push(plane[row + clamp_index(x + dx, w)]);
                }
            }
            let mid = buf.len() / 2;
            out.push(*buf.select_nth_unstable(mid).1);
        }
    }
    out
}

/// Gaussian blur with radius `⌈3σ⌉`, edge replication and weights normalized to sum 1.
/// `sigma == 0` returns the plane unchanged.
pub fn gaussian_blur(plane: &[u8], h: usize, w: usize, sigma: f64) -> Vec<u8> {
    if sigma == 0.0 {
        return plane.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = taps.iter().sum::<f64>().powi(2);
    let mut out = Vec::with_capacity(plane.len());
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (wy, dy) in taps.iter().zip(-r..=r) {
                let row = clamp_index(y + dy, h) * w;
                for (wx, dx) in taps.iter().zip(-r..=r) {
                    acc += wy * wx * f64::from(plane[row + clamp_index(x + dx, w)]);
                }
            }
            out.push(to_u8(acc / norm));
        }
    }
    out
}

/// Per channel: median filter, then Gaussian blur.
pub fn hybrid_filter(img: &ImageU8, cfg: &EnhanceConfig) -> Result<ImageU8> {
    cfg.validate()?;
    let (h, w) = (img.height(), img.width());
    let planes: Vec<Vec<u8>> = (0..3)
        .map(|c| gaussian_blur(&median_filter(&img.channel(c), h, w, cfg.median_window), h, w, cfg.gaussian_sigma))
        .collect();
    ImageU8::from_channels(h, w, [&planes[0], &planes[1], &planes[2]])
}
