use super::{to_u8, ImageU8};

/// Source sample positions for each output coordinate, half-pixel centred.
fn taps(out: usize, input: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / out as f64;
    (0..out)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let lo = s.floor() as usize;
            (lo, (lo + 1).min(input - 1), s - lo as f64)
        })
        .collect()
}

/// Bilinear resampling. Output extents of zero are bumped to one.
pub fn resize_bilinear(img: &ImageU8, out_h: usize, out_w: usize) -> ImageU8 {
    let (out_h, out_w) = (out_h.max(1), out_w.max(1));
    if (out_h, out_w) == (img.height(), img.width()) {
        return img.clone();
    }
    let rows = taps(out_h, img.height());
    let cols = taps(out_w, img.width());
    let mut out = ImageU8::filled(out_h, out_w, [0, 0, 0]);
    for (y, &(y0, y1, wy)) in rows.iter().enumerate() {
        for (x, &(x0, x1, wx)) in cols.iter().enumerate() {
            let (a, b, c, d) = (img.pixel(y0, x0), img.pixel(y0, x1), img.pixel(y1, x0), img.pixel(y1, x1));
            let px = std::array::from_fn(|ch| {
                let top = f64::from(a[ch]) * (1.0 - wx) + f64::from(b[ch]) * wx;
                let bottom = f64::from(c[ch]) * (1.0 - wx) + f64::from(d[ch]) * wx;
                to_u8(top * (1.0 - wy) + bottom * wy)
            });
            out.set_pixel(y, x, px);
        }
    }
    out
}
