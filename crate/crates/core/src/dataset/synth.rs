use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::metrics::{grade_from_lesions, DRGrade, MILD_MAX_MA, MODERATE_MAX_MA};
use crate::preprocess::ImageU8;

/// Generator geometry and noise. Radii and lengths are in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dot_radius: (f64, f64),
    pub blob_radius: (f64, f64),
    pub filament_length: (f64, f64),
    /// Amplitude range of the low-frequency background ripple, in intensity levels.
    pub ripple_amplitude: (f64, f64),
    /// Dot darkening as a fraction of the local background.
    pub dot_depth: (f64, f64),
    pub noise_sigma: f64,
    /// Minimum centre distance between dots, so drawn counts stay countable.
    pub min_dot_separation: f64,
    /// Dot count range for mild images; must lie within the mild grading band.
    pub mild_dots: (u32, u32),
    /// Dot count range for moderate images; must lie within the moderate grading band.
    pub moderate_dots: (u32, u32),
    /// Upper dot count for severe images (lower bound is one past moderate).
    pub severe_max_dots: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dot_radius: (1.0, 2.0),
            blob_radius: (3.0, 5.0),
            filament_length: (8.0, 15.0),
            ripple_amplitude: (1.0, 2.0),
            dot_depth: (0.55, 0.75),
            noise_sigma: 8.0,
            min_dot_separation: 5.0,
            mild_dots: (1, 3),
            moderate_dots: (9, MODERATE_MAX_MA),
            severe_max_dots: 25,
        }
    }
}

/// Lesions drawn into one synthetic image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LesionCounts {
    pub microaneurysms: u32,
    pub hemorrhages: u32,
    pub filaments: u32,
}

impl LesionCounts {
    pub fn neovascularisation(&self) -> bool {
        self.filaments > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub image: ImageU8,
    pub grade: DRGrade,
    pub lesions: LesionCounts,
}

/// `n_per_class` images of every grade, grouped by grade, all drawn from one seeded stream.
pub fn synth_dataset(n_per_class: usize, image_size: usize, seed: u64) -> Vec<SynthSample> {
    synth_dataset_with(n_per_class, image_size, seed, &SynthConfig::default())
}

pub fn synth_dataset_with(n_per_class: usize, image_size: usize, seed: u64, cfg: &SynthConfig) -> Vec<SynthSample> {
    assert!(n_per_class >= 1, "n_per_class must be >= 1");
    assert!(image_size >= 32, "image_size must be >= 32");
    assert!(
        1 <= cfg.mild_dots.0 && cfg.mild_dots.0 <= cfg.mild_dots.1 && cfg.mild_dots.1 <= MILD_MAX_MA,
        "mild dot range {:?} leaves the mild band",
        cfg.mild_dots
    );
    assert!(
        MILD_MAX_MA < cfg.moderate_dots.0 && cfg.moderate_dots.0 <= cfg.moderate_dots.1 && cfg.moderate_dots.1 <= MODERATE_MAX_MA,
        "moderate dot range {:?} leaves the moderate band",
        cfg.moderate_dots
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_per_class * DRGrade::COUNT);
    for grade in DRGrade::ALL {
        for _ in 0..n_per_class {
            out.push(synth_image(grade, image_size, cfg, &mut rng));
        }
    }
    out
}

fn lesion_plan(grade: DRGrade, cfg: &SynthConfig, rng: &mut impl Rng) -> LesionCounts {
    let (microaneurysms, hemorrhages, filaments) = match grade {
        DRGrade::NoDR => (0, 0, 0),
        DRGrade::MildNPDR => (rng.gen_range(cfg.mild_dots.0..=cfg.mild_dots.1), 0, 0),
        DRGrade::ModerateNPDR => (rng.gen_range(cfg.moderate_dots.0..=cfg.moderate_dots.1), 0, 0),
        DRGrade::SevereNPDR => (rng.gen_range(MODERATE_MAX_MA + 1..=cfg.severe_max_dots), rng.gen_range(2..=4), 0),
        DRGrade::ProliferativeDR => (rng.gen_range(0..=MODERATE_MAX_MA), 0, rng.gen_range(2..=4)),
    };
    LesionCounts { microaneurysms, hemorrhages, filaments }
}

struct Canvas {
    size: usize,
    rgb: Vec<f64>,
    center: f64,
    radius: f64,
}

impl Canvas {
    fn inside(&self, y: f64, x: f64) -> bool {
        (y - self.center).powi(2) + (x - self.center).powi(2) <= self.radius.powi(2)
    }

    /// Random point at most `margin` inside the disc rim.
    fn point(&self, margin: f64, rng: &mut impl Rng) -> (f64, f64) {
        let r = (self.radius - margin).max(1.0) * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        (self.center + r * a.sin(), self.center + r * a.cos())
    }

    /// Adds `delta` (per channel) to every in-disc pixel within `radius` of `(cy, cx)`.
    fn stamp(&mut self, cy: f64, cx: f64, radius: f64, delta: [f64; 3]) {
        let lo_y = (cy - radius).floor().max(0.0) as usize;
        let lo_x = (cx - radius).floor().max(0.0) as usize;
        let hi_y = ((cy + radius).ceil() as usize).min(self.size - 1);
        let hi_x = ((cx + radius).ceil() as usize).min(self.size - 1);
        for y in lo_y..=hi_y {
            for x in lo_x..=hi_x {
                let (fy, fx) = (y as f64, x as f64);
                if (fy - cy).powi(2) + (fx - cx).powi(2) <= radius * radius && self.inside(fy, fx) {
                    let o = (y * self.size + x) * 3;
                    for (v, d) in self.rgb[o..o + 3].iter_mut().zip(delta) {
                        *v += d;
                    }
                }
            }
        }
    }
}

fn synth_image(grade: DRGrade, size: usize, cfg: &SynthConfig, rng: &mut impl Rng) -> SynthSample {
    let lesions = lesion_plan(grade, cfg, rng);
    let s = size as f64;
    let mut canvas = Canvas { size, rgb: vec![0.0; size * size * 3], center: (s - 1.0) / 2.0, radius: 0.46 * s };

    // textured fundus disc: warm base, radial falloff, low-frequency ripple
    let base = [rng.gen_range(165.0..190.0), rng.gen_range(70.0..90.0), rng.gen_range(30.0..45.0)];
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let f = rng.gen_range(1.0..3.0) * std::f64::consts::TAU / s;
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            (f * a.cos(), f * a.sin(), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(cfg.ripple_amplitude.0..=cfg.ripple_amplitude.1))
        })
        .collect();
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f64, x as f64);
            if !canvas.inside(fy, fx) {
                continue;
            }
            let r = ((fy - canvas.center).powi(2) + (fx - canvas.center).powi(2)).sqrt() / canvas.radius;
            let falloff = 1.0 - 0.35 * r * r;
            let ripple: f64 = waves.iter().map(|&(ky, kx, ph, amp)| amp * (ky * fy + kx * fx + ph).sin()).sum();
            let o = (y * size + x) * 3;
            for (v, b) in canvas.rgb[o..o + 3].iter_mut().zip(base) {
                *v = b * falloff + ripple;
            }
        }
    }

    let mut placed: Vec<(f64, f64)> = Vec::new();
    for _ in 0..lesions.microaneurysms {
        let mut at = canvas.point(3.0, rng);
        for _ in 0..200 {
            let clear = placed.iter().all(|&(py, px)| (py - at.0).hypot(px - at.1) >= cfg.min_dot_separation);
            if clear {
                break;
            }
            at = canvas.point(3.0, rng);
        }
        placed.push(at);
        let (cy, cx) = at;
        let r = rng.gen_range(cfg.dot_radius.0..=cfg.dot_radius.1);
        let depth = rng.gen_range(cfg.dot_depth.0..=cfg.dot_depth.1);
        canvas.stamp(cy, cx, r, [-depth * base[0], -depth * base[1], -depth * base[2]]);
    }
    for _ in 0..lesions.hemorrhages {
        let (cy, cx) = canvas.point(6.0, rng);
        let r = rng.gen_range(cfg.blob_radius.0..=cfg.blob_radius.1);
        canvas.stamp(cy, cx, r, [-0.5 * base[0], -0.6 * base[1], -0.6 * base[2]]);
    }
    for _ in 0..lesions.filaments {
        let (mut y, mut x) = canvas.point(10.0, rng);
        let mut heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let length = rng.gen_range(cfg.filament_length.0..=cfg.filament_length.1);
        let branch_at = length * rng.gen_range(0.4..0.7);
        let mut branch = None;
        let mut walked = 0.0;
        while walked < length {
            canvas.stamp(y, x, 0.8, [60.0, 70.0, 45.0]);
            if branch.is_none() && walked >= branch_at {
                branch = Some((y, x, heading + rng.gen_range(0.6..1.2)));
            }
            heading += rng.gen_range(-0.35..0.35);
            y += heading.sin() * 0.5;
            x += heading.cos() * 0.5;
            walked += 0.5;
        }
        if let Some((mut by, mut bx, mut bh)) = branch {
            for _ in 0..(length * 0.8) as usize {
                canvas.stamp(by, bx, 0.8, [60.0, 70.0, 45.0]);
                bh += rng.gen_range(-0.35..0.35);
                by += bh.sin() * 0.5;
                bx += bh.cos() * 0.5;
            }
        }
    }

    let noise = Normal::new(0.0, cfg.noise_sigma).expect("non-negative sigma");
    let data = canvas.rgb.iter().map(|&v| (v + noise.sample(rng)).round().clamp(0.0, 255.0) as u8).collect();
    let image = ImageU8::new(size, size, data).expect("square canvas");
    debug_assert_eq!(grade_from_lesions(lesions.microaneurysms, lesions.neovascularisation()), grade);
    SynthSample { image, grade, lesions }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_agree_with_lesion_rule() {
        let data = synth_dataset(20, 32, 5);
        assert_eq!(data.len(), 100);
        for s in &data {
            assert_eq!(grade_from_lesions(s.lesions.microaneurysms, s.lesions.neovascularisation()), s.grade);
            if s.grade == DRGrade::NoDR {
                assert_eq!(s.lesions, LesionCounts { microaneurysms: 0, hemorrhages: 0, filaments: 0 });
            }
        }
    }

    #[test]
    fn same_seed_same_images() {
        assert_eq!(synth_dataset(2, 40, 11), synth_dataset(2, 40, 11));
        assert_ne!(synth_dataset(2, 40, 11)[0].image, synth_dataset(2, 40, 12)[0].image);
    }

    #[test]
    fn lesions_darken_or_brighten_the_disc() {
        let cfg = SynthConfig { noise_sigma: 0.0, ..Default::default() };
        let data = synth_dataset_with(1, 64, 3, &cfg);
        let mean = |img: &ImageU8| img.data().iter().map(|&v| f64::from(v)).sum::<f64>() / img.data().len() as f64;
        assert!(mean(&data[3].image) < mean(&data[0].image) + 5.0);
        assert!(data[4].lesions.filaments >= 2);
    }
}
