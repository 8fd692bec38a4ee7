//! Per-image derived rasters shared by all descriptors: luminance, gradients,
//! quantized color, and the grid of local-feature samples.

use crate::image::RgbImage;
use crate::mask::SegmentMask;

pub const GRID_STEP: u32 = 10;
pub const GRID_OFFSET: u32 = 5;
pub const HUE_BINS: usize = 16;
pub const RGB_LEVELS: usize = 4;
pub const RGB_BINS: usize = RGB_LEVELS * RGB_LEVELS * RGB_LEVELS;
pub const ORIENT_BINS: usize = 8;
pub const LUM_BINS: usize = 32;

const COLOR_PATCH: i64 = 4;
const SIGNED_PATCH: i64 = 8;
const UNSIGNED_PATCH: i64 = 16;

/// Local features of one grid sample.
#[derive(Debug, Clone)]
pub struct Sample {
    pub row: u32,
    pub col: u32,
    pub hue_bin: u8,
    pub rgb_bin: u8,
    pub signed: [f64; ORIENT_BINS],
    pub unsigned: [f64; ORIENT_BINS],
}

/// Region histograms of the four local-feature kinds, each normalized to unit mass
/// (or all-zero when the region carried no mass).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalHistograms {
    pub hue: Vec<f64>,
    pub rgb: Vec<f64>,
    pub signed: Vec<f64>,
    pub unsigned: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ImageMaps {
    pub width: u32,
    pub height: u32,
    /// Luminance in [0, 1].
    pub lum: Vec<f64>,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    /// Gradient magnitude scaled to [0, 1].
    pub mag: Vec<f64>,
    /// Gradients box-averaged over 3x3.
    pub gx_smooth: Vec<f64>,
    pub gy_smooth: Vec<f64>,
    pub lum_bin: Vec<u8>,
    pub signed_bin: Vec<u8>,
    pub unsigned_bin: Vec<u8>,
    pub hue_bin: Vec<u8>,
    pub rgb_bin: Vec<u8>,
    pub samples: Vec<Sample>,
    /// Row index of the first sample on every grid row, keyed by `(row - GRID_OFFSET) / GRID_STEP`.
    grid_cols: usize,
    pub total_lum_hist: Vec<f64>,
    pub total_orient_hist: Vec<f64>,
}

pub(crate) fn hue_of(rgb: [f64; 3]) -> f64 {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if d <= 1e-12 {
        return 0.0;
    }
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    h / 6.0
}

fn quantize(v: f64, bins: usize) -> u8 {
    ((v * bins as f64).floor() as i64).clamp(0, bins as i64 - 1) as u8
}

fn rgb_bin_of(rgb: [f64; 3]) -> u8 {
    let q = |v: f64| quantize(v, RGB_LEVELS) as usize;
    (q(rgb[0]) * RGB_LEVELS * RGB_LEVELS + q(rgb[1]) * RGB_LEVELS + q(rgb[2])) as u8
}

fn signed_bin_of(gx: f64, gy: f64) -> u8 {
    let a = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
    quantize(a / std::f64::consts::TAU, ORIENT_BINS)
}

fn unsigned_bin_of(gx: f64, gy: f64) -> u8 {
    let a = gy.atan2(gx).rem_euclid(std::f64::consts::PI);
    quantize(a / std::f64::consts::PI, ORIENT_BINS)
}

impl ImageMaps {
    pub fn new(image: &RgbImage) -> Self {
        let (w, h) = (image.width(), image.height());
        let n = w as usize * h as usize;
        let idx = |r: i64, c: i64| -> usize {
            let r = r.clamp(0, h as i64 - 1) as usize;
            let c = c.clamp(0, w as i64 - 1) as usize;
            r * w as usize + c
        };
        let mut rgb = vec![[0.0f64; 3]; n];
        let mut lum = vec![0.0; n];
        for r in 0..h {
            for c in 0..w {
                let px = image.get(r, c);
                let f = [px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0];
                let i = r as usize * w as usize + c as usize;
                rgb[i] = f;
                lum[i] = 0.299 * f[0] + 0.587 * f[1] + 0.114 * f[2];
            }
        }
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        let mut mag = vec![0.0; n];
        let mut signed_bin = vec![0u8; n];
        let mut unsigned_bin = vec![0u8; n];
        let mut lum_bin = vec![0u8; n];
        for r in 0..h as i64 {
            for c in 0..w as i64 {
                let i = idx(r, c);
                gx[i] = (lum[idx(r, c + 1)] - lum[idx(r, c - 1)]) / 2.0;
                gy[i] = (lum[idx(r + 1, c)] - lum[idx(r - 1, c)]) / 2.0;
                mag[i] = ((gx[i] * gx[i] + gy[i] * gy[i]).sqrt() * std::f64::consts::SQRT_2).min(1.0);
                signed_bin[i] = signed_bin_of(gx[i], gy[i]);
                unsigned_bin[i] = unsigned_bin_of(gx[i], gy[i]);
                lum_bin[i] = quantize(lum[i], LUM_BINS);
            }
        }
        let mut gx_smooth = vec![0.0; n];
        let mut gy_smooth = vec![0.0; n];
        for r in 0..h as i64 {
            for c in 0..w as i64 {
                let (mut sx, mut sy) = (0.0, 0.0);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let j = idx(r + dy, c + dx);
                        sx += gx[j];
                        sy += gy[j];
                    }
                }
                gx_smooth[idx(r, c)] = sx / 9.0;
                gy_smooth[idx(r, c)] = sy / 9.0;
            }
        }

        // Per-pixel color codes from the mean of a small patch.
        let patch_mean = |r: i64, c: i64, size: i64| -> [f64; 3] {
            let half = size / 2;
            let mut acc = [0.0; 3];
            let mut count = 0.0;
            for y in r - half..r - half + size {
                for x in c - half..c - half + size {
                    if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
                        continue;
                    }
                    let p = rgb[y as usize * w as usize + x as usize];
                    acc[0] += p[0];
                    acc[1] += p[1];
                    acc[2] += p[2];
                    count += 1.0;
                }
            }
            [acc[0] / count, acc[1] / count, acc[2] / count]
        };
        let hue_bin: Vec<u8> = rgb.iter().map(|&p| quantize(hue_of(p), HUE_BINS)).collect();
        let rgb_bin: Vec<u8> = rgb.iter().map(|&p| rgb_bin_of(p)).collect();

        let orient_patch = |r: i64, c: i64, size: i64, signed: bool| -> [f64; ORIENT_BINS] {
            let half = size / 2;
            let mut hist = [0.0; ORIENT_BINS];
            for y in r - half..r - half + size {
                for x in c - half..c - half + size {
                    if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
                        continue;
                    }
                    let j = y as usize * w as usize + x as usize;
                    let bin = if signed { signed_bin[j] } else { unsigned_bin[j] };
                    hist[bin as usize] += mag[j];
                }
            }
            hist
        };

        let mut samples = Vec::new();
        let grid_cols = if w > GRID_OFFSET {
            ((w - 1 - GRID_OFFSET) / GRID_STEP + 1) as usize
        } else {
            0
        };
        let mut r = GRID_OFFSET;
        while r < h && grid_cols > 0 {
            let mut c = GRID_OFFSET;
            while c < w {
                let color = patch_mean(r as i64, c as i64, COLOR_PATCH);
                samples.push(Sample {
                    row: r,
                    col: c,
                    hue_bin: quantize(hue_of(color), HUE_BINS),
                    rgb_bin: rgb_bin_of(color),
                    signed: orient_patch(r as i64, c as i64, SIGNED_PATCH, true),
                    unsigned: orient_patch(r as i64, c as i64, UNSIGNED_PATCH, false),
                });
                c += GRID_STEP;
            }
            r += GRID_STEP;
        }

        let mut total_lum_hist = vec![0.0; LUM_BINS];
        let mut total_orient_hist = vec![0.0; ORIENT_BINS];
        for i in 0..n {
            total_lum_hist[lum_bin[i] as usize] += 1.0;
            total_orient_hist[signed_bin[i] as usize] += mag[i];
        }

        Self {
            width: w,
            height: h,
            lum,
            gx,
            gy,
            mag,
            gx_smooth,
            gy_smooth,
            lum_bin,
            signed_bin,
            unsigned_bin,
            hue_bin,
            rgb_bin,
            samples,
            grid_cols,
            total_lum_hist,
            total_orient_hist,
        }
    }

    #[inline]
    pub fn index(&self, row: u32, col: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    /// Indices into `samples` of grid samples inside `mask`.
    pub fn samples_in(&self, mask: &SegmentMask) -> Vec<usize> {
        let mut out = Vec::new();
        if self.grid_cols == 0 {
            return out;
        }
        for run in mask.runs() {
            if run.row < GRID_OFFSET || (run.row - GRID_OFFSET) % GRID_STEP != 0 {
                continue;
            }
            let grid_row = ((run.row - GRID_OFFSET) / GRID_STEP) as usize;
            let first = if run.start <= GRID_OFFSET {
                0
            } else {
                (run.start - GRID_OFFSET).div_ceil(GRID_STEP)
            };
            let mut gc = first;
            while GRID_OFFSET + gc * GRID_STEP < run.end && (gc as usize) < self.grid_cols {
                out.push(grid_row * self.grid_cols + gc as usize);
                gc += 1;
            }
        }
        out
    }

    /// Local-feature histograms of a region: grid samples when the region holds
    /// any, otherwise every pixel of the region.
    pub fn local_histograms(&self, mask: &SegmentMask) -> LocalHistograms {
        let mut hue = vec![0.0; HUE_BINS];
        let mut rgb = vec![0.0; RGB_BINS];
        let mut signed = vec![0.0; ORIENT_BINS];
        let mut unsigned = vec![0.0; ORIENT_BINS];
        let ids = self.samples_in(mask);
        if !ids.is_empty() {
            for id in ids {
                let s = &self.samples[id];
                hue[s.hue_bin as usize] += 1.0;
                rgb[s.rgb_bin as usize] += 1.0;
                for k in 0..ORIENT_BINS {
                    signed[k] += s.signed[k];
                    unsigned[k] += s.unsigned[k];
                }
            }
        } else {
            for (r, c) in mask.pixels() {
                let i = self.index(r, c);
                hue[self.hue_bin[i] as usize] += 1.0;
                rgb[self.rgb_bin[i] as usize] += 1.0;
                signed[self.signed_bin[i] as usize] += self.mag[i];
                unsigned[self.unsigned_bin[i] as usize] += self.mag[i];
            }
        }
        LocalHistograms {
            hue: normalized(hue),
            rgb: normalized(rgb),
            signed: normalized(signed),
            unsigned: normalized(unsigned),
        }
    }
}

pub fn normalized(mut h: Vec<f64>) -> Vec<f64> {
    let total: f64 = h.iter().sum();
    if total > 0.0 {
        for v in &mut h {
            *v /= total;
        }
    }
    h
}

/// Chi-square distance `0.5 * sum (h - g)^2 / (h + g)` of unit-mass histograms, in [0, 1].
///
/// Two empty histograms are identical (0); an empty against a non-empty one is maximal (1).
pub fn chi_square(h: &[f64], g: &[f64]) -> f64 {
    let (mh, mg): (f64, f64) = (h.iter().sum(), g.iter().sum());
    match (mh > 0.0, mg > 0.0) {
        (false, false) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    let mut acc = 0.0;
    for (a, b) in h.iter().zip(g) {
        let (a, b) = (a / mh, b / mg);
        if a + b > 0.0 {
            acc += (a - b) * (a - b) / (a + b);
        }
    }
    (0.5 * acc).clamp(0.0, 1.0)
}
