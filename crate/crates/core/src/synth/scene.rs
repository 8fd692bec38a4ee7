use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::image::RgbImage;
use crate::pool::GroundTruthSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Voronoi,
    RectGrid,
    OccludingShapes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// Number of regions, background included.
    pub k: usize,
    pub layout: Layout,
    /// Per-region base colors; random when shorter than `k`.
    #[serde(default)]
    pub colors: Vec<[u8; 3]>,
    pub noise_std: f64,
    /// Darken occluding shapes toward their outline.
    #[serde(default)]
    pub shading: bool,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.k < 2 {
            return bad(format!("scene needs at least 2 regions, got {}", self.k));
        }
        if self.width < 8 || self.height < 8 {
            return bad(format!("raster {}x{} is too small", self.width, self.height));
        }
        if self.k as u64 * 16 > self.width as u64 * self.height as u64 {
            return bad(format!("{} regions do not fit a {}x{} raster", self.k, self.width, self.height));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return bad(format!("noise std {} must be finite and non-negative", self.noise_std));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: RgbImage,
    pub ground_truth: GroundTruthSegmentation,
}

/// An axis-aligned shape on the pixel grid.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// Half-open `[row0, row1) x [col0, col1)`.
    Rect { row0: u32, col0: u32, row1: u32, col1: u32 },
    Disc { row: f64, col: f64, radius: f64 },
}

impl Shape {
    fn contains(&self, r: u32, c: u32) -> bool {
        match *self {
            Shape::Rect { row0, col0, row1, col1 } => r >= row0 && r < row1 && c >= col0 && c < col1,
            Shape::Disc { row, col, radius } => {
                let (dr, dc) = (r as f64 + 0.5 - row, c as f64 + 0.5 - col);
                dr * dr + dc * dc <= radius * radius
            }
        }
    }

    /// Distance of an inside pixel center to the outline.
    fn depth(&self, r: u32, c: u32) -> f64 {
        let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
        match *self {
            Shape::Rect { row0, col0, row1, col1 } => {
                (y - row0 as f64).min(row1 as f64 - y).min(x - col0 as f64).min(col1 as f64 - x)
            }
            Shape::Disc { row, col, radius } => radius - ((y - row).powi(2) + (x - col).powi(2)).sqrt(),
        }
    }
}

const SHADING_DEPTH: f64 = 6.0;

fn random_colors(k: usize, given: &[[u8; 3]], rng: &mut ChaCha8Rng) -> Vec<[u8; 3]> {
    let mut colors: Vec<[u8; 3]> = given.iter().take(k).copied().collect();
    while colors.len() < k {
        let mut best = [0u8; 3];
        let mut best_gap = -1i32;
        for _ in 0..64 {
            let c = [rng.random_range(30..=225u8), rng.random_range(30..=225u8), rng.random_range(30..=225u8)];
            let gap = colors
                .iter()
                .map(|o| (0..3).map(|i| (c[i] as i32 - o[i] as i32).abs()).sum::<i32>())
                .min()
                .unwrap_or(i32::MAX);
            if gap > best_gap {
                best = c;
                best_gap = gap;
            }
            if gap >= 120 {
                break;
            }
        }
        colors.push(best);
    }
    colors
}

fn voronoi_labels(w: u32, h: u32, k: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut sites: Vec<(f64, f64)> = Vec::with_capacity(k);
    while sites.len() < k {
        let s = (rng.random_range(0..h) as f64 + 0.5, rng.random_range(0..w) as f64 + 0.5);
        if !sites.contains(&s) {
            sites.push(s);
        }
    }
    let mut labels = Vec::with_capacity((w * h) as usize);
    for r in 0..h {
        for c in 0..w {
            let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
            let mut best = (f64::INFINITY, 0u32);
            for (i, s) in sites.iter().enumerate() {
                let d = (y - s.0).powi(2) + (x - s.1).powi(2);
                if d < best.0 {
                    best = (d, i as u32);
                }
            }
            labels.push(best.1);
        }
    }
    labels
}

/// Guillotine cuts of the largest cell until there are `k` cells.
fn rect_grid_labels(w: u32, h: u32, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>, SynthError> {
    let mut cells = vec![(0u32, 0u32, h, w)];
    while cells.len() < k {
        let (idx, _) = cells
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (c.2 - c.0) as u64 * (c.3 - c.1) as u64))
            .max_by_key(|&(i, a)| (a, std::cmp::Reverse(i)))
            .expect("at least one cell");
        let (r0, c0, r1, c1) = cells[idx];
        let (hh, ww) = (r1 - r0, c1 - c0);
        if hh.max(ww) < 4 {
            return Err(SynthError::InvalidSpec(format!("cannot split the raster into {k} cells")));
        }
        let along_rows = hh >= ww;
        let len = if along_rows { hh } else { ww };
        let cut = rng.random_range(len * 3 / 10..=len * 7 / 10).clamp(1, len - 1);
        let (a, b) = if along_rows {
            ((r0, c0, r0 + cut, c1), (r0 + cut, c0, r1, c1))
        } else {
            ((r0, c0, r1, c0 + cut), (r0, c0 + cut, r1, c1))
        };
        cells[idx] = a;
        cells.push(b);
    }
    let mut labels = vec![0u32; (w * h) as usize];
    for (l, &(r0, c0, r1, c1)) in cells.iter().enumerate() {
        for r in r0..r1 {
            for c in c0..c1 {
                labels[(r * w + c) as usize] = l as u32;
            }
        }
    }
    Ok(labels)
}

const MIN_VISIBLE: usize = 24;
const SHAPE_ATTEMPTS: usize = 50;

fn random_shape(w: u32, h: u32, rng: &mut ChaCha8Rng) -> Shape {
    let m = w.min(h) as f64;
    match rng.random_range(0..3) {
        0 => {
            let rh = rng.random_range((h / 6).max(3)..=(h / 2).max(4));
            let rw = rng.random_range((w / 6).max(3)..=(w / 2).max(4));
            let row0 = rng.random_range(0..=h - rh.min(h));
            let col0 = rng.random_range(0..=w - rw.min(w));
            Shape::Rect {
                row0,
                col0,
                row1: (row0 + rh).min(h),
                col1: (col0 + rw).min(w),
            }
        }
        1 => Shape::Disc {
            row: rng.random_range(0.0..h as f64),
            col: rng.random_range(0.0..w as f64),
            radius: rng.random_range(m / 10.0..m / 4.0),
        },
        _ => {
            // a bar spanning the raster in one direction
            let thick = rng.random_range((m as u32 / 12).max(3)..=(m as u32 / 6).max(4));
            if rng.random_bool(0.5) {
                let col0 = rng.random_range(0..=w - thick);
                Shape::Rect { row0: 0, col0, row1: h, col1: col0 + thick }
            } else {
                let row0 = rng.random_range(0..=h - thick);
                Shape::Rect { row0, col0: 0, row1: row0 + thick, col1: w }
            }
        }
    }
}

/// Label 0 is the background; shapes are painted back to front.
fn occluding_labels(w: u32, h: u32, k: usize, rng: &mut ChaCha8Rng) -> (Vec<u32>, Vec<Option<Shape>>) {
    let mut labels = vec![0u32; (w * h) as usize];
    let mut shapes = vec![None];
    for l in 1..k as u32 {
        let mut placed = false;
        for _ in 0..SHAPE_ATTEMPTS {
            let shape = random_shape(w, h, rng);
            let mut trial = labels.clone();
            for r in 0..h {
                for c in 0..w {
                    if shape.contains(r, c) {
                        trial[(r * w + c) as usize] = l;
                    }
                }
            }
            let mut counts = vec![0usize; l as usize + 1];
            for &t in &trial {
                counts[t as usize] += 1;
            }
            if counts.iter().all(|&n| n >= MIN_VISIBLE) {
                labels = trial;
                shapes.push(Some(shape));
                placed = true;
                break;
            }
        }
        if !placed {
            log::debug!("could not place shape {l}; scene has fewer regions");
        }
    }
    (labels, shapes)
}

fn render(
    w: u32,
    h: u32,
    labels: &[u32],
    colors: &[[u8; 3]],
    shade: impl Fn(u32, u32, u32) -> f64,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> RgbImage {
    let mut img = RgbImage::new(w, h);
    let noise = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
    for r in 0..h {
        for c in 0..w {
            let l = labels[(r * w + c) as usize];
            let base = colors[l as usize % colors.len()];
            let f = shade(l, r, c);
            let mut px = [0u8; 3];
            for i in 0..3 {
                let n = if noise_std > 0.0 { noise.sample(rng) } else { 0.0 };
                px[i] = (base[i] as f64 * f + n).round().clamp(0.0, 255.0) as u8;
            }
            img.put(r, c, px);
        }
    }
    img
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let colors = random_colors(spec.k, &spec.colors, &mut rng);
    let (labels, shapes) = match spec.layout {
        Layout::Voronoi => (voronoi_labels(w, h, spec.k, &mut rng), Vec::new()),
        Layout::RectGrid => (rect_grid_labels(w, h, spec.k, &mut rng)?, Vec::new()),
        Layout::OccludingShapes => occluding_labels(w, h, spec.k, &mut rng),
    };
    let shade = |l: u32, r: u32, c: u32| match shapes.get(l as usize) {
        Some(Some(s)) if spec.shading => 0.55 + 0.45 * (s.depth(r, c) / SHADING_DEPTH).clamp(0.0, 1.0),
        _ => 1.0,
    };
    let image = render(w, h, &labels, &colors, shade, spec.noise_std, &mut rng);
    let ground_truth = GroundTruthSegmentation::from_labels(w, h, labels)?;
    Ok(Scene { image, ground_truth })
}

/// One bar crossing one square on a plain background, with its four junctions.
#[derive(Debug, Clone, PartialEq)]
pub struct BarScene {
    pub scene: Scene,
    /// Region labels; they equal the indices into `ground_truth.regions()`.
    pub background: u32,
    pub square: u32,
    pub bar: u32,
    /// Continuous `(row, col)` corners where a square edge stops at the bar.
    pub junctions: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarPlacement {
    /// Half-open square `[row0, row1) x [col0, col1)`.
    pub square: (u32, u32, u32, u32),
    pub vertical: bool,
    /// Half-open extent of the bar across its direction.
    pub start: u32,
    pub end: u32,
}

pub fn occluding_bar_scene(w: u32, h: u32, placement: BarPlacement, noise_std: f64, seed: u64) -> Result<BarScene, SynthError> {
    let (r0, c0, r1, c1) = placement.square;
    let (lo, hi) = if placement.vertical { (c0, c1) } else { (r0, r1) };
    let (s, e) = (placement.start, placement.end);
    if !(r0 > 0 && c0 > 0 && r1 < h && c1 < w && r0 < r1 && c0 < c1) {
        return Err(SynthError::InvalidSpec("square must lie strictly inside the raster".into()));
    }
    if !(lo < s && s < e && e < hi) {
        return Err(SynthError::InvalidSpec("bar must cross the square's interior".into()));
    }
    let square = Shape::Rect { row0: r0, col0: c0, row1: r1, col1: c1 };
    let bar = if placement.vertical {
        Shape::Rect { row0: 0, col0: s, row1: h, col1: e }
    } else {
        Shape::Rect { row0: s, col0: 0, row1: e, col1: w }
    };
    let mut labels = vec![0u32; (w * h) as usize];
    for r in 0..h {
        for c in 0..w {
            labels[(r * w + c) as usize] = if bar.contains(r, c) {
                2
            } else if square.contains(r, c) {
                1
            } else {
                0
            };
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors = [[70, 90, 200], [210, 180, 60], [60, 170, 90]];
    let image = render(w, h, &labels, &colors, |_, _, _| 1.0, noise_std, &mut rng);
    let edges = if placement.vertical { [r0, r1] } else { [c0, c1] };
    let mut junctions = Vec::new();
    for &edge in &edges {
        for &side in &[s, e] {
            junctions.push(if placement.vertical {
                (edge as f64, side as f64)
            } else {
                (side as f64, edge as f64)
            });
        }
    }
    Ok(BarScene {
        scene: Scene {
            image,
            ground_truth: GroundTruthSegmentation::from_labels(w, h, labels)?,
        },
        background: 0,
        square: 1,
        bar: 2,
        junctions,
    })
}
