use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{generate_scene, Scene, SceneSpec};
use super::SynthError;
use crate::mask::{dilate, erode, shared_edge_count, SegmentMask};
use crate::pool::SegmentPool;

/// Variants generated per true region (`exact`, `morphed`, `translated`), per
/// adjacent region pair (`merged`) and per image (`distractors`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub exact: usize,
    pub morphed: usize,
    pub translated: usize,
    pub merged: usize,
    pub distractors: usize,
    pub seed: u64,
}

impl PoolSpec {
    pub fn exact_only(seed: u64) -> Self {
        Self {
            exact: 1,
            morphed: 0,
            translated: 0,
            merged: 0,
            distractors: 0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.exact + self.morphed + self.translated + self.merged + self.distractors == 0 {
            return Err(SynthError::InvalidSpec("pool spec generates no segments".into()));
        }
        Ok(())
    }
}

pub const MAX_MORPH_RADIUS: u32 = 6;
pub const MAX_SHIFT: i64 = 8;

/// Where a synthetic segment came from; not visible to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Variant {
    Exact { region: usize },
    Dilated { region: usize, radius: u32 },
    Eroded { region: usize, radius: u32 },
    Translated { region: usize, dy: i64, dx: i64 },
    Merged { a: usize, b: usize },
    Distractor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPool {
    pub pool: SegmentPool,
    pub provenance: Vec<Variant>,
    /// Variants that came out empty and were left out.
    pub dropped: Vec<Variant>,
}

/// Irregular blob: a disc whose radius is modulated by bilinear value noise.
fn random_blob(w: u32, h: u32, rng: &mut ChaCha8Rng) -> SegmentMask {
    const CELL: u32 = 12;
    let gw = w / CELL + 2;
    let gh = h / CELL + 2;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cy = rng.random_range(0.0..h as f64);
    let cx = rng.random_range(0.0..w as f64);
    let radius = rng.random_range(w.min(h) as f64 / 12.0..w.min(h) as f64 / 4.0);
    let noise = |r: u32, c: u32| {
        let (y, x) = (r as f64 / CELL as f64, c as f64 / CELL as f64);
        let (i, j) = (y.floor() as u32, x.floor() as u32);
        let (fy, fx) = (y - i as f64, x - j as f64);
        let at = |a: u32, b: u32| grid[(a * gw + b) as usize];
        at(i, j) * (1.0 - fy) * (1.0 - fx) + at(i + 1, j) * fy * (1.0 - fx) + at(i, j + 1) * (1.0 - fy) * fx + at(i + 1, j + 1) * fy * fx
    };
    SegmentMask::from_fn(w, h, |r, c| {
        let d = ((r as f64 + 0.5 - cy).powi(2) + (c as f64 + 0.5 - cx).powi(2)).sqrt();
        d / radius + 0.45 * noise(r, c) < 1.0
    })
}

/// Region pairs `(a, b)`, `a < b`, sharing at least one pixel edge.
pub fn adjacent_regions(regions: &[SegmentMask]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..regions.len() {
        for b in a + 1..regions.len() {
            if shared_edge_count(&regions[a], &regions[b]).unwrap_or(0) > 0 {
                out.push((a, b));
            }
        }
    }
    out
}

pub fn generate_pool(scene: &Scene, spec: &PoolSpec) -> Result<SyntheticPool, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let regions = scene.ground_truth.regions();
    let (w, h) = (scene.image.width(), scene.image.height());
    let mut made: Vec<(SegmentMask, Variant)> = Vec::new();
    for (i, region) in regions.iter().enumerate() {
        for _ in 0..spec.exact {
            made.push((region.clone(), Variant::Exact { region: i }));
        }
        for _ in 0..spec.morphed {
            let radius = rng.random_range(1..=MAX_MORPH_RADIUS);
            if rng.random_bool(0.5) {
                made.push((dilate(region, radius), Variant::Dilated { region: i, radius }));
            } else {
                made.push((erode(region, radius), Variant::Eroded { region: i, radius }));
            }
        }
        for _ in 0..spec.translated {
            let (dy, dx) = loop {
                let dy = rng.random_range(-MAX_SHIFT..=MAX_SHIFT);
                let dx = rng.random_range(-MAX_SHIFT..=MAX_SHIFT);
                if dy != 0 || dx != 0 {
                    break (dy, dx);
                }
            };
            made.push((region.translate(dy, dx), Variant::Translated { region: i, dy, dx }));
        }
    }
    for (a, b) in adjacent_regions(regions) {
        for _ in 0..spec.merged {
            made.push((regions[a].union(&regions[b])?, Variant::Merged { a, b }));
        }
    }
    for _ in 0..spec.distractors {
        made.push((random_blob(w, h, &mut rng), Variant::Distractor));
    }
    let (kept, dropped): (Vec<_>, Vec<_>) = made.into_iter().partition(|(m, _)| !m.is_empty());
    let dropped: Vec<Variant> = dropped.into_iter().map(|d| d.1).collect();
    for d in &dropped {
        log::debug!("dropped empty variant {d:?}");
    }
    let (segments, provenance): (Vec<SegmentMask>, Vec<Variant>) = kept.into_iter().unzip();
    let pool = SegmentPool::new(scene.image.clone(), segments, vec![scene.ground_truth.clone()])?;
    Ok(SyntheticPool {
        pool,
        provenance,
        dropped,
    })
}

/// A set of images sharing one scene and pool recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub images: usize,
    /// Template; its seed is replaced per image.
    pub scene: SceneSpec,
    /// Template; its seed is replaced per image.
    pub pool: PoolSpec,
    pub seed: u64,
}

impl CorpusSpec {
    /// Voronoi scenes with a mixed pool of true, corrupted and distractor segments.
    pub fn standard(images: usize, seed: u64) -> Self {
        Self {
            images,
            scene: SceneSpec {
                width: 160,
                height: 120,
                k: 6,
                layout: super::Layout::Voronoi,
                colors: Vec::new(),
                noise_std: 30.0,
                shading: false,
                seed: 0,
            },
            pool: PoolSpec {
                exact: 1,
                morphed: 3,
                translated: 2,
                merged: 1,
                distractors: 15,
                seed: 0,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.images == 0 {
            return Err(SynthError::InvalidSpec("corpus has no images".into()));
        }
        self.scene.validate()?;
        self.pool.validate()
    }

    /// Scene and pool seeds of image `i`, from independent streams of the corpus seed.
    pub fn image_seeds(&self, i: usize) -> (u64, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        (rng.next_u64(), rng.next_u64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub id: String,
    pub scene: Scene,
    pub pool: SyntheticPool,
}

pub fn image_id(i: usize) -> String {
    format!("img{i:04}")
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<SyntheticImage>, SynthError> {
    spec.validate()?;
    (0..spec.images)
        .into_par_iter()
        .map(|i| {
            let (scene_seed, pool_seed) = spec.image_seeds(i);
            let scene = generate_scene(&SceneSpec {
                seed: scene_seed,
                ..spec.scene.clone()
            })?;
            let pool = generate_pool(
                &scene,
                &PoolSpec {
                    seed: pool_seed,
                    ..spec.pool.clone()
                },
            )?;
            Ok(SyntheticImage {
                id: image_id(i),
                scene,
                pool,
            })
        })
        .collect()
}
