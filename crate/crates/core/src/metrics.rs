//! Covering-based evaluation of ranked tilings.

use serde::{Deserialize, Serialize};

use crate::mask::SegmentMask;
use crate::pool::{GroundTruthSegmentation, SegmentPool};
use crate::tiler::TilingPool;

pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

/// Intersection-over-union of every segment with every ground-truth region it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityTable {
    raster: f64,
    /// `region_areas[g][r]`
    region_areas: Vec<Vec<f64>>,
    /// `overlaps[g][s]` = sparse `(region, IoU)` list.
    overlaps: Vec<Vec<Vec<(usize, f64)>>>,
}

fn overlaps_with_partition(seg: &SegmentMask, gt: &GroundTruthSegmentation, areas: &[f64]) -> Vec<(usize, f64)> {
    let w = gt.width() as usize;
    let labels = gt.labels();
    let mut counts: Vec<(usize, u64)> = Vec::new();
    for run in seg.runs() {
        let row = &labels[run.row as usize * w..(run.row as usize + 1) * w];
        let mut c = run.start as usize;
        while c < run.end as usize {
            let l = row[c];
            let mut e = c + 1;
            while e < run.end as usize && row[e] == l {
                e += 1;
            }
            let r = gt.region_labels().binary_search(&l).expect("every label has a region");
            match counts.iter_mut().find(|x| x.0 == r) {
                Some(x) => x.1 += (e - c) as u64,
                None => counts.push((r, (e - c) as u64)),
            }
            c = e;
        }
    }
    counts.sort_unstable();
    let a = seg.area() as f64;
    counts
        .into_iter()
        .map(|(r, inter)| {
            let inter = inter as f64;
            (r, inter / (a + areas[r] - inter))
        })
        .collect()
}

impl QualityTable {
    pub fn new(segments: &[SegmentMask], ground_truth: &[GroundTruthSegmentation]) -> Self {
        let raster = ground_truth
            .first()
            .map_or(0.0, |g| g.width() as f64 * g.height() as f64);
        let mut region_areas = Vec::new();
        let mut overlaps = Vec::new();
        for gt in ground_truth {
            let areas: Vec<f64> = gt.regions().iter().map(|r| r.area() as f64).collect();
            overlaps.push(
                segments
                    .iter()
                    .map(|s| overlaps_with_partition(s, gt, &areas))
                    .collect(),
            );
            region_areas.push(areas);
        }
        Self {
            raster,
            region_areas,
            overlaps,
        }
    }

    pub fn for_pool(pool: &SegmentPool) -> Self {
        Self::new(&pool.segments, &pool.ground_truth)
    }

    pub fn ground_truth_count(&self) -> usize {
        self.region_areas.len()
    }

    /// Mean over ground truths of the area-weighted best overlap of each region.
    pub fn quality(&self, members: &[usize]) -> f64 {
        if self.region_areas.is_empty() || self.raster == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (areas, ov) in self.region_areas.iter().zip(&self.overlaps) {
            let mut best = vec![0.0f64; areas.len()];
            for &s in members {
                for &(r, o) in &ov[s] {
                    if o > best[r] {
                        best[r] = o;
                    }
                }
            }
            total += areas.iter().zip(&best).map(|(a, b)| a * b).sum::<f64>() / self.raster;
        }
        total / self.region_areas.len() as f64
    }

    /// Best overlap of segment `s` with any region, averaged over ground truths.
    pub fn best_overlap(&self, s: usize) -> f64 {
        if self.overlaps.is_empty() {
            return 0.0;
        }
        self.overlaps
            .iter()
            .map(|ov| ov[s].iter().map(|x| x.1).fold(0.0, f64::max))
            .sum::<f64>()
            / self.overlaps.len() as f64
    }

    /// Covering by the union of the members of all tilings.
    pub fn union_quality(&self, pool: &TilingPool) -> f64 {
        let mut all: Vec<usize> = pool.tilings.iter().flat_map(|t| t.members.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        self.quality(&all)
    }
}

/// Covering of one partition by a set of segments.
pub fn covering(segments: &[&SegmentMask], gt: &GroundTruthSegmentation) -> f64 {
    let owned: Vec<SegmentMask> = segments.iter().map(|s| (*s).clone()).collect();
    let table = QualityTable::new(&owned, std::slice::from_ref(gt));
    table.quality(&(0..owned.len()).collect::<Vec<_>>())
}

/// Ranked qualities of one image's tilings plus its union covering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub qualities: Vec<f64>,
    pub bis: f64,
}

pub fn evaluate_image(table: &QualityTable, pool: &TilingPool) -> ImageResult {
    ImageResult {
        qualities: pool.tilings.iter().map(|t| table.quality(&t.members)).collect(),
        bis: table.union_quality(pool),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Best quality among the top `cap` tilings, 1-based rank of it; `(0, None)` for an empty pool.
pub fn best_within(qualities: &[f64], cap: usize) -> (f64, Option<usize>) {
    let mut best = (0.0, None);
    for (k, &q) in qualities.iter().take(cap).enumerate() {
        if best.1.is_none() || q > best.0 {
            best = (q, Some(k + 1));
        }
    }
    best
}

pub fn ois(images: &[ImageResult], cap: usize) -> f64 {
    mean(images.iter().map(|im| best_within(&im.qualities, cap).0))
}

pub fn first(images: &[ImageResult]) -> f64 {
    mean(images.iter().map(|im| im.qualities.first().copied().unwrap_or(0.0)))
}

pub fn bis(images: &[ImageResult]) -> f64 {
    mean(images.iter().map(|im| im.bis))
}

/// Mean tiling quality over every tiling of every image.
pub fn mean_quality(images: &[ImageResult]) -> f64 {
    mean(images.iter().flat_map(|im| im.qualities.iter().copied()))
}

/// A tiling as a full-raster labeling: per row, `(start, end, label)` with
/// `None` marking pixels no member covers.
struct Labeling {
    rows: Vec<Vec<(u32, u32, Option<u32>)>>,
    sizes: Vec<u64>,
    uncovered: u64,
}

impl Labeling {
    fn new(members: &[&SegmentMask], width: u32, height: u32) -> Self {
        let mut rows: Vec<Vec<(u32, u32, Option<u32>)>> = vec![Vec::new(); height as usize];
        let mut sizes = vec![0u64; members.len()];
        for (k, m) in members.iter().enumerate() {
            for run in m.runs() {
                rows[run.row as usize].push((run.start, run.end, Some(k as u32)));
            }
            sizes[k] = m.area();
        }
        let mut uncovered = 0;
        for row in &mut rows {
            row.sort_unstable_by_key(|r| r.0);
            let mut filled = Vec::with_capacity(row.len() * 2 + 1);
            let mut c = 0;
            for &(s, e, l) in row.iter() {
                if s > c {
                    filled.push((c, s, None));
                    uncovered += (s - c) as u64;
                }
                filled.push((s, e, l));
                c = e;
            }
            if c < width {
                filled.push((c, width, None));
                uncovered += (width - c) as u64;
            }
            *row = filled;
        }
        Self { rows, sizes, uncovered }
    }

    fn slot(l: Option<u32>, n: usize) -> usize {
        l.map_or(n, |v| v as usize)
    }
}

/// Directed covering of `a` (as the reference partition) by `b`, from the
/// contingency table `counts[ia][ib]` whose last index is the uncovered region.
fn directed_covering(counts: &[Vec<u64>], size_a: &[u64], size_b: &[u64], raster: f64) -> f64 {
    let (na, nb) = (size_a.len() - 1, size_b.len() - 1);
    let mut total = 0.0;
    for ia in 0..=na {
        if size_a[ia] == 0 {
            continue;
        }
        // members match members; the uncovered region matches only the uncovered region
        let candidates: Vec<usize> = if ia == na { vec![nb] } else { (0..nb).collect() };
        let mut best = 0.0f64;
        for ib in candidates {
            let inter = counts[ia][ib] as f64;
            if inter > 0.0 {
                best = best.max(inter / (size_a[ia] as f64 + size_b[ib] as f64 - inter));
            }
        }
        total += size_a[ia] as f64 * best;
    }
    total / raster
}

/// Symmetric mutual covering of two tilings of the same raster, in [0, 1].
pub fn tiling_similarity(a: &[&SegmentMask], b: &[&SegmentMask], width: u32, height: u32) -> f64 {
    let la = Labeling::new(a, width, height);
    let lb = Labeling::new(b, width, height);
    similarity_of_labelings(&la, &lb, width, height)
}

fn similarity_of_labelings(la: &Labeling, lb: &Labeling, width: u32, height: u32) -> f64 {
    let (na, nb) = (la.sizes.len(), lb.sizes.len());
    let mut counts = vec![vec![0u64; nb + 1]; na + 1];
    for (ra, rb) in la.rows.iter().zip(&lb.rows) {
        let (mut i, mut j) = (0, 0);
        while i < ra.len() && j < rb.len() {
            let (sa, ea, xa) = ra[i];
            let (sb, eb, xb) = rb[j];
            let s = sa.max(sb);
            let e = ea.min(eb);
            if e > s {
                counts[Labeling::slot(xa, na)][Labeling::slot(xb, nb)] += (e - s) as u64;
            }
            if ea <= eb {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    let mut size_a = la.sizes.clone();
    size_a.push(la.uncovered);
    let mut size_b = lb.sizes.clone();
    size_b.push(lb.uncovered);
    let transposed: Vec<Vec<u64>> = (0..=nb).map(|ib| (0..=na).map(|ia| counts[ia][ib]).collect()).collect();
    let raster = width as f64 * height as f64;
    0.5 * (directed_covering(&counts, &size_a, &size_b, raster) + directed_covering(&transposed, &size_b, &size_a, raster))
}

/// Histogram of similarities over all unordered tiling pairs, `bins` uniform bins on [0, 1].
pub fn similarity_histogram(segments: &[SegmentMask], pool: &TilingPool, width: u32, height: u32, bins: usize) -> Vec<u64> {
    let labelings: Vec<Labeling> = pool
        .tilings
        .iter()
        .map(|t| {
            let members: Vec<&SegmentMask> = t.members.iter().map(|&i| &segments[i]).collect();
            Labeling::new(&members, width, height)
        })
        .collect();
    let mut hist = vec![0u64; bins];
    for i in 0..labelings.len() {
        for j in i + 1..labelings.len() {
            let s = similarity_of_labelings(&labelings[i], &labelings[j], width, height);
            let b = ((s * bins as f64).floor() as usize).min(bins - 1);
            hist[b] += 1;
        }
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image: String,
    pub tilings: usize,
    pub best_quality: f64,
    /// 1-based rank of the best tiling within the cap.
    pub best_rank: Option<usize>,
    pub first: f64,
    pub bis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub cap: usize,
    pub images: Vec<ImageRecord>,
    pub ois: f64,
    pub first: f64,
    pub bis: f64,
    pub mean_quality: f64,
    pub histogram: Vec<u64>,
}

impl EvaluationReport {
    /// `histogram` is the element-wise sum of per-image similarity histograms.
    pub fn new(names: &[String], results: &[ImageResult], cap: usize, histogram: Vec<u64>) -> Self {
        let images = names
            .iter()
            .zip(results)
            .map(|(name, r)| {
                let (best_quality, best_rank) = best_within(&r.qualities, cap);
                ImageRecord {
                    image: name.clone(),
                    tilings: r.qualities.len(),
                    best_quality,
                    best_rank,
                    first: r.qualities.first().copied().unwrap_or(0.0),
                    bis: r.bis,
                }
            })
            .collect();
        Self {
            cap,
            images,
            ois: ois(results, cap),
            first: first(results),
            bis: bis(results),
            mean_quality: mean_quality(results),
            histogram,
        }
    }
}
