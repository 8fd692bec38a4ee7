//! Unary and pairwise segment descriptors.

pub mod contour;
pub mod maps;
pub mod normalize;
pub mod pairwise;
pub mod tjunction;
pub mod unary;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use maps::{chi_square, ImageMaps};
pub use normalize::FeatureNormalizer;
pub use pairwise::{
    extremal_edge, gradient_orthogonality, pairwise_region, relative_convexity, surroundedness,
    surroundedness_of,
};
pub use tjunction::{detect_t_junctions, junction_strength, t_junction_feature, SegmentShape, TJunction};
pub use unary::{unary_boundary_contrast, unary_center_surround, unary_gestalt, unary_region};

use crate::graph::ConsistencyGraph;
use crate::mask::{boundary, convexity, dilate, perimeter, shared_boundary_length_grown, MaskError, PixelBoundary, SegmentMask};
use crate::pool::SegmentPool;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("mask is empty")]
    EmptyMask,
    #[error("mask covers the raster, exterior is empty")]
    EmptyExterior,
    #[error("surround strip of width {0} is empty")]
    EmptyStrip(u32),
    #[error("segments share no boundary")]
    NoSharedBoundary,
    #[error("feature vector has {got} values, schema has {expected}")]
    Length { got: usize, expected: usize },
    #[error("normalizer needs at least 2 vectors, got {0}")]
    CorpusTooSmall(usize),
    #[error("schema mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },
}

pub const UNARY_SCHEMA_ID: &str = "unary-v1";
pub const PAIRWISE_SCHEMA_ID: &str = "pairwise-v1";
pub const BIAS: &str = "bias";

/// Ordered feature names. Passthrough features skip normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub id: String,
    pub names: Vec<String>,
    pub passthrough: Vec<bool>,
}

impl FeatureSchema {
    pub fn new(id: impl Into<String>, names: Vec<String>, passthrough: Vec<bool>) -> Self {
        assert_eq!(names.len(), passthrough.len());
        Self {
            id: id.into(),
            names,
            passthrough,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn unary() -> Self {
        let mut names: Vec<String> = unary::REGION_NAMES.iter().map(|s| s.to_string()).collect();
        names.extend(unary::CONTRAST_NAMES.iter().map(|s| s.to_string()));
        names.extend(unary::GESTALT_NAMES.iter().map(|s| s.to_string()));
        names.extend(unary::center_surround_names());
        names.push(BIAS.to_string());
        Self::with_bias(UNARY_SCHEMA_ID, names)
    }

    pub fn pairwise() -> Self {
        let mut names: Vec<String> = unary::REGION_NAMES.iter().map(|s| format!("diff_{s}")).collect();
        for s in ["relative_convexity", "surroundedness", "t_junction", "extremal_edge", BIAS] {
            names.push(s.to_string());
        }
        Self::with_bias(PAIRWISE_SCHEMA_ID, names)
    }

    fn with_bias(id: &str, names: Vec<String>) -> Self {
        let passthrough = names.iter().map(|n| n == BIAS).collect();
        Self::new(id, names, passthrough)
    }

    /// This schema with one more normalized feature appended.
    pub fn extended(&self, id: impl Into<String>, name: &str) -> Self {
        let mut names = self.names.clone();
        let mut passthrough = self.passthrough.clone();
        names.push(name.to_string());
        passthrough.push(false);
        Self::new(id, names, passthrough)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(schema: &FeatureSchema, values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != schema.len() {
            return Err(FeatureError::Length {
                got: values.len(),
                expected: schema.len(),
            });
        }
        Ok(Self {
            schema_id: schema.id.clone(),
            values,
        })
    }
}

/// Raw (un-normalized) features of one pool. `pairs` are the image-neighbor
/// pairs `(i, j)`, `i < j`, in ascending order; `pairwise[k]` belongs to `pairs[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolFeatures {
    pub unary_schema: String,
    pub pairwise_schema: String,
    pub unary: Vec<Vec<f64>>,
    pub pairs: Vec<(usize, usize)>,
    pub pairwise: Vec<Vec<f64>>,
}

impl PoolFeatures {
    pub fn normalized(&self, unary: &FeatureNormalizer, pairwise: &FeatureNormalizer) -> Result<Self, FeatureError> {
        for (norm, id) in [(unary, &self.unary_schema), (pairwise, &self.pairwise_schema)] {
            if &norm.schema_id != id {
                return Err(FeatureError::SchemaMismatch {
                    expected: norm.schema_id.clone(),
                    got: id.clone(),
                });
            }
        }
        Ok(Self {
            unary_schema: self.unary_schema.clone(),
            pairwise_schema: self.pairwise_schema.clone(),
            unary: self.unary.iter().map(|v| unary.apply(v)).collect::<Result<_, _>>()?,
            pairs: self.pairs.clone(),
            pairwise: self.pairwise.iter().map(|v| pairwise.apply(v)).collect::<Result<_, _>>()?,
        })
    }
}

/// Fit unary and pairwise normalizers over a corpus of pools.
pub fn fit_normalizers(
    corpus: &[PoolFeatures],
    unary_schema: &FeatureSchema,
    pairwise_schema: &FeatureSchema,
) -> Result<(FeatureNormalizer, FeatureNormalizer), FeatureError> {
    let u = FeatureNormalizer::fit(unary_schema, corpus.iter().flat_map(|p| p.unary.iter().map(|v| v.as_slice())))?;
    let p = FeatureNormalizer::fit(
        pairwise_schema,
        corpus.iter().flat_map(|p| p.pairwise.iter().map(|v| v.as_slice())),
    )?;
    Ok((u, p))
}

struct SegmentCache {
    unary: Vec<f64>,
    convexity: f64,
    perimeter: f64,
    boundary: PixelBoundary,
    shape: SegmentShape,
    reach: SegmentMask,
}

fn or_zeros(r: Result<Vec<f64>, FeatureError>, len: usize) -> Result<Vec<f64>, FeatureError> {
    match r {
        Ok(v) => Ok(v),
        Err(FeatureError::EmptyExterior) | Err(FeatureError::EmptyStrip(_)) => Ok(vec![0.0; len]),
        Err(e) => Err(e),
    }
}

/// Raw unary schema vector of one segment. Gestalt and surround features of a
/// segment that fills the raster are reported as zeros.
pub fn unary_features(s: &SegmentMask, maps: &ImageMaps) -> Result<Vec<f64>, FeatureError> {
    let mut v = unary_region(s)?;
    v.extend(unary_boundary_contrast(s, maps)?);
    v.extend(or_zeros(unary_gestalt(s, maps), unary::GESTALT_LEN)?);
    v.extend(or_zeros(unary_center_surround(s, maps), unary::CENTER_SURROUND_LEN)?);
    v.push(1.0);
    Ok(v)
}

/// Extract raw unary features for every segment and pairwise features for every
/// image-neighbor pair of `graph`.
pub fn extract_pool_features(
    pool: &SegmentPool,
    graph: &ConsistencyGraph,
    grow_radius: u32,
) -> Result<PoolFeatures, FeatureError> {
    let maps = ImageMaps::new(&pool.image);
    let cache: Vec<SegmentCache> = pool
        .segments
        .par_iter()
        .map(|s| {
            Ok(SegmentCache {
                unary: unary_features(s, &maps)?,
                convexity: convexity(s)?,
                perimeter: perimeter(s) as f64,
                boundary: boundary(s)?,
                shape: SegmentShape::new(s, grow_radius),
                reach: dilate(s, 2 * grow_radius),
            })
        })
        .collect::<Result<_, FeatureError>>()?;
    let pairs = graph.neighbor_pairs();
    let pairwise = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&cache[i], &cache[j]);
            let mut v = pairwise::pairwise_region_from(&a.unary[..unary::REGION_LEN], &b.unary[..unary::REGION_LEN]);
            v.push((a.convexity - b.convexity).abs());
            let l12 = shared_boundary_length_grown(
                &a.shape.mask,
                &b.shape.mask,
                &a.boundary,
                &b.boundary,
                &a.reach,
                &b.reach,
            )?;
            v.push(match surroundedness(a.perimeter, b.perimeter, l12) {
                Ok(s) => s,
                Err(FeatureError::NoSharedBoundary) => 0.0,
                Err(e) => return Err(e),
            });
            let junctions = detect_t_junctions(&a.shape, &b.shape, (i, j), grow_radius);
            v.push(t_junction_feature(&junctions, (i, j)));
            v.push(extremal_edge(&a.shape.mask, &b.shape.mask, &a.shape.grown, &b.shape.grown, &maps)?);
            v.push(1.0);
            Ok(v)
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    Ok(PoolFeatures {
        unary_schema: UNARY_SCHEMA_ID.to_string(),
        pairwise_schema: PAIRWISE_SCHEMA_ID.to_string(),
        unary: cache.into_iter().map(|c| c.unary).collect(),
        pairs,
        pairwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, DEFAULT_GROW_RADIUS};
    use crate::image::RgbImage;

    fn scene(offset: (u32, u32)) -> SegmentPool {
        let (w, h) = (220, 190);
        let mut img = RgbImage::filled(w, h, [30, 30, 30]);
        let (dy, dx) = offset;
        for r in 0..h {
            for c in 0..w {
                let (y, x) = (r as i64 - dy as i64, c as i64 - dx as i64);
                let v = if (20..50).contains(&y) && (20..45).contains(&x) {
                    [200, 40, 40]
                } else if (20..50).contains(&y) && (45..70).contains(&x) {
                    [40, (60 + 2 * (x - 45)) as u8, 200]
                } else if (55..70).contains(&y) && (25..60).contains(&x) {
                    [220, 220, 220]
                } else {
                    [30, 30, 30]
                };
                img.put(r, c, v);
            }
        }
        let rect = |r0, c0, r1, c1| SegmentMask::rect(w, h, r0 + dy, c0 + dx, r1 + dy, c1 + dx);
        let segments = vec![
            rect(20, 20, 50, 45),
            rect(20, 45, 50, 70),
            rect(55, 25, 70, 60),
            rect(20, 20, 50, 70),
            rect(15, 15, 30, 30),
        ];
        SegmentPool::new(img, segments, vec![]).unwrap()
    }

    #[test]
    fn schema_sizes() {
        let u = FeatureSchema::unary();
        let p = FeatureSchema::pairwise();
        assert_eq!(u.len(), 36);
        assert_eq!(p.len(), 16);
        assert_eq!(u.passthrough.iter().filter(|&&x| x).count(), 1);
        assert_eq!(p.names.last().unwrap(), BIAS);
        let names: std::collections::BTreeSet<_> = u.names.iter().collect();
        assert_eq!(names.len(), u.len());
    }

    #[test]
    fn pool_features_are_finite_and_sized() {
        let pool = scene((50, 50));
        let graph = build_graph(&pool, DEFAULT_GROW_RADIUS);
        let f = extract_pool_features(&pool, &graph, DEFAULT_GROW_RADIUS).unwrap();
        assert_eq!(f.unary.len(), pool.len());
        assert_eq!(f.pairs, graph.neighbor_pairs());
        assert!(!f.pairs.is_empty());
        let (u, p) = (FeatureSchema::unary(), FeatureSchema::pairwise());
        for v in &f.unary {
            assert_eq!(v.len(), u.len());
            assert!(v.iter().all(|x| x.is_finite()));
        }
        for v in &f.pairwise {
            assert_eq!(v.len(), p.len());
            assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
        }
    }

    #[test]
    fn pairwise_features_ignore_argument_order() {
        let pool = scene((50, 50));
        let maps = ImageMaps::new(&pool.image);
        let (a, b) = (&pool.segments[0], &pool.segments[1]);
        let (ga, gb) = (dilate(a, 4), dilate(b, 4));
        assert_eq!(pairwise_region(a, b).unwrap(), pairwise_region(b, a).unwrap());
        assert_eq!(surroundedness_of(a, b, 4).unwrap(), surroundedness_of(b, a, 4).unwrap());
        assert_eq!(
            extremal_edge(a, b, &ga, &gb, &maps).unwrap(),
            extremal_edge(b, a, &gb, &ga, &maps).unwrap()
        );
        let (sa, sb) = (SegmentShape::new(a, 4), SegmentShape::new(b, 4));
        let ab = t_junction_feature(&detect_t_junctions(&sa, &sb, (0, 1), 4), (0, 1));
        let ba = t_junction_feature(&detect_t_junctions(&sb, &sa, (1, 0), 4), (1, 0));
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn translation_leaves_appearance_features_unchanged() {
        let base = scene((50, 50));
        let moved = scene((60, 70));
        let g0 = build_graph(&base, DEFAULT_GROW_RADIUS);
        let g1 = build_graph(&moved, DEFAULT_GROW_RADIUS);
        let f0 = extract_pool_features(&base, &g0, DEFAULT_GROW_RADIUS).unwrap();
        let f1 = extract_pool_features(&moved, &g1, DEFAULT_GROW_RADIUS).unwrap();
        assert_eq!(f0.pairs, f1.pairs);
        for (u0, u1) in f0.unary.iter().zip(&f1.unary) {
            // skip position-dependent region features
            for k in unary::REGION_LEN..u0.len() {
                assert!((u0[k] - u1[k]).abs() < 1e-6, "feature {k}: {} vs {}", u0[k], u1[k]);
            }
            for k in [2, 3, 4, 5, 6, 7, 8, 9] {
                assert!((u0[k] - u1[k]).abs() < 1e-9);
            }
        }
        for (p0, p1) in f0.pairwise.iter().zip(&f1.pairwise) {
            // border distance depends on absolute position
            for k in (2..p0.len()).filter(|&k| k != 10) {
                assert!((p0[k] - p1[k]).abs() < 1e-6, "pair feature {k}");
            }
            // centroid differences are unchanged by a common shift
            assert!((p0[0] - p1[0]).abs() < 1e-9 && (p0[1] - p1[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn full_mask_gets_zero_gestalt() {
        let img = RgbImage::filled(30, 30, [1, 2, 3]);
        let v = unary_features(&SegmentMask::full(30, 30), &ImageMaps::new(&img)).unwrap();
        assert_eq!(v.len(), FeatureSchema::unary().len());
        assert!(v[unary::REGION_LEN + unary::CONTRAST_LEN..v.len() - 1].iter().all(|&x| x == 0.0));
        assert_eq!(*v.last().unwrap(), 1.0);
    }
}
