//! Versioned JSON documents exchanged by the command-line tool.

use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::descriptors::{FeatureNormalizer, PoolFeatures};
use crate::image::RgbImage;
use crate::learn::{Model, TraceRow};
use crate::mask::{Run, SegmentMask};
use crate::metrics::EvaluationReport;
use crate::pool::{GroundTruthSegmentation, SegmentPool};
use crate::synth::CorpusSpec;
use crate::tiler::{TilingPool, WeightVector};

pub const FORMAT_VERSION: u32 = 1;

fn check_version(kind: &str, got: u32) -> Result<(), CliError> {
    if got == FORMAT_VERSION {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{kind} version {got} is not supported (expected {FORMAT_VERSION})")))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Write through a temporary sibling and rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let io = |e: std::io::Error| CliError::Internal(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: usize,
    /// `[row, col_start, col_end]`, half-open.
    pub runs: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub values: Vec<f64>,
}

/// Raw (un-normalized) features stored alongside a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSection {
    pub unary_schema: String,
    pub pairwise_schema: String,
    pub unary: Vec<Vec<f64>>,
    pub pairwise: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolFile {
    pub version: u32,
    pub width: u32,
    pub height: u32,
    /// Base64 of the raw RGB rows.
    pub image: String,
    pub segments: Vec<SegmentRecord>,
    /// Per ground truth, per row: `[label, count]` runs.
    pub ground_truths: Vec<Vec<Vec<[u32; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureSection>,
}

impl PoolFile {
    pub fn from_pool(pool: &SegmentPool, features: Option<&PoolFeatures>) -> Self {
        let (w, h) = (pool.width(), pool.height());
        let ground_truths = pool
            .ground_truth
            .iter()
            .map(|g| {
                g.labels()
                    .chunks(w as usize)
                    .map(|row| {
                        let mut runs: Vec<[u32; 2]> = Vec::new();
                        for &l in row {
                            match runs.last_mut() {
                                Some(last) if last[0] == l => last[1] += 1,
                                _ => runs.push([l, 1]),
                            }
                        }
                        runs
                    })
                    .collect()
            })
            .collect();
        Self {
            version: FORMAT_VERSION,
            width: w,
            height: h,
            image: STANDARD.encode(pool.image.raw()),
            segments: pool
                .segments
                .iter()
                .enumerate()
                .map(|(id, s)| SegmentRecord {
                    id,
                    runs: s.runs().iter().map(|r| [r.row, r.start, r.end]).collect(),
                })
                .collect(),
            ground_truths,
            features: features.map(|f| FeatureSection {
                unary_schema: f.unary_schema.clone(),
                pairwise_schema: f.pairwise_schema.clone(),
                unary: f.unary.clone(),
                pairwise: f
                    .pairs
                    .iter()
                    .zip(&f.pairwise)
                    .map(|(&(i, j), v)| PairRecord { i, j, values: v.clone() })
                    .collect(),
            }),
        }
    }

    pub fn to_pool(&self) -> Result<(SegmentPool, Option<PoolFeatures>), CliError> {
        check_version("pool file", self.version)?;
        let bad = |m: String| CliError::Validation(m);
        let (w, h) = (self.width, self.height);
        let raw = STANDARD.decode(&self.image).map_err(|e| bad(format!("image payload: {e}")))?;
        let image = RgbImage::from_raw(w, h, raw).map_err(|e| bad(e.to_string()))?;
        let mut segments = Vec::with_capacity(self.segments.len());
        for (k, s) in self.segments.iter().enumerate() {
            if s.id != k {
                return Err(bad(format!("segment ids must be 0..N in order; found {} at {k}", s.id)));
            }
            let runs = s.runs.iter().map(|r| Run::new(r[0], r[1], r[2]));
            segments.push(SegmentMask::from_runs(w, h, runs).map_err(|e| bad(format!("segment {k}: {e}")))?);
        }
        let mut ground_truth = Vec::new();
        for (g, rows) in self.ground_truths.iter().enumerate() {
            if rows.len() != h as usize {
                return Err(bad(format!("ground truth {g} has {} rows, expected {h}", rows.len())));
            }
            let mut labels = Vec::with_capacity((w * h) as usize);
            for (r, runs) in rows.iter().enumerate() {
                let before = labels.len();
                for &[l, n] in runs {
                    labels.extend(std::iter::repeat_n(l, n as usize));
                }
                if labels.len() - before != w as usize {
                    return Err(bad(format!("ground truth {g} row {r} covers {} pixels, expected {w}", labels.len() - before)));
                }
            }
            ground_truth.push(GroundTruthSegmentation::from_labels(w, h, labels).map_err(|e| bad(e.to_string()))?);
        }
        let pool = SegmentPool::new(image, segments, ground_truth).map_err(|e| bad(e.to_string()))?;
        let features = self.features.as_ref().map(|f| PoolFeatures {
            unary_schema: f.unary_schema.clone(),
            pairwise_schema: f.pairwise_schema.clone(),
            unary: f.unary.clone(),
            pairs: f.pairwise.iter().map(|p| (p.i, p.j)).collect(),
            pairwise: f.pairwise.iter().map(|p| p.values.clone()).collect(),
        });
        if let Some(f) = &features {
            if f.unary.len() != pool.len() {
                return Err(bad(format!("{} unary rows for {} segments", f.unary.len(), pool.len())));
            }
        }
        Ok((pool, features))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub version: u32,
    pub corpus: CorpusSpec,
    /// Store features with an extra unary indicator of exact ground-truth segments.
    #[serde(default)]
    pub planted: bool,
}

impl CorpusFile {
    pub fn check(&self) -> Result<(), CliError> {
        check_version("corpus spec", self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub unary: FeatureNormalizer,
    pub pairwise: FeatureNormalizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub images: Vec<String>,
    pub k: usize,
    pub outer_max_iters: usize,
    pub inner_max_iters: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub version: u32,
    pub unary_schema: String,
    pub pairwise_schema: String,
    pub theta_u: Vec<f64>,
    pub theta_p: Vec<f64>,
    pub normalizer: Normalizers,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingRecord>,
}

impl WeightsFile {
    pub fn new(model: &Model, training: Option<TrainingRecord>) -> Self {
        Self {
            version: FORMAT_VERSION,
            unary_schema: model.weights.unary_schema.clone(),
            pairwise_schema: model.weights.pairwise_schema.clone(),
            theta_u: model.weights.theta_u.clone(),
            theta_p: model.weights.theta_p.clone(),
            normalizer: Normalizers {
                unary: model.unary_normalizer.clone(),
                pairwise: model.pairwise_normalizer.clone(),
            },
            training,
        }
    }

    pub fn to_model(&self) -> Result<Model, CliError> {
        check_version("weights file", self.version)?;
        let bad = |m: String| Err(CliError::Validation(m));
        if self.theta_u.len() != self.normalizer.unary.mean.len() || self.theta_p.len() != self.normalizer.pairwise.mean.len() {
            return bad("weight vector lengths do not match the normalizers".into());
        }
        if self.unary_schema != self.normalizer.unary.schema_id || self.pairwise_schema != self.normalizer.pairwise.schema_id {
            return bad("weight schemas do not match the normalizers".into());
        }
        let weights = WeightVector {
            unary_schema: self.unary_schema.clone(),
            pairwise_schema: self.pairwise_schema.clone(),
            theta_u: self.theta_u.clone(),
            theta_p: self.theta_p.clone(),
        };
        weights.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(Model {
            weights,
            unary_normalizer: self.normalizer.unary.clone(),
            pairwise_normalizer: self.normalizer.pairwise.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingRecord {
    pub rank: usize,
    pub score: f64,
    pub member_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingsFile {
    pub version: u32,
    pub method: String,
    pub segments: usize,
    pub tilings: Vec<TilingRecord>,
}

impl TilingsFile {
    pub fn new(pool: &TilingPool, method: &str, segments: usize) -> Self {
        Self {
            version: FORMAT_VERSION,
            method: method.to_string(),
            segments,
            tilings: pool
                .tilings
                .iter()
                .enumerate()
                .map(|(k, t)| TilingRecord {
                    rank: k + 1,
                    score: t.score,
                    member_ids: t.members.clone(),
                })
                .collect(),
        }
    }

    /// Member lists in rank order, checked against a pool of `n` segments.
    pub fn members(&self, n: usize) -> Result<Vec<Vec<usize>>, CliError> {
        check_version("tilings file", self.version)?;
        if self.segments != n {
            return Err(CliError::Validation(format!("tilings refer to {} segments, pool has {n}", self.segments)));
        }
        let mut out = Vec::with_capacity(self.tilings.len());
        for (k, t) in self.tilings.iter().enumerate() {
            if t.rank != k + 1 {
                return Err(CliError::Validation(format!("tiling at position {} has rank {}", k + 1, t.rank)));
            }
            if let Some(&bad) = t.member_ids.iter().find(|&&m| m >= n) {
                return Err(CliError::Validation(format!("tiling {} names segment {bad} of {n}", t.rank)));
            }
            out.push(t.member_ids.clone());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    #[serde(flatten)]
    pub report: EvaluationReport,
}
