use std::time::Duration;

use rayon::prelude::*;

use super::pool_gen::{generate_corpus, CorpusSpec, SyntheticImage, Variant};
use super::SynthError;
use crate::descriptors::{
    extract_pool_features, fit_normalizers, FeatureNormalizer, FeatureSchema, PoolFeatures, PAIRWISE_SCHEMA_ID, UNARY_SCHEMA_ID,
};
use crate::graph::{build_graph, ConsistencyGraph, DEFAULT_GROW_RADIUS};
use crate::learn::{init_weights, Model, TrainingImage};
use crate::metrics::{evaluate_image, similarity_histogram, EvaluationReport, QualityTable, DEFAULT_HISTOGRAM_BINS};
use crate::pool::SegmentPool;
use crate::tiler::{constrained_random, enum_budget, fg_tiling, EnumConfig, FgConfig, ScoreTable, TilingPool, WeightVector};

pub const PLANTED_SCHEMA_ID: &str = "unary-v1-planted";
pub const PLANTED_FEATURE: &str = "planted_indicator";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    FgTiling,
    EnumBudget(EnumConfig),
    ConstrainedRandom { rng_seed: u64 },
}

/// A pool with its graph and raw features.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    pub id: String,
    pub pool: SegmentPool,
    pub graph: ConsistencyGraph,
    pub raw: PoolFeatures,
}

pub fn prepare_image(id: &str, pool: SegmentPool) -> Result<PreparedImage, SynthError> {
    let graph = build_graph(&pool, DEFAULT_GROW_RADIUS);
    let raw = extract_pool_features(&pool, &graph, DEFAULT_GROW_RADIUS).map_err(|e| SynthError::at(id, e))?;
    Ok(PreparedImage {
        id: id.to_string(),
        pool,
        graph,
        raw,
    })
}

/// Prepare every image; with `planted`, append a unary feature that is 1 on
/// exact ground-truth copies and 0 elsewhere.
pub fn prepare_corpus(images: &[SyntheticImage], planted: bool) -> Result<Vec<PreparedImage>, SynthError> {
    images
        .par_iter()
        .map(|im| {
            let mut p = prepare_image(&im.id, im.pool.pool.clone())?;
            if planted {
                p.raw.unary_schema = PLANTED_SCHEMA_ID.to_string();
                for (row, v) in p.raw.unary.iter_mut().zip(&im.pool.provenance) {
                    row.push(if matches!(v, Variant::Exact { .. }) { 1.0 } else { 0.0 });
                }
            }
            Ok(p)
        })
        .collect()
}

/// Schema for a feature set identified by `id`; unknown ids (precomputed
/// external features) get generic names and no passthrough columns.
pub fn schema_for(id: &str, len: usize) -> FeatureSchema {
    match id {
        UNARY_SCHEMA_ID => FeatureSchema::unary(),
        PAIRWISE_SCHEMA_ID => FeatureSchema::pairwise(),
        PLANTED_SCHEMA_ID => FeatureSchema::unary().extended(PLANTED_SCHEMA_ID, PLANTED_FEATURE),
        _ => FeatureSchema::new(id, (0..len).map(|i| format!("f{i}")).collect(), vec![false; len]),
    }
}

/// Normalized training images and the normalizers used; normalizers are
/// fitted on `prepared` unless `model` supplies them.
pub fn training_set(
    prepared: &[PreparedImage],
    model: Option<&Model>,
) -> Result<(Vec<TrainingImage>, (FeatureNormalizer, FeatureNormalizer)), SynthError> {
    let (un, pn) = match model {
        Some(m) => (m.unary_normalizer.clone(), m.pairwise_normalizer.clone()),
        None => {
            let corpus: Vec<PoolFeatures> = prepared.iter().map(|p| p.raw.clone()).collect();
            let first = prepared.first().ok_or_else(|| SynthError::InvalidSpec("no images".into()))?;
            let len = |rows: &[Vec<f64>]| rows.first().map_or(0, Vec::len);
            let uschema = schema_for(&first.raw.unary_schema, len(&first.raw.unary));
            let pschema = schema_for(&first.raw.pairwise_schema, len(&first.raw.pairwise));
            fit_normalizers(&corpus, &uschema, &pschema).map_err(|e| SynthError::at("corpus", e))?
        }
    };
    let images = prepared
        .par_iter()
        .map(|p| {
            Ok(TrainingImage {
                graph: p.graph.clone(),
                features: p.raw.normalized(&un, &pn).map_err(|e| SynthError::at(&p.id, e))?,
                quality: QualityTable::for_pool(&p.pool),
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    Ok((images, (un, pn)))
}

pub fn tile_image(image: &TrainingImage, weights: &WeightVector, method: BenchMethod) -> Result<TilingPool, crate::tiler::TilerError> {
    let table = ScoreTable::new(&image.graph, &image.features, weights)?;
    Ok(match method {
        BenchMethod::FgTiling => fg_tiling(&image.graph, &table, &FgConfig::default()),
        BenchMethod::EnumBudget(config) => enum_budget(&image.graph, &table, &config),
        BenchMethod::ConstrainedRandom { rng_seed } => constrained_random(&image.graph, &table, rng_seed),
    })
}

/// Metrics of ranked pools against each image's ground truth.
pub fn evaluate_pools(prepared: &[PreparedImage], images: &[TrainingImage], pools: &[TilingPool], cap: usize) -> EvaluationReport {
    let results: Vec<_> = images.iter().zip(pools).map(|(im, p)| evaluate_image(&im.quality, p)).collect();
    let mut histogram = vec![0u64; DEFAULT_HISTOGRAM_BINS];
    for (p, pool) in prepared.iter().zip(pools) {
        let h = similarity_histogram(&p.pool.segments, pool, p.pool.width(), p.pool.height(), DEFAULT_HISTOGRAM_BINS);
        for (a, b) in histogram.iter_mut().zip(h) {
            *a += b;
        }
    }
    let names: Vec<String> = prepared.iter().map(|p| p.id.clone()).collect();
    EvaluationReport::new(&names, &results, cap, histogram)
}

/// Generate a corpus, tile every image with `method` and evaluate. Without a
/// model, normalizers are fitted on the corpus and the regression
/// initialization supplies the weights.
pub fn run_benchmark(
    corpus: &CorpusSpec,
    method: BenchMethod,
    model: Option<&Model>,
    cap: usize,
) -> Result<EvaluationReport, SynthError> {
    let images = generate_corpus(corpus)?;
    let prepared = prepare_corpus(&images, false)?;
    let (train, _) = training_set(&prepared, model)?;
    let weights = match model {
        Some(m) => m.weights.clone(),
        None => init_weights(&train).map_err(|e| SynthError::at("corpus", e))?,
    };
    let pools = train
        .par_iter()
        .zip(&prepared)
        .map(|(im, p)| tile_image(im, &weights, method).map_err(|e| SynthError::at(&p.id, e)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(evaluate_pools(&prepared, &train, &pools, cap))
}

/// Budget used by the time-limited enumeration baseline.
pub const DEFAULT_ENUM_BUDGET: Duration = Duration::from_secs(60);
