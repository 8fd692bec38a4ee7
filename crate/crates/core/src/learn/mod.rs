//! Rank-weighted learning of the tiling potential weights.

mod optimize;

pub use optimize::ridge;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::{FeatureNormalizer, PoolFeatures};
use crate::graph::ConsistencyGraph;
use crate::metrics::QualityTable;
use crate::tiler::{aggregate_features, fg_tiling, FgConfig, ScoreTable, TilerError, TilingPool, WeightVector};
use optimize::{dataset_exact, lbfgs, score_scale, surrogate, ImageCache};

pub const RIDGE_LAMBDA: f64 = 1e-3;
pub const TRACE_OIS_CAP: usize = 64;
/// Temperatures, relative to the score spread, visited by each inner solve.
pub const TEMPERATURES: [f64; 4] = [1.0, 0.464_158_883_361_278, 0.215_443_469_003_188_4, 0.1];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("no training images")]
    NoImages,
    #[error("image {0} has no ground truth")]
    NoGroundTruth(usize),
    #[error("non-finite objective: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Tiler(#[from] TilerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightingKind {
    #[default]
    ReciprocalDecay,
    Dcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    pub k: usize,
    pub weighting: WeightingKind,
    pub inner_max_iters: usize,
    pub outer_max_iters: usize,
    pub tolerance: f64,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            k: 64,
            weighting: WeightingKind::ReciprocalDecay,
            inner_max_iters: 15,
            outer_max_iters: 4,
            tolerance: 1e-4,
        }
    }
}

/// Weight of rank `i` (1-based) under cutoff `k`.
///
/// # Panics
/// If `i == 0` or `i > k`.
pub fn rank_weight(kind: WeightingKind, k: usize, i: usize) -> f64 {
    assert!(i >= 1 && i <= k, "rank {i} outside 1..={k}");
    rank_weight_unchecked(kind, k, i)
}

fn rank_weight_unchecked(kind: WeightingKind, k: usize, i: usize) -> f64 {
    match kind {
        WeightingKind::ReciprocalDecay if k == 1 => 1.0,
        WeightingKind::ReciprocalDecay => 1.0 / (1.0 + (i as f64 - 1.0) / (k as f64 - 1.0)),
        WeightingKind::Dcg => 1.0 / (i as f64 + 1.0).log2(),
    }
}

/// Rank-weighted quality of an already ranked list of tiling qualities.
pub fn objective(ranked_qualities: &[f64], config: &RankConfig) -> f64 {
    ranked_qualities
        .iter()
        .take(config.k)
        .enumerate()
        .map(|(i, q)| rank_weight(config.weighting, config.k, i + 1) * q)
        .sum()
}

/// Weights together with the normalizers their features were scaled by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub weights: WeightVector,
    pub unary_normalizer: FeatureNormalizer,
    pub pairwise_normalizer: FeatureNormalizer,
}

/// What the learner needs from one training image.
#[derive(Debug, Clone)]
pub struct TrainingImage {
    pub graph: ConsistencyGraph,
    /// Normalized features.
    pub features: PoolFeatures,
    pub quality: QualityTable,
}

impl TrainingImage {
    pub fn tile(&self, weights: &WeightVector) -> Result<TilingPool, TilerError> {
        let table = ScoreTable::new(&self.graph, &self.features, weights)?;
        Ok(fg_tiling(&self.graph, &table, &FgConfig::default()))
    }

    fn cache(&self, pool: &TilingPool) -> ImageCache {
        ImageCache {
            members: pool.tilings.iter().map(|t| t.members.clone()).collect(),
            phi: pool
                .tilings
                .iter()
                .map(|t| aggregate_features(&t.members, &self.graph, &self.features))
                .collect(),
            q: pool.tilings.iter().map(|t| self.quality.quality(&t.members)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub first: f64,
    pub ois: f64,
    /// Whether this round's regenerated pools replaced the previous ones.
    pub pools_replaced: bool,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub weights: WeightVector,
    pub pools: Vec<TilingPool>,
    pub trace: Vec<TraceRow>,
    /// Set once the tiling-level regression warm start has been applied.
    pub warm_started: bool,
}

fn check_images(images: &[TrainingImage]) -> Result<(), LearnError> {
    if images.is_empty() {
        return Err(LearnError::NoImages);
    }
    if let Some(i) = images.iter().position(|im| im.quality.ground_truth_count() == 0) {
        return Err(LearnError::NoGroundTruth(i));
    }
    Ok(())
}

/// Unary weights regressed onto each segment's best ground-truth overlap; pairwise weights zero.
pub fn init_weights(images: &[TrainingImage]) -> Result<WeightVector, LearnError> {
    check_images(images)?;
    let f = &images[0].features;
    let dim = f.unary.first().map_or(0, Vec::len);
    let mut weights = WeightVector {
        unary_schema: f.unary_schema.clone(),
        pairwise_schema: f.pairwise_schema.clone(),
        theta_u: vec![0.0; dim],
        theta_p: vec![0.0; f.pairwise.first().map_or(crate::descriptors::FeatureSchema::pairwise().len(), Vec::len)],
    };
    let targets: Vec<Vec<f64>> = images
        .iter()
        .map(|im| (0..im.graph.len()).map(|s| im.quality.best_overlap(s)).collect())
        .collect();
    let n: usize = targets.iter().map(Vec::len).sum();
    if n < dim {
        log::warn!("{n} training segments for {dim} unary features; relying on the ridge term");
    }
    let rows = images
        .iter()
        .zip(&targets)
        .flat_map(|(im, t)| im.features.unary.iter().map(Vec::as_slice).zip(t.iter().copied()));
    weights.theta_u = ridge(rows, dim, RIDGE_LAMBDA);
    weights.validate()?;
    Ok(weights)
}

fn caches_of(images: &[TrainingImage], pools: &[TilingPool]) -> Vec<ImageCache> {
    images.par_iter().zip(pools).map(|(im, p)| im.cache(p)).collect()
}

fn finite(value: f64, what: &str, theta: &[f64]) -> Result<f64, LearnError> {
    if value.is_finite() {
        Ok(value)
    } else {
        let bad = theta.iter().filter(|v| !v.is_finite()).count();
        Err(LearnError::NonFinite(format!("{what} = {value}; {bad} non-finite weights of {}", theta.len())))
    }
}

/// Maximize the exact dataset objective over the weights with the pools held fixed.
///
/// The returned weights never score below `state.weights` on these pools.
pub fn optimize_params(
    state: &TrainState,
    images: &[TrainingImage],
    config: &RankConfig,
) -> Result<WeightVector, LearnError> {
    check_images(images)?;
    let caches = caches_of(images, &state.pools);
    let best = optimize_cached(&caches, &state.weights.flat(), state.warm_started, config)?;
    log::debug!("inner solve: exact objective {:.6}", best.0);
    let out = state.weights.with_flat(&best.1);
    out.validate()?;
    Ok(out)
}

fn optimize_cached(
    caches: &[ImageCache],
    input: &[f64],
    warm_started: bool,
    config: &RankConfig,
) -> Result<(f64, Vec<f64>), LearnError> {
    let input = input.to_vec();
    let mut best = (finite(dataset_exact(caches, &input, config), "objective", &input)?, input.clone());
    let consider = |theta: &[f64], best: &mut (f64, Vec<f64>)| {
        let v = dataset_exact(caches, theta, config);
        if v.is_finite() && v > best.0 {
            *best = (v, theta.to_vec());
        }
    };

    let mut start = input.clone();
    if !warm_started {
        let dim = input.len();
        let rows = caches
            .iter()
            .flat_map(|c| c.phi.iter().map(Vec::as_slice).zip(c.q.iter().copied()));
        let warm = ridge(rows, dim, RIDGE_LAMBDA);
        let before = best.0;
        consider(&warm, &mut best);
        if best.0 > before || input.iter().all(|v| *v == 0.0) {
            start = warm;
        }
    }

    for &t in &TEMPERATURES {
        let tau = t * score_scale(caches, &start);
        let objective = |theta: &[f64]| {
            let (v, g) = surrogate(caches, theta, tau, config);
            (-v, g.into_iter().map(|x| -x).collect())
        };
        let (v0, _) = surrogate(caches, &start, tau, config);
        finite(v0, "surrogate", &start)?;
        let mut visited = Vec::new();
        start = lbfgs(objective, &start, config.inner_max_iters, |x| visited.push(x.to_vec()));
        for x in &visited {
            consider(x, &mut best);
        }
    }
    Ok(best)
}

fn trace_row(iteration: usize, caches: &[ImageCache], theta: &[f64], config: &RankConfig, pools_replaced: bool) -> TraceRow {
    let n = caches.len().max(1) as f64;
    let mut first = 0.0;
    let mut ois = 0.0;
    for c in caches {
        let order = c.ranking(theta);
        first += order.first().map_or(0.0, |&t| c.q[t]);
        ois += order.iter().take(TRACE_OIS_CAP).map(|&t| c.q[t]).fold(0.0, f64::max);
    }
    TraceRow {
        iteration,
        objective: dataset_exact(caches, theta, config),
        first: first / n,
        ois: ois / n,
        pools_replaced,
    }
}

fn tile_all(images: &[TrainingImage], weights: &WeightVector) -> Result<Vec<TilingPool>, LearnError> {
    Ok(images.par_iter().map(|im| im.tile(weights)).collect::<Result<_, _>>()?)
}

/// Alternate weight optimization on fixed pools with pool regeneration.
pub fn learn(images: &[TrainingImage], config: &RankConfig) -> Result<TrainState, LearnError> {
    let weights = init_weights(images)?;
    let pools = tile_all(images, &weights)?;
    let caches = caches_of(images, &pools);
    let row = trace_row(0, &caches, &weights.flat(), config, true);
    finite(row.objective, "objective", &weights.flat())?;
    log::info!("iteration 0: objective {:.6} first {:.4}", row.objective, row.first);
    let mut state = TrainState {
        weights,
        pools,
        trace: vec![row],
        warm_started: false,
    };
    for it in 1..=config.outer_max_iters {
        let previous = state.trace.last().expect("trace starts with a row").objective;
        let weights = optimize_params(&state, images, config)?;
        state.warm_started = true;
        let theta = weights.flat();
        let old_caches = caches_of(images, &state.pools);
        let reranked = dataset_exact(&old_caches, &theta, config);
        let new_pools = tile_all(images, &weights)?;
        let new_caches = caches_of(images, &new_pools);
        let fresh = dataset_exact(&new_caches, &theta, config);
        let replaced = fresh >= reranked;
        let row = if replaced {
            state.pools = new_pools;
            trace_row(it, &new_caches, &theta, config, true)
        } else {
            trace_row(it, &old_caches, &theta, config, false)
        };
        state.weights = weights;
        log::info!(
            "iteration {it}: objective {:.6} first {:.4} ois {:.4} (pools {})",
            row.objective,
            row.first,
            row.ois,
            if replaced { "replaced" } else { "kept" }
        );
        state.trace.push(row);
        if row.objective <= previous + config.tolerance {
            break;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::optimize::ImageCache;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_weight_examples() {
        assert_eq!(rank_weight(WeightingKind::ReciprocalDecay, 64, 1), 1.0);
        assert!((rank_weight(WeightingKind::ReciprocalDecay, 64, 64) - 0.5).abs() < 1e-12);
        assert_eq!(rank_weight(WeightingKind::ReciprocalDecay, 1, 1), 1.0);
        assert_eq!(rank_weight(WeightingKind::Dcg, 5, 1), 1.0);
        assert!((rank_weight(WeightingKind::Dcg, 5, 3) - 0.5).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn rank_beyond_cutoff_panics() {
        rank_weight(WeightingKind::ReciprocalDecay, 4, 5);
    }

    #[test]
    fn objective_examples() {
        let c2 = RankConfig {
            k: 2,
            ..RankConfig::default()
        };
        assert!((objective(&[0.9, 0.6], &c2) - 1.2).abs() < 1e-12);
        let c1 = RankConfig {
            k: 1,
            ..RankConfig::default()
        };
        assert_eq!(objective(&[0.4, 0.9], &c1), 0.4);
        assert_eq!(objective(&[], &c1), 0.0);
    }

    fn two_tilings() -> Vec<ImageCache> {
        vec![ImageCache {
            members: vec![vec![0], vec![1]],
            phi: vec![vec![1.0, 0.3], vec![0.2, 0.3]],
            q: vec![0.2, 0.9],
        }]
    }

    #[test]
    fn separable_pair_is_ranked_by_quality() {
        let config = RankConfig {
            k: 2,
            ..RankConfig::default()
        };
        let caches = two_tilings();
        // the input ranks the worse tiling first
        for warm in [false, true] {
            let (v, theta) = optimize_cached(&caches, &[1.0, 0.0], warm, &config).unwrap();
            assert_eq!(caches[0].ranking(&theta)[0], 1, "warm start {warm}");
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_objective_ignores_positive_scale() {
        let config = RankConfig {
            k: 2,
            ..RankConfig::default()
        };
        let caches = two_tilings();
        for theta in [[1.0, 0.0], [-0.4, 2.0], [0.3, -0.1]] {
            let doubled = [2.0 * theta[0], 2.0 * theta[1]];
            assert_eq!(dataset_exact(&caches, &theta, &config), dataset_exact(&caches, &doubled, &config));
        }
    }

    fn arb_caches() -> impl Strategy<Value = (Vec<ImageCache>, Vec<f64>)> {
        let image = (2usize..7).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), n),
                proptest::collection::vec(0.0f64..1.0, n),
            )
                .prop_map(move |(phi, q)| ImageCache {
                    members: (0..n).map(|i| vec![i]).collect(),
                    phi,
                    q,
                })
        });
        (
            proptest::collection::vec(image, 5),
            proptest::collection::vec(-1.0f64..1.0, 3),
        )
    }

    proptest! {
        #[test]
        fn rank_weight_strictly_decreasing(k in 2usize..200) {
            for i in 1..k {
                prop_assert!(rank_weight(WeightingKind::ReciprocalDecay, k, i) > rank_weight(WeightingKind::ReciprocalDecay, k, i + 1));
                prop_assert!(rank_weight(WeightingKind::Dcg, k, i) > rank_weight(WeightingKind::Dcg, k, i + 1));
            }
        }

        #[test]
        fn optimization_never_lowers_the_exact_objective((caches, theta) in arb_caches(), warm in any::<bool>(), k in 1usize..5) {
            let config = RankConfig { k, ..RankConfig::default() };
            let before = dataset_exact(&caches, &theta, &config);
            let (v, out) = optimize_cached(&caches, &theta, warm, &config).unwrap();
            prop_assert!(v >= before);
            prop_assert_eq!(v, dataset_exact(&caches, &out, &config));
        }
    }
}
