//! Tiling potentials and maximal-clique search over the consistency graph.

mod baselines;
mod search;

pub use baselines::{constrained_random, enum_budget, EnumConfig};
pub use search::{fg_tiling, fg_tiling_with_stats, greedy_maximal, local_search, LocalSearchStats, FgConfig, DEFAULT_MAX_PASSES};

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::{FeatureSchema, PoolFeatures};
use crate::graph::ConsistencyGraph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TilerError {
    #[error("members {0} and {1} overlap")]
    NotAClique(usize, usize),
    #[error("segment id {0} out of range")]
    UnknownSegment(usize),
    #[error("schema mismatch: weights use {expected}, features use {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("weight vector has {got} entries, features have {expected}")]
    Length { got: usize, expected: usize },
    #[error("pairwise features do not match the graph's image-neighbor pairs")]
    PairMismatch,
    #[error("non-finite weight")]
    NonFinite,
}

/// Linear potential weights `theta = (theta_u, theta_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub unary_schema: String,
    pub pairwise_schema: String,
    pub theta_u: Vec<f64>,
    pub theta_p: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(unary: &FeatureSchema, pairwise: &FeatureSchema) -> Self {
        Self {
            unary_schema: unary.id.clone(),
            pairwise_schema: pairwise.id.clone(),
            theta_u: vec![0.0; unary.len()],
            theta_p: vec![0.0; pairwise.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.theta_u.len() + self.theta_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `theta_u` followed by `theta_p`.
    pub fn flat(&self) -> Vec<f64> {
        self.theta_u.iter().chain(&self.theta_p).copied().collect()
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let nu = self.theta_u.len();
        Self {
            unary_schema: self.unary_schema.clone(),
            pairwise_schema: self.pairwise_schema.clone(),
            theta_u: flat[..nu].to_vec(),
            theta_p: flat[nu..].to_vec(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        let flat: Vec<f64> = self.flat().iter().map(|v| v * k).collect();
        self.with_flat(&flat)
    }

    pub fn validate(&self) -> Result<(), TilerError> {
        if self.flat().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(TilerError::NonFinite)
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precomputed unary scores and pairwise scores of image-neighbor pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    unary: Vec<f64>,
    /// Per segment: `(neighbor, pair score)` sorted by neighbor.
    pairs: Vec<Vec<(usize, f64)>>,
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl ScoreTable {
    /// Scores from normalized features; `features.pairs` must be the graph's neighbor pairs.
    pub fn new(graph: &ConsistencyGraph, features: &PoolFeatures, weights: &WeightVector) -> Result<Self, TilerError> {
        for (expected, got) in [
            (&weights.unary_schema, &features.unary_schema),
            (&weights.pairwise_schema, &features.pairwise_schema),
        ] {
            if expected != got {
                return Err(TilerError::SchemaMismatch {
                    expected: expected.clone(),
                    got: got.clone(),
                });
            }
        }
        weights.validate()?;
        if features.unary.len() != graph.len() {
            return Err(TilerError::PairMismatch);
        }
        for v in &features.unary {
            if v.len() != weights.theta_u.len() {
                return Err(TilerError::Length {
                    got: weights.theta_u.len(),
                    expected: v.len(),
                });
            }
        }
        for v in &features.pairwise {
            if v.len() != weights.theta_p.len() {
                return Err(TilerError::Length {
                    got: weights.theta_p.len(),
                    expected: v.len(),
                });
            }
        }
        if features.pairs.len() != features.pairwise.len()
            || features.pairs.iter().any(|&(i, j)| i >= graph.len() || j >= graph.len() || !graph.are_neighbors(i, j))
            || features.pairs.len() != graph.neighbor_pairs().len()
        {
            return Err(TilerError::PairMismatch);
        }
        let unary = features.unary.iter().map(|v| dot(v, &weights.theta_u)).collect();
        let pairs: Vec<((usize, usize), f64)> = features
            .pairs
            .iter()
            .zip(&features.pairwise)
            .map(|(&p, v)| (p, dot(v, &weights.theta_p)))
            .collect();
        Ok(Self::from_parts(unary, &pairs))
    }

    /// Build directly from per-segment and per-pair scores.
    pub fn from_parts(unary: Vec<f64>, pairs: &[((usize, usize), f64)]) -> Self {
        let n = unary.len();
        let mut lists = vec![Vec::new(); n];
        for &((i, j), s) in pairs {
            lists[i].push((j, s));
            lists[j].push((i, s));
        }
        for l in &mut lists {
            l.sort_by_key(|e| e.0);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| unary[b].total_cmp(&unary[a]).then(a.cmp(&b)));
        let mut rank = vec![0; n];
        for (r, &v) in order.iter().enumerate() {
            rank[v] = r;
        }
        Self {
            unary,
            pairs: lists,
            order,
            rank,
        }
    }

    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    pub fn unary(&self, i: usize) -> f64 {
        self.unary[i]
    }

    pub fn unary_scores(&self) -> &[f64] {
        &self.unary
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<f64> {
        let l = &self.pairs[i];
        l.binary_search_by_key(&j, |e| e.0).ok().map(|k| l[k].1)
    }

    pub fn pair_list(&self, i: usize) -> &[(usize, f64)] {
        &self.pairs[i]
    }

    /// Segments by decreasing unary score, ties by ascending id.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank(&self, i: usize) -> usize {
        self.rank[i]
    }

    /// Potential of a member set whose membership is given as a bitset.
    pub(crate) fn score_of_set(&self, members: &[usize], set: &FixedBitSet) -> f64 {
        let mut total = 0.0;
        for &i in members {
            total += self.unary[i];
            for &(j, s) in &self.pairs[i] {
                if j > i && set.contains(j) {
                    total += s;
                }
            }
        }
        total
    }
}

/// Potential of a clique: unary terms of members plus each image-neighbor member pair once.
pub fn score(members: &[usize], graph: &ConsistencyGraph, table: &ScoreTable) -> Result<f64, TilerError> {
    let mut set = FixedBitSet::with_capacity(graph.len());
    for (k, &i) in members.iter().enumerate() {
        if i >= graph.len() {
            return Err(TilerError::UnknownSegment(i));
        }
        for &j in &members[..k] {
            if !graph.adjacent(i, j) {
                return Err(TilerError::NotAClique(j, i));
            }
        }
        set.insert(i);
    }
    Ok(table.score_of_set(members, &set))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tiling {
    /// Ascending segment ids.
    pub members: Vec<usize>,
    pub score: f64,
    pub maximal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FgTiling,
    EnumBudget,
    ConstrainedRandom,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::FgTiling => "fg",
            Method::EnumBudget => "enum",
            Method::ConstrainedRandom => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<usize>,
    pub method: Method,
}

/// Distinct tilings ranked by decreasing score, ties by ascending member list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TilingPool {
    pub tilings: Vec<Tiling>,
    pub provenance: Vec<Provenance>,
}

impl TilingPool {
    /// Deduplicate by member set, keeping the first provenance seen, and rank.
    pub fn from_candidates(candidates: impl IntoIterator<Item = (Tiling, Provenance)>) -> Self {
        let mut unique: BTreeMap<Vec<usize>, (Tiling, Provenance)> = BTreeMap::new();
        for (t, p) in candidates {
            unique.entry(t.members.clone()).or_insert((t, p));
        }
        let mut all: Vec<(Tiling, Provenance)> = unique.into_values().collect();
        all.sort_by(|a, b| b.0.score.total_cmp(&a.0.score).then_with(|| a.0.members.cmp(&b.0.members)));
        let (tilings, provenance) = all.into_iter().unzip();
        Self { tilings, provenance }
    }

    pub fn len(&self) -> usize {
        self.tilings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tilings.is_empty()
    }

    /// Re-score every tiling under a new table and re-rank.
    pub fn rescored(&self, graph: &ConsistencyGraph, table: &ScoreTable) -> Self {
        Self::from_candidates(self.tilings.iter().zip(&self.provenance).map(|(t, &p)| {
            let s = score(&t.members, graph, table).expect("pool tilings are cliques");
            (
                Tiling {
                    members: t.members.clone(),
                    score: s,
                    maximal: t.maximal,
                },
                p,
            )
        }))
    }
}

/// Sum of member unary features and of neighbor-pair pairwise features: the
/// vector whose dot product with `theta` is the tiling's potential.
pub fn aggregate_features(members: &[usize], graph: &ConsistencyGraph, features: &PoolFeatures) -> Vec<f64> {
    let du = features.unary.first().map_or(0, |v| v.len());
    let dp = features.pairwise.first().map_or(0, |v| v.len());
    let mut out = vec![0.0; du + dp];
    for &i in members {
        for (o, v) in out.iter_mut().zip(&features.unary[i]) {
            *o += v;
        }
    }
    let mut set = FixedBitSet::with_capacity(graph.len());
    for &i in members {
        set.insert(i);
    }
    for (&(i, j), v) in features.pairs.iter().zip(&features.pairwise) {
        if set.contains(i) && set.contains(j) {
            for (o, x) in out[du..].iter_mut().zip(v) {
                *o += x;
            }
        }
    }
    out
}
