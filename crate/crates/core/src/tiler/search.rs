use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Method, Provenance, ScoreTable, Tiling, TilingPool};
use crate::graph::ConsistencyGraph;

pub const DEFAULT_MAX_PASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgConfig {
    pub max_passes: usize,
}

impl Default for FgConfig {
    fn default() -> Self {
        Self {
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchStats {
    pub seed: usize,
    pub passes: usize,
    pub moves: usize,
    pub score_before: f64,
    pub score_after: f64,
}

/// Clique under construction with an incrementally maintained score.
struct Clique<'a> {
    graph: &'a ConsistencyGraph,
    table: &'a ScoreTable,
    set: FixedBitSet,
    members: Vec<usize>,
    score: f64,
}

impl<'a> Clique<'a> {
    fn new(graph: &'a ConsistencyGraph, table: &'a ScoreTable) -> Self {
        Self {
            graph,
            table,
            set: FixedBitSet::with_capacity(graph.len()),
            members: Vec::new(),
            score: 0.0,
        }
    }

    fn link(&self, v: usize) -> f64 {
        self.table
            .pair_list(v)
            .iter()
            .filter(|(j, _)| self.set.contains(*j))
            .map(|(_, s)| s)
            .sum()
    }

    fn add(&mut self, v: usize) {
        self.score += self.table.unary(v) + self.link(v);
        self.set.insert(v);
        self.members.push(v);
    }

    fn remove(&mut self, v: usize) {
        self.set.set(v, false);
        self.members.retain(|&m| m != v);
        self.score -= self.table.unary(v) + self.link(v);
    }

    /// Add, in `order`, every vertex compatible with all current members.
    fn extend(&mut self, order: &[usize]) {
        let mut cand = FixedBitSet::with_capacity(self.graph.len());
        cand.insert_range(..);
        for &m in &self.members {
            cand.intersect_with(self.graph.adjacency_of(m));
        }
        for &v in order {
            if cand.contains(v) {
                self.add(v);
                cand.intersect_with(self.graph.adjacency_of(v));
            }
        }
    }

    fn canonical_score(&self) -> f64 {
        let mut sorted = self.members.clone();
        sorted.sort_unstable();
        self.table.score_of_set(&sorted, &self.set)
    }

    fn into_tiling(self) -> Tiling {
        let mut members = self.members;
        members.sort_unstable();
        let score = self.table.score_of_set(&members, &self.set);
        Tiling {
            members,
            score,
            maximal: true,
        }
    }
}

/// Maximal clique containing `seed`, grown by scanning `order` and adding every
/// segment compatible with the members so far.
pub fn greedy_maximal(seed: usize, order: &[usize], graph: &ConsistencyGraph, table: &ScoreTable) -> Tiling {
    let mut c = Clique::new(graph, table);
    c.add(seed);
    c.extend(order);
    c.into_tiling()
}

/// Improve a maximal clique by swap moves that keep `seed` (see [`LocalSearchStats`]).
///
/// A pass scans every non-member compatible with the seed in rank order. A move
/// drops the members overlapping the candidate, adds it, and re-extends greedily;
/// it is kept only when the potential strictly increases.
pub fn local_search(
    t: &Tiling,
    seed: usize,
    graph: &ConsistencyGraph,
    table: &ScoreTable,
    max_passes: usize,
) -> (Tiling, LocalSearchStats) {
    let order = table.order();
    let mut cur = Clique::new(graph, table);
    for &m in &t.members {
        cur.add(m);
    }
    let mut best = cur.canonical_score();
    let mut stats = LocalSearchStats {
        seed,
        passes: 0,
        moves: 0,
        score_before: best,
        score_after: best,
    };
    for _ in 0..max_passes {
        stats.passes += 1;
        let mut improved = false;
        for &s in order {
            if cur.set.contains(s) || s == seed || !graph.adjacent(seed, s) {
                continue;
            }
            let removed: Vec<usize> = cur.members.iter().copied().filter(|&m| !graph.adjacent(m, s)).collect();
            let mut next = Clique {
                graph,
                table,
                set: cur.set.clone(),
                members: cur.members.clone(),
                score: cur.score,
            };
            for &r in &removed {
                next.remove(r);
            }
            next.add(s);
            next.extend(order);
            if next.score <= cur.score && (next.score - cur.score).abs() > 1e-9 * (1.0 + cur.score.abs()) {
                continue;
            }
            let exact = next.canonical_score();
            if exact > best {
                best = exact;
                cur = next;
                cur.score = exact;
                stats.moves += 1;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    stats.score_after = best;
    (cur.into_tiling(), stats)
}

/// One greedy-plus-local-search tiling per seed, deduplicated and ranked.
pub fn fg_tiling(graph: &ConsistencyGraph, table: &ScoreTable, config: &FgConfig) -> TilingPool {
    fg_tiling_with_stats(graph, table, config).0
}

pub fn fg_tiling_with_stats(
    graph: &ConsistencyGraph,
    table: &ScoreTable,
    config: &FgConfig,
) -> (TilingPool, Vec<LocalSearchStats>) {
    let runs: Vec<(Tiling, LocalSearchStats)> = (0..graph.len())
        .into_par_iter()
        .map(|seed| {
            let t = greedy_maximal(seed, table.order(), graph, table);
            local_search(&t, seed, graph, table, config.max_passes)
        })
        .collect();
    let stats = runs.iter().map(|r| r.1).collect();
    let pool = TilingPool::from_candidates(runs.into_iter().map(|(t, st)| {
        (
            t,
            Provenance {
                seed: Some(st.seed),
                method: Method::FgTiling,
            },
        )
    }));
    (pool, stats)
}
