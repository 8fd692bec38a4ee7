use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::search::greedy_maximal;
use super::{Method, Provenance, ScoreTable, Tiling, TilingPool};
use crate::graph::ConsistencyGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnumConfig {
    /// Wall-clock limit; `None` enumerates every maximal clique.
    pub budget: Option<Duration>,
    /// Number of best tilings kept; `None` keeps all.
    pub keep: Option<usize>,
}

/// Max-heap entry ordered by "worse is greater", so the heap top is the worst kept tiling.
struct Kept(Tiling);

impl PartialEq for Kept {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Kept {}
impl PartialOrd for Kept {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Kept {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .score
            .total_cmp(&self.0.score)
            .then_with(|| self.0.members.cmp(&other.0.members))
    }
}

struct Enumerator<'a> {
    graph: &'a ConsistencyGraph,
    table: &'a ScoreTable,
    deadline: Option<Instant>,
    keep: usize,
    heap: BinaryHeap<Kept>,
    timed_out: bool,
}

impl Enumerator<'_> {
    fn expired(&mut self) -> bool {
        if !self.timed_out {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                }
            }
        }
        self.timed_out
    }

    fn report(&mut self, r: &[usize]) {
        let mut members = r.to_vec();
        members.sort_unstable();
        let mut set = FixedBitSet::with_capacity(self.graph.len());
        for &m in &members {
            set.insert(m);
        }
        let score = self.table.score_of_set(&members, &set);
        let t = Kept(Tiling {
            members,
            score,
            maximal: true,
        });
        if self.heap.len() < self.keep {
            self.heap.push(t);
        } else if let Some(worst) = self.heap.peek() {
            if t < *worst {
                self.heap.pop();
                self.heap.push(t);
            }
        }
    }

    /// Bron-Kerbosch without pivoting, branching in unary-rank order.
    fn expand(&mut self, r: &mut Vec<usize>, mut p: FixedBitSet, mut x: FixedBitSet) {
        if self.expired() {
            return;
        }
        if p.is_clear() {
            if x.is_clear() {
                self.report(r);
            }
            return;
        }
        for &v in self.table.order() {
            if !p.contains(v) {
                continue;
            }
            let adj = self.graph.adjacency_of(v);
            let mut p2 = p.clone();
            p2.intersect_with(adj);
            let mut x2 = x.clone();
            x2.intersect_with(adj);
            r.push(v);
            self.expand(r, p2, x2);
            r.pop();
            if self.timed_out {
                return;
            }
            p.set(v, false);
            x.insert(v);
        }
    }
}

/// Depth-first enumeration of maximal cliques, stopped at the budget, keeping the best.
pub fn enum_budget(graph: &ConsistencyGraph, table: &ScoreTable, config: &EnumConfig) -> TilingPool {
    let n = graph.len();
    let mut e = Enumerator {
        graph,
        table,
        deadline: config.budget.map(|b| Instant::now() + b),
        keep: config.keep.unwrap_or(usize::MAX),
        heap: BinaryHeap::new(),
        timed_out: false,
    };
    if n > 0 && e.keep > 0 {
        let mut p = FixedBitSet::with_capacity(n);
        p.insert_range(..);
        e.expand(&mut Vec::new(), p, FixedBitSet::with_capacity(n));
    }
    if e.timed_out {
        log::info!("enumeration stopped at the time budget");
    }
    TilingPool::from_candidates(e.heap.into_iter().map(|k| {
        (
            k.0,
            Provenance {
                seed: None,
                method: Method::EnumBudget,
            },
        )
    }))
}

/// Greedy tiling per seed, each scanning its own random segment order.
pub fn constrained_random(graph: &ConsistencyGraph, table: &ScoreTable, rng_seed: u64) -> TilingPool {
    let runs: Vec<Tiling> = (0..graph.len())
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(seed as u64);
            let mut order: Vec<usize> = (0..graph.len()).collect();
            order.shuffle(&mut rng);
            greedy_maximal(seed, &order, graph, table)
        })
        .collect();
    TilingPool::from_candidates(runs.into_iter().enumerate().map(|(seed, t)| {
        (
            t,
            Provenance {
                seed: Some(seed),
                method: Method::ConstrainedRandom,
            },
        )
    }))
}
