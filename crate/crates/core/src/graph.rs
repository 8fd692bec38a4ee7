//! Consistency graph over a segment pool.
//!
//! Two segments are adjacent when they share no pixel. Image neighbors are the
//! adjacent pairs that still touch once both masks are grown by a small radius;
//! only those pairs carry pairwise potentials.

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use thiserror::Error;

use crate::mask::{dilate, SegmentMask};
use crate::pool::SegmentPool;

pub const DEFAULT_GROW_RADIUS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("self edge on vertex {0}")]
    SelfEdge(usize),
    #[error("image neighbors ({0}, {1}) are not adjacent")]
    NeighborNotAdjacent(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyGraph {
    n: usize,
    adjacency: Vec<FixedBitSet>,
    image_neighbors: Vec<FixedBitSet>,
    degrees: Vec<usize>,
}

impl ConsistencyGraph {
    /// Build from explicit unordered edge lists.
    pub fn from_edges(
        n: usize,
        adjacent: &[(usize, usize)],
        neighbors: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let mut adjacency = vec![FixedBitSet::with_capacity(n); n];
        let mut image_neighbors = vec![FixedBitSet::with_capacity(n); n];
        for &(i, j) in adjacent {
            if i >= n || j >= n {
                return Err(GraphError::VertexOutOfRange(i, j, n));
            }
            if i == j {
                return Err(GraphError::SelfEdge(i));
            }
            adjacency[i].insert(j);
            adjacency[j].insert(i);
        }
        for &(i, j) in neighbors {
            if i >= n || j >= n {
                return Err(GraphError::VertexOutOfRange(i, j, n));
            }
            if i == j {
                return Err(GraphError::SelfEdge(i));
            }
            if !adjacency[i].contains(j) {
                return Err(GraphError::NeighborNotAdjacent(i, j));
            }
            image_neighbors[i].insert(j);
            image_neighbors[j].insert(i);
        }
        Ok(Self::from_sets(adjacency, image_neighbors))
    }

    fn from_sets(adjacency: Vec<FixedBitSet>, image_neighbors: Vec<FixedBitSet>) -> Self {
        let degrees = adjacency.iter().map(|s| s.count_ones(..)).collect();
        Self {
            n: adjacency.len(),
            adjacency,
            image_neighbors,
            degrees,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(j)
    }

    #[inline]
    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.image_neighbors[i].contains(j)
    }

    pub fn adjacency_of(&self, i: usize) -> &FixedBitSet {
        &self.adjacency[i]
    }

    pub fn neighbors_of(&self, i: usize) -> &FixedBitSet {
        &self.image_neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.degrees.iter().sum::<usize>() as f64 / self.n as f64
        }
    }

    /// Unordered image-neighbor pairs `(i, j)` with `i < j`, ascending.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| {
                self.image_neighbors[i]
                    .ones()
                    .filter(move |&j| j > i)
                    .map(move |j| (i, j))
            })
            .collect()
    }

    /// True iff `members` are pairwise adjacent.
    pub fn is_clique(&self, members: &[usize]) -> bool {
        members.iter().enumerate().all(|(k, &i)| {
            members[k + 1..].iter().all(|&j| i != j && self.adjacent(i, j))
        })
    }

    /// True iff `members` is a clique that no outside vertex extends.
    pub fn is_maximal_clique(&self, members: &[usize]) -> bool {
        if !self.is_clique(members) {
            return false;
        }
        (0..self.n)
            .filter(|v| !members.contains(v))
            .all(|v| members.iter().any(|&m| !self.adjacent(v, m)))
    }
}

/// Grow every segment of a pool by `radius`.
pub fn grow_segments(pool: &SegmentPool, radius: u32) -> Vec<SegmentMask> {
    pool.segments.par_iter().map(|s| dilate(s, radius)).collect()
}

pub fn build_graph(pool: &SegmentPool, grow_radius: u32) -> ConsistencyGraph {
    let grown = grow_segments(pool, grow_radius);
    build_graph_from_grown(&pool.segments, &grown)
}

/// `grown[i]` must be `segments[i]` dilated by the neighborhood radius.
pub fn build_graph_from_grown(segments: &[SegmentMask], grown: &[SegmentMask]) -> ConsistencyGraph {
    let n = segments.len();
    let boxes: Vec<_> = segments.iter().map(|s| s.bbox()).collect();
    let grown_boxes: Vec<_> = grown.iter().map(|s| s.bbox()).collect();
    let rows: Vec<(Vec<usize>, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut adj = Vec::new();
            let mut nbr = Vec::new();
            for j in i + 1..n {
                let boxes_meet = matches!((boxes[i], boxes[j]), (Some(a), Some(b)) if a.intersects(&b));
                let overlapping = boxes_meet && segments[i].intersects(&segments[j]).unwrap_or(true);
                if overlapping {
                    continue;
                }
                adj.push(j);
                let grown_meet =
                    matches!((grown_boxes[i], grown_boxes[j]), (Some(a), Some(b)) if a.intersects(&b));
                if grown_meet && grown[i].intersects(&grown[j]).unwrap_or(false) {
                    nbr.push(j);
                }
            }
            (adj, nbr)
        })
        .collect();
    let mut adjacency = vec![FixedBitSet::with_capacity(n); n];
    let mut image_neighbors = vec![FixedBitSet::with_capacity(n); n];
    for (i, (adj, nbr)) in rows.into_iter().enumerate() {
        for j in adj {
            adjacency[i].insert(j);
            adjacency[j].insert(i);
        }
        for j in nbr {
            image_neighbors[i].insert(j);
            image_neighbors[j].insert(i);
        }
    }
    ConsistencyGraph::from_sets(adjacency, image_neighbors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RgbImage;

    fn pool_of(w: u32, h: u32, segments: Vec<SegmentMask>) -> SegmentPool {
        SegmentPool::new(RgbImage::new(w, h), segments, vec![]).unwrap()
    }

    #[test]
    fn disjoint_adjacent_tiles_form_complete_graph() {
        let tiles = vec![
            SegmentMask::rect(30, 10, 0, 0, 10, 10),
            SegmentMask::rect(30, 10, 0, 10, 10, 20),
            SegmentMask::rect(30, 10, 0, 20, 10, 30),
        ];
        let g = build_graph(&pool_of(30, 10, tiles), DEFAULT_GROW_RADIUS);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.adjacent(i, j), i != j);
                // tiles 0 and 2 are 10 px apart: grown by 4 each they do not meet
                let expect_nbr = i != j && (i as i64 - j as i64).abs() == 1;
                assert_eq!(g.are_neighbors(i, j), expect_nbr, "{i} {j}");
            }
        }
        assert_eq!(g.degrees(), &[2, 2, 2]);
    }

    #[test]
    fn close_tiles_are_all_neighbors() {
        let tiles = vec![
            SegmentMask::rect(18, 6, 0, 0, 6, 6),
            SegmentMask::rect(18, 6, 0, 6, 6, 12),
            SegmentMask::rect(18, 6, 0, 12, 6, 18),
        ];
        let g = build_graph(&pool_of(18, 6, tiles), DEFAULT_GROW_RADIUS);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.adjacent(i, j), i != j);
                assert_eq!(g.are_neighbors(i, j), i != j);
            }
        }
    }

    #[test]
    fn nested_masks_are_not_adjacent() {
        let outer = SegmentMask::rect(20, 20, 0, 0, 20, 20);
        let inner = SegmentMask::rect(20, 20, 5, 5, 10, 10);
        let g = build_graph(&pool_of(20, 20, vec![outer, inner]), DEFAULT_GROW_RADIUS);
        assert!(!g.adjacent(0, 1));
        assert!(!g.are_neighbors(0, 1));
    }

    #[test]
    fn from_edges_validates() {
        assert!(matches!(
            ConsistencyGraph::from_edges(3, &[(0, 1)], &[(1, 2)]),
            Err(GraphError::NeighborNotAdjacent(1, 2))
        ));
        assert!(matches!(
            ConsistencyGraph::from_edges(3, &[(0, 0)], &[]),
            Err(GraphError::SelfEdge(0))
        ));
        let g = ConsistencyGraph::from_edges(3, &[(0, 1), (1, 2)], &[(0, 1)]).unwrap();
        assert!(g.is_maximal_clique(&[0, 1]));
        assert!(!g.is_maximal_clique(&[1]));
        assert!(!g.is_clique(&[0, 2]));
        assert_eq!(g.neighbor_pairs(), vec![(0, 1)]);
    }
}
