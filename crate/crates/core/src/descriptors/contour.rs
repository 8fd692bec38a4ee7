//! Polyline approximation of region outlines on the pixel-corner lattice.

use std::collections::HashMap;

use crate::mask::SegmentMask;

pub const DP_TOLERANCE: f64 = 2.0;

/// Point in continuous `(row, col)` coordinates; pixel `(r, c)` covers `[r, r+1) x [c, c+1)`.
pub type Point = (f64, f64);

/// One straight piece of a simplified outline, oriented so that
/// [`ContourSegment::outward_normal`] points away from the region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSegment {
    pub p: Point,
    pub q: Point,
    /// Lies on the raster border rather than against other pixels.
    pub on_border: bool,
}

impl ContourSegment {
    pub fn length(&self) -> f64 {
        ((self.q.0 - self.p.0).powi(2) + (self.q.1 - self.p.1).powi(2)).sqrt()
    }

    pub fn direction(&self) -> Point {
        let l = self.length();
        ((self.q.0 - self.p.0) / l, (self.q.1 - self.p.1) / l)
    }

    pub fn outward_normal(&self) -> Point {
        let d = self.direction();
        (d.1, -d.0)
    }

    pub fn distance_to(&self, x: Point) -> f64 {
        point_segment_distance(x, self.p, self.q)
    }
}

pub fn point_segment_distance(x: Point, p: Point, q: Point) -> f64 {
    let d = (q.0 - p.0, q.1 - p.1);
    let l2 = d.0 * d.0 + d.1 * d.1;
    let t = if l2 > 0.0 {
        (((x.0 - p.0) * d.0 + (x.1 - p.1) * d.1) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = (p.0 + t * d.0, p.1 + t * d.1);
    ((x.0 - c.0).powi(2) + (x.1 - c.1).powi(2)).sqrt()
}

type Vertex = (i64, i64);

#[derive(Clone, Copy)]
struct Crack {
    from: Vertex,
    to: Vertex,
    on_border: bool,
}

/// Closed crack loops of a mask, each as a vertex cycle with per-edge border flags.
fn crack_loops(mask: &SegmentMask) -> Vec<(Vec<Vertex>, Vec<bool>)> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut cracks = Vec::new();
    for run in mask.runs() {
        let r = run.row as i64;
        let (s, e) = (run.start as i64, run.end as i64);
        cracks.push(Crack { from: (r + 1, e), to: (r, e), on_border: e == w });
        cracks.push(Crack { from: (r, s), to: (r + 1, s), on_border: s == 0 });
        for (nr, top) in [(r - 1, true), (r + 1, false)] {
            // pieces of s..e not covered by row nr
            let covered: &[crate::mask::Run] = if nr < 0 || nr >= h { &[] } else { mask.row_runs(nr as u32) };
            let mut c = s;
            let mut push = |a: i64, b: i64| {
                if a >= b {
                    return;
                }
                let on_border = nr < 0 || nr >= h;
                for x in a..b {
                    if top {
                        cracks.push(Crack { from: (r, x + 1), to: (r, x), on_border });
                    } else {
                        cracks.push(Crack { from: (r + 1, x), to: (r + 1, x + 1), on_border });
                    }
                }
            };
            for o in covered {
                let (os, oe) = (o.start as i64, o.end as i64);
                if oe <= c || os >= e {
                    continue;
                }
                push(c, os.max(c));
                c = c.max(oe);
            }
            push(c, e);
        }
    }
    let mut outgoing: HashMap<Vertex, Vec<usize>> = HashMap::with_capacity(cracks.len());
    for (k, cr) in cracks.iter().enumerate() {
        outgoing.entry(cr.from).or_default().push(k);
    }
    let mut used = vec![false; cracks.len()];
    let mut loops = Vec::new();
    for start in 0..cracks.len() {
        if used[start] {
            continue;
        }
        let mut verts = Vec::new();
        let mut flags = Vec::new();
        let mut k = start;
        loop {
            used[k] = true;
            let cr = cracks[k];
            verts.push(cr.from);
            flags.push(cr.on_border);
            let d_in = (cr.to.0 - cr.from.0, cr.to.1 - cr.from.1);
            // Turn toward the region first, so diagonal contacts stay separate loops.
            let inward = (-d_in.1, d_in.0);
            let next = outgoing[&cr.to]
                .iter()
                .copied()
                .filter(|&n| !used[n])
                .min_by_key(|&n| {
                    let c = cracks[n];
                    let d = (c.to.0 - c.from.0, c.to.1 - c.from.1);
                    if d == inward {
                        0
                    } else if d == d_in {
                        1
                    } else {
                        2
                    }
                });
            match next {
                Some(n) => k = n,
                None => break,
            }
        }
        loops.push((verts, flags));
    }
    loops
}

fn to_point(v: Vertex) -> Point {
    (v.0 as f64, v.1 as f64)
}

/// Douglas-Peucker on an open chain, returning kept indices (always including both ends).
fn douglas_peucker(pts: &[Point], tol: f64) -> Vec<usize> {
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0usize, pts.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut best, mut best_d) = (a, -1.0);
        for k in a + 1..b {
            let d = point_segment_distance(pts[k], pts[a], pts[b]);
            if d > best_d {
                best = k;
                best_d = d;
            }
        }
        if best_d > tol {
            keep[best] = true;
            stack.push((a, best));
            stack.push((best, b));
        }
    }
    (0..pts.len()).filter(|&k| keep[k]).collect()
}

/// Simplified outline of a mask as straight segments, every loop closed.
///
/// Loops are split where they move on or off the raster border so that border
/// pieces stay separate segments.
pub fn contour_segments(mask: &SegmentMask, tol: f64) -> Vec<ContourSegment> {
    let mut out = Vec::new();
    for (mut verts, mut flags) in crack_loops(mask) {
        let n = verts.len();
        // Start every loop at a lattice corner so closed-loop anchors are corners.
        let first = (0..n).min_by_key(|&k| verts[k]).unwrap_or(0);
        verts.rotate_left(first);
        flags.rotate_left(first);
        let pts: Vec<Point> = verts.iter().map(|&v| to_point(v)).collect();
        let breaks: Vec<usize> = (0..n).filter(|&k| flags[k] != flags[(k + n - 1) % n]).collect();
        let chains: Vec<(usize, usize)> = if breaks.is_empty() {
            // Closed loop: anchor at vertex 0 and the vertex farthest from it.
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = (pts[a].0 - pts[0].0).powi(2) + (pts[a].1 - pts[0].1).powi(2);
                    let db = (pts[b].0 - pts[0].0).powi(2) + (pts[b].1 - pts[0].1).powi(2);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap_or(0);
            vec![(0, far), (far, n)]
        } else {
            (0..breaks.len())
                .map(|k| {
                    let a = breaks[k];
                    let b = if k + 1 < breaks.len() { breaks[k + 1] } else { breaks[0] + n };
                    (a, b)
                })
                .collect()
        };
        for (a, b) in chains {
            if b <= a {
                continue;
            }
            let chain: Vec<Point> = (a..=b).map(|k| pts[k % n]).collect();
            let on_border = flags[a % n];
            let kept = douglas_peucker(&chain, tol);
            for pair in kept.windows(2) {
                out.push(ContourSegment {
                    p: chain[pair[0]],
                    q: chain[pair[1]],
                    on_border,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::perimeter;

    fn total_length(segs: &[ContourSegment]) -> f64 {
        segs.iter().map(|s| s.length()).sum()
    }

    #[test]
    fn crack_loops_cover_every_outside_edge() {
        let mask = SegmentMask::from_fn(23, 19, |r, c| (r * 7 + c * 3) % 5 < 3 && r < 17);
        let edges: usize = crack_loops(&mask).iter().map(|(v, _)| v.len()).sum();
        assert_eq!(edges as u64, perimeter(&mask));
    }

    #[test]
    fn loops_are_closed_and_region_is_on_the_left() {
        let mask = SegmentMask::from_fn(15, 15, |r, c| (3..12).contains(&r) && (2..9).contains(&c) && !(r == 6 && c == 5));
        for (verts, _) in crack_loops(&mask) {
            let n = verts.len();
            for k in 0..n {
                let (a, b) = (verts[k], verts[(k + 1) % n]);
                assert_eq!((a.0 - b.0).abs() + (a.1 - b.1).abs(), 1, "not a closed lattice loop");
                let d = (b.0 - a.0, b.1 - a.1);
                let n_out = (d.1, -d.0);
                let mid = (a.0 as f64 + d.0 as f64 / 2.0, a.1 as f64 + d.1 as f64 / 2.0);
                let inside = (mid.0 - 0.5 * n_out.0 as f64, mid.1 - 0.5 * n_out.1 as f64);
                let outside = (mid.0 + 0.5 * n_out.0 as f64, mid.1 + 0.5 * n_out.1 as f64);
                assert!(mask.contains_signed(inside.0.floor() as i64, inside.1.floor() as i64));
                assert!(!mask.contains_signed(outside.0.floor() as i64, outside.1.floor() as i64));
            }
        }
    }

    #[test]
    fn rectangle_simplifies_to_four_sides() {
        let segs = contour_segments(&SegmentMask::rect(30, 30, 5, 4, 20, 25), DP_TOLERANCE);
        assert_eq!(segs.len(), 4, "{segs:?}");
        assert!((total_length(&segs) - 2.0 * (15.0 + 21.0)).abs() < 1e-9);
        assert!(segs.iter().all(|s| !s.on_border));
    }

    #[test]
    fn border_pieces_are_flagged() {
        let segs = contour_segments(&SegmentMask::rect(30, 30, 0, 0, 10, 30), DP_TOLERANCE);
        let border: f64 = segs.iter().filter(|s| s.on_border).map(|s| s.length()).sum();
        let inner: f64 = segs.iter().filter(|s| !s.on_border).map(|s| s.length()).sum();
        assert!((border - 50.0).abs() < 1e-9);
        assert!((inner - 30.0).abs() < 1e-9);
    }

    #[test]
    fn disc_outline_stays_within_tolerance() {
        let disc = SegmentMask::from_fn(60, 60, |r, c| (r as f64 - 29.5).powi(2) + (c as f64 - 29.5).powi(2) <= 400.0);
        let segs = contour_segments(&disc, DP_TOLERANCE);
        assert!(segs.len() >= 8);
        for s in &segs {
            let mid = ((s.p.0 + s.q.0) / 2.0, (s.p.1 + s.q.1) / 2.0);
            let r = ((mid.0 - 30.0).powi(2) + (mid.1 - 30.0).powi(2)).sqrt();
            assert!((r - 20.0).abs() < 3.0, "{r}");
        }
    }
}
