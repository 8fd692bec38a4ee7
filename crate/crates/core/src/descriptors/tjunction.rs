//! T-junctions where two neighboring regions and their common background meet.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::contour::{contour_segments, ContourSegment, Point, DP_TOLERANCE};
use crate::mask::{dilate, disc_half_widths, BBox, SegmentMask};

/// Junctions move at most this far during refinement; also the radius of the
/// neighborhood used to read off the junction's lines.
pub const JUNCTION_RADIUS: f64 = 12.0;
const LOCAL_SEGMENT_DISTANCE: f64 = 2.5;
const SECOND_PASS_DISTANCE: f64 = 3.0;
const MERGE_DISTANCE: f64 = 2.0;
const MIN_LINE_ANGLE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TJunction {
    /// Continuous `(row, col)` position.
    pub location: (f64, f64),
    /// Angle between leg and base, in (0, pi).
    pub alpha: f64,
    /// Segment whose own boundary carries the leg; `None` when the leg runs
    /// along the boundary the two segments share.
    pub leg_owner: Option<usize>,
    /// RMS distance of the refined point to the lines it was fitted to.
    pub fit_residual: f64,
}

/// Per-segment geometry reused across every pair the segment takes part in.
#[derive(Debug, Clone)]
pub struct SegmentShape {
    pub mask: SegmentMask,
    pub contour: Vec<ContourSegment>,
    pub grown: SegmentMask,
}

impl SegmentShape {
    pub fn new(mask: &SegmentMask, grow_radius: u32) -> Self {
        Self {
            mask: mask.clone(),
            contour: contour_segments(mask, DP_TOLERANCE),
            grown: dilate(mask, grow_radius),
        }
    }

    pub fn with_grown(mask: &SegmentMask, grown: SegmentMask) -> Self {
        Self {
            mask: mask.clone(),
            contour: contour_segments(mask, DP_TOLERANCE),
            grown,
        }
    }
}

#[derive(Clone, Copy)]
struct Tagged {
    seg: ContourSegment,
    source: usize,
}

struct Local {
    p: Point,
    q: Point,
    angle: f64,
    length: f64,
    owner: Option<usize>,
}

fn dot(a: Point, b: Point) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

fn sub(a: Point, b: Point) -> Point {
    (a.0 - b.0, a.1 - b.1)
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

/// Pixels where the two grown regions and the grown background all overlap,
/// grouped into 8-connected components.
fn triple_components(a: &SegmentShape, b: &SegmentShape, radius: u32) -> Vec<Vec<(u32, u32)>> {
    let Ok(both) = a.grown.intersection(&b.grown) else {
        return Vec::new();
    };
    let Some(bb) = both.bbox() else {
        return Vec::new();
    };
    let (w, h) = (a.mask.width(), a.mask.height());
    let win = bb.padded(radius, w, h);
    let mut union = crate::mask::Window::of_mask(&a.mask, win);
    union.paint(&b.mask, true);
    let half = disc_half_widths(radius);
    let r = radius as i64;
    let near_background = |row: u32, col: u32| -> bool {
        for dy in -r..=r {
            let y = row as i64 + dy;
            if y < 0 || y >= h as i64 {
                continue;
            }
            let hw = half[(dy + r) as usize] as i64;
            for x in (col as i64 - hw).max(0)..=(col as i64 + hw).min(w as i64 - 1) {
                if !union.get(y, x) {
                    return true;
                }
            }
        }
        false
    };
    let mut triple = crate::mask::Window::new(bb);
    let mut pixels = Vec::new();
    for (row, col) in both.pixels() {
        if near_background(row, col) {
            triple.set(row, col, true);
            pixels.push((row, col));
        }
    }
    let mut seen = crate::mask::Window::new(bb);
    let mut comps = Vec::new();
    for &start in &pixels {
        if seen.get(start.0 as i64, start.1 as i64) {
            continue;
        }
        seen.set(start.0, start.1, true);
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            let (row, col) = comp[k];
            k += 1;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (y, x) = (row as i64 + dy, col as i64 + dx);
                    if triple.get(y, x) && !seen.get(y, x) {
                        seen.set(y as u32, x as u32, true);
                        comp.push((y as u32, x as u32));
                    }
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Weighted least-squares point closest to the lines through `segs`.
fn refine(segs: &[&Tagged]) -> Option<(Point, f64)> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2, mut wsum) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for t in segs {
        let n = t.seg.outward_normal();
        let w = t.seg.length();
        let c = dot(n, t.seg.p);
        a11 += w * n.0 * n.0;
        a12 += w * n.0 * n.1;
        a22 += w * n.1 * n.1;
        b1 += w * n.0 * c;
        b2 += w * n.1 * c;
        wsum += w;
    }
    let det = a11 * a22 - a12 * a12;
    let trace = a11 + a22;
    if wsum <= 0.0 || det <= 1e-6 * trace * trace {
        return None;
    }
    let p = ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det);
    let sq: f64 = segs
        .iter()
        .map(|t| {
            let n = t.seg.outward_normal();
            t.seg.length() * (dot(n, p) - dot(n, t.seg.p)).powi(2)
        })
        .sum();
    Some((p, (sq / wsum).sqrt()))
}

/// Portion of `p -> q` inside the disc of radius `r` around `c`.
fn clip_to_disc(p: Point, q: Point, c: Point, r: f64) -> Option<(Point, Point)> {
    let d = sub(q, p);
    let f = sub(p, c);
    let a = dot(d, d);
    if a <= 0.0 {
        return None;
    }
    let b = 2.0 * dot(f, d);
    let cc = dot(f, f) - r * r;
    let disc = b * b - 4.0 * a * cc;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = ((-b - s) / (2.0 * a)).max(0.0);
    let t1 = ((-b + s) / (2.0 * a)).min(1.0);
    if t1 <= t0 {
        return None;
    }
    Some(((p.0 + t0 * d.0, p.1 + t0 * d.1), (p.0 + t1 * d.0, p.1 + t1 * d.1)))
}

/// Angular split of undirected orientations into two clusters: single linkage
/// on the circle of period pi, cut at its two widest gaps.
fn two_clusters(angles: &[f64]) -> Option<Vec<usize>> {
    let n = angles.len();
    if n < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));
    // gap k sits between order[k] and order[k + 1] (cyclically)
    let gap = |k: usize| {
        let a = angles[order[k]];
        let b = angles[order[(k + 1) % n]];
        if k + 1 == n {
            b + PI - a
        } else {
            b - a
        }
    };
    let mut gaps: Vec<usize> = (0..n).collect();
    gaps.sort_by(|&x, &y| gap(y).total_cmp(&gap(x)).then(x.cmp(&y)));
    let (g1, g2) = (gaps[0].min(gaps[1]), gaps[0].max(gaps[1]));
    let mut label = vec![0usize; n];
    for k in g1 + 1..=g2 {
        label[order[k]] = 1;
    }
    Some(label)
}

/// Total-least-squares line of length-weighted segments: (centroid, unit direction).
fn fit_line(pieces: &[&Local]) -> (Point, Point) {
    let total: f64 = pieces.iter().map(|l| l.length).sum();
    let mut m = (0.0, 0.0);
    for l in pieces {
        m.0 += l.length * (l.p.0 + l.q.0) / 2.0;
        m.1 += l.length * (l.p.1 + l.q.1) / 2.0;
    }
    m = (m.0 / total, m.1 / total);
    let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
    for l in pieces {
        let (p, q) = (sub(l.p, m), sub(l.q, m));
        // second moments of a uniform segment from p to q
        let k = l.length / 3.0;
        srr += k * (p.0 * p.0 + p.0 * q.0 + q.0 * q.0);
        scc += k * (p.1 * p.1 + p.1 * q.1 + q.1 * q.1);
        src += k * (p.0 * q.1 + q.0 * p.1) / 2.0 + k * (p.0 * p.1 + q.0 * q.1);
    }
    let theta = 0.5 * (2.0 * src).atan2(srr - scc);
    (m, (theta.cos(), theta.sin()))
}

/// Detect T-junctions between two neighboring segments with ids `ids`.
pub fn detect_t_junctions(
    a: &SegmentShape,
    b: &SegmentShape,
    ids: (usize, usize),
    grow_radius: u32,
) -> Vec<TJunction> {
    let r = grow_radius as f64;
    let max_area = 8 * grow_radius as usize * grow_radius as usize;
    let max_extent = 4 * grow_radius;
    let segments: Vec<Tagged> = a
        .contour
        .iter()
        .map(|&seg| Tagged { seg, source: ids.0 })
        .chain(b.contour.iter().map(|&seg| Tagged { seg, source: ids.1 }))
        .filter(|t| !t.seg.on_border && t.seg.length() > 0.0)
        .collect();
    let other = |source: usize| if source == ids.0 { &b.mask } else { &a.mask };

    let mut found: Vec<TJunction> = Vec::new();
    for comp in triple_components(a, b, grow_radius) {
        let bb = BBox {
            row0: comp.iter().map(|p| p.0).min().unwrap(),
            row1: comp.iter().map(|p| p.0).max().unwrap() + 1,
            col0: comp.iter().map(|p| p.1).min().unwrap(),
            col1: comp.iter().map(|p| p.1).max().unwrap() + 1,
        };
        if comp.len() > max_area || bb.height().max(bb.width()) > max_extent {
            continue;
        }
        let n = comp.len() as f64;
        let p0 = (
            comp.iter().map(|p| p.0 as f64 + 0.5).sum::<f64>() / n,
            comp.iter().map(|p| p.1 as f64 + 0.5).sum::<f64>() / n,
        );
        let near: Vec<&Tagged> = segments.iter().filter(|t| t.seg.distance_to(p0) <= r + 2.0).collect();
        let Some((p1, res1)) = refine(&near) else {
            continue;
        };
        let close: Vec<&Tagged> = segments
            .iter()
            .filter(|t| t.seg.distance_to(p1) <= SECOND_PASS_DISTANCE)
            .collect();
        let (p, residual) = refine(&close).unwrap_or((p1, res1));
        if norm(sub(p, p0)) > JUNCTION_RADIUS {
            continue;
        }

        let locals: Vec<Local> = segments
            .iter()
            .filter(|t| t.seg.distance_to(p) <= LOCAL_SEGMENT_DISTANCE)
            .filter_map(|t| {
                let (cp, cq) = clip_to_disc(t.seg.p, t.seg.q, p, JUNCTION_RADIUS)?;
                let length = norm(sub(cq, cp));
                if length < 1e-6 {
                    return None;
                }
                let d = t.seg.direction();
                let nrm = t.seg.outward_normal();
                let mid = ((cp.0 + cq.0) / 2.0, (cp.1 + cq.1) / 2.0);
                let shared = [0.5, 1.5, 2.5].iter().any(|&off| {
                    other(t.source).contains_signed(
                        (mid.0 + off * nrm.0).floor() as i64,
                        (mid.1 + off * nrm.1).floor() as i64,
                    )
                });
                Some(Local {
                    p: cp,
                    q: cq,
                    angle: d.1.atan2(d.0).rem_euclid(PI),
                    length,
                    owner: if shared { None } else { Some(t.source) },
                })
            })
            .collect();
        let angles: Vec<f64> = locals.iter().map(|l| l.angle).collect();
        let Some(label) = two_clusters(&angles) else {
            continue;
        };
        let cluster = |c: usize| -> Vec<&Local> {
            locals.iter().zip(&label).filter(|(_, &l)| l == c).map(|(x, _)| x).collect()
        };
        let clusters = [cluster(0), cluster(1)];
        let lines = [fit_line(&clusters[0]), fit_line(&clusters[1])];
        let spread = |c: usize| -> (f64, f64) {
            let d = lines[c].1;
            let (mut plus, mut minus) = (0.0f64, 0.0f64);
            for l in &clusters[c] {
                for e in [l.p, l.q] {
                    let t = dot(sub(e, p), d);
                    plus = plus.max(t);
                    minus = minus.max(-t);
                }
            }
            (plus, minus)
        };
        let spreads = [spread(0), spread(1)];
        let reach = |c: usize| spreads[c].0.min(spreads[c].1);
        let base = if reach(1) > reach(0) { 1 } else { 0 };
        let leg = 1 - base;
        let mut base_dir = lines[base].1;
        if base_dir.1 < -1e-12 || (base_dir.1.abs() <= 1e-12 && base_dir.0 < 0.0) {
            base_dir = (-base_dir.0, -base_dir.1);
        }
        let leg_dir = lines[leg].1;
        let leg_ray = if spreads[leg].0 >= spreads[leg].1 { leg_dir } else { (-leg_dir.0, -leg_dir.1) };
        let cross = (leg_ray.0 * base_dir.1 - leg_ray.1 * base_dir.0).abs();
        if cross < MIN_LINE_ANGLE.sin() {
            continue;
        }
        let alpha = dot(leg_ray, base_dir).clamp(-1.0, 1.0).acos().clamp(1e-6, PI - 1e-6);

        let mut votes = [0.0f64; 3];
        for l in &clusters[leg] {
            let slot = match l.owner {
                None => 0,
                Some(o) if o == ids.0 => 1,
                Some(_) => 2,
            };
            votes[slot] += l.length;
        }
        let leg_owner = if votes[1] > votes[0] && votes[1] > votes[2] {
            Some(ids.0)
        } else if votes[2] > votes[0] && votes[2] > votes[1] {
            Some(ids.1)
        } else {
            None
        };

        let t = TJunction {
            location: p,
            alpha,
            leg_owner,
            fit_residual: residual,
        };
        match found.iter_mut().find(|f| norm(sub(f.location, t.location)) < MERGE_DISTANCE) {
            Some(f) => {
                if t.fit_residual < f.fit_residual {
                    *f = t;
                }
            }
            None => found.push(t),
        }
    }
    found
}

/// Credit of one junction to its leg owner.
pub fn junction_strength(alpha: f64) -> f64 {
    (-(FRAC_PI_2 - alpha).abs()).exp()
}

/// `|sum_k (b_i(t_k) - b_j(t_k))|`, crediting each junction to its leg owner.
pub fn t_junction_feature(junctions: &[TJunction], ids: (usize, usize)) -> f64 {
    junctions
        .iter()
        .map(|t| match t.leg_owner {
            Some(o) if o == ids.0 => junction_strength(t.alpha),
            Some(o) if o == ids.1 => -junction_strength(t.alpha),
            _ => 0.0,
        })
        .sum::<f64>()
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn junction(alpha: f64, owner: Option<usize>) -> TJunction {
        TJunction {
            location: (0.0, 0.0),
            alpha,
            leg_owner: owner,
            fit_residual: 0.0,
        }
    }

    #[test]
    fn feature_values() {
        assert_eq!(t_junction_feature(&[], (0, 1)), 0.0);
        assert!((t_junction_feature(&[junction(FRAC_PI_2, Some(0))], (0, 1)) - 1.0).abs() < 1e-12);
        let two = [
            junction(FRAC_PI_2 + PI / 4.0, Some(0)),
            junction(FRAC_PI_2 - PI / 4.0, Some(0)),
        ];
        let v = t_junction_feature(&two, (0, 1));
        assert!((v - 2.0 * (-PI / 4.0).exp()).abs() < 1e-12);
        assert!((v - 0.9116).abs() < 5e-4);
        // owners cancel; shared legs contribute nothing
        let mixed = [junction(1.0, Some(0)), junction(1.0, Some(1)), junction(1.0, None)];
        assert!(t_junction_feature(&mixed, (0, 1)).abs() < 1e-12);
        assert_eq!(t_junction_feature(&[junction(2.0, Some(1))], (0, 1)), junction_strength(2.0));
    }

    #[test]
    fn clustering_cuts_widest_gaps() {
        let label = two_clusters(&[0.05, 1.6, 3.1, 1.5]).unwrap();
        assert_eq!(label[0], label[2]);
        assert_eq!(label[1], label[3]);
        assert_ne!(label[0], label[1]);
    }

    #[test]
    fn abutting_rectangles_meet_background_twice() {
        let (w, h) = (100, 80);
        let a = SegmentShape::new(&SegmentMask::rect(w, h, 20, 20, 60, 50), 4);
        let b = SegmentShape::new(&SegmentMask::rect(w, h, 20, 50, 60, 80), 4);
        let mut js = detect_t_junctions(&a, &b, (3, 7), 4);
        js.sort_by(|x, y| x.location.0.total_cmp(&y.location.0));
        assert_eq!(js.len(), 2, "{js:?}");
        for (t, row) in js.iter().zip([20.0, 60.0]) {
            assert!((t.alpha - FRAC_PI_2).abs() < 0.2, "{t:?}");
            assert!((t.location.0 - row).abs() < 1.0 && (t.location.1 - 50.0).abs() < 1.0, "{t:?}");
            assert_eq!(t.leg_owner, None);
            assert!(t.fit_residual < 1e-6);
        }
    }

    #[test]
    fn disc_in_annulus_has_no_junction() {
        let (w, h) = (100, 100);
        let d2 = |r: u32, c: u32| (r as f64 - 49.5).powi(2) + (c as f64 - 49.5).powi(2);
        let disc = SegmentMask::from_fn(w, h, |r, c| d2(r, c) <= 15.0f64.powi(2));
        let ring = SegmentMask::from_fn(w, h, |r, c| d2(r, c) > 15.0f64.powi(2) && d2(r, c) <= 32.0f64.powi(2));
        let js = detect_t_junctions(&SegmentShape::new(&disc, 4), &SegmentShape::new(&ring, 4), (0, 1), 4);
        assert!(js.is_empty(), "{js:?}");
    }

    #[test]
    fn occluded_square_owns_the_legs() {
        let (w, h) = (100, 80);
        let bar = SegmentMask::rect(w, h, 0, 45, h, 55);
        let square = SegmentMask::rect(w, h, 20, 20, 60, 60).difference(&bar).unwrap();
        let js = detect_t_junctions(&SegmentShape::new(&bar, 4), &SegmentShape::new(&square, 4), (0, 1), 4);
        assert_eq!(js.len(), 2, "{js:?}");
        for t in &js {
            assert_eq!(t.leg_owner, Some(1), "{t:?}");
            assert!((t.alpha - FRAC_PI_2).abs() < 0.2);
            assert!((t.location.1 - 45.0).abs() < 1.0);
        }
        let f = t_junction_feature(&js, (0, 1));
        assert!((f - 2.0).abs() < 0.2);
    }
}
