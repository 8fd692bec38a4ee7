use super::{dilate, MaskError, Run, SegmentMask, Window};

/// The 4-connected inner boundary of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelBoundary {
    /// `(row, col)` of every mask pixel with at least one 4-neighbor outside it.
    pub points: Vec<(u32, u32)>,
    /// Number of outside-facing pixel edges (raster border edges included).
    pub perimeter: u64,
}

/// Sum of pairwise column overlaps of two sorted, same-row run lists.
fn run_overlap(a: &[Run], b: &[Run]) -> u64 {
    let (mut i, mut j, mut acc) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let lo = a[i].start.max(b[j].start);
        let hi = a[i].end.min(b[j].end);
        if lo < hi {
            acc += (hi - lo) as u64;
        }
        if a[i].end < b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc
}

fn neighbor_rows(mask: &SegmentMask, row: u32) -> (&[Run], &[Run]) {
    let above = if row == 0 { &[][..] } else { mask.row_runs(row - 1) };
    let below = mask.row_runs(row + 1);
    (above, below)
}

/// Outside-facing pixel edge count.
pub fn perimeter(mask: &SegmentMask) -> u64 {
    let mut total = 0u64;
    let runs = mask.runs();
    let mut i = 0;
    while i < runs.len() {
        let row = runs[i].row;
        let j = i + runs[i..].partition_point(|r| r.row == row);
        let cur = &runs[i..j];
        let (above, below) = neighbor_rows(mask, row);
        let len: u64 = cur.iter().map(|r| r.len() as u64).sum();
        total += 2 * cur.len() as u64;
        total += len - run_overlap(cur, above);
        total += len - run_overlap(cur, below);
        i = j;
    }
    total
}

pub fn boundary(mask: &SegmentMask) -> Result<PixelBoundary, MaskError> {
    let bbox = mask.bbox().ok_or(MaskError::Empty)?;
    let win = Window::of_mask(mask, bbox);
    let mut points = Vec::new();
    let mut edges = 0u64;
    for (r, c) in mask.pixels() {
        let (ri, ci) = (r as i64, c as i64);
        let outside = [(ri - 1, ci), (ri + 1, ci), (ri, ci - 1), (ri, ci + 1)]
            .iter()
            .filter(|&&(y, x)| !win.get(y, x))
            .count() as u64;
        if outside > 0 {
            points.push((r, c));
            edges += outside;
        }
    }
    Ok(PixelBoundary {
        points,
        perimeter: edges,
    })
}

/// Number of 4-adjacent pixel pairs `(p, q)` with `p` in `a` and `q` in `b`.
pub fn shared_edge_count(a: &SegmentMask, b: &SegmentMask) -> Result<u64, MaskError> {
    if a.dims() != b.dims() {
        return Err(MaskError::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    let mut total = 0u64;
    let runs = a.runs();
    let mut i = 0;
    while i < runs.len() {
        let row = runs[i].row;
        let j = i + runs[i..].partition_point(|r| r.row == row);
        let cur = &runs[i..j];
        let same = b.row_runs(row);
        for ra in cur {
            total += same
                .iter()
                .filter(|rb| rb.start == ra.end || rb.end == ra.start)
                .count() as u64;
        }
        let (above, below) = neighbor_rows(b, row);
        total += run_overlap(cur, above) + run_overlap(cur, below);
        i = j;
    }
    Ok(total)
}

/// Length of the interface between two disjoint masks.
///
/// Touching masks report the number of shared pixel edges, which is exact and
/// symmetric. Masks separated by a gap report the mean of the two directed
/// counts of boundary pixels lying within `2 * radius` of the other mask, the
/// largest gap two masks grown by `radius` can bridge.
pub fn shared_boundary_length(a: &SegmentMask, b: &SegmentMask, radius: u32) -> Result<f64, MaskError> {
    if a.intersects(b)? {
        return Err(MaskError::Overlapping);
    }
    let edges = shared_edge_count(a, b)?;
    if edges > 0 || a.is_empty() || b.is_empty() {
        return Ok(edges as f64);
    }
    let reach_a = dilate(a, 2 * radius);
    let reach_b = dilate(b, 2 * radius);
    Ok(gap_interface_length(
        &boundary(a)?.points,
        &boundary(b)?.points,
        &reach_a,
        &reach_b,
    ))
}

/// Gap branch of [`shared_boundary_length`] with boundaries and reach masks precomputed.
pub fn shared_boundary_length_grown(
    a: &SegmentMask,
    b: &SegmentMask,
    boundary_a: &PixelBoundary,
    boundary_b: &PixelBoundary,
    reach_a: &SegmentMask,
    reach_b: &SegmentMask,
) -> Result<f64, MaskError> {
    if a.intersects(b)? {
        return Err(MaskError::Overlapping);
    }
    let edges = shared_edge_count(a, b)?;
    if edges > 0 {
        return Ok(edges as f64);
    }
    Ok(gap_interface_length(&boundary_a.points, &boundary_b.points, reach_a, reach_b))
}

fn gap_interface_length(
    points_a: &[(u32, u32)],
    points_b: &[(u32, u32)],
    reach_a: &SegmentMask,
    reach_b: &SegmentMask,
) -> f64 {
    let ab = points_a.iter().filter(|&&(r, c)| reach_b.contains(r, c)).count();
    let ba = points_b.iter().filter(|&&(r, c)| reach_a.contains(r, c)).count();
    (ab + ba) as f64 / 2.0
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, no collinear points) of integer points `(x, y)`.
pub(crate) fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Number of integer points inside or on a convex polygon given as `(x, y)` vertices.
fn rasterized_hull_area(hull: &[(i64, i64)]) -> u64 {
    const EPS: f64 = 1e-9;
    if hull.is_empty() {
        return 0;
    }
    let ymin = hull.iter().map(|p| p.1).min().unwrap();
    let ymax = hull.iter().map(|p| p.1).max().unwrap();
    let mut total = 0u64;
    for y in ymin..=ymax {
        let (mut xl, mut xr) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..hull.len() {
            let p = hull[k];
            let q = hull[(k + 1) % hull.len()];
            if y < p.1.min(q.1) || y > p.1.max(q.1) {
                continue;
            }
            if p.1 == q.1 {
                xl = xl.min(p.0.min(q.0) as f64);
                xr = xr.max(p.0.max(q.0) as f64);
            } else {
                let x = p.0 as f64 + (y - p.1) as f64 * (q.0 - p.0) as f64 / (q.1 - p.1) as f64;
                xl = xl.min(x);
                xr = xr.max(x);
            }
        }
        if hull.len() == 1 {
            xl = hull[0].0 as f64;
            xr = xl;
        }
        if xl <= xr {
            let lo = (xl - EPS).ceil() as i64;
            let hi = (xr + EPS).floor() as i64;
            if hi >= lo {
                total += (hi - lo + 1) as u64;
            }
        }
    }
    total
}

/// Area divided by the rasterized area of the convex hull of the pixel centers.
pub fn convexity(mask: &SegmentMask) -> Result<f64, MaskError> {
    if mask.is_empty() {
        return Err(MaskError::Empty);
    }
    let mut pts = Vec::new();
    let runs = mask.runs();
    let mut i = 0;
    while i < runs.len() {
        let row = runs[i].row;
        let j = i + runs[i..].partition_point(|r| r.row == row);
        pts.push((runs[i].start as i64, row as i64));
        pts.push((runs[j - 1].end as i64 - 1, row as i64));
        i = j;
    }
    let hull = convex_hull(pts);
    let hull_area = rasterized_hull_area(&hull);
    Ok((mask.area() as f64 / hull_area as f64).min(1.0))
}
