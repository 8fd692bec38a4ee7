use super::maps::ImageMaps;
use super::unary::unary_region;
use super::FeatureError;
use crate::mask::{boundary, convexity, perimeter, shared_boundary_length, SegmentMask};

/// Pixels stepped inside a region before reading the gradient.
pub const INSIDE_OFFSET: f64 = 3.0;
const NORMAL_WINDOW: i64 = 2;
const MIN_GRADIENT: f64 = 1e-6;

/// `|phi_region(s_i) - phi_region(s_j)|` componentwise.
pub fn pairwise_region(a: &SegmentMask, b: &SegmentMask) -> Result<Vec<f64>, FeatureError> {
    Ok(pairwise_region_from(&unary_region(a)?, &unary_region(b)?))
}

pub fn pairwise_region_from(fa: &[f64], fb: &[f64]) -> Vec<f64> {
    fa.iter().zip(fb).map(|(x, y)| (x - y).abs()).collect()
}

pub fn relative_convexity(a: &SegmentMask, b: &SegmentMask) -> Result<f64, FeatureError> {
    Ok((convexity(a)? - convexity(b)?).abs())
}

/// `|l1 / l12 - l2 / l12|` from the two perimeters and the shared length.
pub fn surroundedness(l1: f64, l2: f64, l12: f64) -> Result<f64, FeatureError> {
    if l12 <= 0.0 {
        return Err(FeatureError::NoSharedBoundary);
    }
    Ok((l1 / l12 - l2 / l12).abs())
}

pub fn surroundedness_of(a: &SegmentMask, b: &SegmentMask, grow_radius: u32) -> Result<f64, FeatureError> {
    let l12 = shared_boundary_length(a, b, grow_radius)?;
    surroundedness(perimeter(a) as f64, perimeter(b) as f64, l12)
}

/// Mean `|cos|` between the luminance gradient a few pixels inside `a` and the
/// outward boundary normal, over boundary pixels of `a` that lie in `b_grown`.
pub fn gradient_orthogonality(a: &SegmentMask, b_grown: &SegmentMask, maps: &ImageMaps) -> Result<f64, FeatureError> {
    let (w, h) = (a.width() as i64, a.height() as i64);
    let pts = boundary(a)?.points;
    let (mut sum, mut count) = (0.0, 0usize);
    for (r, c) in pts {
        if !b_grown.contains(r, c) {
            continue;
        }
        let (mut ny, mut nx) = (0.0f64, 0.0f64);
        for dy in -NORMAL_WINDOW..=NORMAL_WINDOW {
            for dx in -NORMAL_WINDOW..=NORMAL_WINDOW {
                let (y, x) = (r as i64 + dy, c as i64 + dx);
                if y < 0 || x < 0 || y >= h || x >= w || a.contains(y as u32, x as u32) {
                    continue;
                }
                ny += dy as f64;
                nx += dx as f64;
            }
        }
        let nn = (ny * ny + nx * nx).sqrt();
        if nn < 1e-9 {
            continue;
        }
        let (ny, nx) = (ny / nn, nx / nn);
        let y = (r as f64 - INSIDE_OFFSET * ny).round() as i64;
        let x = (c as f64 - INSIDE_OFFSET * nx).round() as i64;
        if !a.contains_signed(y, x) {
            continue;
        }
        let i = maps.index(y as u32, x as u32);
        let (gy, gx) = (maps.gy_smooth[i], maps.gx_smooth[i]);
        let g = (gx * gx + gy * gy).sqrt();
        if g < MIN_GRADIENT {
            continue;
        }
        sum += ((gy * ny + gx * nx) / g).abs();
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// `|o(s_i, s_j) - o(s_j, s_i)|`.
pub fn extremal_edge(
    a: &SegmentMask,
    b: &SegmentMask,
    a_grown: &SegmentMask,
    b_grown: &SegmentMask,
    maps: &ImageMaps,
) -> Result<f64, FeatureError> {
    Ok((gradient_orthogonality(a, b_grown, maps)? - gradient_orthogonality(b, a_grown, maps)?).abs())
}
