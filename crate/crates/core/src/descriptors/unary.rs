use super::maps::{chi_square, normalized, ImageMaps, LUM_BINS, ORIENT_BINS};
use super::FeatureError;
use crate::mask::{boundary, convexity, dilate, perimeter, SegmentMask};

pub const REGION_LEN: usize = 11;
pub const CONTRAST_LEN: usize = 8;
pub const GESTALT_LEN: usize = 4;
pub const STRIP_WIDTHS: [u32; 3] = [18, 30, 42];
pub const CENTER_SURROUND_LEN: usize = 12;

pub const REGION_NAMES: [&str; REGION_LEN] = [
    "centroid_row",
    "centroid_col",
    "area_fraction",
    "perimeter_ratio",
    "orientation_cos2",
    "orientation_sin2",
    "eccentricity",
    "bbox_height",
    "bbox_width",
    "bbox_fill",
    "border_distance",
];

pub const CONTRAST_NAMES: [&str; CONTRAST_LEN] = [
    "contrast_mean",
    "contrast_median",
    "contrast_p10",
    "contrast_p25",
    "contrast_p75",
    "contrast_p90",
    "contrast_min",
    "contrast_max",
];

pub const GESTALT_NAMES: [&str; GESTALT_LEN] = [
    "convexity",
    "luminance_chi2",
    "orientation_chi2",
    "compactness",
];

pub fn center_surround_names() -> Vec<String> {
    let kinds = ["hue", "rgb", "orient_signed", "orient_unsigned"];
    STRIP_WIDTHS
        .iter()
        .flat_map(|w| kinds.iter().map(move |k| format!("strip{w}_{k}")))
        .collect()
}

/// Position, size and shape of a region, normalized by the raster size.
pub fn unary_region(s: &SegmentMask) -> Result<Vec<f64>, FeatureError> {
    if s.is_empty() {
        return Err(FeatureError::EmptyMask);
    }
    let (w, h) = (s.width() as f64, s.height() as f64);
    let n = s.area() as f64;
    let (mut sy, mut sx) = (0.0, 0.0);
    for run in s.runs() {
        let len = run.len() as f64;
        sy += run.row as f64 * len;
        // sum of start..end-1
        sx += (run.start as f64 + run.end as f64 - 1.0) * len / 2.0;
    }
    let (my, mx) = (sy / n, sx / n);
    let (mut myy, mut mxx, mut mxy) = (0.0, 0.0, 0.0);
    for run in s.runs() {
        let len = run.len() as f64;
        let dy = run.row as f64 - my;
        let a = run.start as f64 - mx;
        let b = run.end as f64 - 1.0 - mx;
        // sum over consecutive integers x - mx from a to b
        let sum_x = (a + b) * len / 2.0;
        let sum_x2 = sum_of_squares(a, len);
        myy += dy * dy * len;
        mxx += sum_x2;
        mxy += dy * sum_x;
    }
    let (mxx, myy, mxy) = (mxx / n, myy / n, mxy / n);
    let diff = mxx - myy;
    let norm = (diff * diff + 4.0 * mxy * mxy).sqrt();
    let (cos2, sin2) = if norm > 1e-12 * (mxx + myy).max(1e-12) {
        (diff / norm, 2.0 * mxy / norm)
    } else {
        (0.0, 0.0)
    };
    let l1 = (mxx + myy + norm) / 2.0;
    let l2 = ((mxx + myy - norm) / 2.0).max(0.0);
    let eccentricity = if l1 > 1e-12 { (1.0 - l2 / l1).max(0.0).sqrt() } else { 0.0 };

    let bb = s.bbox().expect("non-empty");
    let cy = (my + 0.5) / h;
    let cx = (mx + 0.5) / w;
    Ok(vec![
        cy,
        cx,
        n / (w * h),
        perimeter(s) as f64 / (2.0 * (w + h)),
        cos2,
        sin2,
        eccentricity,
        bb.height() as f64 / h,
        bb.width() as f64 / w,
        n / (bb.height() as f64 * bb.width() as f64),
        cy.min(1.0 - cy).min(cx).min(1.0 - cx),
    ])
}

/// Sum of `(a + k)^2` for `k` in `0..len`.
fn sum_of_squares(a: f64, len: f64) -> f64 {
    let m = len - 1.0;
    len * a * a + a * m * len + m * len * (2.0 * m + 1.0) / 6.0
}

/// Linear-interpolation percentile of sorted values, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Statistics of the gradient magnitude along the region boundary.
pub fn unary_boundary_contrast(s: &SegmentMask, maps: &ImageMaps) -> Result<Vec<f64>, FeatureError> {
    let b = boundary(s)?;
    let mut vals: Vec<f64> = b.points.iter().map(|&(r, c)| maps.mag[maps.index(r, c)]).collect();
    vals.sort_by(f64::total_cmp);
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    Ok(vec![
        mean,
        percentile(&vals, 0.5),
        percentile(&vals, 0.1),
        percentile(&vals, 0.25),
        percentile(&vals, 0.75),
        percentile(&vals, 0.9),
        vals[0],
        vals[vals.len() - 1],
    ])
}

/// Convexity, interior/exterior dissimilarity and compactness.
pub fn unary_gestalt(s: &SegmentMask, maps: &ImageMaps) -> Result<Vec<f64>, FeatureError> {
    if s.is_empty() {
        return Err(FeatureError::EmptyMask);
    }
    if s.area() == s.raster_area() {
        return Err(FeatureError::EmptyExterior);
    }
    let mut lum_in = vec![0.0; LUM_BINS];
    let mut orient_in = vec![0.0; ORIENT_BINS];
    for (r, c) in s.pixels() {
        let i = maps.index(r, c);
        lum_in[maps.lum_bin[i] as usize] += 1.0;
        orient_in[maps.signed_bin[i] as usize] += maps.mag[i];
    }
    let lum_out: Vec<f64> = maps.total_lum_hist.iter().zip(&lum_in).map(|(t, i)| (t - i).max(0.0)).collect();
    let orient_out: Vec<f64> = maps
        .total_orient_hist
        .iter()
        .zip(&orient_in)
        .map(|(t, i)| (t - i).max(0.0))
        .collect();
    let p = perimeter(s) as f64;
    Ok(vec![
        convexity(s)?,
        chi_square(&normalized(lum_in), &normalized(lum_out)),
        chi_square(&normalized(orient_in), &normalized(orient_out)),
        p * p / s.area() as f64,
    ])
}

/// Chi-square distances between the segment and three surrounding strips, for
/// each of the four local-feature histograms.
pub fn unary_center_surround(s: &SegmentMask, maps: &ImageMaps) -> Result<Vec<f64>, FeatureError> {
    if s.is_empty() {
        return Err(FeatureError::EmptyMask);
    }
    let inner = maps.local_histograms(s);
    let mut out = Vec::with_capacity(CENTER_SURROUND_LEN);
    for &w in &STRIP_WIDTHS {
        let strip = dilate(s, w).difference(s)?;
        if strip.is_empty() {
            return Err(FeatureError::EmptyStrip(w));
        }
        let outer = maps.local_histograms(&strip);
        out.push(chi_square(&inner.hue, &outer.hue));
        out.push(chi_square(&inner.rgb, &outer.rgb));
        out.push(chi_square(&inner.signed, &outer.signed));
        out.push(chi_square(&inner.unsigned, &outer.unsigned));
    }
    Ok(out)
}
