use super::{Run, SegmentMask};

/// Half-widths of a Euclidean disc: entry `dy + radius` is the largest `dx`
/// with `dx^2 + dy^2 <= radius^2`.
pub fn disc_half_widths(radius: u32) -> Vec<u32> {
    let r2 = radius as u64 * radius as u64;
    (0..=2 * radius as i64)
        .map(|i| {
            let dy = (i - radius as i64).unsigned_abs();
            let rem = r2 - dy * dy;
            let mut k = (rem as f64).sqrt() as u64;
            while k * k > rem {
                k -= 1;
            }
            while (k + 1) * (k + 1) <= rem {
                k += 1;
            }
            k as u32
        })
        .collect()
}

/// Morphological dilation by a Euclidean disc, clipped to the raster.
pub fn dilate(mask: &SegmentMask, radius: u32) -> SegmentMask {
    if radius == 0 || mask.is_empty() {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let half = disc_half_widths(radius);
    let r = radius as i64;
    let mut out = Vec::with_capacity(mask.runs().len() * half.len());
    for run in mask.runs() {
        for (i, &hw) in half.iter().enumerate() {
            let row = run.row as i64 + i as i64 - r;
            if row < 0 || row >= h as i64 {
                continue;
            }
            out.push(Run::new(
                row as u32,
                run.start.saturating_sub(hw),
                (run.end + hw).min(w),
            ));
        }
    }
    SegmentMask::from_unsorted_unchecked(w, h, out)
}

/// Erosion by a Euclidean disc; pixels off the raster count as foreground.
pub fn erode(mask: &SegmentMask, radius: u32) -> SegmentMask {
    if radius == 0 {
        return mask.clone();
    }
    dilate(&mask.complement(), radius).complement()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_dilate(mask: &SegmentMask, radius: u32) -> Vec<bool> {
        let (w, h) = mask.dims();
        let bits = mask.to_bitmap();
        let r = radius as i64;
        let mut out = vec![false; bits.len()];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                'search: for dy in -r..=r {
                    for dx in -r..=r {
                        if dx * dx + dy * dy > r * r {
                            continue;
                        }
                        let (yy, xx) = (y + dy, x + dx);
                        if yy >= 0 && xx >= 0 && yy < h as i64 && xx < w as i64 && bits[(yy * w as i64 + xx) as usize] {
                            out[(y * w as i64 + x) as usize] = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn half_widths_radius_four() {
        assert_eq!(disc_half_widths(4), vec![0, 2, 3, 3, 4, 3, 3, 2, 0]);
    }

    #[test]
    fn radius_zero_is_identity() {
        let m = SegmentMask::from_fn(12, 9, |r, c| (r * c) % 5 == 1);
        assert_eq!(dilate(&m, 0), m);
        assert_eq!(erode(&m, 0), m);
    }

    #[test]
    fn center_pixel_radius_four_is_49_pixels() {
        let m = SegmentMask::rect(21, 21, 10, 10, 11, 11);
        let d = dilate(&m, 4);
        // per-pixel distance oracle
        let expected = (0..21i64)
            .flat_map(|y| (0..21i64).map(move |x| (y, x)))
            .filter(|(y, x)| (y - 10).pow(2) + (x - 10).pow(2) <= 16)
            .count();
        assert_eq!(expected, 49);
        assert_eq!(d.area(), 49);
        assert_eq!(d.to_bitmap(), dense_dilate(&m, 4));
    }

    #[test]
    fn corner_pixel_is_clipped_quarter_disc() {
        let m = SegmentMask::rect(10, 10, 0, 0, 1, 1);
        let d = dilate(&m, 4);
        let expected = (0..10i64)
            .flat_map(|y| (0..10i64).map(move |x| (y, x)))
            .filter(|(y, x)| y * y + x * x <= 16)
            .count();
        assert_eq!(d.area() as usize, expected);
        assert_eq!(d.to_bitmap(), dense_dilate(&m, 4));
    }

    #[test]
    fn erosion_of_square() {
        let m = SegmentMask::rect(20, 20, 5, 5, 15, 15);
        let e = erode(&m, 2);
        assert_eq!(e, SegmentMask::rect(20, 20, 7, 7, 13, 13));
    }
}
