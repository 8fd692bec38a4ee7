use crate::image::RgbImage;
use crate::mask::SegmentMask;

/// Color of segment `id`: hues spaced by the golden angle, never black.
pub fn member_color(id: usize) -> [u8; 3] {
    let h = (id as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.65, 0.95);
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|t| ((t + m) * 255.0).round() as u8)
}

/// Members painted in their colors on black.
pub fn render_tiling(segments: &[SegmentMask], members: &[usize], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::new(width, height);
    for &m in members {
        let color = member_color(m);
        for (r, c) in segments[m].pixels() {
            img.put(r, c, color);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixels_map_back_to_members() {
        let segs = vec![
            SegmentMask::rect(12, 8, 0, 0, 8, 5),
            SegmentMask::rect(12, 8, 0, 5, 4, 12),
            SegmentMask::rect(12, 8, 4, 5, 8, 12),
        ];
        let full = render_tiling(&segs, &[0, 1, 2], 12, 8);
        assert!(full.raw().chunks(3).all(|p| p != [0, 0, 0]));
        let empty = render_tiling(&segs, &[], 12, 8);
        assert!(empty.raw().iter().all(|&b| b == 0));
        let part = render_tiling(&segs, &[0, 2], 12, 8);
        for r in 0..8 {
            for c in 0..12 {
                let want = (0..3).find(|&m| m != 1 && segs[m].contains(r, c)).map_or([0; 3], member_color);
                assert_eq!(part.get(r, c), want);
            }
        }
        let colors: std::collections::BTreeSet<[u8; 3]> = (0..50).map(member_color).collect();
        assert_eq!(colors.len(), 50);
    }
}
