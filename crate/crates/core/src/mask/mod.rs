//! Run-length encoded binary masks.
//!
//! A [`SegmentMask`] stores one half-open column interval per horizontal run,
//! sorted by `(row, start)`. Runs in the same row never overlap and never
//! touch; every constructor normalizes its input to that canonical form, so
//! two masks covering the same pixels always compare equal.

mod geometry;
mod morphology;

pub use geometry::{
    boundary, convexity, perimeter, shared_boundary_length, shared_boundary_length_grown,
    shared_edge_count, PixelBoundary,
};
pub use morphology::{dilate, disc_half_widths, erode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("raster dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("mask is empty")]
    Empty,
    #[error("run (row {row}, {start}..{end}) lies outside the {width}x{height} raster")]
    OutOfBounds {
        row: u32,
        start: u32,
        end: u32,
        width: u32,
        height: u32,
    },
    #[error("run (row {row}, {start}..{end}) is empty or inverted")]
    InvalidRun { row: u32, start: u32, end: u32 },
    #[error("masks overlap")]
    Overlapping,
    #[error("bitmap has {len} pixels, expected {expected}")]
    BitmapSize { len: usize, expected: usize },
}

/// One horizontal run `[start, end)` of foreground pixels in `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Run {
    pub row: u32,
    pub start: u32,
    pub end: u32,
}

impl Run {
    pub fn new(row: u32, start: u32, end: u32) -> Self {
        Self { row, start, end }
    }

    #[inline]
    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Half-open bounding box `[row0, row1) x [col0, col1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub row0: u32,
    pub col0: u32,
    pub row1: u32,
    pub col1: u32,
}

impl BBox {
    pub fn height(&self) -> u32 {
        self.row1 - self.row0
    }

    pub fn width(&self) -> u32 {
        self.col1 - self.col0
    }

    /// Grow by `pad` on every side, clipped to a `width x height` raster.
    pub fn padded(&self, pad: u32, width: u32, height: u32) -> BBox {
        BBox {
            row0: self.row0.saturating_sub(pad),
            col0: self.col0.saturating_sub(pad),
            row1: (self.row1 + pad).min(height),
            col1: (self.col1 + pad).min(width),
        }
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.row0 < other.row1
            && other.row0 < self.row1
            && self.col0 < other.col1
            && other.col0 < self.col1
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            row0: self.row0.min(other.row0),
            col0: self.col0.min(other.col0),
            row1: self.row1.max(other.row1),
            col1: self.col1.max(other.col1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentMask {
    width: u32,
    height: u32,
    runs: Vec<Run>,
}

impl SegmentMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            runs: Vec::new(),
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        let runs = if width == 0 {
            Vec::new()
        } else {
            (0..height).map(|r| Run::new(r, 0, width)).collect()
        };
        Self {
            width,
            height,
            runs,
        }
    }

    /// Build a mask from arbitrary runs; overlapping or touching runs are merged.
    pub fn from_runs<I>(width: u32, height: u32, runs: I) -> Result<Self, MaskError>
    where
        I: IntoIterator<Item = Run>,
    {
        let mut collected = Vec::new();
        for run in runs {
            if run.end <= run.start {
                return Err(MaskError::InvalidRun {
                    row: run.row,
                    start: run.start,
                    end: run.end,
                });
            }
            if run.row >= height || run.end > width {
                return Err(MaskError::OutOfBounds {
                    row: run.row,
                    start: run.start,
                    end: run.end,
                    width,
                    height,
                });
            }
            collected.push(run);
        }
        Ok(Self::from_unsorted_unchecked(width, height, collected))
    }

    /// Runs must already lie inside the raster and be non-empty.
    pub(crate) fn from_unsorted_unchecked(width: u32, height: u32, mut runs: Vec<Run>) -> Self {
        runs.sort_unstable();
        let mut merged: Vec<Run> = Vec::with_capacity(runs.len());
        for run in runs {
            match merged.last_mut() {
                Some(last) if last.row == run.row && run.start <= last.end => {
                    last.end = last.end.max(run.end);
                }
                _ => merged.push(run),
            }
        }
        Self {
            width,
            height,
            runs: merged,
        }
    }

    /// Runs must already be canonical.
    pub(crate) fn from_canonical_unchecked(width: u32, height: u32, runs: Vec<Run>) -> Self {
        debug_assert!(runs
            .windows(2)
            .all(|w| w[0].row < w[1].row || (w[0].row == w[1].row && w[0].end < w[1].start)));
        Self {
            width,
            height,
            runs,
        }
    }

    /// Row-major bitmap, `bitmap[row * width + col]`.
    pub fn from_bitmap(width: u32, height: u32, bitmap: &[bool]) -> Result<Self, MaskError> {
        let expected = width as usize * height as usize;
        if bitmap.len() != expected {
            return Err(MaskError::BitmapSize {
                len: bitmap.len(),
                expected,
            });
        }
        Ok(Self::from_fn(width, height, |r, c| {
            bitmap[r as usize * width as usize + c as usize]
        }))
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut runs = Vec::new();
        for r in 0..height {
            let mut start = None;
            for c in 0..width {
                match (f(r, c), start) {
                    (true, None) => start = Some(c),
                    (false, Some(s)) => {
                        runs.push(Run::new(r, s, c));
                        start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = start {
                runs.push(Run::new(r, s, width));
            }
        }
        Self {
            width,
            height,
            runs,
        }
    }

    /// Axis-aligned rectangle `[row0, row1) x [col0, col1)`, clipped to the raster.
    pub fn rect(width: u32, height: u32, row0: u32, col0: u32, row1: u32, col1: u32) -> Self {
        let (row1, col1) = (row1.min(height), col1.min(width));
        let runs = if col0 < col1 {
            (row0..row1).map(|r| Run::new(r, col0, col1)).collect()
        } else {
            Vec::new()
        };
        Self {
            width,
            height,
            runs,
        }
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut out = vec![false; self.width as usize * self.height as usize];
        for run in &self.runs {
            let base = run.row as usize * self.width as usize;
            out[base + run.start as usize..base + run.end as usize].fill(true);
        }
        out
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn area(&self) -> u64 {
        self.runs.iter().map(|r| r.len() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn raster_area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// Runs lying in `row`.
    pub fn row_runs(&self, row: u32) -> &[Run] {
        let lo = self.runs.partition_point(|r| r.row < row);
        let hi = lo + self.runs[lo..].partition_point(|r| r.row == row);
        &self.runs[lo..hi]
    }

    pub fn contains(&self, row: u32, col: u32) -> bool {
        let runs = self.row_runs(row);
        let idx = runs.partition_point(|r| r.end <= col);
        idx < runs.len() && runs[idx].start <= col
    }

    /// Like [`contains`](Self::contains) but accepts signed coordinates; pixels off the raster are absent.
    pub fn contains_signed(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && row < self.height as i64
            && col < self.width as i64
            && self.contains(row as u32, col as u32)
    }

    pub fn bbox(&self) -> Option<BBox> {
        let first = self.runs.first()?;
        let last = self.runs.last()?;
        let (mut col0, mut col1) = (u32::MAX, 0);
        for run in &self.runs {
            col0 = col0.min(run.start);
            col1 = col1.max(run.end);
        }
        Some(BBox {
            row0: first.row,
            col0,
            row1: last.row + 1,
            col1,
        })
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.runs
            .iter()
            .flat_map(|run| (run.start..run.end).map(move |c| (run.row, c)))
    }

    fn check_dims(&self, other: &SegmentMask) -> Result<(), MaskError> {
        if self.dims() != other.dims() {
            return Err(MaskError::DimensionMismatch {
                a: self.dims(),
                b: other.dims(),
            });
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &SegmentMask) -> Result<u64, MaskError> {
        self.check_dims(other)?;
        let (a, b) = (&self.runs, &other.runs);
        let (mut i, mut j, mut acc) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            let (ra, rb) = (a[i], b[j]);
            if ra.row != rb.row {
                if ra.row < rb.row {
                    i += 1;
                } else {
                    j += 1;
                }
                continue;
            }
            let lo = ra.start.max(rb.start);
            let hi = ra.end.min(rb.end);
            if lo < hi {
                acc += (hi - lo) as u64;
            }
            if ra.end < rb.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(acc)
    }

    /// True iff the masks share a pixel; stops at the first intersecting run pair.
    pub fn intersects(&self, other: &SegmentMask) -> Result<bool, MaskError> {
        self.check_dims(other)?;
        let (a, b) = (&self.runs, &other.runs);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let (ra, rb) = (a[i], b[j]);
            if ra.row != rb.row {
                if ra.row < rb.row {
                    i += 1;
                } else {
                    j += 1;
                }
                continue;
            }
            if ra.start.max(rb.start) < ra.end.min(rb.end) {
                return Ok(true);
            }
            if ra.end < rb.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(false)
    }

    /// Intersection over union. Two empty masks are treated as disjoint.
    pub fn overlap(&self, other: &SegmentMask) -> Result<f64, MaskError> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        })
    }

    pub fn union(&self, other: &SegmentMask) -> Result<SegmentMask, MaskError> {
        self.check_dims(other)?;
        let runs = self.runs.iter().chain(other.runs.iter()).copied().collect();
        Ok(Self::from_unsorted_unchecked(self.width, self.height, runs))
    }

    pub fn intersection(&self, other: &SegmentMask) -> Result<SegmentMask, MaskError> {
        self.check_dims(other)?;
        let (a, b) = (&self.runs, &other.runs);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let (ra, rb) = (a[i], b[j]);
            if ra.row != rb.row {
                if ra.row < rb.row {
                    i += 1;
                } else {
                    j += 1;
                }
                continue;
            }
            let lo = ra.start.max(rb.start);
            let hi = ra.end.min(rb.end);
            if lo < hi {
                out.push(Run::new(ra.row, lo, hi));
            }
            if ra.end < rb.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(Self::from_canonical_unchecked(self.width, self.height, out))
    }

    /// Pixels of `self` not in `other`.
    pub fn difference(&self, other: &SegmentMask) -> Result<SegmentMask, MaskError> {
        self.check_dims(other)?;
        let b = &other.runs;
        let mut j = 0;
        let mut out = Vec::new();
        for &ra in &self.runs {
            while j < b.len() && (b[j].row < ra.row || (b[j].row == ra.row && b[j].end <= ra.start))
            {
                j += 1;
            }
            let mut cursor = ra.start;
            let mut k = j;
            while k < b.len() && b[k].row == ra.row && b[k].start < ra.end {
                if b[k].start > cursor {
                    out.push(Run::new(ra.row, cursor, b[k].start));
                }
                cursor = cursor.max(b[k].end);
                k += 1;
            }
            if cursor < ra.end {
                out.push(Run::new(ra.row, cursor, ra.end));
            }
        }
        Ok(Self::from_canonical_unchecked(self.width, self.height, out))
    }

    pub fn complement(&self) -> SegmentMask {
        let mut out = Vec::new();
        let mut idx = 0;
        for r in 0..self.height {
            let mut cursor = 0;
            while idx < self.runs.len() && self.runs[idx].row == r {
                let run = self.runs[idx];
                if run.start > cursor {
                    out.push(Run::new(r, cursor, run.start));
                }
                cursor = run.end;
                idx += 1;
            }
            if cursor < self.width {
                out.push(Run::new(r, cursor, self.width));
            }
        }
        Self::from_canonical_unchecked(self.width, self.height, out)
    }

    /// Shift by `(dy, dx)`; pixels leaving the raster are dropped.
    pub fn translate(&self, dy: i64, dx: i64) -> SegmentMask {
        let (w, h) = (self.width as i64, self.height as i64);
        let runs = self
            .runs
            .iter()
            .filter_map(|run| {
                let row = run.row as i64 + dy;
                let start = (run.start as i64 + dx).max(0);
                let end = (run.end as i64 + dx).min(w);
                (row >= 0 && row < h && start < end)
                    .then(|| Run::new(row as u32, start as u32, end as u32))
            })
            .collect();
        Self::from_canonical_unchecked(self.width, self.height, runs)
    }

    /// Centroid of pixel centers in `(row, col)` pixel-index coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let area = self.area();
        if area == 0 {
            return None;
        }
        let (mut sr, mut sc) = (0.0, 0.0);
        for run in &self.runs {
            let n = run.len() as f64;
            sr += run.row as f64 * n;
            // sum of start..end-1
            sc += (run.start as f64 + run.end as f64 - 1.0) * n / 2.0;
        }
        Some((sr / area as f64, sc / area as f64))
    }
}

/// Dense view of a rectangular window of a mask, used where random access beats run scans.
#[derive(Debug, Clone)]
pub(crate) struct Window {
    pub bbox: BBox,
    data: Vec<bool>,
}

impl Window {
    pub fn new(bbox: BBox) -> Self {
        Self {
            bbox,
            data: vec![false; bbox.height() as usize * bbox.width() as usize],
        }
    }

    pub fn of_mask(mask: &SegmentMask, bbox: BBox) -> Self {
        let mut win = Self::new(bbox);
        win.paint(mask, true);
        win
    }

    pub fn paint(&mut self, mask: &SegmentMask, value: bool) {
        let bb = self.bbox;
        let w = bb.width() as usize;
        for run in mask.runs() {
            if run.row < bb.row0 || run.row >= bb.row1 {
                continue;
            }
            let s = run.start.max(bb.col0);
            let e = run.end.min(bb.col1);
            if s < e {
                let base = (run.row - bb.row0) as usize * w;
                self.data[base + (s - bb.col0) as usize..base + (e - bb.col0) as usize]
                    .fill(value);
            }
        }
    }

    #[inline]
    pub fn get(&self, row: i64, col: i64) -> bool {
        let bb = self.bbox;
        if row < bb.row0 as i64 || col < bb.col0 as i64 || row >= bb.row1 as i64 || col >= bb.col1 as i64 {
            return false;
        }
        self.data[(row as usize - bb.row0 as usize) * bb.width() as usize + (col as usize - bb.col0 as usize)]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        let bb = self.bbox;
        self.data[(row - bb.row0) as usize * bb.width() as usize + (col - bb.col0) as usize] = value;
    }
}
