//! Per-image segment pools and ground-truth partitions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::image::RgbImage;
use crate::mask::{Run, SegmentMask};

/// Label value reserved for "no label"; never valid in a partition.
pub const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("pool has no segments")]
    NoSegments,
    #[error("segment {index} is {got:?}, image is {expected:?}")]
    SegmentDims {
        index: usize,
        got: (u32, u32),
        expected: (u32, u32),
    },
    #[error("segment {index} is empty")]
    EmptySegment { index: usize },
    #[error("ground truth {index} is {got:?}, image is {expected:?}")]
    GroundTruthDims {
        index: usize,
        got: (u32, u32),
        expected: (u32, u32),
    },
    #[error("label map has {len} entries, expected {expected}")]
    LabelCount { len: usize, expected: usize },
    #[error("pixel ({row}, {col}) is unlabeled")]
    Unlabeled { row: u32, col: u32 },
}

/// One annotated partition of the raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSegmentation {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    region_labels: Vec<u32>,
    regions: Vec<SegmentMask>,
}

impl GroundTruthSegmentation {
    pub fn from_labels(width: u32, height: u32, labels: Vec<u32>) -> Result<Self, PoolError> {
        let decoded = decode_ground_truth(width, height, &labels)?;
        let (region_labels, regions) = decoded.into_iter().unzip();
        Ok(Self {
            width,
            height,
            labels,
            region_labels,
            regions,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major label map.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Masks in ascending label order.
    pub fn regions(&self) -> &[SegmentMask] {
        &self.regions
    }

    pub fn region_labels(&self) -> &[u32] {
        &self.region_labels
    }

    pub fn label_at(&self, row: u32, col: u32) -> u32 {
        self.labels[row as usize * self.width as usize + col as usize]
    }
}

/// Split a row-major label map into one mask per distinct label, ascending by label.
pub fn decode_ground_truth(
    width: u32,
    height: u32,
    labels: &[u32],
) -> Result<Vec<(u32, SegmentMask)>, PoolError> {
    let expected = width as usize * height as usize;
    if labels.len() != expected {
        return Err(PoolError::LabelCount {
            len: labels.len(),
            expected,
        });
    }
    let mut runs: BTreeMap<u32, Vec<Run>> = BTreeMap::new();
    for r in 0..height {
        let row = &labels[r as usize * width as usize..(r as usize + 1) * width as usize];
        let mut start = 0u32;
        for c in 1..=width {
            if c == width || row[c as usize] != row[start as usize] {
                let label = row[start as usize];
                if label == UNLABELED {
                    return Err(PoolError::Unlabeled { row: r, col: start });
                }
                runs.entry(label).or_default().push(Run::new(r, start, c));
                start = c;
            }
        }
    }
    Ok(runs
        .into_iter()
        .map(|(label, runs)| (label, SegmentMask::from_canonical_unchecked(width, height, runs)))
        .collect())
}

/// The candidate segments for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPool {
    pub image: RgbImage,
    pub segments: Vec<SegmentMask>,
    pub ground_truth: Vec<GroundTruthSegmentation>,
}

impl SegmentPool {
    pub fn new(
        image: RgbImage,
        segments: Vec<SegmentMask>,
        ground_truth: Vec<GroundTruthSegmentation>,
    ) -> Result<Self, PoolError> {
        if segments.is_empty() {
            return Err(PoolError::NoSegments);
        }
        let expected = (image.width(), image.height());
        for (index, s) in segments.iter().enumerate() {
            if s.dims() != expected {
                return Err(PoolError::SegmentDims {
                    index,
                    got: s.dims(),
                    expected,
                });
            }
            if s.is_empty() {
                return Err(PoolError::EmptySegment { index });
            }
        }
        for (index, g) in ground_truth.iter().enumerate() {
            if (g.width(), g.height()) != expected {
                return Err(PoolError::GroundTruthDims {
                    index,
                    got: (g.width(), g.height()),
                    expected,
                });
            }
        }
        Ok(Self {
            image,
            segments,
            ground_truth,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}
