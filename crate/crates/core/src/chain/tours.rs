use std::ops::Range;

use super::ChainTrace;
use crate::error::{Error, Result};

/// Tour boundaries, 0-based: tour `r` covers `starts[r]..starts[r + 1]`.
///
/// The last boundary is the number of draws actually used; a trailing
/// partial tour is excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TourIndex {
    starts: Vec<usize>,
}

impl TourIndex {
    pub fn from_boundaries(starts: Vec<usize>) -> Result<Self> {
        if starts.len() < 2 {
            return Err(Error::TooFewTours { needed: 1, found: 0 });
        }
        if starts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("tour boundaries must increase".into()));
        }
        Ok(Self { starts })
    }

    /// Number of complete tours.
    pub fn count(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.starts
    }

    pub fn tour(&self, r: usize) -> Range<usize> {
        self.starts[r]..self.starts[r + 1]
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Draws covered by complete tours.
    pub fn used(&self) -> Range<usize> {
        self.starts[0]..*self.starts.last().unwrap()
    }

    pub fn used_len(&self) -> usize {
        self.used().len()
    }

    /// Mean tour length, the plug-in for `E N_1`.
    pub fn mean_length(&self) -> f64 {
        self.used_len() as f64 / self.count() as f64
    }
}

/// Splits a trace at its regeneration flags.
///
/// A trace that does not end at a regeneration loses its final partial tour.
pub fn segment_tours(trace: &ChainTrace) -> Result<TourIndex> {
    let flags = trace.regen_flags();
    let mut starts: Vec<usize> = flags.iter().enumerate().filter_map(|(i, &d)| d.then_some(i)).collect();
    let n = trace.len();
    if trace.closed() {
        starts.push(n);
    }
    if starts.len() < 2 {
        return Err(Error::TooFewTours { needed: 1, found: 0 });
    }
    TourIndex::from_boundaries(starts)
}
