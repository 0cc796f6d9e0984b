use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the chain's invariant distribution is, relative to the prior family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Reference {
    /// Posterior under the single prior `nu_{h1}`.
    Single { h1: Vec<f64> },
    /// Serial-tempering mixture over `anchors` with pseudo-prior weights `1 / zeta_j`.
    Mixture { anchors: Vec<Vec<f64>>, log_zeta: Vec<f64> },
}

impl Reference {
    pub fn dim(&self) -> usize {
        match self {
            Reference::Single { h1 } => h1.len(),
            Reference::Mixture { anchors, .. } => anchors.first().map_or(0, Vec::len),
        }
    }
}

/// Provenance of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub seed: u64,
    pub kernel: String,
    pub family: String,
    pub family_dims: BTreeMap<String, usize>,
    pub reference: Reference,
}

/// Per-draw sufficient statistics, functional values and regeneration flags.
///
/// `regen[i]` is true when draw `i` starts a tour. Full states are never
/// stored; every estimator depends on a draw only through `T` and `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub meta: TraceMeta,
    stat_dim: usize,
    functionals: Vec<String>,
    stats: Vec<f64>,
    values: Vec<f64>,
    regen: Vec<bool>,
    labels: Option<Vec<u32>>,
    closed: bool,
}

impl ChainTrace {
    pub fn new(meta: TraceMeta, stat_dim: usize, functionals: Vec<String>) -> Self {
        Self {
            meta,
            stat_dim,
            functionals,
            stats: Vec::new(),
            values: Vec::new(),
            regen: Vec::new(),
            labels: None,
            closed: false,
        }
    }

    pub fn with_capacity(mut self, n: usize) -> Self {
        self.stats.reserve(n * self.stat_dim);
        self.values.reserve(n * self.functionals.len());
        self.regen.reserve(n);
        self
    }

    pub fn push(&mut self, stat: &[f64], values: &[f64], regen: bool) {
        debug_assert_eq!(stat.len(), self.stat_dim);
        debug_assert_eq!(values.len(), self.functionals.len());
        self.stats.extend_from_slice(stat);
        self.values.extend_from_slice(values);
        self.regen.push(regen);
    }

    pub fn push_labelled(&mut self, stat: &[f64], values: &[f64], regen: bool, label: u32) {
        self.push(stat, values, regen);
        self.labels.get_or_insert_with(Vec::new).push(label);
    }

    pub fn len(&self) -> usize {
        self.regen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regen.is_empty()
    }

    pub fn stat_dim(&self) -> usize {
        self.stat_dim
    }

    pub fn functionals(&self) -> &[String] {
        &self.functionals
    }

    pub fn functional_index(&self, name: &str) -> Result<usize> {
        self.functionals.iter().position(|f| f == name).ok_or_else(|| Error::UnknownFunctional(name.to_string()))
    }

    #[inline]
    pub fn stat(&self, i: usize) -> &[f64] {
        &self.stats[i * self.stat_dim..(i + 1) * self.stat_dim]
    }

    #[inline]
    pub fn value(&self, i: usize, functional: usize) -> f64 {
        self.values[i * self.functionals.len() + functional]
    }

    /// All values of one functional.
    pub fn column(&self, functional: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, functional)).collect()
    }

    pub fn regen_flags(&self) -> &[bool] {
        &self.regen
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    /// Whether the transition out of the last draw regenerated, so the
    /// final tour is complete.
    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn set_closed(&mut self, closed: bool) {
        self.closed = closed;
    }

    /// Whether any draw after the first is flagged as a regeneration.
    pub fn has_regenerations(&self) -> bool {
        self.regen.iter().skip(1).any(|r| *r)
    }

    /// Copy of the draws in `range`; its closure follows the draw after it.
    pub fn slice(&self, range: Range<usize>) -> ChainTrace {
        let p = self.stat_dim;
        let f = self.functionals.len();
        ChainTrace {
            meta: self.meta.clone(),
            stat_dim: p,
            functionals: self.functionals.clone(),
            stats: self.stats[range.start * p..range.end * p].to_vec(),
            values: self.values[range.start * f..range.end * f].to_vec(),
            regen: self.regen[range.clone()].to_vec(),
            labels: self.labels.as_ref().map(|l| l[range.clone()].to_vec()),
            closed: if range.end == self.len() { self.closed } else { self.regen[range.end] },
        }
    }
}
