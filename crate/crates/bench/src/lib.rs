//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use ebsurf::chain::{simulate, AtHyper, Target};
use ebsurf::models::lda::LdaGibbs;
use ebsurf::models::synth::{synth_corpus, synth_regression};
use ebsurf::models::toy::{toy_exact_sampler, NormalHierModel};
use ebsurf::models::vs::{RegressionData, VsGibbs};
use ebsurf::{ChainTrace, HyperRect};

pub const H1: [f64; 2] = [0.0, 1.0];

pub fn toy_rect() -> HyperRect {
    HyperRect::new(vec![-1.0, 0.5], vec![1.0, 1.5]).unwrap()
}

/// Exact toy draws with a regeneration at every step.
pub fn toy_trace(n: usize) -> (NormalHierModel, ChainTrace) {
    let model = NormalHierModel::fixture();
    let trace = toy_exact_sampler(&model, &H1, n, 1).unwrap();
    (model, trace)
}

pub fn vs_kernel(rows: usize, predictors: usize) -> VsGibbs {
    let (x, y, _) = synth_regression(2, rows, predictors, 3, 3.0).unwrap();
    VsGibbs::new(Arc::new(RegressionData::new(x, y).unwrap()))
}

pub fn vs_trace(n: usize) -> ChainTrace {
    let mut chain = AtHyper { kernel: vs_kernel(100, 8), h1: vec![0.3, 20.0] };
    simulate(&mut chain, Target::Steps(n), 3).unwrap()
}

pub fn lda_kernel(docs: usize, vocab: usize, doc_length: usize) -> LdaGibbs {
    let (corpus, _) = synth_corpus(4, docs, vocab, 2, doc_length, 0.5, 1.0).unwrap();
    LdaGibbs { corpus: Arc::new(corpus), topics: 2, eps: 0.05 }
}
