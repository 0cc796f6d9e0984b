//! Latent Dirichlet allocation with an augmented collapsed Gibbs sampler, `h = (eta, alpha)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::chain::{HyperKernel, Reference, TraceMeta};
use crate::error::{Error, Result};
use crate::numeric::{logsumexp, Rng};

/// Floor applied to simplex entries before taking logs.
pub const SIMPLEX_FLOOR: f64 = 1e-300;

/// Documents as sequences of word ids in `0..vocab`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub docs: Vec<Vec<u32>>,
    pub vocab: usize,
}

impl Corpus {
    pub fn new(docs: Vec<Vec<u32>>, vocab: usize) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("corpus has no documents".into()));
        }
        if let Some(d) = docs.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("document {d} is empty")));
        }
        if docs.iter().flatten().any(|&w| w as usize >= vocab) {
            return Err(Error::InvalidArgument("word id outside the vocabulary".into()));
        }
        Ok(Self { docs, vocab })
    }

    pub fn tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }
}

/// `psi = (beta, theta, z)` with the count tables the collapsed sweep needs.
///
/// `beta` and `theta` are held as logs; rows are on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaState {
    pub topics: usize,
    pub z: Vec<Vec<u32>>,
    /// `K x V`, row major.
    pub log_beta: Vec<f64>,
    /// `D x K`, row major.
    pub log_theta: Vec<f64>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
}

impl LdaState {
    pub fn beta(&self, t: usize, v: usize) -> f64 {
        let vocab = self.log_beta.len() / self.topics;
        self.log_beta[t * vocab + v].exp()
    }

    pub fn theta_row(&self, d: usize) -> Vec<f64> {
        self.log_theta[d * self.topics..(d + 1) * self.topics].iter().map(|l| l.exp()).collect()
    }

    pub fn doc_topic_counts(&self, d: usize) -> &[u32] {
        &self.doc_topic[d * self.topics..(d + 1) * self.topics]
    }

    pub fn topic_word_counts(&self) -> &[u32] {
        &self.topic_word
    }
}

/// Log of a Gamma(shape, 1) draw, accurate for small shapes.
fn log_gamma_draw(shape: f64, rng: &mut Rng) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        g.ln() + rng.random::<f64>().ln() / shape
    }
}

/// Fills `out` with the logs of a Dirichlet draw.
fn log_dirichlet(shapes: impl Iterator<Item = f64>, out: &mut [f64], rng: &mut Rng) {
    for (o, a) in out.iter_mut().zip(shapes) {
        *o = log_gamma_draw(a, rng);
    }
    let norm = logsumexp(out.iter().copied());
    for o in out.iter_mut() {
        *o -= norm;
    }
}

fn augment(state: &mut LdaState, corpus: &Corpus, eta: f64, alpha: f64, rng: &mut Rng) {
    let (k, v) = (state.topics, corpus.vocab);
    for t in 0..k {
        let counts = &state.topic_word[t * v..(t + 1) * v];
        log_dirichlet(counts.iter().map(|&c| eta + c as f64), &mut state.log_beta[t * v..(t + 1) * v], rng);
    }
    for d in 0..corpus.docs.len() {
        let counts = &state.doc_topic[d * k..(d + 1) * k];
        log_dirichlet(counts.iter().map(|&c| alpha + c as f64), &mut state.log_theta[d * k..(d + 1) * k], rng);
    }
}

fn check_h(h: &[f64]) -> Result<()> {
    if h.len() != 2 || !(h[0] > 0.0 && h[1] > 0.0) || !h[0].is_finite() || !h[1].is_finite() {
        return Err(Error::InvalidArgument(format!("need eta > 0 and alpha > 0, got {h:?}")));
    }
    Ok(())
}

/// Uniformly random topic assignments followed by an augmentation draw.
pub fn lda_initial(corpus: &Corpus, topics: usize, h: &[f64], rng: &mut Rng) -> Result<LdaState> {
    check_h(h)?;
    if topics == 0 {
        return Err(Error::InvalidArgument("need at least one topic".into()));
    }
    let (k, v, d) = (topics, corpus.vocab, corpus.docs.len());
    let mut state = LdaState {
        topics: k,
        z: Vec::with_capacity(d),
        log_beta: vec![0.0; k * v],
        log_theta: vec![0.0; d * k],
        doc_topic: vec![0; d * k],
        topic_word: vec![0; k * v],
        topic_total: vec![0; k],
    };
    for (di, doc) in corpus.docs.iter().enumerate() {
        let zs: Vec<u32> = doc.iter().map(|_| rng.random_range(0..k as u32)).collect();
        for (&w, &t) in doc.iter().zip(&zs) {
            state.doc_topic[di * k + t as usize] += 1;
            state.topic_word[t as usize * v + w as usize] += 1;
            state.topic_total[t as usize] += 1;
        }
        state.z.push(zs);
    }
    augment(&mut state, corpus, h[0], h[1], rng);
    Ok(state)
}

/// A collapsed Gibbs sweep over every token, then fresh `beta` and `theta`
/// from their Dirichlet conditionals.
pub fn lda_gibbs_step(state: &mut LdaState, corpus: &Corpus, h: &[f64], rng: &mut Rng) -> Result<()> {
    check_h(h)?;
    let (eta, alpha) = (h[0], h[1]);
    let (k, v) = (state.topics, corpus.vocab);
    let v_eta = v as f64 * eta;
    let mut p = vec![0.0; k];
    for (d, doc) in corpus.docs.iter().enumerate() {
        for (i, &w) in doc.iter().enumerate() {
            let w = w as usize;
            let old = state.z[d][i] as usize;
            state.doc_topic[d * k + old] -= 1;
            state.topic_word[old * v + w] -= 1;
            state.topic_total[old] -= 1;
            let mut total = 0.0;
            for (t, pt) in p.iter_mut().enumerate() {
                total += (state.doc_topic[d * k + t] as f64 + alpha) * (state.topic_word[t * v + w] as f64 + eta)
                    / (state.topic_total[t] as f64 + v_eta);
                *pt = total;
            }
            let u = rng.random::<f64>() * total;
            let new = p.iter().position(|&c| u < c).unwrap_or(k - 1);
            state.z[d][i] = new as u32;
            state.doc_topic[d * k + new] += 1;
            state.topic_word[new * v + w] += 1;
            state.topic_total[new] += 1;
        }
    }
    augment(state, corpus, eta, alpha, rng);
    Ok(())
}

/// `T = (sum_t sum_v log beta_tv, sum_d sum_k log theta_dk)`, entries floored at `1e-300`.
pub fn lda_suffstats(state: &LdaState) -> [f64; 2] {
    let floor = SIMPLEX_FLOOR.ln();
    [state.log_beta.iter().map(|l| l.max(floor)).sum(), state.log_theta.iter().map(|l| l.max(floor)).sum()]
}

/// Indicator that documents `i` and `j` have mixtures within `eps` in Euclidean distance.
pub fn lda_closeness_functional(state: &LdaState, i: usize, j: usize, eps: f64) -> f64 {
    let (a, b) = (state.theta_row(i), state.theta_row(j));
    let dist = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    if dist <= eps {
        1.0
    } else {
        0.0
    }
}

/// Augmented collapsed Gibbs sampler as a hyperparameter-indexed kernel.
///
/// Records `close` (documents 0 and 1 within `eps`) and `theta00`.
#[derive(Debug, Clone)]
pub struct LdaGibbs {
    pub corpus: Arc<Corpus>,
    pub topics: usize,
    pub eps: f64,
}

impl HyperKernel for LdaGibbs {
    type State = LdaState;

    fn meta(&self) -> TraceMeta {
        TraceMeta {
            seed: 0,
            kernel: "lda-gibbs".into(),
            family: "lda-dirichlet".into(),
            family_dims: BTreeMap::from([
                ("docs".to_string(), self.corpus.docs.len()),
                ("topics".to_string(), self.topics),
                ("vocab".to_string(), self.corpus.vocab),
            ]),
            reference: Reference::Single { h1: vec![1.0, 1.0] },
        }
    }
    fn stat_dim(&self) -> usize {
        2
    }
    fn functionals(&self) -> Vec<String> {
        vec!["close".into(), "theta00".into()]
    }
    fn initial(&mut self, h: &[f64], rng: &mut Rng) -> LdaState {
        lda_initial(&self.corpus, self.topics, h, rng).expect("valid corpus and hyperparameters")
    }
    fn step(&mut self, state: &mut LdaState, h: &[f64], rng: &mut Rng) {
        lda_gibbs_step(state, &self.corpus, h, rng).expect("valid hyperparameters")
    }
    fn observe(&self, state: &LdaState, stat: &mut [f64], values: &mut [f64]) {
        stat.copy_from_slice(&lda_suffstats(state));
        let j = if self.corpus.docs.len() > 1 { 1 } else { 0 };
        values[0] = lda_closeness_functional(state, 0, j, self.eps);
        values[1] = state.log_theta[0].exp();
    }
}
