//! Synthetic regression data and corpora with known generating parameters.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::lda::Corpus;
use super::vs::RegressionData;
use crate::error::{Error, Result};
use crate::numeric::{std_normal, stream_rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTruth {
    pub seed: u64,
    pub rows: usize,
    pub predictors: usize,
    pub support: Vec<usize>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub noise_sd: f64,
    pub snr: f64,
}

/// Standardised design and response `y = X beta + eps` with `sparsity` nonzero
/// coefficients, noise scaled so that `var(X beta) / var(eps) = snr`.
pub fn synth_regression(
    seed: u64,
    m: usize,
    q: usize,
    sparsity: usize,
    snr: f64,
) -> Result<(DMatrix<f64>, DVector<f64>, RegressionTruth)> {
    if m < 3 || q == 0 || sparsity > q || !(snr > 0.0) {
        return Err(Error::InvalidArgument("need m >= 3, q >= 1, sparsity <= q, snr > 0".into()));
    }
    let mut rng = stream_rng(seed, "synth-regression");
    let mut x = DMatrix::from_fn(m, q, |_, _| std_normal(&mut rng));
    for mut col in x.column_iter_mut() {
        let mean: f64 = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / m as f64).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    let mut order: Vec<usize> = (0..q).collect();
    order.shuffle(&mut rng);
    let mut support: Vec<usize> = order[..sparsity].to_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; q];
    for &j in &support {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        beta[j] = sign * (0.5 + rng.random::<f64>());
    }
    let signal = &x * DVector::from_column_slice(&beta);
    let var_signal = signal.norm_squared() / m as f64;
    let noise_sd = if var_signal > 0.0 { (var_signal / snr).sqrt() } else { 1.0 };
    let intercept = 1.0;
    let y = DVector::from_fn(m, |i, _| intercept + signal[i] + noise_sd * std_normal(&mut rng));
    let truth = RegressionTruth { seed, rows: m, predictors: q, support, beta, intercept, noise_sd, snr };
    Ok((x, y, truth))
}

/// Ordinary least-squares R^2 of `y` on the columns of `x` with an intercept.
pub fn r_squared(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let data = RegressionData::new(x.clone(), y.clone())?;
    data.r_squared(&vec![true; x.ncols()]).ok_or_else(|| Error::InvalidArgument("design is rank deficient".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusTruth {
    pub seed: u64,
    pub docs: usize,
    pub vocab: usize,
    pub topics: usize,
    pub doc_length: usize,
    pub eta: f64,
    pub alpha: f64,
    pub beta: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
}

fn dirichlet(shape: f64, len: usize, rng: &mut Rng) -> Vec<f64> {
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    let mut v: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v[rng.random_range(0..len)] = 1.0;
    }
    v
}

fn categorical(p: &[f64], rng: &mut Rng) -> usize {
    let u = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Documents of `n_d` tokens drawn from the LDA generative model at `(eta, alpha)`.
pub fn synth_corpus(
    seed: u64,
    d: usize,
    v: usize,
    k: usize,
    n_d: usize,
    eta: f64,
    alpha: f64,
) -> Result<(Corpus, CorpusTruth)> {
    if d == 0 || v == 0 || k == 0 || n_d == 0 || !(eta > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidArgument("corpus dimensions and hyperparameters must be positive".into()));
    }
    let mut rng = stream_rng(seed, "synth-corpus");
    let beta: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(eta, v, &mut rng)).collect();
    let theta: Vec<Vec<f64>> = (0..d).map(|_| dirichlet(alpha, k, &mut rng)).collect();
    let docs = theta
        .iter()
        .map(|th| (0..n_d).map(|_| categorical(&beta[categorical(th, &mut rng)], &mut rng) as u32).collect())
        .collect();
    let truth = CorpusTruth { seed, docs: d, vocab: v, topics: k, doc_length: n_d, eta, alpha, beta, theta };
    Ok((Corpus::new(docs, v)?, truth))
}

/// CSV with a `y` column followed by `x1..xq`. Readers skip `#` comment lines.
pub fn write_regression_csv<W: Write>(x: &DMatrix<f64>, y: &DVector<f64>, out: &mut W) -> Result<()> {
    let header: Vec<String> =
        std::iter::once("y".to_string()).chain((1..=x.ncols()).map(|j| format!("x{j}"))).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..x.nrows() {
        let mut row = format!("{:.16e}", y[i]);
        for j in 0..x.ncols() {
            row.push_str(&format!(",{:.16e}", x[(i, j)]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn read_regression_csv<R: BufRead>(input: R) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header = false;
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            header = true;
            continue;
        }
        let vals = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| Error::Format(format!("line {}: bad number `{c}`", no + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != vals.len() {
                return Err(Error::Format(format!("line {}: wrong number of columns", no + 1)));
            }
        }
        rows.push(vals);
    }
    if rows.is_empty() || rows[0].len() < 2 {
        return Err(Error::Format("regression file needs y and at least one predictor".into()));
    }
    let (m, q) = (rows.len(), rows[0].len() - 1);
    let y = DVector::from_fn(m, |i, _| rows[i][0]);
    let x = DMatrix::from_fn(m, q, |i, j| rows[i][j + 1]);
    Ok((x, y))
}

/// One document per line, whitespace-separated word ids.
pub fn write_corpus<W: Write>(corpus: &Corpus, out: &mut W) -> Result<()> {
    for doc in &corpus.docs {
        let words: Vec<String> = doc.iter().map(u32::to_string).collect();
        writeln!(out, "{}", words.join(" "))?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R, vocab: usize) -> Result<Corpus> {
    let mut docs = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().starts_with('#') {
            continue;
        }
        let doc = line
            .split_whitespace()
            .map(|w| w.parse::<u32>().map_err(|_| Error::Format(format!("line {}: bad word id `{w}`", no + 1))))
            .collect::<Result<Vec<_>>>()?;
        docs.push(doc);
    }
    Corpus::new(docs, vocab)
}

/// Writes `value` as pretty JSON to `path`.
pub fn write_sidecar<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_sidecar<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
}
