//! Helpers shared by the integration tests.
#![allow(dead_code)]

use ebsurf::models::synth::synth_regression;
use ebsurf::models::vs::{indices, RegressionData, VsState};
use ebsurf::numeric::{logsumexp, stream_rng};
use ebsurf::PriorFamily;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

pub fn tiny_regression() -> RegressionData {
    let x1 = [-1.2, -0.7, -0.3, 0.1, 0.4, 0.8, 1.1, -0.2];
    let x2 = [0.5, -0.9, 0.3, 1.2, -0.4, 0.2, -1.1, 0.6];
    let y = [-0.6, -1.0, 0.2, 0.3, 0.1, 1.3, 0.5, -0.4];
    let x = DMatrix::from_fn(8, 2, |i, j| if j == 0 { x1[i] } else { x2[i] });
    RegressionData::new(x, DVector::from_column_slice(&y)).unwrap()
}

pub fn log_trapezoid(logs: &[f64], step: f64) -> f64 {
    let n = logs.len();
    logsumexp(logs.iter().enumerate().map(|(i, l)| if i == 0 || i == n - 1 { l - 2f64.ln() } else { *l })) + step.ln()
}

/// `log p(y | gamma, g)` by quadrature over `beta0` and `log sigma^2`, with
/// `beta_gamma` integrated through the generic normal density of `y`.
pub fn quadrature_log_marginal(data: &RegressionData, gamma: &[bool], g: f64) -> f64 {
    let m = data.rows();
    let idx = indices(gamma);
    let mut s = DMatrix::<f64>::identity(m, m);
    if !idx.is_empty() {
        let xg = DMatrix::from_fn(m, idx.len(), |i, j| data.x[(i, idx[j])]);
        let inv = (xg.transpose() * &xg).try_inverse().unwrap();
        s += &xg * inv * xg.transpose() * g;
    }
    let chol = s.clone().cholesky().unwrap();
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let s_inv = chol.inverse();
    let ybar = data.y.mean();
    let quad = |b0: f64| {
        let r = data.y.add_scalar(-b0);
        (r.transpose() * &s_inv * &r)[(0, 0)]
    };
    let (u_lo, u_hi, nu) = (-12.0, 6.0, 3601);
    let du = (u_hi - u_lo) / (nu - 1) as f64;
    let outer: Vec<f64> = (0..nu)
        .map(|a| {
            let u = u_lo + a as f64 * du;
            let sigma2 = u.exp();
            let half = 12.0 * (sigma2 / m as f64).sqrt();
            let nb = 601;
            let db = 2.0 * half / (nb - 1) as f64;
            let inner: Vec<f64> = (0..nb)
                .map(|b| {
                    let b0 = ybar - half + b as f64 * db;
                    -0.5 * m as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
                        - 0.5 * logdet
                        - quad(b0) / (2.0 * sigma2)
                })
                .collect();
            // prior 1/sigma^2 times the Jacobian sigma^2 of u = log sigma^2
            log_trapezoid(&inner, db)
        })
        .collect();
    log_trapezoid(&outer, du)
}

pub const MODELS: [[bool; 2]; 4] = [[false, false], [true, false], [false, true], [true, true]];

/// `log p(gamma, beta_gamma | sigma^2; w, g)` coded directly from the normal density.
pub fn log_prior(data: &RegressionData, state: &VsState, h: &[f64]) -> f64 {
    let q = state.gamma.len() as f64;
    let idx = indices(&state.gamma);
    let k = idx.len();
    let mut out = k as f64 * h[0].ln() + (q - k as f64) * (1.0 - h[0]).ln();
    if k > 0 {
        let xtx = DMatrix::from_fn(k, k, |a, b| data.xtx()[(idx[a], idx[b])]);
        let cov = xtx.try_inverse().unwrap() * (h[1] * state.sigma2);
        let chol = cov.clone().cholesky().unwrap();
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let b = DVector::from_column_slice(&state.beta_gamma);
        let qf = (b.transpose() * cov.try_inverse().unwrap() * &b)[(0, 0)];
        out += -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + qf);
    }
    out
}

pub fn random_state(data: &RegressionData, seed: u64) -> VsState {
    let mut rng = stream_rng(seed, "vs-state");
    let gamma: Vec<bool> = (0..data.predictors()).map(|_| rng.random::<bool>()).collect();
    let k = gamma.iter().filter(|b| **b).count();
    VsState {
        gamma,
        sigma2: rng.random_range(0.1..5.0),
        beta0: rng.random_range(-1.0..1.0),
        beta_gamma: (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
    }
}

pub fn four_predictor_data() -> RegressionData {
    let (x, y, _) = synth_regression(17, 20, 4, 2, 2.0).unwrap();
    RegressionData::new(x, y).unwrap()
}

/// Central differences with one Richardson step; row `i`, column `j` holds `d f_i / d h_j`.
pub fn richardson(h: &[f64], step: f64, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut cols = Vec::new();
    for j in 0..h.len() {
        let central = |s: f64| -> Vec<f64> {
            let mut x = h.to_vec();
            x[j] = h[j] + s;
            let up = f(&x);
            x[j] = h[j] - s;
            let down = f(&x);
            up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * s)).collect()
        };
        let s = step * (1.0 + h[j].abs());
        let d1 = central(s);
        let d2 = central(s / 2.0);
        cols.push(DVector::from_iterator(d1.len(), d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0)));
    }
    DMatrix::from_columns(&cols)
}

/// Norm of the difference relative to the norm of `b`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

/// Sufficient statistic of the Dirichlet family for `k` topics over `v` words and `d` documents,
/// with every simplex drawn from a symmetric Dirichlet of the given shape.
pub fn dirichlet_stat(k: usize, v: usize, d: usize, shape: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, "dirichlet-stat");
    let gamma = Gamma::new(shape, 1.0).unwrap();
    let mut block = |len: usize, rows: usize| -> f64 {
        (0..rows)
            .map(|_| {
                let g: Vec<f64> = (0..len).map(|_| gamma.sample(&mut rng).max(1e-300)).collect();
                let s: f64 = g.iter().sum();
                g.iter().map(|x| (x / s).ln()).sum::<f64>()
            })
            .sum()
    };
    vec![block(v, k), block(k, d)]
}

/// `nu_h(t) = exp(h t)`: the two-corner bound is attained up to the smaller corner term.
#[derive(Debug)]
pub struct Flat;

impl PriorFamily for Flat {
    fn name(&self) -> &str {
        "flat"
    }
    fn dim(&self) -> usize {
        1
    }
    fn stat_dim(&self) -> usize {
        1
    }
    fn validate(&self, _h: &[f64]) -> ebsurf::Result<()> {
        Ok(())
    }
    fn canonical(&self, h: &[f64]) -> Vec<f64> {
        h.to_vec()
    }
    fn canonical_jacobian(&self, _h: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }
    fn canonical_hessians(&self, _h: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(1, 1)]
    }
    fn log_normalizer_canonical(&self, _w: &[f64]) -> f64 {
        0.0
    }
    fn log_normalizer_canonical_grad(&self, _w: &[f64]) -> DVector<f64> {
        DVector::zeros(1)
    }
    fn log_normalizer_canonical_hess(&self, _w: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }
}
