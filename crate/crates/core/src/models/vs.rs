//! Bayesian variable selection with an independence Bernoulli inclusion prior
//! and Zellner's g-prior, `h = (w, g)`.
//!
//! `y = beta0 + X_gamma beta_gamma + eps`, `eps ~ N(0, sigma^2 I)`,
//! `beta_gamma ~ N(0, g sigma^2 (X_gamma' X_gamma)^-1)`, flat prior on
//! `beta0` and `1 / sigma^2` on `sigma^2`. Columns of `X` are centred.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::chain::{HyperKernel, Reference, TraceMeta};
use crate::error::{Error, Result};
use crate::numeric::{std_normal, Rng};

/// Regression data with centred predictors and cached cross products.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    ybar: f64,
}

impl RegressionData {
    /// Centres the columns of `x` and caches `X'X`, `X'y` and the centred `y'y`.
    pub fn new(mut x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let m = x.nrows();
        if m != y.len() {
            return Err(Error::InvalidArgument("x and y differ in rows".into()));
        }
        if m < 3 || x.ncols() == 0 {
            return Err(Error::InvalidArgument("need at least 3 rows and one predictor".into()));
        }
        for mut col in x.column_iter_mut() {
            let mean: f64 = col.mean();
            col.add_scalar_mut(-mean);
        }
        let ybar = y.mean();
        let yc = y.add_scalar(-ybar);
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &yc;
        let yty = yc.dot(&yc);
        if !(yty > 0.0) {
            return Err(Error::InvalidArgument("response is constant".into()));
        }
        Ok(Self { x, y, xtx, xty, yty, ybar })
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn predictors(&self) -> usize {
        self.x.ncols()
    }

    pub fn xtx(&self) -> &DMatrix<f64> {
        &self.xtx
    }

    fn sub(&self, idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let a = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.xtx[(idx[r], idx[c])]);
        let b = DVector::from_fn(idx.len(), |r, _| self.xty[idx[r]]);
        (a, b)
    }

    /// Least-squares fit on the selected columns, or `None` when they are rank deficient.
    fn fit(&self, idx: &[usize]) -> Option<SubsetFit> {
        if idx.is_empty() {
            return Some(SubsetFit { chol: None, beta_hat: DVector::zeros(0), r2: 0.0 });
        }
        let (a, b) = self.sub(idx);
        let scale = a.diagonal().max();
        let chol = Cholesky::new(a)?;
        let l = chol.l_dirty();
        let min_pivot = l.diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-10 * scale) {
            return None;
        }
        let beta_hat = chol.solve(&b);
        let r2 = (b.dot(&beta_hat) / self.yty).clamp(0.0, 1.0);
        Some(SubsetFit { chol: Some(chol), beta_hat, r2 })
    }

    /// Coefficient of determination of the selected columns.
    pub fn r_squared(&self, gamma: &[bool]) -> Option<f64> {
        self.fit(&indices(gamma)).map(|f| f.r2)
    }

    /// `log p(y | gamma, g)` up to a constant shared by all models:
    /// `(m - 1 - q_gamma)/2 log(1 + g) - (m - 1)/2 log(1 + g (1 - R^2_gamma))`.
    pub fn log_marginal(&self, gamma: &[bool], g: f64) -> Option<f64> {
        let idx = indices(gamma);
        let fit = self.fit(&idx)?;
        Some(self.log_marginal_fit(idx.len(), fit.r2, g))
    }

    fn log_marginal_fit(&self, q_gamma: usize, r2: f64, g: f64) -> f64 {
        let m1 = self.rows() as f64 - 1.0;
        0.5 * (m1 - q_gamma as f64) * g.ln_1p() - 0.5 * m1 * (g * (1.0 - r2)).ln_1p()
    }

    /// `beta' X_gamma' X_gamma beta / sigma^2`.
    pub fn scaled_quad_form(&self, state: &VsState) -> f64 {
        let idx = indices(&state.gamma);
        let mut q = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                q += state.beta_gamma[a] * self.xtx[(i, j)] * state.beta_gamma[b];
            }
        }
        q / state.sigma2
    }
}

struct SubsetFit {
    chol: Option<Cholesky<f64, Dyn>>,
    beta_hat: DVector<f64>,
    r2: f64,
}

pub fn indices(gamma: &[bool]) -> Vec<usize> {
    gamma.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
}

/// `theta = (gamma, sigma^2, beta0, beta_gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VsState {
    pub gamma: Vec<bool>,
    pub sigma2: f64,
    pub beta0: f64,
    pub beta_gamma: Vec<f64>,
}

impl VsState {
    pub fn size(&self) -> usize {
        self.gamma.iter().filter(|b| **b).count()
    }
}

fn check_h(h: &[f64]) -> Result<()> {
    if h.len() != 2 || !(h[0] > 0.0 && h[0] < 1.0) || !(h[1] > 0.0) || !h[1].is_finite() {
        return Err(Error::InvalidArgument(format!("need 0 < w < 1 and g > 0, got {h:?}")));
    }
    Ok(())
}

/// Draws `(sigma^2, beta0, beta_gamma)` from their joint conditional given `gamma`.
fn draw_continuous(data: &RegressionData, gamma: Vec<bool>, fit: &SubsetFit, g: f64, rng: &mut Rng) -> VsState {
    let m = data.rows() as f64;
    let shrink = g / (1.0 + g);
    let s = data.yty * (1.0 + g * (1.0 - fit.r2)) / (1.0 + g);
    let gamma_draw: f64 = Gamma::new(0.5 * (m - 1.0), 1.0).expect("shape positive").sample(rng);
    let sigma2 = 0.5 * s / gamma_draw;
    let beta0 = data.ybar + (sigma2 / m).sqrt() * std_normal(rng);
    let beta_gamma = match &fit.chol {
        None => Vec::new(),
        Some(chol) => {
            let z = DVector::from_fn(fit.beta_hat.len(), |_, _| std_normal(rng));
            let u = chol.l_dirty().transpose().solve_upper_triangular(&z).expect("nonsingular factor");
            let sd = (shrink * sigma2).sqrt();
            (0..z.len()).map(|i| shrink * fit.beta_hat[i] + sd * u[i]).collect()
        }
    };
    VsState { gamma, sigma2, beta0, beta_gamma }
}

/// One sweep: each `gamma_j` from its collapsed conditional, then the
/// continuous parameters exactly. Returns the number of rank-deficient
/// proposals that were refused.
pub fn vs_gibbs_step(state: &mut VsState, data: &RegressionData, h: &[f64], rng: &mut Rng) -> Result<usize> {
    check_h(h)?;
    let (w, g) = (h[0], h[1]);
    let prior_log_odds = (w / (1.0 - w)).ln();
    let mut gamma = state.gamma.clone();
    let mut refused = 0;
    for j in 0..gamma.len() {
        gamma[j] = false;
        let off = data.fit(&indices(&gamma)).map(|f| data.log_marginal_fit(indices(&gamma).len(), f.r2, g));
        gamma[j] = true;
        let on = data.fit(&indices(&gamma)).map(|f| data.log_marginal_fit(indices(&gamma).len(), f.r2, g));
        gamma[j] = match (off, on) {
            (Some(off), Some(on)) => {
                let log_odds = prior_log_odds + on - off;
                rng.random::<f64>() < 1.0 / (1.0 + (-log_odds).exp())
            }
            (Some(_), None) => {
                refused += 1;
                false
            }
            (None, Some(_)) => true,
            (None, None) => return Err(Error::InvalidArgument("design is rank deficient".into())),
        };
    }
    let fit = data.fit(&indices(&gamma)).ok_or_else(|| Error::InvalidArgument("design is rank deficient".into()))?;
    *state = draw_continuous(data, gamma, &fit, g, rng);
    Ok(refused)
}

/// `d nu_{h1} / d nu_{h2}` at a state, with the gradient of its log in `h1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnDerivative {
    pub value: f64,
    pub log: f64,
    /// `(d/dw, d/dg)` of the log, at `h1`.
    pub grad: [f64; 2],
}

/// Radon-Nikodym derivative of the `(gamma, beta_gamma)` prior at `h1` with respect to `h2`.
pub fn vs_rn_derivative(state: &VsState, data: &RegressionData, h1: &[f64], h2: &[f64]) -> Result<RnDerivative> {
    check_h(h1)?;
    check_h(h2)?;
    if !(state.sigma2 > 0.0) {
        return Err(Error::InvalidArgument("sigma2 must be positive".into()));
    }
    let q = state.gamma.len() as f64;
    let qg = state.size() as f64;
    let quad = data.scaled_quad_form(state);
    let (w1, g1, w2, g2) = (h1[0], h1[1], h2[0], h2[1]);
    let log = qg * (w1 / w2).ln() + (q - qg) * ((1.0 - w1) / (1.0 - w2)).ln()
        - 0.5 * qg * (g1 / g2).ln()
        - 0.5 * quad * (1.0 / g1 - 1.0 / g2);
    let grad = [qg / w1 - (q - qg) / (1.0 - w1), -0.5 * qg / g1 + 0.5 * quad / (g1 * g1)];
    Ok(RnDerivative { value: log.exp(), log, grad })
}

/// Gibbs sampler for the variable-selection posterior at any `(w, g)`.
#[derive(Debug, Clone)]
pub struct VsGibbs {
    pub data: Arc<RegressionData>,
    /// Rank-deficient inclusion proposals refused so far.
    pub refused: usize,
}

impl VsGibbs {
    pub fn new(data: Arc<RegressionData>) -> Self {
        Self { data, refused: 0 }
    }

    pub fn functional_names(q: usize) -> Vec<String> {
        let mut names: Vec<String> = (1..=q).map(|j| format!("gamma{j}")).collect();
        names.push("size".into());
        names
    }
}

impl HyperKernel for VsGibbs {
    type State = VsState;

    fn meta(&self) -> TraceMeta {
        TraceMeta {
            seed: 0,
            kernel: "vs-gibbs".into(),
            family: "vs-bernoulli-zellner".into(),
            family_dims: BTreeMap::from([("predictors".to_string(), self.data.predictors())]),
            reference: Reference::Single { h1: vec![0.5, 1.0] },
        }
    }
    fn stat_dim(&self) -> usize {
        3
    }
    fn functionals(&self) -> Vec<String> {
        Self::functional_names(self.data.predictors())
    }
    fn initial(&mut self, h: &[f64], rng: &mut Rng) -> VsState {
        let gamma = vec![false; self.data.predictors()];
        let fit = self.data.fit(&[]).expect("empty model");
        draw_continuous(&self.data, gamma, &fit, h[1], rng)
    }
    fn step(&mut self, state: &mut VsState, h: &[f64], rng: &mut Rng) {
        self.refused += vs_gibbs_step(state, &self.data, h, rng).expect("valid (w, g) and design");
    }
    fn observe(&self, state: &VsState, stat: &mut [f64], values: &mut [f64]) {
        stat[0] = state.size() as f64;
        stat[1] = self.data.scaled_quad_form(state);
        stat[2] = 1.0;
        for (v, &b) in values.iter_mut().zip(&state.gamma) {
            *v = if b { 1.0 } else { 0.0 };
        }
        values[state.gamma.len()] = state.size() as f64;
    }
}
