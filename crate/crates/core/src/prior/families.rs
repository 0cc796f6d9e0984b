use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::PriorFamily;
use crate::error::{Error, Result};
use crate::numeric::{digamma, ln_gamma, trigamma};

/// Names accepted by [`build_family`].
pub const FAMILY_NAMES: [&str; 3] = ["normal-hier", "vs-bernoulli-zellner", "lda-dirichlet"];

/// Builds a registered family from its name and integer dimensions.
///
/// * `normal-hier` needs `groups`
/// * `vs-bernoulli-zellner` needs `predictors`
/// * `lda-dirichlet` needs `topics`, `vocab`, `docs`
pub fn build_family(name: &str, dims: &BTreeMap<String, usize>) -> Result<Arc<dyn PriorFamily>> {
    let get = |key: &str| {
        dims.get(key).copied().ok_or_else(|| Error::InvalidArgument(format!("family `{name}` needs `{key}`")))
    };
    match name {
        "normal-hier" => Ok(Arc::new(NormalHier::new(get("groups")?))),
        "vs-bernoulli-zellner" => Ok(Arc::new(VsZellner::new(get("predictors")?))),
        "lda-dirichlet" => Ok(Arc::new(DirichletLda::new(get("topics")?, get("vocab")?, get("docs")?))),
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

/// `theta_j ~ N(mu, tau2)` independently for `j = 1..groups`, with `h = (mu, tau2)`.
///
/// Sufficient statistic `T = (sum theta_j, sum theta_j^2)`, canonical
/// coordinates `(mu / tau2, -1 / (2 tau2))`.
#[derive(Debug, Clone)]
pub struct NormalHier {
    groups: usize,
}

impl NormalHier {
    pub fn new(groups: usize) -> Self {
        Self { groups }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }
}

impl PriorFamily for NormalHier {
    fn name(&self) -> &str {
        "normal-hier"
    }

    fn dim(&self) -> usize {
        2
    }

    fn stat_dim(&self) -> usize {
        2
    }

    fn validate(&self, h: &[f64]) -> Result<()> {
        if h.len() != 2 || !h[0].is_finite() || !(h[1] > 0.0) || !h[1].is_finite() {
            return Err(Error::InvalidArgument(format!("normal-hier needs (mu, tau2 > 0), got {h:?}")));
        }
        Ok(())
    }

    fn canonical(&self, h: &[f64]) -> Vec<f64> {
        vec![h[0] / h[1], -0.5 / h[1]]
    }

    fn canonical_jacobian(&self, h: &[f64]) -> DMatrix<f64> {
        let (mu, t2) = (h[0], h[1]);
        DMatrix::from_row_slice(2, 2, &[1.0 / t2, -mu / (t2 * t2), 0.0, 0.5 / (t2 * t2)])
    }

    fn canonical_hessians(&self, h: &[f64]) -> Vec<DMatrix<f64>> {
        let (mu, t2) = (h[0], h[1]);
        let t4 = t2 * t2;
        let t6 = t4 * t2;
        vec![
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0 / t4, -1.0 / t4, 2.0 * mu / t6]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0 / t6]),
        ]
    }

    fn log_normalizer_canonical(&self, w: &[f64]) -> f64 {
        let j = self.groups as f64;
        j * (-w[0] * w[0] / (4.0 * w[1]) - 0.5 * (-2.0 * w[1]).ln())
    }

    fn log_normalizer_canonical_grad(&self, w: &[f64]) -> DVector<f64> {
        let j = self.groups as f64;
        DVector::from_vec(vec![-j * w[0] / (2.0 * w[1]), j * (w[0] * w[0] / (4.0 * w[1] * w[1]) - 0.5 / w[1])])
    }

    fn log_normalizer_canonical_hess(&self, w: &[f64]) -> DMatrix<f64> {
        let j = self.groups as f64;
        let (a, b) = (w[0], w[1]);
        let off = j * a / (2.0 * b * b);
        DMatrix::from_row_slice(2, 2, &[-j / (2.0 * b), off, off, j * (-a * a / (2.0 * b * b * b) + 0.5 / (b * b))])
    }

    fn canonical_admissible(&self, w: &[f64]) -> bool {
        w[1] < 0.0
    }
}

/// Symmetric Dirichlet priors of latent Dirichlet allocation, `h = (eta, alpha)`.
///
/// Topics `beta_t ~ Dir_V(eta)` for `t = 1..K` and document mixtures
/// `theta_d ~ Dir_K(alpha)` for `d = 1..D`. The statistic is
/// `T = (sum log beta_tv, sum log theta_dk)`; the topic indicators do not
/// involve `h` and drop out of every ratio.
#[derive(Debug, Clone)]
pub struct DirichletLda {
    topics: usize,
    vocab: usize,
    docs: usize,
}

impl DirichletLda {
    pub fn new(topics: usize, vocab: usize, docs: usize) -> Self {
        Self { topics, vocab, docs }
    }
}

impl PriorFamily for DirichletLda {
    fn name(&self) -> &str {
        "lda-dirichlet"
    }

    fn dim(&self) -> usize {
        2
    }

    fn stat_dim(&self) -> usize {
        2
    }

    fn validate(&self, h: &[f64]) -> Result<()> {
        if h.len() != 2 || !(h[0] > 0.0 && h[1] > 0.0) || !h[0].is_finite() || !h[1].is_finite() {
            return Err(Error::InvalidArgument(format!("lda-dirichlet needs (eta > 0, alpha > 0), got {h:?}")));
        }
        Ok(())
    }

    fn canonical(&self, h: &[f64]) -> Vec<f64> {
        h.to_vec()
    }

    fn canonical_jacobian(&self, _h: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    fn canonical_hessians(&self, _h: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)]
    }

    fn log_normalizer_canonical(&self, w: &[f64]) -> f64 {
        let (k, v, d) = (self.topics as f64, self.vocab as f64, self.docs as f64);
        -k * (ln_gamma(v * w[0]) - v * ln_gamma(w[0])) - d * (ln_gamma(k * w[1]) - k * ln_gamma(w[1]))
    }

    fn log_normalizer_canonical_grad(&self, w: &[f64]) -> DVector<f64> {
        let (k, v, d) = (self.topics as f64, self.vocab as f64, self.docs as f64);
        DVector::from_vec(vec![
            -k * v * (digamma(v * w[0]) - digamma(w[0])),
            -d * k * (digamma(k * w[1]) - digamma(w[1])),
        ])
    }

    fn log_normalizer_canonical_hess(&self, w: &[f64]) -> DMatrix<f64> {
        let (k, v, d) = (self.topics as f64, self.vocab as f64, self.docs as f64);
        DMatrix::from_diagonal(&DVector::from_vec(vec![
            -k * (v * v * trigamma(v * w[0]) - v * trigamma(w[0])),
            -d * (k * k * trigamma(k * w[1]) - k * trigamma(w[1])),
        ]))
    }

    fn canonical_admissible(&self, w: &[f64]) -> bool {
        w[0] > 0.0 && w[1] > 0.0
    }
}

/// Independence-Bernoulli inclusion prior with Zellner's g-prior, `h = (w, g)`.
///
/// Up to terms free of `h`,
/// `log nu_h = q_g log w + (q - q_g) log(1 - w) - (q_g / 2) log g - Q / (2 g)`
/// with `Q = beta' X'X beta / sigma^2`. This is written with the statistic
/// `T = (q_g, Q, 1)` and canonical map
/// `(logit w - log(g) / 2, -1 / (2 g), q log(1 - w))`, so `A = 0`.
#[derive(Debug, Clone)]
pub struct VsZellner {
    predictors: usize,
}

impl VsZellner {
    pub fn new(predictors: usize) -> Self {
        Self { predictors }
    }
}

impl PriorFamily for VsZellner {
    fn name(&self) -> &str {
        "vs-bernoulli-zellner"
    }

    fn dim(&self) -> usize {
        2
    }

    fn stat_dim(&self) -> usize {
        3
    }

    fn validate(&self, h: &[f64]) -> Result<()> {
        if h.len() != 2 || !(h[0] > 0.0 && h[0] < 1.0) || !(h[1] > 0.0) || !h[1].is_finite() {
            return Err(Error::InvalidArgument(format!("vs-bernoulli-zellner needs (0 < w < 1, g > 0), got {h:?}")));
        }
        Ok(())
    }

    fn canonical(&self, h: &[f64]) -> Vec<f64> {
        let (w, g) = (h[0], h[1]);
        vec![w.ln() - (-w).ln_1p() - 0.5 * g.ln(), -0.5 / g, self.predictors as f64 * (-w).ln_1p()]
    }

    fn canonical_jacobian(&self, h: &[f64]) -> DMatrix<f64> {
        let (w, g) = (h[0], h[1]);
        let q = self.predictors as f64;
        DMatrix::from_row_slice(3, 2, &[1.0 / (w * (1.0 - w)), -0.5 / g, 0.0, 0.5 / (g * g), -q / (1.0 - w), 0.0])
    }

    fn canonical_hessians(&self, h: &[f64]) -> Vec<DMatrix<f64>> {
        let (w, g) = (h[0], h[1]);
        let q = self.predictors as f64;
        let om = 1.0 - w;
        vec![
            DMatrix::from_row_slice(2, 2, &[-1.0 / (w * w) + 1.0 / (om * om), 0.0, 0.0, 0.5 / (g * g)]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0 / (g * g * g)]),
            DMatrix::from_row_slice(2, 2, &[-q / (om * om), 0.0, 0.0, 0.0]),
        ]
    }

    fn log_normalizer_canonical(&self, _w: &[f64]) -> f64 {
        0.0
    }

    fn log_normalizer_canonical_grad(&self, _w: &[f64]) -> DVector<f64> {
        DVector::zeros(3)
    }

    fn log_normalizer_canonical_hess(&self, _w: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(3, 3)
    }
}
