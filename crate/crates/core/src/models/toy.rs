//! Conjugate normal-hierarchical model with closed-form answers.
//!
//! `y_j | theta_j ~ N(theta_j, sigma0^2)`, `theta_j ~ N(mu, tau2)`, `h = (mu, tau2)`.

use std::collections::BTreeMap;

use crate::chain::{
    simulate, ChainTrace, HyperKernel, IidChain, IidTarget, IndependenceMh, IndependenceTarget, Reference, Target,
    TraceMeta,
};
use crate::error::{Error, Result};
use crate::numeric::{std_normal, Rng};
use crate::prior::{HyperRect, NormalHier};

/// Functionals recorded by the toy samplers.
pub const TOY_FUNCTIONALS: [&str; 2] = ["theta1", "one"];

#[derive(Debug, Clone, PartialEq)]
pub struct NormalHierModel {
    pub y: Vec<f64>,
    pub sigma0: f64,
}

impl NormalHierModel {
    pub fn new(y: Vec<f64>, sigma0: f64) -> Result<Self> {
        if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("toy model needs finite observations".into()));
        }
        if !(sigma0 > 0.0) {
            return Err(Error::InvalidArgument("sigma0 must be positive".into()));
        }
        Ok(Self { y, sigma0 })
    }

    /// The five-point fixture `y = (-2, -1, 0, 1, 2)` with `sigma0 = 1`.
    pub fn fixture() -> Self {
        Self { y: vec![-2.0, -1.0, 0.0, 1.0, 2.0], sigma0: 1.0 }
    }

    pub fn groups(&self) -> usize {
        self.y.len()
    }

    pub fn family(&self) -> NormalHier {
        NormalHier::new(self.y.len())
    }

    fn check(&self, h: &[f64]) -> Result<()> {
        if h.len() != 2 || !(h[1] > 0.0) || !h[0].is_finite() {
            return Err(Error::InvalidArgument(format!("toy model needs (mu, tau2 > 0), got {h:?}")));
        }
        Ok(())
    }

    /// Posterior means of each `theta_j` and their common variance.
    pub fn posterior(&self, h: &[f64]) -> (Vec<f64>, f64) {
        let (mu, t2) = (h[0], h[1]);
        let s2 = self.sigma0 * self.sigma0;
        let means = self.y.iter().map(|y| (y * t2 + mu * s2) / (t2 + s2)).collect();
        (means, t2 * s2 / (t2 + s2))
    }

    /// `log m_y(h) = sum_j log phi(y_j; mu, sigma0^2 + tau2)`.
    pub fn log_marginal(&self, h: &[f64]) -> f64 {
        let v = self.sigma0 * self.sigma0 + h[1];
        self.y.iter().map(|y| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (y - h[0]).powi(2) / (2.0 * v)).sum()
    }

    /// Posterior mean of `theta_1`.
    pub fn i_theta1(&self, h: &[f64]) -> f64 {
        let s2 = self.sigma0 * self.sigma0;
        (self.y[0] * h[1] + h[0] * s2) / (h[1] + s2)
    }

    /// Unconstrained maximiser of `m_y`, clipped to `rect`, and whether it was clipped.
    pub fn argmax(&self, rect: &HyperRect) -> (Vec<f64>, bool) {
        let j = self.y.len() as f64;
        let ybar = self.y.iter().sum::<f64>() / j;
        let s2 = self.y.iter().map(|y| (y - ybar).powi(2)).sum::<f64>() / j;
        let raw = vec![ybar, s2 - self.sigma0 * self.sigma0];
        let mut h = raw.clone();
        rect.clamp(&mut h);
        let boundary = h != raw || rect.on_boundary(&h, 0.0);
        (h, boundary)
    }

    fn meta(&self, kernel: &str, h1: &[f64]) -> TraceMeta {
        TraceMeta {
            seed: 0,
            kernel: kernel.to_string(),
            family: "normal-hier".into(),
            family_dims: BTreeMap::from([("groups".to_string(), self.y.len())]),
            reference: Reference::Single { h1: h1.to_vec() },
        }
    }
}

fn observe_theta(theta: &[f64], stat: &mut [f64], values: &mut [f64]) {
    stat[0] = theta.iter().sum();
    stat[1] = theta.iter().map(|t| t * t).sum();
    values[0] = theta[0];
    values[1] = 1.0;
}

fn draw_posterior(model: &NormalHierModel, h: &[f64], rng: &mut Rng) -> Vec<f64> {
    let (means, var) = model.posterior(h);
    let sd = var.sqrt();
    means.iter().map(|m| m + sd * std_normal(rng)).collect()
}

/// Closed-form quantities for the toy model.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyOracles {
    pub log_m_y: f64,
    pub m_y: f64,
    pub i_theta1: f64,
    pub h0: Vec<f64>,
    pub h0_on_boundary: bool,
}

pub fn toy_oracles(model: &NormalHierModel, h: &[f64], rect: &HyperRect) -> Result<ToyOracles> {
    model.check(h)?;
    let log_m_y = model.log_marginal(h);
    let (h0, h0_on_boundary) = model.argmax(rect);
    Ok(ToyOracles { log_m_y, m_y: log_m_y.exp(), i_theta1: model.i_theta1(h), h0, h0_on_boundary })
}

/// Exact posterior draws at a fixed `h1`.
#[derive(Debug, Clone)]
pub struct ToyExact {
    pub model: NormalHierModel,
    pub h1: Vec<f64>,
}

impl IidTarget for ToyExact {
    type State = Vec<f64>;
    fn meta(&self) -> TraceMeta {
        self.model.meta("toy-exact", &self.h1)
    }
    fn stat_dim(&self) -> usize {
        2
    }
    fn functionals(&self) -> Vec<String> {
        TOY_FUNCTIONALS.iter().map(|s| s.to_string()).collect()
    }
    fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        draw_posterior(&self.model, &self.h1, rng)
    }
    fn observe(&self, theta: &Vec<f64>, stat: &mut [f64], values: &mut [f64]) {
        observe_theta(theta, stat, values)
    }
}

/// Exact posterior draws at whichever `h` is asked for; used under serial tempering.
#[derive(Debug, Clone)]
pub struct ToyExactKernel {
    pub model: NormalHierModel,
}

impl HyperKernel for ToyExactKernel {
    type State = Vec<f64>;
    fn meta(&self) -> TraceMeta {
        self.model.meta("toy-exact", &[0.0, 1.0])
    }
    fn stat_dim(&self) -> usize {
        2
    }
    fn functionals(&self) -> Vec<String> {
        TOY_FUNCTIONALS.iter().map(|s| s.to_string()).collect()
    }
    fn initial(&mut self, h: &[f64], rng: &mut Rng) -> Vec<f64> {
        draw_posterior(&self.model, h, rng)
    }
    fn step(&mut self, state: &mut Vec<f64>, h: &[f64], rng: &mut Rng) {
        *state = draw_posterior(&self.model, h, rng);
    }
    fn observe(&self, theta: &Vec<f64>, stat: &mut [f64], values: &mut [f64]) {
        observe_theta(theta, stat, values)
    }
}

/// iid posterior sampler; every draw starts a tour.
pub fn toy_exact_sampler(model: &NormalHierModel, h1: &[f64], n: usize, seed: u64) -> Result<ChainTrace> {
    model.check(h1)?;
    simulate(&mut IidChain(ToyExact { model: model.clone(), h1: h1.to_vec() }), Target::Steps(n), seed)
}

/// Independence proposal: normals centred at the posterior means with a common sd.
#[derive(Debug, Clone)]
pub struct ToyIndependence {
    pub model: NormalHierModel,
    pub h1: Vec<f64>,
    pub proposal_sd: f64,
    means: Vec<f64>,
    post_var: f64,
}

impl ToyIndependence {
    pub fn new(model: &NormalHierModel, h1: &[f64], proposal_sd: f64) -> Result<Self> {
        model.check(h1)?;
        if !(proposal_sd > 0.0) {
            return Err(Error::InvalidArgument("proposal sd must be positive".into()));
        }
        let (means, post_var) = model.posterior(h1);
        Ok(Self { model: model.clone(), h1: h1.to_vec(), proposal_sd, means, post_var })
    }
}

impl IndependenceTarget for ToyIndependence {
    type State = Vec<f64>;
    fn meta(&self) -> TraceMeta {
        self.model.meta("toy-imh", &self.h1)
    }
    fn stat_dim(&self) -> usize {
        2
    }
    fn functionals(&self) -> Vec<String> {
        TOY_FUNCTIONALS.iter().map(|s| s.to_string()).collect()
    }
    fn propose(&self, rng: &mut Rng) -> Vec<f64> {
        self.means.iter().map(|m| m + self.proposal_sd * std_normal(rng)).collect()
    }
    fn log_weight(&self, x: &Vec<f64>) -> f64 {
        let a = 0.5 / self.post_var;
        let b = 0.5 / (self.proposal_sd * self.proposal_sd);
        x.iter().zip(&self.means).map(|(t, m)| (b - a) * (t - m) * (t - m)).sum()
    }
    fn observe(&self, theta: &Vec<f64>, stat: &mut [f64], values: &mut [f64]) {
        observe_theta(theta, stat, values)
    }
}

/// Default proposal sd of the toy independence sampler.
pub const TOY_PROPOSAL_SD: f64 = 1.0;

/// Independence Metropolis-Hastings on the toy posterior with regenerations.
///
/// `c` defaults to the median weight of a 1000-step pilot.
pub fn toy_mh_sampler(
    model: &NormalHierModel,
    h1: &[f64],
    proposal_sd: f64,
    c: Option<f64>,
    target: Target,
    seed: u64,
) -> Result<(ChainTrace, f64)> {
    let t = ToyIndependence::new(model, h1, proposal_sd)?;
    let mut kernel = match c {
        Some(c) => IndependenceMh::new(t, c)?,
        None => IndependenceMh::with_pilot(t, 1000, seed),
    };
    let trace = simulate(&mut kernel, target, seed)?;
    Ok((trace, kernel.acceptance_rate()))
}
