use rand::Rng as _;

use super::kernel::{MarkovKernel, Regeneration};
use super::TraceMeta;
use crate::error::{Error, Result};
use crate::numeric::{stream_rng, Rng};

/// Target and proposal for an independence Metropolis-Hastings chain.
pub trait IndependenceTarget {
    type State;
    fn meta(&self) -> TraceMeta;
    fn stat_dim(&self) -> usize;
    fn functionals(&self) -> Vec<String>;
    fn propose(&self, rng: &mut Rng) -> Self::State;
    /// `log(pi(x) / q(x))` up to an additive constant.
    fn log_weight(&self, x: &Self::State) -> f64;
    fn observe(&self, x: &Self::State, stat: &mut [f64], values: &mut [f64]);
}

/// A state together with its cached log importance weight.
#[derive(Debug, Clone)]
pub struct Weighted<S> {
    pub x: S,
    pub log_w: f64,
}

/// Probability that an accepted independence-MH move `x -> y` regenerates.
///
/// With `s(x) = min(1, c / w_x)` and `nu(y)` proportional to
/// `q(y) min(1, w_y / c)`, this is `s(x) nu(y) / k(x, y)`.
pub fn indep_mh_regen_prob(w_x: f64, w_y: f64, c: f64) -> Result<f64> {
    if !(w_x > 0.0 && w_y > 0.0 && c > 0.0) || !(w_x.is_finite() && w_y.is_finite() && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weights and c must be positive and finite, got w_x={w_x}, w_y={w_y}, c={c}"
        )));
    }
    Ok(log_regen_prob(w_x.ln(), w_y.ln(), c.ln()).exp())
}

fn log_regen_prob(lx: f64, ly: f64, lc: f64) -> f64 {
    if lx <= lc && ly <= lc {
        lx.max(ly) - lc
    } else if lx >= lc && ly >= lc {
        lc - lx.min(ly)
    } else {
        0.0
    }
}

/// Independence Metropolis-Hastings with regenerations marked via the
/// distinguished-constant split.
#[derive(Debug, Clone)]
pub struct IndependenceMh<T> {
    pub target: T,
    log_c: f64,
    proposed: u64,
    accepted: u64,
}

impl<T: IndependenceTarget> IndependenceMh<T> {
    pub fn new(target: T, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("regeneration constant must be positive, got {c}")));
        }
        Ok(Self::with_log_c(target, c.ln()))
    }

    pub fn with_log_c(target: T, log_c: f64) -> Self {
        Self { target, log_c, proposed: 0, accepted: 0 }
    }

    /// Sets `c` to the median weight seen in a plain pilot run.
    pub fn with_pilot(target: T, steps: usize, seed: u64) -> Self {
        let log_c = pilot_log_c(&target, steps.max(1), seed);
        Self::with_log_c(target, log_c)
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Median log weight of the states visited by a `steps`-long independence chain.
pub fn pilot_log_c<T: IndependenceTarget>(target: &T, steps: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, "pilot");
    let mut lw = target.log_weight(&target.propose(&mut rng));
    let mut seen = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = target.propose(&mut rng);
        let ly = target.log_weight(&y);
        if rng.random::<f64>().ln() < ly - lw {
            lw = ly;
        }
        seen.push(lw);
    }
    seen.sort_by(f64::total_cmp);
    let m = seen.len();
    if m % 2 == 1 {
        seen[m / 2]
    } else {
        0.5 * (seen[m / 2 - 1] + seen[m / 2])
    }
}

impl<T: IndependenceTarget> MarkovKernel for IndependenceMh<T> {
    type State = Weighted<T::State>;

    fn regeneration(&self) -> Regeneration {
        Regeneration::Split
    }
    fn meta(&self) -> TraceMeta {
        self.target.meta()
    }
    fn stat_dim(&self) -> usize {
        self.target.stat_dim()
    }
    fn functionals(&self) -> Vec<String> {
        self.target.functionals()
    }

    fn initial(&mut self, rng: &mut Rng) -> Self::State {
        loop {
            let x = self.target.propose(rng);
            let log_w = self.target.log_weight(&x);
            if rng.random::<f64>().ln() < (log_w - self.log_c).min(0.0) {
                return Weighted { x, log_w };
            }
        }
    }

    fn step(&mut self, state: &mut Self::State, rng: &mut Rng) -> bool {
        let y = self.target.propose(rng);
        let ly = self.target.log_weight(&y);
        self.proposed += 1;
        if rng.random::<f64>().ln() >= ly - state.log_w {
            return false;
        }
        self.accepted += 1;
        let log_r = log_regen_prob(state.log_w, ly, self.log_c);
        *state = Weighted { x: y, log_w: ly };
        log_r >= 0.0 || rng.random::<f64>().ln() < log_r
    }

    fn observe(&self, state: &Self::State, stat: &mut [f64], values: &mut [f64]) {
        self.target.observe(&state.x, stat, values)
    }
}
