//! Serial tempering over a grid of anchor hyperparameters.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{
    simulate, AtHyper, ChainTrace, HyperKernel, MarkovKernel, Reference, Regeneration, Target, TraceMeta,
};
use crate::error::{Error, Result};
use crate::estimators::{estimate_b, Reweighter};
use crate::numeric::{logsumexp, Rng};
use crate::prior::{HyperPoint, HyperRect, PriorAt, PriorFamily};

/// Anchors with their pseudo-prior constants `zeta_j`, stored as logs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StGrid {
    pub anchors: Vec<HyperPoint>,
    pub log_zeta: Vec<f64>,
    /// Label occupancies from the most recent run, if any.
    pub occupancy: Option<Vec<f64>>,
}

impl StGrid {
    pub fn new(anchors: Vec<HyperPoint>, log_zeta: Vec<f64>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidArgument("serial tempering needs at least one anchor".into()));
        }
        if anchors.len() != log_zeta.len() {
            return Err(Error::InvalidArgument("one zeta per anchor required".into()));
        }
        if log_zeta.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidArgument("zeta must be positive and finite".into()));
        }
        let k = anchors[0].len();
        if anchors.iter().any(|a| a.len() != k) {
            return Err(Error::InvalidArgument("anchors differ in dimension".into()));
        }
        Ok(Self { anchors, log_zeta, occupancy: None })
    }

    /// Equal `zeta` at every anchor.
    pub fn flat(anchors: Vec<HyperPoint>) -> Result<Self> {
        let m = anchors.len();
        Self::new(anchors, vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn reference(&self) -> Reference {
        Reference::Mixture { anchors: self.anchors.clone(), log_zeta: self.log_zeta.clone() }
    }
}

/// Uniform lattice of anchors, snaked so consecutive labels are neighbours.
pub fn lattice_anchors(rect: &HyperRect, per_axis: &[usize]) -> Vec<HyperPoint> {
    let mut points = rect.grid(per_axis);
    if per_axis.len() < 2 {
        return points;
    }
    let last = *per_axis.last().unwrap();
    // Reverse every other run of the fastest axis, tracking parity over all slower axes.
    for (run, chunk) in points.chunks_mut(last).enumerate() {
        let mut parity = 0;
        let mut rest = run;
        for &len in per_axis[..per_axis.len() - 1].iter().rev() {
            parity += rest % len;
            rest /= len;
        }
        if parity % 2 == 1 {
            chunk.reverse();
        }
    }
    points
}

/// `log[(1/m) sum_j nu_{h_j}(theta) / zeta_j]` from the sufficient statistic.
pub fn st_denominator(family: &dyn PriorFamily, grid: &StGrid, t: &[f64]) -> f64 {
    let ats: Vec<PriorAt> = grid.anchors.iter().map(|h| family.at(h)).collect();
    mixture_log_density(&ats, &grid.log_zeta, t)
}

fn mixture_log_density(ats: &[PriorAt], log_zeta: &[f64], t: &[f64]) -> f64 {
    logsumexp(ats.iter().zip(log_zeta).map(|(a, z)| a.log_density(t) - z)) - (ats.len() as f64).ln()
}

/// Mixture denominators for every draw of a trace.
pub fn st_log_denominators(
    family: &dyn PriorFamily,
    anchors: &[HyperPoint],
    log_zeta: &[f64],
    trace: &ChainTrace,
) -> Result<Vec<f64>> {
    for h in anchors {
        family.validate(h)?;
    }
    let ats: Vec<PriorAt> = anchors.iter().map(|h| family.at(h)).collect();
    Ok((0..trace.len()).map(|i| mixture_log_density(&ats, log_zeta, trace.stat(i))).collect())
}

/// Label and state of a serial-tempering chain.
#[derive(Debug, Clone)]
pub struct StState<S> {
    pub label: usize,
    pub theta: S,
    stat: Vec<f64>,
}

/// Serial-tempering chain on labels x states.
pub struct StChain<'f, K> {
    pub kernel: K,
    pub grid: StGrid,
    family: &'f dyn PriorFamily,
    ats: Vec<PriorAt>,
    start_label: usize,
    values: Vec<f64>,
}

impl<'f, K: HyperKernel> StChain<'f, K> {
    pub fn new(kernel: K, grid: StGrid, family: &'f dyn PriorFamily) -> Result<Self> {
        for h in &grid.anchors {
            family.validate(h)?;
        }
        if kernel.stat_dim() != family.stat_dim() {
            return Err(Error::InvalidArgument("kernel and family disagree on the statistic".into()));
        }
        let ats = grid.anchors.iter().map(|h| family.at(h)).collect();
        let values = vec![0.0; kernel.functionals().len()];
        Ok(Self { kernel, grid, family, ats, start_label: 0, values })
    }

    pub fn family(&self) -> &'f dyn PriorFamily {
        self.family
    }

    pub fn set_start_label(&mut self, label: usize) {
        self.start_label = label.min(self.grid.len() - 1);
    }

    fn refresh_stat(&mut self, state: &mut StState<K::State>) {
        let mut values = std::mem::take(&mut self.values);
        self.kernel.observe(&state.theta, &mut state.stat, &mut values);
        self.values = values;
    }
}

/// One serial-tempering update: a label move to a neighbour, then a state
/// move under the new label's kernel.
///
/// Label proposals reflect at the ends of the linear order; the Hastings
/// ratio accounts for the asymmetric proposal there.
pub fn st_step<K: HyperKernel>(state: &mut StState<K::State>, chain: &mut StChain<'_, K>, rng: &mut Rng) {
    let m = chain.grid.len();
    if m > 1 {
        let j = state.label;
        let (proposal, q_forward) = if j == 0 {
            (1, 1.0)
        } else if j == m - 1 {
            (m - 2, 1.0)
        } else if rng.random::<bool>() {
            (j + 1, 0.5)
        } else {
            (j - 1, 0.5)
        };
        let q_back: f64 = if proposal == 0 || proposal == m - 1 { 1.0 } else { 0.5 };
        let log_accept = chain.ats[proposal].log_density(&state.stat)
            - chain.grid.log_zeta[proposal]
            - chain.ats[j].log_density(&state.stat)
            + chain.grid.log_zeta[j]
            + (q_back / q_forward).ln();
        if log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept {
            state.label = proposal;
        }
    }
    let h = chain.grid.anchors[state.label].clone();
    chain.kernel.step(&mut state.theta, &h, rng);
    chain.refresh_stat(state);
}

impl<K: HyperKernel> MarkovKernel for StChain<'_, K> {
    type State = StState<K::State>;

    fn regeneration(&self) -> Regeneration {
        Regeneration::None
    }
    fn meta(&self) -> TraceMeta {
        let mut meta = self.kernel.meta();
        meta.reference = self.grid.reference();
        meta
    }
    fn stat_dim(&self) -> usize {
        self.kernel.stat_dim()
    }
    fn functionals(&self) -> Vec<String> {
        self.kernel.functionals()
    }
    fn initial(&mut self, rng: &mut Rng) -> Self::State {
        let label = self.start_label;
        let theta = self.kernel.initial(&self.grid.anchors[label].clone(), rng);
        let mut state = StState { label, theta, stat: vec![0.0; self.kernel.stat_dim()] };
        self.refresh_stat(&mut state);
        state
    }
    fn step(&mut self, state: &mut Self::State, rng: &mut Rng) -> bool {
        st_step(state, self, rng);
        false
    }
    fn observe(&self, state: &Self::State, stat: &mut [f64], values: &mut [f64]) {
        self.kernel.observe(&state.theta, stat, values)
    }
    fn label(&self, state: &Self::State) -> Option<u32> {
        Some(state.label as u32)
    }
}

/// Starting `log zeta` from geometric bridge sampling between consecutive anchors.
///
/// Runs `steps` draws at each anchor (the first tenth discarded) and chains the
/// ratio estimates `m(h_{j+1}) / m(h_j) = E_j[(nu_{j+1}/nu_j)^(1/2)] / E_{j+1}[(nu_j/nu_{j+1})^(1/2)]`
/// along the label order. The result is normalised to `log zeta_0 = 0`.
pub fn bridge_log_zeta<K>(
    kernel: &K,
    anchors: &[HyperPoint],
    family: &dyn PriorFamily,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    K: HyperKernel + Clone + Send + Sync,
{
    if anchors.is_empty() {
        return Err(Error::InvalidArgument("serial tempering needs at least one anchor".into()));
    }
    if steps < 10 {
        return Err(Error::InvalidArgument("bridge runs need at least ten steps".into()));
    }
    for h in anchors {
        family.validate(h)?;
    }
    let ats: Vec<PriorAt> = anchors.iter().map(|h| family.at(h)).collect();
    let m = anchors.len();
    // (toward previous, toward next) half log ratios per anchor
    let halves = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut chain = AtHyper { kernel: kernel.clone(), h1: anchors[j].clone() };
            let trace = simulate(&mut chain, Target::Steps(steps), seed.wrapping_add(j as u64))?;
            let burn = steps / 10;
            let half = |other: usize| -> f64 {
                let vals = (burn..trace.len())
                    .map(|i| 0.5 * (ats[other].log_density(trace.stat(i)) - ats[j].log_density(trace.stat(i))));
                logsumexp(vals) - ((trace.len() - burn) as f64).ln()
            };
            let prev = if j > 0 { half(j - 1) } else { 0.0 };
            let next = if j + 1 < m { half(j + 1) } else { 0.0 };
            Ok((prev, next))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut log_zeta = vec![0.0; m];
    for j in 1..m {
        log_zeta[j] = log_zeta[j - 1] + halves[j - 1].1 - halves[j].0;
    }
    if log_zeta.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("bridge estimate of zeta".into()));
    }
    Ok(log_zeta)
}

/// Fraction of draws spent at each label.
pub fn occupancy(labels: &[u32], m: usize) -> Vec<f64> {
    let mut counts = vec![0.0; m];
    for &l in labels {
        counts[l as usize] += 1.0;
    }
    let n = labels.len().max(1) as f64;
    counts.iter().map(|c| c / n).collect()
}

/// Largest `max(o_j m, 1 / (o_j m))` over labels.
pub fn occupancy_ratio(occ: &[f64]) -> f64 {
    let m = occ.len() as f64;
    occ.iter()
        .map(|o| {
            let r = o * m;
            if r <= 0.0 {
                f64::INFINITY
            } else {
                r.max(1.0 / r)
            }
        })
        .fold(1.0, f64::max)
}

/// How `zeta` is updated between tuning rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaUpdate {
    /// `zeta_j <- zeta_j (o_j m)^kappa`, halving `kappa` whenever the fit worsens.
    Occupancy { kappa: f64 },
    /// `zeta_j <- B_n(h_j)` estimated from the round's mixture trace.
    Marginal,
}

#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub rounds: usize,
    pub steps_per_round: usize,
    /// Target bound on `max(o_j m, 1 / (o_j m))`.
    pub max_ratio: f64,
    pub update: ZetaUpdate,
    pub seed: u64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            rounds: 20,
            steps_per_round: 10_000,
            max_ratio: 2.0,
            update: ZetaUpdate::Occupancy { kappa: 0.5 },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub grid: StGrid,
    pub rounds_used: usize,
    pub converged: bool,
    /// Occupancy ratio after each round.
    pub history: Vec<f64>,
}

/// Adjusts `zeta` until label occupancies are close to uniform.
///
/// Each round runs a fresh chain with its own seed stream. If the target
/// ratio is not reached the best grid seen is returned unconverged.
pub fn tune_zeta<K: HyperKernel>(
    kernel: K,
    grid: StGrid,
    family: &dyn PriorFamily,
    opts: &TuneOptions,
) -> Result<(TuneReport, K)> {
    if opts.steps_per_round < 2 {
        return Err(Error::InvalidArgument("tuning rounds need at least two steps".into()));
    }
    let m = grid.len();
    let mut chain = StChain::new(kernel, grid, family)?;
    if m == 1 {
        let mut g = chain.grid.clone();
        g.occupancy = Some(vec![1.0]);
        return Ok((TuneReport { grid: g, rounds_used: 0, converged: true, history: vec![] }, chain.kernel));
    }
    let mut kappa = match opts.update {
        ZetaUpdate::Occupancy { kappa } => kappa,
        ZetaUpdate::Marginal => 1.0,
    };
    let floor = 0.5 / opts.steps_per_round as f64;
    let mut history = Vec::new();
    let mut best: Option<(f64, StGrid)> = None;
    let mut previous = f64::INFINITY;
    for round in 0..opts.rounds {
        chain.set_start_label(round % m);
        let trace = simulate(&mut chain, Target::Steps(opts.steps_per_round), opts.seed.wrapping_add(round as u64))?;
        let occ = occupancy(trace.labels().unwrap_or(&[]), m);
        let ratio = occupancy_ratio(&occ);
        history.push(ratio);
        let mut current = chain.grid.clone();
        current.occupancy = Some(occ.clone());
        if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
            best = Some((ratio, current.clone()));
        }
        if ratio <= opts.max_ratio {
            return Ok((TuneReport { grid: current, rounds_used: round + 1, converged: true, history }, chain.kernel));
        }
        let new_log_zeta: Vec<f64> = match opts.update {
            ZetaUpdate::Occupancy { .. } => {
                if ratio > previous {
                    kappa *= 0.5;
                }
                chain.grid.log_zeta.iter().zip(&occ).map(|(z, o)| z + kappa * (o.max(floor) * m as f64).ln()).collect()
            }
            ZetaUpdate::Marginal => {
                let rw = Reweighter::new(&trace, family)?;
                chain.grid.anchors.iter().map(|h| estimate_b(&rw, h).map(f64::ln)).collect::<Result<Vec<_>>>()?
            }
        };
        previous = ratio;
        let shift = new_log_zeta[0];
        let grid = StGrid::new(chain.grid.anchors.clone(), new_log_zeta.iter().map(|z| z - shift).collect())?;
        chain = StChain::new(chain.kernel, grid, family)?;
    }
    let (_, grid) = best.expect("at least one round");
    Ok((TuneReport { grid, rounds_used: opts.rounds, converged: false, history }, chain.kernel))
}
