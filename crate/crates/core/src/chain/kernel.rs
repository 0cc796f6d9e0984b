use rand::Rng as _;

use super::{ChainTrace, Reference, TraceMeta};
use crate::error::{Error, Result};
use crate::numeric::{stream_rng, Rng};

/// How a kernel marks regenerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regeneration {
    /// Split-chain simulation from a minorization pair.
    Split,
    /// Regeneration on hitting an atom.
    Atom,
    /// Every step regenerates.
    Iid,
    /// No regeneration information; batching only.
    None,
}

/// A Markov transition kernel that reports regenerations.
pub trait MarkovKernel {
    type State;

    fn regeneration(&self) -> Regeneration;

    fn meta(&self) -> TraceMeta;

    fn stat_dim(&self) -> usize;

    fn functionals(&self) -> Vec<String>;

    /// Starting state. Regenerative kernels draw it from the regeneration measure.
    fn initial(&mut self, rng: &mut Rng) -> Self::State;

    /// Advances `state` one step; returns true when the new state starts a tour.
    fn step(&mut self, state: &mut Self::State, rng: &mut Rng) -> bool;

    fn observe(&self, state: &Self::State, stat: &mut [f64], values: &mut [f64]);

    fn label(&self, _state: &Self::State) -> Option<u32> {
        None
    }
}

/// Run length, either a number of draws or a number of complete tours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Steps(usize),
    Regenerations(usize),
}

/// Simulates a chain and records its trace.
///
/// With a step target, one extra transition is taken to learn whether the
/// final tour is complete. With a regeneration target the chain stops just
/// before the draw that would start tour `R + 1`.
pub fn simulate<K: MarkovKernel>(kernel: &mut K, target: Target, seed: u64) -> Result<ChainTrace> {
    let mut rng = stream_rng(seed, "chain");
    let mut meta = kernel.meta();
    meta.seed = seed;
    let functionals = kernel.functionals();
    let mut stat = vec![0.0; kernel.stat_dim()];
    let mut values = vec![0.0; functionals.len()];
    let capacity = match target {
        Target::Steps(n) => n,
        Target::Regenerations(r) => r,
    };
    if capacity == 0 {
        return Err(Error::InvalidArgument("run length must be positive".into()));
    }
    if let Target::Regenerations(_) = target {
        if kernel.regeneration() == Regeneration::None {
            return Err(Error::NoRegeneration(kernel.meta().kernel));
        }
    }
    let mut trace = ChainTrace::new(meta, stat.len(), functionals).with_capacity(capacity);
    let mut record = |kernel: &K, trace: &mut ChainTrace, state: &K::State, regen: bool| {
        kernel.observe(state, &mut stat, &mut values);
        match kernel.label(state) {
            Some(l) => trace.push_labelled(&stat, &values, regen, l),
            None => trace.push(&stat, &values, regen),
        }
    };

    let mut state = kernel.initial(&mut rng);
    record(kernel, &mut trace, &state, true);
    match target {
        Target::Steps(n) => {
            for _ in 1..n {
                let regen = kernel.step(&mut state, &mut rng);
                record(kernel, &mut trace, &state, regen);
            }
            let closed = kernel.regeneration() != Regeneration::None && kernel.step(&mut state, &mut rng);
            trace.set_closed(closed);
        }
        Target::Regenerations(r) => {
            let mut completed = 0;
            loop {
                let regen = kernel.step(&mut state, &mut rng);
                if regen {
                    completed += 1;
                    if completed == r {
                        break;
                    }
                }
                record(kernel, &mut trace, &state, regen);
            }
            trace.set_closed(true);
        }
    }
    Ok(trace)
}

/// A minorization `K(x, .) >= s(x) Q(.)` with its residual kernel.
pub trait MinorizationPair {
    type State;

    /// `s(x)`, required to lie in `[0, 1)`.
    fn s(&self, x: &Self::State) -> f64;

    /// Draw from the regeneration measure `Q`.
    fn draw_q(&self, rng: &mut Rng) -> Self::State;

    /// Draw from `(K(x, .) - s(x) Q) / (1 - s(x))`.
    fn draw_residual(&self, x: &Self::State, rng: &mut Rng) -> Self::State;
}

/// One split-chain transition.
pub fn split_step<P: MinorizationPair>(pair: &P, state: &P::State, rng: &mut Rng) -> Result<(P::State, bool)> {
    let s = pair.s(state);
    if !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("minorization s(x) = {s} outside [0, 1)")));
    }
    if rng.random::<f64>() < s {
        Ok((pair.draw_q(rng), true))
    } else {
        Ok((pair.draw_residual(state, rng), false))
    }
}

/// A source of independent draws.
pub trait IidTarget {
    type State;
    fn meta(&self) -> TraceMeta;
    fn stat_dim(&self) -> usize;
    fn functionals(&self) -> Vec<String>;
    fn draw(&self, rng: &mut Rng) -> Self::State;
    fn observe(&self, state: &Self::State, stat: &mut [f64], values: &mut [f64]);
}

/// Treats an exact sampler as a chain that regenerates at every step.
#[derive(Debug, Clone)]
pub struct IidChain<T>(pub T);

impl<T: IidTarget> MarkovKernel for IidChain<T> {
    type State = T::State;

    fn regeneration(&self) -> Regeneration {
        Regeneration::Iid
    }
    fn meta(&self) -> TraceMeta {
        self.0.meta()
    }
    fn stat_dim(&self) -> usize {
        self.0.stat_dim()
    }
    fn functionals(&self) -> Vec<String> {
        self.0.functionals()
    }
    fn initial(&mut self, rng: &mut Rng) -> T::State {
        self.0.draw(rng)
    }
    fn step(&mut self, state: &mut T::State, rng: &mut Rng) -> bool {
        *state = self.0.draw(rng);
        true
    }
    fn observe(&self, state: &T::State, stat: &mut [f64], values: &mut [f64]) {
        self.0.observe(state, stat, values)
    }
}

/// Wraps a kernel without regeneration information and flags visits to an atom.
pub struct AtomChain<K: MarkovKernel, F> {
    pub inner: K,
    pub is_atom: F,
    pub start: K::State,
}

impl<K, F> MarkovKernel for AtomChain<K, F>
where
    K: MarkovKernel,
    K::State: Clone,
    F: Fn(&K::State) -> bool,
{
    type State = K::State;

    fn regeneration(&self) -> Regeneration {
        Regeneration::Atom
    }
    fn meta(&self) -> TraceMeta {
        self.inner.meta()
    }
    fn stat_dim(&self) -> usize {
        self.inner.stat_dim()
    }
    fn functionals(&self) -> Vec<String> {
        self.inner.functionals()
    }
    fn initial(&mut self, _rng: &mut Rng) -> K::State {
        self.start.clone()
    }
    fn step(&mut self, state: &mut K::State, rng: &mut Rng) -> bool {
        self.inner.step(state, rng);
        (self.is_atom)(state)
    }
    fn observe(&self, state: &K::State, stat: &mut [f64], values: &mut [f64]) {
        self.inner.observe(state, stat, values)
    }
    fn label(&self, state: &K::State) -> Option<u32> {
        self.inner.label(state)
    }
}

/// Runs a minorization pair as a split chain.
pub struct SplitChain<P: MinorizationPair> {
    pub pair: P,
    pub meta: TraceMeta,
    pub stat_dim: usize,
    pub functionals: Vec<String>,
    pub observe: fn(&P, &<P as MinorizationPair>::State, &mut [f64], &mut [f64]),
}

impl<P: MinorizationPair> MarkovKernel for SplitChain<P> {
    type State = P::State;

    fn regeneration(&self) -> Regeneration {
        Regeneration::Split
    }
    fn meta(&self) -> TraceMeta {
        self.meta.clone()
    }
    fn stat_dim(&self) -> usize {
        self.stat_dim
    }
    fn functionals(&self) -> Vec<String> {
        self.functionals.clone()
    }
    fn initial(&mut self, rng: &mut Rng) -> P::State {
        self.pair.draw_q(rng)
    }
    fn step(&mut self, state: &mut P::State, rng: &mut Rng) -> bool {
        let (next, regen) = split_step(&self.pair, state, rng).expect("minorization s(x) outside [0, 1)");
        *state = next;
        regen
    }
    fn observe(&self, state: &P::State, stat: &mut [f64], values: &mut [f64]) {
        (self.observe)(&self.pair, state, stat, values)
    }
}

/// Kernels indexed by a hyperparameter, each leaving the posterior at that
/// hyperparameter invariant.
pub trait HyperKernel {
    type State;
    /// Trace metadata; the reference is filled in by the caller.
    fn meta(&self) -> TraceMeta;
    fn stat_dim(&self) -> usize;
    fn functionals(&self) -> Vec<String>;
    fn initial(&mut self, h: &[f64], rng: &mut Rng) -> Self::State;
    fn step(&mut self, state: &mut Self::State, h: &[f64], rng: &mut Rng);
    fn observe(&self, state: &Self::State, stat: &mut [f64], values: &mut [f64]);
}

/// A hyperparameter-indexed kernel run at a fixed `h1`, without regeneration marks.
pub struct AtHyper<K> {
    pub kernel: K,
    pub h1: Vec<f64>,
}

impl<K: HyperKernel> MarkovKernel for AtHyper<K> {
    type State = K::State;

    fn regeneration(&self) -> Regeneration {
        Regeneration::None
    }
    fn meta(&self) -> TraceMeta {
        let mut meta = self.kernel.meta();
        meta.reference = Reference::Single { h1: self.h1.clone() };
        meta
    }
    fn stat_dim(&self) -> usize {
        self.kernel.stat_dim()
    }
    fn functionals(&self) -> Vec<String> {
        self.kernel.functionals()
    }
    fn initial(&mut self, rng: &mut Rng) -> K::State {
        self.kernel.initial(&self.h1, rng)
    }
    fn step(&mut self, state: &mut K::State, rng: &mut Rng) -> bool {
        self.kernel.step(state, &self.h1, rng);
        false
    }
    fn observe(&self, state: &K::State, stat: &mut [f64], values: &mut [f64]) {
        self.kernel.observe(state, stat, values)
    }
}
