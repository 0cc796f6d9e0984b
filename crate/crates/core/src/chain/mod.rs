//! Chain traces, kernels with regeneration, and tour segmentation.

mod independence;
pub mod io;
mod kernel;
mod sums;
mod tours;
mod trace;

pub use independence::{indep_mh_regen_prob, pilot_log_c, IndependenceMh, IndependenceTarget, Weighted};
pub use kernel::{
    simulate, split_step, AtHyper, AtomChain, HyperKernel, IidChain, IidTarget, MarkovKernel, MinorizationPair,
    Regeneration, SplitChain, Target,
};
pub use sums::{tour_sums, TourSums};
pub use tours::{segment_tours, TourIndex};
pub use trace::{ChainTrace, Reference, TraceMeta};
