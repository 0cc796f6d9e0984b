//! Marginal-likelihood and posterior-expectation surfaces estimated from a
//! single MCMC run, with regenerative and batch-based uncertainty.
//!
//! A chain targeting the posterior at a reference hyperparameter `h1` is
//! recorded as a [`ChainTrace`] of sufficient statistics. Reweighting by the
//! prior ratio `f_h = nu_h / nu_h1` gives `B_n(h)`, proportional to the
//! marginal likelihood, and `I_g(h)`, the posterior mean of `g`, at every `h`.

pub mod argmax;
pub mod band;
pub mod chain;
pub mod error;
pub mod estimators;
pub mod models;
pub mod numeric;
pub mod optimize;
pub mod prior;
pub mod tempering;

pub use argmax::{ArgmaxOptions, ArgmaxReport, Ellipse};
pub use band::BandReport;
pub use chain::{ChainTrace, Reference, TourIndex, TourSums, TraceMeta};
pub use error::{Error, Result};
pub use estimators::{FunctionalEstimate, Reweighter, SurfaceEstimate};
pub use prior::{EnvelopeSet, HyperPoint, HyperRect, PriorFamily, SuffStat};
pub use tempering::StGrid;
