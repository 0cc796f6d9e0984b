//! Model plugins: samplers, sufficient statistics and functionals.

pub mod lda;
pub mod synth;
pub mod toy;
pub mod vs;
