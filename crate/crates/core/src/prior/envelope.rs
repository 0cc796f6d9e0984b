//! Corner envelopes `sup_h nu_h(theta) <= sum_j c_j nu_{omega_j}(theta)`.
//!
//! For a canonical exponential family on a box `[l, u]` of canonical
//! coordinates, `omega . T` is maximised at a vertex of the box for every
//! `T`, so `exp(omega . T) <= sum_j exp(omega_j . T)` over the `2^p` vertices.
//! With `c = sup exp(-A)` on the box and `c_j = c exp(A(omega_j))` the bound
//! on the densities follows.

use rayon::prelude::*;

use super::{axis_points, cartesian, dot, HyperPoint, HyperRect, PriorFamily};
use crate::error::{Error, Result};
use crate::numeric::logsumexp;

const MAX_CORNER_DIM: usize = 8;
const MONOTONE_SAMPLES: usize = 21;

/// Envelope anchors in canonical coordinates with their coefficients.
#[derive(Debug, Clone)]
pub struct EnvelopeSet {
    /// Vertices `omega_j` of the canonical bounding box.
    pub corners: Vec<Vec<f64>>,
    /// `c_j > 0`.
    pub coefficients: Vec<f64>,
}

impl EnvelopeSet {
    /// `log sum_j c_j nu_{omega_j}(theta)` up to the base measure.
    pub fn log_bound(&self, family: &dyn PriorFamily, t: &[f64]) -> f64 {
        logsumexp(
            self.corners
                .iter()
                .zip(&self.coefficients)
                .map(|(w, c)| c.ln() + dot(w, t) - family.log_normalizer_canonical(w)),
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { corners: self.corners.clone(), coefficients: self.coefficients.iter().map(|c| c * factor).collect() }
    }
}

/// Builds the corner envelope of `family` over `rect`.
///
/// The canonical map must be monotone in each coordinate over `rect`; its
/// image is then bounded by the box spanned by the images of the vertices of
/// `rect`.
pub fn envelope_corners(family: &dyn PriorFamily, rect: &HyperRect) -> Result<EnvelopeSet> {
    let p = family.stat_dim();
    if rect.dim() > MAX_CORNER_DIM || p > MAX_CORNER_DIM {
        return Err(Error::InvalidArgument(format!(
            "corner envelope needs at most {MAX_CORNER_DIM} dimensions (k={}, stat_dim={p})",
            rect.dim()
        )));
    }
    for corner in rect.corners() {
        family.validate(&corner)?;
    }
    check_monotone(family, rect)?;

    let images: Vec<Vec<f64>> = rect.corners().iter().map(|h| family.canonical(h)).collect();
    let lo: Vec<f64> = (0..p).map(|i| images.iter().map(|w| w[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..p).map(|i| images.iter().map(|w| w[i]).fold(f64::NEG_INFINITY, f64::max)).collect();

    let corners: Vec<Vec<f64>> =
        (0..1usize << p).map(|mask| (0..p).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect()).collect();
    for w in &corners {
        if !family.canonical_admissible(w) {
            return Err(Error::InvalidArgument(format!(
                "canonical corner {w:?} lies outside the natural parameter space"
            )));
        }
    }

    let min_a = minimise_log_normalizer(family, &lo, &hi);
    // c_j = c exp(A(omega_j)) with c = exp(-min A)
    let coefficients = corners.iter().map(|w| (family.log_normalizer_canonical(w) - min_a).exp()).collect();
    Ok(EnvelopeSet { corners, coefficients })
}

fn check_monotone(family: &dyn PriorFamily, rect: &HyperRect) -> Result<()> {
    let k = rect.dim();
    let p = family.stat_dim();
    for axis in 0..k {
        // lines along `axis` through a 3-point lattice of the remaining coordinates
        let others: Vec<Vec<f64>> = (0..k)
            .map(|i| if i == axis { vec![0.0] } else { axis_points(rect.lower()[i], rect.upper()[i], 3) })
            .collect();
        for base in cartesian(&others) {
            let line: Vec<Vec<f64>> = axis_points(rect.lower()[axis], rect.upper()[axis], MONOTONE_SAMPLES)
                .into_iter()
                .map(|x| {
                    let mut h = base.clone();
                    h[axis] = x;
                    family.canonical(&h)
                })
                .collect();
            for c in 0..p {
                let diffs: Vec<f64> = line.windows(2).map(|w| w[1][c] - w[0][c]).collect();
                let up = diffs.iter().all(|d| *d >= -1e-12);
                let down = diffs.iter().all(|d| *d <= 1e-12);
                if !(up || down) {
                    return Err(Error::InvalidArgument(format!(
                        "canonical coordinate {c} is not monotone along axis {axis}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// `min A(omega)` over the box `[lo, hi]`: lattice search followed by a compass search.
fn minimise_log_normalizer(family: &dyn PriorFamily, lo: &[f64], hi: &[f64]) -> f64 {
    let p = lo.len();
    let per_axis = match p {
        0 => 1,
        1..=3 => 101,
        _ => (1.0e6f64.powf(1.0 / p as f64).floor() as usize).max(3),
    };
    let axes: Vec<Vec<f64>> =
        (0..p).map(|i| if hi[i] > lo[i] { axis_points(lo[i], hi[i], per_axis) } else { vec![lo[i]] }).collect();
    let lattice = cartesian(&axes);
    let (mut best, mut best_val) = lattice
        .par_iter()
        .map(|w| (w.clone(), family.log_normalizer_canonical(w)))
        .reduce(|| (Vec::new(), f64::INFINITY), |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });

    let mut step: Vec<f64> = (0..p).map(|i| (hi[i] - lo[i]) / (per_axis.max(2) - 1) as f64).collect();
    for _ in 0..200 {
        let mut improved = false;
        for i in 0..p {
            for dir in [-1.0, 1.0] {
                let mut cand: HyperPoint = best.clone();
                cand[i] = (cand[i] + dir * step[i]).clamp(lo[i], hi[i]);
                let v = family.log_normalizer_canonical(&cand);
                if v < best_val {
                    best = cand;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if step.iter().zip(lo.iter().zip(hi)).all(|(s, (l, h))| *s <= 1e-12 * (1.0 + (h - l).abs())) {
                break;
            }
        }
    }
    best_val
}

/// Counts `(theta, h)` pairs violating the envelope inequality beyond a `1e-12` relative slack.
///
/// `samples` holds sufficient statistics, one per draw.
pub fn check_envelope(
    env: &EnvelopeSet,
    family: &dyn PriorFamily,
    samples: &[Vec<f64>],
    h_grid: &[HyperPoint],
) -> usize {
    let evals: Vec<_> = h_grid.iter().map(|h| family.at(h)).collect();
    let slack = (1.0f64 + 1e-12).ln();
    samples
        .par_iter()
        .map(|t| {
            let bound = env.log_bound(family, t);
            evals.iter().filter(|e| e.log_density(t) > bound + slack).count()
        })
        .sum()
}
