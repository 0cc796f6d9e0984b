//! Simultaneous confidence bands over a grid from batch sup statistics.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::Reweighter;
use crate::prior::HyperPoint;

/// Shortest batch accepted.
pub const MIN_BATCH_LEN: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct BandReport {
    /// Functional name, or `None` for a band on `B_n`.
    pub functional: Option<String>,
    pub grid: Vec<HyperPoint>,
    pub center: Vec<f64>,
    pub half_width: f64,
    #[serde(rename = "M")]
    pub batches: usize,
    pub batch_len: usize,
    /// Draws used, `M * batch_len`.
    pub n: usize,
    pub alpha: f64,
    /// Index (1-based) of the order statistic giving the half-width.
    pub order_index: usize,
    /// `sqrt(n / M) max_h |est_m(h) - est(h)|`, in batch order.
    pub sup_stats: Vec<f64>,
}

impl BandReport {
    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().map(|c| c - self.half_width).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().map(|c| c + self.half_width).collect()
    }

    /// Whether `truth` lies inside the band at every grid point.
    pub fn covers(&self, truth: &[f64]) -> bool {
        truth.iter().zip(&self.center).all(|(t, c)| (t - c).abs() <= self.half_width)
    }
}

/// Per-batch and full estimates at one grid point.
fn batch_estimates(
    rw: &Reweighter<'_>,
    g: Option<usize>,
    h: &[f64],
    batches: usize,
    b: usize,
) -> Result<(f64, Vec<f64>)> {
    let lf = rw.log_f(h)?;
    let max = lf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = rw.range().start;
    let mut num = vec![0.0; batches];
    let mut den = vec![0.0; batches];
    for (j, l) in lf.iter().enumerate() {
        let m = j / b;
        let e = (l - max).exp();
        den[m] += e;
        num[m] += match g {
            Some(g) => rw.trace().value(start + j, g) * e,
            None => e,
        };
    }
    let est = |num: f64, den: f64, len: f64| match g {
        Some(_) => num / den,
        None => (num / len).ln() + max,
    };
    let total_num: f64 = num.iter().sum();
    let total_den: f64 = den.iter().sum();
    let center = est(total_num, total_den, (batches * b) as f64);
    let per: Vec<f64> = num.iter().zip(&den).map(|(n, d)| est(*n, *d, b as f64)).collect();
    if g.is_none() {
        return Ok((center.exp(), per.into_iter().map(f64::exp).collect()));
    }
    Ok((center, per))
}

/// Band for `I_g` (or for `B_n` when `g_name` is `None`) with the same
/// half-width at every grid point.
///
/// The trace is cut into `batches` consecutive batches of `floor(n / M)`
/// draws; any remainder is dropped and the centre uses the retained draws.
pub fn global_band(
    rw: &Reweighter<'_>,
    g_name: Option<&str>,
    grid: &[HyperPoint],
    batches: usize,
    alpha: f64,
) -> Result<BandReport> {
    if batches < 2 {
        return Err(Error::InvalidArgument("a band needs at least two batches".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let b = rw.len() / batches;
    if b < MIN_BATCH_LEN {
        return Err(Error::InvalidArgument(format!(
            "{} draws give batches of {b}; need at least {MIN_BATCH_LEN}",
            rw.len()
        )));
    }
    let g = g_name.map(|n| rw.trace().functional_index(n)).transpose()?;
    let used = rw.restrict(rw.range().start..rw.range().start + batches * b);
    let points = grid.par_iter().map(|h| batch_estimates(&used, g, h, batches, b)).collect::<Result<Vec<_>>>()?;
    let scale = (b as f64).sqrt();
    let sup_stats: Vec<f64> =
        (0..batches).map(|m| points.iter().map(|(c, per)| scale * (per[m] - c).abs()).fold(0.0, f64::max)).collect();
    let mut sorted = sup_stats.clone();
    sorted.sort_by(f64::total_cmp);
    let order_index = ((1.0 - alpha) * batches as f64 - 1e-9).ceil().max(1.0) as usize;
    let n = batches * b;
    let half_width = sorted[order_index.min(batches) - 1] / (n as f64).sqrt();
    Ok(BandReport {
        functional: g_name.map(str::to_string),
        grid: grid.to_vec(),
        center: points.iter().map(|(c, _)| *c).collect(),
        half_width,
        batches,
        batch_len: b,
        n,
        alpha,
        order_index,
        sup_stats,
    })
}
