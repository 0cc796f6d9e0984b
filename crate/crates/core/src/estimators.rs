//! Reweighted surface estimates and their standard errors.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ChainTrace, Reference, TourIndex, TourSums};
use crate::error::{Error, Result};
use crate::numeric::{batch_means_se, default_batches, logsumexp};
use crate::prior::{HyperPoint, PriorFamily};
use crate::tempering::st_log_denominators;

/// Grid points whose effective sample size falls below this are flagged.
pub const ESS_RELIABLE: f64 = 50.0;

/// Evaluates `log f_h` for the draws of a trace.
///
/// The per-draw log density of the chain's reference distribution is
/// computed once; for a serial-tempering trace it is the mixture
/// denominator.
#[derive(Clone)]
pub struct Reweighter<'a> {
    trace: &'a ChainTrace,
    family: &'a dyn PriorFamily,
    log_den: Arc<Vec<f64>>,
    range: Range<usize>,
}

impl<'a> Reweighter<'a> {
    pub fn new(trace: &'a ChainTrace, family: &'a dyn PriorFamily) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if trace.stat_dim() != family.stat_dim() {
            return Err(Error::InvalidArgument(format!(
                "trace has {} statistics but family {} expects {}",
                trace.stat_dim(),
                family.name(),
                family.stat_dim()
            )));
        }
        if trace.meta.reference.dim() != family.dim() {
            return Err(Error::InvalidArgument("reference hyperparameter has the wrong dimension".into()));
        }
        let log_den = match &trace.meta.reference {
            Reference::Single { h1 } => {
                family.validate(h1)?;
                let at = family.at(h1);
                (0..trace.len()).map(|i| at.log_density(trace.stat(i))).collect()
            }
            Reference::Mixture { anchors, log_zeta } => st_log_denominators(family, anchors, log_zeta, trace)?,
        };
        Ok(Self { trace, family, log_den: Arc::new(log_den), range: 0..trace.len() })
    }

    pub fn trace(&self) -> &'a ChainTrace {
        self.trace
    }

    pub fn family(&self) -> &'a dyn PriorFamily {
        self.family
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    /// The same reweighter restricted to `range` (relative to the full trace).
    pub fn restrict(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.trace.len() && range.start <= range.end);
        Self { range, ..self.clone() }
    }

    /// `log f_h` for every draw of the full trace.
    pub fn log_f_full(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.log_f_over(h, 0..self.trace.len())
    }

    /// `log f_h` for the draws in this reweighter's range.
    pub fn log_f(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.log_f_over(h, self.range.clone())
    }

    fn log_f_over(&self, h: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
        self.family.validate(h)?;
        let at = self.family.at(h);
        let out: Vec<f64> = range.map(|i| at.log_density(self.trace.stat(i)) - self.log_den[i]).collect();
        if out.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite(format!("log prior ratio at h = {h:?}")));
        }
        Ok(out)
    }
}

/// Normalised-weight summary of one `log f_h` vector.
struct Weights {
    log_sum: f64,
    scaled: Vec<f64>,
    scaled_sum: f64,
}

impl Weights {
    fn new(log_f: &[f64]) -> Self {
        let max = log_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = log_f.iter().map(|l| (l - max).exp()).collect();
        let scaled_sum: f64 = scaled.iter().sum();
        Self { log_sum: max + scaled_sum.ln(), scaled, scaled_sum }
    }

    fn b(&self, n: usize) -> f64 {
        (self.log_sum - (n as f64).ln()).exp()
    }

    fn ess(&self) -> f64 {
        let sq: f64 = self.scaled.iter().map(|e| e * e).sum();
        self.scaled_sum * self.scaled_sum / sq
    }

    fn mean_of(&self, g: impl Iterator<Item = f64>) -> f64 {
        g.zip(&self.scaled).map(|(g, e)| g * e).sum::<f64>() / self.scaled_sum
    }
}

/// `B_n(h) = (1/n) sum f_h(theta_i)`.
pub fn estimate_b(rw: &Reweighter<'_>, h: &[f64]) -> Result<f64> {
    let lf = rw.log_f(h)?;
    Ok((logsumexp(lf.iter().copied()) - (lf.len() as f64).ln()).exp())
}

/// Normalised importance weights `w_i^(h)`.
pub fn weights(rw: &Reweighter<'_>, h: &[f64]) -> Result<Vec<f64>> {
    let w = Weights::new(&rw.log_f(h)?);
    Ok(w.scaled.iter().map(|e| e / w.scaled_sum).collect())
}

/// `I_g(h)` estimated as `sum g_i w_i^(h)`.
pub fn estimate_i(rw: &Reweighter<'_>, g_name: &str, h: &[f64]) -> Result<f64> {
    let g = rw.trace().functional_index(g_name)?;
    let w = Weights::new(&rw.log_f(h)?);
    Ok(w.mean_of(rw.range().map(|i| rw.trace().value(i, g))))
}

/// Effective sample size `1 / sum w_i^2`.
pub fn ess(rw: &Reweighter<'_>, h: &[f64]) -> Result<f64> {
    Ok(Weights::new(&rw.log_f(h)?).ess())
}

/// Delta-method variance of `mean(num) / mean(den)`, divided by the number of pairs.
fn ratio_variance(num: &[f64], den: &[f64]) -> f64 {
    let r = num.len() as f64;
    let num_bar = num.iter().sum::<f64>() / r;
    let den_bar = den.iter().sum::<f64>() / r;
    let q = num_bar / den_bar;
    let resid_sq: f64 = num.iter().zip(den).map(|(a, b)| (a - q * b).powi(2)).sum::<f64>() / r;
    resid_sq / (den_bar * den_bar) / r
}

fn require_tours(ts: &TourSums) -> Result<()> {
    if ts.count() < 2 {
        return Err(Error::TooFewTours { needed: 2, found: ts.count() });
    }
    Ok(())
}

/// Tour-based standard error of `B_n(h)`.
pub fn pointwise_se_b(ts: &TourSums) -> Result<f64> {
    require_tours(ts)?;
    Ok(ratio_variance(&ts.s, &ts.lengths).sqrt())
}

/// Tour-based standard error of `I_g(h)`.
pub fn pointwise_se_i(ts: &TourSums, g_name: &str) -> Result<f64> {
    require_tours(ts)?;
    let j = ts.functional_index(g_name)?;
    Ok(ratio_variance(&ts.t[j], &ts.s).sqrt())
}

/// Plug-in covariance of the limit of `sqrt(R) (I_g(h') - I_g(h''))` at two points.
///
/// At `h' = h''` this is `R * pointwise_se_i^2`.
pub fn cov_i_pair(a: &TourSums, b: &TourSums, g_name: &str) -> Result<f64> {
    require_tours(a)?;
    if a.count() != b.count() || a.lengths != b.lengths {
        return Err(Error::InvalidArgument("tour sums come from different tours".into()));
    }
    let ja = a.functional_index(g_name)?;
    let jb = b.functional_index(g_name)?;
    let r = a.count() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / r;
    let (sa, sb) = (mean(&a.s), mean(&b.s));
    let ia = mean(&a.t[ja]) / sa;
    let ib = mean(&b.t[jb]) / sb;
    let cross: f64 = (0..a.count()).map(|k| (a.t[ja][k] - ia * a.s[k]) * (b.t[jb][k] - ib * b.s[k])).sum::<f64>() / r;
    Ok(cross / (sa * sb))
}

/// How standard errors were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMethod {
    Tours,
    Batch,
}

/// `B_n` over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceEstimate {
    pub grid: Vec<HyperPoint>,
    pub values: Vec<f64>,
    pub se: Vec<f64>,
    pub ess: Vec<f64>,
    pub unreliable: Vec<bool>,
    pub n: usize,
    /// Complete tours, zero in batching mode.
    pub r: usize,
    pub se_method: SeMethod,
}

/// `I_g` over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalEstimate {
    pub functional: String,
    pub grid: Vec<HyperPoint>,
    pub values: Vec<f64>,
    pub se: Vec<f64>,
    pub ess: Vec<f64>,
    pub unreliable: Vec<bool>,
    pub n: usize,
    pub r: usize,
    pub se_method: SeMethod,
}

/// Batch-means standard errors of `B_n(h)` and of `I_g(h)` for each functional.
fn batch_ses(rw: &Reweighter<'_>, lf: &[f64], w: &Weights, gs: &[usize]) -> (f64, Vec<f64>) {
    let batches = default_batches(lf.len()).max(2).min(lf.len());
    let f: Vec<f64> = lf.iter().map(|l| l.exp()).collect();
    let se_b = batch_means_se(&f, batches);
    let f_bar = f.iter().sum::<f64>() / f.len() as f64;
    let se_i = gs
        .iter()
        .map(|&g| {
            let vals: Vec<f64> = rw.range().map(|i| rw.trace().value(i, g)).collect();
            let i_hat = w.mean_of(vals.iter().copied());
            let z: Vec<f64> = vals.iter().zip(&f).map(|(g, f)| (g - i_hat) * f / f_bar).collect();
            batch_means_se(&z, batches)
        })
        .collect();
    (se_b, se_i)
}

struct PointEstimate {
    b: f64,
    se_b: f64,
    ess: f64,
    i: Vec<f64>,
    se_i: Vec<f64>,
}

fn estimate_point(rw: &Reweighter<'_>, tours: Option<&TourIndex>, h: &[f64], gs: &[usize]) -> Result<PointEstimate> {
    let lf = rw.log_f(h)?;
    let w = Weights::new(&lf);
    let b = w.b(lf.len());
    let ess = w.ess();
    let i: Vec<f64> = gs.iter().map(|&g| w.mean_of(rw.range().map(|i| rw.trace().value(i, g)))).collect();
    let (se_b, se_i) = match tours {
        Some(t) => {
            let names: Vec<&str> = gs.iter().map(|&g| rw.trace().functionals()[g].as_str()).collect();
            let ts = crate::chain::tour_sums(rw, t, h, &names, false)?;
            let se_i = names.iter().map(|g| pointwise_se_i(&ts, g)).collect::<Result<Vec<_>>>()?;
            (pointwise_se_b(&ts)?, se_i)
        }
        None => batch_ses(rw, &lf, &w, gs),
    };
    Ok(PointEstimate { b, se_b, ess, i, se_i })
}

/// Estimates `B_n` and `I_g` for each functional over `grid`, in parallel.
///
/// Tour-based standard errors are used when `tours` is given, batch means
/// otherwise. Surface values always use every draw of the reweighter's range.
pub fn estimate_surfaces(
    rw: &Reweighter<'_>,
    tours: Option<&TourIndex>,
    grid: &[HyperPoint],
    functionals: &[&str],
) -> Result<(SurfaceEstimate, Vec<FunctionalEstimate>)> {
    if tours.is_some() && rw.range() != (0..rw.trace().len()) {
        return Err(Error::InvalidArgument("tour-based errors need the full trace".into()));
    }
    let gs = functionals.iter().map(|g| rw.trace().functional_index(g)).collect::<Result<Vec<_>>>()?;
    let points = grid.par_iter().map(|h| estimate_point(rw, tours, h, &gs)).collect::<Result<Vec<_>>>()?;
    let n = tours.map_or(rw.len(), |t| t.used_len());
    let r = tours.map_or(0, |t| t.count());
    let se_method = if tours.is_some() { SeMethod::Tours } else { SeMethod::Batch };
    let ess: Vec<f64> = points.iter().map(|p| p.ess).collect();
    let unreliable: Vec<bool> = ess.iter().map(|e| *e < ESS_RELIABLE).collect();
    let surface = SurfaceEstimate {
        grid: grid.to_vec(),
        values: points.iter().map(|p| p.b).collect(),
        se: points.iter().map(|p| p.se_b).collect(),
        ess: ess.clone(),
        unreliable: unreliable.clone(),
        n,
        r,
        se_method,
    };
    let functionals = functionals
        .iter()
        .enumerate()
        .map(|(j, g)| FunctionalEstimate {
            functional: g.to_string(),
            grid: grid.to_vec(),
            values: points.iter().map(|p| p.i[j]).collect(),
            se: points.iter().map(|p| p.se_i[j]).collect(),
            ess: ess.clone(),
            unreliable: unreliable.clone(),
            n,
            r,
            se_method,
        })
        .collect();
    Ok((surface, functionals))
}
