//! Maximisation of `B_n` and inference for its argmax.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{tour_sums, TourIndex, TourSums};
use crate::error::{Error, Result};
use crate::estimators::Reweighter;
use crate::numeric::{chi2_quantile, logsumexp, stream_rng};
use crate::optimize::nelder_mead_max;
use crate::prior::{HyperPoint, HyperRect};

#[derive(Debug, Clone)]
pub struct ArgmaxOptions {
    pub grid_per_axis: usize,
    pub tol: f64,
    pub max_evals: usize,
    /// Polish the simplex result with Newton steps on `log B_n`.
    pub newton: bool,
    /// Extra random starts for the multimodality diagnostic.
    pub multistart: usize,
    pub seed: u64,
}

impl Default for ArgmaxOptions {
    fn default() -> Self {
        Self { grid_per_axis: 21, tol: 1e-6, max_evals: 4000, newton: true, multistart: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArgmaxResult {
    pub h: HyperPoint,
    pub log_value: f64,
    pub boundary: bool,
    /// Largest distance from `h` among multistart optima.
    pub multistart_spread: f64,
    /// A multistart optimum beat `h` by more than `1e-9` in `log B_n`.
    pub multimodal: bool,
}

/// Grid search, then simplex refinement from the best grid point.
///
/// Ties on the grid go to the lowest row-major index.
pub fn maximize_function<F>(f: F, rect: &HyperRect, opts: &ArgmaxOptions) -> ArgmaxResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let per_axis = opts.grid_per_axis.max(2);
    let grid = rect.uniform_grid(per_axis);
    let values: Vec<f64> = grid.par_iter().map(|h| f(h)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    let step: Vec<f64> = rect.widths().iter().map(|w| w / (per_axis - 1) as f64).collect();
    let (mut h, mut value) = nelder_mead_max(&f, &grid[best], &step, rect, opts.tol * 0.1, opts.max_evals);
    if values[best] > value {
        h = grid[best].clone();
        value = values[best];
    }
    // Restart once from the optimum to escape a collapsed simplex.
    let (h2, v2) = nelder_mead_max(
        &f,
        &h,
        &step.iter().map(|s| s * 0.1).collect::<Vec<_>>(),
        rect,
        opts.tol * 0.1,
        opts.max_evals,
    );
    if v2 > value {
        h = h2;
        value = v2;
    }
    let mut spread: f64 = 0.0;
    let mut multimodal = false;
    if opts.multistart > 0 {
        let mut rng = stream_rng(opts.seed, "multistart");
        let starts: Vec<Vec<f64>> = (0..opts.multistart)
            .map(|_| {
                rect.lower().iter().zip(rect.upper()).map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
            })
            .collect();
        let results: Vec<(Vec<f64>, f64)> =
            starts.par_iter().map(|s| nelder_mead_max(&f, s, &step, rect, opts.tol * 0.1, opts.max_evals)).collect();
        for (hs, vs) in results {
            let d = hs.iter().zip(&h).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            spread = spread.max(d);
            if vs > value + 1e-9 {
                multimodal = true;
            }
        }
    }
    let tol: Vec<f64> = rect.widths().iter().map(|w| opts.tol.max(1e-9 * w)).collect();
    let boundary = h
        .iter()
        .enumerate()
        .any(|(i, x)| (x - rect.lower()[i]).abs() <= tol[i] || (rect.upper()[i] - x).abs() <= tol[i]);
    ArgmaxResult { h, log_value: value, boundary, multistart_spread: spread, multimodal }
}

/// `log B_n(h)`, or `-inf` outside the family's domain.
pub fn log_b(rw: &Reweighter<'_>, h: &[f64]) -> f64 {
    match rw.log_f(h) {
        Ok(lf) => logsumexp(lf.iter().copied()) - (lf.len() as f64).ln(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// `B_n(h)` with its gradient and Hessian in `h`.
pub fn surface_derivatives(rw: &Reweighter<'_>, h: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let lf = rw.log_f(h)?;
    let d = rw.family().derivatives_at(h);
    let k = h.len();
    let n = lf.len() as f64;
    let mut b = 0.0;
    let mut grad = DVector::zeros(k);
    let mut hess = DMatrix::zeros(k, k);
    for (l, i) in lf.iter().zip(rw.range()) {
        let f = l.exp();
        let t = rw.trace().stat(i);
        let u = d.score(t);
        b += f;
        hess += (&u * u.transpose() + d.score_jacobian(t)) * f;
        grad += u * f;
    }
    let hess = (&hess + hess.transpose()) * (0.5 / n);
    Ok((b / n, grad / n, hess))
}

fn newton_polish(rw: &Reweighter<'_>, rect: &HyperRect, mut h: Vec<f64>, mut value: f64) -> (Vec<f64>, f64) {
    for _ in 0..10 {
        let Ok((b, g, hs)) = surface_derivatives(rw, &h) else { break };
        // Derivatives of log B.
        let gl = &g / b;
        let hl = &hs / b - &gl * gl.transpose();
        let Some(chol) = (-hl.clone()).cholesky() else { break };
        let delta = chol.solve(&gl);
        let mut next: Vec<f64> = h.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
        rect.clamp(&mut next);
        let v = log_b(rw, &next);
        if !(v > value) {
            break;
        }
        let moved = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h = next;
        value = v;
        if moved < 1e-12 {
            break;
        }
    }
    (h, value)
}

/// Argmax of `log B_n` over `rect`.
pub fn maximize_surface(rw: &Reweighter<'_>, rect: &HyperRect, opts: &ArgmaxOptions) -> Result<ArgmaxResult> {
    if rw.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if rect.dim() != rw.family().dim() {
        return Err(Error::InvalidArgument("rect dimension does not match the family".into()));
    }
    let mut res = maximize_function(|h| log_b(rw, h), rect, opts);
    if opts.newton && !res.boundary {
        let (h, v) = newton_polish(rw, rect, res.h.clone(), res.log_value);
        res.h = h;
        res.log_value = v;
    }
    Ok(res)
}

fn symmetric(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetric(m)).eigenvalues;
    let max = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let min = eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest condition number accepted before a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

fn require_tours(ts: &TourSums) -> Result<()> {
    if ts.count() < 2 {
        return Err(Error::TooFewTours { needed: 2, found: ts.count() });
    }
    Ok(())
}

/// `J_n(h) = sum_r hessS_r / sum_r N_r`, the Hessian of `B_n` at `h`.
pub fn hessian_jn(ts: &TourSums) -> Result<DMatrix<f64>> {
    let hess =
        ts.hess.as_ref().ok_or_else(|| Error::InvalidArgument("tour sums were computed without derivatives".into()))?;
    let k = ts.h.len();
    let total: f64 = ts.lengths.iter().sum();
    let j = symmetric(&(hess.iter().fold(DMatrix::zeros(k, k), |acc, m| acc + m) / total));
    let condition = condition_number(&j);
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(j)
}

/// `tau_n^2(h) = (1 / (R Nbar^2)) sum_r (gradS_r - N_r gradSbar / Nbar)(...)'`.
pub fn tau_n_sq(ts: &TourSums) -> Result<DMatrix<f64>> {
    require_tours(ts)?;
    let grad =
        ts.grad.as_ref().ok_or_else(|| Error::InvalidArgument("tour sums were computed without derivatives".into()))?;
    let k = ts.h.len();
    let r = ts.count() as f64;
    let n_bar = ts.lengths.iter().sum::<f64>() / r;
    let g_bar = grad.iter().fold(DVector::zeros(k), |acc, g| acc + g) / r;
    let mut out = DMatrix::zeros(k, k);
    for (g, n) in grad.iter().zip(&ts.lengths) {
        let d = g - &g_bar * (n / n_bar);
        out += &d * d.transpose();
    }
    Ok(symmetric(&(out / (r * n_bar * n_bar))))
}

/// Sandwich `J^-1 tau^2 J^-1`.
pub fn v_n_sq(j: &DMatrix<f64>, tau_sq: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(j);
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let inv = symmetric(j).try_inverse().ok_or(Error::Singular { condition })?;
    Ok(symmetric(&(&inv * tau_sq * &inv)))
}

/// `{h : scale (h - center)' V^-1 (h - center) <= threshold}`.
#[derive(Debug, Clone, Serialize)]
pub struct Ellipse {
    pub center: HyperPoint,
    /// `V / scale`, the covariance whose level set is drawn.
    pub shape: Vec<Vec<f64>>,
    pub threshold: f64,
    /// 128 points on the boundary of the projection onto the first two coordinates
    /// (two endpoints when `k = 1`).
    pub boundary: Vec<HyperPoint>,
}

impl Ellipse {
    /// Whether `h` lies in the region. Degenerate directions only admit the centre.
    pub fn contains(&self, h: &[f64]) -> bool {
        let k = self.center.len();
        let shape = DMatrix::from_fn(k, k, |i, j| self.shape[i][j]);
        let d = DVector::from_fn(k, |i, _| h[i] - self.center[i]);
        let eig = SymmetricEigen::new(shape);
        let mut q = 0.0;
        for (i, lambda) in eig.eigenvalues.iter().enumerate() {
            let proj = eig.eigenvectors.column(i).dot(&d);
            if *lambda <= 0.0 {
                if proj.abs() > 1e-12 {
                    return false;
                }
            } else {
                q += proj * proj / lambda;
            }
        }
        q <= self.threshold
    }
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetric(m));
    let max = eig.eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * max.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| e.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Confidence region for `h_0` from `sqrt(scale) (h_n - h_0) ~ N(0, V)`.
pub fn confidence_ellipse(center: &[f64], v: &DMatrix<f64>, scale: f64, alpha: f64) -> Result<Ellipse> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    let k = center.len();
    if v.nrows() != k || v.ncols() != k {
        return Err(Error::InvalidArgument("covariance has the wrong size".into()));
    }
    let shape = symmetric(v) / scale;
    psd_sqrt(&shape)?;
    let threshold = chi2_quantile(k, 1.0 - alpha);
    let radius = threshold.sqrt();
    let boundary = if k == 1 {
        let half = radius * shape[(0, 0)].max(0.0).sqrt();
        vec![vec![center[0] - half], vec![center[0] + half]]
    } else {
        let sub = shape.view((0, 0), (2, 2)).into_owned();
        let root = psd_sqrt(&sub)?;
        (0..128)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / 128.0;
                let p = &root * DVector::from_column_slice(&[phi.cos(), phi.sin()]) * radius;
                let mut h = center.to_vec();
                h[0] += p[0];
                h[1] += p[1];
                h
            })
            .collect()
    };
    Ok(Ellipse {
        center: center.to_vec(),
        shape: (0..k).map(|i| (0..k).map(|j| shape[(i, j)]).collect()).collect(),
        threshold,
        boundary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchArgmax {
    /// `(1/M) sum_m (n/M) (h^[m] - h_n)(h^[m] - h_n)'`.
    pub cov: Vec<Vec<f64>>,
    pub batch_argmaxes: Vec<HyperPoint>,
    pub boundary: Vec<bool>,
    pub batches: usize,
    pub batch_len: usize,
}

impl BatchArgmax {
    pub fn any_boundary(&self) -> bool {
        self.boundary.iter().any(|b| *b)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let k = self.cov.len();
        DMatrix::from_fn(k, k, |i, j| self.cov[i][j])
    }
}

/// Batch-means covariance of the argmax, centred at the full-run argmax `h_n`.
pub fn batch_argmax_cov(
    rw: &Reweighter<'_>,
    rect: &HyperRect,
    h_n: &[f64],
    batches: usize,
    opts: &ArgmaxOptions,
) -> Result<BatchArgmax> {
    let n = rw.len();
    if batches < 2 {
        return Err(Error::InvalidArgument("need at least two batches".into()));
    }
    if n < 2 * batches {
        return Err(Error::InvalidArgument(format!("{n} draws cannot fill {batches} batches of two")));
    }
    let b = n / batches;
    let start = rw.range().start;
    let inner = ArgmaxOptions { multistart: 0, ..opts.clone() };
    let results = (0..batches)
        .into_par_iter()
        .map(|m| maximize_surface(&rw.restrict(start + m * b..start + (m + 1) * b), rect, &inner))
        .collect::<Result<Vec<_>>>()?;
    let k = h_n.len();
    let mut cov = DMatrix::zeros(k, k);
    for r in &results {
        let d = DVector::from_fn(k, |i, _| r.h[i] - h_n[i]);
        cov += &d * d.transpose();
    }
    let cov = cov * (b as f64 / batches as f64);
    Ok(BatchArgmax {
        cov: (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect(),
        batch_argmaxes: results.iter().map(|r| r.h.clone()).collect(),
        boundary: results.iter().map(|r| r.boundary).collect(),
        batches,
        batch_len: b,
    })
}

/// Which variance estimate fed the ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    Regeneration,
    Batch,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ArgmaxReport {
    pub h_n: HyperPoint,
    pub log_b_n: f64,
    #[serde(rename = "J_n")]
    pub j_n: Option<Vec<Vec<f64>>>,
    pub tau_n_sq: Option<Vec<Vec<f64>>>,
    pub v_n_sq: Option<Vec<Vec<f64>>>,
    pub batch_cov: Option<Vec<Vec<f64>>>,
    /// Number of batches behind `batch_cov`.
    #[serde(rename = "M")]
    pub batches: Option<usize>,
    #[serde(rename = "R")]
    pub r: usize,
    pub n: usize,
    #[serde(rename = "E_N1_hat")]
    pub e_n1_hat: Option<f64>,
    pub alpha: f64,
    pub chi2_threshold: f64,
    pub boundary_flag: bool,
    /// Some batch argmax sat on the boundary of the rect.
    pub batch_boundary_flag: bool,
    pub multimodal_flag: bool,
    pub method: VarianceMethod,
    pub ellipse: Option<Ellipse>,
}

/// Full argmax pipeline: maximise, then either the regenerative sandwich
/// (when `tours` is given) or the batch covariance with `batches` batches.
pub fn argmax_report(
    rw: &Reweighter<'_>,
    tours: Option<&TourIndex>,
    rect: &HyperRect,
    alpha: f64,
    batches: Option<usize>,
    opts: &ArgmaxOptions,
) -> Result<ArgmaxReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let k = rect.dim();
    let chi2_threshold = chi2_quantile(k, 1.0 - alpha);
    match tours {
        Some(tours) => {
            let rw_used = rw.restrict(tours.used());
            let best = maximize_surface(&rw_used, rect, opts)?;
            let ts = tour_sums(rw, tours, &best.h, &[], true)?;
            let j = hessian_jn(&ts);
            let tau = tau_n_sq(&ts)?;
            let (v, ellipse) = match &j {
                Ok(j) => {
                    let v = v_n_sq(j, &tau)?;
                    let e = confidence_ellipse(&best.h, &v, tours.count() as f64, alpha)?;
                    (Some(rows(&v)), Some(e))
                }
                Err(_) => (None, None),
            };
            Ok(ArgmaxReport {
                h_n: best.h.clone(),
                log_b_n: best.log_value,
                j_n: j.as_ref().ok().map(rows),
                tau_n_sq: Some(rows(&tau)),
                v_n_sq: v,
                batch_cov: None,
                batches: None,
                r: tours.count(),
                n: tours.used_len(),
                e_n1_hat: Some(tours.mean_length()),
                alpha,
                chi2_threshold,
                boundary_flag: best.boundary,
                batch_boundary_flag: false,
                multimodal_flag: best.multimodal,
                method: VarianceMethod::Regeneration,
                ellipse,
            })
        }
        None => {
            let best = maximize_surface(rw, rect, opts)?;
            let n = rw.len();
            let m = batches.unwrap_or_else(|| crate::numeric::default_batches(n));
            let batch = batch_argmax_cov(rw, rect, &best.h, m, opts)?;
            let ellipse = confidence_ellipse(&best.h, &batch.matrix(), n as f64, alpha).ok();
            Ok(ArgmaxReport {
                h_n: best.h.clone(),
                log_b_n: best.log_value,
                j_n: None,
                tau_n_sq: None,
                v_n_sq: None,
                batch_cov: Some(batch.cov.clone()),
                batches: Some(m),
                r: 0,
                n,
                e_n1_hat: None,
                alpha,
                chi2_threshold,
                boundary_flag: best.boundary,
                batch_boundary_flag: batch.any_boundary(),
                multimodal_flag: best.multimodal,
                method: VarianceMethod::Batch,
                ellipse,
            })
        }
    }
}
