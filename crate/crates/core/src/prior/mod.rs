//! Hyperparameter regions and prior-ratio families `f_h = nu_h / nu_{h1}`.
//!
//! Every family is an exponential family in a (possibly non-canonical)
//! parameterisation `h`:
//!
//! ```text
//! log nu_h(theta) = omega(h) . T(theta) - A(omega(h)) + log base(theta)
//! ```
//!
//! The base measure cancels in every ratio, so a family is described by the
//! canonical map `omega`, its first and second derivatives, and the log
//! normaliser `A` as a function of the canonical coordinates. Derivatives in
//! `h` follow from the chain rule.

mod envelope;
mod families;

pub use envelope::{check_envelope, envelope_corners, EnvelopeSet};
pub use families::{build_family, DirichletLda, NormalHier, VsZellner, FAMILY_NAMES};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point in hyperparameter space.
pub type HyperPoint = Vec<f64>;

/// Sufficient statistic `T(theta)` of a draw.
pub type SuffStat = [f64];

/// Compact axis-aligned hyperparameter region.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperRect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HyperRect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidRegion(format!(
                "bounds must be non-empty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidRegion(format!("axis {i} has a non-finite bound")));
            }
            if l >= u {
                return Err(Error::InvalidRegion(format!("axis {i}: lower {l} >= upper {u}")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, h: &[f64]) -> bool {
        h.len() == self.dim()
            && h.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (l, u))| *x >= *l && *x <= *u)
    }

    /// Project `h` onto the rectangle.
    pub fn clamp(&self, h: &mut [f64]) {
        for (x, (l, u)) in h.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*l, *u);
        }
    }

    /// Whether `h` lies within `tol` (relative to the side length) of a face.
    pub fn on_boundary(&self, h: &[f64], tol: f64) -> bool {
        h.iter().zip(self.lower.iter().zip(&self.upper)).any(|(x, (l, u))| {
            let w = u - l;
            (x - l) <= tol * w || (u - x) <= tol * w
        })
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Regular grid with `points[i]` points on axis `i`, last axis fastest.
    pub fn grid(&self, points: &[usize]) -> Vec<HyperPoint> {
        assert_eq!(points.len(), self.dim());
        let axes: Vec<Vec<f64>> =
            (0..self.dim()).map(|i| axis_points(self.lower[i], self.upper[i], points[i])).collect();
        cartesian(&axes)
    }

    /// Regular grid with the same number of points on every axis.
    pub fn uniform_grid(&self, per_axis: usize) -> Vec<HyperPoint> {
        self.grid(&vec![per_axis; self.dim()])
    }

    /// The `2^k` vertices, in binary order (bit `i` set selects the upper bound on axis `i`).
    pub fn corners(&self) -> Vec<HyperPoint> {
        let k = self.dim();
        (0..1usize << k)
            .map(|mask| (0..k).map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] }).collect())
            .collect()
    }
}

pub(crate) fn axis_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|j| if j == n - 1 { hi } else { lo + (hi - lo) * j as f64 / (n - 1) as f64 }).collect(),
    }
}

pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<HyperPoint> {
    let mut out: Vec<HyperPoint> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &x in axis {
                let mut p = prefix.clone();
                p.push(x);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// An exponential family of priors indexed by `h`.
pub trait PriorFamily: Send + Sync + std::fmt::Debug {
    /// Registry name.
    fn name(&self) -> &str;

    /// Hyperparameter dimension `k`.
    fn dim(&self) -> usize;

    /// Dimension of the sufficient statistic.
    fn stat_dim(&self) -> usize;

    /// Rejects points outside the family's parameter space.
    fn validate(&self, h: &[f64]) -> Result<()>;

    /// Canonical coordinates `omega(h)`.
    fn canonical(&self, h: &[f64]) -> Vec<f64>;

    /// `d omega / d h`, shape `stat_dim x k`.
    fn canonical_jacobian(&self, h: &[f64]) -> DMatrix<f64>;

    /// Second derivatives of each canonical coordinate, `stat_dim` matrices of shape `k x k`.
    fn canonical_hessians(&self, h: &[f64]) -> Vec<DMatrix<f64>>;

    /// Log normaliser `A(omega)`.
    fn log_normalizer_canonical(&self, omega: &[f64]) -> f64;

    fn log_normalizer_canonical_grad(&self, omega: &[f64]) -> DVector<f64>;

    fn log_normalizer_canonical_hess(&self, omega: &[f64]) -> DMatrix<f64>;

    /// Whether `omega` lies in the natural parameter space.
    fn canonical_admissible(&self, _omega: &[f64]) -> bool {
        true
    }

    /// `A(omega(h))`.
    fn log_normalizer(&self, h: &[f64]) -> f64 {
        self.log_normalizer_canonical(&self.canonical(h))
    }

    /// `grad_h A(omega(h))`.
    fn log_normalizer_grad(&self, h: &[f64]) -> DVector<f64> {
        let omega = self.canonical(h);
        self.canonical_jacobian(h).transpose() * self.log_normalizer_canonical_grad(&omega)
    }

    /// `hess_h A(omega(h))`.
    fn log_normalizer_hess(&self, h: &[f64]) -> DMatrix<f64> {
        let omega = self.canonical(h);
        let jac = self.canonical_jacobian(h);
        let grad = self.log_normalizer_canonical_grad(&omega);
        let mut hess = jac.transpose() * self.log_normalizer_canonical_hess(&omega) * &jac;
        for (p, hp) in self.canonical_hessians(h).iter().enumerate() {
            hess += hp * grad[p];
        }
        hess
    }

    /// Unnormalised log density, `omega(h) . T - A(h)`.
    fn log_density(&self, h: &[f64], t: &SuffStat) -> f64 {
        let omega = self.canonical(h);
        dot(&omega, t) - self.log_normalizer_canonical(&omega)
    }

    /// Precomputes everything needed to evaluate `log nu_h` at many draws.
    fn at(&self, h: &[f64]) -> PriorAt {
        let omega = self.canonical(h);
        let log_norm = self.log_normalizer_canonical(&omega);
        PriorAt { omega, log_norm }
    }

    /// Precomputes first and second `h`-derivatives of `log nu_h`.
    fn derivatives_at(&self, h: &[f64]) -> PriorDerivatives {
        PriorDerivatives {
            jacobian: self.canonical_jacobian(h),
            canonical_hessians: self.canonical_hessians(h),
            log_norm_grad: self.log_normalizer_grad(h),
            log_norm_hess: self.log_normalizer_hess(h),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log nu_h` with `h` fixed, ready for evaluation at many statistics.
#[derive(Debug, Clone)]
pub struct PriorAt {
    pub omega: Vec<f64>,
    pub log_norm: f64,
}

impl PriorAt {
    #[inline]
    pub fn log_density(&self, t: &SuffStat) -> f64 {
        dot(&self.omega, t) - self.log_norm
    }
}

/// Derivatives of `log nu_h` in `h` at a fixed `h`.
#[derive(Debug, Clone)]
pub struct PriorDerivatives {
    pub jacobian: DMatrix<f64>,
    pub canonical_hessians: Vec<DMatrix<f64>>,
    pub log_norm_grad: DVector<f64>,
    pub log_norm_hess: DMatrix<f64>,
}

impl PriorDerivatives {
    /// `grad_h log f_h = J^T T - grad_h A`.
    pub fn score(&self, t: &SuffStat) -> DVector<f64> {
        let tv = DVector::from_column_slice(t);
        self.jacobian.transpose() * tv - &self.log_norm_grad
    }

    /// `hess_h log f_h = sum_p T_p hess omega_p - hess_h A`.
    pub fn score_jacobian(&self, t: &SuffStat) -> DMatrix<f64> {
        let mut out = -self.log_norm_hess.clone();
        for (p, hp) in self.canonical_hessians.iter().enumerate() {
            if t[p] != 0.0 {
                out += hp * t[p];
            }
        }
        out
    }
}

/// `log f_h(theta) = log nu_h(theta) - log nu_{h1}(theta)`.
pub fn log_ratio(family: &dyn PriorFamily, h: &[f64], h1: &[f64], t: &SuffStat) -> Result<f64> {
    let v = family.log_density(h, t) - family.log_density(h1, t);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("log prior ratio at h={h:?} (h1={h1:?})")))
    }
}

/// `grad_h f_h(theta)`, computed as `f_h * grad_h log f_h`.
pub fn ratio_grad(family: &dyn PriorFamily, h: &[f64], h1: &[f64], t: &SuffStat) -> Result<DVector<f64>> {
    let f = log_ratio(family, h, h1, t)?.exp();
    Ok(family.derivatives_at(h).score(t) * f)
}

/// `hess_h f_h(theta) = f_h (u u^T + hess log f_h)` with `u = grad_h log f_h`.
pub fn ratio_hess(family: &dyn PriorFamily, h: &[f64], h1: &[f64], t: &SuffStat) -> Result<DMatrix<f64>> {
    let f = log_ratio(family, h, h1, t)?.exp();
    let d = family.derivatives_at(h);
    let u = d.score(t);
    let mut hess = &u * u.transpose() + d.score_jacobian(t);
    hess *= f;
    // exact symmetry
    let sym = (&hess + hess.transpose()) * 0.5;
    Ok(sym)
}

fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// Central finite-difference gradient of `f_h`, for families without analytic derivatives.
pub fn ratio_grad_fd(family: &dyn PriorFamily, h: &[f64], h1: &[f64], t: &SuffStat) -> Result<DVector<f64>> {
    let k = h.len();
    let mut out = DVector::zeros(k);
    let mut hp = h.to_vec();
    for i in 0..k {
        let step = fd_step(h[i]);
        hp[i] = h[i] + step;
        let up = log_ratio(family, &hp, h1, t)?.exp();
        hp[i] = h[i] - step;
        let down = log_ratio(family, &hp, h1, t)?.exp();
        hp[i] = h[i];
        out[i] = (up - down) / (2.0 * step);
    }
    Ok(out)
}

/// Central finite-difference Hessian of `f_h`, differencing [`ratio_grad_fd`].
pub fn ratio_hess_fd(family: &dyn PriorFamily, h: &[f64], h1: &[f64], t: &SuffStat) -> Result<DMatrix<f64>> {
    let k = h.len();
    let mut out = DMatrix::zeros(k, k);
    let mut hp = h.to_vec();
    for j in 0..k {
        let step = 1e-4 * (1.0 + h[j].abs());
        hp[j] = h[j] + step;
        let up = ratio_grad_fd(family, &hp, h1, t)?;
        hp[j] = h[j] - step;
        let down = ratio_grad_fd(family, &hp, h1, t)?;
        hp[j] = h[j];
        out.set_column(j, &((up - down) / (2.0 * step)));
    }
    Ok((&out + out.transpose()) * 0.5)
}
