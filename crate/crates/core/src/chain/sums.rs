use nalgebra::{DMatrix, DVector};

use super::TourIndex;
use crate::error::{Error, Result};
use crate::estimators::Reweighter;

/// Per-tour sums of `f_h`, `g f_h` and the h-derivatives of `f_h`.
#[derive(Debug, Clone)]
pub struct TourSums {
    pub h: Vec<f64>,
    /// Tour lengths `N_r`.
    pub lengths: Vec<f64>,
    /// `S_r = sum f_h` over tour `r`.
    pub s: Vec<f64>,
    pub functionals: Vec<String>,
    /// `t[j][r] = sum g_j f_h` over tour `r`.
    pub t: Vec<Vec<f64>>,
    pub grad: Option<Vec<DVector<f64>>>,
    pub hess: Option<Vec<DMatrix<f64>>>,
}

impl TourSums {
    pub fn count(&self) -> usize {
        self.s.len()
    }

    pub fn functional_index(&self, name: &str) -> Result<usize> {
        self.functionals.iter().position(|f| f == name).ok_or_else(|| Error::UnknownFunctional(name.to_string()))
    }

    /// Reorders tours; tour-based estimates must not change.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| order.iter().map(|&r| v[r]).collect::<Vec<_>>();
        Self {
            h: self.h.clone(),
            lengths: pick(&self.lengths),
            s: pick(&self.s),
            functionals: self.functionals.clone(),
            t: self.t.iter().map(pick).collect(),
            grad: self.grad.as_ref().map(|g| order.iter().map(|&r| g[r].clone()).collect()),
            hess: self.hess.as_ref().map(|g| order.iter().map(|&r| g[r].clone()).collect()),
        }
    }
}

/// Accumulates tour sums at `h`. Derivatives are computed when `derivatives` is set.
pub fn tour_sums(
    rw: &Reweighter<'_>,
    tours: &TourIndex,
    h: &[f64],
    functionals: &[&str],
    derivatives: bool,
) -> Result<TourSums> {
    let trace = rw.trace();
    let idx = functionals.iter().map(|g| trace.functional_index(g)).collect::<Result<Vec<_>>>()?;
    if tours.used().end > trace.len() {
        return Err(Error::InvalidArgument("tour index does not match trace".into()));
    }
    let log_f = rw.log_f_full(h)?;
    let deriv = derivatives.then(|| rw.family().derivatives_at(h));
    let k = h.len();
    let r_count = tours.count();
    let mut s = vec![0.0; r_count];
    let mut t = vec![vec![0.0; r_count]; idx.len()];
    let mut grad = derivatives.then(|| vec![DVector::zeros(k); r_count]);
    let mut hess = derivatives.then(|| vec![DMatrix::zeros(k, k); r_count]);
    for r in 0..r_count {
        for i in tours.tour(r) {
            let f = log_f[i].exp();
            s[r] += f;
            for (j, &g) in idx.iter().enumerate() {
                t[j][r] += trace.value(i, g) * f;
            }
            if let Some(d) = &deriv {
                let stat = trace.stat(i);
                let u = d.score(stat);
                let second = d.score_jacobian(stat);
                let hess_i = (&u * u.transpose() + second) * f;
                grad.as_mut().unwrap()[r] += &u * f;
                hess.as_mut().unwrap()[r] += hess_i;
            }
        }
    }
    if let Some(hs) = hess.as_mut() {
        for m in hs.iter_mut() {
            let sym = (&*m + m.transpose()) * 0.5;
            *m = sym;
        }
    }
    Ok(TourSums {
        h: h.to_vec(),
        lengths: tours.lengths().into_iter().map(|n| n as f64).collect(),
        s,
        functionals: functionals.iter().map(|g| g.to_string()).collect(),
        t,
        grad,
        hess,
    })
}
