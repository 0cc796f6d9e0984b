mod common;

use common::{dirichlet_stat, rel_err, Flat};
use ebsurf::numeric::stream_rng;
use ebsurf::prior::{
    check_envelope, envelope_corners, log_ratio, ratio_grad, ratio_grad_fd, ratio_hess, ratio_hess_fd, DirichletLda,
    NormalHier, VsZellner,
};
use ebsurf::{HyperRect, PriorFamily};
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

#[test]
fn hand_values() {
    let normal = NormalHier::new(1);
    let v = log_ratio(&normal, &[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).unwrap();
    assert!((v - 0.5).abs() < 1e-14);
    let dir = DirichletLda::new(1, 2, 1);
    let t = [2.0 * 0.5f64.ln(), 0.0];
    let v = log_ratio(&dir, &[2.0, 1.0], &[1.0, 1.0], &t).unwrap();
    assert!((v - 1.5f64.ln()).abs() < 1e-12);
    assert!((v - 0.405465).abs() < 1e-6);
}

#[test]
fn gradient_at_reference_is_the_score() {
    let dir = DirichletLda::new(2, 12, 6);
    let h1 = [0.7, 1.3];
    let t = dirichlet_stat(2, 12, 6, 1.0, 3);
    let g = ratio_grad(&dir, &h1, &h1, &t).unwrap();
    let d = dir.derivatives_at(&h1);
    let s = d.score(&t);
    assert_eq!(g, s);
    // Identity canonical map: Hessian is (T - grad A)(T - grad A)' - hess A.
    let hs = ratio_hess(&dir, &h1, &h1, &t).unwrap();
    let grad_a = dir.log_normalizer_grad(&h1);
    let u = nalgebra::DVector::from_column_slice(&t) - grad_a;
    let expect = &u * u.transpose() - dir.log_normalizer_hess(&h1);
    assert!((hs - expect).abs().max() < 1e-9);
}

/// Central differences with one Richardson step, column `j` = derivative along `h[j]`.
fn richardson_jacobian(h: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let central = |j: usize, s: f64| -> Vec<f64> {
        let mut x = h.to_vec();
        x[j] = h[j] + s;
        let up = f(&x);
        x[j] = h[j] - s;
        let down = f(&x);
        up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * s)).collect()
    };
    let mut out = Vec::new();
    for j in 0..h.len() {
        let s = 1e-4 * (1.0 + h[j].abs());
        let d1 = central(j, s);
        let d2 = central(j, s / 2.0);
        out.extend(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0));
    }
    out
}

fn check_family(family: &dyn PriorFamily, h: &[f64], h1: &[f64], h0: &[f64], t: &[f64]) -> Result<(), TestCaseError> {
    prop_assert_eq!(log_ratio(family, h1, h1, t).unwrap(), 0.0);
    prop_assert_eq!(log_ratio(family, h1, h1, t).unwrap().exp(), 1.0);
    let direct = log_ratio(family, h, h1, t).unwrap();
    let via = log_ratio(family, h, h0, t).unwrap() + log_ratio(family, h0, h1, t).unwrap();
    prop_assert!((direct - via).abs() <= 1e-9 * (1.0 + direct.abs()), "additivity {} vs {}", direct, via);

    let g = ratio_grad(family, h, h1, t).unwrap();
    let gf = richardson_jacobian(h, |x| vec![log_ratio(family, x, h1, t).unwrap().exp()]);
    let coarse = ratio_grad_fd(family, h, h1, t).unwrap();
    prop_assert!(rel_err(coarse.as_slice(), g.as_slice()) < 1e-4);
    prop_assert!(rel_err(g.as_slice(), &gf) < 1e-6, "grad {} vs {:?}", g, gf);

    let hs = ratio_hess(family, h, h1, t).unwrap();
    let hf = richardson_jacobian(h, |x| ratio_grad(family, x, h1, t).unwrap().as_slice().to_vec());
    let coarse = ratio_hess_fd(family, h, h1, t).unwrap();
    prop_assert!(rel_err(coarse.as_slice(), hs.as_slice()) < 1e-3);
    prop_assert!((&hs - hs.transpose()).abs().max() <= 1e-15 * hs.abs().max());
    prop_assert!(rel_err(hs.as_slice(), &hf) < 1e-5, "hess {} vs {:?}", hs, hf);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn normal_family_ratios(mu in -1.0f64..1.0, t2 in 0.3f64..3.0, mu0 in -1.0f64..1.0, t20 in 0.3f64..3.0, seed in 0u64..1_000_000) {
        let family = NormalHier::new(5);
        let mut rng = stream_rng(seed, "normal-stat");
        let normal = Normal::new(0.0, 1.2).unwrap();
        let theta: Vec<f64> = (0..5).map(|_| normal.sample(&mut rng)).collect();
        let t = [theta.iter().sum::<f64>(), theta.iter().map(|x| x * x).sum::<f64>()];
        check_family(&family, &[mu, t2], &[0.0, 1.0], &[mu0, t20], &t)?;
    }

    #[test]
    fn dirichlet_family_ratios(eta in 0.1f64..2.0, alpha in 0.1f64..2.0, eta0 in 0.1f64..2.0, alpha0 in 0.1f64..2.0, shape in 0.2f64..2.0, seed in 0u64..1_000_000) {
        let family = DirichletLda::new(2, 12, 6);
        let t = dirichlet_stat(2, 12, 6, shape, seed);
        check_family(&family, &[eta, alpha], &[1.0, 1.0], &[eta0, alpha0], &t)?;
    }

    #[test]
    fn vs_family_ratios(w in 0.05f64..0.95, g in 0.5f64..200.0, w0 in 0.05f64..0.95, g0 in 0.5f64..200.0, qg in 0usize..=8, quad in 0.0f64..40.0) {
        let family = VsZellner::new(8);
        let t = [qg as f64, quad, 1.0];
        check_family(&family, &[w, g], &[0.3, 10.0], &[w0, g0], &t)?;
    }
}

fn normal_samples(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, "envelope-normal");
    (0..n)
        .map(|_| {
            let centre: f64 = rng.random_range(-4.0..4.0);
            let spread: f64 = rng.random_range(0.05..4.0);
            let theta: Vec<f64> = (0..5).map(|_| centre + spread * ebsurf::numeric::std_normal(&mut rng)).collect();
            vec![theta.iter().sum(), theta.iter().map(|x| x * x).sum()]
        })
        .collect()
}

#[test]
fn normal_envelope_holds_and_halving_breaks_it() {
    let family = NormalHier::new(5);
    let rect = HyperRect::new(vec![-1.0, 0.3], vec![1.0, 3.0]).unwrap();
    let env = envelope_corners(&family, &rect).unwrap();
    assert_eq!(env.corners.len(), 4);
    assert!(env.coefficients.iter().all(|c| *c > 0.0));
    let samples = normal_samples(10_000, 1);
    let grid = rect.uniform_grid(10);
    assert_eq!(check_envelope(&env, &family, &samples, &grid), 0);
}

#[test]
fn dirichlet_envelope_holds_and_halving_breaks_it() {
    let family = DirichletLda::new(2, 12, 6);
    let rect = HyperRect::new(vec![0.1, 0.1], vec![2.0, 2.0]).unwrap();
    let env = envelope_corners(&family, &rect).unwrap();
    let samples: Vec<Vec<f64>> =
        (0..2000).map(|i| dirichlet_stat(2, 12, 6, 0.05 + (i % 40) as f64 * 0.05, i)).collect();
    let grid = rect.uniform_grid(10);
    assert_eq!(check_envelope(&env, &family, &samples, &grid), 0);
}

#[test]
fn halved_coefficients_are_caught() {
    let rect = HyperRect::new(vec![-1.0], vec![2.0]).unwrap();
    let env = envelope_corners(&Flat, &rect).unwrap();
    assert_eq!(env.coefficients, vec![1.0, 1.0]);
    let samples: Vec<Vec<f64>> = (0..201).map(|i| vec![-5.0 + 0.05 * i as f64]).collect();
    let grid = rect.uniform_grid(31);
    assert_eq!(check_envelope(&env, &Flat, &samples, &grid), 0);
    let halved = check_envelope(&env.scaled(0.5), &Flat, &samples, &grid);
    // every t away from the crossing point 0 has a dominant corner
    assert!(halved > 150, "{halved}");
}

#[test]
fn single_anchor_grid_has_no_violations() {
    let family = NormalHier::new(5);
    let rect = HyperRect::new(vec![0.2, 1.0], vec![0.2 + 1e-9, 1.0 + 1e-9]).unwrap();
    let env = envelope_corners(&family, &rect).unwrap();
    let samples = normal_samples(1000, 2);
    assert_eq!(check_envelope(&env, &family, &samples, &[vec![0.2, 1.0]]), 0);
}

#[test]
fn hessian_matches_analytic_curvature_normal() {
    // d^2/dmu^2 log f = -J / tau2 for the normal family; check the log-space pieces.
    let family = NormalHier::new(3);
    let d = family.derivatives_at(&[0.3, 1.7]);
    let sj = d.score_jacobian(&[1.0, 2.0]);
    assert!((sj[(0, 0)] + 3.0 / 1.7).abs() < 1e-12);
}
