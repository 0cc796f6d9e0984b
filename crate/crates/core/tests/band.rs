use ebsurf::band::global_band;
use ebsurf::estimators::{estimate_b, estimate_i, Reweighter};
use ebsurf::models::toy::{toy_exact_sampler, NormalHierModel};
use ebsurf::numeric::default_batches;
use ebsurf::ChainTrace;
use rayon::prelude::*;

const H1: [f64; 2] = [0.0, 1.0];

fn tau_grid(points: usize) -> Vec<Vec<f64>> {
    (0..points).map(|i| vec![0.0, 0.5 + 1.5 * i as f64 / (points - 1) as f64]).collect()
}

#[test]
fn constant_functional_has_zero_width() {
    let model = NormalHierModel::fixture();
    let family = model.family();
    let trace = toy_exact_sampler(&model, &H1, 2000, 1).unwrap();
    let rw = Reweighter::new(&trace, &family).unwrap();
    let band = global_band(&rw, Some("one"), &tau_grid(11), 20, 0.05).unwrap();
    assert!(band.sup_stats.iter().all(|s| s.abs() < 1e-12));
    assert!(band.half_width < 1e-14);
    assert!(band.center.iter().all(|c| (c - 1.0).abs() < 1e-12));
}

#[test]
fn bad_batch_counts_are_rejected() {
    let model = NormalHierModel::fixture();
    let family = model.family();
    let trace = toy_exact_sampler(&model, &H1, 200, 2).unwrap();
    let rw = Reweighter::new(&trace, &family).unwrap();
    let grid = tau_grid(5);
    assert!(global_band(&rw, Some("theta1"), &grid, 1, 0.05).is_err());
    assert!(global_band(&rw, Some("theta1"), &grid, 21, 0.05).is_err());
    assert!(global_band(&rw, Some("theta1"), &grid, 20, 0.05).is_ok());
    assert!(global_band(&rw, Some("theta1"), &grid, 20, 1.0).is_err());
    assert!(global_band(&rw, Some("theta1"), &[], 20, 0.05).is_err());
    assert!(global_band(&rw, Some("nope"), &grid, 20, 0.05).is_err());
}

#[test]
fn band_is_centred_on_the_full_estimate() {
    let model = NormalHierModel::fixture();
    let family = model.family();
    let trace = toy_exact_sampler(&model, &H1, 10_007, 3).unwrap();
    let rw = Reweighter::new(&trace, &family).unwrap();
    let grid = tau_grid(9);
    let m = default_batches(trace.len());
    let band = global_band(&rw, Some("theta1"), &grid, m, 0.05).unwrap();
    assert_eq!(band.batches, 101);
    assert_eq!(band.batch_len, 99);
    assert_eq!(band.n, 9999);
    assert_eq!(band.order_index, 96);
    let used = rw.restrict(0..band.n);
    for (h, c) in grid.iter().zip(&band.center) {
        let direct = estimate_i(&used, "theta1", h).unwrap();
        assert!((direct - c).abs() < 1e-12);
    }
    assert!(band.half_width > 0.0);
    for ((lo, hi), c) in band.lower().iter().zip(band.upper()).zip(&band.center) {
        assert!(*lo <= *c && *c <= hi);
        assert!((hi - lo - 2.0 * band.half_width).abs() < 1e-12);
    }
    assert!(band.covers(&band.center));

    let b_band = global_band(&rw, None, &grid, m, 0.05).unwrap();
    for (h, c) in grid.iter().zip(&b_band.center) {
        let direct = estimate_b(&used, h).unwrap();
        assert!((direct - c).abs() < 1e-12 * direct);
    }
}

fn reorder_batches(trace: &ChainTrace, b: usize, order: &[usize]) -> ChainTrace {
    let mut out = ChainTrace::new(trace.meta.clone(), trace.stat_dim(), trace.functionals().to_vec());
    for &m in order {
        for i in m * b..(m + 1) * b {
            let values: Vec<f64> = (0..trace.functionals().len()).map(|j| trace.value(i, j)).collect();
            out.push(trace.stat(i), &values, trace.regen_flags()[i]);
        }
    }
    out
}

#[test]
fn reordering_batches_changes_nothing() {
    let model = NormalHierModel::fixture();
    let family = model.family();
    let trace = toy_exact_sampler(&model, &H1, 4000, 4).unwrap();
    let rw = Reweighter::new(&trace, &family).unwrap();
    let grid = tau_grid(7);
    let band = global_band(&rw, Some("theta1"), &grid, 40, 0.05).unwrap();
    let order: Vec<usize> = (0..40).map(|m| (m * 17 + 3) % 40).collect();
    let shuffled = reorder_batches(&trace, 100, &order);
    let rw2 = Reweighter::new(&shuffled, &family).unwrap();
    let band2 = global_band(&rw2, Some("theta1"), &grid, 40, 0.05).unwrap();
    assert!((band.half_width - band2.half_width).abs() <= 1e-12 * band.half_width);
    for (m, &src) in order.iter().enumerate() {
        assert!((band2.sup_stats[m] - band.sup_stats[src]).abs() <= 1e-10 * band.sup_stats[src].max(1e-12));
    }
}

#[test]
fn half_width_shrinks_with_n() {
    let model = NormalHierModel::fixture();
    let family = model.family();
    let grid = tau_grid(11);
    let median_width = |n: usize| {
        let mut w: Vec<f64> = (0..9u64)
            .into_par_iter()
            .map(|seed| {
                let trace = toy_exact_sampler(&model, &H1, n, 100 + seed).unwrap();
                let rw = Reweighter::new(&trace, &family).unwrap();
                global_band(&rw, Some("theta1"), &grid, default_batches(n), 0.05).unwrap().half_width
            })
            .collect();
        w.sort_by(f64::total_cmp);
        w[4]
    };
    let small = median_width(10_000);
    let large = median_width(100_000);
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn band_covers_the_closed_form_curve() {
    let model = NormalHierModel::fixture();
    let family = model.family();
    let grid = tau_grid(41);
    let truth: Vec<f64> = grid.iter().map(|h| model.i_theta1(h)).collect();
    for (h, t) in grid.iter().zip(&truth) {
        assert!((t - (-2.0 * h[1]) / (1.0 + h[1])).abs() < 1e-15);
    }
    let n = 200_000;
    let covered = (0..200u64)
        .into_par_iter()
        .filter(|&seed| {
            let trace = toy_exact_sampler(&model, &H1, n, 20_000 + seed).unwrap();
            let rw = Reweighter::new(&trace, &family).unwrap();
            let band = global_band(&rw, Some("theta1"), &grid, default_batches(n), 0.05).unwrap();
            band.covers(&truth)
        })
        .count();
    let coverage = covered as f64 / 200.0;
    assert!((0.90..=0.99).contains(&coverage), "coverage {coverage}");
}
