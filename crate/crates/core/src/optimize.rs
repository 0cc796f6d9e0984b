//! Bounded derivative-free maximisation.

use crate::prior::HyperRect;

/// Nelder-Mead on `f`, maximising, with every vertex projected into `rect`.
///
/// Stops when the simplex diameter falls below `tol` or after `max_evals`
/// evaluations. Returns the best vertex and its value.
pub fn nelder_mead_max<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    step: &[f64],
    rect: &HyperRect,
    tol: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let k = x0.len();
    // Minimise the negation; NaN counts as -inf.
    let g = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let project = |mut x: Vec<f64>| {
        rect.clamp(&mut x);
        x
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    simplex.push(project(x0.to_vec()));
    for i in 0..k {
        let mut v = simplex[0].clone();
        let up = v[i] + step[i];
        v[i] = if up <= rect.upper()[i] { up } else { v[i] - step[i] };
        simplex.push(project(v));
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| g(v)).collect();
    let mut evals = k + 1;
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };

    loop {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < tol || evals >= max_evals {
            break;
        }

        let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|v| v[j]).sum::<f64>() / k as f64).collect();
        let worst = simplex[k].clone();
        let reflected = project(lerp(&centroid, &worst, -1.0));
        let fr = g(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = project(lerp(&centroid, &worst, -2.0));
            let fe = g(&expanded);
            evals += 1;
            if fe < fr {
                simplex[k] = expanded;
                values[k] = fe;
            } else {
                simplex[k] = reflected;
                values[k] = fr;
            }
            continue;
        }
        if fr < values[k - 1] {
            simplex[k] = reflected;
            values[k] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[k] {
            let c = project(lerp(&centroid, &reflected, 0.5));
            let fc = g(&c);
            (c, fc)
        } else {
            let c = project(lerp(&centroid, &worst, 0.5));
            let fc = g(&c);
            (c, fc)
        };
        evals += 1;
        if fc < values[k].min(fr) {
            simplex[k] = contracted;
            values[k] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=k {
            simplex[i] = project(lerp(&best, &simplex[i], 0.5));
            values[i] = g(&simplex[i]);
        }
        evals += k;
    }
    let best = (0..=k).min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))).unwrap();
    (simplex[best].clone(), -values[best])
}
