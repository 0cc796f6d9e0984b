//! Small numerical helpers shared across the crate.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Random number generator used for every simulation in the crate.
pub type Rng = ChaCha20Rng;

/// Deterministic RNG for the stream `name` under the master `seed`.
///
/// Streams are keyed by content rather than by creation order, so concurrent
/// replications reproduce regardless of scheduling.
pub fn stream_rng(seed: u64, name: &str) -> Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    Rng::from_seed(key)
}

/// A standard normal draw.
pub fn std_normal(rng: &mut Rng) -> f64 {
    rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)
}

/// `log(sum(exp(x)))` with a running maximum. Returns `-inf` for empty input.
pub fn logsumexp(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for v in values {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if v > max {
            acc = acc * (max - v).exp() + 1.0;
            max = v;
        } else {
            acc += (v - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        max + acc.ln()
    }
}

/// Trigamma function psi'(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * 5.0 / 66.0))))
}

/// Upper `level` quantile of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_quantile(df: usize, level: f64) -> f64 {
    if level <= 0.0 {
        return 0.0;
    }
    ChiSquared::new(df as f64).expect("positive degrees of freedom").inverse_cdf(level)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Plug-in (divide by n) variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / denom
}

/// Batch-means standard error of the mean of `xs` using `batches` consecutive batches.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let b = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|m| mean(&xs[m * b..(m + 1) * b])).collect();
    let grand = mean(&means);
    let var_b = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var_b * b as f64 / (b * batches) as f64).sqrt()
}

/// Default number of batches, `ceil(sqrt(n))`.
pub fn default_batches(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize
}
