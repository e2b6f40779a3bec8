use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences handled by the exact null
/// distribution.
pub const EXACT_MAX_N: usize = 25;
pub const MIN_SAMPLES: usize = 5;

/// Average ranks of `|d|`, doubled so ties stay integral.
pub(crate) fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].partial_cmp(&abs[j]).unwrap());
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged, times two.
        let r = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Non-zero paired differences `x − y`.
fn differences(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidConfig(format!("paired samples differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite sample".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: d.len(),
            needed: MIN_SAMPLES,
        });
    }
    Ok(d)
}

/// Two-sided Wilcoxon signed-rank p-value for paired samples. Zero
/// differences are dropped; exact null distribution up to
/// [`EXACT_MAX_N`] differences, normal approximation with tie and
/// continuity corrections above.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<f64> {
    let d = differences(x, y)?;
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w_plus: u64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    if d.len() <= EXACT_MAX_N {
        Ok(exact_p(&ranks, w_plus))
    } else {
        Ok(normal_p(&abs, &ranks, w_plus))
    }
}

/// Subset-sum counts over doubled ranks give the null distribution of W+.
fn exact_p(ranks: &[u64], w_plus: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all: f64 = 2f64.powi(ranks.len() as i32);
    let w = w_plus as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / all;
    let upper: f64 = counts[w..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(abs: &[f64], ranks: &[u64], w_plus: u64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let w = w_plus as f64 / 2.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Significance band labels: `ns` above 0.05, then `*`, `**`, `***`,
/// `****` at or below 0.05, 0.01, 0.001 and 0.0001.
pub fn significance_stars(p: f64) -> &'static str {
    if p <= 1e-4 {
        "****"
    } else if p <= 1e-3 {
        "***"
    } else if p <= 1e-2 {
        "**"
    } else if p <= 5e-2 {
        "*"
    } else {
        "ns"
    }
}
