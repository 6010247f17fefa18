//! Kernel independence testing with the Hilbert-Schmidt independence criterion.
//!
//! Both arguments use a Gaussian RBF kernel whose bandwidth is the median
//! nonzero pairwise distance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::fit::FittedLSNM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HsicMethod {
    #[default]
    Gamma,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicResult {
    /// `T · HSIC_b`, the scale on which the gamma null is fitted.
    pub statistic: f64,
    pub p_value: f64,
    pub method: HsicMethod,
    pub bandwidth_x: f64,
    pub bandwidth_r: f64,
    /// One argument was constant, so there is no evidence of dependence.
    pub degenerate: bool,
}

const MIN_LEN: usize = 4;

/// Row-major `n × n` Gram matrix and the bandwidth used; `None` when every
/// value coincides (the kernel matrix is then all ones).
fn rbf_gram(v: &[f64]) -> (Vec<f64>, Option<f64>) {
    let n = v.len();
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = (v[i] - v[j]).abs();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return (vec![1.0; n * n], None);
    }
    let mid = (dists.len() - 1) / 2;
    let (_, &mut median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let bw = if median > 0.0 { median } else { dists.iter().copied().fold(f64::INFINITY, f64::min) };
    let scale = -1.0 / (2.0 * bw * bw);
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in i + 1..n {
            let d = v[i] - v[j];
            let e = (scale * d * d).exp();
            k[i * n + j] = e;
            k[j * n + i] = e;
        }
    }
    (k, Some(bw))
}

/// `H K H` with `H = I − 11ᵀ/n`.
fn center(k: &[f64], n: usize) -> Vec<f64> {
    let row_means: Vec<f64> = (0..n).map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = k[i * n + j] - row_means[i] - row_means[j] + grand;
        }
    }
    out
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < MIN_LEN {
        return Err(Error::TooFewSamples { got: a.len(), required: MIN_LEN });
    }
    if let Some(index) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "HSIC input", index: index % a.len() });
    }
    Ok(())
}

/// Biased empirical HSIC, `tr(KHLH) / T²`.
pub fn hsic_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len();
    let (k, bw_a) = rbf_gram(a);
    let (l, bw_b) = rbf_gram(b);
    if bw_a.is_none() || bw_b.is_none() {
        return Ok(0.0);
    }
    let kc = center(&k, n);
    let s: f64 = kc.iter().zip(&l).map(|(x, y)| x * y).sum();
    Ok((s / (n * n) as f64).max(0.0))
}

/// Gamma moment match of the null distribution of `T · HSIC_b`.
fn gamma_pvalue(k: &[f64], l: &[f64], kc: &[f64], lc: &[f64], n: usize, stat: f64) -> f64 {
    let m = n as f64;
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = kc[i * n + j] * lc[i * n + j] / 6.0;
                var += v * v;
            }
        }
    }
    var /= m * (m - 1.0);
    var *= 72.0 * (m - 4.0) * (m - 5.0) / (m * (m - 1.0) * (m - 2.0) * (m - 3.0));
    let off_diag_mean = |g: &[f64]| {
        let total: f64 = g.iter().sum();
        let diag: f64 = (0..n).map(|i| g[i * n + i]).sum();
        (total - diag) / (m * (m - 1.0))
    };
    let (mu_x, mu_y) = (off_diag_mean(k), off_diag_mean(l));
    let mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / m;
    if !(var > 0.0) || !(mean > 0.0) {
        return 1.0;
    }
    let shape = mean * mean / var;
    let scale = var * m / mean;
    match Gamma::new(shape, 1.0 / scale) {
        Ok(g) => g.sf(stat).clamp(0.0, 1.0),
        Err(_) => 1.0,
    }
}

fn permutation_pvalue(kc: &[f64], l: &[f64], n: usize, stat_sum: f64, n_perms: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let tol = 1e-12 * stat_sum.abs();
    let mut exceed = 0usize;
    for _ in 0..n_perms {
        perm.shuffle(&mut rng);
        let mut s = 0.0;
        for i in 0..n {
            let row = &kc[i * n..(i + 1) * n];
            let lrow = &l[perm[i] * n..(perm[i] + 1) * n];
            s += row.iter().zip(&perm).map(|(kv, &pj)| kv * lrow[pj]).sum::<f64>();
        }
        if s >= stat_sum - tol {
            exceed += 1;
        }
    }
    (1 + exceed) as f64 / (1 + n_perms) as f64
}

/// HSIC test of independence between `a` and `b`.
///
/// The gamma approximation needs at least six points and otherwise falls
/// back to permutations.
pub fn hsic_pvalue(a: &[f64], b: &[f64], method: HsicMethod, n_perms: usize, seed: u64) -> Result<HsicResult> {
    check_lengths(a, b)?;
    let n = a.len();
    let (k, bw_a) = rbf_gram(a);
    let (l, bw_b) = rbf_gram(b);
    let (Some(bandwidth_x), Some(bandwidth_r)) = (bw_a, bw_b) else {
        return Ok(HsicResult {
            statistic: 0.0,
            p_value: 1.0,
            method,
            bandwidth_x: bw_a.unwrap_or(1.0),
            bandwidth_r: bw_b.unwrap_or(1.0),
            degenerate: true,
        });
    };
    let kc = center(&k, n);
    let sum: f64 = kc.iter().zip(&l).map(|(x, y)| x * y).sum();
    let statistic = (sum / n as f64).max(0.0);
    let p_value = match method {
        HsicMethod::Gamma if n >= 6 => {
            let lc = center(&l, n);
            gamma_pvalue(&k, &l, &kc, &lc, n, statistic)
        }
        _ => {
            if n_perms == 0 {
                return Err(Error::Config("permutation test needs at least one permutation".into()));
            }
            permutation_pvalue(&kc, &l, n, sum, n_perms, seed)
        }
    };
    Ok(HsicResult { statistic, p_value, method, bandwidth_x, bandwidth_r, degenerate: false })
}

/// Standardized residuals `(y − μ̂) / σ̂`.
pub fn residuals(fit: &FittedLSNM, pair: &SamplePair) -> Result<Vec<f64>> {
    if fit.mu_hat.len() != pair.len() || fit.sigma_hat.len() != pair.len() {
        return Err(Error::LengthMismatch { left: fit.mu_hat.len(), right: pair.len() });
    }
    Ok(pair
        .y
        .iter()
        .zip(&fit.mu_hat)
        .zip(&fit.sigma_hat)
        .map(|((y, m), s)| (y - m) / s)
        .collect())
}
