//! Iterative feasible generalized least squares, and the fixed-variance
//! spline regression used as the additive-noise ablation.

use serde::{Deserialize, Serialize};

use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::features::{DesignMatrix, SplineFeatureMap};
use crate::fit::{FittedLSNM, Predictor};
use crate::linalg::solve_spd;
use crate::model::MeanVarParams;

/// `E[log χ²₁] = −(γ + ln 2)`; added back so `exp(Φγ)` estimates `σ²`
/// rather than its geometric-mean counterpart.
pub const LOG_CHI2_BIAS: f64 = 1.270_362_845_461_478_2;

const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IFGLSConfig {
    pub max_iters: usize,
    /// Largest absolute coefficient change that counts as converged.
    pub tol: f64,
    pub variance_floor: f64,
    /// Ridge added to both normal-equation systems.
    pub ridge: f64,
    pub log_bias_correction: bool,
}

impl Default for IFGLSConfig {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-6, variance_floor: 1e-10, ridge: 1e-6, log_bias_correction: true }
    }
}

impl IFGLSConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.tol > 0.0) || !(self.variance_floor > 0.0) || !(self.ridge >= 0.0) {
            return Err(Error::Config(format!("invalid IFGLS configuration {self:?}")));
        }
        Ok(())
    }
}

/// Weights are rescaled to mean one first, so `ridge` is relative to an
/// unweighted Gram matrix.
fn ridge_wls(x: &DesignMatrix, y: &[f64], weights: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let scale = weights.len() as f64 / weights.iter().sum::<f64>();
    let weights: Vec<f64> = weights.iter().map(|w| w * scale).collect();
    let weights = weights.as_slice();
    let mut a = x.weighted_gram(weights);
    for j in 0..x.cols {
        a[(j, j)] += ridge;
    }
    let wy: Vec<f64> = y.iter().zip(weights).map(|(y, w)| y * w).collect();
    solve_spd(a, &x.tr_mul_vec(&wy))
}

fn max_abs_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Alternate a weighted mean regression with a log-squared-residual
/// regression until the coefficients settle.
pub fn fit_ifgls(
    pair: &SamplePair,
    map_psi: &SplineFeatureMap,
    map_phi: &SplineFeatureMap,
    cfg: &IFGLSConfig,
) -> Result<FittedLSNM> {
    cfg.validate()?;
    let psi = map_psi.evaluate(&pair.x);
    let phi = map_phi.evaluate(&pair.x);
    let t = pair.len();
    let offset = if cfg.log_bias_correction { LOG_CHI2_BIAS } else { 0.0 };
    let ones = vec![1.0; t];

    let mut weights = ones.clone();
    let mut beta = vec![0.0; psi.cols];
    let mut gamma = vec![0.0; phi.cols];
    let mut var = ones.clone();
    let mut converged = false;
    let mut iters = 0;
    let mut trace = Vec::new();

    for it in 1..=cfg.max_iters {
        iters = it;
        let beta_new = ridge_wls(&psi, &pair.y, &weights, cfg.ridge)?;
        let mu = psi.mul_vec(&beta_new);
        let log_r2: Vec<f64> = pair.y.iter().zip(&mu).map(|(y, m)| ((y - m).powi(2) + LOG_EPS).ln()).collect();
        let gamma_new = ridge_wls(&phi, &log_r2, &ones, cfg.ridge)?;
        var = phi
            .mul_vec(&gamma_new)
            .iter()
            .map(|z| (z + offset).exp().max(cfg.variance_floor))
            .collect();
        let change = max_abs_change(&beta_new, &beta).max(max_abs_change(&gamma_new, &gamma));
        beta = beta_new;
        gamma = gamma_new;
        weights = var.iter().map(|v| 1.0 / v).collect();
        trace.push(change);
        if !change.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: it, detail: "IFGLS coefficients diverged".into() });
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    let mu = psi.mul_vec(&beta);
    let params: Vec<MeanVarParams> = mu.iter().zip(&var).map(|(&m, &v)| MeanVarParams::floored(m, v)).collect();
    let predictor = Predictor::MeanLogVariance {
        psi: map_psi.clone(),
        phi: map_phi.clone(),
        mean_coef: beta,
        log_var_coef: gamma,
        log_var_offset: offset,
        variance_floor: cfg.variance_floor,
    };
    Ok(FittedLSNM::from_mean_var(predictor, &pair.y, &params, converged, iters, trace))
}

/// Ridge least-squares mean with one global variance `RSS / T`.
pub fn fit_homoscedastic(pair: &SamplePair, map_psi: &SplineFeatureMap, ridge: f64) -> Result<FittedLSNM> {
    let psi = map_psi.evaluate(&pair.x);
    let beta = ridge_wls(&psi, &pair.y, &vec![1.0; pair.len()], ridge)?;
    let mu = psi.mul_vec(&beta);
    let rss: f64 = pair.y.iter().zip(&mu).map(|(y, m)| (y - m).powi(2)).sum();
    let var = (rss / pair.len() as f64).max(crate::model::VARIANCE_FLOOR);
    let params: Vec<MeanVarParams> = mu.iter().map(|&m| MeanVarParams::floored(m, var)).collect();
    let predictor = Predictor::Homoscedastic { psi: map_psi.clone(), mean_coef: beta, var };
    Ok(FittedLSNM::from_mean_var(predictor, &pair.y, &params, true, 1, vec![]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_spline_map;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn bias_only(x: &[f64]) -> SplineFeatureMap {
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        SplineFeatureMap::from_knots(vec![lo, hi], 0, false).unwrap()
    }

    fn linear_sample(n: usize, seed: u64) -> SamplePair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y = x.iter().map(|&v| 2.0 * v + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        SamplePair::new(x, y).unwrap()
    }

    #[test]
    fn first_pass_is_ols() {
        let pair = linear_sample(300, 1);
        let map = build_spline_map(&pair.x, 3, 6).unwrap();
        let one = fit_ifgls(&pair, &map, &map, &IFGLSConfig { max_iters: 1, ..Default::default() }).unwrap();
        let ols = fit_homoscedastic(&pair, &map, 1e-6).unwrap();
        for (a, b) in one.mu_hat.iter().zip(&ols.mu_hat) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn bias_only_variance_reduces_to_plug_in() {
        let pair = linear_sample(500, 2);
        let psi = build_spline_map(&pair.x, 1, 2).unwrap().with_bias(false);
        let phi = bias_only(&pair.x);
        let cfg = IFGLSConfig { ridge: 0.0, ..Default::default() };
        let fit = fit_ifgls(&pair, &psi, &phi, &cfg).unwrap();
        assert!(fit.converged);

        // Constant weights leave the mean at OLS, computed here in closed form.
        let n = pair.len() as f64;
        let (mx, my) = (pair.x.iter().sum::<f64>() / n, pair.y.iter().sum::<f64>() / n);
        let sxy: f64 = pair.x.iter().zip(&pair.y).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pair.x.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let resid: Vec<f64> = pair.x.iter().zip(&pair.y).map(|(x, y)| y - my - slope * (x - mx)).collect();
        for (i, r) in resid.iter().enumerate() {
            assert!((pair.y[i] - fit.mu_hat[i] - r).abs() < 1e-9);
        }
        let plug_in = (resid.iter().map(|r| (r * r + 1e-12).ln()).sum::<f64>() / n + LOG_CHI2_BIAS).exp();
        for s in &fit.sigma_hat {
            assert!((s * s - plug_in).abs() < 1e-9 * plug_in);
        }
    }

    #[test]
    fn homoscedastic_linear_recovery() {
        let mut slopes = Vec::new();
        let mut vars = Vec::new();
        for seed in 0..20 {
            let pair = linear_sample(10_000, 100 + seed);
            let map = build_spline_map(&pair.x, 1, 2).unwrap();
            let fit = fit_ifgls(&pair, &map, &map, &IFGLSConfig::default()).unwrap();
            let (i, j) = (0..pair.len()).fold((0, 0), |(lo, hi), k| {
                (if pair.x[k] < pair.x[lo] { k } else { lo }, if pair.x[k] > pair.x[hi] { k } else { hi })
            });
            slopes.push((fit.mu_hat[j] - fit.mu_hat[i]) / (pair.x[j] - pair.x[i]));
            vars.push(fit.sigma_hat.iter().map(|s| s * s).sum::<f64>() / pair.len() as f64);
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[9] + v[10])
        };
        assert!((median(&mut slopes) - 2.0).abs() < 0.05);
        assert!((median(&mut vars) - 0.25).abs() < 0.05);
    }

    #[test]
    fn variance_respects_floor() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let pair = SamplePair::new(x, y).unwrap();
        let map = build_spline_map(&pair.x, 1, 2).unwrap();
        let cfg = IFGLSConfig { variance_floor: 1e-4, max_iters: 5, ..Default::default() };
        let fit = fit_ifgls(&pair, &map, &map, &cfg).unwrap();
        assert!(fit.sigma_hat.iter().all(|s| s * s >= 1e-4 * (1.0 - 1e-12)));
    }

    #[test]
    fn homoscedastic_variance_is_mean_rss() {
        let pair = linear_sample(200, 3);
        let map = build_spline_map(&pair.x, 3, 5).unwrap();
        let fit = fit_homoscedastic(&pair, &map, 1e-6).unwrap();
        let rss: f64 = pair.y.iter().zip(&fit.mu_hat).map(|(y, m)| (y - m).powi(2)).sum();
        let var = fit.sigma_hat[0].powi(2);
        assert!((var - rss / 200.0).abs() < 1e-12);
    }
}
