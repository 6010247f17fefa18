//! Jointly concave feature-map estimator.
//!
//! Model: `η₁(x) = ψ(x)ᵀw₁`, `η₂(x) = −φ(x)ᵀw₂` with `φ ≥ 0` and `w₂ ≥ 0`,
//! fitted by maximizing the log-likelihood plus a Gaussian prior
//! `−(δ/2)‖w‖²`. Given `w₂`, the optimal `w₁` is a weighted least-squares
//! solution; `w₂` is updated with bound-constrained quasi-Newton steps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::features::{dot, DesignMatrix, SplineFeatureMap};
use crate::fit::{FittedLSNM, Predictor};
use crate::lbfgsb::{BoxLbfgs, Iterate};
use crate::linalg::{solve_spd, sym_eigenvalues};
use crate::model::{loglik_grad_hess_eta, LogLikReport, NaturalParams, LOG_NORM_CONST};

/// How the `w₂` quasi-Newton steps treat `w₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum W2Update {
    /// Every objective evaluation re-solves `w₁` in closed form, so the
    /// quasi-Newton steps act on the concave profile `max_{w₁} J(w₁, w₂)`.
    #[default]
    Profiled,
    /// Classic block-coordinate ascent: `w₁` is held fixed during the steps.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcaveFitConfig {
    /// Prior precision `δ`.
    pub delta: f64,
    pub max_outer_iters: usize,
    /// Stop once the penalized objective changes by less than this (absolute, nats).
    pub loglik_tol: f64,
    /// Quasi-Newton steps on `w₂` per outer round.
    pub inner_solver_iters: usize,
    pub w2_update: W2Update,
}

impl Default for ConcaveFitConfig {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            max_outer_iters: 100,
            loglik_tol: 1e-6,
            inner_solver_iters: 20,
            w2_update: W2Update::Profiled,
        }
    }
}

impl ConcaveFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !(self.loglik_tol > 0.0) || self.inner_solver_iters == 0 {
            return Err(Error::Config(format!("invalid concave fit configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLSNMWeights {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl LinearLSNMWeights {
    /// Concatenated `(w₁, w₂)`.
    pub fn flat(&self) -> Vec<f64> {
        self.w1.iter().chain(&self.w2).copied().collect()
    }

    pub fn from_flat(w: &[f64], d1: usize) -> Self {
        Self { w1: w[..d1].to_vec(), w2: w[d1..].to_vec() }
    }

    /// Natural parameters on every row; `None` if some row has `φᵀw₂ ≤ 0`.
    pub fn natural_params(&self, psi: &DesignMatrix, phi: &DesignMatrix) -> Option<Vec<NaturalParams>> {
        (0..psi.rows)
            .map(|i| NaturalParams::new(dot(psi.row(i), &self.w1), -dot(phi.row(i), &self.w2)).ok())
            .collect()
    }
}

/// Output of [`fit_concave_design`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: LinearLSNMWeights,
    pub natural: Vec<NaturalParams>,
    /// Unpenalized.
    pub loglik: LogLikReport,
    pub converged: bool,
    pub iters: usize,
    /// Penalized objective at the start and after every outer iteration.
    pub objective_trace: Vec<f64>,
}

/// `w₁ = (Ψᵀ diag(α) Ψ + δI)⁻¹ Ψᵀ y`.
pub fn wls_update_w1(psi: &DesignMatrix, y: &[f64], alpha: &[f64], delta: f64) -> Result<Vec<f64>> {
    if psi.rows != y.len() || alpha.len() != y.len() {
        return Err(Error::LengthMismatch { left: psi.rows, right: y.len().min(alpha.len()) });
    }
    if let Some(index) = alpha.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::NonFinite { what: "alpha (must be > 0)", index });
    }
    let mut a = psi.weighted_gram(alpha);
    for j in 0..psi.cols {
        a[(j, j)] += delta;
    }
    solve_spd(a, &psi.tr_mul_vec(y))
}

/// Sum over points of the log-likelihood, given `η₁` and `s = −η₂ > 0`.
fn loglik_eta1_s(y: &[f64], eta1: &[f64], s: &[f64]) -> f64 {
    y.iter()
        .zip(eta1)
        .zip(s)
        .map(|((&y, &e1), &s)| LOG_NORM_CONST + e1 * y - s * y * y - e1 * e1 / (4.0 * s) + 0.5 * (2.0 * s).ln())
        .sum()
}

/// `∂ℓᵢ/∂sᵢ` with `s = −η₂`.
fn dloglik_ds(y: &[f64], eta1: &[f64], s: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(eta1)
        .zip(s)
        .map(|((&y, &e1), &s)| -y * y + e1 * e1 / (4.0 * s * s) + 0.5 / s)
        .collect()
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Total log-likelihood at `w`; `None` if some row violates `φᵀw₂ > 0`.
pub fn log_likelihood(psi: &DesignMatrix, phi: &DesignMatrix, y: &[f64], w: &LinearLSNMWeights) -> Option<f64> {
    let s = phi.mul_vec(&w.w2);
    if s.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    Some(loglik_eta1_s(y, &psi.mul_vec(&w.w1), &s))
}

/// Gradient of the log-likelihood with respect to the concatenated `(w₁, w₂)`.
pub fn log_likelihood_gradient(psi: &DesignMatrix, phi: &DesignMatrix, y: &[f64], w: &LinearLSNMWeights) -> Vec<f64> {
    let eta1 = psi.mul_vec(&w.w1);
    let s = phi.mul_vec(&w.w2);
    let d_eta1: Vec<f64> = y.iter().zip(&eta1).zip(&s).map(|((&y, &e1), &s)| y - e1 / (2.0 * s)).collect();
    let mut g = psi.tr_mul_vec(&d_eta1);
    g.extend(phi.tr_mul_vec(&dloglik_ds(y, &eta1, &s)));
    g
}

/// Hessian of the log-likelihood with respect to `(w₁, w₂)`, assembled by
/// the chain rule `Jᵢᵀ ∇²_η ℓᵢ Jᵢ` with `Jᵢ = diag(ψᵢᵀ, −φᵢᵀ)`.
pub fn log_likelihood_hessian(psi: &DesignMatrix, phi: &DesignMatrix, y: &[f64], w: &LinearLSNMWeights) -> DMatrix<f64> {
    let (d1, d2) = (psi.cols, phi.cols);
    let mut h = DMatrix::zeros(d1 + d2, d1 + d2);
    for i in 0..psi.rows {
        let (p, q) = (psi.row(i), phi.row(i));
        let eta = NaturalParams::new(dot(p, &w.w1), -dot(q, &w.w2)).expect("feasible weights");
        let (_, he) = loglik_grad_hess_eta(y[i], eta);
        for a in 0..d1 {
            for b in 0..d1 {
                h[(a, b)] += he[0][0] * p[a] * p[b];
            }
            for b in 0..d2 {
                let v = -he[0][1] * p[a] * q[b];
                h[(a, d1 + b)] += v;
                h[(d1 + b, a)] += v;
            }
        }
        for a in 0..d2 {
            for b in 0..d2 {
                h[(d1 + a, d1 + b)] += he[1][1] * q[a] * q[b];
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherCheck {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub positive_definite: bool,
}

/// Smallest eigenvalue of `I_T(w) = −(1/T) ∇²_w log p(y | x, w)`.
///
/// The Hessian of this model does not depend on `y`, so the observed and
/// expected information coincide.
pub fn fisher_rank_check(psi: &DesignMatrix, phi: &DesignMatrix, w: &LinearLSNMWeights) -> FisherCheck {
    let y = vec![0.0; psi.rows];
    let mut info = log_likelihood_hessian(psi, phi, &y, w);
    info /= -(psi.rows as f64);
    let ev = sym_eigenvalues(info);
    let min = ev[0];
    let max = *ev.last().unwrap();
    FisherCheck {
        min_eigenvalue: min,
        max_eigenvalue: max,
        positive_definite: min > 1e-10 * max.max(1.0),
    }
}

/// Default starting point: `w₁ = 0` and `w₂` along the bias column (or all
/// ones) scaled so that `σ² ≈ Var(y)`.
pub fn initial_weights(psi: &DesignMatrix, phi: &DesignMatrix, y: &[f64]) -> Result<LinearLSNMWeights> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::ConstantVector { what: "y" });
    }
    let bias = (0..phi.cols).find(|&j| (0..phi.rows).all(|i| phi.get(i, j) == 1.0));
    let dir: Vec<f64> = match bias {
        Some(j) => (0..phi.cols).map(|k| if k == j { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; phi.cols],
    };
    let mean_row = phi.mul_vec(&dir).iter().sum::<f64>() / n;
    if !(mean_row > 0.0) {
        return Err(Error::Config("phi design has an all-zero row sum".into()));
    }
    let c = 1.0 / (2.0 * var * mean_row);
    Ok(LinearLSNMWeights { w1: vec![0.0; psi.cols], w2: dir.iter().map(|v| v * c).collect() })
}

struct Problem<'a> {
    psi: &'a DesignMatrix,
    phi: &'a DesignMatrix,
    y: &'a [f64],
    delta: f64,
}

impl Problem<'_> {
    fn penalized(&self, eta1: &[f64], s: &[f64], w1: &[f64], w2: &[f64]) -> f64 {
        loglik_eta1_s(self.y, eta1, s) - 0.5 * self.delta * (sq_norm(w1) + sq_norm(w2))
    }

    fn row_scales(&self, w2: &[f64]) -> Option<Vec<f64>> {
        let s = self.phi.mul_vec(w2);
        s.iter().all(|&v| v > 0.0 && v.is_finite()).then_some(s)
    }

    /// Penalized objective and `w₂`-gradient at `(w₁, w₂)`.
    fn value_grad(&self, w1: &[f64], w2: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
        let eta1 = self.psi.mul_vec(w1);
        let f = self.penalized(&eta1, s, w1, w2);
        let mut g = self.phi.tr_mul_vec(&dloglik_ds(self.y, &eta1, s));
        for (gj, wj) in g.iter_mut().zip(w2) {
            *gj -= self.delta * wj;
        }
        (f, g)
    }

    fn solve_w1(&self, s: &[f64]) -> Result<Vec<f64>> {
        let alpha: Vec<f64> = s.iter().map(|v| 0.5 / v).collect();
        wls_update_w1(self.psi, self.y, &alpha, self.delta)
    }

    /// Profile objective in `w₂` with `w₁` re-solved; returns the maximizing `w₁` too.
    fn profile(&self, w2: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let s = self.row_scales(w2)?;
        let w1 = self.solve_w1(&s).ok()?;
        let (f, g) = self.value_grad(&w1, w2, &s);
        f.is_finite().then_some((f, g, w1))
    }
}

fn ensure_row_positive(phi: &DesignMatrix, w2: &mut [f64]) {
    while phi.mul_vec(w2).iter().any(|&v| !(v > 0.0)) {
        w2.iter_mut().for_each(|v| *v += 1e-8);
    }
}

/// Maximize the penalized log-likelihood for fixed design matrices.
///
/// `init` defaults to [`initial_weights`]. The returned trace holds the
/// penalized objective before the first and after every outer round and is
/// non-decreasing.
pub fn fit_concave_design(
    psi: &DesignMatrix,
    phi: &DesignMatrix,
    y: &[f64],
    cfg: &ConcaveFitConfig,
    init: Option<LinearLSNMWeights>,
) -> Result<LinearFit> {
    cfg.validate()?;
    if psi.rows != y.len() || phi.rows != y.len() {
        return Err(Error::LengthMismatch { left: psi.rows.min(phi.rows), right: y.len() });
    }
    let prob = Problem { psi, phi, y, delta: cfg.delta };
    let mut w = match init {
        Some(w) => w,
        None => initial_weights(psi, phi, y)?,
    };
    if w.w2.iter().any(|&v| v < 0.0) {
        return Err(Error::Config("initial w2 must be nonnegative".into()));
    }
    ensure_row_positive(phi, &mut w.w2);

    let s0 = prob.row_scales(&w.w2).expect("row positivity enforced");
    let (f0, _) = prob.value_grad(&w.w1, &w.w2, &s0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0, detail: format!("initial objective {f0}") });
    }
    let mut trace = vec![f0];
    let mut converged = false;
    let mut iters = 0;
    let mut solver = BoxLbfgs::new(10);

    for it in 1..=cfg.max_outer_iters {
        iters = it;
        let prev = *trace.last().unwrap();
        let stationary = match cfg.w2_update {
            W2Update::Profiled => {
                // Closed-form w₁ for the current w₂, then quasi-Newton on the profile.
                let (f, g, w1) = prob.profile(&w.w2).ok_or_else(|| Error::NonFiniteObjective {
                    iteration: it,
                    detail: "profile objective undefined at current w2".into(),
                })?;
                w.w1 = w1;
                let mut state = Iterate { x: w.w2.clone(), f: -f, g: g.iter().map(|v| -v).collect() };
                let mut best_w1 = w.w1.clone();
                let out = solver.minimize(
                    &mut state,
                    |w2| {
                        let (f, g, w1) = prob.profile(w2)?;
                        best_w1 = w1;
                        Some((-f, g.into_iter().map(|v| -v).collect()))
                    },
                    cfg.inner_solver_iters,
                );
                w.w2 = state.x;
                w.w1 = prob.solve_w1(&prob.row_scales(&w.w2).expect("accepted iterate is feasible"))
                    .unwrap_or(best_w1);
                out.stationary
            }
            W2Update::Alternating => {
                let s = prob.row_scales(&w.w2).expect("feasible");
                w.w1 = prob.solve_w1(&s)?;
                let w1 = w.w1.clone();
                let (f, g) = prob.value_grad(&w1, &w.w2, &s);
                let mut state = Iterate { x: w.w2.clone(), f: -f, g: g.iter().map(|v| -v).collect() };
                let mut fresh = BoxLbfgs::new(10);
                let out = fresh.minimize(
                    &mut state,
                    |w2| {
                        let s = prob.row_scales(w2)?;
                        let (f, g) = prob.value_grad(&w1, w2, &s);
                        f.is_finite().then(|| (-f, g.into_iter().map(|v| -v).collect()))
                    },
                    cfg.inner_solver_iters,
                );
                w.w2 = state.x;
                out.stationary
            }
        };
        ensure_row_positive(phi, &mut w.w2);
        let s = prob.row_scales(&w.w2).expect("row positivity enforced");
        let (f, _) = prob.value_grad(&w.w1, &w.w2, &s);
        if !f.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: it, detail: format!("objective {f}") });
        }
        trace.push(f);
        if (f - prev).abs() < cfg.loglik_tol || (stationary && cfg.w2_update == W2Update::Profiled) {
            converged = true;
            break;
        }
    }

    let natural = w.natural_params(psi, phi).expect("row positivity enforced");
    let loglik = LogLikReport::evaluate(y, &natural);
    Ok(LinearFit { weights: w, natural, loglik, converged, iters, objective_trace: trace })
}

/// Fit on a sample pair with spline feature maps for `ψ` and `φ`.
pub fn fit_concave(
    pair: &SamplePair,
    map_psi: &SplineFeatureMap,
    map_phi: &SplineFeatureMap,
    cfg: &ConcaveFitConfig,
) -> Result<FittedLSNM> {
    let psi = map_psi.evaluate(&pair.x);
    let phi = map_phi.evaluate(&pair.x);
    let fit = fit_concave_design(&psi, &phi, &pair.y, cfg, None)?;
    let predictor = Predictor::NaturalLinear { psi: map_psi.clone(), phi: map_phi.clone(), weights: fit.weights };
    Ok(FittedLSNM::from_natural(predictor, &pair.y, &fit.natural, fit.converged, fit.iters, fit.objective_trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_spline_map;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_design(rows: usize, cols: usize, rng: &mut ChaCha8Rng, nonneg: bool) -> DesignMatrix {
        DesignMatrix::from_fn(rows, cols, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            if nonneg { v.abs() } else { v }
        })
    }

    /// Normal-equation solve by explicit inversion, independent of the Cholesky path.
    fn inverse_oracle(psi: &DesignMatrix, y: &[f64], alpha: &[f64], delta: f64) -> Vec<f64> {
        let x = psi.to_dmatrix();
        let a = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(alpha));
        let lhs = x.transpose() * a * &x + nalgebra::DMatrix::identity(psi.cols, psi.cols) * delta;
        let rhs = x.transpose() * nalgebra::DVector::from_column_slice(y);
        let inv = lhs.try_inverse().unwrap();
        (inv * rhs).iter().copied().collect()
    }

    #[test]
    fn wls_intercept_only_is_mean() {
        let psi = DesignMatrix::from_fn(2, 1, |_, _| 1.0);
        let w = wls_update_w1(&psi, &[1.0, 3.0], &[1.0, 1.0], 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wls_matches_inverse_oracle_and_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = random_design(50, 5, &mut rng, false);
        let y: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
        let alpha: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..3.0)).collect();
        let delta = 1e-3;
        let w = wls_update_w1(&psi, &y, &alpha, delta).unwrap();
        let oracle = inverse_oracle(&psi, &y, &alpha, delta);
        for (a, b) in w.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        let fitted = psi.mul_vec(&w);
        let resid: Vec<f64> = y.iter().zip(&fitted).zip(&alpha).map(|((y, f), a)| y - a * f).collect();
        let g = psi.tr_mul_vec(&resid);
        let scale = psi.tr_mul_vec(&y).iter().map(|v| v.abs()).fold(1.0, f64::max);
        let norm = g.iter().zip(&w).map(|(g, w)| (g - delta * w).powi(2)).sum::<f64>().sqrt();
        assert!(norm / scale < 1e-8);
    }

    #[test]
    fn wls_unit_weights_is_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let psi = random_design(40, 3, &mut rng, false);
        let y: Vec<f64> = (0..40).map(|_| rng.sample(StandardNormal)).collect();
        let w = wls_update_w1(&psi, &y, &vec![1.0; 40], 0.0).unwrap();
        let x = psi.to_dmatrix();
        let ols = x.clone().svd(true, true).solve(&nalgebra::DVector::from_column_slice(&y), 1e-14).unwrap();
        for (a, b) in w.iter().zip(ols.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn wls_singular_without_prior() {
        let psi = DesignMatrix::from_fn(10, 2, |_, _| 1.0);
        let r = wls_update_w1(&psi, &[0.5; 10], &[1.0; 10], 0.0);
        assert!(matches!(r, Err(Error::Singular { dim: 2 })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let psi = random_design(30, 3, &mut rng, false);
            let phi = random_design(30, 3, &mut rng, true);
            let y: Vec<f64> = (0..30).map(|_| rng.sample(StandardNormal)).collect();
            let w = LinearLSNMWeights {
                w1: (0..3).map(|_| rng.sample(StandardNormal)).collect(),
                w2: (0..3).map(|_| rng.random_range(0.2..1.5)).collect(),
            };
            let g = log_likelihood_gradient(&psi, &phi, &y, &w);
            let flat = w.flat();
            for k in 0..flat.len() {
                let h = 1e-5;
                let mut a = flat.clone();
                let mut b = flat.clone();
                a[k] += h;
                b[k] -= h;
                let fa = log_likelihood(&psi, &phi, &y, &LinearLSNMWeights::from_flat(&a, 3)).unwrap();
                let fb = log_likelihood(&psi, &phi, &y, &LinearLSNMWeights::from_flat(&b, 3)).unwrap();
                let fd = (fa - fb) / (2.0 * h);
                assert!((g[k] - fd).abs() <= 1e-5 * g[k].abs().max(1.0), "k={k}: {} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn fisher_bias_only_single_point() {
        let ones = DesignMatrix::from_fn(1, 1, |_, _| 1.0);
        let w = LinearLSNMWeights { w1: vec![0.3], w2: vec![0.7] };
        assert!(fisher_rank_check(&ones, &ones, &w).positive_definite);
    }

    #[test]
    fn fisher_duplicated_rows_rank_deficient() {
        let row = [0.4, 1.2, 0.3];
        let d = DesignMatrix::from_fn(25, 3, |_, j| row[j]);
        let w = LinearLSNMWeights { w1: vec![0.1, -0.2, 0.5], w2: vec![0.3, 0.2, 0.9] };
        let chk = fisher_rank_check(&d, &d, &w);
        assert!(!chk.positive_definite, "{chk:?}");
    }

    #[test]
    fn fisher_random_design_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let psi = random_design(200, 5, &mut rng, false);
        let phi = random_design(200, 5, &mut rng, true);
        let w = LinearLSNMWeights { w1: vec![0.5; 5], w2: vec![0.4; 5] };
        let chk = fisher_rank_check(&psi, &phi, &w);
        assert!(chk.positive_definite);
        // Eigen-decomposition oracle on the explicitly assembled information matrix.
        let h = log_likelihood_hessian(&psi, &phi, &vec![0.0; 200], &w) / -200.0;
        let ev = h.symmetric_eigenvalues();
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - chk.min_eigenvalue).abs() < 1e-10 * chk.max_eigenvalue);
    }

    fn heteroscedastic_sample(n: usize, seed: u64) -> SamplePair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = x
            .iter()
            .map(|&x| x.sin() + (0.2 + 0.3 * x * x).sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        SamplePair::new(x, y).unwrap()
    }

    #[test]
    fn objective_trace_is_monotone_in_both_modes() {
        let pair = heteroscedastic_sample(400, 21);
        let map = build_spline_map(&pair.x, 3, 8).unwrap();
        for mode in [W2Update::Profiled, W2Update::Alternating] {
            let cfg = ConcaveFitConfig { w2_update: mode, ..Default::default() };
            let fit = fit_concave(&pair, &map, &map, &cfg).unwrap();
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{mode:?}: {} -> {}", w[0], w[1]);
            }
            assert!(fit.sigma_hat.iter().all(|&s| s > 0.0));
            assert!(fit.loglik.total.is_finite());
        }
    }

    #[test]
    fn modes_reach_the_same_optimum() {
        let pair = heteroscedastic_sample(300, 22);
        let map = build_spline_map(&pair.x, 3, 6).unwrap();
        let prof = fit_concave(&pair, &map, &map, &ConcaveFitConfig::default()).unwrap();
        let alt_cfg = ConcaveFitConfig {
            w2_update: W2Update::Alternating,
            max_outer_iters: 5000,
            loglik_tol: 1e-10,
            ..Default::default()
        };
        let alt = fit_concave(&pair, &map, &map, &alt_cfg).unwrap();
        assert!(prof.converged);
        assert!((prof.loglik.total - alt.loglik.total).abs() < 1e-3, "{} vs {}", prof.loglik.total, alt.loglik.total);
    }

    #[test]
    fn homoscedastic_data_gives_flat_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|&x| x + rng.sample::<f64, _>(StandardNormal)).collect();
        let pair = SamplePair::new(x, y).unwrap();
        let map = build_spline_map(&pair.x, 5, 25).unwrap();
        let fit = fit_concave(&pair, &map, &map, &ConcaveFitConfig::default()).unwrap();
        let bulk = || pair.x.iter().zip(&fit.sigma_hat).filter(|(x, _)| x.abs() < 2.0).map(|(_, &s)| s);
        let max = bulk().fold(0.0, f64::max);
        let min = bulk().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1.5, "ratio {}", max / min);
    }

    #[test]
    fn reported_loglik_matches_predictor() {
        let pair = heteroscedastic_sample(200, 24);
        let map = build_spline_map(&pair.x, 5, 10).unwrap();
        let fit = fit_concave(&pair, &map, &map, &ConcaveFitConfig::default()).unwrap();
        let nat = fit.predictor.natural_params(&pair.x);
        let recomputed: f64 = pair.y.iter().zip(&nat).map(|(&y, &p)| p.loglik(y)).sum();
        assert!((recomputed - fit.loglik.total).abs() < 1e-9 * fit.loglik.total.abs().max(1.0));
    }
}
