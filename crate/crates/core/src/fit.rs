//! Estimator output shared by every fitting routine.

use serde::{Deserialize, Serialize};

use crate::concave::LinearLSNMWeights;
use crate::features::{dot, SplineFeatureMap};
use crate::mlp::MlpParams;
use crate::model::{meanvar_to_nat, LogLikReport, MeanVarParams, NaturalParams, VARIANCE_FLOOR};

/// A fitted conditional model `x ↦ N(μ(x), σ²(x))` that can be evaluated at new inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    /// `η₁ = ψ(x)ᵀw₁`, `η₂ = −φ(x)ᵀw₂`.
    NaturalLinear {
        psi: SplineFeatureMap,
        phi: SplineFeatureMap,
        weights: LinearLSNMWeights,
    },
    /// `μ = ψ(x)ᵀβ`, `log σ² = φ(x)ᵀγ + offset`.
    MeanLogVariance {
        psi: SplineFeatureMap,
        phi: SplineFeatureMap,
        mean_coef: Vec<f64>,
        log_var_coef: Vec<f64>,
        log_var_offset: f64,
        variance_floor: f64,
    },
    /// `μ = ψ(x)ᵀβ` with one global variance.
    Homoscedastic {
        psi: SplineFeatureMap,
        mean_coef: Vec<f64>,
        var: f64,
    },
    Network {
        params: MlpParams,
    },
}

impl Predictor {
    pub fn natural_params(&self, x: &[f64]) -> Vec<NaturalParams> {
        match self {
            Predictor::NaturalLinear { psi, phi, weights } => {
                let p = psi.evaluate(x);
                let q = phi.evaluate(x);
                (0..x.len())
                    .map(|i| {
                        let eta1 = dot(p.row(i), &weights.w1);
                        let s = dot(q.row(i), &weights.w2).max(0.5 / 1e300);
                        NaturalParams::new(eta1, -s).expect("eta2 < 0 by construction")
                    })
                    .collect()
            }
            Predictor::Network { params } => crate::mlp::mlp_forward(params, x),
            _ => self.predict(x).into_iter().map(meanvar_to_nat).collect(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<MeanVarParams> {
        match self {
            Predictor::NaturalLinear { .. } | Predictor::Network { .. } => self
                .natural_params(x)
                .into_iter()
                .map(|p| {
                    let m = p.to_mean_var();
                    MeanVarParams::floored(m.mu(), m.var())
                })
                .collect(),
            Predictor::MeanLogVariance { psi, phi, mean_coef, log_var_coef, log_var_offset, variance_floor } => {
                let p = psi.evaluate(x);
                let q = phi.evaluate(x);
                (0..x.len())
                    .map(|i| {
                        let mu = dot(p.row(i), mean_coef);
                        let var = (dot(q.row(i), log_var_coef) + log_var_offset).exp().max(*variance_floor);
                        MeanVarParams::floored(mu, var)
                    })
                    .collect()
            }
            Predictor::Homoscedastic { psi, mean_coef, var } => {
                let p = psi.evaluate(x);
                (0..x.len())
                    .map(|i| MeanVarParams::floored(dot(p.row(i), mean_coef), *var))
                    .collect()
            }
        }
    }
}

/// Fitted location-scale model on a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLSNM {
    pub predictor: Predictor,
    /// `f̂(xᵢ)` on the training inputs.
    pub mu_hat: Vec<f64>,
    /// `ĝ(xᵢ) > 0` on the training inputs.
    pub sigma_hat: Vec<f64>,
    /// Unpenalized data log-likelihood at the returned parameters.
    pub loglik: LogLikReport,
    pub converged: bool,
    pub iters: usize,
    /// Estimator-specific progress trace (penalized objective per outer
    /// iteration for the concave fit, mean NLL per step for the network).
    pub objective_trace: Vec<f64>,
}

impl FittedLSNM {
    pub(crate) fn from_natural(
        predictor: Predictor,
        y: &[f64],
        params: &[NaturalParams],
        converged: bool,
        iters: usize,
        objective_trace: Vec<f64>,
    ) -> Self {
        let loglik = LogLikReport::evaluate(y, params);
        let (mu_hat, sigma_hat) = params
            .iter()
            .map(|p| {
                let m = p.to_mean_var();
                (m.mu(), m.var().max(VARIANCE_FLOOR).sqrt())
            })
            .unzip();
        Self { predictor, mu_hat, sigma_hat, loglik, converged, iters, objective_trace }
    }

    pub(crate) fn from_mean_var(
        predictor: Predictor,
        y: &[f64],
        params: &[MeanVarParams],
        converged: bool,
        iters: usize,
        objective_trace: Vec<f64>,
    ) -> Self {
        let per_point = y.iter().zip(params).map(|(&y, p)| p.log_density(y)).collect();
        Self {
            predictor,
            mu_hat: params.iter().map(MeanVarParams::mu).collect(),
            sigma_hat: params.iter().map(MeanVarParams::sd).collect(),
            loglik: LogLikReport::from_per_point(per_point),
            converged,
            iters,
            objective_trace,
        }
    }

    pub fn mean_loglik(&self) -> f64 {
        self.loglik.mean()
    }
}
