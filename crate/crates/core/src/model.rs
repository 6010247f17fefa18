//! Heteroscedastic Gaussian in natural parametrization.
//!
//! A conditional Gaussian `N(μ, σ²)` is represented by `η₁ = μ/σ²` and
//! `η₂ = −1/(2σ²) < 0`. In these coordinates the log-density
//!
//! ```text
//! log p(y | η) = −½ log 2π + η₁ y + η₂ y² + η₁²/(4η₂) + ½ log(−2η₂)
//! ```
//!
//! is strictly concave in `(η₁, η₂)`. All log-likelihoods are in nats.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `−½ log(2π)`.
pub const LOG_NORM_CONST: f64 = -0.918_938_533_204_672_8;

/// Smallest variance produced when converting estimator outputs.
pub const VARIANCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalParams {
    eta1: f64,
    eta2: f64,
}

impl NaturalParams {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        if !(eta2 < 0.0) || !eta2.is_finite() || !eta1.is_finite() {
            return Err(Error::InvalidNaturalParams { eta2 });
        }
        Ok(Self { eta1, eta2 })
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    pub fn to_mean_var(self) -> MeanVarParams {
        nat_to_meanvar(self)
    }

    pub fn loglik(&self, y: f64) -> f64 {
        loglik_point(y, *self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVarParams {
    mu: f64,
    var: f64,
}

impl MeanVarParams {
    pub fn new(mu: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidVariance(var));
        }
        Ok(Self { mu, var })
    }

    /// Build from raw estimator output, clamping the variance at [`VARIANCE_FLOOR`].
    pub fn floored(mu: f64, var: f64) -> Self {
        let var = if var.is_nan() { VARIANCE_FLOOR } else { var.max(VARIANCE_FLOOR) };
        Self { mu, var }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn var(&self) -> f64 {
        self.var
    }

    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }

    pub fn to_natural(self) -> NaturalParams {
        meanvar_to_nat(self)
    }

    /// Gaussian log-density evaluated directly in mean/variance form.
    pub fn log_density(&self, y: f64) -> f64 {
        let r = y - self.mu;
        -0.5 * (2.0 * PI * self.var).ln() - r * r / (2.0 * self.var)
    }
}

pub fn nat_to_meanvar(p: NaturalParams) -> MeanVarParams {
    MeanVarParams {
        mu: -p.eta1 / (2.0 * p.eta2),
        var: -1.0 / (2.0 * p.eta2),
    }
}

pub fn meanvar_to_nat(p: MeanVarParams) -> NaturalParams {
    NaturalParams {
        eta1: p.mu / p.var,
        eta2: -1.0 / (2.0 * p.var),
    }
}

#[inline]
pub fn loglik_point(y: f64, p: NaturalParams) -> f64 {
    let NaturalParams { eta1, eta2 } = p;
    LOG_NORM_CONST + eta1 * y + eta2 * y * y + eta1 * eta1 / (4.0 * eta2) + 0.5 * (-2.0 * eta2).ln()
}

/// Gradient and Hessian of [`loglik_point`] with respect to `(η₁, η₂)`.
///
/// The Hessian does not depend on `y`; its determinant is `−1/(4η₂³) > 0`
/// and its `(0,0)` entry `1/(2η₂)` is negative, so it is negative definite.
pub fn loglik_grad_hess_eta(y: f64, p: NaturalParams) -> ([f64; 2], [[f64; 2]; 2]) {
    let NaturalParams { eta1, eta2 } = p;
    let e2sq = eta2 * eta2;
    let grad = [
        y + eta1 / (2.0 * eta2),
        y * y - eta1 * eta1 / (4.0 * e2sq) + 1.0 / (2.0 * eta2),
    ];
    let off = -eta1 / (2.0 * e2sq);
    let hess = [
        [1.0 / (2.0 * eta2), off],
        [off, eta1 * eta1 / (2.0 * e2sq * eta2) - 1.0 / (2.0 * e2sq)],
    ];
    (grad, hess)
}

/// Sum of per-point conditional log-densities, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikReport {
    pub total: f64,
    pub per_point: Vec<f64>,
}

impl LogLikReport {
    pub fn from_per_point(per_point: Vec<f64>) -> Self {
        let total = per_point.iter().sum();
        Self { total, per_point }
    }

    /// Evaluate each `y[i]` under `params[i]`.
    pub fn evaluate(y: &[f64], params: &[NaturalParams]) -> Self {
        Self::from_per_point(y.iter().zip(params).map(|(&y, &p)| loglik_point(y, p)).collect())
    }

    pub fn mean(&self) -> f64 {
        if self.per_point.is_empty() {
            0.0
        } else {
            self.total / self.per_point.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn np(e1: f64, e2: f64) -> NaturalParams {
        NaturalParams::new(e1, e2).unwrap()
    }

    #[test]
    fn conversions_examples() {
        let m = np(0.0, -0.5).to_mean_var();
        assert_eq!((m.mu(), m.var()), (0.0, 1.0));
        let m = np(0.5, -0.25).to_mean_var();
        assert_eq!((m.mu(), m.var()), (1.0, 2.0));

        let n = MeanVarParams::new(0.0, 1.0).unwrap().to_natural();
        assert_eq!((n.eta1(), n.eta2()), (0.0, -0.5));
        let n = MeanVarParams::new(1.0, 2.0).unwrap().to_natural();
        assert_eq!((n.eta1(), n.eta2()), (0.5, -0.25));
        let n = MeanVarParams::new(-3.0, 0.25).unwrap().to_natural();
        assert_eq!((n.eta1(), n.eta2()), (-12.0, -2.0));
    }

    #[test]
    fn constructors_reject_invalid() {
        assert!(NaturalParams::new(0.0, 0.0).is_err());
        assert!(NaturalParams::new(0.0, 1.0).is_err());
        assert!(NaturalParams::new(f64::NAN, -1.0).is_err());
        assert!(MeanVarParams::new(0.0, 0.0).is_err());
        assert!(MeanVarParams::new(0.0, -1.0).is_err());
        assert_eq!(MeanVarParams::floored(0.0, 0.0).var(), VARIANCE_FLOOR);
    }

    #[test]
    fn loglik_examples() {
        assert!((loglik_point(0.0, np(0.0, -0.5)) + 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((loglik_point(1.0, np(0.0, -0.5)) + 1.418_938_533_204_672_7).abs() < 1e-12);
        // N(2; 1, 4) evaluated independently.
        let direct = -0.5 * (2.0 * PI * 4.0).ln() - 1.0 / 8.0;
        let p = MeanVarParams::new(1.0, 4.0).unwrap().to_natural();
        assert!((loglik_point(2.0, p) - direct).abs() < 1e-12);
    }

    #[test]
    fn hessian_at_standard_normal() {
        let (_, h) = loglik_grad_hess_eta(0.3, np(0.0, -0.5));
        assert_eq!(h, [[-1.0, 0.0], [0.0, -2.0]]);
    }

    #[test]
    fn density_integrates_to_one() {
        for &(mu, var) in &[(0.0, 1.0), (3.0, 0.01), (-2.0, 25.0)] {
            let p = MeanVarParams::new(mu, var).unwrap().to_natural();
            let sd: f64 = (var as f64).sqrt();
            let (lo, hi) = (mu - 15.0 * sd, mu + 15.0 * sd);
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let mut s = 0.5 * (loglik_point(lo, p).exp() + loglik_point(hi, p).exp());
            for i in 1..n {
                s += loglik_point(lo + i as f64 * h, p).exp();
            }
            assert!((s * h - 1.0).abs() < 1e-6, "integral {} for ({mu},{var})", s * h);
        }
    }

    fn natural() -> impl Strategy<Value = NaturalParams> {
        (-20.0..20.0f64, 0.01..20.0f64).prop_map(|(e1, s)| np(e1, -s))
    }

    proptest! {
        #[test]
        fn round_trip(mu in -1e6..1e6f64, lv in -6.0..6.0f64) {
            let var = 10f64.powf(lv);
            let m = MeanVarParams::new(mu, var).unwrap();
            let back = m.to_natural().to_mean_var();
            prop_assert!((back.mu() - mu).abs() <= 1e-12 * mu.abs().max(1e-300) + 1e-300);
            prop_assert!((back.var() - var).abs() <= 1e-12 * var);
            let p = m.to_natural();
            let again = p.to_mean_var().to_natural();
            prop_assert!((again.eta1() - p.eta1()).abs() <= 1e-12 * p.eta1().abs());
            prop_assert!((again.eta2() - p.eta2()).abs() <= 1e-12 * p.eta2().abs());
        }

        #[test]
        fn natural_form_matches_direct_density(y in -10.0..10.0f64, p in natural()) {
            let direct = p.to_mean_var().log_density(y);
            prop_assert!((loglik_point(y, p) - direct).abs() < 1e-10 * (1.0 + direct.abs()));
        }

        #[test]
        fn hessian_negative_definite(y in -5.0..5.0f64, p in natural()) {
            let (_, h) = loglik_grad_hess_eta(y, p);
            prop_assert_eq!(h[0][1], h[1][0]);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let expected = -1.0 / (4.0 * p.eta2().powi(3));
            prop_assert!((det - expected).abs() <= 1e-8 * expected.abs());
            prop_assert!(h[0][0] < 0.0 && det > 0.0);
            // Eigenvalues of the symmetric 2x2.
            let tr = h[0][0] + h[1][1];
            let disc = ((h[0][0] - h[1][1]).powi(2) + 4.0 * h[0][1] * h[0][1]).sqrt();
            prop_assert!(0.5 * (tr + disc) < 0.0);
        }

        #[test]
        fn gradient_matches_central_differences(y in -3.0..3.0f64, e1 in -3.0..3.0f64, s in 0.1..3.0f64) {
            let p = np(e1, -s);
            let (g, _) = loglik_grad_hess_eta(y, p);
            let h = 1e-5;
            let d1 = (loglik_point(y, np(e1 + h, -s)) - loglik_point(y, np(e1 - h, -s))) / (2.0 * h);
            let d2 = (loglik_point(y, np(e1, -s + h)) - loglik_point(y, np(e1, -s - h))) / (2.0 * h);
            prop_assert!((g[0] - d1).abs() <= 1e-6 * g[0].abs().max(1.0));
            prop_assert!((g[1] - d2).abs() <= 1e-6 * g[1].abs().max(1.0));
        }
    }

    #[test]
    fn report_total_is_sum() {
        let r = LogLikReport::from_per_point(vec![-1.0, -2.5, -0.25]);
        assert!((r.total + 3.75).abs() < 1e-12);
        assert!((r.mean() + 1.25).abs() < 1e-12);
    }
}
