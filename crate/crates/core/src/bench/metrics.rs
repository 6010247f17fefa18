//! Accuracy, area under the decision rate curve, and grid KL divergence.

use serde::{Deserialize, Serialize};

use crate::inference::{Direction, DirectionVerdict};
use crate::model::MeanVarParams;

/// One scored decision: how certain the method was and whether it was right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub pair_id: String,
    pub certainty: f64,
    pub correct: bool,
}

impl VerdictRecord {
    /// Undecided verdicts are never correct.
    pub fn new(pair_id: impl Into<String>, verdict: &DirectionVerdict, truth: Direction) -> Self {
        Self {
            pair_id: pair_id.into(),
            certainty: if verdict.certainty.is_finite() { verdict.certainty } else { 0.0 },
            correct: verdict.direction != Direction::Undecided && verdict.direction == truth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRateCurve {
    /// Records sorted by certainty (descending), ties by `pair_id`.
    pub ordered: Vec<VerdictRecord>,
    /// Accuracy of the first `m` records, for `m = 1..=M`.
    pub prefix_accuracy: Vec<f64>,
    pub audrc: f64,
    pub accuracy: f64,
}

impl DecisionRateCurve {
    /// `m,certainty,correct,prefix_accuracy` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,pair_id,certainty,correct,prefix_accuracy\n");
        for (i, (r, acc)) in self.ordered.iter().zip(&self.prefix_accuracy).enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", i + 1, r.pair_id, r.certainty, u8::from(r.correct), acc));
        }
        out
    }
}

/// Mean over `m` of the accuracy among the `m` most certain decisions.
pub fn audrc(records: &[VerdictRecord]) -> DecisionRateCurve {
    let mut ordered = records.to_vec();
    ordered.sort_by(|a, b| b.certainty.total_cmp(&a.certainty).then_with(|| a.pair_id.cmp(&b.pair_id)));
    let mut hits = 0usize;
    let prefix_accuracy: Vec<f64> = ordered
        .iter()
        .enumerate()
        .map(|(i, r)| {
            hits += usize::from(r.correct);
            hits as f64 / (i + 1) as f64
        })
        .collect();
    let m = prefix_accuracy.len();
    let (audrc, accuracy) = if m == 0 {
        (0.0, 0.0)
    } else {
        (prefix_accuracy.iter().sum::<f64>() / m as f64, prefix_accuracy[m - 1])
    };
    DecisionRateCurve { ordered, prefix_accuracy, audrc, accuracy }
}

/// Fraction correct with per-record weights.
pub fn weighted_accuracy(records: &[VerdictRecord], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    records.iter().zip(weights).filter(|(r, _)| r.correct).map(|(_, w)| w).sum::<f64>() / total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlOrientation {
    /// `KL(p_true ‖ q_est)`.
    #[default]
    TrueToEstimate,
    /// `KL(q_est ‖ p_true)`.
    EstimateToTrue,
}

/// `KL(N(μ_p, σ²_p) ‖ N(μ_q, σ²_q))`.
pub fn gaussian_kl(mu_p: f64, var_p: f64, mu_q: f64, var_q: f64) -> f64 {
    0.5 * (var_p / var_q + (mu_q - mu_p).powi(2) / var_q - 1.0 + (var_q / var_p).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridKl {
    /// Mean KL over the grid, `+∞` if any point was non-finite.
    pub value: f64,
    /// First grid point with a non-finite divergence.
    pub offending_x: Option<f64>,
}

/// Average Gaussian KL between a fitted predictive and the truth over
/// `n_grid` evenly spaced points of `[x_lo, x_hi]`.
pub fn grid_kl(
    predict: impl Fn(&[f64]) -> Vec<MeanVarParams>,
    truth: impl Fn(f64) -> (f64, f64),
    x_lo: f64,
    x_hi: f64,
    n_grid: usize,
    orientation: KlOrientation,
) -> GridKl {
    assert!(n_grid >= 2, "grid needs at least two points");
    let step = (x_hi - x_lo) / (n_grid - 1) as f64;
    let grid: Vec<f64> = (0..n_grid).map(|i| x_lo + i as f64 * step).collect();
    let est = predict(&grid);
    let mut sum = 0.0;
    for (x, q) in grid.iter().zip(&est) {
        let (mu, var) = truth(*x);
        let kl = match orientation {
            KlOrientation::TrueToEstimate => gaussian_kl(mu, var, q.mu(), q.var()),
            KlOrientation::EstimateToTrue => gaussian_kl(q.mu(), q.var(), mu, var),
        };
        if !kl.is_finite() {
            return GridKl { value: f64::INFINITY, offending_x: Some(*x) };
        }
        sum += kl.max(0.0);
    }
    GridKl { value: sum / n_grid as f64, offending_x: None }
}
