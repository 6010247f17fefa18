//! B-spline feature maps and data standardization.
//!
//! The same nonnegative basis serves both the `η₁` features `ψ(x)` and the
//! `η₂` features `φ(x)`, since the latter must lie in the nonnegative orthant.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::SamplePair;
use crate::error::{Error, Result};

/// B-spline basis over quantile knots.
///
/// `order` is the polynomial degree of each piece (0 = piecewise constant),
/// so the basis has `n_knots + order − 1` functions. The knot vector is
/// extended beyond the boundary knots with the spacing of the outermost
/// intervals; inputs outside `[first knot, last knot]` are clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFeatureMap {
    pub order: usize,
    pub n_knots: usize,
    pub knot_positions: Vec<f64>,
    pub include_bias: bool,
    extended: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    /// Build from row vectors; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch { left: cols, right: r.len() });
            }
            values.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, values })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// `X w` for a coefficient vector of length `cols`.
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), w)).collect()
    }

    /// `Xᵀ v` for a vector of length `rows`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += vi * x;
            }
        }
        out
    }

    /// `Xᵀ diag(weights) X`, skipping zero entries of each row.
    pub fn weighted_gram(&self, weights: &[f64]) -> DMatrix<f64> {
        let d = self.cols;
        let mut g = DMatrix::zeros(d, d);
        let mut nz: Vec<(usize, f64)> = Vec::with_capacity(d);
        for (i, &a) in weights.iter().enumerate() {
            nz.clear();
            nz.extend(self.row(i).iter().copied().enumerate().filter(|&(_, v)| v != 0.0));
            for (p, &(j, rj)) in nz.iter().enumerate() {
                let arj = a * rj;
                for &(k, rk) in &nz[p..] {
                    g[(j, k)] += arj * rk;
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                g[(j, k)] = g[(k, j)];
            }
        }
        g
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    /// Keep only the listed rows.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, values }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn count_distinct(values: &[f64]) -> usize {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s.len()
}

pub fn build_spline_map(x_train: &[f64], order: usize, n_knots: usize) -> Result<SplineFeatureMap> {
    if n_knots < 2 {
        return Err(Error::Config(format!("n_knots must be at least 2, got {n_knots}")));
    }
    if let Some(index) = x_train.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "x_train", index });
    }
    let mut sorted = x_train.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < n_knots {
        return Err(Error::TooFewDistinct { got: distinct.len(), required: n_knots });
    }

    let mut knots: Vec<f64> = (0..n_knots)
        .map(|k| quantile_sorted(&sorted, k as f64 / (n_knots - 1) as f64))
        .collect();
    knots.dedup();
    if knots.len() < n_knots {
        warn!(
            "{} of {} quantile knots coincide (tied inputs); using {} knots",
            n_knots - knots.len(),
            n_knots,
            knots.len()
        );
    }
    if knots.len() < 2 {
        return Err(Error::TooFewDistinct { got: 1, required: 2 });
    }
    SplineFeatureMap::from_knots(knots, order, true)
}

impl SplineFeatureMap {
    /// Build from explicit strictly increasing boundary/interior knots.
    pub fn from_knots(knots: Vec<f64>, order: usize, include_bias: bool) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Config("at least two knots are required".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("knots must be strictly increasing".into()));
        }
        let n = knots.len();
        let left = knots[1] - knots[0];
        let right = knots[n - 1] - knots[n - 2];
        let mut extended = Vec::with_capacity(n + 2 * order);
        for k in (1..=order).rev() {
            extended.push(knots[0] - k as f64 * left);
        }
        extended.extend_from_slice(&knots);
        for k in 1..=order {
            extended.push(knots[n - 1] + k as f64 * right);
        }
        Ok(Self { order, n_knots: n, knot_positions: knots, include_bias, extended })
    }

    pub fn with_bias(mut self, include_bias: bool) -> Self {
        self.include_bias = include_bias;
        self
    }

    /// Number of spline functions (excluding the bias column).
    pub fn n_splines(&self) -> usize {
        self.n_knots + self.order - 1
    }

    /// Total feature dimension `D`.
    pub fn dim(&self) -> usize {
        self.n_splines() + usize::from(self.include_bias)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knot_positions[0], self.knot_positions[self.n_knots - 1])
    }

    /// Writes the `order + 1` nonzero basis values at `x` into `out` and
    /// returns the index of the first of them.
    fn nonzero_basis(&self, x: f64, out: &mut [f64]) -> usize {
        let p = self.order;
        let (lo, hi) = self.range();
        let x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
        let kp = &self.knot_positions;
        // Interval j with kp[j] <= x < kp[j+1], using the last interval at x = hi.
        let j = match kp.partition_point(|&k| k <= x) {
            0 => 0,
            pp => (pp - 1).min(self.n_knots - 2),
        };
        let span = j + p;
        let u = &self.extended;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        out[0] = 1.0;
        for d in 1..=p {
            left[d] = x - u[span + 1 - d];
            right[d] = u[span + d] - x;
            let mut saved = 0.0;
            for r in 0..d {
                let tmp = out[r] / (right[r + 1] + left[d - r]);
                out[r] = saved + right[r + 1] * tmp;
                saved = left[d - r] * tmp;
            }
            out[d] = saved;
        }
        j
    }

    pub fn evaluate_point(&self, x: f64, row: &mut [f64]) {
        row.iter_mut().for_each(|v| *v = 0.0);
        let mut nz = vec![0.0; self.order + 1];
        let first = self.nonzero_basis(x, &mut nz);
        row[first..first + self.order + 1].copy_from_slice(&nz);
        for v in &mut row[first..first + self.order + 1] {
            // Round-off can leave values like -1e-17.
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if self.include_bias {
            row[self.n_splines()] = 1.0;
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> DesignMatrix {
        let d = self.dim();
        let mut values = vec![0.0; x.len() * d];
        for (i, &xi) in x.iter().enumerate() {
            self.evaluate_point(xi, &mut values[i * d..(i + 1) * d]);
        }
        DesignMatrix { rows: x.len(), cols: d, values }
    }
}

pub fn evaluate(map: &SplineFeatureMap, x: &[f64]) -> DesignMatrix {
    map.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean_x: f64,
    pub std_x: f64,
    pub mean_y: f64,
    pub std_y: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn standardize_vec(v: &[f64], what: &'static str) -> Result<(Vec<f64>, f64, f64)> {
    if v.len() < 2 || v.iter().all(|&a| a == v[0]) {
        return Err(Error::ConstantVector { what });
    }
    let (mean, sd) = mean_std(v);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::ConstantVector { what });
    }
    let out: Vec<f64> = v.iter().map(|a| (a - mean) / sd).collect();
    // A second pass removes the residual rounding in mean and scale.
    let (m2, s2) = mean_std(&out);
    Ok((out.iter().map(|a| (a - m2) / s2).collect(), mean + m2 * sd, sd * s2))
}

impl Standardizer {
    pub fn transform(&self, pair: &SamplePair) -> SamplePair {
        SamplePair {
            x: pair.x.iter().map(|v| (v - self.mean_x) / self.std_x).collect(),
            y: pair.y.iter().map(|v| (v - self.mean_y) / self.std_y).collect(),
        }
    }

    pub fn inverse(&self, pair: &SamplePair) -> SamplePair {
        SamplePair {
            x: pair.x.iter().map(|v| v * self.std_x + self.mean_x).collect(),
            y: pair.y.iter().map(|v| v * self.std_y + self.mean_y).collect(),
        }
    }
}

/// Standardize both coordinates to zero mean and unit population variance.
pub fn standardize(pair: &SamplePair) -> Result<(SamplePair, Standardizer)> {
    let (x, mean_x, std_x) = standardize_vec(&pair.x, "x")?;
    let (y, mean_y, std_y) = standardize_vec(&pair.y, "y")?;
    Ok((SamplePair { x, y }, Standardizer { mean_x, std_x, mean_y, std_y }))
}
