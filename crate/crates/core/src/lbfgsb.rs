//! Limited-memory quasi-Newton minimization over the nonnegative orthant.
//!
//! Variables sitting on the bound whose gradient points outward are held
//! fixed for the step; the two-loop recursion runs on the remaining free
//! variables, and the trial point is projected back onto `x ≥ 0` before a
//! backtracking Armijo test. An objective returning `None` (or a non-finite
//! value) marks an infeasible trial point and shrinks the step.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct InnerOutcome {
    pub iters: usize,
    pub evals: usize,
    /// Projected gradient vanished or no descent step could be found.
    pub stationary: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct BoxLbfgs {
    memory: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    pub pg_tol: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 50;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BoxLbfgs {
    pub fn new(memory: usize) -> Self {
        Self { memory, s: VecDeque::new(), y: VecDeque::new(), pg_tol: 1e-10 }
    }

    fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
    }

    fn direction(&self, g: &[f64], free: &[bool]) -> Vec<f64> {
        let mask = |v: &mut Vec<f64>| {
            for (a, &f) in v.iter_mut().zip(free) {
                if !f {
                    *a = 0.0;
                }
            }
        };
        let mut q = g.to_vec();
        mask(&mut q);
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        let mut rho = vec![0.0; k];
        for i in (0..k).rev() {
            rho[i] = 1.0 / dot(&self.y[i], &self.s[i]);
            alpha[i] = rho[i] * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&self.s[k - 1], &self.y[k - 1]) / dot(&self.y[k - 1], &self.y[k - 1]);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let beta = rho[i] * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        mask(&mut q);
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    /// Run up to `max_iters` iterations from `state`, updating it in place.
    pub fn minimize<F>(&mut self, state: &mut Iterate, mut objective: F, max_iters: usize) -> InnerOutcome
    where
        F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    {
        let mut out = InnerOutcome::default();
        let n = state.x.len();
        while out.iters < max_iters {
            let free: Vec<bool> = (0..n).map(|i| state.x[i] > 0.0 || state.g[i] < 0.0).collect();
            let pg_norm = (0..n)
                .filter(|&i| free[i])
                .map(|i| state.g[i].abs())
                .fold(0.0f64, f64::max);
            if pg_norm <= self.pg_tol * (1.0 + state.f.abs()) {
                out.stationary = true;
                break;
            }
            out.iters += 1;

            let mut accepted = None;
            for attempt in 0..2 {
                let mut d = self.direction(&state.g, &free);
                if !(dot(&state.g, &d) < 0.0) {
                    self.reset();
                    d = (0..n).map(|i| if free[i] { -state.g[i] } else { 0.0 }).collect();
                }
                let mut step = if self.s.is_empty() {
                    let dn = dot(&d, &d).sqrt();
                    (1.0 / dn).min(1.0)
                } else {
                    1.0
                };
                for _ in 0..MAX_BACKTRACK {
                    let trial: Vec<f64> = state.x.iter().zip(&d).map(|(x, di)| (x + step * di).max(0.0)).collect();
                    out.evals += 1;
                    if let Some((f, g)) = objective(&trial) {
                        let moved: f64 = state.g.iter().zip(trial.iter().zip(&state.x)).map(|(g, (a, b))| g * (a - b)).sum();
                        if f.is_finite() && f <= state.f + ARMIJO * moved.min(0.0) {
                            accepted = Some((trial, f, g));
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if accepted.is_some() || attempt == 1 || self.s.is_empty() {
                    break;
                }
                // Stale curvature pairs: retry once along the projected gradient.
                self.reset();
            }

            let Some((x_new, f_new, g_new)) = accepted else {
                out.stationary = true;
                break;
            };
            let s: Vec<f64> = x_new.iter().zip(&state.x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&state.g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                if self.s.len() == self.memory {
                    self.s.pop_front();
                    self.y.pop_front();
                }
                self.s.push_back(s);
                self.y.push_back(y);
            }
            state.x = x_new;
            state.f = f_new;
            state.g = g_new;
        }
        out
    }
}
