//! Ridge regression by normal equations on standardized features.
//!
//! Minimizes `‖y − Xw − b‖² + λ·Σ (σ_j w_j)²`, i.e. the usual ridge
//! objective on columns scaled to zero mean and unit variance, with the
//! scaling folded back into `w` and `b`. Constant columns get weight 0.
//! The primal system is used when there are no more active columns than
//! rows, the dual (kernel) system otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Regressor;
use super::linalg::{cholesky_solve, dot};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl Regressor for RidgeModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, x)
    }

    fn n_features(&self) -> usize {
        self.weights.len()
    }
}

enum System {
    /// `ZᵀZ` over active columns.
    Primal { gram: Vec<f64>, zty: Vec<f64> },
    /// `ZZᵀ` over rows.
    Dual { kernel: Vec<f64> },
}

/// Standardized design shared across a grid of `λ` values.
pub struct RidgeProblem {
    n_rows: usize,
    n_features: usize,
    active: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Row-major standardized active columns, n_rows × active.len().
    z: Vec<f64>,
    y_mean: f64,
    y_centered: Vec<f64>,
    system: System,
}

impl RidgeProblem {
    pub fn new(x: &[&[f64]], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("ridge needs at least 2 rows, got {n}")));
        }
        if y.len() != n {
            return Err(Error::InvalidArgument("row/target count mismatch".into()));
        }
        let p = x[0].len();
        if x.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("ragged feature matrix".into()));
        }
        let nf = n as f64;
        let mut means = vec![0.0; p];
        for row in x {
            for (m, v) in means.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= nf);
        let mut vars = vec![0.0; p];
        for row in x {
            for ((s, v), m) in vars.iter_mut().zip(row.iter()).zip(&means) {
                let d = v - m;
                *s += d * d;
            }
        }
        let scales: Vec<f64> = vars.iter().map(|s| (s / nf).sqrt()).collect();
        let active: Vec<usize> = (0..p).filter(|&j| scales[j] > 1e-12 * (1.0 + means[j].abs())).collect();
        let k = active.len();
        let mut z = vec![0.0; n * k];
        for (i, row) in x.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                z[i * k + c] = (row[j] - means[j]) / scales[j];
            }
        }
        let y_mean = y.iter().sum::<f64>() / nf;
        let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

        let system = if k <= n {
            let mut gram = vec![0.0; k * k];
            gram.par_chunks_mut(k.max(1)).enumerate().for_each(|(a, out)| {
                if a >= k {
                    return;
                }
                for b in 0..k {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += z[i * k + a] * z[i * k + b];
                    }
                    out[b] = s;
                }
            });
            let mut zty = vec![0.0; k];
            for (c, out) in zty.iter_mut().enumerate() {
                *out = (0..n).map(|i| z[i * k + c] * y_centered[i]).sum();
            }
            System::Primal { gram, zty }
        } else {
            let mut kernel = vec![0.0; n * n];
            kernel.par_chunks_mut(n).enumerate().for_each(|(a, out)| {
                let ra = &z[a * k..(a + 1) * k];
                for (b, o) in out.iter_mut().enumerate() {
                    *o = dot(ra, &z[b * k..(b + 1) * k]);
                }
            });
            System::Dual { kernel }
        };
        Ok(RidgeProblem { n_rows: n, n_features: p, active, means, scales, z, y_mean, y_centered, system })
    }

    pub fn solve(&self, lambda: f64) -> Result<RidgeModel> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {lambda}")));
        }
        let k = self.active.len();
        let n = self.n_rows;
        let w_std = if k == 0 {
            Vec::new()
        } else {
            match &self.system {
                System::Primal { gram, zty } => {
                    let mut a = gram.clone();
                    for c in 0..k {
                        a[c * k + c] += lambda;
                    }
                    cholesky_solve(&mut a, k, zty, PIVOT_TOL).ok_or(Error::RankDeficient)?
                }
                System::Dual { kernel } => {
                    let mut a = kernel.clone();
                    for i in 0..n {
                        a[i * n + i] += lambda;
                    }
                    let alpha = cholesky_solve(&mut a, n, &self.y_centered, PIVOT_TOL).ok_or(Error::RankDeficient)?;
                    let mut w = vec![0.0; k];
                    for (i, a_i) in alpha.iter().enumerate() {
                        for (c, wc) in w.iter_mut().enumerate() {
                            *wc += self.z[i * k + c] * a_i;
                        }
                    }
                    w
                }
            }
        };
        let mut weights = vec![0.0; self.n_features];
        let mut intercept = self.y_mean;
        for (c, &j) in self.active.iter().enumerate() {
            let w = w_std[c] / self.scales[j];
            weights[j] = w;
            intercept -= w * self.means[j];
        }
        if weights.iter().any(|w| !w.is_finite()) || !intercept.is_finite() {
            return Err(Error::RankDeficient);
        }
        Ok(RidgeModel { weights, intercept, lambda })
    }
}

pub fn train_ridge(x: &[&[f64]], y: &[f64], lambda: f64) -> Result<RidgeModel> {
    RidgeProblem::new(x, y)?.solve(lambda)
}
