// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Aggregation, IcnetError};
use crate::numerics::Matrix;

/// Pools `A` and `X` over the gate axis and concatenates the results:
/// `n` entries from `A` followed by `F` entries from `X`.
pub fn baseline_aggregate_features(a: &Matrix, x: &Matrix, mode: Aggregation) -> Result<Vec<f64>, IcnetError> {
    let scale = match mode {
        Aggregation::Sum => 1.0,
        Aggregation::Mean => 1.0 / a.rows().max(1) as f64,
        Aggregation::Attention => {
            return Err(IcnetError::Config("flat baselines pool by sum or mean".into()));
        }
    };
    if a.rows() != x.rows() {
        return Err(IcnetError::GraphShape {
            rows: a.rows(),
            cols: a.cols(),
            n: x.rows(),
        });
    }
    Ok(a.col_sums().into_iter().chain(x.col_sums()).map(|v| v * scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Features beyond the fitted width are ignored; missing ones count as 0.
    pub fn predict(&self, features: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Least squares with an unpenalized intercept and ridge penalty `λ‖w‖²`.
/// With `λ = 0` and a rank-deficient design, returns the minimum-norm
/// weights.
pub fn fit_linear(features: &[Vec<f64>], labels: &[f64], ridge_lambda: f64) -> Result<LinearModel, IcnetError> {
    let m = features.len();
    if m == 0 || labels.len() != m {
        return Err(IcnetError::Degenerate(format!(
            "{m} feature rows for {} labels",
            labels.len()
        )));
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(IcnetError::Degenerate(format!("ridge lambda {ridge_lambda}")));
    }
    let p = features[0].len();
    if features.iter().any(|r| r.len() != p) {
        return Err(IcnetError::Degenerate("ragged feature rows".into()));
    }
    let y_mean = labels.iter().sum::<f64>() / m as f64;
    if p == 0 {
        return Ok(LinearModel {
            weights: vec![],
            intercept: y_mean,
        });
    }
    let x_mean: Vec<f64> = (0..p)
        .map(|j| features.iter().map(|r| r[j]).sum::<f64>() / m as f64)
        .collect();
    let xc = DMatrix::from_fn(m, p, |i, j| features[i][j] - x_mean[j]);
    let yc = DVector::from_iterator(m, labels.iter().map(|y| y - y_mean));

    let svd = xc.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let sigma = &svd.singular_values;
    let s_max = sigma.iter().copied().fold(0.0, f64::max);
    let tol = s_max * m.max(p) as f64 * f64::EPSILON;
    let uty = u.transpose() * &yc;
    let mut coef = DVector::zeros(sigma.len());
    for k in 0..sigma.len() {
        let s = sigma[k];
        coef[k] = if ridge_lambda == 0.0 {
            if s > tol {
                uty[k] / s
            } else {
                0.0
            }
        } else {
            uty[k] * s / (s * s + ridge_lambda)
        };
    }
    let w = v_t.transpose() * coef;
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}
