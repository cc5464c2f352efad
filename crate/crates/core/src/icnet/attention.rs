// SPDX-License-Identifier: Apache-2.0

use super::IcnetError;
use crate::numerics::{softmax, Matrix, NumericsError};

/// Which slices of `F` compete for attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Slices are rows; `θ` has `cols` entries; output has `cols` entries.
    Rows,
    /// Slices are columns; `θ` has `rows` entries; output has `rows` entries.
    Cols,
}

/// Scores each slice `Fᵢ` by `θ·Fᵢ`, normalizes the scores with softmax and
/// returns the attention-weighted sum of the slices with the weights.
pub fn attention_aggregate(f: &Matrix, theta: &[f64], axis: Axis) -> Result<(Vec<f64>, Vec<f64>), IcnetError> {
    let (slices, width) = match axis {
        Axis::Rows => (f.rows(), f.cols()),
        Axis::Cols => (f.cols(), f.rows()),
    };
    if theta.len() != width {
        return Err(NumericsError::ShapeMismatch {
            op: "attention_aggregate",
            left: f.shape(),
            right: (theta.len(), 1),
        }
        .into());
    }
    let slice = |i: usize, k: usize| match axis {
        Axis::Rows => f[(i, k)],
        Axis::Cols => f[(k, i)],
    };
    let logits: Vec<f64> = (0..slices)
        .map(|i| (0..width).map(|k| theta[k] * slice(i, k)).sum())
        .collect();
    let a = softmax(&logits);
    let out = (0..width)
        .map(|k| (0..slices).map(|i| a[i] * slice(i, k)).sum())
        .collect();
    Ok((out, a))
}
