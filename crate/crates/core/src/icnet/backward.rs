// SPDX-License-Identifier: Apache-2.0

use super::train::Sample;
use super::{Aggregation, ForwardCache, GraphInput, IcnetError, LossScale, Model, OutputHead};
use crate::numerics::{matmul_nt, matmul_tn, relu_grad, softmax_backward, Matrix, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub mse: f64,
    pub grads: ParamStore,
}

/// Residual of one sample and its derivative with respect to `z`.
///
/// `target` is the log-scale label `t`. The exp head compares `z` with `t`
/// (log loss) or `eᶻ` with `eᵗ` (raw loss); the linear head always compares
/// `z` with `eᵗ`.
pub(crate) fn residual(model: &Model, z: f64, target: f64) -> (f64, f64) {
    match (model.config.output_head, model.config.loss_scale) {
        (OutputHead::Exp, LossScale::Log) => (z - target, 1.0),
        (OutputHead::Exp, LossScale::Raw) => (z.exp() - target.exp(), z.exp()),
        (OutputHead::Linear, _) => (z - target.exp(), 1.0),
    }
}

/// Mean squared residual over `batch` and its exact gradient.
pub fn loss_and_grads(model: &Model, batch: &[&Sample]) -> Result<BatchLoss, IcnetError> {
    if batch.is_empty() {
        return Err(IcnetError::EmptyDataset);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = model.params.zeros_like();
    let mut total = 0.0;
    for sample in batch {
        let cache = model.forward_cached(&sample.input)?;
        let (r, drdz) = residual(model, cache.prediction.z, sample.target);
        total += r * r;
        backward(model, &sample.input, &cache, 2.0 * r * drdz * scale, &mut grads)?;
    }
    let mse = total * scale;
    if !mse.is_finite() {
        return Err(IcnetError::NonFinite("loss"));
    }
    Ok(BatchLoss { mse, grads })
}

fn accumulate(grads: &mut ParamStore, name: &str, delta: &Matrix) -> Result<(), IcnetError> {
    grads
        .get_mut(name)
        .expect("gradient layout mirrors parameters")
        .add_assign(delta)?;
    Ok(())
}

pub(crate) fn backward(
    model: &Model,
    input: &GraphInput,
    cache: &ForwardCache,
    dz: f64,
    grads: &mut ParamStore,
) -> Result<(), IcnetError> {
    let n = input.n();
    let top = cache.h.last().expect("at least one layer");
    let d = top.cols();
    let s = &cache.s;
    let pred = &cache.prediction;

    let ds: Vec<f64> = match model.config.gate_agg {
        Aggregation::Attention => {
            let tg = model.param("theta_gate")[(0, 0)];
            let b = &pred.a_gate;
            let z = pred.z;
            let dtg: f64 = b.iter().zip(s).map(|(bi, si)| bi * (si - z) * si).sum();
            accumulate(grads, "theta_gate", &Matrix::filled(1, 1, dz * dtg))?;
            b.iter().zip(s).map(|(bi, si)| dz * (bi + tg * bi * (si - z))).collect()
        }
        Aggregation::Sum => vec![dz; n],
        Aggregation::Mean => vec![dz / n as f64; n],
    };

    let mut dh = Matrix::zeros(n, d);
    match model.config.feat_agg {
        Aggregation::Attention => {
            let a = &pred.a_feat;
            for i in 0..n {
                for (j, &aj) in a.iter().enumerate() {
                    dh[(i, j)] = ds[i] * aj;
                }
            }
            let da = top.tr_mul_vec(&ds)?;
            let de = softmax_backward(a, &da);
            let theta = model.param("theta_feat").as_slice();
            let dtheta: Vec<f64> = de.iter().zip(&cache.col_mean).map(|(e, m)| e * m).collect();
            accumulate(grads, "theta_feat", &Matrix::column(&dtheta))?;
            for j in 0..d {
                let dm = de[j] * theta[j] / n as f64;
                for i in 0..n {
                    dh[(i, j)] += dm;
                }
            }
        }
        Aggregation::Sum | Aggregation::Mean => {
            let w = if model.config.feat_agg == Aggregation::Sum { 1.0 } else { 1.0 / d as f64 };
            for i in 0..n {
                dh.row_mut(i).fill(ds[i] * w);
            }
        }
    }

    for l in (0..cache.h.len()).rev() {
        let du = relu_grad(&cache.u[l], &dh)?;
        let name = format!("w{}", l + 1);
        accumulate(grads, &name, &matmul_tn(&cache.p[l], &du)?)?;
        if l > 0 {
            let back = matmul_nt(&du, model.param(&name))?;
            dh = matmul_tn(&input.a, &back)?;
        }
    }
    Ok(())
}
