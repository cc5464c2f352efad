// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{label_from_target, ExperimentError};
use crate::attack::LabelKind;
use crate::icnet::{Aggregation, Model, OutputHead, Sample};
use crate::netlist::GateType;

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), ExperimentError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(ExperimentError::Undefined(format!(
            "need two equal-length series of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, ExperimentError> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(ExperimentError::Undefined("mse of empty or mismatched series".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ExperimentError> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ExperimentError::Undefined("pearson correlation with zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties get the average of the ranks they span.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, ExperimentError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Least-squares `(slope, intercept)` of `y` on `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64), ExperimentError> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::Undefined("slope with constant regressor".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

fn mask_count(s: &Sample) -> f64 {
    (0..s.input.x.rows()).map(|i| s.input.x[(i, 0)]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub label_kind: LabelKind,
    /// Against `ln(1 + label)`.
    pub mse_log: f64,
    /// Against the untransformed wall time or conflict count.
    pub mse_raw: f64,
    /// Log-scale mse of predicting the mean of the evaluated targets.
    pub mean_predictor_mse_log: f64,
    /// Σmask against the label, on `label_kind`'s scale.
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Prediction against target, log scale.
    pub prediction_pearson: Option<f64>,
}

impl MetricsReport {
    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "n,label_kind,mse_log,mse_raw,mean_predictor_mse_log,pearson,spearman,slope,intercept,prediction_pearson\n\
             {},{},{},{},{},{},{},{},{},{}\n",
            self.n,
            serde_json::to_value(self.label_kind).expect("label kind").as_str().unwrap_or_default(),
            self.mse_log,
            self.mse_raw,
            self.mean_predictor_mse_log,
            opt(self.pearson),
            opt(self.spearman),
            opt(self.slope),
            opt(self.intercept),
            opt(self.prediction_pearson),
        )
    }
}

/// Scores `model` on `samples`, whose targets are `ln(1 + raw label)`.
pub fn evaluate(model: &Model, samples: &[&Sample], label_kind: LabelKind) -> Result<MetricsReport, ExperimentError> {
    if samples.is_empty() {
        return Err(ExperimentError::Invalid("evaluation set is empty".into()));
    }
    let head = model.config.output_head;
    let mut pred_log = Vec::with_capacity(samples.len());
    let mut pred_raw = Vec::with_capacity(samples.len());
    for s in samples {
        let p = model.forward(&s.input)?;
        pred_log.push(p.log_value(head));
        pred_raw.push(match head {
            OutputHead::Exp => p.y_hat - 1.0,
            OutputHead::Linear => p.y_hat.max(1e-12) - 1.0,
        });
    }
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let raw: Vec<f64> = targets.iter().map(|t| t.exp_m1()).collect();
    let labels: Vec<f64> = targets.iter().map(|&t| label_from_target(t, label_kind)).collect();
    let masks: Vec<f64> = samples.iter().map(|s| mask_count(s)).collect();
    let mt = mean(&targets);
    let fit = linear_slope(&masks, &labels).ok();
    Ok(MetricsReport {
        n: samples.len(),
        label_kind,
        mse_log: mse(&pred_log, &targets)?,
        mse_raw: mse(&pred_raw, &raw)?,
        mean_predictor_mse_log: targets.iter().map(|t| (t - mt) * (t - mt)).sum::<f64>() / targets.len() as f64,
        pearson: pearson(&masks, &labels).ok(),
        spearman: spearman(&masks, &labels).ok(),
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        prediction_pearson: pearson(&pred_log, &targets).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShare {
    pub feature: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub n: usize,
    pub features: Vec<FeatureShare>,
    pub mask_share: f64,
    pub type_share: f64,
    pub metrics: MetricsReport,
}

impl AttentionReport {
    pub fn table(&self) -> String {
        let mut out = String::from("feature        share\n");
        for f in &self.features {
            out.push_str(&format!("{:<14} {:>7.3}%\n", f.feature, 100.0 * f.share));
        }
        out.push_str(&format!("{:<14} {:>7.3}%\n", "mask (total)", 100.0 * self.mask_share));
        out.push_str(&format!("{:<14} {:>7.3}%\n", "type (total)", 100.0 * self.type_share));
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
        out.push_str(&format!(
            "pearson {}  spearman {}  slope {}\n",
            opt(self.metrics.pearson),
            opt(self.metrics.spearman),
            opt(self.metrics.slope)
        ));
        out
    }
}

/// Column-normalized `|W1|·|W2|·…·|WL|`: entry `(f, j)` is the fraction of
/// hidden unit `j`'s weight mass that reaches it from input feature `f`.
fn attribution(model: &Model) -> Vec<Vec<f64>> {
    let layers = model.config.hidden_dims.len();
    let w1 = model.param("w1");
    let mut m: Vec<Vec<f64>> = (0..w1.rows())
        .map(|f| w1.row(f).iter().map(|v| v.abs()).collect())
        .collect();
    for l in 2..=layers {
        let w = model.param(&format!("w{l}"));
        m = m
            .iter()
            .map(|row| {
                (0..w.cols())
                    .map(|j| row.iter().enumerate().map(|(k, r)| r * w[(k, j)].abs()).sum())
                    .collect()
            })
            .collect();
    }
    let f = m.len();
    let d = m.first().map_or(0, Vec::len);
    for j in 0..d {
        let total: f64 = (0..f).map(|i| m[i][j]).sum();
        for row in m.iter_mut() {
            row[j] = if total > 0.0 { row[j] / total } else { 1.0 / f as f64 };
        }
    }
    m
}

fn feature_names(width: usize) -> Vec<String> {
    std::iter::once("mask".to_string())
        .chain(GateType::ALL.iter().map(|g| g.keyword().to_string()))
        .take(width)
        .collect()
}

/// Mean feature attention over `samples`, pushed back to the input
/// features, with the Σmask statistics of [`evaluate`].
pub fn attention_report(
    model: &Model,
    samples: &[&Sample],
    label_kind: LabelKind,
) -> Result<AttentionReport, ExperimentError> {
    if model.config.feat_agg != Aggregation::Attention {
        return Err(ExperimentError::Invalid(
            "attention report needs a model with feature attention".into(),
        ));
    }
    if samples.is_empty() {
        return Err(ExperimentError::Invalid("evaluation set is empty".into()));
    }
    let attr = attribution(model);
    let mut shares = vec![0.0; attr.len()];
    for s in samples {
        let p = model.forward(&s.input)?;
        for (f, row) in attr.iter().enumerate() {
            shares[f] += row.iter().zip(&p.a_feat).map(|(m, a)| m * a).sum::<f64>();
        }
    }
    let total: f64 = shares.iter().sum();
    for v in shares.iter_mut() {
        *v /= total;
    }
    let mask_share = shares[0];
    let type_share = shares[1..].iter().sum();
    Ok(AttentionReport {
        n: samples.len(),
        features: feature_names(shares.len())
            .into_iter()
            .zip(&shares)
            .map(|(feature, &share)| FeatureShare { feature, share })
            .collect(),
        mask_share,
        type_share,
        metrics: evaluate(model, samples, label_kind)?,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::icnet::{GraphInput, ModelConfig};
    use crate::numerics::Matrix;

    #[test]
    fn correlation_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[9.0, 4.0, 1.0, 0.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(pearson(&x, &[1.0; 4]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn slope_of_exact_line() {
        let (s, b) = linear_slope(&[0.0, 1.0, 2.0], &[1.0, 1.5, 2.0]).unwrap();
        assert!((s - 0.5).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    }

    fn toy_samples() -> Vec<Sample> {
        (0..6)
            .map(|k| {
                let n = 4;
                let mut x = Matrix::zeros(n, 11);
                for i in 0..n {
                    x[(i, 0)] = if i < k.min(n) { 1.0 } else { 0.0 };
                    x[(i, 1 + i % 10)] = 1.0;
                }
                Sample {
                    id: k,
                    input: GraphInput::new(Arc::new(Matrix::identity(n)), x).unwrap(),
                    target: 0.1 * k as f64,
                    censored: false,
                }
            })
            .collect()
    }

    #[test]
    fn constant_predictor_mse_is_variance() {
        let samples = toy_samples();
        let refs: Vec<&Sample> = samples.iter().collect();
        let mut model = Model::new(ModelConfig::default()).unwrap();
        for (_, p) in model.params.iter_mut() {
            p.as_mut_slice().fill(0.0);
        }
        // all-zero weights predict z = 0; shift targets so their mean is 0
        let shifted: Vec<Sample> = samples
            .iter()
            .map(|s| Sample {
                target: s.target - 0.25,
                ..s.clone()
            })
            .collect();
        let refs2: Vec<&Sample> = shifted.iter().collect();
        let r = evaluate(&model, &refs2, LabelKind::Log1pSeconds).unwrap();
        assert!((r.mse_log - r.mean_predictor_mse_log).abs() < 1e-15);
        assert!(evaluate(&model, &refs[..0], LabelKind::Log1pSeconds).is_err());
    }

    #[test]
    fn uniform_attention_shares_follow_column_counts() {
        let samples = toy_samples();
        let refs: Vec<&Sample> = samples.iter().collect();
        let mut model = Model::new(ModelConfig::default()).unwrap();
        for (name, p) in model.params.iter_mut() {
            let v = if name.starts_with('w') { 1.0 } else { 0.0 };
            p.as_mut_slice().fill(v);
        }
        let r = attention_report(&model, &refs, LabelKind::Log1pSeconds).unwrap();
        assert!((r.mask_share - 1.0 / 11.0).abs() < 1e-12);
        assert!((r.type_share - 10.0 / 11.0).abs() < 1e-12);
        assert!((r.features.iter().map(|f| f.share).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.features[0].feature, "mask");

        model.config.feat_agg = Aggregation::Sum;
        assert!(attention_report(&model, &refs, LabelKind::Log1pSeconds).is_err());
    }
}
