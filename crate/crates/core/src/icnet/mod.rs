// SPDX-License-Identifier: Apache-2.0

//! Graph-convolutional runtime regressor.
//!
//! A stack of `H ← ReLU(A·H·W)` convolutions over the locked circuit's
//! graph, a feature-axis aggregation that reduces each gate to a scalar, a
//! gate-axis aggregation that reduces the graph to a latent `z`, and an
//! exponential (or identity) head.

mod attention;
mod backward;
mod baseline;
mod checkpoint;
mod train;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{graph_matrix, Circuit, GateType, GraphKind, GraphMatrix, GraphOptions};
use crate::numerics::{init_params, matmul, relu, softmax, InitScheme, Matrix, NumericsError, ParamStore};
use crate::obfuscate::ObfuscationInstance;

pub use attention::{attention_aggregate, Axis};
pub use backward::{loss_and_grads, BatchLoss};
pub use baseline::{baseline_aggregate_features, fit_linear, LinearModel};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use train::{evaluate_mse, partition, split_indices, train, EpochLog, Sample, TrainOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IcnetError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("non-finite value after {0}")]
    NonFinite(&'static str),
    #[error("feature matrix has {got} columns, model expects {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("graph is {rows}x{cols} but features have {n} rows")]
    GraphShape { rows: usize, cols: usize, n: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("every label is censored")]
    AllCensored,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("degenerate regression problem: {0}")]
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Attention,
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    Exp,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    LocationOnly,
    AllFeatures,
}

impl FeatureSet {
    pub fn width(self) -> usize {
        match self {
            FeatureSet::LocationOnly => 1,
            FeatureSet::AllFeatures => 1 + GateType::ALL.len(),
        }
    }
}

/// Scale on which the training loss compares predictions with labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossScale {
    #[default]
    Log,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub graph_repr: GraphKind,
    pub self_loops: bool,
    pub directed: bool,
    pub conv_layers: usize,
    pub hidden_dims: Vec<usize>,
    pub feat_agg: Aggregation,
    pub gate_agg: Aggregation,
    pub output_head: OutputHead,
    pub feature_set: FeatureSet,
    pub loss_scale: LossScale,
    pub init: InitScheme,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Relative training-loss change below which training stops.
    pub convergence_tol: f64,
    /// Epoch distance over which that change is measured.
    pub convergence_window: usize,
    pub train_fraction: f64,
    pub include_censored: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            graph_repr: GraphKind::Adjacency,
            self_loops: true,
            directed: false,
            conv_layers: 2,
            hidden_dims: vec![32, 16],
            feat_agg: Aggregation::Attention,
            gate_agg: Aggregation::Attention,
            output_head: OutputHead::Exp,
            feature_set: FeatureSet::AllFeatures,
            loss_scale: LossScale::Log,
            init: InitScheme::UniformGlorot,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            convergence_tol: 1e-5,
            convergence_window: 10,
            train_fraction: 0.8,
            include_censored: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// The Laplacian-GCN baseline: same network, `D − W` graph, mean pooling.
    pub fn gcn_mean_baseline() -> Self {
        ModelConfig {
            graph_repr: GraphKind::Laplacian,
            feat_agg: Aggregation::Mean,
            gate_agg: Aggregation::Mean,
            ..Self::default()
        }
    }

    pub fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            kind: self.graph_repr,
            directed: self.directed,
            self_loops: self.self_loops,
        }
    }

    pub fn validate(&self) -> Result<(), IcnetError> {
        let bad = |m: &str| Err(IcnetError::Config(m.to_string()));
        if self.conv_layers == 0 {
            return bad("conv_layers must be at least 1");
        }
        if self.hidden_dims.len() != self.conv_layers {
            return bad("hidden_dims length must equal conv_layers");
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden dimensions must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if self.convergence_window == 0 {
            return bad("convergence_window must be positive");
        }
        Ok(())
    }

    pub fn parameter_layout(&self) -> Vec<(String, usize, usize)> {
        let mut layout = Vec::new();
        let mut fan_in = self.feature_set.width();
        for (i, &h) in self.hidden_dims.iter().enumerate() {
            layout.push((format!("w{}", i + 1), fan_in, h));
            fan_in = h;
        }
        layout.push(("theta_feat".to_string(), fan_in, 1));
        layout.push(("theta_gate".to_string(), 1, 1));
        layout
    }
}

/// n×F node features: column 0 is the lock mask, columns 1..=10 the one-hot
/// gate type in [`GateType::ALL`] order (when all features are used).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub set: FeatureSet,
    pub matrix: Matrix,
}

pub fn build_features(c: &Circuit, mask: &[bool], set: FeatureSet) -> FeatureMatrix {
    let mut x = Matrix::zeros(c.len(), set.width());
    for g in c.gates() {
        x[(g.id, 0)] = if mask.get(g.id).copied().unwrap_or(false) { 1.0 } else { 0.0 };
        if set == FeatureSet::AllFeatures {
            x[(g.id, 1 + g.kind.index())] = 1.0;
        }
    }
    FeatureMatrix { set, matrix: x }
}

pub fn build_graph_input(inst: &ObfuscationInstance, config: &ModelConfig) -> (GraphMatrix, FeatureMatrix) {
    let g = graph_matrix(&inst.obfuscated, config.graph_options());
    let x = build_features(&inst.obfuscated, &inst.mask, config.feature_set);
    (g, x)
}

/// One model input: structure matrix and node features. `ax = A·X` is
/// precomputed since it does not depend on the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub a: Arc<Matrix>,
    pub x: Matrix,
    pub ax: Matrix,
}

impl GraphInput {
    pub fn new(a: Arc<Matrix>, x: Matrix) -> Result<Self, IcnetError> {
        if a.rows() != a.cols() || a.rows() != x.rows() {
            return Err(IcnetError::GraphShape {
                rows: a.rows(),
                cols: a.cols(),
                n: x.rows(),
            });
        }
        let ax = matmul(&a, &x)?;
        Ok(GraphInput { a, x, ax })
    }

    pub fn from_instance(inst: &ObfuscationInstance, config: &ModelConfig) -> Result<Self, IcnetError> {
        let (g, x) = build_graph_input(inst, config);
        GraphInput::new(Arc::new(g.matrix), x.matrix)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub y_hat: f64,
    pub z: f64,
    /// Over the last hidden dimension; uniform for sum/mean.
    pub a_feat: Vec<f64>,
    /// Over gates; uniform for sum/mean.
    pub a_gate: Vec<f64>,
}

impl Prediction {
    /// Prediction on the log scale: `z` for the exp head, `ln ŷ` otherwise.
    pub fn log_value(&self, head: OutputHead) -> f64 {
        match head {
            OutputHead::Exp => self.z,
            OutputHead::Linear => self.y_hat.max(1e-12).ln(),
        }
    }
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    /// `P_l = A·H_{l-1}` per layer.
    pub p: Vec<Matrix>,
    /// Pre-activations `U_l = P_l·W_l`.
    pub u: Vec<Matrix>,
    /// Activations `H_l = ReLU(U_l)`.
    pub h: Vec<Matrix>,
    pub col_mean: Vec<f64>,
    pub s: Vec<f64>,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self, IcnetError> {
        config.validate()?;
        let layout = config.parameter_layout();
        let refs: Vec<(&str, usize, usize)> = layout.iter().map(|(n, r, c)| (n.as_str(), *r, *c)).collect();
        let params = init_params(&refs, config.init, config.seed);
        Ok(Model { config, params })
    }

    pub fn param(&self, name: &str) -> &Matrix {
        self.params.get(name).expect("layout fixed at construction")
    }

    pub fn forward(&self, input: &GraphInput) -> Result<Prediction, IcnetError> {
        Ok(self.forward_cached(input)?.prediction)
    }

    pub(crate) fn forward_cached(&self, input: &GraphInput) -> Result<ForwardCache, IcnetError> {
        let width = self.config.feature_set.width();
        if input.x.cols() != width {
            return Err(IcnetError::FeatureWidth {
                expected: width,
                got: input.x.cols(),
            });
        }
        let n = input.n();
        let layers = self.config.hidden_dims.len();
        let mut p = Vec::with_capacity(layers);
        let mut u = Vec::with_capacity(layers);
        let mut h: Vec<Matrix> = Vec::with_capacity(layers);
        for l in 0..layers {
            let pl = if l == 0 {
                input.ax.clone()
            } else {
                matmul(&input.a, &h[l - 1])?
            };
            let w = self.param(&format!("w{}", l + 1));
            let ul = matmul(&pl, w)?;
            let hl = relu(&ul);
            if !hl.is_finite() {
                return Err(IcnetError::NonFinite(if l == 0 { "conv1" } else { "conv" }));
            }
            p.push(pl);
            u.push(ul);
            h.push(hl);
        }
        let top = h.last().expect("at least one layer");
        let d = top.cols();

        let col_mean: Vec<f64> = top.col_sums().into_iter().map(|v| v / n.max(1) as f64).collect();
        let a_feat = match self.config.feat_agg {
            Aggregation::Attention => {
                let theta = self.param("theta_feat").as_slice();
                let e: Vec<f64> = theta.iter().zip(&col_mean).map(|(t, m)| t * m).collect();
                softmax(&e)
            }
            Aggregation::Sum | Aggregation::Mean => vec![1.0 / d as f64; d],
        };
        let s: Vec<f64> = match self.config.feat_agg {
            Aggregation::Sum => top.row_sums(),
            _ => top.mul_vec(&a_feat)?,
        };

        let (z, a_gate) = match self.config.gate_agg {
            Aggregation::Attention => {
                let tg = self.param("theta_gate")[(0, 0)];
                let g: Vec<f64> = s.iter().map(|v| tg * v).collect();
                let b = softmax(&g);
                let z = b.iter().zip(&s).map(|(x, y)| x * y).sum();
                (z, b)
            }
            Aggregation::Sum => (s.iter().sum(), vec![1.0 / n as f64; n]),
            Aggregation::Mean => (s.iter().sum::<f64>() / n as f64, vec![1.0 / n as f64; n]),
        };
        if !z.is_finite() {
            return Err(IcnetError::NonFinite("gate aggregation"));
        }
        let y_hat = match self.config.output_head {
            OutputHead::Exp => z.exp(),
            OutputHead::Linear => z,
        };
        if !y_hat.is_finite() {
            return Err(IcnetError::NonFinite("output head"));
        }
        Ok(ForwardCache {
            p,
            u,
            h,
            col_mean,
            s,
            prediction: Prediction {
                y_hat,
                z,
                a_feat,
                a_gate,
            },
        })
    }

    /// Single-instance inference; returns the prediction and its wall time.
    pub fn predict(&self, inst: &ObfuscationInstance) -> Result<(Prediction, f64), IcnetError> {
        let start = std::time::Instant::now();
        let input = GraphInput::from_instance(inst, &self.config)?;
        let pred = self.forward(&input)?;
        Ok((pred, start.elapsed().as_secs_f64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::obfuscate::{random_obfuscate, ObfuscationKind};

    const C17: &str = include_str!("../../data/c17.bench");

    fn c17() -> Arc<Circuit> {
        Arc::new(parse_bench(C17).unwrap())
    }

    fn zeroed(mut m: Model) -> Model {
        for (_, p) in m.params.iter_mut() {
            p.as_mut_slice().fill(0.0);
        }
        m
    }

    #[test]
    fn default_shapes() {
        let m = Model::new(ModelConfig::default()).unwrap();
        let shapes = m.params.shapes();
        assert_eq!(
            shapes,
            vec![
                ("w1".to_string(), (11, 32)),
                ("w2".to_string(), (32, 16)),
                ("theta_feat".to_string(), (16, 1)),
                ("theta_gate".to_string(), (1, 1)),
            ]
        );
    }

    #[test]
    fn invalid_configs() {
        let cfg = ModelConfig {
            hidden_dims: vec![4],
            ..ModelConfig::default()
        };
        assert!(Model::new(cfg).is_err());
        let cfg = ModelConfig {
            batch_size: 0,
            ..ModelConfig::default()
        };
        assert!(Model::new(cfg).is_err());
    }

    #[test]
    fn features_and_mask() {
        let c = c17();
        let f = build_features(&c, &vec![false; c.len()], FeatureSet::AllFeatures);
        assert!((0..c.len()).all(|i| f.matrix[(i, 0)] == 0.0));
        assert!(f.matrix.row_sums().iter().all(|&s| s == 1.0));
        let inst = random_obfuscate(c, 2, ObfuscationKind::XorKeygate, 3).unwrap();
        let (_, x) = build_graph_input(&inst, &ModelConfig::default());
        let ones = (0..x.matrix.rows()).filter(|&i| x.matrix[(i, 0)] == 1.0).count();
        assert_eq!(ones, 2);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let c = c17();
        let inst = random_obfuscate(c, 2, ObfuscationKind::XorKeygate, 3).unwrap();
        let cfg = ModelConfig {
            self_loops: false,
            ..ModelConfig::gcn_mean_baseline()
        };
        let (g, _) = build_graph_input(&inst, &cfg);
        assert!(g.matrix.row_sums().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn zero_parameters_give_unit_prediction() {
        let inst = random_obfuscate(c17(), 1, ObfuscationKind::XorKeygate, 1).unwrap();
        let m = zeroed(Model::new(ModelConfig::default()).unwrap());
        let (p, secs) = m.predict(&inst).unwrap();
        assert_eq!(p.z, 0.0);
        assert_eq!(p.y_hat, 1.0);
        assert!(secs >= 0.0);
        let n = inst.obfuscated.len();
        assert!(p.a_gate.iter().all(|&b| (b - 1.0 / n as f64).abs() < 1e-15));
        assert!(p.a_feat.iter().all(|&a| (a - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn feature_width_checked() {
        let inst = random_obfuscate(c17(), 1, ObfuscationKind::XorKeygate, 1).unwrap();
        let m = Model::new(ModelConfig::default()).unwrap();
        let input = GraphInput::from_instance(
            &inst,
            &ModelConfig {
                feature_set: FeatureSet::LocationOnly,
                ..ModelConfig::default()
            },
        )
        .unwrap();
        assert!(matches!(m.forward(&input), Err(IcnetError::FeatureWidth { .. })));
    }

    #[test]
    fn adjacency_and_laplacian_differ() {
        let inst = random_obfuscate(c17(), 2, ObfuscationKind::XorKeygate, 5).unwrap();
        let adj = ModelConfig::default();
        let lap = ModelConfig {
            graph_repr: GraphKind::Laplacian,
            ..ModelConfig::default()
        };
        let m = Model::new(adj.clone()).unwrap();
        let pa = m.forward(&GraphInput::from_instance(&inst, &adj).unwrap()).unwrap();
        let pl = m.forward(&GraphInput::from_instance(&inst, &lap).unwrap()).unwrap();
        assert_ne!(pa.z, pl.z);
    }
}
