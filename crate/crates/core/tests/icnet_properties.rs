// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use deobtime::icnet::{loss_and_grads, Aggregation, GraphInput, LossScale, Model, ModelConfig, OutputHead, Sample};
use deobtime::numerics::Matrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AGGS: [Aggregation; 3] = [Aggregation::Attention, Aggregation::Sum, Aggregation::Mean];

fn random_graph(rng: &mut ChaCha8Rng, n: usize, f: usize) -> (Matrix, Matrix) {
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(0.4) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    let mut x = Matrix::zeros(n, f);
    for i in 0..n {
        x[(i, 0)] = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        if f > 1 {
            x[(i, rng.random_range(1..f))] = 1.0;
        }
    }
    (a, x)
}

fn sample(a: Matrix, x: Matrix, target: f64) -> Sample {
    Sample {
        id: 0,
        input: GraphInput::new(Arc::new(a), x).unwrap(),
        target,
        censored: false,
    }
}

fn all_configs() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for feat in AGGS {
        for gate in AGGS {
            for (head, scale) in [
                (OutputHead::Exp, LossScale::Log),
                (OutputHead::Exp, LossScale::Raw),
                (OutputHead::Linear, LossScale::Raw),
            ] {
                out.push(ModelConfig {
                    feat_agg: feat,
                    gate_agg: gate,
                    output_head: head,
                    loss_scale: scale,
                    hidden_dims: vec![8, 5],
                    seed: 21,
                    ..ModelConfig::default()
                });
            }
        }
    }
    out
}

fn perturbed_loss(model: &Model, batch: &[&Sample], name: &str, k: usize, delta: f64) -> f64 {
    let mut m = model.clone();
    m.params.get_mut(name).unwrap().as_mut_slice()[k] += delta;
    loss_and_grads(&m, batch).unwrap().mse
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for cfg in all_configs() {
        let (a1, x1) = random_graph(&mut rng, 6, 11);
        let (a2, x2) = random_graph(&mut rng, 6, 11);
        let s1 = sample(a1, x1, rng.random_range(-0.5..0.5));
        let s2 = sample(a2, x2, rng.random_range(-0.5..0.5));
        let batch = [&s1, &s2];
        let mut model = Model::new(cfg.clone()).unwrap();
        // keep the exp head in a moderate range
        for (_, p) in model.params.iter_mut() {
            for v in p.as_mut_slice() {
                *v *= 0.5;
            }
        }
        let analytic = loss_and_grads(&model, &batch).unwrap().grads;
        for (name, g) in analytic.iter() {
            for (k, &ga) in g.as_slice().iter().enumerate() {
                let fd = (perturbed_loss(&model, &batch, name, k, h) - perturbed_loss(&model, &batch, name, k, -h))
                    / (2.0 * h);
                let scale = ga.abs().max(fd.abs());
                let err = (ga - fd).abs();
                if scale > 1e-7 {
                    worst = worst.max(err / scale);
                    assert!(
                        err / scale < 1e-4,
                        "{name}[{k}] analytic {ga} fd {fd} ({:?}/{:?}/{:?})",
                        cfg.feat_agg,
                        cfg.gate_agg,
                        cfg.output_head
                    );
                } else {
                    assert!(err < 1e-9, "{name}[{k}] analytic {ga} fd {fd}");
                }
            }
        }
    }
    println!("worst relative gradient error: {worst:.3e}");
}

#[test]
fn perfect_fit_has_zero_loss_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, x) = random_graph(&mut rng, 6, 11);
    let model = Model::new(ModelConfig::default()).unwrap();
    let probe = sample(a.clone(), x.clone(), 0.0);
    let z = model.forward(&probe.input).unwrap().z;
    let s = sample(a, x, z);
    let bl = loss_and_grads(&model, &[&s]).unwrap();
    assert_eq!(bl.mse, 0.0);
    assert!(bl.grads.iter().all(|(_, g)| g.as_slice().iter().all(|&v| v == 0.0)));
}

#[test]
fn linear_head_zero_params_loss_is_label_squared() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (a, x) = random_graph(&mut rng, 6, 11);
    let mut model = Model::new(ModelConfig {
        output_head: OutputHead::Linear,
        ..ModelConfig::default()
    })
    .unwrap();
    for (_, p) in model.params.iter_mut() {
        p.as_mut_slice().fill(0.0);
    }
    let y: f64 = 3.0;
    let s = sample(a, x, y.ln());
    let bl = loss_and_grads(&model, &[&s]).unwrap();
    assert!((bl.mse - y * y).abs() < 1e-12);
}

fn permute(a: &Matrix, x: &Matrix, perm: &[usize]) -> (Matrix, Matrix) {
    // new node i is old node perm[i]
    let n = perm.len();
    let mut pa = Matrix::zeros(n, n);
    let mut px = Matrix::zeros(n, x.cols());
    for i in 0..n {
        for j in 0..n {
            pa[(i, j)] = a[(perm[i], perm[j])];
        }
        px.row_mut(i).copy_from_slice(x.row(perm[i]));
    }
    (pa, px)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn predictions_are_permutation_invariant(seed in any::<u64>(), n in 2usize..12, agg in 0usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, x) = random_graph(&mut rng, n, 11);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (pa, px) = permute(&a, &x, &perm);
        let model = Model::new(ModelConfig {
            feat_agg: AGGS[agg / 3],
            gate_agg: AGGS[agg % 3],
            seed,
            ..ModelConfig::default()
        }).unwrap();
        let p = model.forward(&GraphInput::new(Arc::new(a), x).unwrap()).unwrap();
        let q = model.forward(&GraphInput::new(Arc::new(pa), px).unwrap()).unwrap();
        prop_assert!((p.y_hat - q.y_hat).abs() <= 1e-10 * p.y_hat.abs().max(1.0));
        for i in 0..n {
            prop_assert!((q.a_gate[i] - p.a_gate[perm[i]]).abs() <= 1e-10);
        }
    }

    #[test]
    fn attention_lies_on_simplex_and_exp_head_is_positive(seed in any::<u64>(), n in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, x) = random_graph(&mut rng, n, 11);
        let model = Model::new(ModelConfig { seed, ..ModelConfig::default() }).unwrap();
        let p = model.forward(&GraphInput::new(Arc::new(a), x).unwrap()).unwrap();
        for v in [&p.a_feat, &p.a_gate] {
            prop_assert!(v.iter().all(|&w| w >= 0.0 && w <= 1.0));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!(p.y_hat > 0.0);
        prop_assert!((p.y_hat - p.z.exp()).abs() <= 1e-12 * p.y_hat);
    }

    #[test]
    fn zero_logit_attention_equals_mean(seed in any::<u64>(), n in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, x) = random_graph(&mut rng, n, 11);
        let input = GraphInput::new(Arc::new(a), x).unwrap();
        let mut att = Model::new(ModelConfig { seed, ..ModelConfig::default() }).unwrap();
        att.params.get_mut("theta_feat").unwrap().as_mut_slice().fill(0.0);
        att.params.get_mut("theta_gate").unwrap().as_mut_slice().fill(0.0);
        let mut mean = att.clone();
        mean.config.feat_agg = Aggregation::Mean;
        mean.config.gate_agg = Aggregation::Mean;
        let p = att.forward(&input).unwrap();
        let q = mean.forward(&input).unwrap();
        prop_assert!((p.z - q.z).abs() <= 1e-12 * q.z.abs().max(1.0));
    }
}
