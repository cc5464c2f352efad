// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{NumericsError, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected ADAM moments for one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: ParamStore,
    second: ParamStore,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        AdamState {
            config,
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one descent step to `params`.
    ///
    /// A non-finite gradient entry leaves both the parameters and the state
    /// untouched and is reported as an error.
    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) -> Result<(), NumericsError> {
        if !params.same_layout(grads) || !params.same_layout(&self.first) {
            let (l, r) = (params.shapes(), grads.shapes());
            let name = l
                .iter()
                .zip(r.iter())
                .find(|(a, b)| a != b)
                .map(|(a, _)| a.0.clone())
                .unwrap_or_default();
            return Err(NumericsError::ShapeMismatch {
                op: "adam_step",
                left: l.iter().find(|s| s.0 == name).map_or((0, 0), |s| s.1),
                right: r.iter().find(|s| s.0 == name).map_or((0, 0), |s| s.1),
            });
        }
        for (name, g) in grads.iter() {
            if !g.is_finite() {
                return Err(NumericsError::NonFiniteGradient(name.to_string()));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        let moments = self.first.iter_mut().zip(self.second.iter_mut());
        for (((_, p), (_, g)), ((_, m), (_, v))) in params.iter_mut().zip(grads.iter()).zip(moments) {
            let p = p.as_mut_slice();
            let g = g.as_slice();
            let m = m.as_mut_slice();
            let v = v.as_mut_slice();
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn store(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Matrix::column(values));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = store(&[1.0, -2.0]);
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        st.step(&mut p, &store(&[0.0, 0.0])).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = store(&[0.0, 0.0]);
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(&p, cfg);
        st.step(&mut p, &store(&[3.0, -0.5])).unwrap();
        let w = p.get("w").unwrap().as_slice();
        assert!((w[0] + 0.01).abs() < 1e-8);
        assert!((w[1] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // f(x, y) = (x - 3)^2 + 10 (y + 1)^2
        let mut p = store(&[0.0, 0.0]);
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(&p, cfg);
        let loss = |w: &[f64]| (w[0] - 3.0).powi(2) + 10.0 * (w[1] + 1.0).powi(2);
        let mut steps = 0;
        while loss(p.get("w").unwrap().as_slice()) >= 1e-6 && steps < 2000 {
            let w = p.get("w").unwrap().as_slice().to_vec();
            let g = store(&[2.0 * (w[0] - 3.0), 20.0 * (w[1] + 1.0)]);
            st.step(&mut p, &g).unwrap();
            steps += 1;
        }
        assert!(loss(p.get("w").unwrap().as_slice()) < 1e-6, "after {steps} steps");
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut p = store(&[1.0]);
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let err = st.step(&mut p, &store(&[f64::NAN])).unwrap_err();
        assert!(matches!(err, NumericsError::NonFiniteGradient(_)));
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = store(&[1.0]);
        let mut st = AdamState::new(&p, AdamConfig::default());
        assert!(st.step(&mut p, &store(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn trajectory_is_bit_identical() {
        let run = || {
            let mut p = store(&[0.3, -0.7]);
            let mut st = AdamState::new(&p, AdamConfig::default());
            for k in 0..50 {
                let w = p.get("w").unwrap().as_slice().to_vec();
                let g = store(&[w[0] * 1.3 + k as f64 * 0.01, w[1].sin()]);
                st.step(&mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
