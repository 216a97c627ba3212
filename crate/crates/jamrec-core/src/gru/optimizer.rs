//! Parameter update rules: plain SGD and Adam with bias-corrected moments.

use serde::{Deserialize, Serialize};

use crate::gru::GruParams;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Adam moment estimates, shaped like the parameters they track.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: GruParams,
    pub v: GruParams,
}

#[derive(Debug, Clone)]
pub enum OptimizerState {
    Sgd,
    Adam(AdamState),
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &GruParams) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam(AdamState {
                step: 0,
                m: params.zeros_like(),
                v: params.zeros_like(),
            }),
        }
    }

    pub fn sgd() -> Self {
        OptimizerState::Sgd
    }
}

/// Apply one update; deterministic given the state.
pub fn optimizer_step(
    params: &mut GruParams,
    grads: &GruParams,
    state: &mut OptimizerState,
    learning_rate: f64,
) {
    match state {
        OptimizerState::Sgd => {
            for (theta, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                for (t, &gi) in theta.iter_mut().zip(g) {
                    *t -= learning_rate * gi;
                }
            }
        }
        OptimizerState::Adam(adam) => {
            adam.step += 1;
            let t = adam.step as i32;
            let bias1 = 1.0 - ADAM_BETA1.powi(t);
            let bias2 = 1.0 - ADAM_BETA2.powi(t);
            let theta_tensors = params.tensors_mut();
            let m_tensors = adam.m.tensors_mut();
            let v_tensors = adam.v.tensors_mut();
            for (((theta, g), m), v) in theta_tensors
                .into_iter()
                .zip(grads.tensors())
                .zip(m_tensors)
                .zip(v_tensors)
            {
                for i in 0..theta.len() {
                    let gi = g[i];
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gru::tests::small_params;

    #[test]
    fn zero_gradient_leaves_sgd_params_unchanged() {
        let mut params = small_params(1, 4, 3);
        let reference = params.clone();
        let grads = params.zeros_like();
        let mut state = OptimizerState::sgd();
        optimizer_step(&mut params, &grads, &mut state, 0.1);
        assert_eq!(params, reference);
    }

    #[test]
    fn zero_gradient_and_zero_moments_leave_adam_params_unchanged() {
        let mut params = small_params(2, 4, 3);
        let reference = params.clone();
        let grads = params.zeros_like();
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        optimizer_step(&mut params, &grads, &mut state, 0.1);
        assert_eq!(params, reference);
    }

    #[test]
    fn sgd_is_exactly_theta_minus_lr_g() {
        let mut params = small_params(3, 4, 3);
        let reference = params.clone();
        let mut grads = params.zeros_like();
        for tensor in grads.tensors_mut() {
            for (i, g) in tensor.iter_mut().enumerate() {
                *g = 0.25 * (i as f64 + 1.0);
            }
        }
        let lr = 0.01;
        let mut state = OptimizerState::sgd();
        optimizer_step(&mut params, &grads, &mut state, lr);
        for ((after, before), g) in params
            .tensors()
            .into_iter()
            .zip(reference.tensors())
            .zip(grads.tensors())
        {
            for i in 0..after.len() {
                assert_eq!(after[i], before[i] - lr * g[i]);
            }
        }
    }

    #[test]
    fn adam_single_step_matches_hand_computed_update() {
        // One parameter entry with gradient g: after one step
        //   m = 0.1 g, v = 0.001 g^2, m_hat = g, v_hat = g^2,
        //   theta' = theta - lr * g / (|g| + eps).
        let mut params = GruParams::zeros(1, 1);
        params.w_xr.data[0] = 0.5;
        let mut grads = params.zeros_like();
        grads.w_xr.data[0] = 0.3;
        let lr = 0.01;
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        optimizer_step(&mut params, &grads, &mut state, lr);
        let expected = 0.5 - lr * 0.3 / (0.3 + ADAM_EPS);
        assert!((params.w_xr.data[0] - expected).abs() < 1e-15);

        match &state {
            OptimizerState::Adam(adam) => {
                assert_eq!(adam.step, 1);
                assert!((adam.m.w_xr.data[0] - 0.03).abs() < 1e-15);
                assert!((adam.v.w_xr.data[0] - 0.3 * 0.3 * 0.001).abs() < 1e-15);
            }
            OptimizerState::Sgd => unreachable!(),
        }
    }
}
