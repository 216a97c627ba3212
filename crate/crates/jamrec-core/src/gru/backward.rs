//! Backpropagation through time for the GRU classifier.
//!
//! Consumes the step traces cached by the forward pass and accumulates
//! the gradient of the sequence loss (mean per-step softmax cross-entropy)
//! with respect to every parameter tensor.

use crate::error::{Error, Result};
use crate::gru::{GruParams, GruStepTrace};
use crate::sim::POLICY_COUNT;

/// Gradients of the mean per-step cross-entropy over one sequence.
///
/// `traces` must come from [`crate::gru::forward_sequence`] run on the same `params`;
/// a cache whose shapes disagree with the parameters (or that never went
/// through the head) is rejected.
pub fn backward_bptt(
    traces: &[GruStepTrace],
    targets: &[u8],
    params: &GruParams,
) -> Result<GruParams> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("empty trace sequence".into()));
    }
    if traces.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} traces vs {} targets",
            traces.len(),
            targets.len()
        )));
    }
    let (d, h) = (params.input_dim, params.hidden_dim);
    for trace in traces {
        if trace.x.len() != d
            || trace.r.len() != h
            || trace.z.len() != h
            || trace.h_cand.len() != h
            || trace.h.len() != h
        {
            return Err(Error::State(
                "cached traces do not match the parameter shapes".into(),
            ));
        }
        if trace.probs.len() != POLICY_COUNT {
            return Err(Error::State(
                "cached traces carry no head outputs; run the full forward pass".into(),
            ));
        }
    }
    for &target in targets {
        if target as usize >= POLICY_COUNT {
            return Err(Error::InvalidArgument(format!(
                "target {target} out of range 0..=4"
            )));
        }
    }

    let steps = traces.len();
    let inv_steps = 1.0 / steps as f64;
    let mut grads = params.zeros_like();
    let h0 = vec![0.0; h];
    // Gradient flowing into h_t from the future (head of step t added below).
    let mut dh = vec![0.0; h];

    for t in (0..steps).rev() {
        let trace = &traces[t];
        let h_prev = if t == 0 { &h0 } else { &traces[t - 1].h };

        // Head: softmax cross-entropy gives dlogits = (p - onehot)/steps.
        let mut dlogits = trace.probs.clone();
        dlogits[targets[t] as usize] -= 1.0;
        for dl in dlogits.iter_mut() {
            *dl *= inv_steps;
        }
        for c in 0..POLICY_COUNT {
            grads.b_out[c] += dlogits[c];
        }
        for k in 0..h {
            let hk = trace.h[k];
            let wrow = params.w_out.row(k);
            let grow = &mut grads.w_out.data[k * POLICY_COUNT..(k + 1) * POLICY_COUNT];
            let mut acc = 0.0;
            for c in 0..POLICY_COUNT {
                grow[c] += hk * dlogits[c];
                acc += wrow[c] * dlogits[c];
            }
            dh[k] += acc;
        }

        // h = z*h_prev + (1-z)*h_cand
        let mut dh_prev = vec![0.0; h];
        let mut da_h = vec![0.0; h];
        let mut da_z = vec![0.0; h];
        for j in 0..h {
            let dz = dh[j] * (h_prev[j] - trace.h_cand[j]);
            let dhc = dh[j] * (1.0 - trace.z[j]);
            dh_prev[j] += dh[j] * trace.z[j];
            da_h[j] = dhc * (1.0 - trace.h_cand[j] * trace.h_cand[j]);
            da_z[j] = dz * trace.z[j] * (1.0 - trace.z[j]);
        }

        // Candidate pre-activation: a_h = Wxh'x + Whh'(r*h_prev) + bh.
        let mut da_r = vec![0.0; h];
        for j in 0..h {
            grads.b_h[j] += da_h[j];
        }
        for (i, &xi) in trace.x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let grow = &mut grads.w_xh.data[i * h..(i + 1) * h];
            for j in 0..h {
                grow[j] += xi * da_h[j];
            }
        }
        for k in 0..h {
            let gated = trace.r[k] * h_prev[k];
            let wrow = params.w_hh.row(k);
            let grow = &mut grads.w_hh.data[k * h..(k + 1) * h];
            let mut dgated = 0.0;
            for j in 0..h {
                grow[j] += gated * da_h[j];
                dgated += wrow[j] * da_h[j];
            }
            da_r[k] = dgated * h_prev[k] * trace.r[k] * (1.0 - trace.r[k]);
            dh_prev[k] += dgated * trace.r[k];
        }

        // Update and reset gate pre-activations.
        for j in 0..h {
            grads.b_z[j] += da_z[j];
            grads.b_r[j] += da_r[j];
        }
        for (i, &xi) in trace.x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let gz = &mut grads.w_xz.data[i * h..(i + 1) * h];
            for j in 0..h {
                gz[j] += xi * da_z[j];
            }
            let gr = &mut grads.w_xr.data[i * h..(i + 1) * h];
            for j in 0..h {
                gr[j] += xi * da_r[j];
            }
        }
        for k in 0..h {
            let hk = h_prev[k];
            let wz = params.w_hz.row(k);
            let wr = params.w_hr.row(k);
            let gz = &mut grads.w_hz.data[k * h..(k + 1) * h];
            let mut acc = 0.0;
            for j in 0..h {
                gz[j] += hk * da_z[j];
                acc += wz[j] * da_z[j];
            }
            let gr = &mut grads.w_hr.data[k * h..(k + 1) * h];
            for j in 0..h {
                gr[j] += hk * da_r[j];
                acc += wr[j] * da_r[j];
            }
            dh_prev[k] += acc;
        }

        dh = dh_prev;
    }

    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gru::tests::{random_inputs, small_params};
    use crate::gru::{cross_entropy, forward_sequence, optimizer_step, OptimizerState};

    fn sequence_loss(params: &GruParams, inputs: &[Vec<f64>], targets: &[u8]) -> f64 {
        let (dists, _) = forward_sequence(inputs, params).unwrap();
        cross_entropy(&dists, targets).unwrap()
    }

    /// Central finite difference of the sequence loss for one parameter
    /// entry, addressed by tensor index in the fixed serialization order.
    fn finite_difference(
        params: &GruParams,
        inputs: &[Vec<f64>],
        targets: &[u8],
        tensor: usize,
        entry: usize,
        eps: f64,
    ) -> f64 {
        let mut plus = params.clone();
        plus.tensors_mut()[tensor][entry] += eps;
        let mut minus = params.clone();
        minus.tensors_mut()[tensor][entry] -= eps;
        (sequence_loss(&plus, inputs, targets) - sequence_loss(&minus, inputs, targets))
            / (2.0 * eps)
    }

    pub(crate) fn max_relative_error(
        params: &GruParams,
        inputs: &[Vec<f64>],
        targets: &[u8],
    ) -> f64 {
        let (_, traces) = forward_sequence(inputs, params).unwrap();
        let grads = backward_bptt(&traces, targets, params).unwrap();
        let analytic = grads.tensors();
        let mut worst = 0.0f64;
        for tensor in 0..analytic.len() {
            for entry in 0..analytic[tensor].len() {
                let numeric = finite_difference(params, inputs, targets, tensor, entry, 1e-5);
                let a = analytic[tensor][entry];
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            let params = small_params(seed, 4, 3);
            let inputs = random_inputs(1000 + seed, 5, 4);
            let targets: Vec<u8> = (0..5).map(|i| ((seed as usize + i) % 5) as u8).collect();
            let worst = max_relative_error(&params, &inputs, &targets);
            assert!(worst < 1e-4, "seed {seed}: max relative error {worst}");
        }
    }

    #[test]
    fn closed_update_gate_kills_candidate_gradients() {
        let mut params = small_params(3, 4, 3);
        params.b_z = vec![50.0; 3];
        let inputs = random_inputs(4, 5, 4);
        let targets = [0u8, 1, 2, 3, 4];
        let (_, traces) = forward_sequence(&inputs, &params).unwrap();
        let grads = backward_bptt(&traces, &targets, &params).unwrap();
        let candidate_tensors = [&grads.w_xh.data, &grads.w_hh.data, &grads.b_h];
        for tensor in candidate_tensors {
            for &g in tensor.iter() {
                assert!(g.abs() < 1e-8, "candidate-path gradient {g} leaked");
            }
        }
    }

    #[test]
    fn one_small_step_reduces_the_loss() {
        let mut params = small_params(9, 4, 3);
        let inputs = random_inputs(10, 5, 4);
        let targets = [2u8, 2, 0, 4, 1];
        let before = sequence_loss(&params, &inputs, &targets);
        let (_, traces) = forward_sequence(&inputs, &params).unwrap();
        let grads = backward_bptt(&traces, &targets, &params).unwrap();
        let mut state = OptimizerState::sgd();
        optimizer_step(&mut params, &grads, &mut state, 1e-3);
        let after = sequence_loss(&params, &inputs, &targets);
        assert!(after < before, "loss {before} -> {after}");
    }

    #[test]
    fn mismatched_cache_is_an_invalid_state() {
        let params = small_params(5, 4, 3);
        let other = small_params(5, 4, 5);
        let inputs = random_inputs(6, 3, 4);
        let (_, traces) = forward_sequence(&inputs, &other).unwrap();
        assert!(matches!(
            backward_bptt(&traces, &[0, 1, 2], &params),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn headless_cache_is_rejected() {
        let params = small_params(5, 4, 3);
        let cell = crate::gru::gru_cell_forward(&[0.1, 0.2, 0.3, 0.4], &[0.0; 3], &params).unwrap();
        assert!(matches!(
            backward_bptt(&[cell], &[0], &params),
            Err(Error::State(_))
        ));
    }
}
