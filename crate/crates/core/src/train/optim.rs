use super::config::AdamWConfig;
use crate::error::{Error, Result};

/// Adam moment estimates for a flattened parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        OptimizerState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One AdamW update in place, with bias correction and decoupled decay:
/// `θ ← θ − lr·m̂/(√v̂ + ε) − lr·λ·θ`.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    lr: f64,
    cfg: &AdamWConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Length {
            expected: params.len(),
            got: grads.len().min(state.m.len()).min(state.v.len()),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        let theta = params[i];
        params[i] = theta - lr * (m_hat / (v_hat.sqrt() + cfg.eps)) - lr * cfg.weight_decay * theta;
    }
    Ok(())
}
