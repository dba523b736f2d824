//! Adam with L2 weight decay folded into the gradient.

use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};
use crate::neural::Var;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

/// First and second moments per parameter, plus the step counter.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_params(params: &[Var]) -> Self {
        Self::new(params.iter().map(|p| p.value().numel()))
    }
}

/// One bias-corrected update of raw parameter slices.
pub fn adam_update(theta: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState, lr: f64, cfg: &AdamConfig) -> Result<()> {
    if theta.len() != grads.len() || theta.len() != state.m.len() {
        return Err(FloralError::Shape(format!(
            "adam: {} parameters, {} gradients, {} moment slots",
            theta.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (k, (t, g)) in theta.iter().zip(grads).enumerate() {
        if t.len() != g.len() || t.len() != state.m[k].len() {
            return Err(FloralError::Shape(format!("adam: parameter {k} has mismatched gradient or state")));
        }
    }
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
    for (k, (t, g)) in theta.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..t.len() {
            let gi = g[i] + cfg.weight_decay * t[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            t[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Updates every parameter in place from its accumulated gradient (missing = 0).
pub fn adam_step(params: &mut [Var], state: &mut AdamState, lr: f64, cfg: &AdamConfig) -> Result<()> {
    let grads: Vec<Vec<f64>> =
        params.iter().map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.value().numel()])).collect();
    let mut theta: Vec<&mut [f64]> = Vec::with_capacity(params.len());
    for p in params.iter_mut() {
        let v = p
            .value_mut()
            .ok_or_else(|| FloralError::Autograd("parameter is still referenced by a live graph".into()))?;
        theta.push(v.data.as_mut_slice());
    }
    let grads: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
    adam_update(&mut theta, &grads, state, lr, cfg)
}
