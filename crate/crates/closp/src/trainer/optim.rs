//! Adam with bias correction and the warmup-plus-cosine learning rate
//! schedule.

use crate::error::{Error, Result};
use crate::ndmath::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for one parameter list, plus the
/// shared step count. One state drives every parameter of a model.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over aligned parameter and gradient lists.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr >= 0.0) {
        return Err(Error::Domain(format!("learning rate must be >= 0, got {lr}")));
    }
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "{} params, {} grads, state of {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[k].len() {
            return Err(Error::Shape(format!(
                "param {k}: {} values, {} gradient entries, {} moments",
                p.len(),
                g.len(),
                state.m[k].len()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let mc = 1.0 - ADAM_BETA1.powi(t);
    let vc = 1.0 - ADAM_BETA2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        for (i, (value, &grad)) in p.values_mut().iter_mut().zip(g.iter()).enumerate() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad * grad;
            let m_hat = m[i] / mc;
            let v_hat = v[i] / vc;
            *value -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Linear warmup to `max_lr` over `warmup_steps`, then cosine decay to zero
/// at `total_steps`.
pub fn lr_schedule(step: usize, total_steps: usize, warmup_steps: usize, max_lr: f64) -> Result<f64> {
    if !(max_lr > 0.0) {
        return Err(Error::Domain(format!("max_lr must be positive, got {max_lr}")));
    }
    if warmup_steps >= total_steps {
        return Err(Error::Domain(format!(
            "warmup ({warmup_steps}) must be shorter than the schedule ({total_steps})"
        )));
    }
    if step > total_steps {
        return Err(Error::Domain(format!(
            "step {step} beyond schedule end {total_steps}"
        )));
    }
    if step < warmup_steps {
        return Ok(max_lr * (step + 1) as f64 / warmup_steps as f64);
    }
    let span = (total_steps - warmup_steps) as f64;
    let phase = std::f64::consts::PI * (step - warmup_steps) as f64 / span;
    Ok(max_lr * 0.5 * (1.0 + phase.cos()))
}
