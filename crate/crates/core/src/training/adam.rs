use serde::{Deserialize, Serialize};

use crate::networks::NetworkParams;
use crate::numerics::{Real, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments for each parameter of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real = f32> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &NetworkParams<T>) -> Self {
        let zeros = || {
            params
                .params()
                .iter()
                .map(|p| Tensor::zeros(p.value.shape().to_vec()))
                .collect()
        };
        Self {
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Check that the moments mirror `params`.
    pub fn matches(&self, params: &NetworkParams<T>) -> Result<()> {
        let ps = params.params();
        if self.m.len() != ps.len() || self.v.len() != ps.len() {
            return Err(Error::shape(format!(
                "optimizer holds {} moments for {} parameters",
                self.m.len(),
                ps.len()
            )));
        }
        for ((m, v), p) in self.m.iter().zip(&self.v).zip(ps) {
            if m.shape() != p.value.shape() || v.shape() != p.value.shape() {
                return Err(Error::shape(format!(
                    "optimizer moment for {} has shape {:?}",
                    p.name,
                    m.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Elementwise Adam update for step number `step` (1-based).
pub fn adam_update<T: Real>(
    w: &mut [T],
    g: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    hp: &AdamHyper,
) {
    let t = step.min(i32::MAX as u64) as i32;
    let inv_c1 = T::lit(1.0 / (1.0 - hp.beta1.powi(t)));
    let inv_c2 = T::lit(1.0 / (1.0 - hp.beta2.powi(t)));
    let (b1, b2) = (T::lit(hp.beta1), T::lit(hp.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - hp.beta1), T::lit(1.0 - hp.beta2));
    let (lr, eps) = (T::lit(hp.lr), T::lit(hp.eps));
    for (((w, m), v), &g) in w.iter_mut().zip(m).zip(v).zip(g) {
        *m = b1 * *m + one_b1 * g;
        *v = b2 * *v + one_b2 * g * g;
        let m_hat = *m * inv_c1;
        let v_hat = *v * inv_c2;
        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One bias-corrected Adam update from the stored gradients, which are then cleared.
pub fn adam_step<T: Real>(
    params: &mut NetworkParams<T>,
    state: &mut AdamState<T>,
    hp: &AdamHyper,
) -> Result<()> {
    state.matches(params)?;
    if let Some(p) = params.params().iter().find(|p| p.grad.is_none()) {
        return Err(Error::MissingGrad(p.name.clone()));
    }
    state.step += 1;
    for ((p, m), v) in params
        .params_mut()
        .iter_mut()
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let g = p.grad.take().expect("checked above");
        adam_update(
            p.value.data_mut(),
            g.data(),
            m.data_mut(),
            v.data_mut(),
            state.step,
            hp,
        );
    }
    Ok(())
}
