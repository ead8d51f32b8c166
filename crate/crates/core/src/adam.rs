//! Adam with bias correction. Entries flagged `simplex` are projected back
//! onto the probability simplex right after their update.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::params::{Grads, ParamStore};
use crate::pool::ops::project_ordinal_in_place;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0) || !beta_ok(self.beta1) || !beta_ok(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Param(alloc::format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.entries().iter().map(|e| vec![0.0; e.values.len()]).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update of every trainable entry.
pub fn adam_step(params: &mut ParamStore, grads: &Grads, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    cfg.validate()?;
    if grads.entries().len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape("gradient or optimizer state does not match the parameters".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    let correct1 = 1.0 - libm::pow(cfg.beta1, t);
    let correct2 = 1.0 - libm::pow(cfg.beta2, t);
    for (((entry, g), m), v) in params.entries_mut().iter_mut().zip(grads.entries()).zip(&mut state.m).zip(&mut state.v)
    {
        if !entry.trainable {
            continue;
        }
        for k in 0..entry.values.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let m_hat = m[k] / correct1;
            let v_hat = v[k] / correct2;
            entry.values[k] -= cfg.lr * m_hat / (math::sqrt(v_hat) + cfg.eps);
        }
        if entry.simplex {
            project_ordinal_in_place(&mut entry.values)?;
        }
    }
    Ok(())
}
