//! Analytic backward passes of the window functions.
//!
//! Every function returns a [`GradBundle`] holding `d y / d x_i` and the
//! derivatives with respect to the method's parameters, flattened in the
//! order documented on each function.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::ops::{self, GateValue};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub d_input: Vec<f64>,
    pub d_params: Vec<f64>,
}

impl GradBundle {
    fn inputs_only(d_input: Vec<f64>) -> Self {
        Self { d_input, d_params: Vec::new() }
    }
}

/// One-hot at the first maximiser.
pub fn grad_mp(x: &[f64]) -> Result<GradBundle> {
    ops::f_mp(x)?;
    let mut d = vec![0.0; x.len()];
    d[math::argmax(x)] = 1.0;
    Ok(GradBundle::inputs_only(d))
}

pub fn grad_ap(x: &[f64]) -> Result<GradBundle> {
    ops::f_ap(x)?;
    Ok(GradBundle::inputs_only(vec![1.0 / x.len() as f64; x.len()]))
}

pub fn grad_nn(x: &[f64]) -> Result<GradBundle> {
    ops::f_nn(x)?;
    let mut d = vec![0.0; x.len()];
    d[0] = 1.0;
    Ok(GradBundle::inputs_only(d))
}

/// `d_params` = gradient with respect to the kernel `w` (which is `x`).
pub fn grad_conv(x: &[f64], w: &[f64]) -> Result<GradBundle> {
    ops::f_conv(x, w)?;
    Ok(GradBundle { d_input: w.to_vec(), d_params: x.to_vec() })
}

/// `d_params` = gradient with respect to the gate weights. `gate` must be the
/// value produced by [`ops::f_gp`] for this `(x, gate_w)`.
pub fn grad_gp(x: &[f64], gate_w: &[f64], gate: GateValue) -> Result<GradBundle> {
    let (_, fresh) = ops::f_gp(x, gate_w)?;
    if fresh != gate {
        return Err(Error::Param("stale gate value: not computed from this window".into()));
    }
    let g = gate.value();
    let n = x.len() as f64;
    let gap = ops::f_ap(x)? - ops::f_mp(x)?;
    let slope = g * (1.0 - g) * gap;
    let top = math::argmax(x);
    let d_input = gate_w
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let hard = if i == top { 1.0 - g } else { 0.0 };
            g / n + hard + slope * w
        })
        .collect();
    let d_params = x.iter().map(|&v| slope * v).collect();
    Ok(GradBundle { d_input, d_params })
}

/// `d_params` = gradient with respect to the ordinal weights, i.e. the sorted
/// window. `perm` must sort `x` ascending. The permutation is treated as
/// locally constant; tied entries get the slot assigned by the stable sort.
/// The weights are not required to lie on the simplex here.
pub fn grad_op(x: &[f64], w: &[f64], perm: &[usize]) -> Result<GradBundle> {
    if x.is_empty() || x.len() != w.len() {
        return Err(Error::Shape(format!("window of {} with {} ordinal weights", x.len(), w.len())));
    }
    if ops::sort_permutation(x).as_slice() != perm {
        return Err(Error::Param("stale permutation: does not sort this window".into()));
    }
    let mut d_input = vec![0.0; x.len()];
    for (&i, &wk) in perm.iter().zip(w) {
        d_input[i] = wk;
    }
    let d_params = perm.iter().map(|&i| x[i]).collect();
    Ok(GradBundle { d_input, d_params })
}

/// `d_params = [d y / d p_tilde]`. Coordinates with `x_i = 0` get derivative 0
/// (the one-sided convention used for ReLU); `0 log 0` is taken as 0.
pub fn grad_lnp(x: &[f64], p_tilde: f64) -> Result<GradBundle> {
    ops::f_lnp(x, p_tilde)?;
    let p = ops::lnp_exponent(p_tilde);
    let n = x.len() as f64;
    let (scale, powers, mean) = ops::lnp_scaled(x, p);
    if scale == 0.0 {
        return Ok(GradBundle { d_input: vec![0.0; x.len()], d_params: vec![0.0] });
    }
    // y = M * mean^(1/p) with a_i = |x_i| / M; M cancels from dy/dx_i.
    let y = scale * math::powf(mean, 1.0 / p);
    let coeff = math::powf(mean, 1.0 / p - 1.0) / n;
    let d_input = x
        .iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else {
                let a = math::abs(v) / scale;
                coeff * math::powf(a, p - 1.0) * v.signum()
            }
        })
        .collect();
    let total: f64 = powers.iter().sum();
    let weighted_log: f64 =
        x.iter().zip(&powers).filter(|(v, _)| **v != 0.0).map(|(&v, &ap)| ap * math::ln(math::abs(v) / scale)).sum();
    let dy_dp = y * (weighted_log / (total * p) - math::ln(mean) / (p * p));
    let d_p_tilde = dy_dp * math::sigmoid(p_tilde);
    Ok(GradBundle { d_input, d_params: vec![d_p_tilde] })
}

/// `softmax(r x)`, evaluated with the max shift. `r` is fixed, so no parameter gradient.
pub fn grad_lse(x: &[f64], r: f64) -> Result<GradBundle> {
    ops::lse_check(x, r)?;
    let mut d = vec![0.0; x.len()];
    let (total, _) = math::shifted_exp(x, r, &mut d);
    for v in d.iter_mut() {
        *v /= total;
    }
    Ok(GradBundle::inputs_only(d))
}

/// `d_input_i = s_i (1 + tau (x_i - y))` and `d_params = [d y / d tau]`, the
/// variance of `x` under `s = softmax(tau x)`, summed in centred form so it is
/// never negative.
pub fn grad_smp(x: &[f64], tau: f64) -> Result<GradBundle> {
    let (weights, y) = ops::smp_weights(x, tau)?;
    let d_input = weights.iter().zip(x).map(|(&s, &v)| s * (1.0 + tau * (v - y))).collect();
    let variance = weights.iter().zip(x).map(|(&s, &v)| s * (v - y) * (v - y)).sum();
    Ok(GradBundle { d_input, d_params: vec![variance] })
}
