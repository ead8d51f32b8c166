//! Forward window functions. Each takes one flattened window `x` (length `n`).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Tolerance used when validating simplex membership of ordinal weights.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Sigmoid gate of gated pooling; kept for the backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateValue(f64);

impl GateValue {
    pub fn from_logit(t: f64) -> Self {
        GateValue(math::sigmoid(t))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn non_empty(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        Err(Error::Shape("empty window".into()))
    } else {
        Ok(())
    }
}

fn same_len(x: &[f64], w: &[f64], what: &str) -> Result<()> {
    non_empty(x)?;
    if x.len() != w.len() {
        return Err(Error::Shape(format!("{what} has {} entries, window has {}", w.len(), x.len())));
    }
    Ok(())
}

fn finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("window contains inf or NaN".into()))
    }
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn f_mp(x: &[f64]) -> Result<f64> {
    non_empty(x)?;
    Ok(max_of(x))
}

pub fn f_ap(x: &[f64]) -> Result<f64> {
    non_empty(x)?;
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

/// Nearest-neighbour downsampling: the first entry in row-major window order.
pub fn f_nn(x: &[f64]) -> Result<f64> {
    non_empty(x)?;
    Ok(x[0])
}

pub fn f_conv(x: &[f64], w: &[f64]) -> Result<f64> {
    same_len(x, w, "convolution kernel")?;
    Ok(x.iter().zip(w).map(|(a, b)| a * b).sum())
}

/// `g * AP(x) + (1 - g) * MP(x)` with `g = sigmoid(gate_w . x)`.
pub fn f_gp(x: &[f64], gate_w: &[f64]) -> Result<(f64, GateValue)> {
    same_len(x, gate_w, "gate weights")?;
    let logit: f64 = x.iter().zip(gate_w).map(|(a, b)| a * b).sum();
    let g = GateValue::from_logit(logit);
    let y = g.0 * f_ap(x)? + (1.0 - g.0) * f_mp(x)?;
    Ok((y, g))
}

/// Checks that `w` lies on the probability simplex.
pub fn check_simplex(w: &[f64]) -> Result<()> {
    let sum: f64 = w.iter().sum();
    if w.iter().any(|&v| !(v >= 0.0)) || math::abs(sum - 1.0) > SIMPLEX_TOL {
        return Err(Error::Param(format!("ordinal weights must be nonnegative and sum to 1 (sum = {sum})")));
    }
    Ok(())
}

/// Indices that sort `x` ascending; equal values keep window order.
pub fn sort_permutation(x: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..x.len()).collect();
    perm.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    perm
}

/// Ordinal pooling, returning the value and the sorting permutation.
pub fn f_op_with_perm(x: &[f64], w: &[f64]) -> Result<(f64, Vec<usize>)> {
    same_len(x, w, "ordinal weights")?;
    check_simplex(w)?;
    Ok(ordinal_unchecked(x, w))
}

/// Ordinal combination without the simplex check (lengths must agree).
pub(crate) fn ordinal_unchecked(x: &[f64], w: &[f64]) -> (f64, Vec<usize>) {
    let perm = sort_permutation(x);
    let y = perm.iter().zip(w).map(|(&i, wk)| wk * x[i]).sum();
    (y, perm)
}

pub fn f_op(x: &[f64], w: &[f64]) -> Result<f64> {
    f_op_with_perm(x, w).map(|(y, _)| y)
}

/// `ReLU(w_i) / sum_j ReLU(w_j)`; errors when no entry is positive.
pub fn project_ordinal_weights(w: &[f64]) -> Result<Vec<f64>> {
    let mut out = w.to_vec();
    project_ordinal_in_place(&mut out)?;
    Ok(out)
}

pub(crate) fn project_ordinal_in_place(w: &mut [f64]) -> Result<()> {
    let total: f64 = w.iter().map(|&v| v.max(0.0)).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateProjection);
    }
    for v in w.iter_mut() {
        *v = v.max(0.0) / total;
    }
    Ok(())
}

/// Exponent `p = 1 + softplus(p_tilde)` of learned-norm pooling.
pub fn lnp_exponent(p_tilde: f64) -> f64 {
    1.0 + math::softplus(p_tilde)
}

/// Inverse of [`lnp_exponent`]; `p` must exceed 1.
pub fn lnp_p_tilde(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Param(format!("LNP exponent {p} must exceed 1")));
    }
    // softplus^-1(t) = log(exp(t) - 1)
    Ok(math::ln(libm::expm1(p - 1.0)))
}

/// Scaled pieces of the power mean: `(M, a_i^p, mean a_i^p)` with `a_i = |x_i| / M`
/// and `M = max |x_i|`. Keeps `|x|^p` from overflowing for large `p`.
pub(crate) fn lnp_scaled(x: &[f64], p: f64) -> (f64, Vec<f64>, f64) {
    let scale = x.iter().map(|&v| math::abs(v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return (0.0, vec![0.0; x.len()], 0.0);
    }
    let powers: Vec<f64> = x.iter().map(|&v| math::powf(math::abs(v) / scale, p)).collect();
    let mean = powers.iter().sum::<f64>() / x.len() as f64;
    (scale, powers, mean)
}

/// `((1/n) sum |x_i|^p)^(1/p)` with `p = 1 + softplus(p_tilde)`.
pub fn f_lnp(x: &[f64], p_tilde: f64) -> Result<f64> {
    non_empty(x)?;
    finite(x)?;
    f_lnp_exponent(x, lnp_exponent(p_tilde))
}

/// Learned-norm pooling evaluated directly at exponent `p >= 1`.
pub fn f_lnp_exponent(x: &[f64], p: f64) -> Result<f64> {
    non_empty(x)?;
    if !(p >= 1.0) {
        return Err(Error::Param(format!("LNP exponent {p} must be at least 1")));
    }
    let (scale, _, mean) = lnp_scaled(x, p);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(scale * math::powf(mean, 1.0 / p))
}

fn check_lse_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Param(format!("LSE sharpness r = {r} must be positive and finite")))
    }
}

/// `(1/r) log((1/n) sum exp(r x_i))`, shifted by the window maximum.
pub fn f_lse(x: &[f64], r: f64) -> Result<f64> {
    non_empty(x)?;
    finite(x)?;
    check_lse_r(r)?;
    let top = max_of(x);
    let sum: f64 = x.iter().map(|&v| math::exp(r * (v - top))).sum();
    Ok(top + (math::ln(sum) - math::ln(x.len() as f64)) / r)
}

pub(crate) fn lse_check(x: &[f64], r: f64) -> Result<()> {
    non_empty(x)?;
    finite(x)?;
    check_lse_r(r)
}

/// Softmax weights `softmax(tau * x)` (shift-stabilised) and the smooth
/// maximum `sum_i x_i * weight_i`, clamped into `[min x, max x]`.
pub(crate) fn smp_weights(x: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
    non_empty(x)?;
    finite(x)?;
    if !tau.is_finite() {
        return Err(Error::NonFinite(format!("temperature {tau}")));
    }
    let mut weights = vec![0.0; x.len()];
    let (total, _) = math::shifted_exp(x, tau, &mut weights);
    let numer: f64 = x.iter().zip(&weights).map(|(a, e)| a * e).sum();
    let y = (numer / total).clamp(min_of(x), max_of(x));
    for e in weights.iter_mut() {
        *e /= total;
    }
    Ok((weights, y))
}

/// Smooth-maximum pooling `sum_i x_i softmax_tau(x)_i`. The softmax is
/// evaluated on `tau * x_i - max_j tau * x_j`, so no exponent is positive.
pub fn f_smp(x: &[f64], tau: f64) -> Result<f64> {
    smp_weights(x, tau).map(|(_, y)| y)
}

/// Fixed temperatures `tau_c = log(c / C)` for `c = 1..=C`.
pub fn smp_fixed_init(channels: usize) -> Result<Vec<f64>> {
    if channels == 0 {
        return Err(Error::Config("SMPF needs at least one channel".into()));
    }
    let total = channels as f64;
    Ok((1..=channels).map(|c| math::ln(c as f64 / total)).collect())
}
