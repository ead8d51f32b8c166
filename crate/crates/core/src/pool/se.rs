//! Squeeze-and-excitation branch: per-channel global average, then
//! affine -> ReLU -> affine. SESMP reads the result as per-channel
//! temperatures; SEMP squashes it through a sigmoid and rescales channels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::{map_windows, Tensor, WindowSpec};

/// Borrowed affine map `x -> W x + b`, `W` stored row-major `out x in`.
#[derive(Debug, Clone, Copy)]
pub struct Affine<'a> {
    weight: &'a [f64],
    bias: &'a [f64],
    in_dim: usize,
}

impl<'a> Affine<'a> {
    pub fn new(weight: &'a [f64], bias: &'a [f64]) -> Result<Self> {
        let out_dim = bias.len();
        if out_dim == 0 || !weight.len().is_multiple_of(out_dim) || weight.is_empty() {
            return Err(Error::Shape(format!(
                "affine weight of length {} does not fit {} outputs",
                weight.len(),
                out_dim
            )));
        }
        Ok(Self { weight, bias, in_dim: weight.len() / out_dim })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim)
            .zip(self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Gradients of the SE branch for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct SeGrads {
    pub f1_weight: Vec<f64>,
    pub f1_bias: Vec<f64>,
    pub f2_weight: Vec<f64>,
    pub f2_bias: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Per-channel spatial mean of a `C x H x W` tensor.
pub fn gap_channel(x: &Tensor) -> Result<Vec<f64>> {
    let (channels, h, w) = x.dims3()?;
    let area = (h * w) as f64;
    Ok((0..channels).map(|c| x.channel(c).iter().sum::<f64>() / area).collect())
}

/// Backward of [`gap_channel`]: spreads `d_mu[c] / (H W)` over channel `c`.
pub fn gap_backward(d_mu: &[f64], h: usize, w: usize) -> Result<Tensor> {
    let area = h * w;
    let scale = 1.0 / area as f64;
    Tensor::from_fn(vec![d_mu.len(), h, w], |k| d_mu[k / area] * scale)
}

/// Validates that `f1: R^C -> R^{C/r}` and `f2: R^{C/r} -> R^C`.
pub fn check_branch(channels: usize, ratio: usize, f1: &Affine<'_>, f2: &Affine<'_>) -> Result<()> {
    if ratio == 0 || !channels.is_multiple_of(ratio) {
        return Err(Error::Config(format!("reduction ratio {ratio} does not divide {channels} channels")));
    }
    let hidden = channels / ratio;
    if f1.in_dim() != channels || f1.out_dim() != hidden || f2.in_dim() != hidden || f2.out_dim() != channels {
        return Err(Error::Shape(format!(
            "SE maps must be {channels}->{hidden}->{channels}, got {}->{}->{}",
            f1.in_dim(),
            f1.out_dim(),
            f2.out_dim()
        )));
    }
    Ok(())
}

/// Returns `(F1 mu, F2(ReLU(F1 mu)))`.
pub(crate) fn branch_forward(mu: &[f64], f1: &Affine<'_>, f2: &Affine<'_>) -> (Vec<f64>, Vec<f64>) {
    let pre = f1.apply(mu);
    let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
    (pre, f2.apply(&hidden))
}

/// Temperatures `tau = F2(ReLU(F1(mu)))`, one per channel.
pub fn se_tau_branch(mu: &[f64], f1: &Affine<'_>, f2: &Affine<'_>, ratio: usize) -> Result<Vec<f64>> {
    check_branch(mu.len(), ratio, f1, f2)?;
    Ok(branch_forward(mu, f1, f2).1)
}

/// Backward through affine -> ReLU -> affine given `d_out = dL/d(branch output)`.
/// The ReLU derivative at 0 is taken as 0.
pub fn grad_se_branch(mu: &[f64], f1: &Affine<'_>, f2: &Affine<'_>, d_out: &[f64]) -> Result<SeGrads> {
    if d_out.len() != f2.out_dim() || mu.len() != f1.in_dim() || f1.out_dim() != f2.in_dim() {
        return Err(Error::Shape("SE branch gradient shapes disagree".into()));
    }
    let (pre, _) = branch_forward(mu, f1, f2);
    let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
    let (nh, nc) = (hidden.len(), mu.len());

    let mut f2_weight = vec![0.0; d_out.len() * nh];
    for (row, &g) in f2_weight.chunks_exact_mut(nh).zip(d_out) {
        for (dw, &h) in row.iter_mut().zip(&hidden) {
            *dw = g * h;
        }
    }
    let f2_bias = d_out.to_vec();

    let mut d_pre = vec![0.0; nh];
    for (row, &g) in f2.weight.chunks_exact(nh).zip(d_out) {
        for (k, &w) in row.iter().enumerate() {
            d_pre[k] += g * w;
        }
    }
    for (d, &p) in d_pre.iter_mut().zip(&pre) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }

    let mut f1_weight = vec![0.0; nh * nc];
    let mut d_mu = vec![0.0; nc];
    for ((row, wrow), &g) in f1_weight.chunks_exact_mut(nc).zip(f1.weight.chunks_exact(nc)).zip(&d_pre) {
        for c in 0..nc {
            row[c] = g * mu[c];
            d_mu[c] += g * wrow[c];
        }
    }
    Ok(SeGrads { f1_weight, f1_bias: d_pre, f2_weight, f2_bias, mu: d_mu })
}

/// Channel scales `sigmoid(F2(ReLU(F1(GAP x))))`.
pub fn se_scales(x: &Tensor, f1: &Affine<'_>, f2: &Affine<'_>, ratio: usize) -> Result<Vec<f64>> {
    let mu = gap_channel(x)?;
    Ok(se_tau_branch(&mu, f1, f2, ratio)?.into_iter().map(math::sigmoid).collect())
}

/// Rescales each channel by its SE gate, then max-pools with `window`.
pub fn se_recalibrate_then_maxpool(
    x: &Tensor,
    f1: &Affine<'_>,
    f2: &Affine<'_>,
    ratio: usize,
    window: WindowSpec,
) -> Result<Tensor> {
    let scales = se_scales(x, f1, f2, ratio)?;
    map_windows(x, window, |c, win| Ok(win.iter().map(|&v| scales[c] * v).fold(f64::NEG_INFINITY, f64::max)))
}
