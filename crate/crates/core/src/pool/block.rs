//! A pooling block applied to a whole `C x H x W` feature map.
//!
//! Parameters are not owned by the block. They are described by
//! [`PoolBlock::layout`] and passed back in as slices (in layout order), so
//! the same block can be driven from a training parameter store or from a
//! standalone gradient check.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::grads::{self, GradBundle};
use super::ops;
use super::se::{self, Affine};
use super::{Method, PoolSpec};
use crate::error::{Error, Result};
use crate::math;
use crate::tensor::{map_windows, output_size, window_into, Tensor};

/// Name, length and update rules of one parameter slot of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamShape {
    pub name: &'static str,
    pub len: usize,
    pub trainable: bool,
    /// Projected back onto the probability simplex after every update.
    pub simplex: bool,
}

/// Typed view of a block's parameters.
#[derive(Debug, Clone, Copy)]
pub enum PoolParams<'a> {
    None,
    Conv(&'a [f64]),
    Gate(&'a [f64]),
    Ordinal(&'a [f64]),
    Lnp(f64),
    Lse(f64),
    Tau(&'a [f64]),
    Se { f1: Affine<'a>, f2: Affine<'a> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolBlock {
    pub spec: PoolSpec,
    /// SE reduction ratio; only meaningful for SESMP and SEMP.
    pub se_ratio: usize,
}

impl PoolBlock {
    pub fn new(spec: PoolSpec, se_ratio: usize) -> Result<Self> {
        if spec.method.uses_se_branch() && (se_ratio == 0 || !spec.channels.is_multiple_of(se_ratio)) {
            return Err(Error::Config(format!(
                "reduction ratio {se_ratio} does not divide {} channels",
                spec.channels
            )));
        }
        Ok(Self { spec, se_ratio })
    }

    pub fn method(&self) -> Method {
        self.spec.method
    }

    pub fn layout(&self) -> Vec<ParamShape> {
        let n = self.spec.window.len();
        let c = self.spec.channels;
        let slot = |name, len, trainable| ParamShape { name, len, trainable, simplex: false };
        match self.spec.method {
            Method::Mp | Method::Ap | Method::Nn => Vec::new(),
            Method::Conv => vec![slot("conv_w", n, true)],
            Method::Gp => vec![slot("gate_w", n, true)],
            Method::Op => vec![ParamShape { name: "ordinal_w", len: n, trainable: true, simplex: true }],
            Method::Lnp => vec![slot("p_tilde", 1, true)],
            Method::Lse => vec![slot("lse_r", 1, false)],
            Method::SmpFixed => vec![slot("tau", c, false)],
            Method::Smp => vec![slot("tau", c, true)],
            Method::Sesmp | Method::Semp => {
                let h = c / self.se_ratio;
                vec![
                    slot("se_f1_w", h * c, true),
                    slot("se_f1_b", h, true),
                    slot("se_f2_w", c * h, true),
                    slot("se_f2_b", c, true),
                ]
            }
        }
    }

    /// Binds raw slot slices (in layout order) to a typed view, checking lengths.
    pub fn bind<'a>(&self, slots: &[&'a [f64]]) -> Result<PoolParams<'a>> {
        let layout = self.layout();
        if slots.len() != layout.len() {
            return Err(Error::Shape(format!(
                "{} expects {} parameter slots, got {}",
                self.spec.method,
                layout.len(),
                slots.len()
            )));
        }
        for (shape, s) in layout.iter().zip(slots) {
            if shape.len != s.len() {
                return Err(Error::Shape(format!(
                    "{} slot {} expects {} values, got {}",
                    self.spec.method,
                    shape.name,
                    shape.len,
                    s.len()
                )));
            }
        }
        Ok(match self.spec.method {
            Method::Mp | Method::Ap | Method::Nn => PoolParams::None,
            Method::Conv => PoolParams::Conv(slots[0]),
            Method::Gp => PoolParams::Gate(slots[0]),
            Method::Op => PoolParams::Ordinal(slots[0]),
            Method::Lnp => PoolParams::Lnp(slots[0][0]),
            Method::Lse => PoolParams::Lse(slots[0][0]),
            Method::SmpFixed | Method::Smp => PoolParams::Tau(slots[0]),
            Method::Sesmp | Method::Semp => {
                PoolParams::Se { f1: Affine::new(slots[0], slots[1])?, f2: Affine::new(slots[2], slots[3])? }
            }
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (c, h, w) = x.dims3()?;
        if c != self.spec.channels {
            return Err(Error::Shape(format!("block configured for {} channels, input has {c}", self.spec.channels)));
        }
        Ok((c, h, w))
    }

    fn window_value(&self, params: &PoolParams<'_>, c: usize, win: &[f64], tau: &[f64]) -> Result<f64> {
        match (self.spec.method, params) {
            (Method::Mp, _) => ops::f_mp(win),
            (Method::Ap, _) => ops::f_ap(win),
            (Method::Nn, _) => ops::f_nn(win),
            (Method::Conv, PoolParams::Conv(w)) => ops::f_conv(win, w),
            (Method::Gp, PoolParams::Gate(w)) => ops::f_gp(win, w).map(|(y, _)| y),
            (Method::Op, PoolParams::Ordinal(w)) => Ok(ops::ordinal_unchecked(win, w).0),
            (Method::Lnp, PoolParams::Lnp(p)) => ops::f_lnp(win, *p),
            (Method::Lse, PoolParams::Lse(r)) => ops::f_lse(win, *r),
            (Method::SmpFixed | Method::Smp, PoolParams::Tau(t)) => ops::f_smp(win, t[c]),
            (Method::Sesmp, PoolParams::Se { .. }) => ops::f_smp(win, tau[c]),
            (Method::Semp, PoolParams::Se { .. }) => {
                Ok(win.iter().map(|&v| tau[c] * v).fold(f64::NEG_INFINITY, f64::max))
            }
            (m, _) => Err(Error::Param(format!("parameters do not match method {m}"))),
        }
    }

    /// Per-channel temperatures (SESMP) or gates (SEMP) from the SE branch.
    fn branch_values(&self, x: &Tensor, params: &PoolParams<'_>) -> Result<Vec<f64>> {
        match (self.spec.method, params) {
            (Method::Sesmp, PoolParams::Se { f1, f2 }) => {
                se::se_tau_branch(&se::gap_channel(x)?, f1, f2, self.se_ratio)
            }
            (Method::Semp, PoolParams::Se { f1, f2 }) => se::se_scales(x, f1, f2, self.se_ratio),
            _ => Ok(Vec::new()),
        }
    }

    /// Ordinal weights are not re-validated per window here; the training
    /// store keeps them on the simplex by projection.
    pub fn forward(&self, x: &Tensor, params: &PoolParams<'_>) -> Result<Tensor> {
        self.check_input(x)?;
        let branch = self.branch_values(x, params)?;
        map_windows(x, self.spec.window, |c, win| self.window_value(params, c, win, &branch))
    }

    fn window_grad(&self, params: &PoolParams<'_>, c: usize, win: &[f64], branch: &[f64]) -> Result<GradBundle> {
        match (self.spec.method, params) {
            (Method::Mp, _) => grads::grad_mp(win),
            (Method::Ap, _) => grads::grad_ap(win),
            (Method::Nn, _) => grads::grad_nn(win),
            (Method::Conv, PoolParams::Conv(w)) => grads::grad_conv(win, w),
            (Method::Gp, PoolParams::Gate(w)) => {
                let (_, g) = ops::f_gp(win, w)?;
                grads::grad_gp(win, w, g)
            }
            (Method::Op, PoolParams::Ordinal(w)) => {
                let perm = ops::sort_permutation(win);
                grads::grad_op(win, w, &perm)
            }
            (Method::Lnp, PoolParams::Lnp(p)) => grads::grad_lnp(win, *p),
            (Method::Lse, PoolParams::Lse(r)) => grads::grad_lse(win, *r),
            (Method::SmpFixed | Method::Smp, PoolParams::Tau(t)) => grads::grad_smp(win, t[c]),
            (Method::Sesmp, PoolParams::Se { .. }) => grads::grad_smp(win, branch[c]),
            (Method::Semp, PoolParams::Se { .. }) => {
                // max-pool of the gated window; d_params carries d y / d gate
                let scaled: Vec<f64> = win.iter().map(|&v| branch[c] * v).collect();
                let top = math::argmax(&scaled);
                let mut d_input = vec![0.0; win.len()];
                d_input[top] = branch[c];
                Ok(GradBundle { d_input, d_params: vec![win[top]] })
            }
            (m, _) => Err(Error::Param(format!("parameters do not match method {m}"))),
        }
    }

    /// Given the input `x` and upstream gradient `dy` (shape of the output),
    /// returns `dL/dx` and `dL/d(slot)` for every parameter slot in layout order.
    pub fn backward(&self, x: &Tensor, params: &PoolParams<'_>, dy: &Tensor) -> Result<(Tensor, Vec<Vec<f64>>)> {
        let (channels, h, w) = self.check_input(x)?;
        let window = self.spec.window;
        let (rows, cols) = output_size(h, w, window)?;
        if dy.len() != channels * rows * cols {
            return Err(Error::Shape(format!(
                "upstream gradient has {} values, output has {}",
                dy.len(),
                channels * rows * cols
            )));
        }
        let branch = self.branch_values(x, params)?;
        let layout = self.layout();
        let mut slot_grads: Vec<Vec<f64>> = layout.iter().map(|s| vec![0.0; s.len]).collect();
        // per-channel dL/d(branch value) for SE methods
        let mut d_branch = vec![0.0; if branch.is_empty() { 0 } else { channels }];
        let mut dx = Tensor::zeros(x.shape().to_vec())?;
        let mut buf = vec![0.0; window.len()];

        for c in 0..channels {
            let plane = x.channel(c);
            for i in 0..rows {
                for j in 0..cols {
                    let up = dy.data()[(c * rows + i) * cols + j];
                    window_into(plane, w, window, i, j, &mut buf);
                    let g = self.window_grad(params, c, &buf, &branch).map_err(|e| Error::AtWindow {
                        c,
                        i,
                        j,
                        source: alloc::boxed::Box::new(e),
                    })?;
                    let dplane = dx.channel_mut(c);
                    for (idx, d) in window.offsets(w, i, j).zip(&g.d_input) {
                        dplane[idx] += up * d;
                    }
                    match self.spec.method {
                        Method::SmpFixed | Method::Smp => slot_grads[0][c] += up * g.d_params[0],
                        Method::Sesmp | Method::Semp => d_branch[c] += up * g.d_params[0],
                        _ => {
                            for (acc, d) in slot_grads.iter_mut().flat_map(|s| s.iter_mut()).zip(&g.d_params) {
                                *acc += up * d;
                            }
                        }
                    }
                }
            }
        }

        if let PoolParams::Se { f1, f2 } = params {
            if self.spec.method == Method::Semp {
                // d gate -> d logit through the sigmoid
                for (d, &s) in d_branch.iter_mut().zip(&branch) {
                    *d *= s * (1.0 - s);
                }
            }
            let mu = se::gap_channel(x)?;
            let sg = se::grad_se_branch(&mu, f1, f2, &d_branch)?;
            let spread = se::gap_backward(&sg.mu, h, w)?;
            for (a, b) in dx.data_mut().iter_mut().zip(spread.data()) {
                *a += b;
            }
            slot_grads = vec![sg.f1_weight, sg.f1_bias, sg.f2_weight, sg.f2_bias];
        }
        Ok((dx, slot_grads))
    }
}
