//! Central finite-difference oracle and the random test cases it is run on.
//!
//! A [`Differentiable`] maps a flat point (window inputs followed by the
//! trainable parameters) to a scalar and supplies an analytic gradient.
//! [`fd_check`] compares the two coordinate by coordinate. [`sample_case`]
//! draws random points for each pooling method away from the sets where the
//! method is not differentiable (ties for max-like methods, zeros for LNP,
//! ReLU hinges inside the SE branch).

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::pool::{grads, ops, se, Method, PoolBlock, PoolSpec};
use crate::tensor::{output_size, window_into, Tensor, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    /// Central-difference step `h`.
    pub step: f64,
    /// Bound on the relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator. Central differences at
    /// `h = 1e-5` carry ~1e-10 of roundoff, so gradients much smaller than
    /// this are compared on an absolute scale of `tolerance * floor`.
    pub floor: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { step: 1e-5, tolerance: 1e-5, floor: 1e-3 }
    }
}

impl FdConfig {
    pub fn new(step: f64, tolerance: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Param(format!("finite-difference step {step} must be positive")));
        }
        Ok(Self { step, tolerance, ..Self::default() })
    }
}

/// `|a - f| / max(|a|, |f|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = math::abs(analytic).max(math::abs(numeric)).max(floor);
    math::abs(analytic - numeric) / denom
}

pub trait Differentiable {
    fn dim(&self) -> usize;
    fn value(&self, point: &[f64]) -> Result<f64>;
    fn gradient(&self, point: &[f64]) -> Result<Vec<f64>>;
    /// False when `point` lies within `h` of a non-differentiable set.
    fn smooth_at(&self, _point: &[f64], _h: f64) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdOutcome {
    Checked {
        max_rel_error: f64,
        worst_coord: usize,
    },
    /// The point is too close to a kink for central differences to apply.
    NonDifferentiable,
}

impl FdOutcome {
    pub fn error(&self) -> Option<f64> {
        match self {
            FdOutcome::Checked { max_rel_error, .. } => Some(*max_rel_error),
            FdOutcome::NonDifferentiable => None,
        }
    }
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` in every
/// coordinate, compared against `f.gradient(x)`.
pub fn fd_check(f: &dyn Differentiable, point: &[f64], cfg: &FdConfig) -> Result<FdOutcome> {
    if point.len() != f.dim() {
        return Err(Error::Shape(format!("point has {} coordinates, expected {}", point.len(), f.dim())));
    }
    if !f.smooth_at(point, cfg.step) {
        return Ok(FdOutcome::NonDifferentiable);
    }
    let analytic = f.gradient(point)?;
    let mut probe = point.to_vec();
    let mut worst = (0.0, 0);
    for (k, &a) in analytic.iter().enumerate() {
        let orig = probe[k];
        probe[k] = orig + cfg.step;
        let up = f.value(&probe)?;
        probe[k] = orig - cfg.step;
        let down = f.value(&probe)?;
        probe[k] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("oracle evaluation at coordinate {k}")));
        }
        let numeric = (up - down) / (2.0 * cfg.step);
        let err = relative_error(a, numeric, cfg.floor);
        if !(err <= worst.0) {
            worst = (err, k);
        }
    }
    Ok(FdOutcome::Checked { max_rel_error: worst.0, worst_coord: worst.1 })
}

fn min_gap(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min)
}

/// A single window function with its parameters appended to the point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOp {
    pub method: Method,
    pub n: usize,
    /// Fixed sharpness for LSE.
    pub lse_r: f64,
}

impl WindowOp {
    pub fn new(method: Method, n: usize) -> Result<Self> {
        if method.uses_se_branch() {
            return Err(Error::Config(format!("{method} needs a whole feature map; use BlockOp")));
        }
        Ok(Self { method, n, lse_r: 1.0 })
    }

    fn param_len(&self) -> usize {
        match self.method {
            Method::Conv | Method::Gp | Method::Op => self.n,
            Method::Lnp | Method::Smp | Method::SmpFixed => 1,
            _ => 0,
        }
    }
}

impl Differentiable for WindowOp {
    fn dim(&self) -> usize {
        self.n + self.param_len()
    }

    fn value(&self, point: &[f64]) -> Result<f64> {
        let (x, p) = point.split_at(self.n);
        match self.method {
            Method::Mp => ops::f_mp(x),
            Method::Ap => ops::f_ap(x),
            Method::Nn => ops::f_nn(x),
            Method::Conv => ops::f_conv(x, p),
            Method::Gp => ops::f_gp(x, p).map(|(y, _)| y),
            Method::Op => Ok(ops::ordinal_unchecked(x, p).0),
            Method::Lnp => ops::f_lnp(x, p[0]),
            Method::Lse => ops::f_lse(x, self.lse_r),
            Method::Smp | Method::SmpFixed => ops::f_smp(x, p[0]),
            Method::Sesmp | Method::Semp => unreachable!("rejected in WindowOp::new"),
        }
    }

    fn gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        let (x, p) = point.split_at(self.n);
        let bundle = match self.method {
            Method::Mp => grads::grad_mp(x)?,
            Method::Ap => grads::grad_ap(x)?,
            Method::Nn => grads::grad_nn(x)?,
            Method::Conv => grads::grad_conv(x, p)?,
            Method::Gp => {
                let (_, g) = ops::f_gp(x, p)?;
                grads::grad_gp(x, p, g)?
            }
            Method::Op => grads::grad_op(x, p, &ops::sort_permutation(x))?,
            Method::Lnp => grads::grad_lnp(x, p[0])?,
            Method::Lse => grads::grad_lse(x, self.lse_r)?,
            Method::Smp | Method::SmpFixed => grads::grad_smp(x, p[0])?,
            Method::Sesmp | Method::Semp => unreachable!("rejected in WindowOp::new"),
        };
        let mut out = bundle.d_input;
        out.extend(bundle.d_params);
        Ok(out)
    }

    fn smooth_at(&self, point: &[f64], h: f64) -> bool {
        let x = &point[..self.n];
        match self.method {
            m if m.kinks_at_ties() => min_gap(x) > 2.0 * h,
            Method::Lnp => x.iter().all(|&v| math::abs(v) > h),
            _ => true,
        }
    }
}

/// A whole pooling block on a `C x H x W` input, reduced to a scalar by a
/// fixed random linear functional of its output. The point is the input
/// followed by every trainable parameter slot; non-trainable slots are held.
#[derive(Debug, Clone)]
pub struct BlockOp {
    pub block: PoolBlock,
    pub height: usize,
    pub width: usize,
    /// Weights of the output functional (one per output element).
    pub upstream: Tensor,
    /// Values of every slot; trainable ones are overwritten from the point.
    pub slots: Vec<Vec<f64>>,
}

impl BlockOp {
    fn input_len(&self) -> usize {
        self.block.spec.channels * self.height * self.width
    }

    fn unpack(&self, point: &[f64]) -> Result<(Tensor, Vec<Vec<f64>>)> {
        let (xs, mut rest) = point.split_at(self.input_len());
        let x = Tensor::new(vec![self.block.spec.channels, self.height, self.width], xs.to_vec())?;
        let mut slots = self.slots.clone();
        for (shape, slot) in self.block.layout().iter().zip(slots.iter_mut()) {
            if shape.trainable {
                let (head, tail) = rest.split_at(shape.len);
                slot.copy_from_slice(head);
                rest = tail;
            }
        }
        Ok((x, slots))
    }

    /// Packs an input and slot values into a point for this op.
    pub fn pack(&self, x: &Tensor, slots: &[Vec<f64>]) -> Vec<f64> {
        let mut point = x.data().to_vec();
        for (shape, slot) in self.block.layout().iter().zip(slots) {
            if shape.trainable {
                point.extend_from_slice(slot);
            }
        }
        point
    }
}

impl Differentiable for BlockOp {
    fn dim(&self) -> usize {
        let params: usize = self.block.layout().iter().filter(|s| s.trainable).map(|s| s.len).sum();
        self.input_len() + params
    }

    fn value(&self, point: &[f64]) -> Result<f64> {
        let (x, slots) = self.unpack(point)?;
        let refs: Vec<&[f64]> = slots.iter().map(|s| s.as_slice()).collect();
        let y = self.block.forward(&x, &self.block.bind(&refs)?)?;
        Ok(y.data().iter().zip(self.upstream.data()).map(|(a, b)| a * b).sum())
    }

    fn gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        let (x, slots) = self.unpack(point)?;
        let refs: Vec<&[f64]> = slots.iter().map(|s| s.as_slice()).collect();
        let (dx, dslots) = self.block.backward(&x, &self.block.bind(&refs)?, &self.upstream)?;
        let mut out = dx.into_data();
        for (shape, d) in self.block.layout().iter().zip(dslots) {
            if shape.trainable {
                out.extend(d);
            }
        }
        Ok(out)
    }

    fn smooth_at(&self, point: &[f64], h: f64) -> bool {
        let Ok((x, slots)) = self.unpack(point) else {
            return false;
        };
        let method = self.block.method();
        let window = self.block.spec.window;
        let (rows, cols) = match output_size(self.height, self.width, window) {
            Ok(rc) => rc,
            Err(_) => return false,
        };
        let mut buf = vec![0.0; window.len()];
        for c in 0..self.block.spec.channels {
            for i in 0..rows {
                for j in 0..cols {
                    window_into(x.channel(c), self.width, window, i, j, &mut buf);
                    if method.kinks_at_ties() && min_gap(&buf) <= 2.0 * h {
                        return false;
                    }
                    if method == Method::Lnp && buf.iter().any(|&v| math::abs(v) <= h) {
                        return false;
                    }
                }
            }
        }
        if method.uses_se_branch() {
            let Ok(f1) = se::Affine::new(&slots[0], &slots[1]) else {
                return false;
            };
            let Ok(mu) = se::gap_channel(&x) else {
                return false;
            };
            // a perturbation of size h moves each pre-activation by at most
            // h * (1 + sum |w| + sum |mu|)
            let reach = 1.0
                + slots[0].iter().map(|v| math::abs(*v)).sum::<f64>()
                + mu.iter().map(|v| math::abs(*v)).sum::<f64>();
            if f1.apply(&mu).iter().any(|&p| math::abs(p) <= 2.0 * h * reach) {
                return false;
            }
        }
        true
    }
}

/// One randomly drawn gradient-check problem.
pub struct GradCase {
    pub op: Box<dyn Differentiable>,
    pub point: Vec<f64>,
}

const TIE_GAP: f64 = 1e-3;

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw = uniform_vec(rng, n, 0.05, 1.0);
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Window entries for `method`, drawn away from its non-differentiable set.
fn sample_window<R: Rng + ?Sized>(rng: &mut R, method: Method, n: usize) -> Vec<f64> {
    loop {
        let x = if method == Method::Lnp {
            (0..n)
                .map(|_| {
                    let v = rng.random_range(0.1..5.0);
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        } else {
            uniform_vec(rng, n, -5.0, 5.0)
        };
        if !method.kinks_at_ties() || min_gap(&x) >= TIE_GAP {
            return x;
        }
    }
}

fn sample_params<R: Rng + ?Sized>(rng: &mut R, method: Method, n: usize) -> Vec<f64> {
    match method {
        Method::Conv | Method::Gp => uniform_vec(rng, n, -1.0, 1.0),
        Method::Op => random_simplex(rng, n),
        Method::Lnp => vec![rng.random_range(-2.0..3.0)],
        Method::Smp | Method::SmpFixed => vec![rng.random_range(-5.0..5.0)],
        _ => Vec::new(),
    }
}

/// A window-level case: one `2 x 2` window plus parameters.
pub fn sample_window_case<R: Rng + ?Sized>(method: Method, rng: &mut R) -> Result<GradCase> {
    let n = 4;
    let mut op = WindowOp::new(method, n)?;
    if method == Method::Lse {
        op.lse_r = rng.random_range(0.1..5.0);
    }
    let mut point = sample_window(rng, method, n);
    point.extend(sample_params(rng, method, n));
    Ok(GradCase { op: Box::new(op), point })
}

/// A block-level case on a `4 x 4 x 4` input with 2x2/stride-2 windows
/// (SE ratio 2).
pub fn sample_block_case<R: Rng + ?Sized>(method: Method, rng: &mut R) -> Result<GradCase> {
    let (channels, height, width) = (4, 4, 4);
    let window = WindowSpec::halving();
    let block = PoolBlock::new(PoolSpec::new(method, window, channels)?, 2)?;
    let (rows, cols) = output_size(height, width, window)?;
    let upstream = Tensor::new(vec![channels, rows, cols], uniform_vec(rng, channels * rows * cols, -1.0, 1.0))?;
    loop {
        let x = Tensor::new(vec![channels, height, width], {
            let mut data = Vec::with_capacity(channels * height * width);
            while data.len() < channels * height * width {
                data.extend(sample_window(rng, method, 1));
            }
            data
        })?;
        let slots: Vec<Vec<f64>> = block
            .layout()
            .iter()
            .map(|shape| match (method, shape.name) {
                (Method::Lse, _) => vec![rng.random_range(0.1..5.0)],
                (Method::Smp | Method::SmpFixed, _) => uniform_vec(rng, shape.len, -3.0, 3.0),
                (_, "se_f1_w" | "se_f2_w") => uniform_vec(rng, shape.len, -1.0, 1.0),
                (_, "se_f1_b" | "se_f2_b") => uniform_vec(rng, shape.len, -0.5, 0.5),
                _ => sample_params(rng, method, shape.len),
            })
            .collect();
        let op = BlockOp { block, height, width, upstream: upstream.clone(), slots: slots.clone() };
        let point = op.pack(&x, &slots);
        if op.smooth_at(&point, TIE_GAP / 2.0) {
            return Ok(GradCase { op: Box::new(op), point });
        }
    }
}

/// Window-level case where one exists, otherwise block-level.
pub fn sample_case<R: Rng + ?Sized>(method: Method, rng: &mut R) -> Result<GradCase> {
    if method.uses_se_branch() {
        sample_block_case(method, rng)
    } else {
        sample_window_case(method, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Linear(Vec<f64>);

    impl Differentiable for Linear {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn value(&self, p: &[f64]) -> Result<f64> {
            Ok(p.iter().zip(&self.0).map(|(a, b)| a * b).sum())
        }
        fn gradient(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    struct Broken;

    impl Differentiable for Broken {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, p: &[f64]) -> Result<f64> {
            Ok(if p[0] > 0.0 { f64::INFINITY } else { 0.0 })
        }
        fn gradient(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
    }

    #[test]
    fn linear_functions_are_exact() {
        let f = Linear(vec![0.5, -2.0, 3.0]);
        for h in [1e-2, 1e-5, 1e-3] {
            let cfg = FdConfig::new(h, 1e-10).unwrap();
            let err = fd_check(&f, &[1.0, 0.25, -4.0], &cfg).unwrap().error().unwrap();
            assert!(err < 1e-9, "h = {h}: {err}");
        }
    }

    #[test]
    fn ties_are_flagged() {
        let op = WindowOp::new(Method::Mp, 4).unwrap();
        let out = fd_check(&op, &[2.0, 2.0, 1.0, 0.0], &FdConfig::default()).unwrap();
        assert_eq!(out, FdOutcome::NonDifferentiable);
        let op = WindowOp::new(Method::Lnp, 4).unwrap();
        let out = fd_check(&op, &[0.0, 2.0, 1.0, 0.5, 0.3], &FdConfig::default()).unwrap();
        assert_eq!(out, FdOutcome::NonDifferentiable);
    }

    #[test]
    fn non_finite_oracle_values_fail() {
        assert!(matches!(fd_check(&Broken, &[0.0], &FdConfig::default()), Err(Error::NonFinite(_))));
        assert!(FdConfig::new(0.0, 1e-5).is_err());
    }

    #[test]
    fn smp_window_passes_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let case = sample_window_case(Method::Smp, &mut rng).unwrap();
            let err = fd_check(case.op.as_ref(), &case.point, &FdConfig::default()).unwrap();
            assert!(err.error().unwrap() < 1e-6);
        }
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        struct Wrong;
        impl Differentiable for Wrong {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, p: &[f64]) -> Result<f64> {
                Ok(p[0] * p[0])
            }
            fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![p[0]])
            }
        }
        let err = fd_check(&Wrong, &[1.5], &FdConfig::default()).unwrap().error().unwrap();
        assert!(err > 0.4);
    }
}
