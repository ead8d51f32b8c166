//! Pooling methods: window functions, their gradients, the squeeze-and-
//! excitation temperature branch, and the tensor-level pooling block.

use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::WindowSpec;

mod block;
pub mod grads;
pub mod ops;
pub mod se;

pub use block::{ParamShape, PoolBlock, PoolParams};
pub use grads::GradBundle;
pub use ops::GateValue;
pub use se::{Affine, SeGrads};

/// Every pooling function the harness knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    /// Max-pooling.
    Mp,
    /// Average-pooling.
    Ap,
    /// Nearest-neighbour downsampling (first window entry). Following a
    /// stride-1 convolution this is exactly a strided convolution.
    Nn,
    /// Learned `n`-tap convolution shared across channels.
    Conv,
    /// Gated pooling: sigmoid gate mixing average and max.
    Gp,
    /// Ordinal pooling: simplex-weighted sorted window.
    Op,
    /// Learned-norm pooling with trainable exponent.
    Lnp,
    /// Log-sum-exp pooling with fixed sharpness.
    Lse,
    /// Smooth-maximum pooling, fixed per-channel temperature `log(c/C)`.
    SmpFixed,
    /// Smooth-maximum pooling, trainable per-channel temperature.
    Smp,
    /// Smooth-maximum pooling with temperatures from an SE branch.
    Sesmp,
    /// Squeeze-and-excitation channel scaling followed by max-pooling.
    Semp,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::Mp,
        Method::Ap,
        Method::Nn,
        Method::Conv,
        Method::Gp,
        Method::Op,
        Method::Lnp,
        Method::Lse,
        Method::Smp,
        Method::SmpFixed,
        Method::Sesmp,
        Method::Semp,
    ];

    /// The ten methods of the headline comparison (CONV and LSE excluded).
    pub const COMPARED: [Method; 10] = [
        Method::Mp,
        Method::Ap,
        Method::Nn,
        Method::Gp,
        Method::Op,
        Method::Lnp,
        Method::Smp,
        Method::SmpFixed,
        Method::Sesmp,
        Method::Semp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mp => "MP",
            Method::Ap => "AP",
            Method::Nn => "NN",
            Method::Conv => "CONV",
            Method::Gp => "GP",
            Method::Op => "OP",
            Method::Lnp => "LNP",
            Method::Lse => "LSE",
            Method::SmpFixed => "SMPF",
            Method::Smp => "SMP",
            Method::Sesmp => "SESMP",
            Method::Semp => "SEMP",
        }
    }

    pub fn uses_se_branch(self) -> bool {
        matches!(self, Method::Sesmp | Method::Semp)
    }

    /// True when the window function is not smooth at ties between entries.
    pub fn kinks_at_ties(self) -> bool {
        matches!(self, Method::Mp | Method::Gp | Method::Op | Method::Semp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let found = match upper.as_str() {
            "SMP_FIXED" => Some(Method::SmpFixed),
            "SMP_TRAINABLE" => Some(Method::Smp),
            other => Method::ALL.into_iter().find(|m| m.name() == other),
        };
        found.ok_or_else(|| {
            let valid: alloc::vec::Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::Config(format!("unknown method {s:?}; valid: {}", valid.join(", ")))
        })
    }
}

/// A pooling method applied with `window` to a `channels`-channel input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoolSpec {
    pub method: Method,
    pub window: WindowSpec,
    pub channels: usize,
}

impl PoolSpec {
    pub fn new(method: Method, window: WindowSpec, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("a pooling block needs at least one channel".into()));
        }
        Ok(Self { method, window, channels })
    }
}
