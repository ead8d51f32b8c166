use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Spatial axis named in shape errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Height,
    Width,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Height => f.write_str("height"),
            Axis::Width => f.write_str("width"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A spatial dimension is smaller than the window along `axis`.
    WindowTooLarge { axis: Axis, dim: usize, window: usize },
    /// Shapes or lengths that must agree do not.
    Shape(String),
    /// A window placement outside `1..=H'` x `1..=W'`.
    Index { i: usize, j: usize, rows: usize, cols: usize },
    /// A parameter outside its admissible range.
    Param(String),
    /// Ordinal weights with no positive entry cannot be projected.
    DegenerateProjection,
    /// Inconsistent block configuration (e.g. SE ratio not dividing C).
    Config(String),
    /// Infinite or NaN input where a finite value is required.
    NonFinite(String),
    /// Error raised while evaluating window `(c, i, j)` (0-based).
    AtWindow { c: usize, i: usize, j: usize, source: alloc::boxed::Box<Error> },
    /// Training produced a non-finite loss.
    Diverged { epoch: usize, step: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::WindowTooLarge { axis, dim, window } => {
                write!(f, "{axis} {dim} is smaller than window size {window}")
            }
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Index { i, j, rows, cols } => {
                write!(f, "window index ({i}, {j}) out of range 1..={rows} x 1..={cols}")
            }
            Error::Param(msg) => write!(f, "parameter error: {msg}"),
            Error::DegenerateProjection => f.write_str("ordinal weights have no positive entry; projection undefined"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::AtWindow { c, i, j, source } => {
                write!(f, "at channel {c}, window ({i}, {j}): {source}")
            }
            Error::Diverged { epoch, step } => {
                write!(f, "non-finite loss at epoch {epoch}, step {step}")
            }
        }
    }
}

impl core::error::Error for Error {}
