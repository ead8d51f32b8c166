//! Pooling operators that interpolate between max- and average-pooling.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that is pure
//! computation: a small dense tensor with sliding-window views, the forward
//! evaluation of every pooling function, exact backward passes, a central
//! finite-difference oracle, and a tiny convolutional classifier with Adam
//! that trains each pooling block end to end on procedurally generated data.
//!
//! File formats, the sweep runner and the command-line front end live in the
//! companion `poolbench` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adam;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod math;
pub mod net;
pub mod nn;
pub mod params;
pub mod pool;
pub mod stats;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use pool::{Method, PoolSpec};
pub use tensor::{output_size, Tensor, WindowSpec};
