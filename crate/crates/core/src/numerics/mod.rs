//! Tensor storage, compute kernels, and a tape-based reverse-mode autodiff
//! graph whose backward rules are themselves recorded graph ops, so gradients
//! can be differentiated again.

mod gradcheck;
mod graph;
pub(crate) mod kernels;
pub mod parallel;
pub mod probe;
mod real;
mod tensor;

pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport, ParamDeviation};
pub use graph::{ConvGeom, Fold, Gradients, Graph, Var};
pub use real::Real;
pub use tensor::{conv_out_dim, Tensor};

/// Slope used by every leaky ReLU in the networks.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Stabilizer inside pixel normalization.
pub const PIXEL_NORM_EPS: f64 = 1e-8;
