//! Two-stage latent-code image synthesis.
//!
//! Stage one trains a fully convolutional encoder/decoder pair (with an image
//! discriminator) that maps images to small tanh-bounded codes of shape
//! `[16, R/s, R/s]`. Stage two trains a WGAN-GP code generator and critic on the
//! encoded dataset only; new images are produced by decoding generated codes.
//!
//! Everything runs on a small reverse-mode autodiff engine ([`numerics`]) that
//! supports double backward, which the gradient penalty needs.

// Range checks are written `!(x <= max)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
