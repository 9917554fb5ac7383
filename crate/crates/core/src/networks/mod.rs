//! The five networks: encoder `F`, decoder `H`, image discriminator `D`,
//! code generator `G_c`, code critic `D_c`, plus the full-resolution
//! generator/critic pair used as the unaccelerated baseline.

mod arch;
mod params;
mod plan;

pub use arch::{architecture, forward_macs, input_shape, Layer, NetworkKind};
pub use params::{Bound, NetworkParams, Param};
pub use plan::{ArchPlan, BASE_RESOLUTION, CODE_CHANNELS};

use crate::numerics::{Real, Tensor};
use crate::{Error, Result};

/// A batch `[N, 16, h, w]` of codes with every element in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCodes<T: Real = f32>(Tensor<T>);

impl<T: Real> LatentCodes<T> {
    pub fn new(t: Tensor<T>) -> Result<Self> {
        match t.shape() {
            &[_, c, _, _] if c == CODE_CHANNELS => {}
            s => {
                return Err(Error::shape(format!(
                    "codes must be [N, {CODE_CHANNELS}, h, w], got {s:?}"
                )))
            }
        }
        if let Some(i) = t.data().iter().position(|v| !(v.abs() <= T::one())) {
            return Err(Error::Domain(format!(
                "code element {i} is {} (outside [-1, 1])",
                t.data()[i]
            )));
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-code shape `[16, h, w]`.
    pub fn code_shape(&self) -> [usize; 3] {
        let s = self.0.shape();
        [s[1], s[2], s[3]]
    }
}

fn expect_kind<T: Real>(net: &NetworkParams<T>, kind: NetworkKind) -> Result<()> {
    if net.kind() != kind {
        return Err(Error::Invalid(format!(
            "expected {} parameters, got {}",
            kind.name(),
            net.kind().name()
        )));
    }
    Ok(())
}

/// `F(x)`: images `[N, 3, H, W]` to codes `[N, 16, H/s, W/s]`.
pub fn encode<T: Real>(f: &NetworkParams<T>, images: &Tensor<T>) -> Result<LatentCodes<T>> {
    expect_kind(f, NetworkKind::Encoder)?;
    LatentCodes::new(f.infer(images)?)
}

/// `H(c)`: codes to images `[N, 3, h·s, w·s]`.
pub fn decode<T: Real>(h: &NetworkParams<T>, codes: &LatentCodes<T>) -> Result<Tensor<T>> {
    expect_kind(h, NetworkKind::Decoder)?;
    h.infer(codes.tensor())
}

/// `D(x)` in `(0, 1)`, shape `[N, 1]`.
pub fn discriminate_image<T: Real>(d: &NetworkParams<T>, images: &Tensor<T>) -> Result<Tensor<T>> {
    expect_kind(d, NetworkKind::ImageDiscriminator)?;
    d.infer(images)
}

/// `G_c(z)` for noise `[N, d_z]`.
pub fn generate_code<T: Real>(g: &NetworkParams<T>, z: &Tensor<T>) -> Result<LatentCodes<T>> {
    expect_kind(g, NetworkKind::CodeGenerator)?;
    LatentCodes::new(g.infer(z)?)
}

/// Unbounded Wasserstein critic scores `D_c(c)`, shape `[N, 1]`.
pub fn criticize_code<T: Real>(dc: &NetworkParams<T>, codes: &LatentCodes<T>) -> Result<Tensor<T>> {
    expect_kind(dc, NetworkKind::CodeCritic)?;
    dc.infer(codes.tensor())
}
