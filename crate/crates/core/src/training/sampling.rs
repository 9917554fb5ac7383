use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::steps::noise;
use crate::dataio::CodeStore;
use crate::networks::{decode, encode, generate_code, LatentCodes, NetworkKind, NetworkParams};
use crate::numerics::Tensor;
use crate::{Error, Result};

/// Images (or codes) are pushed through networks this many at a time.
pub const INFER_CHUNK: usize = 32;

fn chunks(n: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n)
        .step_by(INFER_CHUNK)
        .map(move |s| s..(s + INFER_CHUNK).min(n))
}

fn rows(t: &Tensor<f32>, range: std::ops::Range<usize>) -> Result<Tensor<f32>> {
    let per = t.numel() / t.shape()[0];
    let mut shape = t.shape().to_vec();
    shape[0] = range.len();
    Tensor::new(shape, t.data()[range.start * per..range.end * per].to_vec())
}

/// Encode every image of `[N, 3, R, R]` with a frozen encoder.
pub fn encode_dataset(encoder: &NetworkParams, images: &Tensor<f32>) -> Result<CodeStore> {
    if images.rank() != 4 {
        return Err(Error::shape(format!(
            "expected [N, 3, R, R] images, got {:?}",
            images.shape()
        )));
    }
    let mut store: Option<CodeStore> = None;
    for r in chunks(images.shape()[0]) {
        let codes = encode(encoder, &rows(images, r)?)?;
        match store.as_mut() {
            Some(s) => s.push(&codes)?,
            None => store = Some(CodeStore::from_codes(&codes)),
        }
    }
    store.ok_or_else(|| Error::Dataset("no images to encode".into()))
}

/// `H(F(x))` for images `[N, 3, R, R]`, in chunks.
pub fn reconstruct(
    encoder: &NetworkParams,
    decoder: &NetworkParams,
    images: &Tensor<f32>,
) -> Result<Tensor<f32>> {
    if images.rank() != 4 {
        return Err(Error::shape(format!(
            "expected [N, 3, R, R] images, got {:?}",
            images.shape()
        )));
    }
    let parts = chunks(images.shape()[0])
        .map(|r| decode(decoder, &encode(encoder, &rows(images, r)?)?))
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat(&parts)
}

/// `n` standard-normal noise vectors from `seed`.
pub fn sample_noise(n: usize, dim: usize, seed: u64) -> Tensor<f32> {
    noise(n, dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn expect_kind(net: &NetworkParams, kind: NetworkKind) -> Result<()> {
    if net.kind() != kind {
        return Err(Error::Invalid(format!(
            "expected a {} network, got {}",
            kind.name(),
            net.kind().name()
        )));
    }
    Ok(())
}

/// `H(G_c(z))` for noise rows `z` (`[n, d]`).
pub fn decode_noise(
    generator: &NetworkParams,
    decoder: &NetworkParams,
    z: &Tensor<f32>,
) -> Result<Tensor<f32>> {
    expect_kind(decoder, NetworkKind::Decoder)?;
    let parts = chunks(z.shape()[0])
        .map(|r| {
            let codes = generate_code(generator, &rows(z, r)?)?;
            decode(decoder, &codes)
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat(&parts)
}

/// `n` images `[n, 3, R, R]` from the code generator and decoder.
pub fn generate_images(
    generator: &NetworkParams,
    decoder: &NetworkParams,
    n: usize,
    seed: u64,
) -> Result<Tensor<f32>> {
    if n == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    decode_noise(
        generator,
        decoder,
        &sample_noise(n, generator.plan().noise_dim, seed),
    )
}

/// `n` images straight from the full-resolution baseline generator.
pub fn generate_baseline(generator: &NetworkParams, n: usize, seed: u64) -> Result<Tensor<f32>> {
    expect_kind(generator, NetworkKind::ImageGenerator)?;
    if n == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let z = sample_noise(n, generator.plan().noise_dim, seed);
    let parts = chunks(n)
        .map(|r| generator.infer(&rows(&z, r)?))
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat(&parts)
}

/// `n` codes from the code generator.
pub fn generate_codes(generator: &NetworkParams, n: usize, seed: u64) -> Result<LatentCodes> {
    let z = sample_noise(n, generator.plan().noise_dim, seed);
    generate_code(generator, &z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// Great-circle path, which keeps Gaussian noise at a typical norm.
    #[default]
    Slerp,
    Linear,
}

impl std::str::FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slerp" => Ok(PathKind::Slerp),
            "linear" => Ok(PathKind::Linear),
            _ => Err(Error::Invalid(format!(
                "unknown interpolation {s:?} (slerp or linear)"
            ))),
        }
    }
}

/// `steps` points from `z0` to `z1` inclusive, stacked to `[steps, d]`.
/// The endpoints are exact copies of the inputs.
pub fn interpolation_path(
    z0: &[f32],
    z1: &[f32],
    steps: usize,
    kind: PathKind,
) -> Result<Tensor<f32>> {
    if z0.len() != z1.len() || z0.is_empty() {
        return Err(Error::shape(format!(
            "endpoints have {} and {} elements",
            z0.len(),
            z1.len()
        )));
    }
    if steps < 2 {
        return Err(Error::Invalid(format!(
            "interpolation needs at least 2 steps, got {steps}"
        )));
    }
    let a: Vec<f64> = z0.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = z1.iter().map(|&v| v as f64).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&a), norm(&b));
    let omega = if na > 0.0 && nb > 0.0 {
        let cos = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
        cos.clamp(-1.0, 1.0).acos()
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(steps * a.len());
    for i in 0..steps {
        if i == 0 || z0 == z1 {
            out.extend_from_slice(z0);
            continue;
        }
        if i == steps - 1 {
            out.extend_from_slice(z1);
            continue;
        }
        let t = i as f64 / (steps - 1) as f64;
        // Nearly parallel endpoints make slerp ill-conditioned; it tends to lerp there.
        let (wa, wb) = if kind == PathKind::Slerp && omega.sin() > 1e-6 {
            (
                ((1.0 - t) * omega).sin() / omega.sin(),
                (t * omega).sin() / omega.sin(),
            )
        } else {
            (1.0 - t, t)
        };
        out.extend(a.iter().zip(&b).map(|(x, y)| (wa * x + wb * y) as f32));
    }
    Tensor::new(vec![steps, a.len()], out)
}

/// Decoded images along the path from `z0` to `z1`.
pub fn interpolate(
    generator: &NetworkParams,
    decoder: &NetworkParams,
    z0: &[f32],
    z1: &[f32],
    steps: usize,
    kind: PathKind,
) -> Result<Tensor<f32>> {
    let d = generator.plan().noise_dim;
    if z0.len() != d {
        return Err(Error::shape(format!(
            "noise vectors must have {d} elements, got {}",
            z0.len()
        )));
    }
    decode_noise(
        generator,
        decoder,
        &interpolation_path(z0, z1, steps, kind)?,
    )
}
