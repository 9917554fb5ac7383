use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::networks::{NetworkKind, NetworkParams};
use crate::numerics::{ConvGeom, Graph, Tensor, LEAKY_SLOPE};
use crate::{Error, Result};

/// Feature extractors for the Fréchet distance.
#[derive(Debug, Clone)]
pub enum Extractor {
    /// Frozen, randomly initialized strided conv net; 64 features.
    RandomConv { seed: u64 },
    /// Stage-1 encoder; per-channel mean and standard deviation of the codes.
    Encoder(NetworkParams<f32>),
    /// Grayscale pixels area-averaged to `size × size`.
    RawPixels { size: usize },
}

impl Default for Extractor {
    fn default() -> Self {
        Extractor::RandomConv { seed: 0x5eed }
    }
}

const RANDOM_WIDTHS: [usize; 3] = [16, 32, 64];
const CHUNK: usize = 64;

fn random_kernels(seed: u64) -> Vec<Tensor<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_ch = 3;
    RANDOM_WIDTHS
        .iter()
        .map(|&out| {
            let fan_in = (in_ch * 9) as f64;
            let k = Tensor::randn(vec![out, in_ch, 3, 3], (2.0 / fan_in).sqrt(), &mut rng);
            in_ch = out;
            k
        })
        .collect()
}

/// Per-sample features, one row per image of `images` (`[n, 3, H, W]`).
pub fn embed_for_fid(images: &Tensor<f32>, extractor: &Extractor) -> Result<DMatrix<f64>> {
    let &[n, c, h, w] = images.shape() else {
        return Err(Error::shape(format!(
            "embedding expects [n, 3, H, W], got {:?}",
            images.shape()
        )));
    };
    if c != 3 {
        return Err(Error::shape(format!(
            "embedding expects 3 channels, got {c}"
        )));
    }
    let per = c * h * w;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let kernels = match extractor {
        Extractor::RandomConv { seed } => random_kernels(*seed),
        _ => Vec::new(),
    };
    for start in (0..n).step_by(CHUNK) {
        let m = CHUNK.min(n - start);
        let chunk = Tensor::new(
            vec![m, c, h, w],
            images.data()[start * per..(start + m) * per].to_vec(),
        )?;
        match extractor {
            Extractor::RandomConv { .. } => rows.extend(random_features(&chunk, &kernels)?),
            Extractor::Encoder(f) => rows.extend(code_features(f, &chunk)?),
            Extractor::RawPixels { size } => rows.extend(pixel_features(&chunk, *size)),
        }
    }
    let d = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn channel_stats(t: &Tensor<f32>, with_std: bool) -> Vec<Vec<f64>> {
    let s = t.shape();
    let (n, c, plane) = (s[0], s[1], s[2] * s[3]);
    (0..n)
        .map(|i| {
            let mut means = Vec::with_capacity(c);
            let mut stds = Vec::new();
            for ch in 0..c {
                let vals = &t.data()[(i * c + ch) * plane..(i * c + ch + 1) * plane];
                let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / plane as f64;
                means.push(mean);
                if with_std {
                    let var =
                        vals.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / plane as f64;
                    stds.push(var.sqrt());
                }
            }
            means.extend(stds);
            means
        })
        .collect()
}

fn random_features(x: &Tensor<f32>, kernels: &[Tensor<f32>]) -> Result<Vec<Vec<f64>>> {
    let g = Graph::new();
    let out = g.no_grad(|| -> Result<Tensor<f32>> {
        let mut h = g.constant(x.clone());
        for k in kernels {
            // Stop once the map is too small for another stride-2 stage.
            if h.shape()[2] < 2 {
                break;
            }
            h = h
                .conv2d(g.constant(k.clone()), ConvGeom { stride: 2, pad: 1 })?
                .leaky_relu(LEAKY_SLOPE);
        }
        Ok(h.value().as_ref().clone())
    })?;
    let feats = channel_stats(&out, false);
    // Pad to a fixed width when small inputs stopped early.
    let d = *RANDOM_WIDTHS.last().expect("non-empty");
    Ok(feats
        .into_iter()
        .map(|mut f| {
            f.resize(d, 0.0);
            f
        })
        .collect())
}

fn code_features(f: &NetworkParams<f32>, x: &Tensor<f32>) -> Result<Vec<Vec<f64>>> {
    if f.kind() != NetworkKind::Encoder {
        return Err(Error::Invalid(format!(
            "encoder extractor given {} parameters",
            f.kind().name()
        )));
    }
    Ok(channel_stats(&f.infer(x)?, true))
}

fn pixel_features(x: &Tensor<f32>, size: usize) -> Vec<Vec<f64>> {
    let s = x.shape();
    let (n, h, w) = (s[0], s[2], s[3]);
    let plane = h * w;
    let size = size.max(1);
    let bounds = |i: usize, len: usize| {
        let a = i * len / size;
        let b = ((i + 1) * len / size).max(a + 1).min(len);
        (a.min(len - 1), b)
    };
    (0..n)
        .map(|i| {
            let img = &x.data()[i * 3 * plane..(i + 1) * 3 * plane];
            let gray = |y: usize, xx: usize| {
                (0..3)
                    .map(|c| img[c * plane + y * w + xx] as f64)
                    .sum::<f64>()
                    / 3.0
            };
            let mut out = Vec::with_capacity(size * size);
            for oy in 0..size {
                let (y0, y1) = bounds(oy, h);
                for ox in 0..size {
                    let (x0, x1) = bounds(ox, w);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        for xx in x0..x1 {
                            acc += gray(y, xx);
                        }
                    }
                    out.push(acc / ((y1 - y0) * (x1 - x0)) as f64);
                }
            }
            out
        })
        .collect()
}
