//! Layer lists for every network. The same lists drive parameter allocation,
//! the forward interpreter, and the analytic cost model.

use super::plan::{ArchPlan, BASE_RESOLUTION};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkKind {
    /// `F`: image to tanh-bounded code.
    Encoder,
    /// `H`: code to image.
    Decoder,
    /// `D`: image to probability (sigmoid head), trained with the autoencoder.
    ImageDiscriminator,
    /// `G_c`: noise to code.
    CodeGenerator,
    /// `D_c`: code to unbounded score.
    CodeCritic,
    /// Baseline generator: noise straight to an `R×R×3` image.
    ImageGenerator,
    /// Baseline critic on `R×R×3` images.
    ImageCritic,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 7] = [
        NetworkKind::Encoder,
        NetworkKind::Decoder,
        NetworkKind::ImageDiscriminator,
        NetworkKind::CodeGenerator,
        NetworkKind::CodeCritic,
        NetworkKind::ImageGenerator,
        NetworkKind::ImageCritic,
    ];

    pub fn tag(self) -> u8 {
        match self {
            NetworkKind::Encoder => 1,
            NetworkKind::Decoder => 2,
            NetworkKind::ImageDiscriminator => 3,
            NetworkKind::CodeGenerator => 4,
            NetworkKind::CodeCritic => 5,
            NetworkKind::ImageGenerator => 6,
            NetworkKind::ImageCritic => 7,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Encoder => "encoder",
            NetworkKind::Decoder => "decoder",
            NetworkKind::ImageDiscriminator => "image_disc",
            NetworkKind::CodeGenerator => "code_gen",
            NetworkKind::CodeCritic => "code_critic",
            NetworkKind::ImageGenerator => "image_gen",
            NetworkKind::ImageCritic => "image_critic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        bias: bool,
    },
    /// `[N, C·size²] -> [N, C, size, size]`.
    Unflatten {
        channels: usize,
        size: usize,
    },
    Flatten,
    Upsample,
    LeakyRelu,
    PixelNorm,
    Tanh,
    Sigmoid,
}

impl Layer {
    fn conv3(in_ch: usize, out_ch: usize) -> Self {
        Layer::Conv {
            in_ch,
            out_ch,
            kernel: 3,
            stride: 1,
            pad: 1,
        }
    }

    fn down3(in_ch: usize, out_ch: usize) -> Self {
        Layer::Conv {
            in_ch,
            out_ch,
            kernel: 3,
            stride: 2,
            pad: 1,
        }
    }

    /// Shapes of `(weight, bias)` for parametric layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Option<Vec<usize>>)> {
        match *self {
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => Some((vec![out_ch, in_ch, kernel, kernel], Some(vec![out_ch]))),
            Layer::Dense {
                inputs,
                outputs,
                bias,
            } => Some((vec![inputs, outputs], bias.then(|| vec![outputs]))),
            _ => None,
        }
    }

    /// Multiply-accumulates for one item, and the per-item output shape.
    pub fn macs(&self, input: &[usize]) -> Result<(u64, Vec<usize>)> {
        let bad = || Error::shape(format!("{self:?} cannot take per-item input {input:?}"));
        match *self {
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad,
            } => {
                let &[c, h, w] = input else { return Err(bad()) };
                if c != in_ch {
                    return Err(bad());
                }
                let oh = crate::numerics::conv_out_dim(h, kernel, stride, pad).ok_or_else(bad)?;
                let ow = crate::numerics::conv_out_dim(w, kernel, stride, pad).ok_or_else(bad)?;
                let macs = (oh * ow * out_ch * in_ch * kernel * kernel) as u64;
                Ok((macs, vec![out_ch, oh, ow]))
            }
            Layer::Dense {
                inputs, outputs, ..
            } => {
                if input != [inputs] {
                    return Err(bad());
                }
                Ok(((inputs * outputs) as u64, vec![outputs]))
            }
            Layer::Unflatten { channels, size } => {
                if input != [channels * size * size] {
                    return Err(bad());
                }
                Ok((0, vec![channels, size, size]))
            }
            Layer::Flatten => Ok((0, vec![input.iter().product()])),
            Layer::Upsample => {
                let &[c, h, w] = input else { return Err(bad()) };
                Ok((0, vec![c, 2 * h, 2 * w]))
            }
            _ => Ok((0, input.to_vec())),
        }
    }
}

/// Layer list of `kind` under `plan`.
pub fn architecture(kind: NetworkKind, plan: &ArchPlan) -> Vec<Layer> {
    let code_ch = plan.code_channels;
    match kind {
        NetworkKind::Encoder => {
            let k = plan.downsamples();
            let mut layers = vec![Layer::conv3(3, plan.level_width(0)), Layer::LeakyRelu];
            for i in 1..=k {
                layers.push(Layer::down3(plan.level_width(i - 1), plan.level_width(i)));
                layers.push(Layer::LeakyRelu);
            }
            layers.push(Layer::conv3(plan.level_width(k), code_ch));
            layers.push(Layer::Tanh);
            layers
        }
        NetworkKind::Decoder => {
            let k = plan.downsamples();
            let mut layers = vec![Layer::conv3(code_ch, plan.level_width(k)), Layer::LeakyRelu];
            for i in (1..=k).rev() {
                layers.push(Layer::Upsample);
                layers.push(Layer::conv3(plan.level_width(i), plan.level_width(i - 1)));
                layers.push(Layer::LeakyRelu);
            }
            layers.push(Layer::conv3(plan.level_width(0), 3));
            layers.push(Layer::Tanh);
            layers
        }
        NetworkKind::ImageDiscriminator => critic(plan, 3, plan.resolution, true),
        NetworkKind::ImageCritic => critic(plan, 3, plan.resolution, false),
        NetworkKind::CodeCritic => critic(plan, code_ch, plan.code_resolution(), false),
        NetworkKind::ImageGenerator => generator(plan, 3, plan.resolution),
        NetworkKind::CodeGenerator => generator(plan, code_ch, plan.code_resolution()),
    }
}

fn generator(plan: &ArchPlan, out_ch: usize, out_res: usize) -> Vec<Layer> {
    let w0 = plan.width_at(BASE_RESOLUTION);
    let mut layers = vec![
        Layer::Dense {
            inputs: plan.noise_dim,
            outputs: w0 * BASE_RESOLUTION * BASE_RESOLUTION,
            bias: true,
        },
        Layer::Unflatten {
            channels: w0,
            size: BASE_RESOLUTION,
        },
        Layer::LeakyRelu,
        Layer::PixelNorm,
        Layer::conv3(w0, w0),
        Layer::LeakyRelu,
        Layer::PixelNorm,
    ];
    let mut res = BASE_RESOLUTION;
    while res < out_res {
        layers.push(Layer::Upsample);
        layers.push(Layer::conv3(plan.width_at(res), plan.width_at(2 * res)));
        layers.push(Layer::LeakyRelu);
        layers.push(Layer::PixelNorm);
        res *= 2;
    }
    layers.push(Layer::conv3(plan.width_at(out_res), out_ch));
    layers.push(Layer::Tanh);
    layers
}

fn critic(plan: &ArchPlan, in_ch: usize, in_res: usize, sigmoid: bool) -> Vec<Layer> {
    let mut layers = vec![Layer::conv3(in_ch, plan.width_at(in_res)), Layer::LeakyRelu];
    let mut res = in_res;
    while res > BASE_RESOLUTION {
        layers.push(Layer::down3(plan.width_at(res), plan.width_at(res / 2)));
        layers.push(Layer::LeakyRelu);
        res /= 2;
    }
    let w0 = plan.width_at(BASE_RESOLUTION);
    layers.extend([
        Layer::Flatten,
        Layer::Dense {
            inputs: w0 * BASE_RESOLUTION * BASE_RESOLUTION,
            outputs: w0,
            bias: true,
        },
        Layer::LeakyRelu,
        // A Wasserstein critic's output bias cancels between real and fake
        // scores and never receives a gradient, so only the sigmoid head has one.
        Layer::Dense {
            inputs: w0,
            outputs: 1,
            bias: sigmoid,
        },
    ]);
    if sigmoid {
        layers.push(Layer::Sigmoid);
    }
    layers
}

/// Per-item input shape each network expects under `plan`.
pub fn input_shape(kind: NetworkKind, plan: &ArchPlan) -> Vec<usize> {
    let r = plan.resolution;
    match kind {
        NetworkKind::Encoder | NetworkKind::ImageDiscriminator | NetworkKind::ImageCritic => {
            vec![3, r, r]
        }
        NetworkKind::Decoder | NetworkKind::CodeCritic => plan.code_shape().to_vec(),
        NetworkKind::CodeGenerator | NetworkKind::ImageGenerator => vec![plan.noise_dim],
    }
}

/// Forward multiply-accumulates of one item through `layers`.
pub fn forward_macs(layers: &[Layer], input: &[usize]) -> Result<u64> {
    let mut shape = input.to_vec();
    let mut total = 0u64;
    for layer in layers {
        let (m, next) = layer.macs(&shape)?;
        total += m;
        shape = next;
    }
    Ok(total)
}
