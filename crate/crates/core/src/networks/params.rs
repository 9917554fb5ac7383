use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::arch::{architecture, input_shape, Layer, NetworkKind};
use super::plan::ArchPlan;
use crate::numerics::{ConvGeom, Gradients, Graph, Real, Tensor, Var, LEAKY_SLOPE, PIXEL_NORM_EPS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Real> {
    pub name: String,
    pub value: Tensor<T>,
    /// Filled by [`NetworkParams::store_grads`], consumed by the optimizer.
    pub grad: Option<Tensor<T>>,
}

/// Ordered, named parameters of one network plus the plan that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T: Real = f32> {
    kind: NetworkKind,
    plan: ArchPlan,
    layers: Vec<Layer>,
    params: Vec<Param<T>>,
    /// Index into `params` of each layer's weight, for parametric layers.
    slots: Vec<Option<usize>>,
}

impl<T: Real> NetworkParams<T> {
    /// Weights `N(0, 1/fan_in)`, biases zero. Pure in `(kind, plan, seed)`.
    pub fn init(kind: NetworkKind, plan: &ArchPlan, seed: u64) -> Result<Self> {
        plan.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(kind.tag() as u64);
        Self::assemble(kind, plan, |_, weight_shape, bias_shape| {
            // Conv weights are [out, in, k, k]; dense weights are [in, out].
            let fan_in: usize = match weight_shape.len() {
                4 => weight_shape[1..].iter().product(),
                _ => weight_shape[0],
            };
            let w = Tensor::randn(
                weight_shape.to_vec(),
                1.0 / (fan_in as f64).sqrt(),
                &mut rng,
            );
            (w, bias_shape.map(|b| Tensor::zeros(b.to_vec())))
        })
    }

    /// Rebuild from named tensors, checking every name and shape against the plan.
    pub fn from_named(
        kind: NetworkKind,
        plan: &ArchPlan,
        named: Vec<(String, Tensor<T>)>,
    ) -> Result<Self> {
        plan.validate()?;
        let expected = Self::assemble(kind, plan, |_, w, b| {
            (
                Tensor::zeros(w.to_vec()),
                b.map(|b| Tensor::zeros(b.to_vec())),
            )
        })?;
        if named.len() != expected.params.len() {
            return Err(Error::shape(format!(
                "{} under this plan has {} tensors, got {}",
                kind.name(),
                expected.params.len(),
                named.len()
            )));
        }
        let mut out = expected;
        for (slot, (name, value)) in out.params.iter_mut().zip(named) {
            if slot.name != name {
                return Err(Error::shape(format!(
                    "expected tensor {}, found {name}",
                    slot.name
                )));
            }
            if slot.value.shape() != value.shape() {
                return Err(Error::shape(format!(
                    "{} {name}: plan requires shape {:?}, found {:?}",
                    kind.name(),
                    slot.value.shape(),
                    value.shape()
                )));
            }
            slot.value = value;
        }
        Ok(out)
    }

    fn assemble(
        kind: NetworkKind,
        plan: &ArchPlan,
        mut make: impl FnMut(usize, &[usize], Option<&[usize]>) -> (Tensor<T>, Option<Tensor<T>>),
    ) -> Result<Self> {
        let layers = architecture(kind, plan);
        let mut params = Vec::new();
        let mut slots = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            match layer.param_shapes() {
                Some((ws, bs)) => {
                    let (w, b) = make(i, &ws, bs.as_deref());
                    slots.push(Some(params.len()));
                    params.push(Param {
                        name: format!("l{i}.weight"),
                        value: w,
                        grad: None,
                    });
                    if let Some(b) = b {
                        params.push(Param {
                            name: format!("l{i}.bias"),
                            value: b,
                            grad: None,
                        });
                    }
                }
                None => slots.push(None),
            }
        }
        Ok(Self {
            kind,
            plan: plan.clone(),
            layers,
            params,
            slots,
        })
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn plan(&self) -> &ArchPlan {
        &self.plan
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params
            .iter_mut()
            .find(|p| p.name == name)
            .map(|p| &mut p.value)
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Name of the final parametric layer's weight (the critic/discriminator head).
    pub fn head_weight_name(&self) -> &str {
        let last = self
            .slots
            .iter()
            .rev()
            .flatten()
            .next()
            .expect("every network has a parametric layer");
        &self.params[*last].name
    }

    /// Per-item input shape under the plan. Convolutional networks accept any
    /// spatial size compatible with their strides; see [`NetworkParams::check_input`].
    pub fn input_shape(&self) -> Vec<usize> {
        input_shape(self.kind, &self.plan)
    }

    /// Reject batch shapes this network cannot consume.
    pub fn check_input(&self, shape: &[usize]) -> Result<()> {
        let expect = self.input_shape();
        let name = self.kind.name();
        if shape.len() != expect.len() + 1 {
            return Err(Error::shape(format!(
                "{name} expects [N, {expect:?}] input, got {shape:?}"
            )));
        }
        let item = &shape[1..];
        let fully_conv = matches!(self.kind, NetworkKind::Encoder | NetworkKind::Decoder);
        if !fully_conv {
            if item != expect.as_slice() {
                return Err(Error::shape(format!(
                    "{name} expects per-item shape {expect:?}, got {item:?}"
                )));
            }
            return Ok(());
        }
        if item[0] != expect[0] {
            return Err(Error::shape(format!(
                "{name} expects {} channels, got {} (shape {shape:?})",
                expect[0], item[0]
            )));
        }
        if self.kind == NetworkKind::Encoder {
            let s = self.plan.code_scale;
            if !item[1].is_multiple_of(s) || !item[2].is_multiple_of(s) {
                return Err(Error::shape(format!(
                    "image size {}x{} is not divisible by code scale s={s}",
                    item[1], item[2]
                )));
            }
        }
        Ok(())
    }

    /// Leaves that receive gradients.
    pub fn bind<'g, 'n>(&'n self, g: &'g Graph<T>) -> Bound<'g, 'n, T> {
        let vars = self
            .params
            .iter()
            .map(|p| g.param(p.value.clone()))
            .collect();
        Bound { net: self, vars }
    }

    /// Constant leaves: gradients still flow through the network to its input.
    pub fn bind_frozen<'g, 'n>(&'n self, g: &'g Graph<T>) -> Bound<'g, 'n, T> {
        let vars = self
            .params
            .iter()
            .map(|p| g.constant(p.value.clone()))
            .collect();
        Bound { net: self, vars }
    }

    /// Run this architecture with caller-supplied parameter vars (in parameter order).
    pub fn bind_vars<'g, 'n>(&'n self, vars: Vec<Var<'g, T>>) -> Result<Bound<'g, 'n, T>> {
        if vars.len() != self.params.len() {
            return Err(Error::shape(format!(
                "{} vars for {} parameters",
                vars.len(),
                self.params.len()
            )));
        }
        for (v, p) in vars.iter().zip(&self.params) {
            if v.shape() != p.value.shape() {
                return Err(Error::shape(format!(
                    "{}: var shape {:?}, expected {:?}",
                    p.name,
                    v.shape(),
                    p.value.shape()
                )));
            }
        }
        Ok(Bound { net: self, vars })
    }

    /// Adds the collected gradients to each parameter's accumulator.
    pub fn store_grads(&mut self, grads: Vec<Option<Tensor<T>>>) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            let Some(g) = g else { continue };
            p.grad = Some(match p.grad.take() {
                Some(acc) => acc.zip_map(&g, |a, b| a + b)?,
                None => g,
            });
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// SHA-256 over kind, plan, names, shapes and little-endian values.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update([self.kind.tag()]);
        h.update(format!("{:?}", self.plan).as_bytes());
        for p in &self.params {
            h.update(p.name.as_bytes());
            for &d in p.value.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for &v in p.value.data() {
                h.update(v.as_f64().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        NetworkParams {
            kind: self.kind,
            plan: self.plan.clone(),
            layers: self.layers.clone(),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.as_ref().map(Tensor::cast),
                })
                .collect(),
            slots: self.slots.clone(),
        }
    }

    /// Run the network on `input` outside any training graph.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input.shape())?;
        let g = Graph::new();
        g.no_grad(|| {
            let net = self.bind_frozen(&g);
            let out = net.forward(g.constant(input.clone()))?;
            Ok(out.value().as_ref().clone())
        })
    }
}

/// Network parameters placed on a graph.
pub struct Bound<'g, 'n, T: Real> {
    net: &'n NetworkParams<T>,
    vars: Vec<Var<'g, T>>,
}

impl<'g, T: Real> Bound<'g, '_, T> {
    pub fn vars(&self) -> &[Var<'g, T>] {
        &self.vars
    }

    pub fn forward(&self, x: Var<'g, T>) -> Result<Var<'g, T>> {
        self.net.check_input(&x.shape())?;
        let mut h = x;
        for (layer, slot) in self.net.layers.iter().zip(&self.net.slots) {
            let n = h.shape()[0];
            h = match *layer {
                Layer::Conv { stride, pad, .. } => {
                    let i = slot.expect("conv has params");
                    h.conv2d(self.vars[i], ConvGeom { stride, pad })?
                        .add_channel_bias(self.vars[i + 1])?
                }
                Layer::Dense { bias, .. } => {
                    let i = slot.expect("dense has params");
                    if bias {
                        h.dense(self.vars[i], self.vars[i + 1])?
                    } else {
                        h.matmul(self.vars[i])?
                    }
                }
                Layer::Unflatten { channels, size } => h.reshape([n, channels, size, size])?,
                Layer::Flatten => {
                    let rest: usize = h.shape()[1..].iter().product();
                    h.reshape([n, rest])?
                }
                Layer::Upsample => h.upsample2x()?,
                Layer::LeakyRelu => h.leaky_relu(LEAKY_SLOPE),
                Layer::PixelNorm => h.pixel_norm(PIXEL_NORM_EPS)?,
                Layer::Tanh => h.tanh(),
                Layer::Sigmoid => h.sigmoid(),
            };
        }
        Ok(h)
    }

    /// Gradients of each bound parameter, in parameter order.
    pub fn grads(&self, grads: &Gradients<T>) -> Vec<Option<Tensor<T>>> {
        self.vars.iter().map(|&v| grads.get(v).cloned()).collect()
    }
}
