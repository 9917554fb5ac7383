use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use crate::dataio::CodeStore;
use crate::losses::{
    ae_adversarial, ae_total, code_critic_total, code_gen_loss, gradient_penalty, image_disc_loss,
    recon_l1, wasserstein_critic_loss,
};
use crate::metrics::GanMode;
use crate::networks::{ArchPlan, NetworkKind, NetworkParams};
use crate::numerics::{Graph, Tensor, Var};
use crate::{Error, Result};

/// Encoder `F`, decoder `H` and image discriminator `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: NetworkParams,
    pub decoder: NetworkParams,
    pub disc: NetworkParams,
}

impl Autoencoder {
    pub fn init(plan: &ArchPlan, seed: u64) -> Result<Self> {
        Ok(Self {
            encoder: NetworkParams::init(NetworkKind::Encoder, plan, seed)?,
            decoder: NetworkParams::init(NetworkKind::Decoder, plan, seed)?,
            disc: NetworkParams::init(NetworkKind::ImageDiscriminator, plan, seed)?,
        })
    }

    pub fn networks(&self) -> [&NetworkParams; 3] {
        [&self.encoder, &self.decoder, &self.disc]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderOptim {
    pub encoder: AdamState,
    pub decoder: AdamState,
    pub disc: AdamState,
}

impl AutoencoderOptim {
    pub fn new(ae: &Autoencoder) -> Self {
        Self {
            encoder: AdamState::new(&ae.encoder),
            decoder: AdamState::new(&ae.decoder),
            disc: AdamState::new(&ae.disc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeStepReport {
    pub l_r: f64,
    pub l_adv: f64,
    pub l_d: f64,
}

impl AeStepReport {
    pub const COLUMNS: [&'static str; 3] = ["l_r", "l_adv", "l_d"];

    pub fn values(&self) -> Vec<f64> {
        vec![self.l_r, self.l_adv, self.l_d]
    }
}

fn finite(v: &Var<'_, f32>, what: &str) -> Result<f64> {
    let x = v.to_f64();
    if !x.is_finite() {
        return Err(Error::NonFinite {
            what: what.into(),
            location: None,
        });
    }
    Ok(x)
}

/// One discriminator update followed by one encoder/decoder update on `batch`
/// (`[B, 3, r, r]` in `[-1, 1]`). Parameters are untouched if any loss is
/// non-finite.
pub fn train_autoencoder_step(
    ae: &mut Autoencoder,
    opt: &mut AutoencoderOptim,
    batch: &Tensor<f32>,
    cfg: &TrainConfig,
) -> Result<AeStepReport> {
    let w = &cfg.losses;
    let x_hat = ae.decoder.infer(&ae.encoder.infer(batch)?)?;

    let (l_d, d_grads) = {
        let g = Graph::new();
        let d = ae.disc.bind(&g);
        let real = d.forward(g.constant(batch.clone()))?;
        let fake = d.forward(g.constant(x_hat))?;
        let loss = image_disc_loss(real, fake, w.log_clamp)?;
        let l_d = finite(&loss, "l_d")?;
        (l_d, d.grads(&g.backward(loss)?))
    };

    let (l_r, l_adv, f_grads, h_grads) = {
        let g = Graph::new();
        let f = ae.encoder.bind(&g);
        let h = ae.decoder.bind(&g);
        let d = ae.disc.bind_frozen(&g);
        let x = g.constant(batch.clone());
        let x_hat = h.forward(f.forward(x)?)?;
        let l_r = recon_l1(x, x_hat)?;
        let l_adv = ae_adversarial(d.forward(x_hat)?, w.log_clamp)?;
        let total = ae_total(l_r, l_adv, w.alpha)?;
        let (r, a) = (finite(&l_r, "l_r")?, finite(&l_adv, "l_adv")?);
        let grads = g.backward(total)?;
        (r, a, f.grads(&grads), h.grads(&grads))
    };

    ae.disc.store_grads(d_grads)?;
    adam_step(
        &mut ae.disc,
        &mut opt.disc,
        &cfg.hyper(NetworkKind::ImageDiscriminator),
    )?;
    ae.encoder.store_grads(f_grads)?;
    adam_step(
        &mut ae.encoder,
        &mut opt.encoder,
        &cfg.hyper(NetworkKind::Encoder),
    )?;
    ae.decoder.store_grads(h_grads)?;
    adam_step(
        &mut ae.decoder,
        &mut opt.decoder,
        &cfg.hyper(NetworkKind::Decoder),
    )?;
    Ok(AeStepReport { l_r, l_adv, l_d })
}

/// Real samples a GAN is trained against.
pub trait SampleBank {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples at `indices`, stacked along a new leading axis.
    fn gather(&self, indices: &[usize]) -> Result<Tensor<f32>>;
}

impl SampleBank for CodeStore {
    fn len(&self) -> usize {
        CodeStore::len(self)
    }

    fn gather(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        self.batch(indices)
    }
}

/// Full-resolution images `[N, 3, R, R]`, the baseline's training set.
#[derive(Debug, Clone)]
pub struct ImageBank(pub Tensor<f32>);

impl SampleBank for ImageBank {
    fn len(&self) -> usize {
        self.0.shape()[0]
    }

    fn gather(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        gather_rows(&self.0, indices)
    }
}

/// Rows `indices` of `t` along its leading axis.
pub fn gather_rows(t: &Tensor<f32>, indices: &[usize]) -> Result<Tensor<f32>> {
    let n = t.shape()[0];
    let per = t.numel() / n;
    let mut out = Vec::with_capacity(indices.len() * per);
    for &i in indices {
        if i >= n {
            return Err(Error::Invalid(format!(
                "index {i} out of range for {n} samples"
            )));
        }
        out.extend_from_slice(&t.data()[i * per..(i + 1) * per]);
    }
    let mut shape = t.shape().to_vec();
    shape[0] = indices.len();
    Tensor::new(shape, out)
}

/// `batch` distinct indices when the bank is large enough, else with replacement.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, batch: usize, rng: &mut R) -> Vec<usize> {
    if batch <= n {
        index::sample(rng, n, batch).into_vec()
    } else {
        (0..batch).map(|_| rng.random_range(0..n)).collect()
    }
}

/// Generator and critic of one Wasserstein GAN.
#[derive(Debug, Clone, PartialEq)]
pub struct Gan {
    pub mode: GanMode,
    pub generator: NetworkParams,
    pub critic: NetworkParams,
}

impl Gan {
    pub fn init(mode: GanMode, plan: &ArchPlan, seed: u64) -> Result<Self> {
        let (g, c) = mode.networks();
        Ok(Self {
            mode,
            generator: NetworkParams::init(g, plan, seed)?,
            critic: NetworkParams::init(c, plan, seed)?,
        })
    }

    pub fn networks(&self) -> [&NetworkParams; 2] {
        [&self.generator, &self.critic]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanOptim {
    pub generator: AdamState,
    pub critic: AdamState,
}

impl GanOptim {
    pub fn new(gan: &Gan) -> Self {
        Self {
            generator: AdamState::new(&gan.generator),
            critic: AdamState::new(&gan.critic),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanStepReport {
    /// Mean over the step's critic updates.
    pub l_wgan: f64,
    /// Mean over the step's critic updates.
    pub l_gp: f64,
    pub l_g: f64,
}

impl GanStepReport {
    pub const COLUMNS: [&'static str; 3] = ["l_wgan", "l_gp", "l_g"];

    pub fn values(&self) -> Vec<f64> {
        vec![self.l_wgan, self.l_gp, self.l_g]
    }
}

/// Standard normal noise `[n, dim]`.
pub fn noise<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Tensor<f32> {
    Tensor::randn(vec![n, dim], 1.0, rng)
}

/// `n_critic` critic updates with gradient penalty, then one generator update.
pub fn train_gan_step<R: Rng + ?Sized>(
    gan: &mut Gan,
    opt: &mut GanOptim,
    bank: &dyn SampleBank,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<GanStepReport> {
    if bank.is_empty() {
        return Err(Error::Dataset("no training samples".into()));
    }
    let b = cfg.stage2.batch_size;
    let zdim = gan.generator.plan().noise_dim;
    let (g_kind, c_kind) = gan.mode.networks();
    let (mut wgan_sum, mut gp_sum) = (0.0, 0.0);
    for _ in 0..cfg.n_critic {
        let real = bank.gather(&sample_indices(bank.len(), b, rng))?;
        let fake = gan.generator.infer(&noise(b, zdim, rng))?;
        let grads = {
            let g = Graph::new();
            let c = gan.critic.bind(&g);
            let l_wgan = wasserstein_critic_loss(
                c.forward(g.constant(real.clone()))?,
                c.forward(g.constant(fake.clone()))?,
            )?;
            let l_gp =
                gradient_penalty(&g, |y| c.forward(y), &real, &fake, cfg.losses.lambda, rng)?;
            wgan_sum += finite(&l_wgan, "l_wgan")?;
            gp_sum += finite(&l_gp, "l_gp")?;
            c.grads(&g.backward(code_critic_total(l_wgan, l_gp)?)?)
        };
        gan.critic.store_grads(grads)?;
        adam_step(&mut gan.critic, &mut opt.critic, &cfg.hyper(c_kind))?;
    }

    let (l_g, grads) = {
        let g = Graph::new();
        let gen = gan.generator.bind(&g);
        let c = gan.critic.bind_frozen(&g);
        let fake = gen.forward(g.constant(noise(b, zdim, rng)))?;
        let loss = code_gen_loss(c.forward(fake)?);
        (finite(&loss, "l_g")?, gen.grads(&g.backward(loss)?))
    };
    gan.generator.store_grads(grads)?;
    adam_step(&mut gan.generator, &mut opt.generator, &cfg.hyper(g_kind))?;
    let k = cfg.n_critic as f64;
    Ok(GanStepReport {
        l_wgan: wgan_sum / k,
        l_gp: gp_sum / k,
        l_g,
    })
}

/// Randomness for one training step: a pure function of the run seed, the
/// stage and the step number, so resumed runs replay the same draws.
pub fn step_rng(seed: u64, stage: u8, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << 56) ^ step);
    rng
}
