//! Training objectives as differentiable scalars.
//!
//! Probabilities from the image discriminator are clamped to
//! `[clamp, 1 - clamp]` before any log, so saturated sigmoids cost a large but
//! finite value.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{Graph, Real, Tensor, Var};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const DEFAULT_LOG_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Weight of the adversarial term in the autoencoder objective.
    pub alpha: f64,
    /// Gradient-penalty weight.
    pub lambda: f64,
    pub log_clamp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
            log_clamp: DEFAULT_LOG_CLAMP,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("lambda", self.lambda)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.log_clamp > 0.0 && self.log_clamp < 0.5) {
            return Err(Error::Config(format!(
                "log_clamp must lie in (0, 0.5), got {}",
                self.log_clamp
            )));
        }
        Ok(())
    }
}

/// Mean absolute difference.
pub fn recon_l1<'g, T: Real>(x: Var<'g, T>, x_hat: Var<'g, T>) -> Result<Var<'g, T>> {
    Ok(x.sub(x_hat)?.abs().mean())
}

fn check_probabilities<T: Real>(p: &Var<'_, T>, what: &str) -> Result<()> {
    let v = p.value();
    if let Some(i) = v
        .data()
        .iter()
        .position(|&d| !(d >= T::zero() && d <= T::one()))
    {
        return Err(Error::Domain(format!(
            "{what}[{i}] = {} is not a probability",
            v.data()[i]
        )));
    }
    Ok(())
}

/// `mean(-log d_fake)`: the autoencoder's non-saturating adversarial term.
pub fn ae_adversarial<'g, T: Real>(d_fake: Var<'g, T>, log_clamp: f64) -> Result<Var<'g, T>> {
    check_probabilities(&d_fake, "d_fake")?;
    Ok(d_fake.clamp(log_clamp, 1.0 - log_clamp).log().mean().neg())
}

/// `l_r + alpha * l_adv`.
pub fn ae_total<'g, T: Real>(l_r: Var<'g, T>, l_adv: Var<'g, T>, alpha: f64) -> Result<Var<'g, T>> {
    l_r.add(l_adv.scale(alpha))
}

/// `mean(-log d_real - log(1 - d_fake))`.
pub fn image_disc_loss<'g, T: Real>(
    d_real: Var<'g, T>,
    d_fake: Var<'g, T>,
    log_clamp: f64,
) -> Result<Var<'g, T>> {
    check_probabilities(&d_real, "d_real")?;
    check_probabilities(&d_fake, "d_fake")?;
    let real = d_real.clamp(log_clamp, 1.0 - log_clamp).log().mean();
    let fake = d_fake
        .affine(-1.0, 1.0)
        .clamp(log_clamp, 1.0 - log_clamp)
        .log()
        .mean();
    Ok(real.add(fake)?.neg())
}

/// `-mean(critic_fake)`.
pub fn code_gen_loss<'g, T: Real>(critic_fake: Var<'g, T>) -> Var<'g, T> {
    critic_fake.mean().neg()
}

/// `mean(critic_fake) - mean(critic_real)`.
pub fn wasserstein_critic_loss<'g, T: Real>(
    critic_real: Var<'g, T>,
    critic_fake: Var<'g, T>,
) -> Result<Var<'g, T>> {
    critic_fake.mean().sub(critic_real.mean())
}

/// Per-item mixing weights `eps_i ~ U[0, 1)`.
pub fn sample_mixing<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// `eps_i * real_i + (1 - eps_i) * fake_i`, one weight per leading index.
pub fn interpolate_batch<T: Real>(
    real: &Tensor<T>,
    fake: &Tensor<T>,
    eps: &[f64],
) -> Result<Tensor<T>> {
    real.expect_same_shape(fake, "gradient penalty")?;
    let n = real.shape()[0];
    if eps.len() != n {
        return Err(Error::shape(format!(
            "{} mixing weights for a batch of {n}",
            eps.len()
        )));
    }
    let per = real.numel() / n;
    let mut out = real.clone();
    for (i, (o, f)) in out
        .data_mut()
        .chunks_mut(per)
        .zip(fake.data().chunks(per))
        .enumerate()
    {
        let e = T::lit(eps[i]);
        for (o, &f) in o.iter_mut().zip(f) {
            *o = e * *o + (T::one() - e) * f;
        }
    }
    Ok(out)
}

/// `lambda * mean_i (||grad_y critic(y_i)||_2 - 1)^2` at interpolates of `real`
/// and `fake` with per-item weights drawn from `rng`.
///
/// The penalty stays differentiable in whatever the critic closes over.
pub fn gradient_penalty<'g, T, F, R>(
    g: &'g Graph<T>,
    critic: F,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    lambda: f64,
    rng: &mut R,
) -> Result<Var<'g, T>>
where
    T: Real,
    F: FnOnce(Var<'g, T>) -> Result<Var<'g, T>>,
    R: Rng + ?Sized,
{
    let eps = sample_mixing(real.shape().first().copied().unwrap_or(0), rng);
    gradient_penalty_at(g, critic, real, fake, &eps, lambda)
}

/// [`gradient_penalty`] with explicit mixing weights.
pub fn gradient_penalty_at<'g, T, F>(
    g: &'g Graph<T>,
    critic: F,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    eps: &[f64],
    lambda: f64,
) -> Result<Var<'g, T>>
where
    T: Real,
    F: FnOnce(Var<'g, T>) -> Result<Var<'g, T>>,
{
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let y = g.param(interpolate_batch(real, fake, eps)?);
    let score = critic(y)?;
    let n = real.shape()[0];
    if score.shape().first() != Some(&n) {
        return Err(Error::shape(format!(
            "critic returned {:?} for a batch of {n}",
            score.shape()
        )));
    }
    let norms = match g.grad(score.sum(), &[y], true)?[0] {
        Some(gy) => gy.square().sum_per_item()?.sqrt(),
        None => g.constant(Tensor::zeros(vec![n])),
    };
    if let Some(i) = norms.value().data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient-penalty norm".into(),
            location: Some(format!("batch index {i}")),
        });
    }
    Ok(norms.add_scalar(-1.0).square().mean().scale(lambda))
}

/// `l_wgan + l_gp`.
pub fn code_critic_total<'g, T: Real>(l_wgan: Var<'g, T>, l_gp: Var<'g, T>) -> Result<Var<'g, T>> {
    l_wgan.add(l_gp)
}
