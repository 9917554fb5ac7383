//! Independent oracles and gradient-check sweeps shared by the integration
//! tests and the acceptance suite. Nothing here calls the kernels under test.

#![allow(dead_code)]

use lacc_core::numerics::{
    finite_diff_check, ConvGeom, Fold, GradCheckOptions, GradCheckReport, Graph, Tensor, Var,
};
use lacc_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct six-loop cross-correlation over `[N, C, H, W]` x `[K, C, k, k]`.
pub fn naive_conv(
    x: &[f64],
    xs: [usize; 4],
    w: &[f64],
    ws: [usize; 4],
    stride: usize,
    pad: usize,
) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, wd] = xs;
    let [ko, ci, kh, kw] = ws;
    assert_eq!(c, ci);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * ko * oh * ow];
    for b in 0..n {
        for k in 0..ko {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = 0.0;
                    for ch in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let iy = (oy * stride + i) as isize - pad as isize;
                                let ix = (ox * stride + j) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                s += x[((b * c + ch) * h + iy as usize) * wd + ix as usize]
                                    * w[((k * c + ch) * kh + i) * kw + j];
                            }
                        }
                    }
                    out[((b * ko + k) * oh + oy) * ow + ox] = s;
                }
            }
        }
    }
    (out, [n, ko, oh, ow])
}

pub fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                c[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    c
}

pub fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::randn(shape.to_vec(), 1.0, rng)
}

/// Values bounded away from zero (for log / sqrt / recip).
pub fn positive(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::uniform(shape.to_vec(), 0.3, 2.0, rng)
}

/// Fixed random projection so every op's check reduces to a scalar with a
/// non-trivial upstream gradient.
pub fn project<'g>(v: Var<'g, f64>, seed: u64) -> Result<Var<'g, f64>> {
    let mut r = rng(seed ^ 0x9e37);
    let weights = Tensor::randn(v.shape(), 1.0, &mut r);
    Ok(v.mul(v.graph().constant(weights))?.sum())
}

pub type OpCase = (&'static str, fn(&mut ChaCha8Rng) -> GradCheckReport);

fn check(
    f: impl for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
    params: Vec<Tensor<f64>>,
) -> GradCheckReport {
    finite_diff_check(f, &params, &GradCheckOptions::with_tol(1e-3))
}

/// One randomized instance of a gradient check per tensor op.
pub fn op_cases() -> Vec<OpCase> {
    vec![
        ("add", |r| {
            check(
                |_, p| project(p[0].add(p[1])?, 1),
                vec![randn(&[2, 3], r), randn(&[2, 3], r)],
            )
        }),
        ("sub", |r| {
            check(
                |_, p| project(p[0].sub(p[1])?, 2),
                vec![randn(&[2, 3], r), randn(&[2, 3], r)],
            )
        }),
        ("mul", |r| {
            check(
                |_, p| project(p[0].mul(p[1])?, 3),
                vec![randn(&[2, 3], r), randn(&[2, 3], r)],
            )
        }),
        ("affine", |r| {
            check(
                |_, p| project(p[0].affine(-1.7, 0.3), 4),
                vec![randn(&[5], r)],
            )
        }),
        ("tanh", |r| {
            check(|_, p| project(p[0].tanh(), 5), vec![randn(&[6], r)])
        }),
        ("sigmoid", |r| {
            check(|_, p| project(p[0].sigmoid(), 6), vec![randn(&[6], r)])
        }),
        ("leaky_relu", |r| {
            check(
                |_, p| project(p[0].leaky_relu(0.2), 7),
                vec![randn(&[8], r)],
            )
        }),
        ("abs", |r| {
            check(|_, p| project(p[0].abs(), 8), vec![randn(&[8], r)])
        }),
        ("log", |r| {
            check(|_, p| project(p[0].log(), 9), vec![positive(&[5], r)])
        }),
        ("sqrt", |r| {
            check(|_, p| project(p[0].sqrt(), 10), vec![positive(&[5], r)])
        }),
        ("recip", |r| {
            check(|_, p| project(p[0].recip(), 11), vec![positive(&[5], r)])
        }),
        ("clamp", |r| {
            check(
                |_, p| project(p[0].clamp(-0.5, 0.5), 12),
                vec![randn(&[8], r)],
            )
        }),
        ("sum_mean", |r| {
            check(
                |_, p| p[0].sum().add(p[0].square().mean()),
                vec![randn(&[3, 4], r)],
            )
        }),
        ("reshape", |r| {
            check(
                |_, p| project(p[0].reshape([6, 2])?, 13),
                vec![randn(&[3, 4], r)],
            )
        }),
        ("sum_middle", |r| {
            check(
                |_, p| {
                    project(
                        p[0].sum_middle(Fold {
                            outer: 2,
                            mid: 3,
                            inner: 4,
                        })?,
                        14,
                    )
                },
                vec![randn(&[2, 3, 4], r)],
            )
        }),
        ("broadcast_middle", |r| {
            check(
                |_, p| {
                    project(
                        p[0].broadcast_middle(Fold {
                            outer: 2,
                            mid: 3,
                            inner: 4,
                        })?,
                        15,
                    )
                },
                vec![randn(&[2, 1, 4], r)],
            )
        }),
        ("matmul", |r| {
            check(
                |_, p| project(p[0].matmul(p[1])?, 16),
                vec![randn(&[3, 4], r), randn(&[4, 2], r)],
            )
        }),
        ("transpose", |r| {
            check(
                |_, p| project(p[0].transpose()?, 17),
                vec![randn(&[3, 4], r)],
            )
        }),
        ("dense", |r| {
            check(
                |_, p| project(p[0].dense(p[1], p[2])?, 18),
                vec![randn(&[3, 4], r), randn(&[4, 2], r), randn(&[2], r)],
            )
        }),
        ("conv2d_s1p1", |r| {
            check(
                |_, p| project(p[0].conv2d(p[1], ConvGeom { stride: 1, pad: 1 })?, 19),
                vec![randn(&[2, 2, 5, 5], r), randn(&[3, 2, 3, 3], r)],
            )
        }),
        ("conv2d_s2p1", |r| {
            check(
                |_, p| project(p[0].conv2d(p[1], ConvGeom { stride: 2, pad: 1 })?, 20),
                vec![randn(&[2, 2, 6, 6], r), randn(&[2, 2, 3, 3], r)],
            )
        }),
        ("conv2d_1x1", |r| {
            check(
                |_, p| project(p[0].conv2d(p[1], ConvGeom { stride: 1, pad: 0 })?, 21),
                vec![randn(&[2, 3, 3, 3], r), randn(&[2, 3, 1, 1], r)],
            )
        }),
        ("channel_bias", |r| {
            check(
                |_, p| project(p[0].add_channel_bias(p[1])?, 22),
                vec![randn(&[2, 3, 2, 2], r), randn(&[3], r)],
            )
        }),
        ("upsample2x", |r| {
            check(
                |_, p| project(p[0].upsample2x()?, 23),
                vec![randn(&[1, 2, 3, 3], r)],
            )
        }),
        ("sum_pool2x", |r| {
            check(
                |_, p| project(p[0].sum_pool2x()?, 24),
                vec![randn(&[1, 2, 4, 4], r)],
            )
        }),
        ("pixel_norm", |r| {
            check(
                |_, p| project(p[0].pixel_norm(1e-8)?, 25),
                vec![randn(&[2, 4, 2, 2], r)],
            )
        }),
        ("conv2d_double_backward", |r| {
            // Differentiate a function of an input gradient; exercises both
            // recorded conv adjoints.
            check(
                |g, p| {
                    // `x` must require grad even when the harness feeds constants.
                    let x = p[0].add(g.param(Tensor::zeros(p[0].shape())))?;
                    let y = x
                        .conv2d(p[1], ConvGeom { stride: 2, pad: 1 })?
                        .leaky_relu(0.2);
                    let s = project(y, 26)?;
                    let gx = g.grad(s, &[x], true)?[0].expect("reachable");
                    Ok(gx.square().sum())
                },
                vec![randn(&[2, 2, 4, 4], r), randn(&[3, 2, 3, 3], r)],
            )
        }),
    ]
}

pub mod nets {
    use lacc_core::networks::{ArchPlan, NetworkKind, NetworkParams};

    /// 8×8 images, scale 2, so codes are 16×4×4.
    pub fn toy_plan() -> ArchPlan {
        ArchPlan::doubling(8, 2, 4, 2, 3)
    }

    pub fn toy(kind: NetworkKind, seed: u64) -> NetworkParams<f64> {
        NetworkParams::init(kind, &toy_plan(), seed).unwrap()
    }
}

fn net_check(
    f: impl for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
    params: Vec<Tensor<f64>>,
    seed: u64,
) -> GradCheckReport {
    let opts = GradCheckOptions {
        max_probes: Some(6),
        seed,
        ..GradCheckOptions::with_tol(1e-3)
    };
    finite_diff_check(f, &params, &opts)
}

fn values(net: &lacc_core::networks::NetworkParams<f64>) -> Vec<Tensor<f64>> {
    net.params().iter().map(|p| p.value.clone()).collect()
}

/// One randomized instance of a gradient check per loss, the composite ones
/// through toy networks.
pub fn loss_cases() -> Vec<OpCase> {
    use lacc_core::losses::*;
    use lacc_core::networks::NetworkKind;
    use rand::Rng;
    vec![
        ("recon_l1", |r| {
            check(
                |_, p| recon_l1(p[0], p[1]),
                vec![randn(&[2, 3, 2, 2], r), randn(&[2, 3, 2, 2], r)],
            )
        }),
        ("ae_adversarial", |r| {
            check(
                |_, p| ae_adversarial(p[0].sigmoid(), 1e-7),
                vec![randn(&[4, 1], r)],
            )
        }),
        ("image_disc_loss", |r| {
            check(
                |_, p| image_disc_loss(p[0].sigmoid(), p[1].sigmoid(), 1e-7),
                vec![randn(&[4, 1], r), randn(&[4, 1], r)],
            )
        }),
        ("code_gen_loss", |r| {
            check(|_, p| Ok(code_gen_loss(p[0])), vec![randn(&[4, 1], r)])
        }),
        ("wasserstein_critic_loss", |r| {
            check(
                |_, p| wasserstein_critic_loss(p[0], p[1]),
                vec![randn(&[4, 1], r), randn(&[3, 1], r)],
            )
        }),
        ("ae_total", |r| {
            let seed: u64 = r.random();
            let f = nets::toy(NetworkKind::Encoder, seed);
            let h = nets::toy(NetworkKind::Decoder, seed + 1);
            let d = nets::toy(NetworkKind::ImageDiscriminator, seed + 2);
            let x: Tensor<f64> = Tensor::uniform(vec![2, 3, 8, 8], -1.0, 1.0, r);
            let (nf, nh) = (f.params().len(), h.params().len());
            let mut params = values(&f);
            params.extend(values(&h));
            net_check(
                |g, p| {
                    let xv = g.constant(x.clone());
                    let x_hat = h
                        .bind_vars(p[nf..nf + nh].to_vec())?
                        .forward(f.bind_vars(p[..nf].to_vec())?.forward(xv)?)?;
                    let d_fake = d.bind_frozen(g).forward(x_hat)?;
                    ae_total(recon_l1(xv, x_hat)?, ae_adversarial(d_fake, 1e-7)?, 0.5)
                },
                params,
                seed,
            )
        }),
        ("gradient_penalty", |r| {
            let seed: u64 = r.random();
            let dc = nets::toy(NetworkKind::CodeCritic, seed);
            let real: Tensor<f64> = Tensor::uniform(vec![3, 16, 4, 4], -1.0, 1.0, r);
            let fake: Tensor<f64> = Tensor::uniform(vec![3, 16, 4, 4], -1.0, 1.0, r);
            let eps = sample_mixing(3, r);
            net_check(
                |g, p| {
                    gradient_penalty_at(
                        g,
                        |y| dc.bind_vars(p.to_vec())?.forward(y),
                        &real,
                        &fake,
                        &eps,
                        10.0,
                    )
                },
                values(&dc),
                seed,
            )
        }),
        ("code_critic_total", |r| {
            let seed: u64 = r.random();
            let dc = nets::toy(NetworkKind::CodeCritic, seed);
            let gc = nets::toy(NetworkKind::CodeGenerator, seed + 1);
            let real: Tensor<f64> = Tensor::uniform(vec![3, 16, 4, 4], -1.0, 1.0, r);
            let z: Tensor<f64> = Tensor::randn(vec![3, 4], 1.0, r);
            let fake = gc.infer(&z).unwrap();
            let eps = sample_mixing(3, r);
            net_check(
                |g, p| {
                    let critic = dc.bind_vars(p.to_vec())?;
                    let l_wgan = wasserstein_critic_loss(
                        critic.forward(g.constant(real.clone()))?,
                        critic.forward(g.constant(fake.clone()))?,
                    )?;
                    let l_gp =
                        gradient_penalty_at(g, |y| critic.forward(y), &real, &fake, &eps, 10.0)?;
                    code_critic_total(l_wgan, l_gp)
                },
                values(&dc),
                seed,
            )
        }),
    ]
}
