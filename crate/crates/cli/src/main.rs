use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lacc_core::dataio::{emit_grid, inspect, load_image_dataset, write_toy_dataset, CodeStore};
use lacc_core::metrics::{
    bench_step, count_flops, frechet_between, reconstruction_mse, Extractor, GanMode,
    DEFAULT_TRIALS, DEFAULT_WARMUP,
};
use lacc_core::networks::NetworkKind;
use lacc_core::numerics::Tensor;
use lacc_core::training::{
    encode_dataset, generate_baseline, generate_images, interpolate, load_network, reconstruct,
    sample_noise, step_rng, train_gan_step, train_stage1, train_stage2, Gan, GanOptim, ImageBank,
    PathKind, RunOptions, RunPaths, SampleBank, TrainConfig,
};
use lacc_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "lacc",
    version,
    about = "Two-stage latent-code GAN training",
    arg_required_else_help = true
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; defaults apply to every missing field.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set stage1.steps=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Load checkpoints written under a different config hash.
    #[arg(long, global = true)]
    allow_config_mismatch: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train the encoder, decoder and image discriminator.
    TrainAe {
        #[arg(long)]
        resume: bool,
    },
    /// Encode the dataset with the trained encoder into a code store.
    Encode {
        /// Defaults to `<output.dir>/codes.lacc`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the code generator and critic on an encoded dataset.
    TrainCodegan {
        #[arg(long)]
        codes: Option<PathBuf>,
        #[arg(long)]
        resume: bool,
    },
    /// Train the full-resolution image GAN baseline.
    TrainImagegan {
        #[arg(long)]
        resume: bool,
    },
    /// Write a grid of generated images.
    Generate {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        cols: usize,
        #[arg(long)]
        out: PathBuf,
        /// Sample the image-GAN baseline instead.
        #[arg(long)]
        baseline: bool,
    },
    /// Write a strip of images along a path between two noise vectors.
    Interpolate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value = "slerp")]
        path: PathKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frechet distance between generated samples and dataset images.
    EvalFd {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        baseline: bool,
        /// Compare autoencoder reconstructions instead of generated samples.
        #[arg(long, conflicts_with = "baseline")]
        reconstructions: bool,
    },
    /// Time training steps of one GAN mode on synthetic data.
    Bench {
        #[arg(long, default_value = "code")]
        mode: String,
        #[arg(long, default_value_t = DEFAULT_WARMUP)]
        warmup: usize,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Print the header of a code store or checkpoint.
    Inspect { path: PathBuf },
    /// Write a procedural toy image dataset.
    MakeToyData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Common {
    fn load(&self) -> Result<TrainConfig> {
        let cfg = match &self.config {
            Some(p) => TrainConfig::load(p, &self.overrides)?,
            None => TrainConfig::from_toml("", &self.overrides)?,
        };
        log::info!("config_hash={}", cfg.hash());
        Ok(cfg)
    }

    fn options(&self, resume: bool) -> RunOptions {
        RunOptions {
            resume,
            allow_config_mismatch: self.allow_config_mismatch,
            ..Default::default()
        }
    }
}

/// Training images at `resolution`, without the held-out tail.
fn training_images(cfg: &TrainConfig, resolution: usize) -> Result<Tensor<f32>> {
    let set = load_image_dataset(&cfg.data.dir, resolution, cfg.data.max_images)?;
    let keep = set.len().saturating_sub(cfg.data.holdout);
    if keep == 0 {
        return Err(Error::Dataset(format!(
            "holdout {} leaves no training images",
            cfg.data.holdout
        )));
    }
    Tensor::stack(&set.images[..keep])
}

fn holdout_or_all(cfg: &TrainConfig, resolution: usize) -> Result<Tensor<f32>> {
    let set = load_image_dataset(&cfg.data.dir, resolution, cfg.data.max_images)?;
    let start = if cfg.data.holdout > 0 {
        set.len().saturating_sub(cfg.data.holdout)
    } else {
        0
    };
    Tensor::stack(&set.images[start..])
}

fn report_stage(name: &str, steps: u64, history: &lacc_core::training::History) {
    let last = history
        .columns
        .iter()
        .zip(history.rows.last().into_iter().flatten())
        .map(|(c, v)| format!(" {c}={v}"))
        .collect::<String>();
    println!("stage={name} steps={steps}{last}");
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.common;
    match cli.command {
        Command::TrainAe { resume } => {
            let cfg = common.load()?;
            let images = training_images(&cfg, cfg.stage1_resolution)?;
            let run = train_stage1(&cfg, &images, &common.options(resume))?;
            report_stage("ae", run.steps, &run.history);
        }
        Command::Encode { out } => {
            let cfg = common.load()?;
            let encoder = load_network(&cfg, NetworkKind::Encoder, common.allow_config_mismatch)?;
            let images = training_images(&cfg, cfg.plan.resolution)?;
            let store = encode_dataset(&encoder, &images)?;
            let out = out.unwrap_or_else(|| RunPaths::new(&cfg.output.dir).codes());
            ensure_parent(&out)?;
            store.write(&out)?;
            let [c, h, w] = store.code_shape();
            println!(
                "codes={} count={} shape=[{c},{h},{w}]",
                out.display(),
                store.len()
            );
        }
        Command::TrainCodegan { codes, resume } => {
            let cfg = common.load()?;
            let path = codes.unwrap_or_else(|| RunPaths::new(&cfg.output.dir).codes());
            let store = CodeStore::read(&path)?;
            let run = train_stage2(&cfg, GanMode::CodeGan, &store, &common.options(resume))?;
            report_stage("codegan", run.steps, &run.history);
        }
        Command::TrainImagegan { resume } => {
            let cfg = common.load()?;
            let bank = ImageBank(training_images(&cfg, cfg.plan.resolution)?);
            let run = train_stage2(&cfg, GanMode::ImageGan, &bank, &common.options(resume))?;
            report_stage("imagegan", run.steps, &run.history);
        }
        Command::Generate {
            n,
            seed,
            cols,
            out,
            baseline,
        } => {
            let cfg = common.load()?;
            let allow = common.allow_config_mismatch;
            let images = if baseline {
                generate_baseline(
                    &load_network(&cfg, NetworkKind::ImageGenerator, allow)?,
                    n,
                    seed,
                )?
            } else {
                let g = load_network(&cfg, NetworkKind::CodeGenerator, allow)?;
                let h = load_network(&cfg, NetworkKind::Decoder, allow)?;
                generate_images(&g, &h, n, seed)?
            };
            ensure_parent(&out)?;
            emit_grid(&images, cols, &out)?;
            println!("grid={} images={n}", out.display());
        }
        Command::Interpolate {
            seed,
            steps,
            path,
            out,
        } => {
            let cfg = common.load()?;
            let allow = common.allow_config_mismatch;
            let g = load_network(&cfg, NetworkKind::CodeGenerator, allow)?;
            let h = load_network(&cfg, NetworkKind::Decoder, allow)?;
            let d = cfg.plan.noise_dim;
            let z = sample_noise(2, d, seed);
            let strip = interpolate(&g, &h, &z.data()[..d], &z.data()[d..], steps, path)?;
            ensure_parent(&out)?;
            emit_grid(&strip, steps, &out)?;
            println!("strip={} frames={steps}", out.display());
        }
        Command::EvalFd {
            n,
            seed,
            baseline,
            reconstructions,
        } => {
            let cfg = common.load()?;
            let allow = common.allow_config_mismatch;
            let real = holdout_or_all(&cfg, cfg.plan.resolution)?;
            let fake = if reconstructions {
                let f = load_network(&cfg, NetworkKind::Encoder, allow)?;
                let h = load_network(&cfg, NetworkKind::Decoder, allow)?;
                let recon = reconstruct(&f, &h, &real)?;
                println!("mse={}", reconstruction_mse(&real, &recon)?);
                recon
            } else if baseline {
                generate_baseline(
                    &load_network(&cfg, NetworkKind::ImageGenerator, allow)?,
                    n,
                    seed,
                )?
            } else {
                let g = load_network(&cfg, NetworkKind::CodeGenerator, allow)?;
                let h = load_network(&cfg, NetworkKind::Decoder, allow)?;
                generate_images(&g, &h, n, seed)?
            };
            let fd = frechet_between(&real, &fake, &Extractor::default())?;
            println!(
                "fd={fd} real={} generated={}",
                real.shape()[0],
                fake.shape()[0]
            );
        }
        Command::Bench {
            mode,
            warmup,
            trials,
        } => {
            let cfg = common.load()?;
            let mode = match mode.as_str() {
                "code" => GanMode::CodeGan,
                "image" => GanMode::ImageGan,
                m => {
                    return Err(Error::Config(format!(
                        "unknown bench mode {m:?} (code or image)"
                    )))
                }
            };
            let report = bench_mode(&cfg, mode, warmup, trials)?;
            println!(
                "mode={} {report}",
                match mode {
                    GanMode::CodeGan => "code",
                    GanMode::ImageGan => "image",
                }
            );
        }
        Command::Inspect { path } => println!("{}", inspect(&path)?),
        Command::MakeToyData {
            out,
            count,
            resolution,
            seed,
        } => {
            if count == 0 || resolution == 0 {
                return Err(Error::Config(
                    "count and resolution must be positive".into(),
                ));
            }
            write_toy_dataset(&out, count, resolution, seed)?;
            println!(
                "dir={} count={count} resolution={resolution}",
                out.display()
            );
        }
    }
    Ok(())
}

/// Synthetic samples of the right shape; step time does not depend on content.
fn bench_mode(
    cfg: &TrainConfig,
    mode: GanMode,
    warmup: usize,
    trials: usize,
) -> Result<lacc_core::metrics::BenchReport> {
    let mut gan = Gan::init(mode, &cfg.plan, cfg.seed)?;
    let mut opt = GanOptim::new(&gan);
    let mut shape = gan.critic.input_shape();
    shape.insert(0, cfg.stage2.batch_size.max(2) * 4);
    let data = Tensor::uniform(shape, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let bank = ImageBank(data);
    let mut k = 0;
    let flops = count_flops(&cfg.plan, mode)?;
    bench_step(
        || {
            k += 1;
            train_gan_step(
                &mut gan,
                &mut opt,
                &bank as &dyn SampleBank,
                cfg,
                &mut step_rng(cfg.seed, 9, k),
            )
            .map(|_| ())
        },
        warmup,
        trials,
        flops,
        &cfg.hash(),
    )
}

/// Exit code and error class: usage 2, config 3, everything else 1.
fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Config(_) => (3, "config"),
        _ => (1, "runtime"),
    }
}

/// Errors go to stderr as one line, `error[<class>]: <message>`.
fn fail(code: u8, class: &str, msg: &str) -> ExitCode {
    let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{class}]: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    ExitCode::from(2)
                }
                _ => {
                    let text = e.render().to_string();
                    let first = text.lines().next().unwrap_or("invalid arguments");
                    fail(2, "usage", first.trim_start_matches("error: "))
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, class) = classify(&e);
            fail(code, class, &e.to_string())
        }
    }
}
