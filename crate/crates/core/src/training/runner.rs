//! Stage drivers: step loops with metrics logging, periodic checkpoints,
//! resume and divergence handling.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::config::TrainConfig;
use super::steps::{
    gather_rows, sample_indices, step_rng, train_autoencoder_step, train_gan_step, AeStepReport,
    Autoencoder, AutoencoderOptim, Gan, GanOptim, GanStepReport, SampleBank,
};
use crate::dataio::{load_checkpoint, Checkpoint};
use crate::metrics::GanMode;
use crate::networks::{NetworkKind, NetworkParams};
use crate::numerics::{parallel, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Autoencoder,
    CodeGan,
    ImageGan,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Autoencoder => "ae",
            Stage::CodeGan => "codegan",
            Stage::ImageGan => "imagegan",
        }
    }

    pub fn kinds(self) -> &'static [NetworkKind] {
        match self {
            Stage::Autoencoder => &[
                NetworkKind::Encoder,
                NetworkKind::Decoder,
                NetworkKind::ImageDiscriminator,
            ],
            Stage::CodeGan => &[NetworkKind::CodeGenerator, NetworkKind::CodeCritic],
            Stage::ImageGan => &[NetworkKind::ImageGenerator, NetworkKind::ImageCritic],
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Stage::Autoencoder => &AeStepReport::COLUMNS,
            _ => &GanStepReport::COLUMNS,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Stage::Autoencoder => 1,
            Stage::CodeGan => 2,
            Stage::ImageGan => 3,
        }
    }
}

impl From<GanMode> for Stage {
    fn from(m: GanMode) -> Self {
        match m {
            GanMode::CodeGan => Stage::CodeGan,
            GanMode::ImageGan => Stage::ImageGan,
        }
    }
}

/// File layout under a run's output directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn checkpoint(&self, kind: NetworkKind) -> PathBuf {
        self.checkpoints().join(format!("{}.lack", kind.name()))
    }

    pub fn metrics(&self, stage: Stage) -> PathBuf {
        self.root.join(format!("{}_metrics.csv", stage.name()))
    }

    pub fn codes(&self) -> PathBuf {
        self.root.join("codes.lacc")
    }
}

/// `step,<losses>,wall_ms` rows, one per training step.
pub struct MetricsLog {
    out: BufWriter<File>,
    columns: usize,
}

fn header(columns: &[&str]) -> String {
    format!("step,{},wall_ms", columns.join(","))
}

impl MetricsLog {
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path).map_err(Error::io_at(path))?);
        writeln!(out, "{}", header(columns))?;
        out.flush()?;
        Ok(Self {
            out,
            columns: columns.len(),
        })
    }

    /// Reopen for appending, dropping rows after `through_step` (those a
    /// crash recorded past the last checkpoint).
    pub fn resume(path: &Path, columns: &[&str], through_step: u64) -> Result<Self> {
        let expect = header(columns);
        let mut kept = Vec::new();
        if path.exists() {
            let mut lines = BufReader::new(File::open(path).map_err(Error::io_at(path))?).lines();
            match lines.next().transpose()? {
                Some(h) if h == expect => {}
                Some(h) => {
                    return Err(Error::Invalid(format!(
                        "{}: unexpected header {h:?}",
                        path.display()
                    )))
                }
                None => {}
            }
            for line in lines {
                let line = line?;
                let step: u64 = line
                    .split(',')
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        Error::Invalid(format!("{}: bad row {line:?}", path.display()))
                    })?;
                if step <= through_step {
                    kept.push(line);
                }
            }
        }
        let mut log = Self::create(path, columns)?;
        for line in kept {
            writeln!(log.out, "{line}")?;
        }
        log.out.flush()?;
        Ok(log)
    }

    pub fn append(&mut self, step: u64, values: &[f64], wall_ms: f64) -> Result<()> {
        if values.len() != self.columns {
            return Err(Error::Invalid(format!(
                "{} values for {} columns",
                values.len(),
                self.columns
            )));
        }
        let mut row = step.to_string();
        for v in values {
            row.push(',');
            row.push_str(&v.to_string());
        }
        writeln!(self.out, "{row},{wall_ms}")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Header and rows of a metrics file.
pub fn read_metrics(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(Error::io_at(path))?;
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Invalid(format!("{} is empty", path.display())))?;
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::Invalid(format!("{}: {e} in {l:?}", path.display())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((head.split(',').map(String::from).collect(), rows))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue from the checkpoints in the output directory.
    pub resume: bool,
    /// Stop after the first step that ends past this much training time.
    pub time_budget: Option<Duration>,
    /// Accept checkpoints written under a different config.
    pub allow_config_mismatch: bool,
}

/// Losses per completed step of one stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub columns: Vec<String>,
    pub steps: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
}

impl History {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name)?.last().copied()
    }
}

#[derive(Debug, Clone)]
pub struct StageRun<N> {
    pub nets: N,
    pub history: History,
    /// Completed steps, counting those before a resume.
    pub steps: u64,
    /// Training time spent in this invocation.
    pub elapsed: Duration,
}

struct SequentialGuard(bool);

impl SequentialGuard {
    fn new(on: bool) -> Self {
        let was = parallel::is_sequential();
        if on {
            parallel::set_sequential(true);
        }
        Self(was)
    }
}

impl Drop for SequentialGuard {
    fn drop(&mut self) {
        parallel::set_sequential(self.0);
    }
}

fn save_all(
    paths: &RunPaths,
    nets: &[(&NetworkParams, &AdamState)],
    step: u64,
    hash: &str,
) -> Result<PathBuf> {
    std::fs::create_dir_all(paths.checkpoints())?;
    for (net, opt) in nets {
        Checkpoint::new(net, Some(opt), step, hash).save(&paths.checkpoint(net.kind()))?;
    }
    Ok(paths.checkpoint(nets[0].0.kind()))
}

/// Networks and optimizer states of `kinds`, all saved at the same step.
fn load_all(
    paths: &RunPaths,
    cfg: &TrainConfig,
    kinds: &[NetworkKind],
    opts: &RunOptions,
) -> Result<(Vec<(NetworkParams, AdamState)>, u64)> {
    let hash = cfg.hash();
    let mut out = Vec::new();
    let mut step = None;
    for &kind in kinds {
        let path = paths.checkpoint(kind);
        let ck = load_checkpoint(&path, Some(&hash), opts.allow_config_mismatch)?;
        let plan = if matches!(
            kind,
            NetworkKind::Encoder | NetworkKind::Decoder | NetworkKind::ImageDiscriminator
        ) {
            cfg.stage1_plan()
        } else {
            cfg.plan.clone()
        };
        let net = ck.network(&plan)?;
        let opt = ck.optimizer.clone().ok_or_else(|| {
            Error::Invalid(format!(
                "{} has no optimizer state and cannot be resumed",
                path.display()
            ))
        })?;
        match step {
            None => step = Some(ck.step),
            Some(s) if s != ck.step => {
                return Err(Error::Invalid(format!(
                    "checkpoints disagree: {} is at step {}, others at {s}",
                    path.display(),
                    ck.step
                )))
            }
            _ => {}
        }
        out.push((net, opt));
    }
    Ok((out, step.unwrap_or(0)))
}

trait Trainable {
    fn step(&mut self, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    fn parts(&self) -> Vec<(&NetworkParams, &AdamState)>;
}

fn drive<S: Trainable>(
    cfg: &TrainConfig,
    stage: Stage,
    state: &mut S,
    start: u64,
    opts: &RunOptions,
) -> Result<(History, u64, Duration)> {
    let _guard = SequentialGuard::new(cfg.deterministic);
    let paths = RunPaths::new(&cfg.output.dir);
    std::fs::create_dir_all(&paths.root)?;
    let columns = stage.columns();
    let mut log = if opts.resume {
        MetricsLog::resume(&paths.metrics(stage), columns, start)?
    } else {
        MetricsLog::create(&paths.metrics(stage), columns)?
    };
    let hash = cfg.hash();
    let total = match stage {
        Stage::Autoencoder => cfg.stage1.steps,
        _ => cfg.stage2.steps,
    };
    let mut history = History {
        columns: columns.iter().map(|c| c.to_string()).collect(),
        ..Default::default()
    };
    let mut last_checkpoint = (start > 0).then(|| paths.checkpoint(stage.kinds()[0]));
    let mut saved_at = start;
    let t0 = Instant::now();
    let mut step = start;
    while step < total {
        let k = step + 1;
        let mut rng = step_rng(cfg.seed, stage.tag(), k);
        let ts = Instant::now();
        let values = match state.step(cfg, &mut rng) {
            Ok(v) => v,
            Err(Error::NonFinite { what, location }) => {
                log::error!(
                    "step {k}: non-finite {what}{}",
                    location.map(|l| format!(" at {l}")).unwrap_or_default()
                );
                return Err(Error::Diverged {
                    step: k,
                    last_checkpoint,
                });
            }
            Err(e) => return Err(e),
        };
        let wall_ms = if cfg.deterministic {
            0.0
        } else {
            ts.elapsed().as_secs_f64() * 1e3
        };
        log.append(k, &values, wall_ms)?;
        history.steps.push(k);
        history.rows.push(values);
        step = k;
        if cfg.output.checkpoint_every > 0 && k.is_multiple_of(cfg.output.checkpoint_every) {
            last_checkpoint = Some(save_all(&paths, &state.parts(), k, &hash)?);
            saved_at = k;
        }
        if opts.time_budget.is_some_and(|b| t0.elapsed() >= b) {
            log::info!("{}: time budget reached after step {k}", stage.name());
            break;
        }
    }
    let elapsed = t0.elapsed();
    if saved_at != step || last_checkpoint.is_none() {
        save_all(&paths, &state.parts(), step, &hash)?;
    }
    Ok((history, step, elapsed))
}

struct AeState<'a> {
    ae: Autoencoder,
    opt: AutoencoderOptim,
    images: &'a Tensor<f32>,
}

impl Trainable for AeState<'_> {
    fn step(&mut self, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let n = self.images.shape()[0];
        let idx = sample_indices(n, cfg.stage1.batch_size, rng);
        let batch = gather_rows(self.images, &idx)?;
        Ok(train_autoencoder_step(&mut self.ae, &mut self.opt, &batch, cfg)?.values())
    }

    fn parts(&self) -> Vec<(&NetworkParams, &AdamState)> {
        vec![
            (&self.ae.encoder, &self.opt.encoder),
            (&self.ae.decoder, &self.opt.decoder),
            (&self.ae.disc, &self.opt.disc),
        ]
    }
}

/// Train `F`, `H` and `D` on `images` (`[N, 3, r, r]` at the stage-1
/// resolution) for `cfg.stage1.steps` steps.
pub fn train_stage1(
    cfg: &TrainConfig,
    images: &Tensor<f32>,
    opts: &RunOptions,
) -> Result<StageRun<Autoencoder>> {
    cfg.validate()?;
    let r = cfg.stage1_resolution;
    match images.shape() {
        &[n, 3, h, w] if n > 0 && h == r && w == r => {}
        s => {
            return Err(Error::shape(format!(
                "stage 1 expects [N, 3, {r}, {r}] images, got {s:?}"
            )))
        }
    }
    let paths = RunPaths::new(&cfg.output.dir);
    let (ae, opt, start) = if opts.resume {
        let (mut v, step) = load_all(&paths, cfg, Stage::Autoencoder.kinds(), opts)?;
        let (disc, od) = v.pop().expect("three networks");
        let (decoder, oh) = v.pop().expect("three networks");
        let (encoder, of) = v.pop().expect("three networks");
        (
            Autoencoder {
                encoder,
                decoder,
                disc,
            },
            AutoencoderOptim {
                encoder: of,
                decoder: oh,
                disc: od,
            },
            step,
        )
    } else {
        let ae = Autoencoder::init(&cfg.stage1_plan(), cfg.seed)?;
        let opt = AutoencoderOptim::new(&ae);
        (ae, opt, 0)
    };
    let mut state = AeState { ae, opt, images };
    let (history, steps, elapsed) = drive(cfg, Stage::Autoencoder, &mut state, start, opts)?;
    Ok(StageRun {
        nets: state.ae,
        history,
        steps,
        elapsed,
    })
}

struct GanState<'a> {
    gan: Gan,
    opt: GanOptim,
    bank: &'a dyn SampleBank,
}

impl Trainable for GanState<'_> {
    fn step(&mut self, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(train_gan_step(&mut self.gan, &mut self.opt, self.bank, cfg, rng)?.values())
    }

    fn parts(&self) -> Vec<(&NetworkParams, &AdamState)> {
        vec![
            (&self.gan.generator, &self.opt.generator),
            (&self.gan.critic, &self.opt.critic),
        ]
    }
}

/// Train a generator/critic pair on `bank` for `cfg.stage2.steps` steps.
/// The code GAN never sees the encoder or decoder.
pub fn train_stage2(
    cfg: &TrainConfig,
    mode: GanMode,
    bank: &dyn SampleBank,
    opts: &RunOptions,
) -> Result<StageRun<Gan>> {
    cfg.validate()?;
    let stage = Stage::from(mode);
    let paths = RunPaths::new(&cfg.output.dir);
    let (gan, opt, start) = if opts.resume {
        let (mut v, step) = load_all(&paths, cfg, stage.kinds(), opts)?;
        let (critic, oc) = v.pop().expect("two networks");
        let (generator, og) = v.pop().expect("two networks");
        (
            Gan {
                mode,
                generator,
                critic,
            },
            GanOptim {
                generator: og,
                critic: oc,
            },
            step,
        )
    } else {
        let gan = Gan::init(mode, &cfg.plan, cfg.seed)?;
        let opt = GanOptim::new(&gan);
        (gan, opt, 0)
    };
    if bank.is_empty() {
        return Err(Error::Dataset("no training samples".into()));
    }
    let expect = gan.critic.input_shape();
    let got = bank.gather(&[0])?.shape()[1..].to_vec();
    if got != expect {
        return Err(Error::shape(format!(
            "{} expects samples of shape {expect:?}, bank holds {got:?}",
            stage.name()
        )));
    }
    let mut state = GanState { gan, opt, bank };
    let (history, steps, elapsed) = drive(cfg, stage, &mut state, start, opts)?;
    Ok(StageRun {
        nets: state.gan,
        history,
        steps,
        elapsed,
    })
}

/// Load one network from a run's checkpoints, checking the config hash.
pub fn load_network(
    cfg: &TrainConfig,
    kind: NetworkKind,
    allow_mismatch: bool,
) -> Result<NetworkParams> {
    let paths = RunPaths::new(&cfg.output.dir);
    let ck = load_checkpoint(&paths.checkpoint(kind), Some(&cfg.hash()), allow_mismatch)?;
    let plan = match kind {
        NetworkKind::Encoder | NetworkKind::Decoder | NetworkKind::ImageDiscriminator => {
            cfg.stage1_plan()
        }
        _ => cfg.plan.clone(),
    };
    ck.network(&plan)
}
