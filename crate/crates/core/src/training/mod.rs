//! Two-stage training: the autoencoder with its image discriminator, then a
//! Wasserstein GAN over frozen latent codes (or, as a baseline, over images).

mod adam;
mod config;
mod runner;
mod sampling;
mod steps;

pub use adam::{adam_step, adam_update, AdamHyper, AdamState};
pub use config::{apply_override, DataConfig, OptimConfig, OutputConfig, StageConfig, TrainConfig};
pub use runner::{
    load_network, read_metrics, train_stage1, train_stage2, History, MetricsLog, RunOptions,
    RunPaths, Stage, StageRun,
};
pub use sampling::{
    decode_noise, encode_dataset, generate_baseline, generate_codes, generate_images, interpolate,
    interpolation_path, reconstruct, sample_noise, PathKind, INFER_CHUNK,
};
pub use steps::{
    gather_rows, noise, sample_indices, step_rng, train_autoencoder_step, train_gan_step,
    AeStepReport, Autoencoder, AutoencoderOptim, Gan, GanOptim, GanStepReport, ImageBank,
    SampleBank,
};
