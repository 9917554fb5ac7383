//! File formats and dataset ingest: the `LACC` code store, `LACK`
//! checkpoints, image directories, image grids and a procedural toy dataset.

mod checkpoint;
mod codestore;
mod grid;
mod images;
mod synth;

pub use checkpoint::{load_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use codestore::{
    parse_header as parse_code_store_header, CodeStore, CodeStoreHeader, CODE_STORE_HEADER_LEN,
    CODE_STORE_MAGIC, CODE_STORE_VERSION,
};
pub use grid::{emit_grid, render_grid};
pub use images::{load_image_dataset, rgb_to_tensor, to_byte, ImageSet};
pub use synth::{toy_images, toy_scene, write_toy_dataset, ToyScene};

use std::path::Path;

use crate::error::FormatError;
use crate::{Error, Result};

/// Header summary of any file this crate writes.
#[derive(Debug, Clone, PartialEq)]
pub enum FileInfo {
    CodeStore(CodeStoreHeader),
    Checkpoint {
        name: String,
        kind: String,
        step: u64,
        config_hash: String,
        plan: String,
        tensors: usize,
        parameters: usize,
        optimizer: bool,
    },
}

impl std::fmt::Display for FileInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FileInfo::CodeStore(h) => write!(
                f,
                "format=code_store version={} count={} shape=[{},{},{}] dtype=f32le",
                h.version, h.count, h.channels, h.height, h.width
            ),
            FileInfo::Checkpoint { name, kind, step, config_hash, plan, tensors, parameters, optimizer } => write!(
                f,
                "format=checkpoint version={CHECKPOINT_VERSION} name={name} kind={kind} step={step} config_hash={config_hash} \
                 plan={plan} tensors={tensors} parameters={parameters} optimizer={optimizer}"
            ),
        }
    }
}

/// Identify a file by magic and summarize its header, validating it fully.
pub fn inspect(path: &Path) -> Result<FileInfo> {
    let bytes = std::fs::read(path).map_err(Error::io_at(path))?;
    let fail = |kind| Error::format(path, kind);
    match bytes.get(..4) {
        Some(m) if m == CODE_STORE_MAGIC => {
            let header = parse_code_store_header(&bytes).map_err(fail)?;
            CodeStore::from_bytes(&bytes).map_err(fail)?;
            Ok(FileInfo::CodeStore(header))
        }
        Some(m) if m == CHECKPOINT_MAGIC => {
            let ck = Checkpoint::from_bytes(&bytes).map_err(fail)?;
            let p = &ck.plan;
            Ok(FileInfo::Checkpoint {
                name: ck.name.clone(),
                kind: ck.kind.name().to_string(),
                step: ck.step,
                config_hash: ck.config_hash.clone(),
                plan: format!(
                    "R{}/s{}/z{}/w{:?}",
                    p.resolution, p.code_scale, p.noise_dim, p.widths
                )
                .replace(' ', ""),
                tensors: ck.params.len(),
                parameters: ck.params.iter().map(|(_, t)| t.numel()).sum(),
                optimizer: ck.optimizer.is_some(),
            })
        }
        Some(m) => Err(fail(FormatError::BadMagic(m.try_into().expect("4 bytes")))),
        None => Err(fail(FormatError::Truncated("magic"))),
    }
}
