//! `LACK` checkpoints: one network's parameters and optimizer state.
//!
//! Layout (little-endian): magic `LACK`, u16 version, u8 network kind,
//! name, plan (u32 resolution, u16 code scale, u16 code channels, u32 noise
//! dim, u16 width count, u32 widths), config hash, u64 step, u32 tensor count,
//! then per tensor its name, u8 rank, u32 dims and f32 values; a u8 optimizer
//! flag followed, when set, by the u64 optimizer step and every first then
//! every second moment. Strings are a u16 byte length plus UTF-8. A SHA-256 of
//! everything before it closes the file.

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian as LE, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::error::FormatError;
use crate::networks::{ArchPlan, NetworkKind, NetworkParams};
use crate::numerics::Tensor;
use crate::training::AdamState;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LACK";
pub const CHECKPOINT_VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub name: String,
    pub kind: NetworkKind,
    pub plan: ArchPlan,
    pub config_hash: String,
    pub step: u64,
    pub params: Vec<(String, Tensor<f32>)>,
    pub optimizer: Option<AdamState<f32>>,
}

impl Checkpoint {
    pub fn new(
        net: &NetworkParams<f32>,
        optimizer: Option<&AdamState<f32>>,
        step: u64,
        config_hash: &str,
    ) -> Self {
        Self {
            name: net.kind().name().to_string(),
            kind: net.kind(),
            plan: net.plan().clone(),
            config_hash: config_hash.to_string(),
            step,
            params: net
                .params()
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
            optimizer: optimizer.cloned(),
        }
    }

    /// Parameters rebuilt under `plan`; a plan the tensors do not fit is a shape error.
    pub fn network(&self, plan: &ArchPlan) -> Result<NetworkParams<f32>> {
        let net = NetworkParams::from_named(self.kind, plan, self.params.clone())?;
        if let Some(opt) = &self.optimizer {
            opt.matches(&net)?;
        }
        Ok(net)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.write_u16::<LE>(CHECKPOINT_VERSION)?;
        out.write_u8(self.kind.tag())?;
        write_str(&mut out, &self.name)?;
        let p = &self.plan;
        out.write_u32::<LE>(to_u32(p.resolution)?)?;
        out.write_u16::<LE>(to_u16(p.code_scale)?)?;
        out.write_u16::<LE>(to_u16(p.code_channels)?)?;
        out.write_u32::<LE>(to_u32(p.noise_dim)?)?;
        out.write_u16::<LE>(to_u16(p.widths.len())?)?;
        for &w in &p.widths {
            out.write_u32::<LE>(to_u32(w)?)?;
        }
        write_str(&mut out, &self.config_hash)?;
        out.write_u64::<LE>(self.step)?;
        out.write_u32::<LE>(to_u32(self.params.len())?)?;
        for (name, t) in &self.params {
            write_str(&mut out, name)?;
            out.write_u8(
                u8::try_from(t.rank())
                    .map_err(|_| Error::Invalid("tensor rank too large".into()))?,
            )?;
            for &d in t.shape() {
                out.write_u32::<LE>(to_u32(d)?)?;
            }
            write_f32s(&mut out, t.data())?;
        }
        match &self.optimizer {
            None => out.write_u8(0)?,
            Some(opt) => {
                if opt.m.len() != self.params.len() || opt.v.len() != self.params.len() {
                    return Err(Error::Invalid(
                        "optimizer state does not match parameter count".into(),
                    ));
                }
                out.write_u8(1)?;
                out.write_u64::<LE>(opt.step)?;
                for t in opt.m.iter().chain(&opt.v) {
                    write_f32s(&mut out, t.data())?;
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 4 {
            return Err(FormatError::Truncated("magic"));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != CHECKPOINT_MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        if bytes.len() < 6 {
            return Err(FormatError::Truncated("version"));
        }
        let version = LE::read_u16(&bytes[4..6]);
        if version > CHECKPOINT_VERSION {
            return Err(FormatError::FutureVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 6 + DIGEST_LEN {
            return Err(FormatError::Truncated("checksum"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(FormatError::Corrupt("checksum mismatch".into()));
        }
        let mut r = Reader {
            bytes: body,
            pos: 6,
        };
        let tag = r.u8("kind")?;
        let kind = NetworkKind::from_tag(tag)
            .ok_or_else(|| FormatError::Corrupt(format!("unknown network kind {tag}")))?;
        let name = r.string("name")?;
        let resolution = r.u32("plan")? as usize;
        let code_scale = r.u16("plan")? as usize;
        let code_channels = r.u16("plan")? as usize;
        let noise_dim = r.u32("plan")? as usize;
        let n_widths = r.u16("plan")? as usize;
        let widths = (0..n_widths)
            .map(|_| r.u32("plan").map(|w| w as usize))
            .collect::<Result<_, _>>()?;
        let plan = ArchPlan {
            resolution,
            code_scale,
            code_channels,
            noise_dim,
            widths,
        };
        let config_hash = r.string("config hash")?;
        let step = r.u64("step")?;
        let n_params = r.u32("tensor count")? as usize;
        let mut params = Vec::with_capacity(n_params.min(4096));
        for _ in 0..n_params {
            let name = r.string("tensor name")?;
            let rank = r.u8("tensor rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u32("tensor shape").map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let data = r.f32s(shape.iter().product(), "tensor data")?;
            let t = Tensor::new(shape, data)
                .map_err(|e| FormatError::Corrupt(format!("tensor {name}: {e}")))?;
            params.push((name, t));
        }
        let optimizer = match r.u8("optimizer flag")? {
            0 => None,
            1 => {
                let step = r.u64("optimizer step")?;
                let mut read_all =
                    |what| -> Result<Vec<Tensor<f32>>, FormatError> {
                        params
                            .iter()
                            .map(|(_, p)| {
                                let data = r.f32s(p.numel(), what)?;
                                Ok(Tensor::new(p.shape().to_vec(), data)
                                    .expect("shape from parameter"))
                            })
                            .collect()
                    };
                let m = read_all("optimizer first moments")?;
                let v = read_all("optimizer second moments")?;
                Some(AdamState { step, m, v })
            }
            f => return Err(FormatError::Corrupt(format!("optimizer flag {f}"))),
        };
        if r.pos != body.len() {
            return Err(FormatError::Corrupt(format!(
                "{} trailing bytes",
                body.len() - r.pos
            )));
        }
        Ok(Self {
            name,
            kind,
            plan,
            config_hash,
            step,
            params,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        // Write-then-rename so an interrupted save never clobbers the last good file.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(Error::io_at(path))?;
        Self::from_bytes(&bytes).map_err(|kind| Error::format(path, kind))
    }
}

/// Read a checkpoint, requiring its config hash to equal `expected` unless
/// `allow_mismatch` is set (then a warning is logged).
pub fn load_checkpoint(
    path: &Path,
    expected: Option<&str>,
    allow_mismatch: bool,
) -> Result<Checkpoint> {
    let ck = Checkpoint::read(path)?;
    if let Some(expected) = expected {
        if ck.config_hash != expected {
            if !allow_mismatch {
                return Err(Error::HashMismatch {
                    found: ck.config_hash,
                    expected: expected.to_string(),
                });
            }
            log::warn!(
                "{}: config hash {} differs from current {expected}; loading anyway",
                path.display(),
                ck.config_hash
            );
        }
    }
    Ok(ck)
}

fn to_u16(v: usize) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::Invalid(format!("{v} does not fit in 16 bits")))
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Invalid(format!("{v} does not fit in 32 bits")))
}

fn write_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    out.write_u16::<LE>(to_u16(s.len())?)?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn write_f32s(out: &mut Vec<u8>, data: &[f32]) -> Result<()> {
    for &v in data {
        out.write_f32::<LE>(v)?;
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(FormatError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, FormatError> {
        Ok(LE::read_u16(self.take(2, what)?))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(LE::read_u32(self.take(4, what)?))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        Ok(LE::read_u64(self.take(8, what)?))
    }

    fn string(&mut self, what: &'static str) -> Result<String, FormatError> {
        let n = self.u16(what)? as usize;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| FormatError::Corrupt(format!("{what} is not UTF-8")))
    }

    fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>, FormatError> {
        let raw = self.take(n.checked_mul(4).ok_or(FormatError::Truncated(what))?, what)?;
        let mut out = vec![0f32; n];
        LE::read_f32_into(raw, &mut out);
        Ok(out)
    }
}
