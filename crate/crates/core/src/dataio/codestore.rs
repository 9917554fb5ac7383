//! `LACC` latent-code store.
//!
//! ```text
//! offset size
//! 0      4    magic "LACC"
//! 4      2    version (u16)
//! 6      4    count (u32)
//! 10     2    channels (u16, always 16)
//! 12     2    height (u16)
//! 14     2    width (u16)
//! 16     2    element type (u16, 1 = f32)
//! 18     ...  count * channels * height * width f32 values
//! ```
//! All integers and floats are little-endian.

use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian as LE, WriteBytesExt};

use crate::error::FormatError;
use crate::networks::{LatentCodes, CODE_CHANNELS};
use crate::numerics::Tensor;
use crate::{Error, Result};

pub const CODE_STORE_MAGIC: [u8; 4] = *b"LACC";
pub const CODE_STORE_VERSION: u16 = 1;
pub const CODE_STORE_HEADER_LEN: usize = 18;
const DTYPE_F32: u16 = 1;

/// Latent codes of one dataset, all of shape `[16, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeStore {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// Header fields of a code store file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeStoreHeader {
    pub version: u16,
    pub count: u32,
    pub channels: u16,
    pub height: u16,
    pub width: u16,
}

impl CodeStore {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: Vec::new(),
        }
    }

    pub fn from_codes(codes: &LatentCodes<f32>) -> Self {
        let [_, h, w] = codes.code_shape();
        Self {
            height: h,
            width: w,
            data: codes.tensor().data().to_vec(),
        }
    }

    pub fn push(&mut self, codes: &LatentCodes<f32>) -> Result<()> {
        let [_, h, w] = codes.code_shape();
        if (h, w) != (self.height, self.width) {
            return Err(Error::shape(format!(
                "store holds {}x{} codes, got {h}x{w}",
                self.height, self.width
            )));
        }
        self.data.extend_from_slice(codes.tensor().data());
        Ok(())
    }

    fn per_code(&self) -> usize {
        CODE_CHANNELS * self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.per_code()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `[16, h, w]`.
    pub fn code_shape(&self) -> [usize; 3] {
        [CODE_CHANNELS, self.height, self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Codes at `indices`, stacked to `[k, 16, h, w]`.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let per = self.per_code();
        let mut out = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Invalid(format!(
                    "code index {i} out of range for {} codes",
                    self.len()
                )));
            }
            out.extend_from_slice(&self.data[i * per..(i + 1) * per]);
        }
        Tensor::new(
            vec![indices.len(), CODE_CHANNELS, self.height, self.width],
            out,
        )
    }

    pub fn all(&self) -> Result<LatentCodes<f32>> {
        LatentCodes::new(self.batch(&(0..self.len()).collect::<Vec<_>>())?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let narrow = |v: usize, what: &str| -> Result<u16> {
            u16::try_from(v).map_err(|_| {
                Error::Invalid(format!("code {what} {v} does not fit the store header"))
            })
        };
        let count = u32::try_from(self.len())
            .map_err(|_| Error::Invalid("too many codes for one store".into()))?;
        let mut out = Vec::with_capacity(CODE_STORE_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&CODE_STORE_MAGIC);
        out.write_u16::<LE>(CODE_STORE_VERSION)?;
        out.write_u32::<LE>(count)?;
        out.write_u16::<LE>(CODE_CHANNELS as u16)?;
        out.write_u16::<LE>(narrow(self.height, "height")?)?;
        out.write_u16::<LE>(narrow(self.width, "width")?)?;
        out.write_u16::<LE>(DTYPE_F32)?;
        for &v in &self.data {
            out.write_f32::<LE>(v)?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path).map_err(Error::io_at(path))?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(Error::io_at(path))?;
        Self::from_bytes(&bytes).map_err(|kind| Error::format(path, kind))
    }

    /// Validate header, length and value range before building the store.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let header = parse_header(bytes)?;
        let (h, w) = (header.height as usize, header.width as usize);
        let values = header.count as usize * CODE_CHANNELS * h * w;
        let expected = (CODE_STORE_HEADER_LEN + values * 4) as u64;
        if bytes.len() as u64 != expected {
            return Err(FormatError::Length {
                expected,
                actual: bytes.len() as u64,
            });
        }
        let mut data = vec![0f32; values];
        LE::read_f32_into(&bytes[CODE_STORE_HEADER_LEN..], &mut data);
        if let Some(i) = data.iter().position(|v| !(v.abs() <= 1.0)) {
            return Err(FormatError::Corrupt(format!(
                "value {} at element {i} is outside [-1, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height: h,
            width: w,
            data,
        })
    }
}

/// Header of a code store, validated up to (not including) the payload length.
pub fn parse_header(bytes: &[u8]) -> Result<CodeStoreHeader, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated("magic"));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != CODE_STORE_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes.len() < 6 {
        return Err(FormatError::Truncated("version"));
    }
    let version = LE::read_u16(&bytes[4..6]);
    if version > CODE_STORE_VERSION {
        return Err(FormatError::FutureVersion {
            found: version,
            supported: CODE_STORE_VERSION,
        });
    }
    if version == 0 {
        return Err(FormatError::Corrupt("version 0".into()));
    }
    if bytes.len() < CODE_STORE_HEADER_LEN {
        return Err(FormatError::Truncated("header"));
    }
    let header = CodeStoreHeader {
        version,
        count: LE::read_u32(&bytes[6..10]),
        channels: LE::read_u16(&bytes[10..12]),
        height: LE::read_u16(&bytes[12..14]),
        width: LE::read_u16(&bytes[14..16]),
    };
    if header.channels as usize != CODE_CHANNELS {
        return Err(FormatError::Corrupt(format!(
            "{} channels, expected {CODE_CHANNELS}",
            header.channels
        )));
    }
    let dtype = LE::read_u16(&bytes[16..18]);
    if dtype != DTYPE_F32 {
        return Err(FormatError::Corrupt(format!(
            "unknown element type {dtype}"
        )));
    }
    if header.height == 0 || header.width == 0 {
        return Err(FormatError::Corrupt("zero code size".into()));
    }
    Ok(header)
}
