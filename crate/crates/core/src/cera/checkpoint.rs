//! Model checkpoint format, all little-endian:
//!
//! ```text
//! magic        4 bytes  "CERA"
//! version      u32      1
//! d            u32
//! variant      u8       0 = CeRA, 1 = CeRAI
//! positions    u32      rows in the positional table
//! meta_len     u32, then meta_len bytes of UTF-8 (free-form, usually JSON)
//! n_tensors    u32
//! per tensor:  u16 name_len, name, u8 ndim, ndim × u32 dims, f32 values
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::params::{CeraParams, Variant};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CERA";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: CeraParams,
    pub meta: String,
}

impl Checkpoint {
    /// Checks the variant and dimension a caller expects.
    pub fn expect(self, variant: Variant, dim: usize) -> Result<CeraParams> {
        if self.params.variant() != variant {
            return Err(Error::VariantMismatch {
                expected: variant.to_string(),
                found: self.params.variant().to_string(),
            });
        }
        if self.params.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.params.dim,
                context: "checkpoint".into(),
            });
        }
        Ok(self.params)
    }
}

pub fn checkpoint_bytes(params: &CeraParams, meta: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.dim as u32).to_le_bytes());
    out.push(match params.variant() {
        Variant::Cera => 0,
        Variant::Cerai => 1,
    });
    out.extend_from_slice(&(params.n_positions as u32).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    let names = params.names();
    out.extend_from_slice(&(names.len() as u32).to_le_bytes());
    for ((name, shape), data) in names.iter().zip(params.shapes()).zip(params.slices()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for dim in shape {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &CeraParams, meta: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_bytes(params, meta)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptCheckpoint("truncated file".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptCheckpoint(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let variant = match r.u8()? {
        0 => Variant::Cera,
        1 => Variant::Cerai,
        f => return Err(Error::CorruptCheckpoint(format!("unknown variant flag {f}"))),
    };
    let n_positions = r.u32()? as usize;
    if dim == 0 || n_positions == 0 {
        return Err(Error::CorruptCheckpoint("zero-sized model".into()));
    }
    let meta_len = r.u32()? as usize;
    let meta = String::from_utf8(r.take(meta_len)?.to_vec())
        .map_err(|_| Error::CorruptCheckpoint("metadata is not UTF-8".into()))?;

    // the layout is fixed by (d, positions, variant); fill a template
    let mut params = CeraParams::init(dim, n_positions, variant, &mut ChaCha8Rng::seed_from_u64(0));
    let names = params.names();
    let shapes = params.shapes();
    let count = r.u32()? as usize;
    if count != names.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "expected {} tensors, found {count}",
            names.len()
        )));
    }
    for ((name, shape), slot) in names.iter().zip(&shapes).zip(params.slices_mut()) {
        let len = r.u16()? as usize;
        let found = r.take(len)?;
        if found != name.as_bytes() {
            return Err(Error::CorruptCheckpoint(format!(
                "expected tensor {name}, found {}",
                String::from_utf8_lossy(found)
            )));
        }
        let ndim = r.u8()? as usize;
        let dims = (0..ndim)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if &dims != shape {
            return Err(Error::CorruptCheckpoint(format!(
                "tensor {name} has shape {dims:?}, expected {shape:?}"
            )));
        }
        let raw = r.take(slot.len() * 4)?;
        for (v, c) in slot.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f64::from(f32::from_le_bytes(c.try_into().unwrap()));
        }
    }
    if r.at != bytes.len() {
        return Err(Error::CorruptCheckpoint("trailing bytes".into()));
    }
    if !params.is_finite() {
        return Err(Error::CorruptCheckpoint("non-finite parameter".into()));
    }
    Ok(Checkpoint { params, meta })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}
