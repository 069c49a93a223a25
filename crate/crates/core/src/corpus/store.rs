//! Binary embedding store.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "CEMB"
//! version u32      1
//! d       u32
//! count   u64
//! rows    count * d f32, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const STORE_MAGIC: [u8; 4] = *b"CEMB";
pub const STORE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Appends a row and returns its index. Values are narrowed to f32.
    pub fn push(&mut self, row: &[f64]) -> Result<usize> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
                context: "embedding store row".into(),
            });
        }
        if row.iter().any(|v| !(*v as f32).is_finite()) {
            return Err(Error::NonFinite(format!("embedding row {}", self.len())));
        }
        let index = self.len();
        self.data.extend(row.iter().map(|&v| v as f32));
        Ok(index)
    }

    pub fn row(&self, index: usize) -> Result<&[f32]> {
        if index >= self.len() {
            return Err(Error::DanglingRow {
                row: index,
                count: self.len(),
            });
        }
        Ok(&self.data[index * self.dim..(index + 1) * self.dim])
    }

    pub fn row_f64(&self, index: usize) -> Result<Vec<f64>> {
        Ok(self.row(index)?.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_reader(mut reader: impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        reader
            .read_exact(&mut header)
            .map_err(|_| Error::CorruptStore("truncated header".into()))?;
        if header[..4] != STORE_MAGIC {
            return Err(Error::CorruptStore("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != STORE_VERSION {
            return Err(Error::CorruptStore(format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
        if dim == 0 && count > 0 {
            return Err(Error::CorruptStore("zero dimension".into()));
        }
        let n_values = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(dim))
            .ok_or_else(|| Error::CorruptStore("row count overflow".into()))?;
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| Error::CorruptStore(e.to_string()))?;
        if bytes.len() != n_values * 4 {
            return Err(Error::CorruptStore(format!(
                "expected {} payload bytes, found {}",
                n_values * 4,
                bytes.len()
            )));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding row {}", i / dim)));
        }
        Ok(EmbeddingStore { dim, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let mut store = EmbeddingStore::new(2);
        store.push(&[1.0, -0.5]).unwrap();
        let bytes = store.to_bytes();
        let mut expected = b"CEMB".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-0.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(EmbeddingStore::from_reader(&bytes[..]).unwrap(), store);
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let mut store = EmbeddingStore::new(3);
        store.push(&[1.0, 2.0, 3.0]).unwrap();
        let bytes = store.to_bytes();
        assert!(EmbeddingStore::from_reader(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(EmbeddingStore::from_reader(&bad[..]).is_err());
    }

    #[test]
    fn rejects_non_finite_rows() {
        let mut bytes = EmbeddingStore::new(1).to_bytes();
        bytes[12] = 1;
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            EmbeddingStore::from_reader(&bytes[..]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn dangling_row() {
        let store = EmbeddingStore::new(4);
        assert!(matches!(store.row(0), Err(Error::DanglingRow { .. })));
    }
}
