//! Dense sentence embeddings and the `SCSE` binary container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   "SCSE"            4 bytes
//! version u32 = 1
//! dim     u32
//! count   u64
//! count × { id_len u16, id bytes (UTF-8), dim × f32 }
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::store::corpus::validate_id;

pub const MAGIC: &[u8; 4] = b"SCSE";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// Id-indexed row-major `f32` embeddings.
///
/// Every row is finite with a nonzero norm; squared row norms are cached in `f64`.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    values: Vec<f32>,
    sq_norms: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be at least 1".into()));
        }
        if values.len() != ids.len() * dim {
            return Err(Error::Shape(format!(
                "{} ids × dim {} needs {} values, got {}",
                ids.len(),
                dim,
                ids.len() * dim,
                values.len()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            validate_id(id).map_err(Error::Validation)?;
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::Validation(format!("duplicate embedding id {id:?}")));
            }
        }
        let mut sq_norms = Vec::with_capacity(ids.len());
        for (row, chunk) in values.chunks_exact(dim).enumerate() {
            if let Some(v) = chunk.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "embedding {:?} has non-finite value {v}",
                    ids[row]
                )));
            }
            let n = crate::geometry::sq_norm(chunk);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::Validation(format!(
                    "embedding {:?} has zero norm",
                    ids[row]
                )));
            }
            sq_norms.push(n);
        }
        Ok(EmbeddingMatrix {
            ids,
            dim,
            values,
            sq_norms,
            index,
        })
    }

    /// Builds a matrix from one vector per id.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut dim = None;
        for (id, row) in rows {
            let id = id.into();
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::Shape(format!(
                        "row {id:?} has length {}, expected {d}",
                        row.len()
                    )))
                }
                Some(_) => {}
            }
            ids.push(id);
            values.extend_from_slice(&row);
        }
        Self::new(ids, dim.unwrap_or(0), values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.values[row * self.dim..(row + 1) * self.dim]
    }

    pub fn norm(&self, row: usize) -> f64 {
        self.sq_norms[row].sqrt()
    }

    pub(crate) fn sq_norm(&self, row: usize) -> f64 {
        self.sq_norms[row]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|r| self.row(r))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Row index of `id`, or a validation error naming it.
    pub fn require(&self, id: &str) -> Result<usize> {
        self.position(id)
            .ok_or_else(|| Error::Validation(format!("sentence {id:?} has no embedding")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = u32::try_from(self.dim)
            .map_err(|_| Error::Validation(format!("dimension {} exceeds u32", self.dim)))?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4 + self.ids.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (row, id) in self.ids.iter().enumerate() {
            let id_len = u16::try_from(id.len()).map_err(|_| {
                Error::Validation(format!("id {id:?} is longer than {} bytes", u16::MAX))
            })?;
            out.extend_from_slice(&id_len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for v in self.row(row) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            let got = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
            return Err(Error::Format(format!("bad magic {got:?}, expected \"SCSE\"")));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated(format!(
                "header needs {HEADER_LEN} bytes, file has {}",
                bytes.len()
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        if dim == 0 {
            return Err(Error::Format("header declares dimension 0".into()));
        }

        let mut cursor = Cursor {
            bytes,
            pos: HEADER_LEN,
        };
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for record in 0..count {
            let id_len = u16::from_le_bytes(cursor.take(2, record, count)?.try_into().unwrap());
            let id_bytes = cursor.take(id_len as usize, record, count)?;
            let id = std::str::from_utf8(id_bytes)
                .map_err(|e| Error::Format(format!("record {record}: id is not UTF-8: {e}")))?
                .to_owned();
            let payload = cursor.take(dim * 4, record, count)?;
            values.extend(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
            );
            ids.push(id);
        }
        if cursor.pos != bytes.len() {
            return Err(Error::Truncated(format!(
                "header declares {count} records of dim {dim}, but {} bytes remain after them",
                bytes.len() - cursor.pos
            )));
        }
        Self::new(ids, dim, values)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, record: u64, count: u64) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Truncated(format!(
                "header declares {count} records, payload ends inside record {record}"
            ))),
        }
    }
}

pub fn write_embeddings(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes)
}
