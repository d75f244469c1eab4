//! Container file holding a JSON metadata header and a list of named
//! `FMAT` matrices.
//!
//! Layout (little-endian): magic `SVSC`, u16 version, u16 reserved,
//! u32 metadata length, UTF-8 JSON metadata, u32 entry count, then per entry
//! a u32 name length, the UTF-8 name and a complete `FMAT` blob.

use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::{Dtype, FeatureMatrix};

pub const CONTAINER_MAGIC: &[u8; 4] = b"SVSC";
pub const CONTAINER_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatrices {
    pub metadata: Value,
    pub entries: Vec<(String, FeatureMatrix)>,
}

impl NamedMatrices {
    pub fn new(metadata: Value) -> Self {
        Self {
            metadata,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, m: FeatureMatrix) {
        self.entries.push((name.into(), m));
    }

    pub fn push_vector(&mut self, name: impl Into<String>, v: &[f64]) {
        let m = FeatureMatrix::new(1, v.len(), v.to_vec()).expect("1xn shape");
        self.push(name, m);
    }

    pub fn get(&self, name: &str) -> Result<&FeatureMatrix> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::invalid(format!("container has no matrix named `{name}`")))
    }

    pub fn get_vector(&self, name: &str) -> Result<Vec<f64>> {
        let m = self.get(name)?;
        if m.rows() != 1 {
            return Err(Error::invalid(format!("`{name}` is not a row vector")));
        }
        Ok(m.as_slice().to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.metadata).expect("metadata serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, m) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&m.to_fmat_bytes(Dtype::F64));
        }
        out
    }

    pub fn parse(bytes: &[u8], origin: &str) -> Result<Self> {
        let mut cur = Cursor {
            bytes,
            pos: 0,
            origin,
        };
        if cur.take(4)? != CONTAINER_MAGIC {
            return Err(cur.fail(0, "bad magic, expected SVSC"));
        }
        let version = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        if version != CONTAINER_VERSION {
            return Err(cur.fail(4, &format!("unsupported container version {version}")));
        }
        cur.take(2)?;
        let meta_len = cur.u32()? as usize;
        let meta_at = cur.pos;
        let metadata: Value = serde_json::from_slice(cur.take(meta_len)?)
            .map_err(|e| cur.fail(meta_at, &format!("metadata is not JSON: {e}")))?;
        let count = cur.u32()?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name_at = cur.pos;
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| cur.fail(name_at, "entry name is not UTF-8"))?
                .to_string();
            let (m, used) =
                FeatureMatrix::parse_binary_prefix(&bytes[cur.pos..], origin, cur.pos as u64)?;
            cur.pos += used;
            entries.push((name, m));
        }
        if cur.pos != bytes.len() {
            return Err(cur.fail(cur.pos, "trailing bytes after last entry"));
        }
        Ok(Self { metadata, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), &self.to_bytes())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl<'a> Cursor<'a> {
    fn fail(&self, offset: usize, message: &str) -> Error {
        Error::Format {
            path: self.origin.to_string(),
            offset: offset as u64,
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(self.bytes.len(), "unexpected end of container"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
