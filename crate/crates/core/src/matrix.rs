//! Dense row-major feature matrices and the `FMAT` on-disk format.
//!
//! Binary layout (little-endian):
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `FMAT`                           |
//! | 4      | 2    | format version (currently 1)           |
//! | 6      | 2    | dtype tag: 4 = f32, 8 = f64            |
//! | 8      | 8    | rows (u64)                             |
//! | 16     | 8    | cols (u64)                             |
//! | 24     | ...  | row-major payload, `rows * cols` items |
//!
//! A plain-text variant is also accepted on load: a first line `rows cols`
//! followed by whitespace-separated decimals.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const FMAT_MAGIC: &[u8; 4] = b"FMAT";
pub const FMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn tag(self) -> u16 {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn width(self) -> usize {
        self.tag() as usize
    }
}

/// Rows of fixed-dimension real vectors, stored row-major in 64-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows. An empty slice yields a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter().copied());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    /// Selects a subset of rows in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn to_fmat_bytes(&self, dtype: Dtype) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * dtype.width());
        out.extend_from_slice(FMAT_MAGIC);
        out.extend_from_slice(&FMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&dtype.tag().to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        match dtype {
            Dtype::F64 => self
                .data
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Dtype::F32 => self
                .data
                .iter()
                .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        }
        out
    }

    /// Parses either the binary or the text variant. `origin` labels errors.
    pub fn parse(bytes: &[u8], origin: &str) -> Result<Self> {
        if bytes.starts_with(FMAT_MAGIC) {
            parse_binary(bytes, origin)
        } else {
            parse_text(bytes, origin)
        }
    }

    /// Parses a binary matrix embedded at the start of `bytes`, returning the
    /// matrix and the number of bytes consumed.
    pub(crate) fn parse_binary_prefix(bytes: &[u8], origin: &str, base: u64) -> Result<(Self, usize)> {
        let fail = |offset: usize, message: String| Error::Format {
            path: origin.to_string(),
            offset: base + offset as u64,
            message,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fail(bytes.len(), "truncated FMAT header".into()));
        }
        if &bytes[0..4] != FMAT_MAGIC {
            return Err(fail(0, "bad magic, expected FMAT".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FMAT_VERSION {
            return Err(fail(4, format!("unsupported FMAT version {version}")));
        }
        let dtype = match u16::from_le_bytes([bytes[6], bytes[7]]) {
            4 => Dtype::F32,
            8 => Dtype::F64,
            t => return Err(fail(6, format!("unknown dtype tag {t}"))),
        };
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let count = rows
            .checked_mul(cols)
            .and_then(|c| usize::try_from(c).ok())
            .ok_or_else(|| fail(8, format!("shape {rows}x{cols} overflows")))?;
        let need = count
            .checked_mul(dtype.width())
            .ok_or_else(|| fail(8, format!("shape {rows}x{cols} overflows")))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < need {
            return Err(fail(
                HEADER_LEN + payload.len(),
                format!(
                    "payload has {} bytes, header declares {rows}x{cols} ({need} bytes)",
                    payload.len()
                ),
            ));
        }
        let mut data = Vec::with_capacity(count);
        for (k, chunk) in payload[..need].chunks_exact(dtype.width()).enumerate() {
            let v = match dtype {
                Dtype::F64 => f64::from_le_bytes(chunk.try_into().unwrap()),
                Dtype::F32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
            };
            if !v.is_finite() {
                return Err(fail(
                    HEADER_LEN + k * dtype.width(),
                    format!("non-finite value {v}"),
                ));
            }
            data.push(v);
        }
        Ok((
            Self {
                rows: rows as usize,
                cols: cols as usize,
                data,
            },
            HEADER_LEN + need,
        ))
    }
}

fn parse_binary(bytes: &[u8], origin: &str) -> Result<FeatureMatrix> {
    let (m, used) = FeatureMatrix::parse_binary_prefix(bytes, origin, 0)?;
    if used != bytes.len() {
        return Err(Error::Format {
            path: origin.to_string(),
            offset: used as u64,
            message: format!("{} trailing bytes after payload", bytes.len() - used),
        });
    }
    Ok(m)
}

fn parse_text(bytes: &[u8], origin: &str) -> Result<FeatureMatrix> {
    let fail = |offset: usize, message: String| Error::Format {
        path: origin.to_string(),
        offset: offset as u64,
        message,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| fail(e.valid_up_to(), "not FMAT binary and not UTF-8 text".into()))?;
    let mut tokens = text
        .split_ascii_whitespace()
        .map(|t| (t.as_ptr() as usize - text.as_ptr() as usize, t));
    let mut dim = |name: &str| -> Result<usize> {
        let (off, tok) = tokens
            .next()
            .ok_or_else(|| fail(text.len(), format!("missing {name} in header")))?;
        tok.parse::<usize>()
            .map_err(|_| fail(off, format!("bad {name} `{tok}`")))
    };
    let rows = dim("rows")?;
    let cols = dim("cols")?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| fail(0, format!("shape {rows}x{cols} overflows")))?;
    let mut data = Vec::with_capacity(count);
    for (off, tok) in tokens {
        if data.len() == count {
            return Err(fail(off, format!("more than {count} values for {rows}x{cols}")));
        }
        let v: f64 = tok
            .parse()
            .map_err(|_| fail(off, format!("bad number `{tok}`")))?;
        if !v.is_finite() {
            return Err(fail(off, format!("non-finite value `{tok}`")));
        }
        data.push(v);
    }
    if data.len() != count {
        return Err(fail(
            text.len(),
            format!("expected {count} values for {rows}x{cols}, found {}", data.len()),
        ));
    }
    Ok(FeatureMatrix { rows, cols, data })
}

/// Reads a feature matrix file in either supported variant.
pub fn load_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureMatrix::parse(&bytes, &path.display().to_string())
}

pub fn save_feature_matrix(path: impl AsRef<Path>, m: &FeatureMatrix, dtype: Dtype) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), &m.to_fmat_bytes(dtype))
}
