//! Raw multichannel vibration recordings and their on-disk formats.
//!
//! Text files hold one time step per line, with fields separated either by
//! runs of spaces/tabs or by single commas; blank lines and lines starting
//! with `#` are skipped.
//!
//! VIB1 binary layout (all little-endian):
//!
//! ```text
//! b"VIB1" | rows: u32 | cols: u32 | sample_rate_hz: f32 | rows*cols f32, row-major
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const VIB1_MAGIC: &[u8; 4] = b"VIB1";
const VIB1_HEADER_LEN: usize = 16;

/// Sample rate recorded for text sources, which carry none.
pub const UNKNOWN_SAMPLE_RATE_HZ: f64 = 1.0;

/// `rows` time steps by `cols` channels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub sample_rate_hz: f64,
    pub source: Option<PathBuf>,
    pub label: Option<String>,
}

impl SignalMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "signal must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} signal needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(SignalMatrix {
            rows,
            cols,
            data,
            sample_rate_hz,
            source: None,
            label: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(c).step_by(self.cols).copied()
    }

    /// Stacks recordings end to end in time. Channel counts must agree; the
    /// first recording's sample rate is kept.
    pub fn concat(parts: &[SignalMatrix]) -> Result<SignalMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != first.cols {
                return Err(Error::Shape(format!(
                    "cannot concatenate {}-channel and {}-channel recordings",
                    first.cols, p.cols
                )));
            }
            rows += p.rows;
            data.extend_from_slice(&p.data);
        }
        SignalMatrix::new(rows, first.cols, data, first.sample_rate_hz)
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses delimited numeric text. `path` is only used in error messages.
pub fn parse_text_matrix(text: &str, path: &Path) -> Result<SignalMatrix> {
    let mut cols = None;
    let mut rows = 0;
    let mut data = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        for field in &fields {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("non-numeric field {field:?}")))?;
            data.push(v);
        }
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("ragged row: expected {c} fields, found {}", fields.len()),
                ));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_error(path, 0, "file contains no data rows"))?;
    let mut m = SignalMatrix::new(rows, cols, data, UNKNOWN_SAMPLE_RATE_HZ)?;
    m.source = Some(path.to_path_buf());
    Ok(m)
}

pub fn load_text_matrix(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text_matrix(&text, path)
}

pub fn encode_vib1(m: &SignalMatrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows)
        .map_err(|_| Error::Format(format!("{} rows exceed the VIB1 u32 limit", m.rows)))?;
    let cols = u32::try_from(m.cols)
        .map_err(|_| Error::Format(format!("{} columns exceed the VIB1 u32 limit", m.cols)))?;
    let mut out = Vec::with_capacity(VIB1_HEADER_LEN + 4 * m.data.len());
    out.extend_from_slice(VIB1_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&(m.sample_rate_hz as f32).to_le_bytes());
    for &v in &m.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_vib1(bytes: &[u8]) -> Result<SignalMatrix> {
    if bytes.len() < 4 || &bytes[..4] != VIB1_MAGIC {
        return Err(Error::Format("missing VIB1 magic".into()));
    }
    if bytes.len() < VIB1_HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated VIB1 header: {} bytes",
            bytes.len()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let rows = u32_at(4) as usize;
    let cols = u32_at(8) as usize;
    let rate = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let count = rows
        .checked_mul(cols)
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::Format(format!("VIB1 dimensions {rows}x{cols} overflow")))?;
    let payload = &bytes[VIB1_HEADER_LEN..];
    if payload.len() < count * 4 {
        return Err(Error::Format(format!(
            "truncated VIB1 payload: header declares {rows}x{cols} = {count} values, found {}",
            payload.len() / 4
        )));
    }
    if payload.len() > count * 4 {
        return Err(Error::Format(format!(
            "VIB1 payload has {} trailing bytes",
            payload.len() - count * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    SignalMatrix::new(rows, cols, data, f64::from(rate)).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_binary_matrix(m: &SignalMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_vib1(m)?)
}

pub fn load_binary_matrix(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut m = decode_vib1(&bytes)?;
    m.source = Some(path.to_path_buf());
    Ok(m)
}

/// Loads a VIB1 file if it starts with the magic bytes, text otherwise.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut m = if bytes.starts_with(VIB1_MAGIC) {
        decode_vib1(&bytes)?
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| parse_error(path, 0, "file is neither VIB1 nor UTF-8 text"))?;
        parse_text_matrix(&text, path)?
    };
    m.source = Some(path.to_path_buf());
    Ok(m)
}
