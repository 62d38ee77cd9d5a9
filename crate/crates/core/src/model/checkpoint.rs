//! CRN1 checkpoint files.
//!
//! ```text
//! b"CRN1" | version: u32 = 1 | json_len: u32 | json (UTF-8)
//!        | tensor_count: u32
//!        | per tensor: name_len: u32 | name | rank: u32 | dims: u32 * rank | f32 * prod(dims)
//! ```
//!
//! All integers and floats are little-endian. The JSON block holds the model
//! config, class names and the number of completed epochs. Tensors are the
//! trainable parameters, the batch-norm running statistics and one
//! `adagrad.<name>` accumulator per parameter.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::crnn::{BUFFER_NAMES, PARAM_NAMES};
use crate::model::{CrnnConfig, CrnnModel};
use crate::tensor::Tensor;

pub const CRN1_MAGIC: &[u8; 4] = b"CRN1";
pub const CRN1_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: CrnnConfig,
    class_names: Vec<String>,
    #[serde(default)]
    epochs_trained: usize,
}

fn push_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn named_tensors(model: &CrnnModel) -> Vec<(String, &Tensor)> {
    let mut out: Vec<(String, &Tensor)> = PARAM_NAMES
        .iter()
        .map(|n| n.to_string())
        .zip(model.params())
        .collect();
    out.extend(
        BUFFER_NAMES
            .iter()
            .map(|n| n.to_string())
            .zip(model.buffers()),
    );
    out.extend(
        PARAM_NAMES
            .iter()
            .map(|n| format!("adagrad.{n}"))
            .zip(model.optimizer_state().iter().map(|s| &s.accumulator)),
    );
    out
}

pub fn encode_checkpoint(model: &CrnnModel) -> Result<Vec<u8>> {
    let header = Header {
        config: model.config().clone(),
        class_names: model.class_names().to_vec(),
        epochs_trained: model.epochs_trained,
    };
    let json = serde_json::to_vec(&header)?;
    let tensors = named_tensors(model);

    let mut out = Vec::new();
    out.extend_from_slice(CRN1_MAGIC);
    out.extend_from_slice(&CRN1_VERSION.to_le_bytes());
    push_u32(&mut out, json.len(), "config length")?;
    out.extend_from_slice(&json);
    push_u32(&mut out, tensors.len(), "tensor count")?;
    for (name, t) in tensors {
        push_u32(&mut out, name.len(), "name length")?;
        out.extend_from_slice(name.as_bytes());
        push_u32(&mut out, t.rank(), "rank")?;
        for &d in t.shape() {
            push_u32(&mut out, d, "dimension")?;
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "truncated checkpoint while reading {what} at byte {}",
                self.pos
            )));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CrnnModel> {
    if bytes.len() < 4 || &bytes[..4] != CRN1_MAGIC {
        return Err(Error::Format("missing CRN1 magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != CRN1_VERSION as usize {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}, expected {CRN1_VERSION}"
        )));
    }
    let json_len = r.u32("config length")?;
    let json = r.take(json_len, "config block")?;
    let header: Header = serde_json::from_slice(json)
        .map_err(|e| Error::Format(format!("checkpoint config block: {e}")))?;
    let mut model = CrnnModel::zeroed(header.config)?;
    model.set_class_names(header.class_names)?;
    model.epochs_trained = header.epochs_trained;

    let expected: Vec<(String, Vec<usize>)> = named_tensors(&model)
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    let count = r.u32("tensor count")?;
    if count != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {count} tensors, expected {}",
            expected.len()
        )));
    }

    let mut loaded = Vec::with_capacity(count);
    for (want_name, want_shape) in &expected {
        let name_len = r.u32("tensor name length")?;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        if name != want_name {
            return Err(Error::Format(format!(
                "expected tensor {want_name:?}, found {name:?}"
            )));
        }
        let rank = r.u32("tensor rank")?;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u32("tensor dimension")?);
        }
        if &shape != want_shape {
            return Err(Error::Format(format!(
                "tensor {name:?} has shape {shape:?}, config implies {want_shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        let payload = r.take(n * 4, "tensor payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        loaded.push(Tensor::from_vec(&shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} trailing bytes",
            bytes.len() - r.pos
        )));
    }

    let mut it = loaded.into_iter();
    for p in model.params_mut() {
        *p = it.next().expect("counted");
    }
    for b in model.buffers_mut() {
        *b = it.next().expect("counted");
    }
    for s in model.optimizer_state_mut() {
        s.accumulator = it.next().expect("counted");
    }
    Ok(model)
}

pub fn save_checkpoint(model: &CrnnModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_checkpoint(model)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<CrnnModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn toy() -> CrnnModel {
        let mut c = CrnnConfig::new(20, 2, 4);
        c.conv_filters = 4;
        c.conv_kernel = 5;
        c.pool_size = 2;
        c.lstm_units = 3;
        CrnnModel::build(c, &mut Rng::new(9)).unwrap()
    }

    #[test]
    fn round_trip_restores_everything() {
        let mut m = toy();
        m.set_class_names(vec!["a".into(), "b".into(), "c".into(), "d".into()])
            .unwrap();
        m.optimizer_state_mut()[0].accumulator = m.params()[0].map(|v| v * v);
        m.batchnorm.running_mean = m.batchnorm.running_mean.map(|_| 0.25);
        let bytes = encode_checkpoint(&m).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.config(), m.config());
        assert_eq!(back.class_names(), m.class_names());
        for (a, b) in back.params().iter().zip(m.params()) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-6);
        }
        assert_eq!(back.batchnorm.running_mean.data()[0], 0.25);
        let acc = &back.optimizer_state()[0].accumulator;
        assert!(
            acc.max_abs_diff(&m.optimizer_state()[0].accumulator)
                .unwrap()
                < 1e-6
        );
        // f32 storage is idempotent after one round
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_checkpoint(&toy()).unwrap();

        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(decode_checkpoint(&bad)
            .unwrap_err()
            .to_string()
            .contains("magic"));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(decode_checkpoint(&bad)
            .unwrap_err()
            .to_string()
            .contains("version"));

        let err = decode_checkpoint(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let json_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count_at = 12 + json_len;
        let mut bad = bytes.clone();
        bad[count_at] += 1;
        assert!(decode_checkpoint(&bad)
            .unwrap_err()
            .to_string()
            .contains("tensors"));

        let mut bad = bytes.clone();
        bad.push(0);
        assert!(decode_checkpoint(&bad).is_err());
    }
}
