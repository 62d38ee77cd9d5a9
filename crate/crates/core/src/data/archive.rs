//! On-disk window sets: a directory holding `manifest.json` plus one VIB1
//! file per class with that class's windows stacked end to end in time.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::signal::{decode_vib1, encode_vib1, SignalMatrix};
use crate::data::{assemble, window, WindowSet};
use crate::error::{Error, Result};
use crate::io::{create_dir_all, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub class_names: Vec<String>,
    pub window_len: usize,
    pub channels: usize,
    pub num_samples: usize,
    pub class_counts: Vec<usize>,
    pub sample_rate_hz: f64,
    pub seed: u64,
    pub files: Vec<String>,
}

fn class_file(index: usize) -> String {
    format!("class_{index:02}.vib1")
}

pub fn save_archive(
    ws: &WindowSet,
    dir: &Path,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<Manifest> {
    create_dir_all(dir)?;
    let (t, c) = (ws.window_len(), ws.channels());
    let mut files = Vec::new();
    for class in 0..ws.num_classes() {
        let samples = ws.class_samples(class).map_err(|_| {
            Error::InvalidArgument(format!(
                "class {:?} has no windows",
                ws.class_names()[class]
            ))
        })?;
        let rows = samples.shape()[0] * t;
        let m = SignalMatrix::new(rows, c, samples.into_data(), sample_rate_hz)?;
        let name = class_file(class);
        write_atomic(&dir.join(&name), &encode_vib1(&m)?)?;
        files.push(name);
    }
    let manifest = Manifest {
        class_names: ws.class_names().to_vec(),
        window_len: t,
        channels: c,
        num_samples: ws.len(),
        class_counts: ws.class_counts(),
        sample_rate_hz,
        seed,
        files,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn load_archive(dir: &Path) -> Result<(WindowSet, Manifest)> {
    let manifest = read_manifest(dir)?;
    if manifest.files.len() != manifest.class_names.len() {
        return Err(Error::Format(format!(
            "manifest lists {} files for {} classes",
            manifest.files.len(),
            manifest.class_names.len()
        )));
    }
    let mut classes = Vec::new();
    for (name, file) in manifest.class_names.iter().zip(&manifest.files) {
        let path = dir.join(file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let m = decode_vib1(&bytes)?;
        if m.cols() != manifest.channels || m.rows() % manifest.window_len != 0 {
            return Err(Error::Format(format!(
                "{}: {}x{} does not hold whole {}x{} windows",
                path.display(),
                m.rows(),
                m.cols(),
                manifest.window_len,
                manifest.channels
            )));
        }
        classes.push((name.clone(), window(&m, manifest.window_len)?));
    }
    let ws = assemble(classes)?;
    if ws.len() != manifest.num_samples {
        return Err(Error::Format(format!(
            "manifest declares {} samples, files hold {}",
            manifest.num_samples,
            ws.len()
        )));
    }
    Ok((ws, manifest))
}
