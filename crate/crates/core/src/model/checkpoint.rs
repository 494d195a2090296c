//! Checkpoint format: a JSON manifest plus a flat binary file.
//!
//! The binary holds every parameter array as little-endian IEEE-754 `f64`
//! values in row-major order, concatenated in manifest order. The manifest
//! records names, shapes, byte offsets, model dimensions and a SHA-256 of
//! the binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Real;

use super::{Activation, Layer, Model, ModelConfig};

pub const CHECKPOINT_FORMAT: &str = "myoshift-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the binary file.
    pub offset: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub dims: ModelConfig,
    /// `(σ_h, σ_y)` per layer; only present for vanilla RNN stacks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rnn_activations: Vec<(Activation, Activation)>,
    /// Binary file name, relative to the manifest's directory.
    pub binary: String,
    /// Lowercase hex SHA-256 of the binary file.
    pub checksum: String,
    pub params: Vec<ParamEntry>,
}

impl CheckpointManifest {
    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.params.iter().find(|p| p.name == name)
    }
}

fn binary_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes `model`; returns the manifest written to `manifest_path`.
pub fn save_checkpoint<T: Real>(model: &Model<T>, manifest_path: &Path) -> Result<CheckpointManifest> {
    let mut bytes = Vec::new();
    let mut params = Vec::new();
    for p in model.params().visit() {
        params.push(ParamEntry {
            name: p.name,
            shape: p.shape,
            offset: bytes.len(),
            count: p.values.len(),
        });
        for v in p.values {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    let rnn_activations = model
        .params()
        .layers
        .iter()
        .filter_map(|l| match l {
            Layer::Rnn(p) => Some((p.sigma_h, p.sigma_y)),
            Layer::Lstm(_) => None,
        })
        .collect();
    let bin = binary_path(manifest_path);
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        dims: model.config().clone(),
        rnn_activations,
        binary: bin
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        checksum: sha256_hex(&bytes),
        params,
    };
    if let Some(dir) = manifest_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&bin, &bytes)?;
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(manifest_path: &Path) -> Result<CheckpointManifest> {
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path.to_path_buf()));
    }
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    if manifest.format != CHECKPOINT_FORMAT || manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            path: manifest_path.to_path_buf(),
            reason: format!("unsupported checkpoint {} v{}", manifest.format, manifest.version),
        });
    }
    Ok(manifest)
}

/// Loads and verifies a checkpoint, converting to the requested precision.
pub fn load_checkpoint<T: Real>(manifest_path: &Path) -> Result<Model<T>> {
    let manifest = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let bin = dir.join(&manifest.binary);
    if !bin.exists() {
        return Err(Error::MissingFile(bin));
    }
    let bytes = fs::read(&bin)?;
    let found = sha256_hex(&bytes);
    if found != manifest.checksum {
        return Err(Error::Checksum {
            path: bin,
            expected: manifest.checksum,
            found,
        });
    }
    let bad = |reason: String| Error::Format {
        path: manifest_path.to_path_buf(),
        reason,
    };

    let mut model: Model<T> = Model::init(manifest.dims.clone(), 0)?;
    let mut rnn_acts = manifest.rnn_activations.iter();
    for layer in &mut model.params_mut().layers {
        if let Layer::Rnn(p) = layer {
            if let Some(&(h, y)) = rnn_acts.next() {
                p.sigma_h = h;
                p.sigma_y = y;
            }
        }
    }
    let mut expected_offset = 0;
    {
        let slots = model.params_mut().visit_mut();
        if slots.len() != manifest.params.len() {
            return Err(bad(format!(
                "manifest lists {} arrays, model needs {}",
                manifest.params.len(),
                slots.len()
            )));
        }
        for (slot, entry) in slots.into_iter().zip(&manifest.params) {
            if slot.name != entry.name || slot.shape != entry.shape || slot.values.len() != entry.count {
                return Err(bad(format!(
                    "entry {} {:?} does not match expected {} {:?}",
                    entry.name, entry.shape, slot.name, slot.shape
                )));
            }
            if entry.offset != expected_offset {
                return Err(bad(format!("entry {} has offset {}", entry.name, entry.offset)));
            }
            let end = entry.offset + 8 * entry.count;
            let chunk = bytes
                .get(entry.offset..end)
                .ok_or_else(|| bad(format!("binary too short for {}", entry.name)))?;
            for (v, b) in slot.values.iter_mut().zip(chunk.chunks_exact(8)) {
                *v = T::of(f64::from_le_bytes(b.try_into().unwrap()));
            }
            expected_offset = end;
        }
    }
    if expected_offset != bytes.len() {
        return Err(bad(format!(
            "binary holds {} bytes, manifest accounts for {expected_offset}",
            bytes.len()
        )));
    }
    Model::from_parts(manifest.dims, model.params().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, CellKind};

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let m = init_model(4, 8, 3, 2, 9).unwrap();
        let manifest = save_checkpoint(&m, &path).unwrap();
        assert_eq!(manifest.entry("adapt.M").unwrap().shape, vec![4, 4]);
        assert_eq!(manifest.entry("adapt.b").unwrap().offset, 16 * 8);
        let back: Model<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rnn_stack_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rnn.json");
        let cfg = ModelConfig::new(3, 4, 2, 2).with_cell(CellKind::Rnn);
        let m: Model<f64> = Model::init(cfg, 1).unwrap();
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint::<f64>(&path).unwrap(), m);
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        save_checkpoint(&init_model(2, 3, 2, 1, 0).unwrap(), &path).unwrap();
        let bin = path.with_extension("bin");
        let mut bytes = fs::read(&bin).unwrap();
        bytes[3] ^= 0xff;
        fs::write(&bin, bytes).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checksum { .. })));
        fs::remove_file(&bin).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::MissingFile(_))));
    }
}
