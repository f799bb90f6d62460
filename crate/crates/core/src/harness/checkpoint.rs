//! Checkpoint files: a sectioned binary of named tensors (each section in
//! the flat tensor format) plus a JSON manifest mapping
//! `name -> {shape, dtype, offset, len}` alongside run metadata. The
//! manifest lives next to the binary with `.json` appended.

use std::collections::BTreeMap;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::HarnessError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset of this tensor's section in the binary.
    pub offset: u64,
    /// Section length in bytes.
    pub len: u64,
}

/// Run state stored in the manifest; everything needed to resume a
/// training session bit-exactly (together with the tensors).
#[derive(Serialize, Deserialize, Clone, Debug, Default)]
pub struct CheckpointMeta {
    pub step: u64,
    pub round_index: usize,
    pub adam_t: u64,
    pub rng_state: Vec<u64>,
    /// Cached per-point supervision losses `(frame, camera) -> losses`,
    /// used by the round-2 refiltering.
    #[serde(default)]
    pub point_losses: Vec<(usize, usize, Vec<f64>)>,
    #[serde(default)]
    pub dtype: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    meta: CheckpointMeta,
    tensors: BTreeMap<String, TensorEntry>,
    /// Section order (BTreeMap loses insertion order).
    order: Vec<String>,
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Writes tensors in the given order plus the manifest.
pub fn save<S: Scalar>(
    path: &Path,
    tensors: &[(String, Tensor<S>)],
    meta: &CheckpointMeta,
) -> Result<(), HarnessError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut entries = BTreeMap::new();
    let mut order = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, tensor) in tensors {
        let len = tensor.saved_len() as u64;
        let mut section = Vec::with_capacity(len as usize);
        tensor
            .save(&mut section)
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        file.write_all(&section)?;
        entries.insert(
            name.clone(),
            TensorEntry {
                shape: tensor.shape().to_vec(),
                dtype: S::DTYPE.to_string(),
                offset,
                len,
            },
        );
        order.push(name.clone());
        offset += len;
    }
    let mut meta = meta.clone();
    meta.dtype = S::DTYPE.to_string();
    let manifest = Manifest { meta, tensors: entries, order };
    std::fs::write(
        manifest_path(path),
        serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Io(e.to_string()))?,
    )?;
    Ok(())
}

/// Loads every tensor section and the metadata.
pub fn load<S: Scalar>(
    path: &Path,
) -> Result<(Vec<(String, Tensor<S>)>, CheckpointMeta), HarnessError> {
    let manifest_text = std::fs::read_to_string(manifest_path(path))
        .map_err(|e| HarnessError::Io(format!("{}: {e}", manifest_path(path).display())))?;
    let manifest: Manifest =
        serde_json::from_str(&manifest_text).map_err(|e| HarnessError::Io(e.to_string()))?;
    let mut file = std::fs::File::open(path)?;
    let mut tensors = Vec::with_capacity(manifest.order.len());
    for name in &manifest.order {
        let entry = manifest
            .tensors
            .get(name)
            .ok_or_else(|| HarnessError::Io(format!("manifest missing entry {name}")))?;
        file.seek(SeekFrom::Start(entry.offset))?;
        let mut section = vec![0u8; entry.len as usize];
        file.read_exact(&mut section)?;
        let tensor =
            Tensor::<S>::load(&mut section.as_slice()).map_err(|e| HarnessError::Io(e.to_string()))?;
        if tensor.shape() != entry.shape.as_slice() {
            return Err(HarnessError::Io(format!(
                "checkpoint entry {name}: shape {:?} vs manifest {:?}",
                tensor.shape(),
                entry.shape
            )));
        }
        tensors.push((name.clone(), tensor));
    }
    Ok((tensors, manifest.meta))
}
