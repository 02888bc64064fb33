//! Named parameter tensors and their on-disk checkpoint format.
//!
//! Checkpoints are JSON with a schema version, a `kind` string identifying
//! which model wrote them, a free-form header for model configuration, and
//! the tensors in row-major order. Floats survive a save/load round trip
//! bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Named collection of 2-d parameter tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, value: Array2<f64>) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::validation(format!("parameter {name} already exists")));
        }
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    /// Glorot-uniform initialization, the default for weight matrices.
    pub fn insert_xavier<R: Rng>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<()> {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let value = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit));
        self.insert(name, value)
    }

    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<()> {
        let value = Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi));
        self.insert(name, value)
    }

    pub fn insert_zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<()> {
        self.insert(name, Array2::zeros((rows, cols)))
    }

    pub fn get(&self, name: &str) -> Result<&Array2<f64>> {
        self.params
            .get(name)
            .ok_or_else(|| Error::validation(format!("unknown parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array2<f64>> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::validation(format!("unknown parameter {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|v| v.len()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct TensorData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    kind: String,
    header: serde_json::Value,
    params: BTreeMap<String, TensorData>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

pub fn save_checkpoint(
    path: &Path,
    kind: &str,
    header: &serde_json::Value,
    store: &ParamStore,
) -> Result<()> {
    let params = store
        .iter()
        .map(|(name, value)| {
            let (rows, cols) = value.dim();
            let data = value.iter().copied().collect();
            (name.to_string(), TensorData { rows, cols, data })
        })
        .collect();
    let file = CheckpointFile {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        kind: kind.to_string(),
        header: header.clone(),
        params,
    };
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Loads a checkpoint, checking schema version and `kind` before the
/// tensors. Returns the header alongside the parameters.
pub fn load_checkpoint(path: &Path, expected_kind: &str) -> Result<(serde_json::Value, ParamStore)> {
    let text = std::fs::read_to_string(path)?;
    let probe: VersionProbe = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint {}: {e}", path.display())))?;
    if probe.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: probe.schema_version,
            expected: CHECKPOINT_SCHEMA_VERSION,
        });
    }
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.kind != expected_kind {
        return Err(Error::Checkpoint(format!(
            "checkpoint kind is {:?}, expected {:?}",
            file.kind, expected_kind
        )));
    }
    let mut store = ParamStore::new();
    for (name, tensor) in file.params {
        if tensor.data.len() != tensor.rows * tensor.cols {
            return Err(Error::Checkpoint(format!(
                "tensor {name} claims {}x{} but holds {} values",
                tensor.rows,
                tensor.cols,
                tensor.data.len()
            )));
        }
        let value = Array2::from_shape_vec((tensor.rows, tensor.cols), tensor.data)
            .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
        store.insert(&name, value)?;
    }
    Ok((file.header, store))
}
