//! Dataset ingestion: the npy array format, label/manifest schemas, and
//! id-aligned probe dataset assembly.

mod labels;
mod tensor;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use labels::{load_labels, parse_labels, LabelRecord, Split};
pub use tensor::{parse_array_file, write_array_file, Dtype, Tensor};

/// Axis name reserved for the coverage-derived correctness label.
pub const FACTUAL_AXIS: &str = "factual";

/// Coverage threshold defining a correct response.
pub const COVERAGE_TAU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Names the cached artifacts of one (model, split): per-layer feature
/// files in order (last entry is the final-layer h_last features), the
/// labels file, and optionally a per-head activation block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub model: String,
    pub split: Split,
    pub layer_files: Vec<LayerFile>,
    pub labels_file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_activation_file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFile {
    pub tag: String,
    pub path: String,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.layer_files.is_empty() {
            return Err(DatasetError::Schema(
                "manifest needs at least one layer file".into(),
            ));
        }
        let mut tags = BTreeSet::new();
        for lf in &self.layer_files {
            if !tags.insert(&lf.tag) {
                return Err(DatasetError::Schema(format!(
                    "duplicate layer tag '{}'",
                    lf.tag
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| DatasetError::Schema(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Resolve a manifest-relative path against the manifest's directory.
fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// An id-aligned feature/label set for one (model, split).
///
/// Row `i` of `features` belongs to `ids[i]`; assembly rejects any
/// misalignment rather than reordering.
#[derive(Debug, Clone)]
pub struct ProbeDataset {
    pub features: Tensor,
    pub ids: Vec<String>,
    pub labels_per_axis: BTreeMap<String, Vec<u8>>,
    pub coverage: Vec<Option<f64>>,
    pub n: usize,
    pub d: usize,
}

impl ProbeDataset {
    /// Labels for one axis, if every record carries it.
    pub fn axis_labels(&self, axis: &str) -> Option<&[u8]> {
        self.labels_per_axis.get(axis).map(|v| v.as_slice())
    }

    pub fn axes(&self) -> Vec<String> {
        self.labels_per_axis.keys().cloned().collect()
    }
}

/// Assemble a validated, id-aligned dataset from parsed features and
/// label records.
///
/// Axis label lists are built for every axis present in all records. If
/// every record has coverage and no explicit `factual` axis exists, a
/// `factual` axis is derived as coverage >= 0.5.
pub fn assemble_dataset(
    features: Tensor,
    records: &[LabelRecord],
) -> Result<ProbeDataset, DatasetError> {
    if features.ndim() != 2 {
        return Err(DatasetError::Data(format!(
            "features must be [n, d], got shape {:?}",
            features.shape()
        )));
    }
    let n = features.shape()[0];
    let d = features.shape()[1];
    if n != records.len() {
        return Err(DatasetError::Alignment(format!(
            "{} feature rows vs {} label records",
            n,
            records.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for rec in records {
        if !seen.insert(&rec.id) {
            return Err(DatasetError::Alignment(format!("duplicate id '{}'", rec.id)));
        }
    }
    // Tensor construction already rejects NaN/Inf; re-check to keep this
    // entry point safe for tensors built by other code paths.
    if let Some(v) = features.data().iter().find(|v| !v.is_finite()) {
        return Err(DatasetError::Data(format!("non-finite feature value {v}")));
    }

    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let coverage: Vec<Option<f64>> = records.iter().map(|r| r.coverage).collect();

    // axes carried by every record
    let mut common_axes: Option<BTreeSet<String>> = None;
    for rec in records {
        let axes: BTreeSet<String> = rec
            .axis_labels
            .as_ref()
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default();
        common_axes = Some(match common_axes {
            None => axes,
            Some(prev) => prev.intersection(&axes).cloned().collect(),
        });
    }
    let mut labels_per_axis = BTreeMap::new();
    for axis in common_axes.unwrap_or_default() {
        let labels: Vec<u8> = records
            .iter()
            .map(|r| r.axis_labels.as_ref().unwrap()[&axis])
            .collect();
        labels_per_axis.insert(axis, labels);
    }
    if !labels_per_axis.contains_key(FACTUAL_AXIS) && coverage.iter().all(|c| c.is_some()) && n > 0
    {
        let labels: Vec<u8> = coverage
            .iter()
            .map(|c| u8::from(c.unwrap() >= COVERAGE_TAU))
            .collect();
        labels_per_axis.insert(FACTUAL_AXIS.to_string(), labels);
    }

    Ok(ProbeDataset {
        features,
        ids,
        labels_per_axis,
        coverage,
        n,
        d,
    })
}

/// Everything a manifest names, loaded and aligned: the assembled dataset
/// (features = last layer), all per-layer tensors, and the optional head
/// activation block.
#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub manifest: DatasetManifest,
    pub dataset: ProbeDataset,
    pub layer_tensors: Vec<Tensor>,
    pub records: Vec<LabelRecord>,
    pub head_activations: Option<Tensor>,
}

/// Load a manifest and everything it references.
pub fn load_split(manifest_path: &Path) -> Result<LoadedSplit, DatasetError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let records = load_labels(&resolve(base, &manifest.labels_file))?;

    let mut layer_tensors = Vec::with_capacity(manifest.layer_files.len());
    for lf in &manifest.layer_files {
        let path = resolve(base, &lf.path);
        let bytes = std::fs::read(&path)
            .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
        let tensor = parse_array_file(&bytes)?;
        if tensor.ndim() != 2 {
            return Err(DatasetError::Data(format!(
                "layer '{}' is {}-D, expected [n, d]",
                lf.tag,
                tensor.ndim()
            )));
        }
        layer_tensors.push(tensor);
    }
    let first_shape = layer_tensors[0].shape().to_vec();
    for (lf, t) in manifest.layer_files.iter().zip(&layer_tensors) {
        if t.shape() != first_shape.as_slice() {
            return Err(DatasetError::Alignment(format!(
                "layer '{}' shape {:?} differs from {:?}",
                lf.tag,
                t.shape(),
                first_shape
            )));
        }
    }

    let head_activations = match &manifest.head_activation_file {
        Some(rel) => {
            let path = resolve(base, rel);
            let bytes = std::fs::read(&path)
                .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
            let tensor = parse_array_file(&bytes)?;
            if tensor.ndim() != 3 {
                return Err(DatasetError::Data(format!(
                    "head activations are {}-D, expected [n, heads, d_head]",
                    tensor.ndim()
                )));
            }
            if tensor.shape()[0] != records.len() {
                return Err(DatasetError::Alignment(format!(
                    "{} head-activation rows vs {} label records",
                    tensor.shape()[0],
                    records.len()
                )));
            }
            Some(tensor)
        }
        None => None,
    };

    let features = layer_tensors.last().unwrap().clone();
    let dataset = assemble_dataset(features, &records)?;

    Ok(LoadedSplit {
        manifest,
        dataset,
        layer_tensors,
        records,
        head_activations,
    })
}
