//! Synthetic data with planted, controllable signal: the independent
//! oracle for validating pipeline pass/fail behavior and head
//! attribution.
//!
//! Features follow a Gaussian class-conditional model
//! x = s (2y-1) u + c g + sigma eps, with a fixed unit signal direction
//! u, a fixed unit "closure" direction g shared by both classes and both
//! splits, and isotropic noise. The Bayes separator is linear, so a
//! linear probe succeeds whenever signal exists; pipeline failures are
//! then attributable to the data, not the probe family.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attribution::HeadActivations;
use crate::dataset::{
    assemble_dataset, write_array_file, DatasetError, DatasetManifest, Dtype, LabelRecord,
    LayerFile, ProbeDataset, Split, Tensor,
};
use crate::error::MathError;

/// Planted-signal generator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_fresh: usize,
    pub d: usize,
    pub base_rate_train: f64,
    pub base_rate_fresh: f64,
    /// Signal scale s; 0 plants nothing.
    pub signal_strength: f64,
    /// When false the fresh split omits the signal term (the CV-trap
    /// shift).
    pub signal_in_fresh: bool,
    /// Scale of the closure direction shared by both classes.
    pub closure_strength: f64,
    pub noise_sigma: f64,
    pub n_layers: usize,
    /// Layer index carrying the signal term.
    pub signal_layer: usize,
    /// Extra axes with independent coin-flip labels (no planted signal),
    /// for axis-sweep scenarios.
    pub n_null_axes: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 100,
            n_fresh: 193,
            d: 16,
            base_rate_train: 0.5,
            base_rate_fresh: 0.5,
            signal_strength: 3.0,
            signal_in_fresh: true,
            closure_strength: 1.0,
            noise_sigma: 1.0,
            n_layers: 1,
            signal_layer: 0,
            n_null_axes: 0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), MathError> {
        if self.d < 2 {
            return Err(MathError::input("d must be >= 2"));
        }
        for (name, rate) in [
            ("base_rate_train", self.base_rate_train),
            ("base_rate_fresh", self.base_rate_fresh),
        ] {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(MathError::input(format!("{name} {rate} must lie in (0,1)")));
            }
        }
        if self.n_layers == 0 || self.signal_layer >= self.n_layers {
            return Err(MathError::input(format!(
                "signal_layer {} must be < n_layers {}",
                self.signal_layer, self.n_layers
            )));
        }
        if self.noise_sigma <= 0.0 {
            return Err(MathError::input("noise_sigma must be > 0"));
        }
        if self.signal_strength < 0.0 || self.closure_strength < 0.0 {
            return Err(MathError::input("strengths must be >= 0"));
        }
        Ok(())
    }
}

/// Generated splits: the datasets (features = last layer), all per-layer
/// tensors, and the raw records for writing label files.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train: ProbeDataset,
    pub fresh: ProbeDataset,
    pub train_layers: Vec<Tensor>,
    pub fresh_layers: Vec<Tensor>,
    pub train_records: Vec<LabelRecord>,
    pub fresh_records: Vec<LabelRecord>,
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-9 {
            return v / norm;
        }
    }
}

fn orthogonal_unit(rng: &mut ChaCha8Rng, against: &Array1<f64>) -> Array1<f64> {
    loop {
        let mut v = unit_vector(rng, against.len());
        let proj = v.dot(against);
        v = &v - &(against * proj);
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

struct SplitDraw {
    labels: Vec<u8>,
    null_labels: Vec<Vec<u8>>,
    layers: Vec<Array2<f64>>,
}

fn draw_split(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    n: usize,
    base_rate: f64,
    with_signal: bool,
    u: &Array1<f64>,
    g: &Array1<f64>,
) -> SplitDraw {
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() < base_rate)).collect();
    let null_labels: Vec<Vec<u8>> = (0..cfg.n_null_axes)
        .map(|_| (0..n).map(|_| u8::from(rng.gen::<f64>() < 0.5)).collect())
        .collect();

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for layer in 0..cfg.n_layers {
        let s = if with_signal && layer == cfg.signal_layer {
            cfg.signal_strength
        } else {
            0.0
        };
        let mut x = Array2::<f64>::zeros((n, cfg.d));
        for i in 0..n {
            let sign = if labels[i] == 1 { 1.0 } else { -1.0 };
            for j in 0..cfg.d {
                let eps: f64 = rng.sample(StandardNormal);
                x[[i, j]] =
                    s * sign * u[j] + cfg.closure_strength * g[j] + cfg.noise_sigma * eps;
            }
        }
        layers.push(x);
    }
    SplitDraw {
        labels,
        null_labels,
        layers,
    }
}

fn records_for(
    split: Split,
    prefix: &str,
    draw: &SplitDraw,
) -> Vec<LabelRecord> {
    draw.labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut axes = BTreeMap::new();
            axes.insert("factual".to_string(), y);
            for (k, nulls) in draw.null_labels.iter().enumerate() {
                axes.insert(format!("null-{}", k + 1), nulls[i]);
            }
            LabelRecord {
                id: format!("{prefix}-{i:04}"),
                split,
                coverage: Some(f64::from(y)),
                axis_labels: Some(axes),
                assertive: None,
                model: "synth-a".to_string(),
            }
        })
        .collect()
}

/// Generate train and fresh splits with the configured planted signal.
/// Identical configs (including seed) yield bit-identical data.
pub fn generate_planted(cfg: &SynthConfig) -> Result<SynthOutput, MathError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = unit_vector(&mut rng, cfg.d);
    let g = orthogonal_unit(&mut rng, &u);

    let train_draw = draw_split(
        &mut rng,
        cfg,
        cfg.n_train,
        cfg.base_rate_train,
        true,
        &u,
        &g,
    );
    let fresh_draw = draw_split(
        &mut rng,
        cfg,
        cfg.n_fresh,
        cfg.base_rate_fresh,
        cfg.signal_in_fresh,
        &u,
        &g,
    );

    let to_tensors = |draw: &SplitDraw| -> Result<Vec<Tensor>, MathError> {
        draw.layers
            .iter()
            .map(|x| Tensor::from_array2(x, Dtype::F64).map_err(|e| MathError::input(e.to_string())))
            .collect()
    };
    let train_layers = to_tensors(&train_draw)?;
    let fresh_layers = to_tensors(&fresh_draw)?;
    let train_records = records_for(Split::Train, "train", &train_draw);
    let fresh_records = records_for(Split::Fresh, "fresh", &fresh_draw);

    let train = assemble_dataset(train_layers.last().unwrap().clone(), &train_records)
        .map_err(|e| MathError::input(e.to_string()))?;
    let fresh = assemble_dataset(fresh_layers.last().unwrap().clone(), &fresh_records)
        .map_err(|e| MathError::input(e.to_string()))?;

    Ok(SynthOutput {
        train,
        fresh,
        train_layers,
        fresh_layers,
        train_records,
        fresh_records,
    })
}

/// Head population kinds for the attribution oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Cohort means differ along a free direction with real within-cohort
    /// spread; detectable by both attribution methods.
    Signal,
    /// Large common mean plus a tiny low-variance orthogonal cohort
    /// offset: inflated Cohen's d with nearly collinear cohort means.
    Artifact,
    /// Identical distributions in both cohorts.
    Null,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadSynthConfig {
    pub n: usize,
    pub d_head: usize,
    pub heads: Vec<HeadKind>,
    pub base_rate: f64,
    pub seed: u64,
}

impl Default for HeadSynthConfig {
    fn default() -> Self {
        HeadSynthConfig {
            n: 160,
            d_head: 16,
            heads: vec![
                HeadKind::Signal,
                HeadKind::Artifact,
                HeadKind::Null,
                HeadKind::Null,
                HeadKind::Null,
                HeadKind::Null,
                HeadKind::Null,
                HeadKind::Null,
            ],
            base_rate: 0.5,
            seed: 42,
        }
    }
}

impl HeadSynthConfig {
    pub fn validate(&self) -> Result<(), MathError> {
        if self.heads.is_empty() {
            return Err(MathError::input("at least one head required"));
        }
        if self.d_head < 2 {
            return Err(MathError::input("d_head must be >= 2"));
        }
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return Err(MathError::input("base_rate must lie in (0,1)"));
        }
        if self.n < 8 {
            return Err(MathError::input("n must be >= 8"));
        }
        Ok(())
    }
}

/// Generate a [n, H, d_head] activation block with the configured head
/// populations, drawing correctness labels at the configured base rate.
pub fn generate_head_activations(cfg: &HeadSynthConfig) -> Result<HeadActivations, MathError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<u8> = (0..cfg.n)
        .map(|_| u8::from(rng.gen::<f64>() < cfg.base_rate))
        .collect();
    generate_head_activations_for_labels(cfg, &labels, &mut rng)
}

/// As [`generate_head_activations`] but reusing an existing label vector
/// so the block stays id-aligned with a dataset.
pub fn generate_head_activations_with_labels(
    cfg: &HeadSynthConfig,
    labels: &[u8],
) -> Result<HeadActivations, MathError> {
    cfg.validate()?;
    if labels.len() != cfg.n {
        return Err(MathError::input(format!(
            "{} labels vs configured n = {}",
            labels.len(),
            cfg.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_head_activations_for_labels(cfg, labels, &mut rng)
}

fn generate_head_activations_for_labels(
    cfg: &HeadSynthConfig,
    labels: &[u8],
    rng: &mut ChaCha8Rng,
) -> Result<HeadActivations, MathError> {
    let h = cfg.heads.len();
    let mut acts = Array3::<f64>::zeros((cfg.n, h, cfg.d_head));
    for (head, kind) in cfg.heads.iter().enumerate() {
        match kind {
            HeadKind::Signal => {
                let u = unit_vector(rng, cfg.d_head);
                for i in 0..cfg.n {
                    // wrong responses sit farther out along -u
                    let scale = if labels[i] == 1 { 1.0 } else { -3.0 };
                    for j in 0..cfg.d_head {
                        let eps: f64 = rng.sample(StandardNormal);
                        acts[[i, head, j]] = scale * u[j] + 0.7 * eps;
                    }
                }
            }
            HeadKind::Artifact => {
                let common = unit_vector(rng, cfg.d_head);
                let offset = orthogonal_unit(rng, &common);
                for i in 0..cfg.n {
                    let delta = if labels[i] == 1 { 0.0 } else { 0.04 };
                    for j in 0..cfg.d_head {
                        let eps: f64 = rng.sample(StandardNormal);
                        acts[[i, head, j]] = 10.0 * common[j] + delta * offset[j] + 0.02 * eps;
                    }
                }
            }
            HeadKind::Null => {
                for i in 0..cfg.n {
                    for j in 0..cfg.d_head {
                        let eps: f64 = rng.sample(StandardNormal);
                        acts[[i, head, j]] = eps;
                    }
                }
            }
        }
    }
    HeadActivations::new(acts, labels.to_vec(), None)
}

/// Paths produced by [`write_bundle`].
#[derive(Debug, Clone)]
pub struct BundlePaths {
    pub train_manifest: String,
    pub fresh_manifest: String,
}

/// Write a generated model bundle to disk through the same array and
/// label schemas the pipeline consumes: per-layer npy files, label
/// JSONs, and the two manifests. File names are prefixed so several
/// bundles can share a directory.
pub fn write_bundle(
    dir: &Path,
    prefix: &str,
    cfg: &SynthConfig,
    head_cfg: Option<&HeadSynthConfig>,
) -> Result<BundlePaths, DatasetError> {
    let out = generate_planted(cfg).map_err(|e| DatasetError::Data(e.to_string()))?;
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::Io(e.to_string()))?;

    let write = |name: &str, bytes: &[u8]| -> Result<(), DatasetError> {
        std::fs::write(dir.join(name), bytes)
            .map_err(|e| DatasetError::Io(format!("{name}: {e}")))
    };

    let mut manifests = Vec::new();
    for (split_name, layers, records, labels) in [
        ("train", &out.train_layers, &out.train_records, &out.train),
        ("fresh", &out.fresh_layers, &out.fresh_records, &out.fresh),
    ] {
        let mut layer_files = Vec::new();
        for (idx, tensor) in layers.iter().enumerate() {
            let name = format!("{prefix}_{split_name}_l{idx}.npy");
            write(&name, &write_array_file(tensor))?;
            layer_files.push(LayerFile {
                tag: format!("l{idx}"),
                path: name,
            });
        }
        let labels_name = format!("{prefix}_{split_name}_labels.json");
        let labels_json = serde_json::to_string_pretty(records)
            .map_err(|e| DatasetError::Io(e.to_string()))?;
        write(&labels_name, labels_json.as_bytes())?;

        let head_activation_file = match (split_name, head_cfg) {
            ("train", Some(hc)) => {
                let y = labels
                    .axis_labels("factual")
                    .expect("factual axis always present in synth output");
                let mut hc = hc.clone();
                hc.n = y.len();
                let heads = generate_head_activations_with_labels(&hc, y)
                    .map_err(|e| DatasetError::Data(e.to_string()))?;
                let tensor = Tensor::from_array3(heads.acts(), Dtype::F32)?;
                let name = format!("{prefix}_train_heads.npy");
                write(&name, &write_array_file(&tensor))?;
                Some(name)
            }
            _ => None,
        };

        let manifest = DatasetManifest {
            model: "synth-a".to_string(),
            split: if split_name == "train" {
                Split::Train
            } else {
                Split::Fresh
            },
            layer_files,
            labels_file: labels_name,
            head_activation_file,
        };
        let manifest_name = format!("{prefix}_{split_name}_manifest.json");
        let manifest_json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| DatasetError::Io(e.to_string()))?;
        write(&manifest_name, manifest_json.as_bytes())?;
        manifests.push(manifest_name);
    }

    Ok(BundlePaths {
        train_manifest: manifests[0].clone(),
        fresh_manifest: manifests[1].clone(),
    })
}
