//! Per-response label records and their JSON schema.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Which generation split a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Fresh,
}

/// One labeled response: gold-checklist coverage and/or per-axis binary
/// rubric labels, plus the optional assertive/hedged delivery flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub split: Split,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_labels: Option<BTreeMap<String, u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assertive: Option<bool>,
    pub model: String,
}

impl LabelRecord {
    fn validate(&self) -> Result<(), DatasetError> {
        if self.id.is_empty() {
            return Err(DatasetError::Schema("record with empty id".into()));
        }
        if let Some(c) = self.coverage {
            if !(0.0..=1.0).contains(&c) || !c.is_finite() {
                return Err(DatasetError::Schema(format!(
                    "coverage {c} out of [0,1] for id '{}'",
                    self.id
                )));
            }
        }
        if let Some(axes) = &self.axis_labels {
            for (axis, &v) in axes {
                if v > 1 {
                    return Err(DatasetError::Schema(format!(
                        "axis '{axis}' label {v} is not 0/1 for id '{}'",
                        self.id
                    )));
                }
            }
        }
        if self.coverage.is_none() && self.axis_labels.is_none() {
            return Err(DatasetError::Schema(format!(
                "record '{}' has neither coverage nor axis_labels",
                self.id
            )));
        }
        Ok(())
    }
}

/// Parse and validate a labels file (JSON array of records, order preserved).
pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    parse_labels(&text)
}

/// Parse a labels document from memory.
pub fn parse_labels(text: &str) -> Result<Vec<LabelRecord>, DatasetError> {
    let records: Vec<LabelRecord> =
        serde_json::from_str(text).map_err(|e| DatasetError::Schema(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for rec in &records {
        rec.validate()?;
        if !seen.insert(rec.id.clone()) {
            return Err(DatasetError::Schema(format!("duplicate id '{}'", rec.id)));
        }
    }
    Ok(records)
}
