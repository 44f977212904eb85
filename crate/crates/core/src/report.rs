//! Deterministic report serialization and plot-data emission.
//!
//! Reports are written as JSON with sorted keys and every float rendered
//! at exactly six decimal places, so identical runs produce identical
//! bytes. Plot data is CSV only; rendering is left to external tools.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::pipeline::{PipelineReport, PlotBundle};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(String),
    #[error("serialization error: {0}")]
    Serialize(String),
    #[error("invalid input: {0}")]
    Input(String),
}

/// Serialize any value to canonical JSON: sorted object keys, 2-space
/// indentation, floats at 6 decimals, non-finite floats as null.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let v = serde_json::to_value(value).map_err(|e| ReportError::Serialize(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    if f.is_finite() {
                        let _ = write!(out, "{f:.6}");
                    } else {
                        out.push_str("null");
                    }
                } else {
                    let _ = write!(out, "{n}");
                }
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", Value::String(s.clone()));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            // serde_json's default map is a BTreeMap: keys arrive sorted
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                let _ = write!(out, "{}: ", Value::String(key.clone()));
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Write the pipeline report to a file with the canonical serialization.
pub fn emit_report(report: &PipelineReport, path: &Path) -> Result<(), ReportError> {
    let text = to_canonical_json(report)?;
    std::fs::write(path, text).map_err(|e| ReportError::Io(format!("{}: {e}", path.display())))
}

/// Plot families the harness emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    AucCollapse,
    AxisSweep,
    PcaScatter,
    AsymCurve,
}

impl std::str::FromStr for PlotKind {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auc_collapse" => Ok(PlotKind::AucCollapse),
            "axis_sweep" => Ok(PlotKind::AxisSweep),
            "pca_scatter" => Ok(PlotKind::PcaScatter),
            "asym_curve" => Ok(PlotKind::AsymCurve),
            other => Err(ReportError::Input(format!(
                "unknown plot kind '{other}' (auc_collapse, axis_sweep, pca_scatter, asym_curve)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
enum Column {
    Str(Vec<String>),
    Num(Vec<f64>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Str(v) => v.len(),
            Column::Num(v) => v.len(),
        }
    }
}

/// Tabular plot data: named columns of equal length plus named constant
/// reference lines (chance, gate) emitted as extra columns.
#[derive(Debug, Clone)]
pub struct PlotData {
    pub kind: PlotKind,
    columns: Vec<(String, Column)>,
    reference_lines: Vec<(String, f64)>,
}

impl PlotData {
    fn validate(self) -> Result<Self, ReportError> {
        let mut lens = self.columns.iter().map(|(_, c)| c.len());
        if let Some(first) = lens.next() {
            if lens.any(|l| l != first) {
                return Err(ReportError::Input("plot columns differ in length".into()));
            }
            if first == 0 {
                return Err(ReportError::Input("plot data has no rows".into()));
            }
        }
        Ok(self)
    }

    /// One row per gated/CV step with its best-C AUC; constant chance and
    /// gate reference columns.
    pub fn auc_collapse(bundle: &PlotBundle) -> Result<Self, ReportError> {
        if bundle.auc_steps.is_empty() {
            return Err(ReportError::Input(
                "no per-step AUCs available for auc_collapse".into(),
            ));
        }
        let steps: Vec<String> = bundle
            .auc_steps
            .iter()
            .map(|(id, _)| {
                serde_json::to_value(id)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default()
            })
            .collect();
        let aucs: Vec<f64> = bundle.auc_steps.iter().map(|(_, a)| *a).collect();
        PlotData {
            kind: PlotKind::AucCollapse,
            columns: vec![
                ("step".into(), Column::Str(steps)),
                ("auc".into(), Column::Num(aucs)),
            ],
            reference_lines: vec![("chance".into(), 0.5), ("gate".into(), bundle.gate_auc)],
        }
        .validate()
    }

    /// One row per axis: within-distribution CV AUC vs fresh transfer AUC.
    pub fn axis_sweep(bundle: &PlotBundle) -> Result<Self, ReportError> {
        if bundle.axis_rows.is_empty() {
            return Err(ReportError::Input(
                "no axis table available for axis_sweep".into(),
            ));
        }
        PlotData {
            kind: PlotKind::AxisSweep,
            columns: vec![
                (
                    "axis".into(),
                    Column::Str(bundle.axis_rows.iter().map(|r| r.axis.clone()).collect()),
                ),
                (
                    "cv_auc".into(),
                    Column::Num(bundle.axis_rows.iter().map(|r| r.cv_auc).collect()),
                ),
                (
                    "transfer_auc".into(),
                    Column::Num(bundle.axis_rows.iter().map(|r| r.transfer_auc).collect()),
                ),
            ],
            reference_lines: vec![("chance".into(), 0.5), ("gate".into(), bundle.gate_auc)],
        }
        .validate()
    }

    /// One row per fresh sample: top-2 principal coordinates and class.
    pub fn pca_scatter(bundle: &PlotBundle) -> Result<Self, ReportError> {
        let (points, labels) = bundle
            .pca
            .as_ref()
            .ok_or_else(|| ReportError::Input("no projection available for pca_scatter".into()))?;
        PlotData {
            kind: PlotKind::PcaScatter,
            columns: vec![
                (
                    "pc1".into(),
                    Column::Num(points.coords.iter().map(|c| c[0]).collect()),
                ),
                (
                    "pc2".into(),
                    Column::Num(points.coords.iter().map(|c| c[1]).collect()),
                ),
                (
                    "class".into(),
                    Column::Num(labels.iter().map(|&y| f64::from(y)).collect()),
                ),
            ],
            reference_lines: Vec::new(),
        }
        .validate()
    }

    /// Threshold sweep of the fresh-step asymmetry.
    pub fn asym_curve(bundle: &PlotBundle) -> Result<Self, ReportError> {
        if bundle.asym_curve.is_empty() {
            return Err(ReportError::Input(
                "no sweep curve available for asym_curve (fresh step not run)".into(),
            ));
        }
        PlotData {
            kind: PlotKind::AsymCurve,
            columns: vec![
                (
                    "threshold".into(),
                    Column::Num(bundle.asym_curve.iter().map(|p| p.threshold).collect()),
                ),
                (
                    "asymmetry".into(),
                    Column::Num(bundle.asym_curve.iter().map(|p| p.asymmetry).collect()),
                ),
            ],
            reference_lines: Vec::new(),
        }
        .validate()
    }

    pub fn for_kind(kind: PlotKind, bundle: &PlotBundle) -> Result<Self, ReportError> {
        match kind {
            PlotKind::AucCollapse => PlotData::auc_collapse(bundle),
            PlotKind::AxisSweep => PlotData::axis_sweep(bundle),
            PlotKind::PcaScatter => PlotData::pca_scatter(bundle),
            PlotKind::AsymCurve => PlotData::asym_curve(bundle),
        }
    }

    /// Render as CSV with a header row; floats at 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let headers: Vec<&str> = self
            .columns
            .iter()
            .map(|(name, _)| name.as_str())
            .chain(self.reference_lines.iter().map(|(name, _)| name.as_str()))
            .collect();
        out.push_str(&headers.join(","));
        out.push('\n');

        let rows = self.columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        for row in 0..rows {
            let mut fields = Vec::with_capacity(headers.len());
            for (_, col) in &self.columns {
                fields.push(match col {
                    Column::Str(v) => csv_escape(&v[row]),
                    Column::Num(v) => format!("{:.6}", v[row]),
                });
            }
            for (_, value) in &self.reference_lines {
                fields.push(format!("{value:.6}"));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Build and write one plot family from the run's plot bundle.
pub fn emit_plot_data(kind: PlotKind, bundle: &PlotBundle, path: &Path) -> Result<(), ReportError> {
    let data = PlotData::for_kind(kind, bundle)?;
    std::fs::write(path, data.to_csv())
        .map_err(|e| ReportError::Io(format!("{}: {e}", path.display())))
}
