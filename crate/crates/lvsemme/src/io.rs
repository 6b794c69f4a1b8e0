//! File formats: model documents (JSON with weight literals preserved),
//! matrix and observability tables (TSV), data tables, groupings and reports.

use crate::generate::DataTable;
use crate::mixing::{ColInfo, MixingMatrix, RowInfo, DEFAULT_TOL};
use crate::model::{CanonicalModel, Edge, MeasurementPair, VarId, Variable, Weight};
use crate::recovery::RecoveredModel;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad table: {0}")]
    Table(String),
    #[error("unknown row label {0}")]
    UnknownRow(String),
}

#[derive(Serialize, Deserialize)]
struct EdgeRepr {
    src: VarId,
    dst: VarId,
    weight: serde_json::Number,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    variables: Vec<Variable>,
    edges: Vec<EdgeRepr>,
    measurements: Vec<MeasurementPair>,
}

/// Serializes a model; edge weights loaded from a file keep their original
/// decimal text, programmatic weights use the shortest round-trip form.
pub fn model_to_json(model: &CanonicalModel) -> Result<String, IoError> {
    let edges = model
        .edges
        .iter()
        .map(|e| {
            let text = match &e.weight.text {
                Some(t) => t.clone(),
                None => format_f64(e.weight.value),
            };
            let weight = serde_json::Number::from_str(&text)
                .unwrap_or_else(|_| serde_json::Number::from_f64(e.weight.value).expect("finite"));
            EdgeRepr { src: e.src, dst: e.dst, weight }
        })
        .collect();
    let repr = ModelRepr {
        variables: model.variables.clone(),
        edges,
        measurements: model.measurements.clone(),
    };
    Ok(serde_json::to_string_pretty(&repr)?)
}

pub fn model_from_json(text: &str) -> Result<CanonicalModel, IoError> {
    let repr: ModelRepr = serde_json::from_str(text)?;
    let edges = repr
        .edges
        .into_iter()
        .map(|e| {
            let text = e.weight.to_string();
            let value = e.weight.as_f64().unwrap_or(f64::NAN);
            Edge { src: e.src, dst: e.dst, weight: Weight { value, text: Some(text) } }
        })
        .collect();
    Ok(CanonicalModel {
        variables: repr.variables,
        edges,
        measurements: repr.measurements,
    })
}

pub fn save_model(path: &Path, model: &CanonicalModel) -> Result<(), IoError> {
    Ok(std::fs::write(path, model_to_json(model)? + "\n")?)
}

pub fn load_model(path: &Path) -> Result<CanonicalModel, IoError> {
    model_from_json(&std::fs::read_to_string(path)?)
}

fn format_f64(v: f64) -> String {
    // keep integral values as JSON-valid decimals
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// Matrix as tab-separated text: header of column labels, one labeled row per
/// line.
pub fn matrix_to_tsv(w: &MixingMatrix) -> String {
    let mut out = String::new();
    out.push('.');
    for c in &w.cols {
        out.push('\t');
        out.push_str(&c.label);
    }
    out.push('\n');
    for (i, r) in w.rows.iter().enumerate() {
        out.push_str(&r.label);
        for j in 0..w.ncols() {
            out.push('\t');
            out.push_str(&format!("{}", w.values[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Parses a matrix table; observability defaults to measured until an
/// observability table is applied.
pub fn matrix_from_tsv(text: &str) -> Result<MixingMatrix, IoError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| IoError::Table("empty matrix file".into()))?;
    let cols: Vec<ColInfo> = header
        .split('\t')
        .skip(1)
        .map(|label| ColInfo { label: label.to_string(), noise_of: None })
        .collect();
    let mut rows = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    for line in lines {
        let mut fields = line.split('\t');
        let label = fields.next().unwrap_or_default().to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| IoError::Table(format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != cols.len() {
            return Err(IoError::Table(format!(
                "row {label} has {} cells, expected {}",
                values.len(),
                cols.len()
            )));
        }
        rows.push(RowInfo { label, variable: None, observed: false });
        data.extend(values);
    }
    let values = nalgebra::DMatrix::from_row_slice(rows.len(), cols.len(), &data);
    Ok(MixingMatrix { values, rows, cols, tol: DEFAULT_TOL })
}

/// Observability sidecar: one `label<TAB>observed|measured` line per row.
pub fn observability_to_tsv(w: &MixingMatrix) -> String {
    w.rows
        .iter()
        .map(|r| format!("{}\t{}\n", r.label, if r.observed { "observed" } else { "measured" }))
        .collect()
}

pub fn apply_observability(w: &mut MixingMatrix, text: &str) -> Result<(), IoError> {
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (label, flag) = line
            .split_once('\t')
            .ok_or_else(|| IoError::Table(format!("bad observability line {line:?}")))?;
        let idx = w
            .row_index_of_label(label)
            .ok_or_else(|| IoError::UnknownRow(label.to_string()))?;
        w.rows[idx].observed = match flag.trim() {
            "observed" => true,
            "measured" => false,
            other => return Err(IoError::Table(format!("bad observability flag {other:?}"))),
        };
    }
    Ok(())
}

pub fn table_to_tsv(table: &DataTable) -> String {
    let mut out = table.columns.join("\t");
    out.push('\n');
    for row in &table.rows {
        out.push_str(
            &row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join("\t"),
        );
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Blocks {
    latent_to_mleaf: Vec<Vec<f64>>,
    latent_to_cogent: Vec<Vec<f64>>,
    cogent_to_cogent: Vec<Vec<f64>>,
    cogent_to_mleaf: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct RecoveredModelRepr<'a> {
    centers: &'a [crate::recovery::CenterChoice],
    mleaf_rows: &'a [usize],
    latent_cols: &'a [usize],
    rows: &'a [RowInfo],
    blocks: Blocks,
    edge_count: usize,
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn recovered_model_to_json(model: &RecoveredModel, tol: f64) -> Result<String, IoError> {
    let repr = RecoveredModelRepr {
        centers: &model.centers,
        mleaf_rows: &model.mleaf_rows,
        latent_cols: &model.latent_cols,
        rows: &model.rows,
        blocks: Blocks {
            latent_to_mleaf: matrix_rows(&model.latent_to_mleaf),
            latent_to_cogent: matrix_rows(&model.latent_to_cogent),
            cogent_to_cogent: matrix_rows(&model.cogent_to_cogent),
            cogent_to_mleaf: matrix_rows(&model.cogent_to_mleaf),
        },
        edge_count: model.edge_count(tol),
    };
    Ok(serde_json::to_string_pretty(&repr)?)
}
