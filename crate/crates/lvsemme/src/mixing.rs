//! Mixing matrices: construction from a model, measurement-column stripping,
//! support patterns, and comparison up to column permutation and scaling.
//!
//! The core matrix `W*` maps the exogenous noises of confounders and cogent
//! variables to the underlying observables, rows ordered [mleafs; measured
//! cogents; observed]. The full matrix `W` appends one one-hot column per
//! measured row for its measurement error.

use crate::model::{CanonicalModel, ModelError, VarId};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for support and scale decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Row metadata: the observable label, the underlying variable when known,
/// and whether the row is observed without error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowInfo {
    pub label: String,
    pub variable: Option<VarId>,
    pub observed: bool,
}

/// Column metadata: a label and, in ground-truth mode, whose noise it is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColInfo {
    pub label: String,
    pub noise_of: Option<VarId>,
}

/// A labeled-row, possibly anonymous-column real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub values: DMatrix<f64>,
    pub rows: Vec<RowInfo>,
    pub cols: Vec<ColInfo>,
    pub tol: f64,
}

/// Boolean support of a matrix with marginal counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportPattern {
    pub mask: Vec<Vec<bool>>,
    pub row_counts: Vec<usize>,
    pub col_counts: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MixingError {
    #[error("matrix shapes do not match: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("row labels do not match")]
    RowLabelMismatch,
    #[error("measured row {0} has no one-hot column to strip")]
    MeasuredRowWithoutOneHot(usize),
    #[error("column {0} is zero within tolerance")]
    ZeroColumn(usize),
    #[error("cogent block is singular")]
    Singular,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Outcome of stripping measurement-error columns.
#[derive(Debug, Clone)]
pub struct StripOutcome {
    pub matrix: MixingMatrix,
    /// Original indices of the removed columns, one per measured row.
    pub removed: Vec<usize>,
    /// Measured rows for which several one-hot columns qualified, with the
    /// full candidate list; the lowest-index column was removed.
    pub ambiguities: Vec<(usize, Vec<usize>)>,
}

impl MixingMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_index_of_label(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.label == label)
    }

    pub fn row_index_of_variable(&self, v: VarId) -> Option<usize> {
        self.rows.iter().position(|r| r.variable == Some(v))
    }

    pub fn col_index_of_noise(&self, v: VarId) -> Option<usize> {
        self.cols.iter().position(|c| c.noise_of == Some(v))
    }

    /// Support of one column under this matrix's tolerance.
    pub fn col_support(&self, j: usize) -> Vec<usize> {
        (0..self.nrows()).filter(|&i| self.values[(i, j)].abs() > self.tol).collect()
    }

    /// Support of one row under this matrix's tolerance.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        (0..self.ncols()).filter(|&j| self.values[(i, j)].abs() > self.tol).collect()
    }
}

/// Per-cogent-variable parameter blocks of a model, in the fixed orders
/// cogent = [measured cogents; observed], mleaf and latent = declaration
/// order. Row index is the target, column index the source.
pub(crate) struct ParamBlocks {
    pub cogent_order: Vec<VarId>,
    pub mleaf_order: Vec<VarId>,
    pub latent_order: Vec<VarId>,
    /// C: cogent → cogent.
    pub cogent_to_cogent: DMatrix<f64>,
    /// B^C: latent → cogent.
    pub latent_to_cogent: DMatrix<f64>,
    /// B^L: latent → mleaf.
    pub latent_to_mleaf: DMatrix<f64>,
    /// D: cogent → mleaf.
    pub cogent_to_mleaf: DMatrix<f64>,
}

pub(crate) fn param_blocks(model: &CanonicalModel) -> ParamBlocks {
    let cogent_order = model.cogents();
    let mleaf_order = model.mleafs();
    let latent_order = model.latents();
    let pc = cogent_order.len();
    let pml = mleaf_order.len();
    let ph = latent_order.len();
    let pos = |order: &[VarId], v: VarId| order.iter().position(|&u| u == v);
    let mut cogent_to_cogent = DMatrix::zeros(pc, pc);
    let mut latent_to_cogent = DMatrix::zeros(pc, ph);
    let mut latent_to_mleaf = DMatrix::zeros(pml, ph);
    let mut cogent_to_mleaf = DMatrix::zeros(pml, pc);
    for e in &model.edges {
        let w = e.weight.value;
        if let Some(i) = pos(&cogent_order, e.dst) {
            if let Some(j) = pos(&cogent_order, e.src) {
                cogent_to_cogent[(i, j)] = w;
            } else if let Some(j) = pos(&latent_order, e.src) {
                latent_to_cogent[(i, j)] = w;
            }
        } else if let Some(i) = pos(&mleaf_order, e.dst) {
            if let Some(j) = pos(&cogent_order, e.src) {
                cogent_to_mleaf[(i, j)] = w;
            } else if let Some(j) = pos(&latent_order, e.src) {
                latent_to_mleaf[(i, j)] = w;
            }
        }
    }
    ParamBlocks {
        cogent_order,
        mleaf_order,
        latent_order,
        cogent_to_cogent,
        latent_to_cogent,
        latent_to_mleaf,
        cogent_to_mleaf,
    }
}

/// Assembles the mixing matrix from parameter blocks:
/// rows [mleaf; cogent], columns [latent noises; cogent noises].
pub(crate) fn assemble_w_star(blocks: &ParamBlocks) -> Result<DMatrix<f64>, MixingError> {
    let pc = blocks.cogent_order.len();
    let pml = blocks.mleaf_order.len();
    let ph = blocks.latent_order.len();
    let eye = DMatrix::<f64>::identity(pc, pc);
    let inv = (&eye - &blocks.cogent_to_cogent)
        .try_inverse()
        .ok_or(MixingError::Singular)?;
    let top_left = &blocks.latent_to_mleaf + &blocks.cogent_to_mleaf * &inv * &blocks.latent_to_cogent;
    let top_right = &blocks.cogent_to_mleaf * &inv;
    let bottom_left = &inv * &blocks.latent_to_cogent;
    let mut w = DMatrix::zeros(pml + pc, ph + pc);
    w.view_mut((0, 0), (pml, ph)).copy_from(&top_left);
    w.view_mut((0, ph), (pml, pc)).copy_from(&top_right);
    w.view_mut((pml, 0), (pc, ph)).copy_from(&bottom_left);
    w.view_mut((pml, ph), (pc, pc)).copy_from(&inv);
    Ok(w)
}

fn row_infos(model: &CanonicalModel, blocks: &ParamBlocks) -> Result<Vec<RowInfo>, ModelError> {
    let mut rows = Vec::new();
    for &z in blocks.mleaf_order.iter().chain(&blocks.cogent_order) {
        let observed = !model.variables[z.0].kind.is_measured();
        rows.push(RowInfo {
            label: model.observable_name(z)?.to_string(),
            variable: Some(z),
            observed,
        });
    }
    Ok(rows)
}

/// The mixing matrix without measurement-error columns (the input shape the
/// recovery algorithms expect). Rows are labeled by the observable.
pub fn build_w_star(model: &CanonicalModel) -> Result<MixingMatrix, MixingError> {
    let blocks = param_blocks(model);
    let values = assemble_w_star(&blocks)?;
    let rows = row_infos(model, &blocks)?;
    let mut cols = Vec::new();
    for &h in &blocks.latent_order {
        cols.push(ColInfo {
            label: format!("N_{}", model.var(h)?.name),
            noise_of: Some(h),
        });
    }
    for &v in &blocks.cogent_order {
        cols.push(ColInfo {
            label: format!("N_{}", model.var(v)?.name),
            noise_of: Some(v),
        });
    }
    Ok(MixingMatrix { values, rows, cols, tol: DEFAULT_TOL })
}

/// The full mixing matrix: `W*` plus one one-hot measurement-error column per
/// measured row, in row order.
pub fn build_w(model: &CanonicalModel) -> Result<MixingMatrix, MixingError> {
    let core = build_w_star(model)?;
    let n = core.nrows();
    let measured: Vec<usize> = (0..n).filter(|&i| !core.rows[i].observed).collect();
    let mut values = DMatrix::zeros(n, core.ncols() + measured.len());
    values.view_mut((0, 0), (n, core.ncols())).copy_from(&core.values);
    let mut cols = core.cols.clone();
    for (k, &i) in measured.iter().enumerate() {
        values[(i, core.ncols() + k)] = 1.0;
        let x = core.rows[i]
            .variable
            .and_then(|z| model.measurement_of(z))
            .expect("measured row has a measurement");
        cols.push(ColInfo { label: format!("N_{}", core.rows[i].label), noise_of: Some(x) });
    }
    Ok(MixingMatrix { values, rows: core.rows, cols, tol: core.tol })
}

/// Removes exactly one one-hot column per measured row (the lowest-indexed
/// candidate), recovering a `W*` candidate from a full mixing matrix.
///
/// A matrix where no measured row has a one-hot column is taken as already
/// stripped and returned unchanged; a mix of covered and uncovered measured
/// rows signals an input that is not a valid mixing matrix.
pub fn strip_measurement_columns(w: &MixingMatrix) -> Result<StripOutcome, MixingError> {
    let mut removed = Vec::new();
    let mut ambiguities = Vec::new();
    let mut uncovered = Vec::new();
    for (i, row) in w.rows.iter().enumerate() {
        if row.observed {
            continue;
        }
        let candidates: Vec<usize> = (0..w.ncols())
            .filter(|&j| !removed.contains(&j) && w.col_support(j) == vec![i])
            .collect();
        match candidates.as_slice() {
            [] => uncovered.push(i),
            [only] => removed.push(*only),
            several => {
                ambiguities.push((i, several.to_vec()));
                removed.push(several[0]);
            }
        }
    }
    if !uncovered.is_empty() {
        if removed.is_empty() {
            return Ok(StripOutcome {
                matrix: w.clone(),
                removed: vec![],
                ambiguities: vec![],
            });
        }
        return Err(MixingError::MeasuredRowWithoutOneHot(uncovered[0]));
    }
    let keep: Vec<usize> = (0..w.ncols()).filter(|j| !removed.contains(j)).collect();
    let values = w.values.select_columns(&keep);
    let cols = keep.iter().map(|&j| w.cols[j].clone()).collect();
    Ok(StripOutcome {
        matrix: MixingMatrix { values, rows: w.rows.clone(), cols, tol: w.tol },
        removed,
        ambiguities,
    })
}

/// Boolean support under `tol`, with row and column counts.
pub fn support(w: &MixingMatrix, tol: f64) -> SupportPattern {
    let (n, m) = (w.nrows(), w.ncols());
    let mask: Vec<Vec<bool>> =
        (0..n).map(|i| (0..m).map(|j| w.values[(i, j)].abs() > tol).collect()).collect();
    let row_counts = mask.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
    let col_counts =
        (0..m).map(|j| (0..n).filter(|&i| mask[i][j]).count()).collect();
    SupportPattern { mask, row_counts, col_counts }
}

/// A column permutation and per-column scales relating two matrices:
/// `a[:, j] * scales[j] == b[:, permutation[j]]` entrywise within tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchWitness {
    pub permutation: Vec<usize>,
    pub scales: Vec<f64>,
}

/// Searches for a column permutation and scaling taking `a` to `b`.
///
/// Rows must carry the same labels; if their order differs, `b`'s rows are
/// realigned first. Candidate pairs are filtered by equal support and a
/// verified proportionality factor, then a perfect matching is extracted.
pub fn match_up_to_permutation_scaling(
    a: &MixingMatrix,
    b: &MixingMatrix,
    tol: f64,
) -> Result<Option<MatchWitness>, MixingError> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(MixingError::ShapeMismatch(a.nrows(), a.ncols(), b.nrows(), b.ncols()));
    }
    let b_values = align_rows(a, b)?;
    let n = a.nrows();
    let m = a.ncols();
    let col_scale = |j: usize, k: usize| -> Option<f64> {
        let mut pivot = 0usize;
        let mut best = 0.0f64;
        for i in 0..n {
            if a.values[(i, j)].abs() > best {
                best = a.values[(i, j)].abs();
                pivot = i;
            }
        }
        if best <= tol {
            // zero column matches only a zero column
            return (0..n).all(|i| b_values[(i, k)].abs() <= tol).then_some(1.0);
        }
        let s = b_values[(pivot, k)] / a.values[(pivot, j)];
        (0..n)
            .all(|i| (a.values[(i, j)] * s - b_values[(i, k)]).abs() <= tol)
            .then_some(s)
    };
    let edges: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|j| (0..m).filter_map(|k| col_scale(j, k).map(|s| (k, s))).collect())
        .collect();
    // augmenting-path bipartite matching
    let mut to_b: Vec<Option<usize>> = vec![None; m];
    let mut to_a: Vec<Option<usize>> = vec![None; m];
    fn augment(
        j: usize,
        edges: &[Vec<(usize, f64)>],
        to_b: &mut [Option<usize>],
        to_a: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &(k, _) in &edges[j] {
            if seen[k] {
                continue;
            }
            seen[k] = true;
            if to_a[k].is_none()
                || augment(to_a[k].unwrap(), edges, to_b, to_a, seen)
            {
                to_b[j] = Some(k);
                to_a[k] = Some(j);
                return true;
            }
        }
        false
    }
    for j in 0..m {
        let mut seen = vec![false; m];
        if !augment(j, &edges, &mut to_b, &mut to_a, &mut seen) {
            return Ok(None);
        }
    }
    let permutation: Vec<usize> = to_b.iter().map(|k| k.unwrap()).collect();
    let scales = (0..m)
        .map(|j| {
            edges[j]
                .iter()
                .find(|(k, _)| *k == permutation[j])
                .map(|(_, s)| *s)
                .unwrap()
        })
        .collect();
    Ok(Some(MatchWitness { permutation, scales }))
}

/// Returns `b`'s values with rows reordered to `a`'s labels.
fn align_rows(a: &MixingMatrix, b: &MixingMatrix) -> Result<DMatrix<f64>, MixingError> {
    if a.rows.iter().zip(&b.rows).all(|(x, y)| x.label == y.label) {
        return Ok(b.values.clone());
    }
    let mut index = Vec::with_capacity(a.nrows());
    for r in &a.rows {
        let i = b
            .row_index_of_label(&r.label)
            .ok_or(MixingError::RowLabelMismatch)?;
        if index.contains(&i) {
            return Err(MixingError::RowLabelMismatch);
        }
        index.push(i);
    }
    Ok(b.values.select_rows(&index))
}

/// Deterministic representative of a matrix's column permutation/scaling
/// orbit: every column is scaled so its first nonzero entry (in row order) is
/// +1, then columns are sorted by support pattern and values. Two matrices
/// are orbit-equal exactly when their canonical forms agree entrywise.
pub fn canonical_column_form(w: &MixingMatrix) -> Result<MixingMatrix, MixingError> {
    let n = w.nrows();
    let mut columns: Vec<(Vec<bool>, Vec<f64>, ColInfo)> = Vec::with_capacity(w.ncols());
    for j in 0..w.ncols() {
        let raw: Vec<f64> = (0..n).map(|i| w.values[(i, j)]).collect();
        let lead = raw
            .iter()
            .position(|v| v.abs() > w.tol)
            .ok_or(MixingError::ZeroColumn(j))?;
        let scale = raw[lead];
        let vals: Vec<f64> = raw.iter().map(|v| v / scale).collect();
        let mask: Vec<bool> = vals.iter().map(|v| v.abs() > w.tol).collect();
        columns.push((mask, vals, w.cols[j].clone()));
    }
    columns.sort_by(|(ma, va, _), (mb, vb, _)| {
        ma.cmp(mb).then_with(|| {
            for (x, y) in va.iter().zip(vb) {
                match x.total_cmp(y) {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let mut values = DMatrix::zeros(n, w.ncols());
    let mut cols = Vec::with_capacity(w.ncols());
    for (j, (_, vals, info)) in columns.into_iter().enumerate() {
        for i in 0..n {
            values[(i, j)] = vals[i];
        }
        cols.push(info);
    }
    Ok(MixingMatrix { values, rows: w.rows.clone(), cols, tol: w.tol })
}

/// Entrywise comparison within an absolute tolerance.
pub fn matrices_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).amax() <= tol
}
