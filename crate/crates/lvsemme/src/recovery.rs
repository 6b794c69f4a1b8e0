//! Ordered-grouping recovery from a mixing matrix and enumeration of the
//! equivalence class with reconstructed parameters.
//!
//! Recovery iteratively peels the support of the matrix: each cycle locates
//! the rows of one minimal remaining group (fewest remaining nonzeros, ties
//! broken by the full-matrix count and then the lowest row index), decides
//! whether the group contains a cogent variable, and removes the group's rows
//! and columns. Enumeration then ranges over every admissible choice of
//! center row and noise column per cogent group and reconstructs the
//! parameter blocks by block inversion.

use crate::grouping::GroupKind;
use crate::mixing::{MixingError, MixingMatrix, RowInfo};
use crate::model::{CanonicalModel, ModelError, VariableKind};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("inconsistent input at pick {pick}: {reason}")]
    Inconsistent { pick: usize, reason: String },
    #[error("cogent group {group} has no noise column; grouping is degenerate")]
    NoNoiseCandidates { group: usize },
    #[error("no models to filter")]
    EmptyClass,
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How one row pick was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickOutcome {
    /// The same-support rows and minimal-count columns form one cogent group.
    CogentGroup,
    /// The probe submatrix had a zero: every row is a mleaf, every minimal
    /// column an unobserved confounder.
    MleafUnobservedSplit,
    /// Literal handling of an observed row alongside a zero probe; only
    /// reachable on inputs that are not a valid mixing matrix.
    ObservedLiteralSplit,
}

/// Trace entry for one row pick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickRecord {
    pub pick: usize,
    pub row: usize,
    /// Rows sharing the picked row's remaining support (Z_I).
    pub same_support_rows: Vec<usize>,
    /// Rows of those whose full-matrix count matches the pick (Z_J).
    pub group_rows: Vec<usize>,
    /// Remaining support of the picked row (N_I).
    pub support_cols: Vec<usize>,
    /// Columns of minimal full-matrix count within the support (N_J).
    pub group_cols: Vec<usize>,
    /// First zero found in the probe submatrix, if any.
    pub zero_witness: Option<(usize, usize)>,
    pub outcome: PickOutcome,
}

/// One recovered group over matrix rows and columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveredGroup {
    pub kind: GroupKind,
    /// Member rows; for a cogent group without an observed row, any member
    /// could be the center.
    pub rows: Vec<usize>,
    /// The center row when it is known (an observed row).
    pub observed_center: Option<usize>,
    /// Noise columns attached to the group.
    pub cols: Vec<usize>,
}

/// Recovered ordered grouping: unobserved-only groups first, then cogent
/// groups in discovery order, then mleaf-only groups. This emission order is
/// a causal order of the group DAG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveredGrouping {
    pub groups: Vec<RecoveredGroup>,
    pub picks: Vec<PickRecord>,
    /// Number of cogent groups resolved; row picks that only split off mleaf
    /// rows and confounder columns are bookkeeping inside an iteration.
    pub iterations: usize,
}

impl RecoveredGrouping {
    pub fn cogent_groups(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.kind == GroupKind::Cogent)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Ancestral-ordered-grouping recovery.
///
/// `w` must be (a column permutation and scaling of) the mixing matrix of a
/// minimal, conventionally faithful canonical model, with per-row
/// observability flags set. Inputs that contradict that contract produce an
/// [`RecoveryError::Inconsistent`] naming the failing pick.
pub fn recover_aog(w: &MixingMatrix, tol: f64) -> Result<RecoveredGrouping, RecoveryError> {
    let n = w.nrows();
    let m = w.ncols();
    let nonzero = |i: usize, j: usize| w.values[(i, j)].abs() > tol;
    let full_row_count: Vec<usize> =
        (0..n).map(|i| (0..m).filter(|&j| nonzero(i, j)).count()).collect();
    let full_col_count: Vec<usize> =
        (0..m).map(|j| (0..n).filter(|&i| nonzero(i, j)).count()).collect();
    let mut row_alive = vec![true; n];
    let mut col_alive = vec![true; m];
    let mut unobserved_groups = Vec::new();
    let mut cogent_groups = Vec::new();
    let mut mleaf_groups = Vec::new();
    let mut picks: Vec<PickRecord> = Vec::new();
    let mut iterations = 0usize;

    loop {
        let alive_rows: Vec<usize> = (0..n).filter(|&i| row_alive[i]).collect();
        let pick_no = picks.len() + 1;
        if alive_rows.is_empty() {
            if col_alive.iter().any(|&a| a) {
                return Err(RecoveryError::Inconsistent {
                    pick: pick_no,
                    reason: "columns remain after all rows were assigned".into(),
                });
            }
            break;
        }
        let remaining_support = |i: usize| -> Vec<usize> {
            (0..m).filter(|&j| col_alive[j] && nonzero(i, j)).collect()
        };
        let picked = *alive_rows
            .iter()
            .min_by_key(|&&i| (remaining_support(i).len(), full_row_count[i], i))
            .expect("nonempty");
        let support = remaining_support(picked);
        if support.is_empty() {
            return Err(RecoveryError::Inconsistent {
                pick: pick_no,
                reason: format!("row {picked} has no remaining support"),
            });
        }
        let same_support: Vec<usize> = alive_rows
            .iter()
            .copied()
            .filter(|&i| remaining_support(i) == support)
            .collect();
        let group_rows: Vec<usize> = same_support
            .iter()
            .copied()
            .filter(|&i| full_row_count[i] == full_row_count[picked])
            .collect();
        let min_col_count =
            support.iter().map(|&j| full_col_count[j]).min().expect("nonempty support");
        let group_cols: Vec<usize> =
            support.iter().copied().filter(|&j| full_col_count[j] == min_col_count).collect();

        // rows with the same remaining support but a larger total count are
        // mleafs of their own groups
        for &r in &same_support {
            if group_rows.contains(&r) {
                continue;
            }
            if w.rows[r].observed {
                return Err(RecoveryError::Inconsistent {
                    pick: pick_no,
                    reason: format!("observed row {r} has excess support over its group"),
                });
            }
            mleaf_groups.push(RecoveredGroup {
                kind: GroupKind::MleafOnly,
                rows: vec![r],
                observed_center: None,
                cols: vec![],
            });
        }
        // columns above the minimal count are confounders of their own groups
        for &c in &support {
            if !group_cols.contains(&c) {
                unobserved_groups.push(RecoveredGroup {
                    kind: GroupKind::UnobservedOnly,
                    rows: vec![],
                    observed_center: None,
                    cols: vec![c],
                });
            }
        }

        // probe: rows touched by the minimal column, columns touched by the
        // picked row, both in the full matrix
        let probe_col = group_cols[0];
        let probe_rows: Vec<usize> = (0..n).filter(|&i| nonzero(i, probe_col)).collect();
        let probe_cols: Vec<usize> = (0..m).filter(|&j| nonzero(picked, j)).collect();
        let zero_witness = probe_rows
            .iter()
            .flat_map(|&i| probe_cols.iter().map(move |&j| (i, j)))
            .find(|&(i, j)| !nonzero(i, j));

        let observed_rows: Vec<usize> =
            group_rows.iter().copied().filter(|&i| w.rows[i].observed).collect();

        let outcome = if zero_witness.is_some() {
            // zero probe: no cogent variable among these rows
            for &r in &group_rows {
                if w.rows[r].observed {
                    cogent_groups.push(RecoveredGroup {
                        kind: GroupKind::Cogent,
                        rows: vec![r],
                        observed_center: Some(r),
                        cols: vec![],
                    });
                    iterations += 1;
                } else {
                    mleaf_groups.push(RecoveredGroup {
                        kind: GroupKind::MleafOnly,
                        rows: vec![r],
                        observed_center: None,
                        cols: vec![],
                    });
                }
            }
            for &c in &group_cols {
                unobserved_groups.push(RecoveredGroup {
                    kind: GroupKind::UnobservedOnly,
                    rows: vec![],
                    observed_center: None,
                    cols: vec![c],
                });
            }
            if observed_rows.is_empty() {
                PickOutcome::MleafUnobservedSplit
            } else {
                PickOutcome::ObservedLiteralSplit
            }
        } else if observed_rows.len() > 1 {
            return Err(RecoveryError::Inconsistent {
                pick: pick_no,
                reason: format!("observed rows {observed_rows:?} share one support"),
            });
        } else if let Some(&center) = observed_rows.first() {
            // the observed row is the cogent; measured rows with the same
            // support are mleafs of their own groups
            cogent_groups.push(RecoveredGroup {
                kind: GroupKind::Cogent,
                rows: vec![center],
                observed_center: Some(center),
                cols: group_cols.clone(),
            });
            iterations += 1;
            for &r in &group_rows {
                if r != center {
                    mleaf_groups.push(RecoveredGroup {
                        kind: GroupKind::MleafOnly,
                        rows: vec![r],
                        observed_center: None,
                        cols: vec![],
                    });
                }
            }
            PickOutcome::CogentGroup
        } else {
            cogent_groups.push(RecoveredGroup {
                kind: GroupKind::Cogent,
                rows: group_rows.clone(),
                observed_center: None,
                cols: group_cols.clone(),
            });
            iterations += 1;
            PickOutcome::CogentGroup
        };

        picks.push(PickRecord {
            pick: pick_no,
            row: picked,
            same_support_rows: same_support.clone(),
            group_rows,
            support_cols: support.clone(),
            group_cols,
            zero_witness,
            outcome,
        });

        for r in same_support {
            row_alive[r] = false;
        }
        for c in support {
            col_alive[c] = false;
        }
    }

    let mut groups = unobserved_groups;
    groups.extend(cogent_groups);
    groups.extend(mleaf_groups);
    Ok(RecoveredGrouping { groups, picks, iterations })
}

/// Maps a recovered grouping back into model-space variable and noise
/// references through the matrix metadata. Returns `None` when a row lacks
/// its underlying variable or a column its noise owner.
pub fn grouping_in_model_terms(
    grouping: &RecoveredGrouping,
    w: &MixingMatrix,
) -> Option<crate::grouping::OrderedGrouping> {
    let mut groups = Vec::with_capacity(grouping.groups.len());
    for g in &grouping.groups {
        let mut vars = BTreeSet::new();
        for &r in &g.rows {
            vars.insert(w.rows[r].variable?);
        }
        let center = match g.observed_center {
            Some(r) => w.rows[r].variable,
            None => None,
        };
        let mleafs: BTreeSet<_> =
            vars.iter().copied().filter(|v| Some(*v) != center).collect();
        let mut noises = BTreeSet::new();
        for &c in &g.cols {
            noises.insert(crate::grouping::NoiseRef::Var(w.cols[c].noise_of?));
        }
        groups.push(crate::grouping::Group { kind: g.kind, center, mleafs, noises });
    }
    Some(crate::grouping::OrderedGrouping { groups })
}

/// Center-and-noise assignment for one cogent group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CenterChoice {
    pub group: usize,
    pub row: usize,
    pub col: usize,
}

/// One reconstructed model: parameter blocks plus the selection that produced
/// it. Row indices refer to the input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredModel {
    pub centers: Vec<CenterChoice>,
    pub mleaf_rows: Vec<usize>,
    pub latent_cols: Vec<usize>,
    /// C: effects among center variables, row = target, column = source.
    pub cogent_to_cogent: DMatrix<f64>,
    /// B^C: confounder effects on center variables.
    pub latent_to_cogent: DMatrix<f64>,
    /// B^L: confounder effects on non-center rows.
    pub latent_to_mleaf: DMatrix<f64>,
    /// D: center effects on non-center rows.
    pub cogent_to_mleaf: DMatrix<f64>,
    /// Input-row metadata, kept so the model is self-describing.
    pub rows: Vec<RowInfo>,
}

/// A selection that failed reconstruction, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedSelection {
    pub centers: Vec<CenterChoice>,
    pub reason: String,
}

/// The full enumeration output: accepted models in canonical order plus the
/// diagnostics for rejected selections (none on exact valid inputs).
#[derive(Debug, Clone)]
pub struct ClassEnumeration {
    pub models: Vec<RecoveredModel>,
    pub rejected: Vec<RejectedSelection>,
}

impl RecoveredModel {
    /// Count of structural parameters above `tol` across all blocks.
    pub fn edge_count(&self, tol: f64) -> usize {
        [
            &self.cogent_to_cogent,
            &self.latent_to_cogent,
            &self.latent_to_mleaf,
            &self.cogent_to_mleaf,
        ]
        .iter()
        .map(|m| m.iter().filter(|v| v.abs() > tol).count())
        .sum()
    }

    /// Rebuilds the mixing matrix implied by the parameter blocks, rows and
    /// columns scattered back to the input layout. Chosen noise columns come
    /// back normalized, so the result equals the input up to column scaling.
    pub fn rebuild_w_star(&self, template: &MixingMatrix) -> Result<MixingMatrix, MixingError> {
        let pc = self.centers.len();
        let pml = self.mleaf_rows.len();
        let ph = self.latent_cols.len();
        let eye = DMatrix::<f64>::identity(pc, pc);
        let inv = (&eye - &self.cogent_to_cogent)
            .try_inverse()
            .ok_or(MixingError::Singular)?;
        let top_left = &self.latent_to_mleaf + &self.cogent_to_mleaf * &inv * &self.latent_to_cogent;
        let top_right = &self.cogent_to_mleaf * &inv;
        let bottom_left = &inv * &self.latent_to_cogent;
        let mut values = DMatrix::zeros(template.nrows(), template.ncols());
        let row_at = |block_row: usize| -> usize {
            if block_row < pml {
                self.mleaf_rows[block_row]
            } else {
                self.centers[block_row - pml].row
            }
        };
        let col_at = |block_col: usize| -> usize {
            if block_col < ph {
                self.latent_cols[block_col]
            } else {
                self.centers[block_col - ph].col
            }
        };
        for bi in 0..(pml + pc) {
            for bj in 0..(ph + pc) {
                let v = match (bi < pml, bj < ph) {
                    (true, true) => top_left[(bi, bj)],
                    (true, false) => top_right[(bi, bj - ph)],
                    (false, true) => bottom_left[(bi - pml, bj)],
                    (false, false) => inv[(bi - pml, bj - ph)],
                };
                values[(row_at(bi), col_at(bj))] = v;
            }
        }
        Ok(MixingMatrix {
            values,
            rows: template.rows.clone(),
            cols: template.cols.clone(),
            tol: template.tol,
        })
    }

    /// Materializes the reconstruction as a canonical model: one latent per
    /// unchosen column, center rows as cogent variables, remaining rows as
    /// mleafs, edges from the parameter blocks.
    pub fn to_canonical_model(&self, template: &MixingMatrix, tol: f64) -> CanonicalModel {
        let mut model = CanonicalModel::new();
        let mut latent_ids = Vec::with_capacity(self.latent_cols.len());
        for (ordinal, &c) in self.latent_cols.iter().enumerate() {
            let label = &template.cols[c].label;
            latent_ids.push(model.add_variable(format!("{label}#{ordinal}"), VariableKind::Unobserved));
        }
        let mut row_ids = vec![None; template.nrows()];
        let center_rows: BTreeSet<usize> = self.centers.iter().map(|c| c.row).collect();
        for (i, row) in template.rows.iter().enumerate() {
            let kind = if center_rows.contains(&i) {
                if row.observed {
                    VariableKind::ObservedCogent
                } else {
                    VariableKind::MeasuredCogent
                }
            } else {
                VariableKind::Mleaf
            };
            let id = if row.observed {
                model.add_variable(row.label.clone(), kind)
            } else {
                model.add_measured(format!("{}~", row.label), kind, row.label.clone())
            };
            row_ids[i] = Some(id);
        }
        let mut add = |src, dst, w: f64| {
            if w.abs() > tol {
                model.add_edge(src, dst, w);
            }
        };
        for (ci, center) in self.centers.iter().enumerate() {
            let dst = row_ids[center.row].unwrap();
            for (cj, other) in self.centers.iter().enumerate() {
                add(row_ids[other.row].unwrap(), dst, self.cogent_to_cogent[(ci, cj)]);
            }
            for (l, &lid) in latent_ids.iter().enumerate() {
                add(lid, dst, self.latent_to_cogent[(ci, l)]);
            }
        }
        for (mi, &mrow) in self.mleaf_rows.iter().enumerate() {
            let dst = row_ids[mrow].unwrap();
            for (cj, center) in self.centers.iter().enumerate() {
                add(row_ids[center.row].unwrap(), dst, self.cogent_to_mleaf[(mi, cj)]);
            }
            for (l, &lid) in latent_ids.iter().enumerate() {
                add(lid, dst, self.latent_to_mleaf[(mi, l)]);
            }
        }
        model
    }
}

/// Enumerates every admissible (center row, noise column) selection over the
/// cogent groups of `grouping` and reconstructs the parameter blocks for
/// each. Groups with an observed row have a forced center; every measured
/// member is a center candidate otherwise. Each chosen column is rescaled so
/// its entry at the chosen center row is one before inversion. Selections
/// with a vanishing pivot, a singular block, a nonzero diagonal or a cyclic
/// effect structure are rejected with a diagnostic.
pub fn enumerate_class(
    w: &MixingMatrix,
    grouping: &RecoveredGrouping,
    tol: f64,
) -> Result<ClassEnumeration, RecoveryError> {
    let cogent: Vec<(usize, &RecoveredGroup)> = grouping
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind == GroupKind::Cogent)
        .collect();
    for (gi, g) in &cogent {
        if g.cols.is_empty() {
            return Err(RecoveryError::NoNoiseCandidates { group: *gi });
        }
    }
    let row_candidates: Vec<Vec<usize>> = cogent
        .iter()
        .map(|(_, g)| match g.observed_center {
            Some(r) => vec![r],
            None => g.rows.clone(),
        })
        .collect();
    let col_candidates: Vec<Vec<usize>> = cogent.iter().map(|(_, g)| g.cols.clone()).collect();

    let mut models = Vec::new();
    let mut rejected = Vec::new();
    let mut selection = vec![(0usize, 0usize); cogent.len()];
    loop {
        let centers: Vec<CenterChoice> = selection
            .iter()
            .enumerate()
            .map(|(g, &(ri, ci))| CenterChoice {
                group: cogent[g].0,
                row: row_candidates[g][ri],
                col: col_candidates[g][ci],
            })
            .collect();
        match reconstruct(w, &centers, tol) {
            Ok(model) => models.push(model),
            Err(reason) => rejected.push(RejectedSelection { centers, reason }),
        }

        // odometer over (row, col) candidate indices
        let mut g = 0;
        loop {
            if g == selection.len() {
                let mut sorted = models;
                sorted.sort_by(|a, b| a.centers.cmp(&b.centers));
                return Ok(ClassEnumeration { models: sorted, rejected });
            }
            selection[g].1 += 1;
            if selection[g].1 < col_candidates[g].len() {
                break;
            }
            selection[g].1 = 0;
            selection[g].0 += 1;
            if selection[g].0 < row_candidates[g].len() {
                break;
            }
            selection[g].0 = 0;
            g += 1;
        }
    }
}

fn reconstruct(
    w: &MixingMatrix,
    centers: &[CenterChoice],
    tol: f64,
) -> Result<RecoveredModel, String> {
    let pc = centers.len();
    let center_rows: Vec<usize> = centers.iter().map(|c| c.row).collect();
    let chosen_cols: Vec<usize> = centers.iter().map(|c| c.col).collect();
    let mleaf_rows: Vec<usize> = (0..w.nrows())
        .filter(|i| !center_rows.contains(i))
        .collect();
    let latent_cols: Vec<usize> = (0..w.ncols())
        .filter(|j| !chosen_cols.contains(j))
        .collect();
    // an observed row can only sit at a center slot
    for &r in &mleaf_rows {
        if w.rows[r].observed {
            return Err(format!("observed row {r} left without a center slot"));
        }
    }
    // rescale each chosen column so its center entry is one
    let mut scaled = w.values.clone();
    for c in centers {
        let pivot = scaled[(c.row, c.col)];
        if pivot.abs() <= tol {
            return Err(format!("zero pivot at row {}, column {}", c.row, c.col));
        }
        for i in 0..scaled.nrows() {
            scaled[(i, c.col)] /= pivot;
        }
    }
    let block = scaled.select_rows(&center_rows).select_columns(&chosen_cols);
    let inv = block
        .clone()
        .try_inverse()
        .ok_or_else(|| "singular center block".to_string())?;
    let eye = DMatrix::<f64>::identity(pc, pc);
    let cogent_to_cogent = &eye - &inv;
    for i in 0..pc {
        if cogent_to_cogent[(i, i)].abs() > tol.max(1e-7) {
            return Err(format!("nonzero self-effect for center {i}"));
        }
    }
    if !is_dag(&cogent_to_cogent, tol) {
        return Err("cyclic effect structure among centers".to_string());
    }
    let latent_to_cogent = &inv * scaled.select_rows(&center_rows).select_columns(&latent_cols);
    let cogent_to_mleaf = scaled.select_rows(&mleaf_rows).select_columns(&chosen_cols) * &inv;
    let latent_to_mleaf = scaled.select_rows(&mleaf_rows).select_columns(&latent_cols)
        - &cogent_to_mleaf * &block * &latent_to_cogent;
    Ok(RecoveredModel {
        centers: centers.to_vec(),
        mleaf_rows,
        latent_cols,
        cogent_to_cogent,
        latent_to_cogent,
        latent_to_mleaf,
        cogent_to_mleaf,
        rows: w.rows.clone(),
    })
}

fn is_dag(c: &DMatrix<f64>, tol: f64) -> bool {
    let n = c.nrows();
    let mut indeg = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && c[(i, j)].abs() > tol {
                indeg[i] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(j) = ready.pop() {
        seen += 1;
        for i in 0..n {
            if i != j && c[(i, j)].abs() > tol {
                indeg[i] -= 1;
                if indeg[i] == 0 {
                    ready.push(i);
                }
            }
        }
    }
    seen == n
}

/// Keeps the models attaining the fewest structural parameters above `tol`;
/// on faithful inputs these are exactly the refined equivalence class.
pub fn dog_filter(models: &[RecoveredModel], tol: f64) -> Result<Vec<RecoveredModel>, RecoveryError> {
    if models.is_empty() {
        return Err(RecoveryError::EmptyClass);
    }
    let counts: Vec<usize> = models.iter().map(|m| m.edge_count(tol)).collect();
    let min = *counts.iter().min().expect("nonempty");
    Ok(models
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == min)
        .map(|(m, _)| m.clone())
        .collect())
}
