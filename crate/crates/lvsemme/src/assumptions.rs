//! Faithfulness checks backed by minimal vertex bottlenecks and submatrix
//! ranks.
//!
//! Conventional faithfulness requires that no ancestor has a total effect of
//! zero on a descendant. The stronger model-class faithfulness requires, for
//! qualifying subset pairs (J, K), that the rank of the mixing submatrix with
//! columns J and rows K ∪ {V_i} equals the size of a minimal vertex
//! bottleneck from J to K ∪ {V_i}; rank can never exceed the bottleneck, so a
//! violation is always a rank deficiency.

use crate::mixing::MixingMatrix;
use crate::model::{CanonicalModel, CausalDiagram, ModelError, VarId, VariableKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// Cap on |J| + |K| per enumerated subset pair.
pub const DEFAULT_SUBSET_CAP: usize = 8;

/// A (sources, sinks, target) query against a causal diagram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottleneckQuery {
    pub sources: BTreeSet<VarId>,
    pub sinks: BTreeSet<VarId>,
    pub target: VarId,
}

impl BottleneckQuery {
    /// Minimal bottleneck from the sources to the sinks plus the target.
    pub fn evaluate(&self, diagram: &CausalDiagram) -> Result<usize, ModelError> {
        let mut sinks = self.sinks.clone();
        sinks.insert(self.target);
        minimal_bottleneck_size(diagram, &self.sources, &sinks)
    }
}

/// One faithfulness violation with its witness.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaithfulnessViolation {
    /// Total effect of `src` on its descendant `dst` vanishes.
    Conventional { src: VarId, dst: VarId },
    /// Rank/bottleneck mismatch for J ⊆ An(target), K ⊆ PP(target).
    LvsemmeA {
        target: VarId,
        sources: Vec<VarId>,
        rows: Vec<VarId>,
        rank: usize,
        bottleneck: usize,
    },
    /// Rank/bottleneck mismatch for a mleaf target through one of its parents.
    LvsemmeB {
        target: VarId,
        parent: VarId,
        sources: Vec<VarId>,
        rows: Vec<VarId>,
        rank: usize,
        bottleneck: usize,
    },
}

/// Result of a faithfulness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub passed: bool,
    pub violations: Vec<FaithfulnessViolation>,
    pub subsets_examined: usize,
    pub truncated: bool,
}

impl FaithfulnessReport {
    fn finish(mut violations: Vec<FaithfulnessViolation>, subsets_examined: usize, truncated: bool) -> Self {
        violations.sort();
        violations.dedup();
        FaithfulnessReport {
            passed: violations.is_empty() && !truncated,
            violations,
            subsets_examined,
            truncated,
        }
    }
}

/// Unit-vertex-capacity max flow on a node-split graph; by Menger duality the
/// value equals the minimum cardinality of a vertex set meeting every
/// directed path from `sources` to `sinks`, endpoints included.
pub fn minimal_bottleneck_size(
    diagram: &CausalDiagram,
    sources: &BTreeSet<VarId>,
    sinks: &BTreeSet<VarId>,
) -> Result<usize, ModelError> {
    let n = diagram.n;
    for &v in sources.iter().chain(sinks) {
        if v.0 >= n {
            return Err(ModelError::UnknownId(v));
        }
    }
    if sources.is_empty() || sinks.is_empty() {
        return Ok(0);
    }
    // nodes: 2v = in, 2v+1 = out, then source and sink
    let size = 2 * n + 2;
    let s = 2 * n;
    let t = 2 * n + 1;
    let inf = (n + 1) as i64;
    let mut cap = vec![vec![0i64; size]; size];
    for v in 0..n {
        cap[2 * v][2 * v + 1] = 1;
    }
    for &(u, v) in &diagram.edges {
        cap[2 * u.0 + 1][2 * v.0] = inf;
    }
    for &j in sources {
        cap[s][2 * j.0] = inf;
    }
    for &k in sinks {
        cap[2 * k.0 + 1][t] = inf;
    }
    let mut flow = 0i64;
    loop {
        // BFS for an augmenting path
        let mut prev = vec![usize::MAX; size];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for v in 0..size {
                if prev[v] == usize::MAX && cap[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            break;
        }
        let mut bottleneck = i64::MAX;
        let mut v = t;
        while v != s {
            let u = prev[v];
            bottleneck = bottleneck.min(cap[u][v]);
            v = u;
        }
        let mut v = t;
        while v != s {
            let u = prev[v];
            cap[u][v] -= bottleneck;
            cap[v][u] += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
    Ok(flow as usize)
}

/// Numerical rank of the submatrix of `w` with columns labeled by the noises
/// of `noise_vars` and rows labeled by `row_vars`: the count of singular
/// values above `tol` times the largest one. Singular values must also clear
/// `tol` absolutely, so a submatrix of cancelled (near-zero) entries has rank
/// zero rather than inheriting rank from its own noise floor. Empty
/// selections have rank 0.
pub fn submatrix_rank(
    w: &MixingMatrix,
    noise_vars: &BTreeSet<VarId>,
    row_vars: &BTreeSet<VarId>,
    tol: f64,
) -> Result<usize, ModelError> {
    let mut cols = Vec::with_capacity(noise_vars.len());
    for &v in noise_vars {
        cols.push(w.col_index_of_noise(v).ok_or(ModelError::UnknownId(v))?);
    }
    let mut rows = Vec::with_capacity(row_vars.len());
    for &v in row_vars {
        rows.push(w.row_index_of_variable(v).ok_or(ModelError::UnknownId(v))?);
    }
    Ok(rank_of_selection(&w.values, &rows, &cols, tol))
}

fn rank_of_selection(
    values: &nalgebra::DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    tol: f64,
) -> usize {
    if rows.is_empty() || cols.is_empty() {
        return 0;
    }
    let sub = values.select_rows(rows).select_columns(cols);
    let svd = sub.svd(false, false);
    let max = svd.singular_values.max();
    if max <= tol {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > tol * max && s > tol).count()
}

/// Checks that every ancestor–descendant pair keeps a nonzero total effect.
pub fn check_conventional_faithfulness(
    model: &CanonicalModel,
    tol: f64,
) -> Result<FaithfulnessReport, ModelError> {
    let effects = model.total_effects()?;
    let mut violations = Vec::new();
    let mut examined = 0usize;
    for dst in &model.variables {
        if !dst.kind.in_v() {
            continue;
        }
        for src in model.ancestors(dst.id)? {
            examined += 1;
            if effects.effect_of_on(src, dst.id).abs() <= tol {
                violations.push(FaithfulnessViolation::Conventional { src, dst: dst.id });
            }
        }
    }
    Ok(FaithfulnessReport::finish(violations, examined, false))
}

/// Possible parent set extended to any variable in V, used for clause (b)
/// where the mleaf's parent may be unobserved.
fn possible_parents_of_any(
    model: &CanonicalModel,
    v: VarId,
) -> Result<BTreeSet<VarId>, ModelError> {
    let an = model.ancestors(v)?;
    let mut out: BTreeSet<VarId> = an
        .iter()
        .copied()
        .filter(|&u| model.variables[u.0].kind != VariableKind::Unobserved)
        .collect();
    for m in model.mleafs() {
        if m != v && model.parent_set(m).is_subset(&an) {
            out.insert(m);
        }
    }
    Ok(out)
}

struct SubsetChecker<'a> {
    w: &'a MixingMatrix,
    diagram: CausalDiagram,
    tol: f64,
    cap: usize,
    rank_memo: HashMap<(u64, u64), usize>,
    bneck_memo: HashMap<(u64, u64), usize>,
    examined: usize,
    truncated: bool,
}

fn mask_of(vars: &[VarId]) -> u64 {
    vars.iter().fold(0u64, |m, v| m | (1u64 << v.0))
}

impl<'a> SubsetChecker<'a> {
    /// Enumerates subset pairs of (sources, rows) in increasing combined
    /// size, lexicographic within, and reports every rank/bottleneck
    /// mismatch through `emit`.
    fn run(
        &mut self,
        target: VarId,
        source_universe: &BTreeSet<VarId>,
        row_universe: &BTreeSet<VarId>,
        mut emit: impl FnMut(Vec<VarId>, Vec<VarId>, usize, usize) -> FaithfulnessViolation,
        violations: &mut Vec<FaithfulnessViolation>,
    ) -> Result<(), ModelError> {
        let src: Vec<VarId> = source_universe.iter().copied().collect();
        let rows: Vec<VarId> = row_universe.iter().copied().collect();
        if src.len() + rows.len() > self.cap {
            self.truncated = true;
        }
        let src_subsets = subsets_by_size(&src, self.cap);
        let row_subsets = subsets_by_size(&rows, self.cap);
        for total in 0..=self.cap {
            for (j_size, j_bucket) in src_subsets.iter().enumerate() {
                if j_size > total {
                    break;
                }
                let k_size = total - j_size;
                if k_size > rows.len() {
                    continue;
                }
                for j in j_bucket {
                    for k in &row_subsets[k_size] {
                        self.examined += 1;
                        if j.is_empty() {
                            continue; // rank 0 = bottleneck 0
                        }
                        let mut row_sel: Vec<VarId> = k.clone();
                        if !row_sel.contains(&target) {
                            row_sel.push(target);
                            row_sel.sort();
                        }
                        let (rank, bneck) = self.evaluate(j, &row_sel)?;
                        if rank != bneck {
                            violations.push(emit(j.clone(), row_sel, rank, bneck));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn evaluate(&mut self, sources: &[VarId], rows: &[VarId]) -> Result<(usize, usize), ModelError> {
        let key = (mask_of(sources), mask_of(rows));
        let rank = match self.rank_memo.get(&key) {
            Some(&r) => r,
            None => {
                let r = submatrix_rank(
                    self.w,
                    &sources.iter().copied().collect(),
                    &rows.iter().copied().collect(),
                    self.tol,
                )?;
                self.rank_memo.insert(key, r);
                r
            }
        };
        let bneck = match self.bneck_memo.get(&key) {
            Some(&b) => b,
            None => {
                let b = minimal_bottleneck_size(
                    &self.diagram,
                    &sources.iter().copied().collect(),
                    &rows.iter().copied().collect(),
                )?;
                self.bneck_memo.insert(key, b);
                b
            }
        };
        Ok((rank, bneck))
    }
}

/// All subsets of `universe` up to size `cap`, bucketed by size, each bucket
/// in lexicographic order.
fn subsets_by_size(universe: &[VarId], cap: usize) -> Vec<Vec<Vec<VarId>>> {
    let max = universe.len().min(cap);
    let mut out: Vec<Vec<Vec<VarId>>> = vec![Vec::new(); max + 1];
    let total = 1usize << universe.len();
    for mask in 0..total {
        let size = mask.count_ones() as usize;
        if size > max {
            continue;
        }
        let subset: Vec<VarId> = universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        out[size].push(subset);
    }
    for bucket in &mut out {
        bucket.sort();
    }
    out
}

/// Checks the subset-rank faithfulness condition for every variable in Z ∪ Y.
///
/// Clause (a) ranges J over ancestor subsets and K over possible-parent
/// subsets of the variable itself; clause (b) applies to mleaf variables
/// through each of their parents (observed, measured or unobserved).
/// Enumeration is exhaustive whenever the universes fit under `subset_cap`,
/// otherwise the report is marked truncated.
pub fn check_lvsemme_faithfulness(
    model: &CanonicalModel,
    tol: f64,
    subset_cap: usize,
) -> Result<FaithfulnessReport, ModelError> {
    if model.variables.len() > 64 {
        return Err(ModelError::Cyclic); // mask-based memoization bound
    }
    let w = crate::mixing::build_w_star(model).map_err(|e| match e {
        crate::mixing::MixingError::Model(m) => m,
        _ => ModelError::Cyclic,
    })?;
    let mut checker = SubsetChecker {
        w: &w,
        diagram: model.diagram(),
        tol,
        cap: subset_cap,
        rank_memo: HashMap::new(),
        bneck_memo: HashMap::new(),
        examined: 0,
        truncated: false,
    };
    let mut violations = Vec::new();
    for v in &model.variables {
        if !(v.kind.is_measured() || v.kind == VariableKind::ObservedCogent) {
            continue;
        }
        let target = v.id;
        let an = model.ancestors(target)?;
        let pp = model.possible_parents(target)?;
        checker.run(
            target,
            &an,
            &pp,
            |sources, rows, rank, bottleneck| FaithfulnessViolation::LvsemmeA {
                target,
                sources,
                rows,
                rank,
                bottleneck,
            },
            &mut violations,
        )?;
        if v.kind == VariableKind::Mleaf {
            for parent in model.parent_set(target) {
                let mut an_b = an.clone();
                an_b.remove(&parent);
                let pp_b = possible_parents_of_any(model, parent)?;
                checker.run(
                    target,
                    &an_b,
                    &pp_b,
                    |sources, rows, rank, bottleneck| FaithfulnessViolation::LvsemmeB {
                        target,
                        parent,
                        sources,
                        rows,
                        rank,
                        bottleneck,
                    },
                    &mut violations,
                )?;
            }
        }
    }
    Ok(FaithfulnessReport::finish(violations, checker.examined, checker.truncated))
}
