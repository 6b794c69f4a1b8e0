//! Observationally equivalent rewrites of a canonical model: center and
//! noise switching within an ordered group, removal of a redundant
//! confounder, and structural comparison of models.
//!
//! All rewrites work by exact linear substitution on the structural
//! equations. Coefficients that merge to (numerically) zero delete the edge;
//! every such cancellation is recorded so edge-count arguments stay
//! auditable.

use crate::grouping::Group;
use crate::mixing::{build_w_star, match_up_to_permutation_scaling, MixingError};
use crate::model::{CanonicalModel, ModelError, VarId, VariableKind};
use std::collections::BTreeMap;
use thiserror::Error;

/// Coefficients below this merge threshold delete the edge.
pub const CANCEL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error("{0} is not a member of the group")]
    NotInGroup(VarId),
    #[error("group has no cogent center")]
    NoCenter,
    #[error("zero pivot on edge {0} -> {1}")]
    ZeroPivot(VarId, VarId),
    #[error("({0}, {1}) is not a removable-confounder witness")]
    InvalidWitness(VarId, VarId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
}

/// An edge whose merged coefficient vanished during a rewrite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cancellation {
    pub src: VarId,
    pub dst: VarId,
    pub residual: f64,
}

/// A rewritten model plus the cancellations applied while rebuilding it.
#[derive(Debug, Clone)]
pub struct Rewrite {
    pub model: CanonicalModel,
    pub cancellations: Vec<Cancellation>,
}

/// Structural equations as parent-coefficient maps, the working form for
/// substitution rewrites.
struct Equations {
    kinds: Vec<VariableKind>,
    parents: Vec<BTreeMap<VarId, f64>>,
}

impl Equations {
    fn of(model: &CanonicalModel) -> Self {
        let kinds = model.variables.iter().map(|v| v.kind).collect();
        let mut parents = vec![BTreeMap::new(); model.variables.len()];
        for e in &model.edges {
            *parents[e.dst.0].entry(e.src).or_insert(0.0) += e.weight.value;
        }
        Equations { kinds, parents }
    }

    fn coef(&self, dst: VarId, src: VarId) -> f64 {
        self.parents[dst.0].get(&src).copied().unwrap_or(0.0)
    }

    fn add(&mut self, dst: VarId, src: VarId, w: f64) {
        *self.parents[dst.0].entry(src).or_insert(0.0) += w;
    }

    /// Replaces every occurrence of `var` as a parent by the linear
    /// expression `expr`, except in the equations listed in `skip`.
    fn substitute(&mut self, var: VarId, expr: &BTreeMap<VarId, f64>, skip: &[VarId]) {
        for dst in 0..self.parents.len() {
            let dst = VarId(dst);
            if skip.contains(&dst) {
                continue;
            }
            let Some(c) = self.parents[dst.0].remove(&var) else { continue };
            for (&p, &w) in expr {
                self.add(dst, p, c * w);
            }
        }
    }

    /// Materializes a model, dropping merged-to-zero coefficients.
    fn into_model(self, template: &CanonicalModel, cancel_tol: f64) -> Rewrite {
        let mut model = CanonicalModel::new();
        for (i, v) in template.variables.iter().enumerate() {
            model.add_variable(v.name.clone(), self.kinds[i]);
        }
        model.measurements = template.measurements.clone();
        let mut cancellations = Vec::new();
        for (dst, eq) in self.parents.iter().enumerate() {
            for (&src, &w) in eq {
                if w.abs() > cancel_tol {
                    model.add_edge(src, VarId(dst), w);
                } else {
                    cancellations.push(Cancellation { src, dst: VarId(dst), residual: w });
                }
            }
        }
        Rewrite { model, cancellations }
    }
}

/// Rewrites the model so that `new_center` (a mleaf of the group) and/or the
/// noise of `new_noise` (a confounder of the group) take over the center slot
/// of `group`. `None` leaves the respective assignment unchanged; both `None`
/// returns the model unchanged.
pub fn switch_center(
    model: &CanonicalModel,
    group: &Group,
    new_center: Option<VarId>,
    new_noise: Option<VarId>,
    cancel_tol: f64,
) -> Result<Rewrite, EquivalenceError> {
    let center = group.center.ok_or(EquivalenceError::NoCenter)?;
    if let Some(z) = new_center {
        if z != center && !group.mleafs.contains(&z) {
            return Err(EquivalenceError::NotInGroup(z));
        }
    }
    if let Some(h) = new_noise {
        if !group.latent_members(model).contains(&h) {
            return Err(EquivalenceError::NotInGroup(h));
        }
    }
    let mut eqs = Equations::of(model);
    let mut current = center;

    if let Some(mleaf) = new_center.filter(|&z| z != center) {
        let pivot = eqs.coef(mleaf, center);
        if pivot.abs() <= cancel_tol {
            return Err(EquivalenceError::ZeroPivot(center, mleaf));
        }
        // the mleaf takes over the center's equation and noise slot
        let center_eq = eqs.parents[center.0].clone();
        let mleaf_eq = eqs.parents[mleaf.0].clone();
        let mut new_center_eq = BTreeMap::new();
        for (&p, &w) in &center_eq {
            new_center_eq.insert(p, pivot * w);
        }
        for (&p, &w) in &mleaf_eq {
            if p != center {
                *new_center_eq.entry(p).or_insert(0.0) += w;
            }
        }
        // the old center becomes a mleaf determined by the new one
        let mut old_center_eq = BTreeMap::from([(mleaf, 1.0 / pivot)]);
        for (&p, &w) in &mleaf_eq {
            if p != center {
                *old_center_eq.entry(p).or_insert(0.0) += -w / pivot;
            }
        }
        eqs.parents[mleaf.0] = new_center_eq;
        eqs.parents[center.0] = old_center_eq.clone();
        eqs.substitute(center, &old_center_eq, &[center, mleaf]);
        eqs.kinds[center.0] = VariableKind::Mleaf;
        eqs.kinds[mleaf.0] = VariableKind::MeasuredCogent;
        current = mleaf;
    }

    if let Some(latent) = new_noise {
        let pivot = eqs.coef(current, latent);
        if pivot.abs() <= cancel_tol {
            return Err(EquivalenceError::ZeroPivot(latent, current));
        }
        // the latent node keeps its id but now carries the center's old
        // noise; the center absorbs the latent's noise as its own
        eqs.parents[current.0].insert(latent, 1.0);
        let center_eq = eqs.parents[current.0].clone();
        // children of the latent read its old value through the center
        let mut through_center = BTreeMap::from([(current, 1.0 / pivot)]);
        for (&p, &w) in &center_eq {
            *through_center.entry(p).or_insert(0.0) += -w / pivot;
        }
        eqs.substitute(latent, &through_center, &[current]);
    }

    Ok(eqs.into_model(model, cancel_tol))
}

/// All models reachable by independent per-group center and noise switches
/// over the cogent groups of `grouping`; the input model is the first entry.
pub fn enumerate_equivalents(
    model: &CanonicalModel,
    grouping: &crate::grouping::OrderedGrouping,
    cancel_tol: f64,
) -> Result<Vec<CanonicalModel>, EquivalenceError> {
    struct GroupChoices {
        group: Group,
        centers: Vec<Option<VarId>>,
        noises: Vec<Option<VarId>>,
    }
    let mut choices = Vec::new();
    for g in &grouping.groups {
        if g.center.is_none() {
            continue;
        }
        let mut centers: Vec<Option<VarId>> = vec![None];
        centers.extend(g.mleafs.iter().map(|&z| Some(z)));
        let mut noises: Vec<Option<VarId>> = vec![None];
        noises.extend(g.latent_members(model).iter().map(|&h| Some(h)));
        choices.push(GroupChoices { group: g.clone(), centers, noises });
    }
    let mut out = Vec::new();
    let mut idx = vec![(0usize, 0usize); choices.len()];
    loop {
        let mut current = model.clone();
        for (g, &(ci, ni)) in choices.iter().zip(&idx) {
            if g.centers[ci].is_none() && g.noises[ni].is_none() {
                continue;
            }
            current = switch_center(&current, &g.group, g.centers[ci], g.noises[ni], cancel_tol)?
                .model;
        }
        out.push(current);
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(out);
            }
            idx[k].1 += 1;
            if idx[k].1 < choices[k].noises.len() {
                break;
            }
            idx[k].1 = 0;
            idx[k].0 += 1;
            if idx[k].0 < choices[k].centers.len() {
                break;
            }
            idx[k].0 = 0;
            k += 1;
        }
    }
}

/// Removes the confounder `latent` by promoting its mleaf child `mleaf` to a
/// noise-carrying measured cogent; every other child of the confounder is
/// rewired through the promoted variable. The pair must be a witness from the
/// minimality check.
pub fn reduce_latent(
    model: &CanonicalModel,
    latent: VarId,
    mleaf: VarId,
    cancel_tol: f64,
) -> Result<Rewrite, EquivalenceError> {
    if model.kind(latent)? != VariableKind::Unobserved
        || model.kind(mleaf)? != VariableKind::Mleaf
    {
        return Err(EquivalenceError::InvalidWitness(latent, mleaf));
    }
    let children = model.child_set(latent);
    if !children.contains(&mleaf) {
        return Err(EquivalenceError::InvalidWitness(latent, mleaf));
    }
    let an_mleaf = model.ancestors(mleaf)?;
    for &c in &children {
        if c != mleaf && !an_mleaf.is_subset(&model.ancestors(c)?) {
            return Err(EquivalenceError::InvalidWitness(latent, mleaf));
        }
    }
    let pivot = model.edge_weight(latent, mleaf).unwrap_or(0.0);
    if pivot.abs() <= cancel_tol {
        return Err(EquivalenceError::ZeroPivot(latent, mleaf));
    }
    let mut eqs = Equations::of(model);
    eqs.parents[mleaf.0].remove(&latent);
    // the confounder's value, read through the promoted mleaf
    let mut through = BTreeMap::from([(mleaf, 1.0 / pivot)]);
    for (&p, &w) in &eqs.parents[mleaf.0].clone() {
        *through.entry(p).or_insert(0.0) += -w / pivot;
    }
    eqs.substitute(latent, &through, &[mleaf]);
    eqs.kinds[mleaf.0] = VariableKind::MeasuredCogent;
    let rewrite = eqs.into_model(model, cancel_tol);

    // drop the latent variable, compacting ids
    let mut compact = CanonicalModel::new();
    let mut remap = vec![None; model.variables.len()];
    for v in &rewrite.model.variables {
        if v.id == latent {
            continue;
        }
        remap[v.id.0] = Some(compact.add_variable(v.name.clone(), v.kind));
    }
    for e in &rewrite.model.edges {
        compact.add_edge(remap[e.src.0].unwrap(), remap[e.dst.0].unwrap(), e.weight.clone());
    }
    for m in &rewrite.model.measurements {
        compact.measurements.push(crate::model::MeasurementPair {
            measured: remap[m.measured.0].unwrap(),
            measurement: remap[m.measurement.0].unwrap(),
        });
    }
    Ok(Rewrite { model: compact, cancellations: rewrite.cancellations })
}

/// Kind-respecting isomorphism test between the causal diagrams of two
/// models, by backtracking over degree-compatible candidates.
pub fn same_unlabeled_structure(a: &CanonicalModel, b: &CanonicalModel) -> bool {
    if a.variables.len() != b.variables.len() {
        return false;
    }
    let sig = |m: &CanonicalModel| -> Vec<(VariableKind, usize, usize)> {
        let d = m.diagram();
        let parents = d.parents();
        let children = d.children();
        m.variables
            .iter()
            .map(|v| (v.kind, parents[v.id.0].len(), children[v.id.0].len()))
            .collect()
    };
    let sa = sig(a);
    let sb = sig(b);
    {
        let mut ka = sa.clone();
        let mut kb = sb.clone();
        ka.sort();
        kb.sort();
        if ka != kb {
            return false;
        }
    }
    let n = a.variables.len();
    let ea: std::collections::BTreeSet<(usize, usize)> =
        a.diagram().edges.iter().map(|&(s, d)| (s.0, d.0)).collect();
    let eb: std::collections::BTreeSet<(usize, usize)> =
        b.diagram().edges.iter().map(|&(s, d)| (s.0, d.0)).collect();
    if ea.len() != eb.len() {
        return false;
    }
    // order nodes by scarcest signature first
    let mut counts: BTreeMap<(VariableKind, usize, usize), usize> = BTreeMap::new();
    for s in &sa {
        *counts.entry(*s).or_insert(0) += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (counts[&sa[i]], i));

    #[allow(clippy::too_many_arguments)]
    fn backtrack(
        pos: usize,
        order: &[usize],
        sa: &[(VariableKind, usize, usize)],
        sb: &[(VariableKind, usize, usize)],
        ea: &std::collections::BTreeSet<(usize, usize)>,
        eb: &std::collections::BTreeSet<(usize, usize)>,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
    ) -> bool {
        if pos == order.len() {
            return true;
        }
        let u = order[pos];
        for v in 0..sb.len() {
            if used[v] || sb[v] != sa[u] {
                continue;
            }
            let consistent = order[..pos].iter().all(|&u2| {
                let v2 = map[u2].unwrap();
                ea.contains(&(u, u2)) == eb.contains(&(v, v2))
                    && ea.contains(&(u2, u)) == eb.contains(&(v2, v))
            });
            if !consistent {
                continue;
            }
            map[u] = Some(v);
            used[v] = true;
            if backtrack(pos + 1, order, sa, sb, ea, eb, map, used) {
                return true;
            }
            map[u] = None;
            used[v] = false;
        }
        false
    }
    let mut map = vec![None; n];
    let mut used = vec![false; n];
    backtrack(0, &order, &sa, &sb, &ea, &eb, &mut map, &mut used)
}

/// True when both models induce the same mixing matrix up to column
/// permutation and scaling (rows aligned by observable label).
pub fn models_equal_mixing(
    a: &CanonicalModel,
    b: &CanonicalModel,
    tol: f64,
) -> Result<bool, EquivalenceError> {
    let wa = build_w_star(a)?;
    let wb = build_w_star(b)?;
    match match_up_to_permutation_scaling(&wa, &wb, tol) {
        Ok(witness) => Ok(witness.is_some()),
        Err(MixingError::ShapeMismatch(..)) | Err(MixingError::RowLabelMismatch) => Ok(false),
        Err(e) => Err(e.into()),
    }
}
