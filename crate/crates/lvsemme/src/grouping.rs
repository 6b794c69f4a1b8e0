//! Ancestral and direct ordered groupings (AOG / DOG) of a canonical model.
//!
//! Both groupings start from one group per cogent variable, then attach each
//! mleaf to the group of a qualifying measured parent and each confounder's
//! noise to the group of a qualifying cogent child; whatever fails to attach
//! becomes a singleton group. The AOG qualifies by ancestry, the DOG by the
//! stricter edge-identifiability conditions, so every DOG group is contained
//! in an AOG group.

use crate::model::{CanonicalModel, ModelError, VarId, VariableKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// What a group contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    /// Exactly one cogent variable, plus attached mleafs and confounder noises.
    Cogent,
    /// A single mleaf with no noise of its own.
    MleafOnly,
    /// A single confounder noise with no row of its own.
    UnobservedOnly,
}

/// A noise source: either the exogenous noise of a named variable (cogent or
/// unobserved), or an anonymous column of a recovered mixing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseRef {
    #[serde(rename = "var")]
    Var(VarId),
    #[serde(rename = "col")]
    Col(usize),
}

/// One ordered group.
///
/// For groupings computed from a model, `center` is always the cogent member
/// of a cogent group and `mleafs` are exactly its attached mleafs. Groupings
/// recovered from a mixing matrix may not know which measured row is the
/// cogent one; then `center` is `None` and `mleafs` holds all candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub kind: GroupKind,
    pub center: Option<VarId>,
    pub mleafs: BTreeSet<VarId>,
    pub noises: BTreeSet<NoiseRef>,
}

impl Group {
    /// Variables this group covers (center, mleafs, and latents whose noise
    /// is attached here).
    pub fn member_vars(&self) -> BTreeSet<VarId> {
        let mut out = self.mleafs.clone();
        if let Some(c) = self.center {
            out.insert(c);
        }
        for n in &self.noises {
            if let NoiseRef::Var(v) = n {
                out.insert(*v);
            }
        }
        out
    }

    /// Latent variables whose noise belongs to this group, excluding the
    /// center's own noise.
    pub fn latent_members(&self, model: &CanonicalModel) -> BTreeSet<VarId> {
        self.noises
            .iter()
            .filter_map(|n| match n {
                NoiseRef::Var(v) if model.variables[v.0].kind == VariableKind::Unobserved => {
                    Some(*v)
                }
                _ => None,
            })
            .collect()
    }
}

/// Ordered list of groups; the order is a topological order of the group DAG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedGrouping {
    pub groups: Vec<Group>,
}

impl OrderedGrouping {
    pub fn group_of(&self, v: VarId) -> Option<usize> {
        self.groups.iter().position(|g| g.member_vars().contains(&v))
    }

    /// Groups that contain a cogent variable, in emission order.
    pub fn cogent_groups(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.kind == GroupKind::Cogent)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The measured parent whose group a mleaf joins in the AOG, if any: all of
/// the mleaf's other parents must be ancestors of that parent. Acyclicity
/// makes the qualifying parent unique.
fn aog_mleaf_host(model: &CanonicalModel, mleaf: VarId) -> Option<VarId> {
    let parents = model.parent_set(mleaf);
    for &p in &parents {
        if model.variables[p.0].kind != VariableKind::MeasuredCogent {
            continue;
        }
        let an_p = model.ancestors(p).expect("valid id");
        if parents.iter().all(|&q| q == p || an_p.contains(&q)) {
            return Some(p);
        }
    }
    None
}

/// The cogent child whose group a confounder's noise joins in the AOG, if
/// any: every other child of the confounder must be a descendant of it.
fn aog_latent_host(model: &CanonicalModel, latent: VarId) -> Option<VarId> {
    let children = model.child_set(latent);
    for &c in &children {
        if !model.variables[c.0].kind.is_cogent() {
            continue;
        }
        let de_c = model.descendants(c).expect("valid id");
        if children.iter().all(|&w| w == c || de_c.contains(&w)) {
            return Some(c);
        }
    }
    None
}

/// DOG attachment for a mleaf: a measured parent whose edge into the mleaf
/// fails both identifiability clauses.
fn dog_mleaf_host(model: &CanonicalModel, mleaf: VarId) -> Option<VarId> {
    let parents = model.parent_set(mleaf);
    for &p in &parents {
        if model.variables[p.0].kind != VariableKind::MeasuredCogent {
            continue;
        }
        if !model.edge_identifiable_me(p, mleaf).expect("kinds checked") {
            return Some(p);
        }
    }
    None
}

/// DOG attachment for a confounder: a cogent child such that every other
/// child (of any kind) is a direct child of it and inherits all its parents.
///
/// The per-edge identifiability test only quantifies over cogent siblings;
/// for grouping, mleaf children of the confounder constrain the attachment in
/// the same way, otherwise DOG groups would not refine AOG groups.
fn dog_latent_host(model: &CanonicalModel, latent: VarId) -> Option<VarId> {
    let children = model.child_set(latent);
    for &c in &children {
        if !model.variables[c.0].kind.is_cogent() {
            continue;
        }
        let pa_c = model.parent_set(c);
        let holds = children.iter().all(|&w| {
            if w == c {
                return true;
            }
            let pa_w = model.parent_set(w);
            pa_w.contains(&c) && pa_c.is_subset(&pa_w)
        });
        if holds {
            return Some(c);
        }
    }
    None
}

fn compute_grouping(
    model: &CanonicalModel,
    mleaf_host: impl Fn(&CanonicalModel, VarId) -> Option<VarId>,
    latent_host: impl Fn(&CanonicalModel, VarId) -> Option<VarId>,
) -> Result<OrderedGrouping, ModelError> {
    let mut by_center: BTreeMap<VarId, Group> = BTreeMap::new();
    for c in model.cogents() {
        by_center.insert(
            c,
            Group {
                kind: GroupKind::Cogent,
                center: Some(c),
                mleafs: BTreeSet::new(),
                noises: BTreeSet::from([NoiseRef::Var(c)]),
            },
        );
    }
    let mut singles: Vec<Group> = Vec::new();
    for z in model.mleafs() {
        match mleaf_host(model, z) {
            Some(host) => {
                by_center.get_mut(&host).expect("host is cogent").mleafs.insert(z);
            }
            None => singles.push(Group {
                kind: GroupKind::MleafOnly,
                center: None,
                mleafs: BTreeSet::from([z]),
                noises: BTreeSet::new(),
            }),
        }
    }
    for h in model.latents() {
        match latent_host(model, h) {
            Some(host) => {
                by_center.get_mut(&host).expect("host is cogent").noises.insert(NoiseRef::Var(h));
            }
            None => singles.push(Group {
                kind: GroupKind::UnobservedOnly,
                center: None,
                mleafs: BTreeSet::new(),
                noises: BTreeSet::from([NoiseRef::Var(h)]),
            }),
        }
    }
    let mut groups: Vec<Group> = by_center.into_values().collect();
    groups.extend(singles);
    order_groups(model, groups)
}

/// Sorts groups into a deterministic topological order of the group DAG:
/// sources first, ties broken by the smallest member id.
fn order_groups(model: &CanonicalModel, groups: Vec<Group>) -> Result<OrderedGrouping, ModelError> {
    let k = groups.len();
    let members: Vec<BTreeSet<VarId>> = groups.iter().map(|g| g.member_vars()).collect();
    let mut descendants: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); k];
    for (i, mem) in members.iter().enumerate() {
        for &v in mem {
            descendants[i].extend(model.descendants(v)?);
        }
    }
    let mut edges = vec![Vec::new(); k];
    let mut indeg = vec![0usize; k];
    for i in 0..k {
        for j in 0..k {
            if i != j && members[j].iter().any(|v| descendants[i].contains(v)) {
                edges[i].push(j);
                indeg[j] += 1;
            }
        }
    }
    let min_member =
        |g: usize| members[g].iter().next().copied().map(|v| v.0).unwrap_or(usize::MAX);
    let mut ready: BTreeSet<(usize, usize)> =
        (0..k).filter(|&i| indeg[i] == 0).map(|i| (min_member(i), i)).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(&(key, i)) = ready.iter().next() {
        ready.remove(&(key, i));
        order.push(i);
        for &j in &edges[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert((min_member(j), j));
            }
        }
    }
    if order.len() != k {
        return Err(ModelError::Cyclic);
    }
    Ok(OrderedGrouping { groups: order.into_iter().map(|i| groups[i].clone()).collect() })
}

/// Ancestral ordered grouping of a canonical model.
pub fn compute_aog(model: &CanonicalModel) -> Result<OrderedGrouping, ModelError> {
    compute_grouping(model, aog_mleaf_host, aog_latent_host)
}

/// Direct ordered grouping of a canonical model.
pub fn compute_dog(model: &CanonicalModel) -> Result<OrderedGrouping, ModelError> {
    compute_grouping(model, dog_mleaf_host, dog_latent_host)
}

/// Reachability between groups: the pair `(i, j)` is present when some member
/// of group `i` has a directed path to a member of group `j`.
pub fn group_dag(
    model: &CanonicalModel,
    grouping: &OrderedGrouping,
) -> Result<BTreeSet<(usize, usize)>, ModelError> {
    let members: Vec<BTreeSet<VarId>> =
        grouping.groups.iter().map(|g| g.member_vars()).collect();
    let mut out = BTreeSet::new();
    for (i, mem) in members.iter().enumerate() {
        let mut desc = BTreeSet::new();
        for &v in mem {
            desc.extend(model.descendants(v)?);
        }
        for (j, other) in members.iter().enumerate() {
            if i != j && other.iter().any(|v| desc.contains(v)) {
                out.insert((i, j));
            }
        }
    }
    Ok(out)
}

/// True when `order` (group indices in emission order) never places a group
/// after one of its descendants in `dag`.
pub fn order_consistent_with(dag: &BTreeSet<(usize, usize)>, order: &[usize]) -> bool {
    let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(p, &g)| (g, p)).collect();
    dag.iter().all(|(i, j)| pos[i] < pos[j])
}

/// True when both groupings induce the same partition: equal multisets of
/// (kind, variable members, noise members). Emission order and center
/// knowledge are not compared.
pub fn same_partition(a: &OrderedGrouping, b: &OrderedGrouping) -> bool {
    let key = |g: &OrderedGrouping| {
        let mut items: Vec<(GroupKind, BTreeSet<VarId>, BTreeSet<NoiseRef>)> = g
            .groups
            .iter()
            .map(|gr| (gr.kind, gr.member_vars(), gr.noises.clone()))
            .collect();
        items.sort_by_key(|x| (x.1.clone(), x.2.clone()));
        items
    };
    key(a) == key(b)
}
