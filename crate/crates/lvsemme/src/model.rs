//! Canonical LV-SEM-ME models: variables, weighted edges, measurement map,
//! graph queries, validity and minimality checks.
//!
//! A canonical model partitions its variables into unobserved confounders
//! (roots with at least two children), observed cogents, measured cogents,
//! mleafs (measured variables whose only child is their measurement, carrying
//! no exogenous noise) and measurements. The structural equations are linear:
//! every non-root variable is a weighted sum of its parents plus, for cogent
//! variables, its own exogenous noise.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

/// Index of a variable within a model. Stable across serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Role of a variable in the canonical partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariableKind {
    /// Neither observed nor measured; always a root confounder.
    #[serde(rename = "unobserved")]
    Unobserved,
    /// Observed without error.
    #[serde(rename = "observed")]
    ObservedCogent,
    /// Measured with error and has at least one child besides its measurement.
    #[serde(rename = "measured")]
    MeasuredCogent,
    /// Measured with error, no children besides its measurement, no own noise.
    #[serde(rename = "mleaf")]
    Mleaf,
    /// Noisy copy of a measured variable.
    #[serde(rename = "measurement")]
    Measurement,
}

impl VariableKind {
    /// True for variables in Z (measured with error, excluding the measurement itself).
    pub fn is_measured(self) -> bool {
        matches!(self, VariableKind::MeasuredCogent | VariableKind::Mleaf)
    }

    /// True for cogent variables (Z^C and Y).
    pub fn is_cogent(self) -> bool {
        matches!(self, VariableKind::MeasuredCogent | VariableKind::ObservedCogent)
    }

    /// True for variables in V = H ∪ Z ∪ Y (everything but measurements).
    pub fn in_v(self) -> bool {
        !matches!(self, VariableKind::Measurement)
    }
}

/// A named variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub kind: VariableKind,
}

/// Edge weight. `text` preserves the decimal literal from a model file so that
/// round-trips do not reformat it; programmatic weights leave it unset.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub value: f64,
    pub text: Option<String>,
}

impl Weight {
    pub fn new(value: f64) -> Self {
        Weight { value, text: None }
    }
}

impl From<f64> for Weight {
    fn from(value: f64) -> Self {
        Weight::new(value)
    }
}

/// Weighted structural edge among variables in V.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: VarId,
    pub dst: VarId,
    pub weight: Weight,
}

/// Pairing of a measured variable with its measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementPair {
    pub measured: VarId,
    pub measurement: VarId,
}

/// A canonical linear LV-SEM-ME.
///
/// `edges` holds the structural connections among variables in V; edges from
/// measured variables to their measurements are implied by `measurements` and
/// always carry coefficient 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CanonicalModel {
    pub variables: Vec<Variable>,
    pub edges: Vec<Edge>,
    pub measurements: Vec<MeasurementPair>,
}

/// Structural problems that make a model unusable for any query.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown variable id {0}")]
    UnknownId(VarId),
    #[error("variable {0} has kind {1:?}, expected {2}")]
    WrongKind(VarId, VariableKind, &'static str),
    #[error("no edge from {0} to {1}")]
    NoSuchEdge(VarId, VarId),
    #[error("model contains a directed cycle")]
    Cyclic,
}

/// One violated canonical-form rule; violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Violation {
    DanglingId { id: VarId },
    DuplicateName { name: String },
    MisnumberedVariable { id: VarId },
    Cyclic {},
    ConfounderWithParent { confounder: VarId, parent: VarId },
    ConfounderWithOneChild { confounder: VarId },
    MleafWithExtraChild { mleaf: VarId, child: VarId },
    MleafWithoutParent { mleaf: VarId },
    ChildlessMeasuredCogent { variable: VarId },
    EdgeFromMleaf { src: VarId, dst: VarId },
    EdgeFromMeasurement { src: VarId, dst: VarId },
    EdgeIntoMeasurement { src: VarId, dst: VarId },
    ZeroWeightEdge { src: VarId, dst: VarId },
    DuplicateEdge { src: VarId, dst: VarId },
    MeasurementMapMismatch { id: VarId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingId { id } => write!(f, "dangling-id: {id}"),
            Violation::DuplicateName { name } => write!(f, "duplicate-name: {name}"),
            Violation::MisnumberedVariable { id } => write!(f, "misnumbered-variable: {id}"),
            Violation::Cyclic {} => write!(f, "cyclic"),
            Violation::ConfounderWithParent { confounder, parent } => {
                write!(f, "confounder-with-parent: {parent} -> {confounder}")
            }
            Violation::ConfounderWithOneChild { confounder } => {
                write!(f, "confounder-with-one-child: {confounder}")
            }
            Violation::MleafWithExtraChild { mleaf, child } => {
                write!(f, "mleaf-with-extra-child: {mleaf} -> {child}")
            }
            Violation::MleafWithoutParent { mleaf } => write!(f, "mleaf-without-parent: {mleaf}"),
            Violation::ChildlessMeasuredCogent { variable } => {
                write!(f, "childless-measured-cogent: {variable}")
            }
            Violation::EdgeFromMleaf { src, dst } => write!(f, "edge-from-mleaf: {src} -> {dst}"),
            Violation::EdgeFromMeasurement { src, dst } => {
                write!(f, "edge-from-measurement: {src} -> {dst}")
            }
            Violation::EdgeIntoMeasurement { src, dst } => {
                write!(f, "edge-into-measurement: {src} -> {dst}")
            }
            Violation::ZeroWeightEdge { src, dst } => write!(f, "zero-weight-edge: {src} -> {dst}"),
            Violation::DuplicateEdge { src, dst } => write!(f, "duplicate-edge: {src} -> {dst}"),
            Violation::MeasurementMapMismatch { id } => write!(f, "measurement-map-mismatch: {id}"),
        }
    }
}

/// Unweighted directed view of a model over V ∪ X.
#[derive(Debug, Clone)]
pub struct CausalDiagram {
    pub n: usize,
    pub edges: Vec<(VarId, VarId)>,
}

impl CausalDiagram {
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for &(s, d) in &self.edges {
            out[s.0].push(d.0);
        }
        out
    }

    pub fn parents(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for &(s, d) in &self.edges {
            out[d.0].push(s.0);
        }
        out
    }
}

/// Total causal effects among variables in V, indexed by variable id.
///
/// `effect_of_on(i, j)` is the summed product of path coefficients over all
/// directed paths from V_i to V_j; zero when no path exists.
#[derive(Debug, Clone)]
pub struct TotalEffects {
    matrix: nalgebra::DMatrix<f64>,
    in_v: Vec<bool>,
}

impl TotalEffects {
    pub fn effect_of_on(&self, src: VarId, dst: VarId) -> f64 {
        debug_assert!(self.in_v[src.0] && self.in_v[dst.0]);
        self.matrix[(dst.0, src.0)]
    }

    pub fn matrix(&self) -> &nalgebra::DMatrix<f64> {
        &self.matrix
    }
}

impl CanonicalModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a variable and returns its id.
    pub fn add_variable(&mut self, name: impl Into<String>, kind: VariableKind) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable { id, name: name.into(), kind });
        id
    }

    pub fn add_edge(&mut self, src: VarId, dst: VarId, weight: impl Into<Weight>) {
        self.edges.push(Edge { src, dst, weight: weight.into() });
    }

    /// Adds a measured variable together with its measurement node.
    pub fn add_measured(
        &mut self,
        name: impl Into<String>,
        kind: VariableKind,
        measurement_name: impl Into<String>,
    ) -> VarId {
        debug_assert!(kind.is_measured());
        let z = self.add_variable(name, kind);
        let x = self.add_variable(measurement_name, VariableKind::Measurement);
        self.measurements.push(MeasurementPair { measured: z, measurement: x });
        z
    }

    pub fn var(&self, id: VarId) -> Result<&Variable, ModelError> {
        self.variables.get(id.0).ok_or(ModelError::UnknownId(id))
    }

    pub fn kind(&self, id: VarId) -> Result<VariableKind, ModelError> {
        Ok(self.var(id)?.kind)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.id)
    }

    pub fn ids_with(&self, pred: impl Fn(VariableKind) -> bool) -> Vec<VarId> {
        self.variables.iter().filter(|v| pred(v.kind)).map(|v| v.id).collect()
    }

    /// Mleaf variables in declaration order (the Z^L block).
    pub fn mleafs(&self) -> Vec<VarId> {
        self.ids_with(|k| k == VariableKind::Mleaf)
    }

    /// Measured cogent variables in declaration order (the Z^C block).
    pub fn measured_cogents(&self) -> Vec<VarId> {
        self.ids_with(|k| k == VariableKind::MeasuredCogent)
    }

    /// Observed variables in declaration order (the Y block).
    pub fn observed(&self) -> Vec<VarId> {
        self.ids_with(|k| k == VariableKind::ObservedCogent)
    }

    /// Unobserved confounders in declaration order (the H block).
    pub fn latents(&self) -> Vec<VarId> {
        self.ids_with(|k| k == VariableKind::Unobserved)
    }

    /// Cogent variables ordered [Z^C; Y].
    pub fn cogents(&self) -> Vec<VarId> {
        let mut out = self.measured_cogents();
        out.extend(self.observed());
        out
    }

    pub fn measurement_of(&self, measured: VarId) -> Option<VarId> {
        self.measurements.iter().find(|m| m.measured == measured).map(|m| m.measurement)
    }

    pub fn measured_by(&self, measurement: VarId) -> Option<VarId> {
        self.measurements.iter().find(|m| m.measurement == measurement).map(|m| m.measured)
    }

    /// The label a variable carries in observable data: its measurement's name
    /// for measured variables, its own name otherwise.
    pub fn observable_name(&self, id: VarId) -> Result<&str, ModelError> {
        let v = self.var(id)?;
        if v.kind.is_measured() {
            let x = self
                .measurement_of(id)
                .ok_or(ModelError::WrongKind(id, v.kind, "measured variable with measurement"))?;
            Ok(&self.var(x)?.name)
        } else {
            Ok(&v.name)
        }
    }

    /// Structural parents with coefficients (measurement nodes have their
    /// measured variable as single parent, coefficient 1).
    pub fn parents_of(&self, id: VarId) -> Vec<(VarId, f64)> {
        let mut out: Vec<(VarId, f64)> =
            self.edges.iter().filter(|e| e.dst == id).map(|e| (e.src, e.weight.value)).collect();
        if let Some(z) = self.measured_by(id) {
            out.push((z, 1.0));
        }
        out.sort_by_key(|(v, _)| *v);
        out
    }

    /// Parent set restricted to V (excludes the measured→measurement edge).
    pub fn parent_set(&self, id: VarId) -> BTreeSet<VarId> {
        self.edges.iter().filter(|e| e.dst == id).map(|e| e.src).collect()
    }

    /// Children within V ∪ X.
    pub fn children_of(&self, id: VarId) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.edges.iter().filter(|e| e.src == id).map(|e| e.dst).collect();
        if let Some(x) = self.measurement_of(id) {
            out.push(x);
        }
        out.sort();
        out.dedup();
        out
    }

    /// Children within V (measurements excluded).
    pub fn child_set(&self, id: VarId) -> BTreeSet<VarId> {
        self.edges.iter().filter(|e| e.src == id).map(|e| e.dst).collect()
    }

    pub fn edge_weight(&self, src: VarId, dst: VarId) -> Option<f64> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst).map(|e| e.weight.value)
    }

    pub fn diagram(&self) -> CausalDiagram {
        let mut edges: Vec<(VarId, VarId)> =
            self.edges.iter().map(|e| (e.src, e.dst)).collect();
        for m in &self.measurements {
            edges.push((m.measured, m.measurement));
        }
        edges.sort();
        CausalDiagram { n: self.variables.len(), edges }
    }

    /// Variables in V ∪ X in a topological order, or an error on a cycle.
    pub fn topo_order(&self) -> Result<Vec<VarId>, ModelError> {
        let n = self.variables.len();
        let diagram = self.diagram();
        let children = diagram.children();
        let mut indeg = vec![0usize; n];
        for &(_, d) in &diagram.edges {
            indeg[d.0] += 1;
        }
        let mut queue: VecDeque<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(VarId(i));
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(ModelError::Cyclic)
        }
    }

    /// Exact transitive closure of parenthood into `id`, excluding `id`.
    pub fn ancestors(&self, id: VarId) -> Result<BTreeSet<VarId>, ModelError> {
        self.var(id)?;
        let parents = self.diagram().parents();
        Ok(reach_from(id, &parents))
    }

    /// Mirror of [`ancestors`](Self::ancestors).
    pub fn descendants(&self, id: VarId) -> Result<BTreeSet<VarId>, ModelError> {
        self.var(id)?;
        let children = self.diagram().children();
        Ok(reach_from(id, &children))
    }

    /// Possible parent set of a variable in Z ∪ Y: its non-latent ancestors
    /// plus every other mleaf whose parents all lie in its ancestor set.
    pub fn possible_parents(&self, id: VarId) -> Result<BTreeSet<VarId>, ModelError> {
        let kind = self.kind(id)?;
        if !(kind.is_measured() || kind == VariableKind::ObservedCogent) {
            return Err(ModelError::WrongKind(id, kind, "variable in Z or Y"));
        }
        let an = self.ancestors(id)?;
        let mut out: BTreeSet<VarId> = an
            .iter()
            .copied()
            .filter(|&v| self.variables[v.0].kind != VariableKind::Unobserved)
            .collect();
        for m in self.mleafs() {
            if m != id && self.parent_set(m).is_subset(&an) {
                out.insert(m);
            }
        }
        Ok(out)
    }

    /// Total effects T = (I − A)^{-1} − I over V, accumulated along a
    /// topological order so the result is exact for acyclic models.
    pub fn total_effects(&self) -> Result<TotalEffects, ModelError> {
        let n = self.variables.len();
        let mut matrix = nalgebra::DMatrix::<f64>::zeros(n, n);
        let order = self.topo_order()?;
        for &v in &order {
            if self.variables[v.0].kind == VariableKind::Measurement {
                continue;
            }
            for (p, w) in self.parents_of(v) {
                // effect of u on v accumulates via each parent p
                matrix[(v.0, p.0)] += w;
                for u in 0..n {
                    let through = matrix[(p.0, u)];
                    if through != 0.0 {
                        matrix[(v.0, u)] += w * through;
                    }
                }
            }
        }
        let in_v = self.variables.iter().map(|v| v.kind.in_v()).collect();
        Ok(TotalEffects { matrix, in_v })
    }

    /// Checks every canonical-form rule and reports all violations.
    pub fn validate_canonical(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.variables.len();
        for (i, v) in self.variables.iter().enumerate() {
            if v.id.0 != i {
                out.push(Violation::MisnumberedVariable { id: v.id });
            }
        }
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                out.push(Violation::DuplicateName { name: v.name.clone() });
            }
        }
        let mut ok_ids = true;
        for e in &self.edges {
            if e.src.0 >= n {
                out.push(Violation::DanglingId { id: e.src });
                ok_ids = false;
            }
            if e.dst.0 >= n {
                out.push(Violation::DanglingId { id: e.dst });
                ok_ids = false;
            }
        }
        for m in &self.measurements {
            if m.measured.0 >= n || m.measurement.0 >= n {
                out.push(Violation::DanglingId {
                    id: if m.measured.0 >= n { m.measured } else { m.measurement },
                });
                ok_ids = false;
            }
        }
        if !ok_ids {
            return out;
        }

        // measurement map must pair each measured variable with exactly one
        // measurement node and vice versa
        for v in &self.variables {
            match v.kind {
                VariableKind::MeasuredCogent | VariableKind::Mleaf => {
                    let count = self.measurements.iter().filter(|m| m.measured == v.id).count();
                    if count != 1 {
                        out.push(Violation::MeasurementMapMismatch { id: v.id });
                    }
                }
                VariableKind::Measurement => {
                    let count =
                        self.measurements.iter().filter(|m| m.measurement == v.id).count();
                    if count != 1 {
                        out.push(Violation::MeasurementMapMismatch { id: v.id });
                    }
                }
                _ => {
                    if self
                        .measurements
                        .iter()
                        .any(|m| m.measured == v.id || m.measurement == v.id)
                    {
                        out.push(Violation::MeasurementMapMismatch { id: v.id });
                    }
                }
            }
        }
        for m in &self.measurements {
            if !self.variables[m.measured.0].kind.is_measured() {
                out.push(Violation::MeasurementMapMismatch { id: m.measured });
            }
            if self.variables[m.measurement.0].kind != VariableKind::Measurement {
                out.push(Violation::MeasurementMapMismatch { id: m.measurement });
            }
        }

        let mut seen_edges = BTreeSet::new();
        for e in &self.edges {
            if !seen_edges.insert((e.src, e.dst)) {
                out.push(Violation::DuplicateEdge { src: e.src, dst: e.dst });
            }
            if e.weight.value == 0.0 {
                out.push(Violation::ZeroWeightEdge { src: e.src, dst: e.dst });
            }
            match self.variables[e.src.0].kind {
                VariableKind::Mleaf => out.push(Violation::EdgeFromMleaf { src: e.src, dst: e.dst }),
                VariableKind::Measurement => {
                    out.push(Violation::EdgeFromMeasurement { src: e.src, dst: e.dst })
                }
                _ => {}
            }
            match self.variables[e.dst.0].kind {
                VariableKind::Measurement => {
                    out.push(Violation::EdgeIntoMeasurement { src: e.src, dst: e.dst })
                }
                VariableKind::Unobserved => {
                    out.push(Violation::ConfounderWithParent { confounder: e.dst, parent: e.src })
                }
                _ => {}
            }
        }

        if self.topo_order().is_err() {
            out.push(Violation::Cyclic {});
        }

        for v in &self.variables {
            match v.kind {
                VariableKind::Unobserved => {
                    if self.child_set(v.id).len() < 2 {
                        out.push(Violation::ConfounderWithOneChild { confounder: v.id });
                    }
                }
                VariableKind::Mleaf => {
                    for c in self.child_set(v.id) {
                        out.push(Violation::MleafWithExtraChild { mleaf: v.id, child: c });
                    }
                    if self.parent_set(v.id).is_empty() {
                        out.push(Violation::MleafWithoutParent { mleaf: v.id });
                    }
                }
                VariableKind::MeasuredCogent if self.child_set(v.id).is_empty() => {
                    out.push(Violation::ChildlessMeasuredCogent { variable: v.id });
                }
                _ => {}
            }
        }
        out
    }

    /// Edge identifiability for a measured-cogent → mleaf edge.
    ///
    /// True iff another parent of the mleaf is not a parent of the source, or
    /// some other child of the source misses one of the mleaf's parents.
    pub fn edge_identifiable_me(&self, src: VarId, dst: VarId) -> Result<bool, ModelError> {
        if self.kind(src)? != VariableKind::MeasuredCogent {
            return Err(ModelError::WrongKind(src, self.kind(src)?, "measured cogent"));
        }
        if self.kind(dst)? != VariableKind::Mleaf {
            return Err(ModelError::WrongKind(dst, self.kind(dst)?, "mleaf"));
        }
        let mleaf_parents = self.parent_set(dst);
        if !mleaf_parents.contains(&src) {
            return Err(ModelError::NoSuchEdge(src, dst));
        }
        let src_parents = self.parent_set(src);
        let others: BTreeSet<VarId> =
            mleaf_parents.iter().copied().filter(|&p| p != src).collect();
        if others.iter().any(|p| !src_parents.contains(p)) {
            return Ok(true);
        }
        for child in self.child_set(src) {
            if child == dst {
                continue;
            }
            let child_parents = self.parent_set(child);
            if others.iter().any(|p| !child_parents.contains(p)) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Edge identifiability for an unobserved → cogent edge.
    ///
    /// True iff the confounder has another cogent child that either is not a
    /// child of the target or misses one of the target's parents.
    pub fn edge_identifiable_lv(&self, src: VarId, dst: VarId) -> Result<bool, ModelError> {
        if self.kind(src)? != VariableKind::Unobserved {
            return Err(ModelError::WrongKind(src, self.kind(src)?, "unobserved"));
        }
        if !self.kind(dst)?.is_cogent() {
            return Err(ModelError::WrongKind(dst, self.kind(dst)?, "cogent"));
        }
        if !self.parent_set(dst).contains(&src) {
            return Err(ModelError::NoSuchEdge(src, dst));
        }
        let dst_parents = self.parent_set(dst);
        for sib in self.child_set(src) {
            if sib == dst || !self.variables[sib.0].kind.is_cogent() {
                continue;
            }
            let sib_parents = self.parent_set(sib);
            if !sib_parents.contains(&dst) {
                return Ok(true);
            }
            if dst_parents.iter().any(|p| !sib_parents.contains(p)) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Graphical minimality test. Returns `(false, Some((h, z)))` when some
    /// confounder `h` has a mleaf child `z` whose ancestor set is contained in
    /// the ancestor set of every other child of `h`; such a confounder is
    /// removable. Witnesses are scanned in id order.
    pub fn is_minimal(&self) -> Result<(bool, Option<(VarId, VarId)>), ModelError> {
        for h in self.latents() {
            let children: Vec<VarId> = self.child_set(h).into_iter().collect();
            for &z in &children {
                if self.variables[z.0].kind != VariableKind::Mleaf {
                    continue;
                }
                let an_z = self.ancestors(z)?;
                let removable = children.iter().all(|&c| {
                    if c == z {
                        return true;
                    }
                    let an_c = self.ancestors(c).expect("id checked");
                    an_z.is_subset(&an_c)
                });
                if removable {
                    return Ok((false, Some((h, z))));
                }
            }
        }
        Ok((true, None))
    }
}

fn reach_from(start: VarId, step: &[Vec<usize>]) -> BTreeSet<VarId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = step[start.0].clone();
    while let Some(v) = stack.pop() {
        if seen.insert(VarId(v)) {
            stack.extend(step[v].iter().copied());
        }
    }
    seen
}
