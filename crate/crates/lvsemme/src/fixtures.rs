//! Small reference models shared by tests, benchmarks and documentation.

use crate::model::{CanonicalModel, VariableKind};

/// Confounder over a measured chain: H → Z_2, H → Y_3, Z_1 → Z_2, where Z_1 is
/// a measured cogent root, Z_2 a mleaf and Y_3 observed. With the coefficient
/// slots (b2, a21, b3) this is the smallest model exercising all five kinds.
pub fn confounded_triple_symbolic(b2: f64, a21: f64, b3: f64) -> CanonicalModel {
    let mut m = CanonicalModel::new();
    let h = m.add_variable("H", VariableKind::Unobserved);
    let z1 = m.add_measured("Z_1", VariableKind::MeasuredCogent, "X_1");
    let z2 = m.add_measured("Z_2", VariableKind::Mleaf, "X_2");
    let y3 = m.add_variable("Y_3", VariableKind::ObservedCogent);
    m.add_edge(h, z2, b2);
    m.add_edge(z1, z2, a21);
    m.add_edge(h, y3, b3);
    m
}

/// Measured fork: Z_1 → Z_2 (mleaf) and Z_1 → Y_3, no latents. Its mixing
/// matrix has one two-member ordered group, so recovery yields two models.
pub fn measured_fork(a21: f64, a31: f64) -> CanonicalModel {
    let mut m = CanonicalModel::new();
    let z1 = m.add_measured("Z_1", VariableKind::MeasuredCogent, "X_1");
    let z2 = m.add_measured("Z_2", VariableKind::Mleaf, "X_2");
    let y3 = m.add_variable("Y_3", VariableKind::ObservedCogent);
    m.add_edge(z1, z2, a21);
    m.add_edge(z1, y3, a31);
    m
}

/// Non-minimal three-variable model: H → {Z_2 (mleaf), Y_3} where the mleaf
/// has no other parents, so the confounder can be rewritten away.
pub fn removable_confounder(b2: f64, b3: f64) -> CanonicalModel {
    let mut m = CanonicalModel::new();
    let h = m.add_variable("H", VariableKind::Unobserved);
    let z2 = m.add_measured("Z_2", VariableKind::Mleaf, "X_2");
    let y3 = m.add_variable("Y_3", VariableKind::ObservedCogent);
    m.add_edge(h, z2, b2);
    m.add_edge(h, y3, b3);
    m
}

/// Chain of observed variables with the given edge weights:
/// Y_1 → Y_2 → … ; weight `i` sits on the edge into Y_{i+2}.
pub fn observed_chain(weights: &[f64]) -> CanonicalModel {
    let mut m = CanonicalModel::new();
    let mut prev = m.add_variable("Y_1", VariableKind::ObservedCogent);
    for (i, &w) in weights.iter().enumerate() {
        let next = m.add_variable(format!("Y_{}", i + 2), VariableKind::ObservedCogent);
        m.add_edge(prev, next, w);
        prev = next;
    }
    m
}
