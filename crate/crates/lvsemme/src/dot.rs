//! Graph-description (DOT) export of canonical models.
//!
//! Unobserved nodes are filled, mleaf nodes double-circled, measurement nodes
//! dashed; edges carry their coefficient as a label.

use crate::model::{CanonicalModel, VariableKind};
use std::fmt::Write;

pub fn export_dot(model: &CanonicalModel) -> String {
    let mut out = String::from("digraph model {\n  rankdir=LR;\n  node [shape=circle];\n");
    for v in &model.variables {
        let attrs = match v.kind {
            VariableKind::Unobserved => " [style=filled, fillcolor=lightblue]",
            VariableKind::Mleaf => " [shape=doublecircle]",
            VariableKind::Measurement => " [style=dashed]",
            _ => "",
        };
        let _ = writeln!(out, "  \"{}\"{};", v.name, attrs);
    }
    for e in &model.edges {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            model.variables[e.src.0].name, model.variables[e.dst.0].name, e.weight.value
        );
    }
    for m in &model.measurements {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [style=dashed];",
            model.variables[m.measured.0].name, model.variables[m.measurement.0].name
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn six_node_model_is_fully_listed() {
        let text = export_dot(&fixtures::confounded_triple_symbolic(0.7, -1.3, 2.0));
        for name in ["H", "Z_1", "Z_2", "Y_3", "X_1", "X_2"] {
            assert!(text.contains(&format!("\"{name}\"")));
        }
        assert!(text.contains("doublecircle"));
        assert!(text.contains("lightblue"));
        assert_eq!(text.matches(" -> ").count(), 5);
    }

    #[test]
    fn empty_model_is_header_only() {
        let text = export_dot(&CanonicalModel::new());
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn fork_lists_five_nodes() {
        let text = export_dot(&fixtures::measured_fork(2.0, 3.0));
        let nodes = text
            .lines()
            .filter(|l| l.starts_with("  \"") && !l.contains("->"))
            .count();
        assert_eq!(nodes, 5);
    }

    use crate::model::CanonicalModel;
}
