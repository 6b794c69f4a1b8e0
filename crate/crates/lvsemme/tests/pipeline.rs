//! Cross-module invariants checked on randomly generated models.

use lvsemme::assumptions::{minimal_bottleneck_size, submatrix_rank};
use lvsemme::equivalence::{enumerate_equivalents, models_equal_mixing, CANCEL_TOL};
use lvsemme::generate::{generate_model, shuffle_scale_columns, EnforceFlags, GeneratorConfig};
use lvsemme::grouping::{
    compute_aog, compute_dog, group_dag, order_consistent_with, same_partition, GroupKind,
    NoiseRef,
};
use lvsemme::mixing::{build_w, build_w_star, strip_measurement_columns};
use lvsemme::model::{CanonicalModel, VarId};
use lvsemme::recovery::{enumerate_class, grouping_in_model_terms, recover_aog};
use proptest::prelude::*;
use std::collections::BTreeSet;

/// Model shapes within the supported size envelope, keyed by seed.
fn config_for(seed: u64) -> GeneratorConfig {
    let mut observed = (seed % 3) as usize;
    let measured = 1 + (seed / 3 % 3) as usize;
    let mleaf = (seed / 9 % 3) as usize;
    let latent = (seed / 27 % 2) as usize;
    if observed == 0 && mleaf == 0 {
        observed = 1; // the last measured cogent would have no possible child
    }
    let mut config = GeneratorConfig::new(observed, measured, mleaf, latent, seed.wrapping_mul(0x9e37))
        ;
    config.edge_density = 0.3 + 0.1 * (seed % 4) as f64;
    config.enforce = EnforceFlags {
        minimal: true,
        conventional_faithful: true,
        lvsemme_faithful: false,
    };
    config
}

fn generated(seed: u64) -> CanonicalModel {
    generate_model(&config_for(seed)).expect("generation within budget")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stripping_the_full_matrix_recovers_the_core(seed in 0u64..4096) {
        let model = generated(seed);
        let full = build_w(&model).unwrap();
        let stripped = strip_measurement_columns(&full).unwrap();
        prop_assert!(stripped.ambiguities.is_empty());
        prop_assert_eq!(&stripped.matrix.values, &build_w_star(&model).unwrap().values);
    }

    #[test]
    fn core_columns_have_two_entries_or_escape_x(seed in 0u64..4096) {
        let model = generated(seed);
        let w = build_w_star(&model).unwrap();
        for j in 0..w.ncols() {
            let support = w.col_support(j);
            prop_assert!(
                support.len() >= 2 || support.iter().any(|&i| w.rows[i].observed),
                "column {} violates the support rule", j
            );
        }
    }

    #[test]
    fn dog_refines_aog(seed in 0u64..4096) {
        let model = generated(seed);
        let aog = compute_aog(&model).unwrap();
        let dog = compute_dog(&model).unwrap();
        for dg in &dog.groups {
            let vars = dg.member_vars();
            prop_assert!(
                aog.groups.iter().any(|ag| vars.is_subset(&ag.member_vars())),
                "DOG group {:?} not contained in an AOG group", vars
            );
        }
    }

    #[test]
    fn ancestor_descendant_duality(seed in 0u64..4096) {
        let model = generated(seed);
        for u in &model.variables {
            for v in &model.variables {
                let forward = model.ancestors(v.id).unwrap().contains(&u.id);
                let backward = model.descendants(u.id).unwrap().contains(&v.id);
                prop_assert_eq!(forward, backward);
            }
        }
    }

    #[test]
    fn recovered_grouping_matches_direct_computation(seed in 0u64..4096) {
        let model = generated(seed);
        let w = build_w_star(&model).unwrap();
        let (shuffled, _, _) = shuffle_scale_columns(&w, seed.wrapping_add(17));
        let recovered = recover_aog(&shuffled, 1e-9).unwrap();
        let mapped = grouping_in_model_terms(&recovered, &shuffled).unwrap();
        let expected = compute_aog(&model).unwrap();
        prop_assert!(same_partition(&mapped, &expected));
        let dag = group_dag(&model, &mapped).unwrap();
        let order: Vec<usize> = (0..mapped.groups.len()).collect();
        prop_assert!(order_consistent_with(&dag, &order));
    }

    #[test]
    fn row_order_does_not_change_the_grouping(seed in 0u64..4096) {
        let model = generated(seed);
        let w = build_w_star(&model).unwrap();
        let (mut shuffled, _, _) = shuffle_scale_columns(&w, seed.wrapping_add(31));
        // permute the rows as well; the tie-breaking row picks must not matter
        let mut rng_state = seed.wrapping_mul(0x517c_c1b7_2722_0a95).wrapping_add(11);
        let mut perm: Vec<usize> = (0..shuffled.nrows()).collect();
        for i in (1..perm.len()).rev() {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (rng_state >> 33) as usize % (i + 1));
        }
        shuffled.values = shuffled.values.select_rows(&perm);
        shuffled.rows = perm.iter().map(|&i| shuffled.rows[i].clone()).collect();
        let recovered = recover_aog(&shuffled, 1e-9).unwrap();
        let mapped = grouping_in_model_terms(&recovered, &shuffled).unwrap();
        prop_assert!(same_partition(&mapped, &compute_aog(&model).unwrap()));
    }

    #[test]
    fn every_class_member_rebuilds_the_input(seed in 0u64..4096) {
        let model = generated(seed);
        let w = build_w_star(&model).unwrap();
        let (shuffled, _, _) = shuffle_scale_columns(&w, seed.wrapping_add(23));
        let recovered = recover_aog(&shuffled, 1e-9).unwrap();
        let class = enumerate_class(&shuffled, &recovered, 1e-9).unwrap();
        prop_assert!(class.rejected.is_empty(), "rejected: {:?}", class.rejected);
        prop_assert!(!class.models.is_empty());
        for member in &class.models {
            let rebuilt = member.rebuild_w_star(&shuffled).unwrap();
            let witness =
                lvsemme::mixing::match_up_to_permutation_scaling(&rebuilt, &shuffled, 1e-8)
                    .unwrap();
            prop_assert!(witness.is_some());
        }
    }

    #[test]
    fn switching_centers_preserves_mixing_and_grouping(seed in 0u64..2048) {
        let model = generated(seed);
        let aog = compute_aog(&model).unwrap();
        let members = enumerate_equivalents(&model, &aog, CANCEL_TOL).unwrap();
        let sets: Vec<BTreeSet<VarId>> = aog.groups.iter().map(|g| g.member_vars()).collect();
        for m2 in &members {
            prop_assert!(models_equal_mixing(&model, m2, 1e-9).unwrap());
            let aog2 = compute_aog(m2).unwrap();
            let sets2: Vec<BTreeSet<VarId>> =
                aog2.groups.iter().map(|g| g.member_vars()).collect();
            prop_assert_eq!(&sets, &sets2);
        }
    }

    #[test]
    fn column_matching_is_an_equivalence_relation(
        rows in 2usize..5,
        cols in 1usize..5,
        cells in proptest::collection::vec(-3.0f64..3.0, 4..25),
        seed in 0u64..1024,
    ) {
        use lvsemme::mixing::{match_up_to_permutation_scaling as matches, ColInfo, RowInfo};
        use nalgebra::DMatrix;
        let values = DMatrix::from_fn(rows, cols, |i, j| {
            let v = cells[(i * cols + j) % cells.len()];
            if v.abs() < 0.1 { 0.0 } else { v }
        });
        let a = lvsemme::MixingMatrix {
            values,
            rows: (0..rows)
                .map(|i| RowInfo { label: format!("r{i}"), variable: None, observed: true })
                .collect(),
            cols: (0..cols)
                .map(|j| ColInfo { label: format!("c{j}"), noise_of: None })
                .collect(),
            tol: 1e-9,
        };
        let (b, _, _) = shuffle_scale_columns(&a, seed);
        let (c, _, _) = shuffle_scale_columns(&b, seed.wrapping_add(1));
        // reflexive
        prop_assert!(matches(&a, &a, 1e-9).unwrap().is_some());
        // symmetric
        let ab = matches(&a, &b, 1e-9).unwrap();
        prop_assert!(ab.is_some());
        prop_assert!(matches(&b, &a, 1e-9).unwrap().is_some());
        // transitive, and the witness verifies entrywise
        let ac = matches(&a, &c, 1e-9).unwrap();
        prop_assert!(ac.is_some());
        let w = ac.unwrap();
        for j in 0..cols {
            for i in 0..rows {
                let lhs = a.values[(i, j)] * w.scales[j];
                let rhs = c.values[(i, w.permutation[j])];
                prop_assert!((lhs - rhs).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn canonical_form_is_orbit_invariant_on_random_matrices(
        seed in 0u64..2048,
    ) {
        let model = generated(seed % 512);
        let w = build_w_star(&model).unwrap();
        let (shuffled, _, _) = shuffle_scale_columns(&w, seed.wrapping_add(101));
        let ca = lvsemme::canonical_column_form(&w).unwrap();
        let cb = lvsemme::canonical_column_form(&shuffled).unwrap();
        prop_assert!((ca.values - cb.values).amax() <= 1e-9);
    }

    #[test]
    fn rank_never_exceeds_bottleneck(seed in 0u64..2048) {
        let model = generated(seed);
        let w = build_w_star(&model).unwrap();
        let diagram = model.diagram();
        let noises: Vec<VarId> = w.cols.iter().filter_map(|c| c.noise_of).collect();
        let rows: Vec<VarId> = w.rows.iter().filter_map(|r| r.variable).collect();
        let mut rng_state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            rng_state
        };
        for _ in 0..8 {
            let j: BTreeSet<VarId> =
                noises.iter().copied().filter(|_| next() % 2 == 0).collect();
            let k: BTreeSet<VarId> = rows.iter().copied().filter(|_| next() % 2 == 0).collect();
            let rank = submatrix_rank(&w, &j, &k, 1e-9).unwrap();
            let bneck = minimal_bottleneck_size(&diagram, &j, &k).unwrap();
            prop_assert!(rank <= bneck, "rank {} > bottleneck {}", rank, bneck);
        }
    }
}

/// The support relations of the mixing matrix mirror the group order, for
/// groups that carry noise columns (and row-bearing groups against them).
#[test]
fn group_order_matches_support_relations() {
    for seed in 0..48u64 {
        let model = generated(seed);
        let w = build_w_star(&model).unwrap();
        let aog = compute_aog(&model).unwrap();
        let dag = group_dag(&model, &aog).unwrap();
        let col_of_noise = |n: &NoiseRef| match n {
            NoiseRef::Var(v) => w.col_index_of_noise(*v).unwrap(),
            NoiseRef::Col(c) => *c,
        };
        // row support (columns touched) per group; the special case for
        // noise-only groups is their own column
        let row_supp: Vec<BTreeSet<usize>> = aog
            .groups
            .iter()
            .map(|g| {
                let rows: Vec<usize> = g
                    .member_vars()
                    .iter()
                    .filter_map(|&v| w.row_index_of_variable(v))
                    .collect();
                if rows.is_empty() {
                    g.noises.iter().map(&col_of_noise).collect()
                } else {
                    rows.iter().flat_map(|&r| w.row_support(r)).collect()
                }
            })
            .collect();
        // column support (rows touched) per group; mleaf-only groups stand
        // for their own row
        let col_supp: Vec<BTreeSet<usize>> = aog
            .groups
            .iter()
            .map(|g| {
                if g.noises.is_empty() {
                    g.member_vars()
                        .iter()
                        .filter_map(|&v| w.row_index_of_variable(v))
                        .collect()
                } else {
                    g.noises
                        .iter()
                        .flat_map(|n| w.col_support(col_of_noise(n)))
                        .collect()
                }
            })
            .collect();
        for i in 0..aog.groups.len() {
            for j in 0..aog.groups.len() {
                if i == j {
                    continue;
                }
                let path = dag.contains(&(i, j));
                let gi_mleaf_only = aog.groups[i].kind == GroupKind::MleafOnly;
                let gj_mleaf_only = aog.groups[j].kind == GroupKind::MleafOnly;
                if !gi_mleaf_only && !gj_mleaf_only {
                    let rows_nested =
                        row_supp[i].is_subset(&row_supp[j]) && row_supp[i] != row_supp[j];
                    assert_eq!(path, rows_nested, "seed {seed} groups {i}->{j} (rows)");
                    let cols_nested =
                        col_supp[j].is_subset(&col_supp[i]) && col_supp[j] != col_supp[i];
                    assert_eq!(path, cols_nested, "seed {seed} groups {i}->{j} (cols)");
                } else if path {
                    // into or out of a mleaf-only group the containments
                    // still follow the path direction
                    assert!(
                        row_supp[i].is_subset(&row_supp[j]),
                        "seed {seed} groups {i}->{j} (mleaf rows)"
                    );
                    assert!(
                        col_supp[j].is_subset(&col_supp[i]),
                        "seed {seed} groups {i}->{j} (mleaf cols)"
                    );
                }
            }
        }
    }
}

/// A conventional-faithfulness violation always surfaces as a subset-rank
/// violation as well.
#[test]
fn conventional_violation_implies_lvsemme_violation() {
    use lvsemme::assumptions::{check_conventional_faithfulness, check_lvsemme_faithfulness};
    let mut found = 0;
    for seed in 0..40u64 {
        let model = generated(seed);
        let Some(broken) = break_one_total_effect(&model) else { continue };
        let conventional = check_conventional_faithfulness(&broken, 1e-9).unwrap();
        assert!(!conventional.passed, "seed {seed}: cancellation not detected");
        let lvsemme = check_lvsemme_faithfulness(&broken, 1e-9, 6).unwrap();
        assert!(!lvsemme.passed, "seed {seed}: subset check missed the cancellation");
        found += 1;
        if found >= 12 {
            return;
        }
    }
    assert!(found >= 10, "only {found} cancellation fixtures could be built");
}

/// Rewires one ancestor-descendant pair so its total effect cancels exactly.
fn break_one_total_effect(model: &CanonicalModel) -> Option<CanonicalModel> {
    let effects = model.total_effects().ok()?;
    for dst in &model.variables {
        if !dst.kind.in_v() {
            continue;
        }
        for src in model.ancestors(dst.id).ok()? {
            if !model.variables[src.0].kind.in_v()
                || model.variables[src.0].kind == lvsemme::VariableKind::Mleaf
            {
                continue;
            }
            let total = effects.effect_of_on(src, dst.id);
            let direct = model.edge_weight(src, dst.id).unwrap_or(0.0);
            let patched = direct - total;
            if patched.abs() < 0.05 {
                continue; // keep edge weights clearly structural
            }
            let mut out = model.clone();
            out.edges.retain(|e| !(e.src == src && e.dst == dst.id));
            out.add_edge(src, dst.id, patched);
            if out.validate_canonical().is_empty() && out.topo_order().is_ok() {
                return Some(out);
            }
        }
    }
    None
}
