//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them on success).

use lvsemme::assumptions::{
    check_conventional_faithfulness, check_lvsemme_faithfulness, minimal_bottleneck_size,
};
use lvsemme::equivalence::{
    enumerate_equivalents, models_equal_mixing, reduce_latent, same_unlabeled_structure,
    switch_center, CANCEL_TOL,
};
use lvsemme::generate::{generate_model, shuffle_scale_columns, EnforceFlags, GeneratorConfig};
use lvsemme::grouping::{compute_aog, compute_dog, group_dag, order_consistent_with, same_partition};
use lvsemme::mixing::{
    build_w, build_w_star, match_up_to_permutation_scaling, matrices_close,
    strip_measurement_columns, MixingMatrix,
};
use lvsemme::model::{CanonicalModel, CausalDiagram, VarId, VariableKind};
use lvsemme::recovery::{
    dog_filter, enumerate_class, grouping_in_model_terms, recover_aog, CenterChoice,
    RecoveredModel,
};
use lvsemme::{fixtures, GroupKind};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

fn report(number: usize, name: &str, failures: Vec<String>, elapsed: Duration, budget: Option<f64>) {
    let timing_ok = budget.is_none_or(|b| elapsed.as_secs_f64() < b);
    let ok = failures.is_empty() && timing_ok;
    let budget_note = budget.map(|b| format!(" (budget {b}s)")).unwrap_or_default();
    println!(
        "criterion {number} ({name}): {} in {:.2}s{}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget_note
    );
    for f in &failures {
        println!("  - {f}");
    }
    assert!(timing_ok, "criterion {number} exceeded its time budget: {elapsed:?}");
    assert!(failures.is_empty(), "criterion {number} failed:\n{}", failures.join("\n"));
}

/// Draws the k-th benchmark model within the size envelope
/// (p_c <= 6, p_ml <= 3, p_H <= 2), minimal and conventionally faithful;
/// optionally also subset-rank faithful.
fn benchmark_model(k: u64, enforce_lv: bool) -> CanonicalModel {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_9700 + k);
    loop {
        let p_y = rng.random_range(0..=3);
        let p_zc = rng.random_range(0..=3);
        let p_ml = rng.random_range(0..=3usize);
        let p_h = rng.random_range(0..=2usize);
        if p_y + p_zc == 0
            || (p_zc > 0 && p_ml == 0 && p_y == 0)
            || (p_h > 0 && p_y + p_zc + p_ml < 2)
        {
            continue;
        }
        let mut cfg = GeneratorConfig::new(p_y, p_zc, p_ml, p_h, rng.random());
        cfg.edge_density = rng.random_range(0.25..0.55);
        cfg.enforce = EnforceFlags {
            minimal: true,
            conventional_faithful: true,
            lvsemme_faithful: enforce_lv,
        };
        cfg.subset_cap = 3;
        if let Ok(model) = generate_model(&cfg) {
            return model;
        }
    }
}

fn shuffled_w_star(model: &CanonicalModel, seed: u64) -> MixingMatrix {
    let w = build_w_star(model).expect("mixing matrix");
    shuffle_scale_columns(&w, seed).0
}

#[test]
fn criterion_01_reference_model_reproduction() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let model = fixtures::confounded_triple_symbolic(0.7, -1.3, 2.0);

    let full = build_w(&model).expect("full matrix");
    let expected_full = DMatrix::from_row_slice(
        3,
        5,
        &[
            0.7, -1.3, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, 1.0, //
            2.0, 0.0, 1.0, 0.0, 0.0,
        ],
    );
    if !matrices_close(&full.values, &expected_full, 1e-12) {
        failures.push(format!("full matrix mismatch: {}", full.values));
    }
    let core = build_w_star(&model).expect("core matrix");
    let expected_core =
        DMatrix::from_row_slice(3, 3, &[0.7, -1.3, 0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0]);
    if !matrices_close(&core.values, &expected_core, 1e-12) {
        failures.push(format!("core matrix mismatch: {}", core.values));
    }
    match strip_measurement_columns(&full) {
        Ok(stripped) => {
            if !matrices_close(&stripped.matrix.values, &core.values, 1e-12) {
                failures.push("stripped matrix differs from the core matrix".into());
            }
        }
        Err(e) => failures.push(format!("strip failed: {e}")),
    }
    let grouping = recover_aog(&core, 1e-9).expect("grouping");
    let class = enumerate_class(&core, &grouping, 1e-9).expect("class");
    if class.models.len() != 1 {
        failures.push(format!("expected a single reconstruction, got {}", class.models.len()));
    } else {
        let m = &class.models[0];
        let checks = [
            (m.latent_to_mleaf.clone(), DMatrix::from_row_slice(1, 1, &[0.7]), "B mleaf block"),
            (
                m.latent_to_cogent.clone(),
                DMatrix::from_column_slice(2, 1, &[0.0, 2.0]),
                "B cogent block",
            ),
            (m.cogent_to_cogent.clone(), DMatrix::zeros(2, 2), "C block"),
            (m.cogent_to_mleaf.clone(), DMatrix::from_row_slice(1, 2, &[-1.3, 0.0]), "D block"),
        ];
        for (got, want, label) in checks {
            if !matrices_close(&got, &want, 1e-12) {
                failures.push(format!("{label} mismatch: {got}"));
            }
        }
    }
    report(1, "reference model reproduction", failures, start.elapsed(), Some(1.0));
}

#[test]
fn criterion_02_grouping_recovery_matches_direct_computation() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for k in 0..200u64 {
        let model = benchmark_model(k, false);
        let shuffled = shuffled_w_star(&model, k.wrapping_add(0x5D11F));
        let recovered = match recover_aog(&shuffled, 1e-9) {
            Ok(g) => g,
            Err(e) => {
                failures.push(format!("model {k}: recovery failed: {e}"));
                continue;
            }
        };
        let mapped = match grouping_in_model_terms(&recovered, &shuffled) {
            Some(g) => g,
            None => {
                failures.push(format!("model {k}: grouping lost its labels"));
                continue;
            }
        };
        let expected = compute_aog(&model).expect("aog");
        if !same_partition(&mapped, &expected) {
            failures.push(format!("model {k}: partitions differ"));
            continue;
        }
        let dag = group_dag(&model, &mapped).expect("dag");
        let order: Vec<usize> = (0..mapped.groups.len()).collect();
        if !order_consistent_with(&dag, &order) {
            failures.push(format!("model {k}: emitted order not causal"));
        }
    }
    report(
        2,
        "grouping recovery oracle equivalence, 200 models",
        failures,
        start.elapsed(),
        Some(30.0),
    );
}

/// The ground-truth (row, col) selection for each cogent group of a recovered
/// grouping, identified through the matrix metadata.
fn ground_truth_centers(
    model: &CanonicalModel,
    w: &MixingMatrix,
    recovered: &lvsemme::RecoveredGrouping,
) -> Result<Vec<CenterChoice>, String> {
    let mut out = Vec::new();
    for (gi, g) in recovered.groups.iter().enumerate() {
        if g.kind != GroupKind::Cogent {
            continue;
        }
        let row = g
            .rows
            .iter()
            .copied()
            .find(|&r| {
                w.rows[r]
                    .variable
                    .is_some_and(|v| model.variables[v.0].kind.is_cogent())
            })
            .ok_or_else(|| format!("group {gi} has no cogent row"))?;
        let var = w.rows[row].variable.unwrap();
        let col = g
            .cols
            .iter()
            .copied()
            .find(|&c| w.cols[c].noise_of == Some(var))
            .ok_or_else(|| format!("group {gi} lacks the noise of its cogent"))?;
        out.push(CenterChoice { group: gi, row, col });
    }
    Ok(out)
}

/// Entrywise comparison of a reconstruction against the generating model:
/// C and D blocks must equal the edge weights, B columns must be proportional
/// to the confounder coefficient columns.
fn matches_ground_truth(
    member: &RecoveredModel,
    model: &CanonicalModel,
    w: &MixingMatrix,
    tol: f64,
) -> Result<(), String> {
    let center_vars: Vec<VarId> =
        member.centers.iter().map(|c| w.rows[c.row].variable.unwrap()).collect();
    let mleaf_vars: Vec<VarId> =
        member.mleaf_rows.iter().map(|&r| w.rows[r].variable.unwrap()).collect();
    for (i, &vi) in center_vars.iter().enumerate() {
        for (j, &vj) in center_vars.iter().enumerate() {
            let want = model.edge_weight(vj, vi).unwrap_or(0.0);
            let got = member.cogent_to_cogent[(i, j)];
            if (got - want).abs() > tol {
                return Err(format!("C[{i},{j}] = {got}, expected {want}"));
            }
        }
    }
    for (i, &mi) in mleaf_vars.iter().enumerate() {
        for (j, &vj) in center_vars.iter().enumerate() {
            let want = model.edge_weight(vj, mi).unwrap_or(0.0);
            let got = member.cogent_to_mleaf[(i, j)];
            if (got - want).abs() > tol {
                return Err(format!("D[{i},{j}] = {got}, expected {want}"));
            }
        }
    }
    for (l, &c) in member.latent_cols.iter().enumerate() {
        let h = w.cols[c].noise_of.ok_or("anonymous latent column")?;
        let mut want: Vec<f64> = Vec::new();
        let mut got: Vec<f64> = Vec::new();
        for (i, &mi) in mleaf_vars.iter().enumerate() {
            want.push(model.edge_weight(h, mi).unwrap_or(0.0));
            got.push(member.latent_to_mleaf[(i, l)]);
        }
        for (i, &vi) in center_vars.iter().enumerate() {
            want.push(model.edge_weight(h, vi).unwrap_or(0.0));
            got.push(member.latent_to_cogent[(i, l)]);
        }
        let pivot = (0..want.len())
            .max_by(|&a, &b| want[a].abs().total_cmp(&want[b].abs()))
            .ok_or("empty latent column")?;
        if want[pivot].abs() <= tol {
            return Err(format!("confounder {h} has no coefficients"));
        }
        let scale = got[pivot] / want[pivot];
        for i in 0..want.len() {
            if (got[i] - scale * want[i]).abs() > tol.max(tol * scale.abs()) {
                return Err(format!(
                    "B column for {h}: entry {i} is {}, expected {}",
                    got[i],
                    scale * want[i]
                ));
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_03_class_soundness_and_membership() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for k in 0..200u64 {
        let model = benchmark_model(k, false);
        let shuffled = shuffled_w_star(&model, k.wrapping_add(0xC1A55));
        let recovered = recover_aog(&shuffled, 1e-9).expect("recovery");
        let class = enumerate_class(&shuffled, &recovered, 1e-9).expect("class");
        if !class.rejected.is_empty() {
            failures.push(format!("model {k}: {} selections rejected", class.rejected.len()));
            continue;
        }
        for (mi, member) in class.models.iter().enumerate() {
            let rebuilt = member.rebuild_w_star(&shuffled).expect("rebuild");
            match match_up_to_permutation_scaling(&rebuilt, &shuffled, 1e-8) {
                Ok(Some(_)) => {}
                _ => failures.push(format!("model {k}: member {mi} does not rebuild the input")),
            }
        }
        match ground_truth_centers(&model, &shuffled, &recovered) {
            Ok(expected) => {
                let found = class.models.iter().find(|m| m.centers == expected);
                match found {
                    None => failures.push(format!("model {k}: ground-truth selection missing")),
                    Some(member) => {
                        if let Err(e) = matches_ground_truth(member, &model, &shuffled, 1e-8) {
                            failures.push(format!("model {k}: ground truth differs: {e}"));
                        }
                    }
                }
            }
            Err(e) => failures.push(format!("model {k}: {e}")),
        }
    }
    // refined-class claims, on models drawn with the subset-rank check enforced
    for k in 0..200u64 {
        let model = benchmark_model(k, true);
        let shuffled = shuffled_w_star(&model, k.wrapping_add(0xD09));
        let recovered = recover_aog(&shuffled, 1e-9).expect("recovery");
        let class = enumerate_class(&shuffled, &recovered, 1e-9).expect("class");
        let expected = match ground_truth_centers(&model, &shuffled, &recovered) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("faithful model {k}: {e}"));
                continue;
            }
        };
        let kept = dog_filter(&class.models, 1e-9).expect("filter");
        if !kept.iter().any(|m| m.centers == expected) {
            failures.push(format!("faithful model {k}: ground truth filtered out"));
            continue;
        }
        let canonicals: Vec<CanonicalModel> =
            kept.iter().map(|m| m.to_canonical_model(&shuffled, 1e-9)).collect();
        for i in 1..canonicals.len() {
            if !same_unlabeled_structure(&canonicals[0], &canonicals[i]) {
                failures.push(format!("faithful model {k}: refined class not isomorphic"));
                break;
            }
        }
    }
    report(3, "class soundness and ground-truth membership", failures, start.elapsed(), None);
}

fn brute_force_bottleneck(
    n: usize,
    edges: &[(usize, usize)],
    sources: &BTreeSet<usize>,
    sinks: &BTreeSet<usize>,
) -> usize {
    let mut children = vec![Vec::new(); n];
    for &(u, v) in edges {
        children[u].push(v);
    }
    let covered = |cut: usize| -> bool {
        let blocked = |v: usize| cut >> v & 1 == 1;
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = sources.iter().copied().filter(|&s| !blocked(s)).collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(u) = stack.pop() {
            if sinks.contains(&u) {
                return false;
            }
            for &v in &children[u] {
                if !blocked(v) && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        true
    };
    for size in 0..=n {
        for cut in 0usize..(1 << n) {
            if cut.count_ones() as usize == size && covered(cut) {
                return size;
            }
        }
    }
    n
}

#[test]
fn criterion_04_bottleneck_oracle() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0771E);
    let mut done = 0;
    while done < 500 {
        let n = rng.random_range(2..=10usize);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.35 {
                    edges.push((i, j));
                }
            }
        }
        let sources: BTreeSet<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.4).collect();
        let sinks: BTreeSet<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.4).collect();
        if sources.is_empty() || sinks.is_empty() {
            continue;
        }
        done += 1;
        let diagram = CausalDiagram {
            n,
            edges: edges.iter().map(|&(u, v)| (VarId(u), VarId(v))).collect(),
        };
        let got = minimal_bottleneck_size(
            &diagram,
            &sources.iter().map(|&v| VarId(v)).collect(),
            &sinks.iter().map(|&v| VarId(v)).collect(),
        )
        .expect("bottleneck");
        let want = brute_force_bottleneck(n, &edges, &sources, &sinks);
        if got != want {
            failures.push(format!(
                "dag {done}: flow {got} != exhaustive {want} (n={n}, J={sources:?}, K={sinks:?})"
            ));
        }
    }
    report(4, "bottleneck equals exhaustive minimum, 500 DAGs", failures, start.elapsed(), Some(10.0));
}

/// Rewires one ancestor-descendant pair of a generated model so the total
/// effect cancels exactly.
fn cancellation_fixture(k: u64) -> Option<CanonicalModel> {
    let mut cfg = GeneratorConfig::new(2, 1, 1, 1, 0xCA9CE1 + k);
    cfg.edge_density = 0.5;
    let model = generate_model(&cfg).ok()?;
    let effects = model.total_effects().ok()?;
    for dst in &model.variables {
        if !dst.kind.in_v() {
            continue;
        }
        for src in model.ancestors(dst.id).ok()? {
            let kind = model.variables[src.0].kind;
            if !kind.in_v() || kind == VariableKind::Mleaf {
                continue;
            }
            let total = effects.effect_of_on(src, dst.id);
            let direct = model.edge_weight(src, dst.id).unwrap_or(0.0);
            let patched = direct - total;
            if patched.abs() < 0.05 {
                continue;
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

#[test]
fn criterion_05_faithfulness_implication_and_genericity() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut built = 0;
    let mut k = 0u64;
    while built < 12 && k < 100 {
        if let Some(broken) = cancellation_fixture(k) {
            built += 1;
            let conventional = check_conventional_faithfulness(&broken, 1e-9).expect("check");
            if conventional.passed {
                failures.push(format!("fixture {k}: cancellation not detected"));
                continue;
            }
            let lvsemme = check_lvsemme_faithfulness(&broken, 1e-9, 6).expect("check");
            if lvsemme.passed {
                failures.push(format!("fixture {k}: subset-rank check missed the cancellation"));
            }
        }
        k += 1;
    }
    if built < 10 {
        failures.push(format!("only {built} cancellation fixtures constructed"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x9E4E41C);
    for i in 0..500u64 {
        let p_y = rng.random_range(1..=2usize);
        let p_zc = rng.random_range(0..=2usize);
        let p_ml = rng.random_range(0..=1usize);
        let p_h = rng.random_range(0..=1usize);
        if p_h > 0 && p_y + p_zc + p_ml < 2 {
            continue;
        }
        let mut cfg = GeneratorConfig::new(p_y, p_zc, p_ml, p_h, rng.random());
        cfg.edge_density = rng.random_range(0.3..0.6);
        let Ok(model) = generate_model(&cfg) else { continue };
        let conventional = check_conventional_faithfulness(&model, 1e-9).expect("check");
        if !conventional.passed {
            failures.push(format!("generic model {i} fails conventional faithfulness"));
            continue;
        }
        // cap 10 covers any ancestor/possible-parent universe of these sizes,
        // so the enumeration is exhaustive
        let lvsemme = check_lvsemme_faithfulness(&model, 1e-9, 10).expect("check");
        if lvsemme.truncated {
            failures.push(format!("generic model {i} was not checked exhaustively"));
        }
        if !lvsemme.passed {
            failures.push(format!("generic model {i} fails subset-rank faithfulness"));
        }
    }
    report(
        5,
        "faithfulness implication and genericity, 500 models",
        failures,
        start.elapsed(),
        None,
    );
}

/// Chain with a shortcut into a mleaf: the mleaf shares its parent's
/// ancestral group but not the refined group, so switching centers adds an
/// edge.
fn ancestral_but_not_refined(a: f64, b: f64, c: f64, d: f64) -> CanonicalModel {
    let mut m = CanonicalModel::new();
    let q = m.add_measured("Q", VariableKind::MeasuredCogent, "XQ");
    let r = m.add_measured("R", VariableKind::MeasuredCogent, "XR");
    let z1 = m.add_measured("Z1", VariableKind::MeasuredCogent, "X1");
    let z2 = m.add_measured("Z2", VariableKind::Mleaf, "X2");
    m.add_edge(q, r, a);
    m.add_edge(r, z1, b);
    m.add_edge(z1, z2, c);
    m.add_edge(q, z2, d);
    m
}

#[test]
fn criterion_06_center_switch_invariance() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut used = 0;
    let mut k = 0u64;
    while used < 100 {
        let model = benchmark_model(0x51_0000 + k, false);
        k += 1;
        let aog = compute_aog(&model).expect("aog");
        if aog.groups.iter().all(|g| g.member_vars().len() < 2) {
            continue;
        }
        used += 1;
        let members = match enumerate_equivalents(&model, &aog, CANCEL_TOL) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("model {k}: enumeration failed: {e}"));
                continue;
            }
        };
        let sets: Vec<BTreeSet<VarId>> = aog.groups.iter().map(|g| g.member_vars()).collect();
        for (mi, m2) in members.iter().enumerate() {
            match models_equal_mixing(&model, m2, 1e-9) {
                Ok(true) => {}
                _ => failures.push(format!("model {k}: member {mi} changes the mixing matrix")),
            }
            let aog2 = compute_aog(m2).expect("aog");
            let sets2: Vec<BTreeSet<VarId>> =
                aog2.groups.iter().map(|g| g.member_vars()).collect();
            if sets != sets2 {
                failures.push(format!("model {k}: member {mi} changes the grouping"));
            }
        }

        // switches inside refined groups keep the edge set, up to swapping
        // the two switched variables
        let dog = compute_dog(&model).expect("dog");
        for g in &dog.groups {
            let Some(center) = g.center else { continue };
            let edge_set = |m: &CanonicalModel, swap: Option<(VarId, VarId)>| -> BTreeSet<(VarId, VarId)> {
                let rename = |v: VarId| match swap {
                    Some((a, b)) if v == a => b,
                    Some((a, b)) if v == b => a,
                    _ => v,
                };
                m.edges.iter().map(|e| (rename(e.src), rename(e.dst))).collect()
            };
            for &z in &g.mleafs {
                match switch_center(&model, g, Some(z), None, CANCEL_TOL) {
                    Ok(out) => {
                        if edge_set(&model, Some((center, z))) != edge_set(&out.model, None) {
                            failures.push(format!(
                                "model {k}: refined-group variable switch changed the edge set"
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("model {k}: switch failed: {e}")),
                }
            }
            for h in g.latent_members(&model) {
                match switch_center(&model, g, None, Some(h), CANCEL_TOL) {
                    Ok(out) => {
                        if edge_set(&model, None) != edge_set(&out.model, None) {
                            failures.push(format!(
                                "model {k}: refined-group noise switch changed the edge set"
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("model {k}: noise switch failed: {e}")),
                }
            }
        }
    }

    // switching across an ancestral group that is not a refined group must
    // strictly increase the edge count
    for (a, b, c, d) in [
        (0.9, 1.1, 1.3, -0.7),
        (1.2, -0.8, 0.6, 1.4),
        (-1.0, 0.7, -1.1, 0.9),
        (0.6, 1.3, 0.8, -1.2),
    ] {
        let model = ancestral_but_not_refined(a, b, c, d);
        let aog = compute_aog(&model).expect("aog");
        let z1 = model.var_by_name("Z1").unwrap();
        let z2 = model.var_by_name("Z2").unwrap();
        let gi = aog.group_of(z1).expect("group");
        if !aog.groups[gi].mleafs.contains(&z2) {
            failures.push("fixture: mleaf not in the ancestral group".into());
            continue;
        }
        let dog = compute_dog(&model).expect("dog");
        let di = dog.group_of(z1).expect("group");
        if dog.groups[di].mleafs.contains(&z2) {
            failures.push("fixture: mleaf unexpectedly in the refined group".into());
            continue;
        }
        match switch_center(&model, &aog.groups[gi], Some(z2), None, CANCEL_TOL) {
            Ok(out) => {
                if out.model.edges.len() <= model.edges.len() {
                    failures.push(format!(
                        "edge count did not increase: {} -> {}",
                        model.edges.len(),
                        out.model.edges.len()
                    ));
                }
                match models_equal_mixing(&model, &out.model, 1e-9) {
                    Ok(true) => {}
                    _ => failures.push("ancestral switch changed the mixing matrix".into()),
                }
            }
            Err(e) => failures.push(format!("ancestral switch failed: {e}")),
        }
    }
    report(6, "center-switch invariance, 100 models", failures, start.elapsed(), None);
}

#[test]
fn criterion_07_minimality_reduction() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut fixtures_run = 0;
    let mut check = |label: String, model: CanonicalModel| {
        fixtures_run += 1;
        if !model.validate_canonical().is_empty() {
            failures.push(format!("{label}: fixture not canonical"));
            return;
        }
        let (minimal, witness) = model.is_minimal().expect("minimality");
        if minimal {
            failures.push(format!("{label}: fixture unexpectedly minimal"));
            return;
        }
        let (h, z) = witness.expect("witness");
        match reduce_latent(&model, h, z, CANCEL_TOL) {
            Ok(out) => {
                if out.model.latents().len() != model.latents().len() - 1 {
                    failures.push(format!("{label}: confounder count unchanged"));
                }
                match models_equal_mixing(&model, &out.model, 1e-9) {
                    Ok(true) => {}
                    _ => failures.push(format!("{label}: reduction changed the mixing matrix")),
                }
                if !out.model.validate_canonical().is_empty() {
                    failures.push(format!("{label}: reduced model not canonical"));
                }
            }
            Err(e) => failures.push(format!("{label}: reduction failed: {e}")),
        }
    };

    for (b2, b3) in [(0.5, 1.5), (-0.8, 0.9), (1.2, -1.1)] {
        check(format!("pair({b2},{b3})"), fixtures::removable_confounder(b2, b3));
    }
    for (b2, b3, b4) in [(0.7, 1.1, -0.9), (-1.3, 0.6, 0.8), (0.9, -1.4, 1.2)] {
        let mut m = CanonicalModel::new();
        let h = m.add_variable("H", VariableKind::Unobserved);
        let z = m.add_measured("Z", VariableKind::Mleaf, "X");
        let y1 = m.add_variable("Y1", VariableKind::ObservedCogent);
        let y2 = m.add_variable("Y2", VariableKind::ObservedCogent);
        m.add_edge(h, z, b2);
        m.add_edge(h, y1, b3);
        m.add_edge(h, y2, b4);
        check(format!("triple({b2},{b3},{b4})"), m);
    }
    for (w1, w2, w3, w4) in [
        (1.0, 1.0, 1.0, 1.0),
        (0.8, -1.2, 0.5, 0.7),
        (-0.6, 0.9, 1.3, -1.1),
        (1.4, 0.5, -0.8, 1.2),
    ] {
        // the mleaf and the confounder's other child share the parent Q
        let mut m = CanonicalModel::new();
        let h = m.add_variable("H", VariableKind::Unobserved);
        let q = m.add_variable("Q", VariableKind::ObservedCogent);
        let z = m.add_measured("Z", VariableKind::Mleaf, "X");
        let y = m.add_variable("Y", VariableKind::ObservedCogent);
        m.add_edge(h, z, w1);
        m.add_edge(h, y, w2);
        m.add_edge(q, z, w3);
        m.add_edge(q, y, w4);
        check(format!("overlap({w1},{w2},{w3},{w4})"), m);
    }
    if fixtures_run < 10 {
        failures.push(format!("only {fixtures_run} fixtures were run"));
    }
    report(7, "minimality witness and reduction, 10 fixtures", failures, start.elapsed(), None);
}

#[test]
fn criterion_08_recovery_iteration_count() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for k in 0..200u64 {
        let model = benchmark_model(k, false);
        let shuffled = shuffled_w_star(&model, k.wrapping_add(0x17E8));
        let recovered = recover_aog(&shuffled, 1e-9).expect("recovery");
        let expected = compute_aog(&model).expect("aog").cogent_groups().len();
        if recovered.iterations != expected {
            failures.push(format!(
                "model {k}: {} iterations for {} cogent groups",
                recovered.iterations, expected
            ));
        }
    }
    report(
        8,
        "iteration count equals cogent group count",
        failures,
        start.elapsed(),
        None,
    );
}
