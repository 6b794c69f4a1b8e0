//! Seeded random fixtures: canonical models with enforced checks,
//! observational samples, and mixing-matrix perturbation/shuffling.

use crate::assumptions::{check_conventional_faithfulness, check_lvsemme_faithfulness};
use crate::mixing::MixingMatrix;
use crate::model::{CanonicalModel, VarId, VariableKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Coefficient magnitudes must stay this far from zero.
pub const COEF_MARGIN: f64 = 0.1;

/// Checks a generated model must pass before it is emitted; failures trigger
/// a redraw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnforceFlags {
    pub minimal: bool,
    pub conventional_faithful: bool,
    pub lvsemme_faithful: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub observed: usize,
    pub measured_cogent: usize,
    pub mleaf: usize,
    pub latent: usize,
    pub edge_density: f64,
    /// Coefficient magnitude range; signs are drawn independently.
    pub coef_range: (f64, f64),
    pub seed: u64,
    pub enforce: EnforceFlags,
    /// Subset cap used when enforcing the subset-rank faithfulness check.
    pub subset_cap: usize,
    pub max_retries: usize,
}

impl GeneratorConfig {
    pub fn new(observed: usize, measured_cogent: usize, mleaf: usize, latent: usize, seed: u64) -> Self {
        GeneratorConfig {
            observed,
            measured_cogent,
            mleaf,
            latent,
            edge_density: 0.4,
            coef_range: (0.5, 1.5),
            seed,
            enforce: EnforceFlags::default(),
            subset_cap: crate::assumptions::DEFAULT_SUBSET_CAP,
            max_retries: 256,
        }
    }

    fn cogent(&self) -> usize {
        self.observed + self.measured_cogent
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("retry budget of {attempts} exhausted; most failed check: {most_failed} ({counts:?})")]
    RetryBudgetExhausted {
        attempts: usize,
        most_failed: String,
        counts: BTreeMap<String, usize>,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

fn validate_config(c: &GeneratorConfig) -> Result<(), GenerateError> {
    if !(0.0..=1.0).contains(&c.edge_density) {
        return Err(GenerateError::Config("edge density must be in [0, 1]".into()));
    }
    let (low, high) = c.coef_range;
    if !(low >= COEF_MARGIN && low <= high) {
        return Err(GenerateError::Config(format!(
            "coefficient range must satisfy {COEF_MARGIN} <= low <= high"
        )));
    }
    if c.latent > 0 && c.cogent() + c.mleaf < 2 {
        return Err(GenerateError::Config(
            "a confounder needs at least two possible children".into(),
        ));
    }
    if c.mleaf > 0 && c.cogent() + c.latent == 0 {
        return Err(GenerateError::Config("a mleaf needs at least one possible parent".into()));
    }
    if c.measured_cogent > 0 && c.mleaf == 0 && c.observed == 0 {
        // the causally last measured variable would be a childless cogent
        return Err(GenerateError::Config(
            "measured cogent variables need a mleaf or observed variable downstream".into(),
        ));
    }
    Ok(())
}

fn draw_coef(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let magnitude = rng.random_range(range.0..=range.1);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

fn draw_structure(rng: &mut ChaCha8Rng, c: &GeneratorConfig) -> Option<CanonicalModel> {
    let mut model = CanonicalModel::new();
    let latents: Vec<VarId> =
        (0..c.latent).map(|i| model.add_variable(format!("H{}", i + 1), VariableKind::Unobserved)).collect();
    let measured: Vec<VarId> = (0..c.measured_cogent)
        .map(|i| {
            model.add_measured(
                format!("Z{}", i + 1),
                VariableKind::MeasuredCogent,
                format!("X{}", i + 1),
            )
        })
        .collect();
    let mleafs: Vec<VarId> = (0..c.mleaf)
        .map(|i| {
            model.add_measured(
                format!("Z{}", c.measured_cogent + i + 1),
                VariableKind::Mleaf,
                format!("X{}", c.measured_cogent + i + 1),
            )
        })
        .collect();
    let observed: Vec<VarId> =
        (0..c.observed).map(|i| model.add_variable(format!("Y{}", i + 1), VariableKind::ObservedCogent)).collect();

    let mut cogents: Vec<VarId> = measured.iter().chain(&observed).copied().collect();
    // random causal order among cogent variables
    for i in (1..cogents.len()).rev() {
        cogents.swap(i, rng.random_range(0..=i));
    }
    for i in 0..cogents.len() {
        for j in (i + 1)..cogents.len() {
            if rng.random::<f64>() < c.edge_density {
                model.add_edge(cogents[i], cogents[j], draw_coef(rng, c.coef_range));
            }
        }
    }
    for &m in &mleafs {
        for &v in &cogents {
            if rng.random::<f64>() < c.edge_density {
                model.add_edge(v, m, draw_coef(rng, c.coef_range));
            }
        }
    }
    for &h in &latents {
        let targets: Vec<VarId> = cogents.iter().chain(&mleafs).copied().collect();
        let mut children: Vec<VarId> =
            targets.iter().copied().filter(|_| rng.random::<f64>() < c.edge_density).collect();
        while children.len() < 2 {
            let pick = targets[rng.random_range(0..targets.len())];
            if !children.contains(&pick) {
                children.push(pick);
            }
        }
        for child in children {
            model.add_edge(h, child, draw_coef(rng, c.coef_range));
        }
    }
    // every mleaf needs a parent, every measured cogent a child in V
    for &m in &mleafs {
        if model.parent_set(m).is_empty() {
            if cogents.is_empty() {
                return None;
            }
            let p = cogents[rng.random_range(0..cogents.len())];
            model.add_edge(p, m, draw_coef(rng, c.coef_range));
        }
    }
    for &z in &measured {
        if !model.child_set(z).is_empty() {
            continue;
        }
        if !mleafs.is_empty() {
            let m = mleafs[rng.random_range(0..mleafs.len())];
            model.add_edge(z, m, draw_coef(rng, c.coef_range));
        } else {
            let pos = cogents.iter().position(|&v| v == z).expect("cogent");
            if pos + 1 >= cogents.len() {
                return None;
            }
            let child = cogents[pos + 1 + rng.random_range(0..cogents.len() - pos - 1)];
            model.add_edge(z, child, draw_coef(rng, c.coef_range));
        }
    }
    Some(model)
}

/// Draws a canonical model of the requested shape, redrawing until every
/// enforced check passes or the retry budget runs out. Deterministic in the
/// seed.
pub fn generate_model(config: &GeneratorConfig) -> Result<CanonicalModel, GenerateError> {
    validate_config(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let fail = |counts: &mut BTreeMap<String, usize>, what: &str| {
        *counts.entry(what.to_string()).or_insert(0) += 1;
    };
    for _ in 0..config.max_retries {
        let Some(model) = draw_structure(&mut rng, config) else {
            fail(&mut counts, "structure");
            continue;
        };
        debug_assert_eq!(model.validate_canonical(), vec![]);
        if config.enforce.minimal && !model.is_minimal()?.0 {
            fail(&mut counts, "minimal");
            continue;
        }
        if config.enforce.conventional_faithful
            && !check_conventional_faithfulness(&model, 1e-9)?.passed
        {
            fail(&mut counts, "conventional-faithful");
            continue;
        }
        if config.enforce.lvsemme_faithful
            && !check_lvsemme_faithfulness(&model, 1e-9, config.subset_cap)?.passed
        {
            fail(&mut counts, "lvsemme-faithful");
            continue;
        }
        return Ok(model);
    }
    let most_failed = counts
        .iter()
        .max_by_key(|(_, &n)| n)
        .map(|(k, _)| k.clone())
        .unwrap_or_else(|| "structure".into());
    Err(GenerateError::RetryBudgetExhausted {
        attempts: config.max_retries,
        most_failed,
        counts,
    })
}

/// Noise distribution tag and scale; all options are non-Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDist {
    pub kind: NoiseKind,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Uniform,
    Laplace,
    ExponentialCentered,
}

/// Per-noise distribution assignment with a default and optional overrides
/// keyed by variable id (measurement errors are keyed by the measurement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub default: NoiseDist,
    pub overrides: BTreeMap<VarId, NoiseDist>,
}

impl NoiseSpec {
    pub fn uniform(scale: f64) -> Self {
        NoiseSpec {
            default: NoiseDist { kind: NoiseKind::Uniform, scale },
            overrides: BTreeMap::new(),
        }
    }

    fn dist_for(&self, v: VarId) -> NoiseDist {
        self.overrides.get(&v).copied().unwrap_or(self.default)
    }
}

fn draw_noise(rng: &mut ChaCha8Rng, dist: NoiseDist) -> f64 {
    if dist.scale == 0.0 {
        return 0.0;
    }
    match dist.kind {
        NoiseKind::Uniform => rng.random_range(-dist.scale..=dist.scale),
        NoiseKind::Laplace => {
            let u: f64 = rng.random_range(-0.5..0.5);
            -dist.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
        NoiseKind::ExponentialCentered => {
            let u: f64 = rng.random::<f64>();
            -dist.scale * (1.0 - u).ln() - dist.scale
        }
    }
}

/// Observational data over the observables, one column per X then Y row of
/// the mixing convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Draws `n` joint samples by drawing all exogenous noises and propagating
/// the structural equations in topological order.
pub fn sample_data(
    model: &CanonicalModel,
    n: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<DataTable, crate::model::ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = model.topo_order()?;
    let observable_order: Vec<VarId> = {
        let mut v = model.mleafs();
        v.extend(model.measured_cogents());
        v.extend(model.observed());
        v
    };
    let columns: Vec<String> = observable_order
        .iter()
        .map(|&z| model.observable_name(z).map(str::to_string))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut value = vec![0.0f64; model.variables.len()];
        for &v in &order {
            let kind = model.variables[v.0].kind;
            let mut x = match kind {
                VariableKind::Mleaf => 0.0,
                _ => draw_noise(&mut rng, noise.dist_for(v)),
            };
            for (p, w) in model.parents_of(v) {
                x += w * value[p.0];
            }
            value[v.0] = x;
        }
        rows.push(
            observable_order
                .iter()
                .map(|&z| {
                    let obs = model.measurement_of(z).unwrap_or(z);
                    value[obs.0]
                })
                .collect(),
        );
    }
    Ok(DataTable { columns, rows })
}

/// Adds independent zero-mean Gaussian noise of scale `sigma` to each entry.
pub fn perturb_matrix(w: &MixingMatrix, sigma: f64, seed: u64) -> MixingMatrix {
    let mut out = w.clone();
    if sigma == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("nonnegative sigma");
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            out.values[(i, j)] += normal.sample(&mut rng);
        }
    }
    out
}

/// Randomly permutes columns and rescales each by a nonzero factor, the
/// anonymization a separation stage would introduce. Entry `j` of the
/// returned permutation is the source column of output column `j`.
pub fn shuffle_scale_columns(
    w: &MixingMatrix,
    seed: u64,
) -> (MixingMatrix, Vec<usize>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = w.ncols();
    let mut perm: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let scales: Vec<f64> = (0..m)
        .map(|_| {
            let s = rng.random_range(0.5..=2.0);
            if rng.random::<bool>() {
                s
            } else {
                -s
            }
        })
        .collect();
    let mut out = w.clone();
    for (j, (&src, &s)) in perm.iter().zip(&scales).enumerate() {
        let col = w.values.column(src) * s;
        out.values.set_column(j, &col);
        out.cols[j] = w.cols[src].clone();
    }
    (out, perm, scales)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VariableKind;

    #[test]
    fn generation_is_deterministic() {
        let config = GeneratorConfig::new(2, 2, 1, 1, 7);
        let a = generate_model(&config).unwrap();
        let b = generate_model(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_models_pass_enforced_checks() {
        for seed in 0..20 {
            let mut config = GeneratorConfig::new(2, 2, 2, 1, seed);
            config.enforce =
                EnforceFlags { minimal: true, conventional_faithful: true, lvsemme_faithful: false };
            let m = generate_model(&config).unwrap();
            assert_eq!(m.validate_canonical(), vec![]);
            assert!(m.is_minimal().unwrap().0);
            assert!(check_conventional_faithfulness(&m, 1e-9).unwrap().passed);
        }
    }

    #[test]
    fn small_config_passes_every_check_when_fully_enforced() {
        let mut config = GeneratorConfig::new(1, 1, 1, 1, 7);
        config.enforce =
            EnforceFlags { minimal: true, conventional_faithful: true, lvsemme_faithful: true };
        let m = generate_model(&config).unwrap();
        assert_eq!(m.validate_canonical(), vec![]);
        assert!(m.is_minimal().unwrap().0);
        assert!(check_conventional_faithfulness(&m, 1e-9).unwrap().passed);
        let report = check_lvsemme_faithfulness(&m, 1e-9, config.subset_cap).unwrap();
        assert!(report.passed);
    }

    #[test]
    fn zero_counts_give_empty_model() {
        let config = GeneratorConfig::new(0, 0, 0, 0, 1);
        let m = generate_model(&config).unwrap();
        assert!(m.variables.is_empty());
    }

    #[test]
    fn impossible_confounder_config_is_rejected() {
        let config = GeneratorConfig::new(1, 0, 0, 1, 1);
        assert!(matches!(generate_model(&config), Err(GenerateError::Config(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = crate::fixtures::confounded_triple_symbolic(0.7, -1.3, 2.0);
        let spec = NoiseSpec::uniform(1.0);
        let a = sample_data(&m, 3, &spec, 42).unwrap();
        let b = sample_data(&m, 3, &spec, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3);
        assert_eq!(a.columns, vec!["X_2", "X_1", "Y_3"]);
    }

    #[test]
    fn zero_scale_noises_give_zero_rows() {
        let m = crate::fixtures::confounded_triple_symbolic(0.7, -1.3, 2.0);
        let spec = NoiseSpec::uniform(0.0);
        let table = sample_data(&m, 2, &spec, 1).unwrap();
        assert!(table.rows.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn mleaf_measurement_tracks_parent_combination() {
        // Y1 -> Z1 (mleaf) with exact measurement: the mleaf column must be
        // the parent combination exactly when its measurement error is zero
        let mut m = CanonicalModel::new();
        let y1 = m.add_variable("Y1", VariableKind::ObservedCogent);
        let z1 = m.add_measured("Z1", VariableKind::Mleaf, "X1");
        m.add_edge(y1, z1, 1.7);
        let x1 = m.var_by_name("X1").unwrap();
        let mut spec = NoiseSpec::uniform(1.0);
        spec.overrides.insert(x1, NoiseDist { kind: NoiseKind::Uniform, scale: 0.0 });
        let table = sample_data(&m, 4, &spec, 9).unwrap();
        let xi = table.columns.iter().position(|c| c == "X1").unwrap();
        let yi = table.columns.iter().position(|c| c == "Y1").unwrap();
        for row in &table.rows {
            assert!((row[xi] - 1.7 * row[yi]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sigma_perturbation_is_identity() {
        let w = crate::mixing::build_w_star(&crate::fixtures::measured_fork(2.0, 3.0)).unwrap();
        let p = perturb_matrix(&w, 0.0, 3);
        assert_eq!(w.values, p.values);
    }

    #[test]
    fn small_perturbation_keeps_the_recovered_grouping() {
        let model = crate::fixtures::confounded_triple_symbolic(0.7, -1.3, 2.0);
        let w = crate::mixing::build_w_star(&model).unwrap();
        let clean = crate::recovery::recover_aog(&w, 1e-9).unwrap();
        let noisy = perturb_matrix(&w, 1e-6, 4);
        let recovered = crate::recovery::recover_aog(&noisy, 1e-4).unwrap();
        assert_eq!(clean.groups, recovered.groups);
    }

    #[test]
    fn heavy_perturbation_is_reported_not_guessed() {
        // two observed rows end up sharing full support once the noise washes
        // out every zero, which recovery must flag instead of grouping
        let mut m = CanonicalModel::new();
        let y1 = m.add_variable("Y1", VariableKind::ObservedCogent);
        let y2 = m.add_variable("Y2", VariableKind::ObservedCogent);
        let z = m.add_measured("Z", VariableKind::Mleaf, "X");
        m.add_edge(y1, y2, 0.9);
        m.add_edge(y1, z, 1.2);
        let w = crate::mixing::build_w_star(&m).unwrap();
        let noisy = perturb_matrix(&w, 10.0, 8);
        assert!(matches!(
            crate::recovery::recover_aog(&noisy, 1e-9),
            Err(crate::recovery::RecoveryError::Inconsistent { .. })
        ));
    }

    #[test]
    fn shuffle_keeps_column_multiset_up_to_scale() {
        let w = crate::mixing::build_w_star(&crate::fixtures::measured_fork(2.0, 3.0)).unwrap();
        let (shuffled, perm, scales) = shuffle_scale_columns(&w, 5);
        for (j, (&src, &s)) in perm.iter().zip(&scales).enumerate() {
            for i in 0..w.nrows() {
                assert_eq!(shuffled.values[(i, j)], w.values[(i, src)] * s);
            }
        }
        let witness =
            crate::mixing::match_up_to_permutation_scaling(&w, &shuffled, 1e-9).unwrap();
        assert!(witness.is_some());
    }

    use crate::model::CanonicalModel;
}
