//! Command-line toolkit for canonical LV-SEM-ME models: fixture generation,
//! mixing-matrix construction, grouping/class recovery, assumption checks,
//! model comparison and data sampling.
//!
//! Exit codes: 0 on success, 2 when a check or comparison reports a
//! violation, 1 on any error.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lvsemme::equivalence::{enumerate_equivalents, models_equal_mixing, same_unlabeled_structure};
use lvsemme::generate::{
    generate_model, perturb_matrix, sample_data, EnforceFlags, GeneratorConfig, NoiseDist,
    NoiseKind, NoiseSpec,
};
use lvsemme::model::CanonicalModel;
use lvsemme::{assumptions, dot, grouping, io, mixing, recovery};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const TOL_ENV: &str = "LVSEMME_TOL";

#[derive(Parser)]
#[command(name = "lvsemme", version, about = "Causal structure recovery for linear models with latent confounders and measurement error")]
struct Cli {
    /// Numeric tolerance for support, rank and comparison decisions
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for all randomized commands
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output style for reports
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random canonical model
    Generate(GenerateArgs),
    /// Build the mixing matrix of a model
    Mix(MixArgs),
    /// Remove measurement-error columns from a full mixing matrix
    Strip(StripArgs),
    /// Recover the ordered grouping and equivalence class from a matrix
    Recover(RecoverArgs),
    /// Check canonical form, minimality and faithfulness assumptions
    Check(CheckArgs),
    /// Compare two models by mixing matrix or structure
    Compare(CompareArgs),
    /// Enumerate observationally equivalent models
    Equivalents(EquivalentsArgs),
    /// Draw observational samples from a model
    Sample(SampleArgs),
    /// Add noise to a matrix file
    Perturb(PerturbArgs),
    /// Export a model as a DOT graph description
    Dot(DotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of observed variables
    #[arg(long = "p-y")]
    observed: usize,
    /// Number of measured cogent variables
    #[arg(long = "p-zc")]
    measured: usize,
    /// Number of mleaf variables
    #[arg(long = "p-ml")]
    mleaf: usize,
    /// Number of unobserved confounders
    #[arg(long = "p-h")]
    latent: usize,
    #[arg(long, default_value_t = 0.4)]
    density: f64,
    #[arg(long, default_value_t = 0.5)]
    coef_low: f64,
    #[arg(long, default_value_t = 1.5)]
    coef_high: f64,
    /// Comma-separated checks to enforce: minimal,conventional,lvsemme
    #[arg(long, value_delimiter = ',')]
    enforce: Vec<String>,
    #[arg(long, default_value_t = 256)]
    retries: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    model: PathBuf,
    /// Emit the full matrix including measurement-error columns
    #[arg(long)]
    full: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-row observability table
    #[arg(long)]
    obs_out: Option<PathBuf>,
}

#[derive(Args)]
struct StripArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    observability: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    wstar: PathBuf,
    #[arg(long)]
    observability: PathBuf,
    /// What to emit: the grouping, the full class, or the filtered class
    #[arg(long, value_enum, default_value_t = Emit::Aog)]
    emit: Emit,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for one DOT file per recovered model
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Aog,
    Class,
    Dog,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = What::All)]
    what: What,
    /// Cap on |J| + |K| for the subset-rank check
    #[arg(long, default_value_t = assumptions::DEFAULT_SUBSET_CAP)]
    cap: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum What {
    All,
    Canonical,
    Minimal,
    Conventional,
    Lvsemme,
}

#[derive(Args)]
struct CompareArgs {
    m1: PathBuf,
    m2: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Mixing)]
    mode: Mode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Mixing,
    Structure,
}

#[derive(Args)]
struct EquivalentsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = GroupingKind::Aog)]
    grouping: GroupingKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupingKind {
    Aog,
    Dog,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(short, long)]
    n: usize,
    /// Default noise as tag:scale with tag in uniform|laplace|expcentered
    #[arg(long, default_value = "uniform:1.0")]
    noise: String,
    /// Per-variable override as NAME=tag:scale (repeatable)
    #[arg(long = "noise-for")]
    noise_for: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn tolerance(cli: &Cli) -> Result<f64> {
    if let Some(t) = cli.tol {
        return Ok(t);
    }
    if let Ok(raw) = std::env::var(TOL_ENV) {
        let t: f64 = raw.parse().with_context(|| format!("bad {TOL_ENV} value {raw:?}"))?;
        eprintln!("# tolerance {t} (from {TOL_ENV})");
        return Ok(t);
    }
    Ok(mixing::DEFAULT_TOL)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {path:?}"))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<CanonicalModel> {
    io::load_model(path).with_context(|| format!("loading model {path:?}"))
}

fn load_matrix(matrix: &Path, observability: Option<&Path>) -> Result<mixing::MixingMatrix> {
    let mut w = io::matrix_from_tsv(&std::fs::read_to_string(matrix)?)
        .with_context(|| format!("parsing matrix {matrix:?}"))?;
    if let Some(obs) = observability {
        io::apply_observability(&mut w, &std::fs::read_to_string(obs)?)
            .with_context(|| format!("applying observability {obs:?}"))?;
    }
    Ok(w)
}

fn parse_noise(text: &str) -> Result<NoiseDist> {
    let (tag, scale) =
        text.split_once(':').ok_or_else(|| anyhow::anyhow!("noise must be tag:scale, got {text:?}"))?;
    let kind = match tag {
        "uniform" => NoiseKind::Uniform,
        "laplace" => NoiseKind::Laplace,
        "expcentered" | "exponential-centered" => NoiseKind::ExponentialCentered,
        other => bail!("unknown noise tag {other:?}"),
    };
    Ok(NoiseDist { kind, scale: scale.parse()? })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let tol = tolerance(&cli)?;
    match &cli.command {
        Command::Generate(args) => {
            let mut config =
                GeneratorConfig::new(args.observed, args.measured, args.mleaf, args.latent, cli.seed);
            config.edge_density = args.density;
            config.coef_range = (args.coef_low, args.coef_high);
            config.max_retries = args.retries;
            let mut enforce = EnforceFlags::default();
            for flag in &args.enforce {
                match flag.as_str() {
                    "minimal" => enforce.minimal = true,
                    "conventional" => enforce.conventional_faithful = true,
                    "lvsemme" => enforce.lvsemme_faithful = true,
                    "" => {}
                    other => bail!("unknown enforce flag {other:?}"),
                }
            }
            config.enforce = enforce;
            let model = generate_model(&config)?;
            emit(&args.out, &(io::model_to_json(&model)? + "\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mix(args) => {
            let model = load_model(&args.model)?;
            let w = if args.full {
                mixing::build_w(&model)?
            } else {
                mixing::build_w_star(&model)?
            };
            if let Some(obs) = &args.obs_out {
                std::fs::write(obs, io::observability_to_tsv(&w))?;
            }
            emit(&args.out, &io::matrix_to_tsv(&w))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Strip(args) => {
            let w = load_matrix(&args.matrix, Some(&args.observability))?;
            let outcome = mixing::strip_measurement_columns(&w)?;
            for (row, candidates) in &outcome.ambiguities {
                eprintln!(
                    "# ambiguous one-hot columns {candidates:?} for measured row {} ({})",
                    row, w.rows[*row].label
                );
            }
            emit(&args.out, &io::matrix_to_tsv(&outcome.matrix))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Recover(args) => {
            let mut w = load_matrix(&args.wstar, Some(&args.observability))?;
            w.tol = tol;
            let grouping = recovery::recover_aog(&w, tol)?;
            let text = match args.emit {
                Emit::Aog => serde_json::to_string_pretty(&grouping)? + "\n",
                Emit::Class | Emit::Dog => {
                    let class = recovery::enumerate_class(&w, &grouping, tol)?;
                    for r in &class.rejected {
                        eprintln!("# rejected selection {:?}: {}", r.centers, r.reason);
                    }
                    let models = if args.emit == Emit::Dog {
                        recovery::dog_filter(&class.models, tol)?
                    } else {
                        class.models
                    };
                    if let Some(dir) = &args.dot {
                        std::fs::create_dir_all(dir)?;
                        for (k, m) in models.iter().enumerate() {
                            let canonical = m.to_canonical_model(&w, tol);
                            std::fs::write(dir.join(format!("model_{k}.dot")), dot::export_dot(&canonical))?;
                        }
                    }
                    let parts: Vec<serde_json::Value> = models
                        .iter()
                        .map(|m| {
                            serde_json::from_str(&io::recovered_model_to_json(m, tol)?)
                                .map_err(anyhow::Error::from)
                        })
                        .collect::<Result<_>>()?;
                    serde_json::to_string_pretty(&serde_json::json!({ "models": parts }))? + "\n"
                }
            };
            emit(&args.out, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check(args) => {
            let model = load_model(&args.model)?;
            let mut failed = false;
            let mut report = serde_json::Map::new();
            let all = args.what == What::All;
            if all || args.what == What::Canonical {
                let violations = model.validate_canonical();
                failed |= !violations.is_empty();
                if cli.format == Format::Text {
                    println!("canonical: {}", summarize_violations(&violations));
                }
                report.insert("canonical".into(), serde_json::to_value(&violations)?);
            }
            if all || args.what == What::Minimal {
                let (minimal, witness) = model.is_minimal()?;
                failed |= !minimal;
                if cli.format == Format::Text {
                    match witness {
                        None => println!("minimal: ok"),
                        Some((h, z)) => println!(
                            "minimal: removable confounder {} via mleaf {}",
                            model.var(h)?.name,
                            model.var(z)?.name
                        ),
                    }
                }
                report.insert("minimal".into(), serde_json::json!({ "passed": minimal }));
            }
            if all || args.what == What::Conventional {
                let r = assumptions::check_conventional_faithfulness(&model, tol)?;
                failed |= !r.passed;
                if cli.format == Format::Text {
                    println!(
                        "conventional-faithfulness: {} ({} pairs examined)",
                        if r.passed { "ok" } else { "violated" },
                        r.subsets_examined
                    );
                    for v in &r.violations {
                        println!("  {v:?}");
                    }
                }
                report.insert("conventional".into(), serde_json::to_value(&r)?);
            }
            if all || args.what == What::Lvsemme {
                let r = assumptions::check_lvsemme_faithfulness(&model, tol, args.cap)?;
                failed |= !r.passed;
                if cli.format == Format::Text {
                    println!(
                        "lvsemme-faithfulness: {} ({} subset pairs{})",
                        if r.passed { "ok" } else { "violated" },
                        r.subsets_examined,
                        if r.truncated { ", truncated" } else { "" }
                    );
                    for v in &r.violations {
                        println!("  {v:?}");
                    }
                }
                report.insert("lvsemme".into(), serde_json::to_value(&r)?);
            }
            if cli.format == Format::Json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Compare(args) => {
            let m1 = load_model(&args.m1)?;
            let m2 = load_model(&args.m2)?;
            let equal = match args.mode {
                Mode::Mixing => models_equal_mixing(&m1, &m2, tol)?,
                Mode::Structure => same_unlabeled_structure(&m1, &m2),
            };
            match cli.format {
                Format::Text => println!("{}", if equal { "equivalent" } else { "different" }),
                Format::Json => println!("{}", serde_json::json!({ "equal": equal })),
            }
            Ok(if equal { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Equivalents(args) => {
            let model = load_model(&args.model)?;
            let grouping = match args.grouping {
                GroupingKind::Aog => grouping::compute_aog(&model)?,
                GroupingKind::Dog => grouping::compute_dog(&model)?,
            };
            let members = enumerate_equivalents(&model, &grouping, tol)?;
            let parts: Vec<serde_json::Value> = members
                .iter()
                .map(|m| serde_json::from_str(&io::model_to_json(m)?).map_err(anyhow::Error::from))
                .collect::<Result<_>>()?;
            emit(
                &args.out,
                &(serde_json::to_string_pretty(&serde_json::json!({ "models": parts }))? + "\n"),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample(args) => {
            let model = load_model(&args.model)?;
            let mut spec = NoiseSpec { default: parse_noise(&args.noise)?, overrides: Default::default() };
            for item in &args.noise_for {
                let (name, dist) = item
                    .split_once('=')
                    .ok_or_else(|| anyhow::anyhow!("expected NAME=tag:scale, got {item:?}"))?;
                let id = model
                    .var_by_name(name)
                    .ok_or_else(|| anyhow::anyhow!("unknown variable {name:?}"))?;
                spec.overrides.insert(id, parse_noise(dist)?);
            }
            let table = sample_data(&model, args.n, &spec, cli.seed)?;
            emit(&args.out, &io::table_to_tsv(&table))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Perturb(args) => {
            let w = load_matrix(&args.matrix, None)?;
            let out = perturb_matrix(&w, args.sigma, cli.seed);
            emit(&args.out, &io::matrix_to_tsv(&out))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dot(args) => {
            let model = load_model(&args.model)?;
            emit(&args.out, &dot::export_dot(&model))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn summarize_violations(violations: &[lvsemme::Violation]) -> String {
    if violations.is_empty() {
        "ok".to_string()
    } else {
        let items: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        format!("{} violation(s): {}", violations.len(), items.join("; "))
    }
}
