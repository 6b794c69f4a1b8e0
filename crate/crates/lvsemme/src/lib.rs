//! Causal structure recovery for linear structural equation models with
//! unobserved confounders and measurement error.
//!
//! The crate covers the full desk pipeline for this model class:
//!
//! - [`model`]: canonical models, graph queries, validity, ordered groupings
//!   ([`grouping`]) and the minimality criterion;
//! - [`mixing`]: mixing matrices `W` / `W*`, measurement-column stripping and
//!   comparison up to column permutation and scaling;
//! - [`assumptions`]: conventional and subset-rank faithfulness checks backed
//!   by minimal vertex bottlenecks;
//! - [`recovery`]: ordered-grouping recovery from a mixing matrix and
//!   enumeration of the equivalence class with reconstructed parameters;
//! - [`equivalence`]: center/noise switching, latent removal and structural
//!   comparison of models;
//! - [`generate`]: seeded random fixtures, observational sampling and matrix
//!   perturbation;
//! - [`io`] and [`dot`]: file formats and graph-description export.

pub mod assumptions;
pub mod dot;
pub mod equivalence;
pub mod fixtures;
pub mod generate;
pub mod grouping;
pub mod io;
pub mod mixing;
pub mod model;
pub mod recovery;

pub use grouping::{compute_aog, compute_dog, Group, GroupKind, NoiseRef, OrderedGrouping};
pub use mixing::{
    build_w, build_w_star, canonical_column_form, match_up_to_permutation_scaling,
    strip_measurement_columns, support, MixingMatrix, DEFAULT_TOL,
};
pub use model::{CanonicalModel, CausalDiagram, ModelError, VarId, VariableKind, Violation};
pub use recovery::{dog_filter, enumerate_class, recover_aog, RecoveredGrouping, RecoveredModel};
