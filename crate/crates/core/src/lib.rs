//! Wrapper feature selection for independent binary features when the only
//! data are estimated class-conditional probabilities.
//!
//! The criterion is the exact error of the two-class Naive Bayes classifier,
//! computed from a list of joint-mass cells ([`engine`]). On top of it sit
//! forward selection, individual rankings and an exhaustive oracle
//! ([`selector`]), no-improvement region geometry ([`region`]), a
//! perturbation study of selection stability ([`sensitivity`]) and table and
//! report I/O ([`io`]).

pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod region;
pub mod selector;
pub mod sensitivity;

pub use engine::{
    class_supports, error_of_subset, list_for_subset, prior_error, sensitivity_specificity, Cell, CellList,
    ClassSupport, EngineConfig, ErrorBreakdown, Label, SensSpec,
};
pub use error::{Error, Result};
pub use model::{ClassPriors, Feature, FeatureTable};
pub use region::{no_improvement_test, reduction_closed_form, NoImprovementRegion};
pub use selector::{
    exhaustive_best_subset, rank_individual, sfs_select, SelectionStep, SelectionTrace, StopReason, StoppingRule,
};
pub use sensitivity::{compare_rank_tables, perturb_table, run_sensitivity, PerturbationConfig, RankTable};
