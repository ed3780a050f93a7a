//! Experiment orchestration: manifests, evaluation suites, file
//! outputs (CSV / JSON / SVG) and the self-check routines behind the
//! `oracle-check` and `gradcheck` subcommands.

pub mod checks;
pub mod eval;
pub mod manifest;
pub mod outputs;
pub mod svg;

pub use checks::{oracle_check, policy_gradcheck, OracleCheckReport};
pub use eval::{evaluate_methods, run_policy_episode, run_transfer_eval, EvalPoint, EvalSummary};
pub use manifest::ExperimentManifest;
