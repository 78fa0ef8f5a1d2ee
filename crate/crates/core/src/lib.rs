//! One-sided multi-direction weighted logrank tests for two-sample
//! right-censored survival data.
//!
//! Several weighted logrank statistics are combined into a projection-type
//! maximum statistic, whose null distribution is approximated by a wild
//! bootstrap. The [`sim`] module reproduces size and power studies, and
//! [`ingest`] reads survival data from CSV, including a bundled copy of the
//! Veterans' Administration lung cancer trial.

pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod ingest;
pub mod logrank;
pub mod projection;
pub mod qp;
pub mod report;
pub mod rng;
pub mod sample;
pub mod sim;
pub mod weights;

pub use bootstrap::{run_test, CovEstimatorKind, MultiplierKind, TestConfig, TestResult};
pub use error::{Error, Result};
pub use estimators::{build_risk_table, nelson_aalen, EventTable, RiskTable, StepFunction, TieMethod};
pub use logrank::{covariance_matrix, logrank_vector, singly_weighted_test, StatBundle, SinglyWeightedResult};
pub use projection::max_projection_statistic;
pub use qp::qp_oracle_statistic;
pub use sample::{Group, Subject, SurvivalSample};
pub use weights::{select_independent_subset, PolynomialWeight, Weight, WeightSet};
pub use ingest::{load, parse_survival_csv, InputSpec, IngestError};
pub use report::OutputReport;
