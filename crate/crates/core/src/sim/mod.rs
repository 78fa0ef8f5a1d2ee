//! Synthetic two-sample data and Monte-Carlo size/power studies.

pub mod hazard;
pub mod study;

pub use hazard::{censoring_rate_to_scale, sample_survival, PerturbedHazard, SurvivalLaw};
pub use study::{
    empirical_size_study, generate_dataset, power_curve_study, uniformity_ks, wilson_interval, Alternative,
    Direction, PerturbedGroups, RejectionSummary, ScenarioConfig, StudyOutcome, ThetaScaling,
};
