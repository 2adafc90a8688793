//! Synthetic panels with known effects, the Monte Carlo grid, and the TWFE
//! heterogeneity demonstration.

pub mod dgp;
pub mod harness;
pub mod scenario;
pub mod twfe_demo;

pub use dgp::{
    arm, atn_truth, clamp_distance, gen_covariates, gen_exposures, gen_outcomes,
    observed_from_original, simulate, simulate_with, CovariateDraw, Exposures, OutcomeNoise,
    SimulatedPanel, SimulatedTruth,
};
pub use harness::{
    published_reference, run_grid, run_replicate, run_scenario, write_metrics, GridConfig, MetricsRow,
    PublishedCell,
};
pub use scenario::{AlphaGroup, CovariateSet, SimulationScenario, PRESET_NAMES};
pub use twfe_demo::{twfe_heterogeneity_demo, DemoReport};
