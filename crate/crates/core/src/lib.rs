//! Difference-in-differences estimators for policies with spillover to
//! neighboring units: effects on the treated (ATT) and on the neighbors (ATN)
//! by two-way fixed effects, outcome regression, inverse probability
//! weighting and doubly robust estimation, with bootstrap and parametric
//! intervals, a simulation harness and proximity subgroups.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod nuisance;
pub mod panel;
pub mod scalar;
pub mod simulation;
pub mod subgroups;

pub use error::{Error, NuisanceKind, Result};
pub use estimators::{
    estimate_effects, estimate_methods, estimate_pretrends, estimate_relative, estimate_scaled,
    preset_windows, EffectEstimate, Method, Scale, Window, WindowPreset,
};
pub use inference::{
    bootstrap_ci, estimate_panel, estimate_with_ci, parametric_ci_panel, BootstrapFlavor,
    BootstrapSpec, CiKind, EffectIntervals, IntervalEstimate, IntervalMethod,
};
pub use nuisance::{fit_nuisances, NuisanceSet, NuisanceSpec, PsMode};
pub use panel::{
    apply_exclusion, load_panel, make_comparison, write_panel, ComparisonFrame, Estimand,
    ExposureStatus, PanelDataset, PanelSchema, UnitId, UnitRecord,
};
pub use scalar::Scalar;

pub type Panel = panel::PanelDataset<f64>;
pub type Frame = panel::ComparisonFrame<f64>;
pub type Unit = panel::UnitRecord<f64>;
pub type Estimate = estimators::EffectEstimate<f64>;
pub type Intervals = inference::EffectIntervals<f64>;
pub type Nuisances = nuisance::NuisanceSet<f64>;
