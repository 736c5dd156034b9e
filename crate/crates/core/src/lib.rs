//! Open-circuit-voltage (OCV) curve models for battery state-of-charge
//! work: synthetic characterization data, curve fitting, SOC and capacity
//! estimation with first-order uncertainty propagation, an additive OCV
//! error budget, and a Monte-Carlo harness that validates the closed-form
//! statistics empirically.
//!
//! Everything is generic over the scalar type through [`real::Real`]
//! (implemented for `f32` and `f64`); the crate root re-exports `f64`
//! aliases for the common case.
//!
//! # Example
//!
//! ```
//! use ocvu_core::{lookup_soc, OcvModel, OcvObservation, SocFraction, Voltage};
//!
//! let model = OcvModel::nernst([3.7, 0.1, -0.1])?;
//! let truth = model.evaluate(SocFraction::new(0.5)?);
//! let obs = OcvObservation::new(truth, 0.005)?;
//! let estimate = lookup_soc(&model, &obs)?;
//! assert!((estimate.soc.value() - 0.5).abs() < 1e-9);
//! # Ok::<(), ocvu_core::Error>(())
//! ```

pub mod characterization;
pub mod error;
pub mod estimation;
pub mod fit;
mod interp;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod real;
mod stats;
pub mod table;
pub mod uncertainty;

pub use characterization::{coulomb_count, pseudo_ocv, simulate_gitt, simulate_low_rate_cycle};
pub use error::{Error, ErrorCategory, Result};
pub use estimation::{estimate_capacity, lookup_soc, nlc_curve, MONOTONE_GRID};
pub use fit::fit;
pub use mc::{
    derive_seed, validate_budget, validate_capacity, validate_soc_lemma, validate_soc_with_budget,
    write_csv_summary, write_jsonl, McQuantity, McReport,
};
pub use model::{default_epsilon, soc_grid, ModelForm};
pub use table::Direction;
pub use uncertainty::SourceKind;

/// [`model::OcvModel`] over `f64`.
pub type OcvModel = model::OcvModel<f64>;
/// [`model::SocFraction`] over `f64`.
pub type SocFraction = model::SocFraction<f64>;
/// [`model::Voltage`] over `f64`.
pub type Voltage = model::Voltage<f64>;
/// [`table::OcvSocTable`] over `f64`.
pub type OcvSocTable = table::OcvSocTable<f64>;
/// [`characterization::CellSimConfig`] over `f64`.
pub type CellSimConfig = characterization::CellSimConfig<f64>;
/// [`characterization::CycleTables`] over `f64`.
pub type CycleTables = characterization::CycleTables<f64>;
/// [`characterization::SocUpdate`] over `f64`.
pub type SocUpdate = characterization::SocUpdate<f64>;
/// [`fit::FitReport`] over `f64`.
pub type FitReport = fit::FitReport<f64>;
/// [`estimation::OcvObservation`] over `f64`.
pub type OcvObservation = estimation::OcvObservation<f64>;
/// [`estimation::SocEstimate`] over `f64`.
pub type SocEstimate = estimation::SocEstimate<f64>;
/// [`estimation::CapacityEstimate`] over `f64`.
pub type CapacityEstimate = estimation::CapacityEstimate<f64>;
/// [`uncertainty::ErrorSource`] over `f64`.
pub type ErrorSource = uncertainty::ErrorSource<f64>;
/// [`uncertainty::ErrorBudget`] over `f64`.
pub type ErrorBudget = uncertainty::ErrorBudget<f64>;
