//! Standard and globally-forced SIR models, the case-table pipeline that
//! feeds them, two-step least-squares estimation and AIC/R² model selection.
//!
//! ```
//! use episir::{simulate, day_grid, ExtendedParams, InitialState, IntegratorConfig, ModelKind};
//! use episir::models::reference;
//!
//! let sim = simulate(
//!     ModelKind::Standard,
//!     &ExtendedParams::standard(episir::SirParams::new(0.0005, 0.1)),
//!     &InitialState::new(990.0, 10.0, 0.0),
//!     &day_grid(100),
//!     &IntegratorConfig::default(),
//! )
//! .unwrap();
//! assert_eq!(sim.trajectory.len(), 101);
//! assert_eq!(reference::GLOBAL.a1, 97.41);
//! ```

pub mod data;
pub mod estimation;
pub mod models;
pub mod ode;
pub mod optim;
pub mod selection;
pub mod stats;

pub use data::{
    derive_sir, describe, export_triple, parse_raw, parse_triple, CaseRecord, DataError,
    DeriveConfig, DescriptiveStats, RawCaseTable, TimeSeriesTriple,
};
pub use estimation::{
    fit_step1, fit_step2, model_series, sse_objective, two_step_fit, EstimationError, FitConfig,
    FitResult, InitialCondition, TwoStepFit,
};
pub use models::{
    day_grid, simulate, ExtendedParams, GlobalEffects, InitialState, ModelKind, SirParams,
};
pub use ode::{integrate, IntegratorConfig, Method, OdeError, Trajectory};
pub use selection::{compare, fitness, Comparison, FitnessReport, MetricError, Preference};
