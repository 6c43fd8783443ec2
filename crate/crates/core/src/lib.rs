//! Spectral solvers for energy-dissipative gradient flows
//! `φ_t = -G(Lφ + F'(φ))` on periodic boxes, built around zero-factor and
//! relaxed zero-factor time stepping with per-step energy diagnostics.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod relaxation;
pub mod schemes;
pub mod spectral;
pub mod zero_factor;

pub use error::{HarnessError, ModelError, SchemeError, SpectralError};
pub use model::{build_model, ModelParams, ModelSpec, NonlinearTerm};
pub use schemes::{SchemeKind, SchemeState, StepReport, Stepper, StepperSettings};
pub use spectral::{make_grid, Field, FourierMultiplier, GridSpec};
pub use zero_factor::{Branch, FactorKind, FactorSpec, RootPolicy, StepFamily};
