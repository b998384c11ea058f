//! Structure-preserving finite differences for the rotation-two-component
//! Camassa-Holm (R2CH) shallow-water system.
//!
//! The scheme conserves discrete mass, momentum and energy (for `sigma = 1`).
//! Each step is an implicit midpoint-type solve done by Picard iteration,
//! with an optional threshold viscosity for nonsmooth data.

pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod mesh;
pub mod scenarios;
pub mod scheme;

pub use diagnostics::{ConservedRecord, ConvergenceRow, SupDiff, Summation};
pub use error::{DiagnosticsError, MeshError, ScenarioError, SchemeError};
pub use mesh::{GridFunction, Helmholtz, PeriodicGrid};
pub use scenarios::{preset, InitialData, Preset, ScenarioSpec};
pub use scheme::{Integrator, Parameters, SolverConfig, State, StepReport, Trajectory};
