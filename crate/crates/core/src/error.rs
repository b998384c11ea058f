use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate domain [{xmin}, {xmax}]")]
    DegenerateDomain { xmin: f64, xmax: f64 },
    #[error("periodic grid needs at least 5 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("Helmholtz solve missed its residual target (backward error {0:e})")]
    HelmholtzResidual(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "fixed-point iteration did not converge at t = {t} after {iterations} sweeps \
         (last increment {increment:e}): {reason}"
    )]
    NonConvergence {
        t: f64,
        iterations: usize,
        increment: f64,
        reason: String,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("trajectories are not comparable: {0}")]
    Misaligned(String),
    #[error("order needs positive errors, got {0:e} and {1:e}")]
    NonPositiveError(f64, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown preset `{0}` (run `presets` for the catalog)")]
    UnknownPreset(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}
