//! Numerical toolkit for the weighted partial integrability functional
//! `m_rho(V)` of analytic vector fields that admit a Jacobi multiplier
//! (`div(rho V) = 0`).
//!
//! The functional is estimated by sampling initial conditions, computing a
//! finite-time maximal Lyapunov exponent for each, and taking the
//! `rho`-weighted fraction of orbits classified as regular. Supporting
//! modules build first-order Poincaré maps for time-periodic perturbations
//! of integrable flows and evaluate nondegeneracy, resonance and
//! non-persistence diagnostics.
//!
//! Module map:
//! - [`systems`]: system interface, the weighted benchmark field, Jacobians,
//!   weighted-divergence verification.
//! - [`integrate`]: fixed-step Euler / RK4 flows, tangent dynamics, FTLE.
//! - [`functional`]: orbit classification, `m_rho`, sweeps, convergence.
//! - [`poincare`]: first-order period map and its direct-integration oracle.
//! - [`diagnostics`]: Wronskians, resonances, Fourier tables, non-persistence.
//! - [`export`]: CSV writers for trajectories, FTLE records and sweeps.

// NaN-rejecting `!(a < b)` checks and indexed stage loops are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod export;
pub mod functional;
pub mod integrate;
pub mod poincare;
pub mod quadrature;
pub mod smooth;
pub mod summation;
pub mod systems;

pub use error::{Error, Result};
pub use functional::{
    classify, compute_m_rho, convergence_study, sweep_alpha, ConvergenceTable, FtleRecord,
    FunctionalConfig, GridSpec, IntegrabilityReport, LambdaStats,
};
pub use integrate::{
    ftle_max, integrate_flow, EscapeEvent, FlowResult, FtleResult, IntegrationConfig, Method,
    TangentInit, Trajectory,
};
pub use poincare::{ActionAngleModel, FirstOrderMap, MapImage, PerturbationDef};
pub use smooth::{Analytic, FiniteDiff, SmoothFn};
pub use systems::{BenchmarkParams, CouplingMatrix, FdScheme, PhaseState, SystemDef};

/// Version string embedded in every report.
pub const TOOL_VERSION: &str = concat!("mrho ", env!("CARGO_PKG_VERSION"));
