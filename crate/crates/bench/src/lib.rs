//! Shared fixtures for the criterion benchmarks in `benches/`.

use mrho_core::systems::{benchmark_system, BenchmarkParams};
use mrho_core::{IntegrationConfig, PhaseState, SystemDef};

/// Benchmark field at the default parameters.
pub fn default_system() -> SystemDef {
    benchmark_system(BenchmarkParams::default()).expect("default parameters are valid")
}

/// A bounded initial condition from the default sampling plane.
pub fn sample_state() -> PhaseState {
    PhaseState::new(vec![0.45, -0.45, 0.7, 0.0]).expect("finite")
}

/// Short-horizon integration config so a single iteration stays in the
/// millisecond range.
pub fn short_config(t_max: f64) -> IntegrationConfig {
    IntegrationConfig { t_max, ..Default::default() }
}
