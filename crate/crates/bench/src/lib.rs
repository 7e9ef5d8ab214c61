//! Shared fixtures for the benchmarks.

use gridseg::synth::{micro_instance, MicroConfig, MicroInstance};
use gridseg::SolverOptions;

/// A deterministic micro-instance with a few more buses than the oracle suite.
pub fn bench_instance(seed: u64) -> MicroInstance {
    let cfg = MicroConfig {
        buses: (8, 8),
        ..MicroConfig::default()
    };
    micro_instance(seed, &cfg, &SolverOptions::default()).expect("synthetic instance builds")
}
