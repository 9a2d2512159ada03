//! Shared fixtures for the benchmark suite.

use contagion_core::{
    assign_weights, calibrate_z, generate_synthetic_population, sample_ensemble, BankPopulation,
    SynthParams, WeightedNetwork,
};

/// A calibrated, weighted ensemble at the given scale.
pub struct Fixture {
    pub population: BankPopulation,
    pub networks: Vec<WeightedNetwork>,
}

/// Builds a deterministic fixture: `n` banks, `target_edges` expected edges,
/// `members` weighted networks.
pub fn build_fixture(n: usize, target_edges: f64, members: usize) -> Fixture {
    let population =
        generate_synthetic_population(n, 7, &SynthParams::default()).expect("valid params");
    let calibration =
        calibrate_z(&population, target_edges, 1e-9 * target_edges).expect("feasible target");
    let ensemble = sample_ensemble(&calibration, members, 42).expect("non-empty ensemble");
    let networks = ensemble
        .members
        .iter()
        .map(|t| assign_weights(t, &population, 0.01, 500).expect("matching dimensions"))
        .collect();
    Fixture {
        population,
        networks,
    }
}
