//! Interbank contagion simulation toolkit.
//!
//! The pipeline reconstructs ensembles of interbank lending networks from
//! balance-sheet data with a fitness model, assigns lending amounts under
//! balance-sheet constraints, propagates shocks with DebtRank and the
//! default-cascade algorithm, and aggregates the results into stress-test
//! bands, loss distributions, and Value-at-Risk figures. Every stochastic
//! stage is seeded and bit-reproducible.

pub mod balance_sheets;
pub mod contagion;
pub mod error;
pub mod experiment;
pub mod risk;
pub mod rng;
pub mod topology;
pub mod weights;

pub use balance_sheets::{
    generate_synthetic_population, load_population, save_population, BankPopulation, BankRecord,
    SynthParams,
};
pub use contagion::{
    build_impact_matrix, build_impact_matrix_with_caps, debtrank, default_cascade,
    systemic_ranking, Algorithm, ContagionResult, ImpactMatrix, ShockVector,
};
pub use error::{Error, Result};
pub use experiment::{
    build_decay_schedule, impact_histogram, population_at_step, run_failure_sweep, DecaySchedule,
    Histogram, SweepAggregate, SweepCell, SweepResult,
};
pub use risk::{
    empirical_value_at_risk, loss_distribution, read_loss_samples, sample_shocks, stress_sweep,
    value_at_risk, write_stress_csv, LossDistribution, LossSample, LossScope, ScenarioGrid,
    ShockDistribution, StressPoint, VaRReport,
};
pub use rng::mix_seed;
pub use topology::{
    calibrate_z, density_stats, edge_probability, expected_edge_count, export_topology,
    import_topology, sample_ensemble, sample_topology, DensityStats, FitnessCalibration, Topology,
    TopologyEnsemble, TopologyMeta,
};
pub use weights::{
    assign_weights, grid_units, prune_zero_edges, read_weighted_csv, write_weighted_csv,
    WeightEntry, WeightedNetwork, DEFAULT_INCREMENT, DEFAULT_MAX_SWEEPS,
};
