//! Fitness-model topology estimation.
//!
//! Link probabilities follow p_ij = z*y_i*y_j / (1 + z*y_i*y_j) with total
//! assets as the fitness proxy y. The single parameter z is calibrated by
//! bisection so that the expected number of directed edges matches a target,
//! then adjacency structures are sampled as independent Bernoulli draws per
//! ordered pair.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance_sheets::BankPopulation;
use crate::error::{Error, Result};
use crate::rng::mix_seed;

/// Bisection iteration cap for the z root-find.
const MAX_BISECTION_ITERATIONS: usize = 200;

/// Default ensemble size.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 50;

/// A calibrated fitness model: z plus the proxy values it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessCalibration {
    /// Universal parameter scaling the fitness products.
    pub z: f64,
    /// Fitness proxy per node (total assets, id order).
    pub fitness_proxy: Vec<f64>,
    /// Target number of directed edges.
    pub target_edges: f64,
    /// Expected directed edge count at the calibrated z.
    pub achieved_expected_edges: f64,
}

impl FitnessCalibration {
    pub fn n(&self) -> usize {
        self.fitness_proxy.len()
    }

    /// Variance of the sampled edge count: sum of p_ij(1 - p_ij) over
    /// ordered pairs, exact under independent Bernoulli sampling.
    pub fn edge_count_variance(&self) -> f64 {
        let y = &self.fitness_proxy;
        let mut var = 0.0;
        for i in 0..y.len() {
            for j in (i + 1)..y.len() {
                let p = raw_edge_probability(self.z, y[i], y[j]);
                var += 2.0 * p * (1.0 - p);
            }
        }
        var
    }

    /// Standard deviation of the sampled edge count.
    pub fn edge_count_sd(&self) -> f64 {
        self.edge_count_variance().sqrt()
    }
}

/// A sampled directed adjacency structure. Edge (i, j) means "i lends to j".
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub n: usize,
    /// Ordered pairs (src, dst), src != dst, sorted lexicographically.
    pub edges: Vec<(usize, usize)>,
    pub seed: u64,
}

impl Topology {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.binary_search(&(src, dst)).is_ok()
    }
}

/// Sidecar metadata stored next to an exported edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyMeta {
    pub n: usize,
    pub seed: u64,
    pub z: f64,
    pub target_edges: f64,
}

/// A set of independently sampled topologies under one calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyEnsemble {
    pub members: Vec<Topology>,
    pub calibration: FitnessCalibration,
    pub master_seed: u64,
}

/// Summary of the edge-count distribution across an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub mean: f64,
    /// Sample standard deviation (divisor size - 1); 0 for singletons.
    pub sd: f64,
    pub min: usize,
    pub max: usize,
}

fn raw_edge_probability(z: f64, y_i: f64, y_j: f64) -> f64 {
    let prod = z * y_i * y_j;
    if prod.is_finite() {
        prod / (1.0 + prod)
    } else {
        1.0
    }
}

/// Link probability p_ij = z*y_i*y_j / (1 + z*y_i*y_j), in [0, 1).
pub fn edge_probability(z: f64, y_i: f64, y_j: f64) -> Result<f64> {
    for (name, v) in [("z", z), ("y_i", y_i), ("y_j", y_j)] {
        if !(v >= 0.0) {
            return Err(Error::domain(format!(
                "{name} must be non-negative, got {v}"
            )));
        }
    }
    Ok(raw_edge_probability(z, y_i, y_j))
}

/// Expected number of directed edges at parameter z: sum of p_ij over
/// ordered pairs i != j.
pub fn expected_edge_count(z: f64, fitness_proxy: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..fitness_proxy.len() {
        for j in (i + 1)..fitness_proxy.len() {
            // p is symmetric, so each unordered pair counts twice
            sum += 2.0 * raw_edge_probability(z, fitness_proxy[i], fitness_proxy[j]);
        }
    }
    sum
}

/// Calibrates z so the expected directed edge count matches `target_edges`
/// within `tol` (absolute). The expected count is continuous and strictly
/// increasing in z, from 0 towards n(n-1), so bracketed bisection finds the
/// unique root.
pub fn calibrate_z(
    population: &BankPopulation,
    target_edges: f64,
    tol: f64,
) -> Result<FitnessCalibration> {
    let y = population.total_assets();
    let n = y.len();
    let max_edges = (n * (n - 1)) as f64;
    if !(target_edges > 0.0 && target_edges < max_edges) {
        return Err(Error::Infeasible(format!(
            "target_edges must lie strictly between 0 and n(n-1) = {max_edges}, got {target_edges}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::config(format!("tol must be positive, got {tol}")));
    }

    // Grow the upper bracket until the expected count exceeds the target.
    let mut hi = 1e-18;
    while expected_edge_count(hi, &y) < target_edges {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Convergence(
                "could not bracket z; expected edge count never reached the target".to_string(),
            ));
        }
    }

    let mut lo = 0.0;
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let sum = expected_edge_count(mid, &y);
        if (sum - target_edges).abs() <= tol {
            return Ok(FitnessCalibration {
                z: mid,
                fitness_proxy: y,
                target_edges,
                achieved_expected_edges: sum,
            });
        }
        if sum < target_edges {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(format!(
        "bisection did not reach |sum - K| <= {tol} within {MAX_BISECTION_ITERATIONS} iterations"
    )))
}

/// Samples one topology: each ordered pair (i, j), i != j, is included
/// independently with probability p_ij. Deterministic per seed.
pub fn sample_topology(calibration: &FitnessCalibration, seed: u64) -> Topology {
    let y = &calibration.fitness_proxy;
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = raw_edge_probability(calibration.z, y[i], y[j]);
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Topology { n, edges, seed }
}

/// Samples `size` independent topologies in parallel; member k uses the
/// derived seed `mix_seed(master_seed, k)`, so results are reproducible and
/// order-preserving.
pub fn sample_ensemble(
    calibration: &FitnessCalibration,
    size: usize,
    master_seed: u64,
) -> Result<TopologyEnsemble> {
    if size == 0 {
        return Err(Error::config("ensemble size must be at least 1".to_string()));
    }
    let members: Vec<Topology> = (0..size)
        .into_par_iter()
        .map(|k| sample_topology(calibration, mix_seed(master_seed, k as u64)))
        .collect();
    Ok(TopologyEnsemble {
        members,
        calibration: calibration.clone(),
        master_seed,
    })
}

/// Mean / sample sd / min / max of member edge counts.
pub fn density_stats(ensemble: &TopologyEnsemble) -> Result<DensityStats> {
    let counts: Vec<usize> = ensemble.members.iter().map(Topology::edge_count).collect();
    if counts.is_empty() {
        return Err(Error::config("ensemble is empty".to_string()));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let sd = if counts.len() < 2 {
        0.0
    } else {
        let ss: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    };
    Ok(DensityStats {
        mean,
        sd,
        min: *counts.iter().min().unwrap(),
        max: *counts.iter().max().unwrap(),
    })
}

/// Writes a topology as an edge-list CSV (`src,dst`) plus a JSON sidecar
/// with the sampling provenance.
pub fn export_topology(
    topology: &Topology,
    calibration: &FitnessCalibration,
    csv_path: impl AsRef<Path>,
    json_path: impl AsRef<Path>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(csv_path.as_ref())?;
    writer.write_record(["src", "dst"])?;
    for &(src, dst) in &topology.edges {
        writer.write_record([src.to_string(), dst.to_string()])?;
    }
    writer.flush()?;

    let meta = TopologyMeta {
        n: topology.n,
        seed: topology.seed,
        z: calibration.z,
        target_edges: calibration.target_edges,
    };
    let file = BufWriter::new(File::create(json_path.as_ref())?);
    serde_json::to_writer_pretty(file, &meta).map_err(|e| Error::parse(e.to_string()))?;
    Ok(())
}

/// Reads back an exported topology and its sidecar.
pub fn import_topology(
    csv_path: impl AsRef<Path>,
    json_path: impl AsRef<Path>,
) -> Result<(Topology, TopologyMeta)> {
    let file = BufReader::new(File::open(json_path.as_ref())?);
    let meta: TopologyMeta =
        serde_json::from_reader(file).map_err(|e| Error::parse(e.to_string()))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(csv_path.as_ref())?;
    let headers: Vec<&str> = reader.headers().map_err(|e| Error::schema(e.to_string()))?.iter().collect();
    if headers != ["src", "dst"] {
        return Err(Error::schema(format!(
            "expected header src,dst, got {:?}",
            headers.join(",")
        )));
    }
    let mut edges = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::parse(format!("row {row}: {e}")))?;
        let src: usize = record[0]
            .parse()
            .map_err(|_| Error::parse(format!("row {row}: bad src {:?}", &record[0])))?;
        let dst: usize = record[1]
            .parse()
            .map_err(|_| Error::parse(format!("row {row}: bad dst {:?}", &record[1])))?;
        if src == dst {
            return Err(Error::validation(format!("row {row}: self-loop {src}->{dst}")));
        }
        if src >= meta.n || dst >= meta.n {
            return Err(Error::validation(format!(
                "row {row}: node out of range for n = {}",
                meta.n
            )));
        }
        edges.push((src, dst));
    }
    edges.sort_unstable();
    let before = edges.len();
    edges.dedup();
    if edges.len() != before {
        return Err(Error::schema("duplicate edges in edge list".to_string()));
    }
    Ok((
        Topology {
            n: meta.n,
            edges,
            seed: meta.seed,
        },
        meta,
    ))
}
