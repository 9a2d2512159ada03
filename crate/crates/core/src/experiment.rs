//! Capitalisation-decay failure sweeps.
//!
//! An ensemble of weighted networks is pushed through a sequence of time
//! steps in which every bank's market capitalisation shrinks geometrically
//! while topology, weights, and the other balance-sheet fields stay fixed.
//! At each step every selected node is failed in isolation and the systemic
//! impact is recorded per ensemble member, per algorithm.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance_sheets::BankPopulation;
use crate::contagion::{
    build_impact_matrix_with_caps, debtrank, default_cascade, Algorithm, ShockVector,
};
use crate::error::{Error, Result};
use crate::weights::WeightedNetwork;

/// Default number of snapshots.
pub const DEFAULT_STEPS: usize = 10;
/// Default per-step capitalisation decay factor.
pub const DEFAULT_DECAY_FACTOR: f64 = 0.3;

/// Geometric decay of market capitalisation: caps at step t (1-based) are
/// factor^(t-1) times the base caps, so step 1 is the undecayed snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySchedule {
    pub steps: usize,
    pub factor: f64,
    pub base_caps: Vec<f64>,
}

impl DecaySchedule {
    /// Market caps at a 1-based step.
    pub fn caps_at(&self, step: usize) -> Result<Vec<f64>> {
        if step == 0 || step > self.steps {
            return Err(Error::config(format!(
                "step must lie in 1..={}, got {step}",
                self.steps
            )));
        }
        let scale = self.factor.powi((step - 1) as i32);
        Ok(self.base_caps.iter().map(|&c| scale * c).collect())
    }
}

/// Builds a schedule from a population's market caps.
pub fn build_decay_schedule(
    population: &BankPopulation,
    steps: usize,
    factor: f64,
) -> Result<DecaySchedule> {
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::config(format!(
            "decay factor must lie in (0, 1), got {factor}"
        )));
    }
    if steps == 0 {
        return Err(Error::config("steps must be at least 1".to_string()));
    }
    Ok(DecaySchedule {
        steps,
        factor,
        base_caps: population.market_caps(),
    })
}

/// Population snapshot with caps decayed to the given step; the other
/// balance-sheet fields are unchanged.
pub fn population_at_step(
    population: &BankPopulation,
    schedule: &DecaySchedule,
    step: usize,
) -> Result<BankPopulation> {
    population.with_market_caps(&schedule.caps_at(step)?)
}

/// Per-member impacts for one (node, step, algorithm) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub node: usize,
    pub step: usize,
    pub algorithm: Algorithm,
    /// impact_fraction per ensemble member, in member order.
    pub impacts: Vec<f64>,
}

/// min / mean / max of a cell across ensemble members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub node: usize,
    pub step: usize,
    pub algorithm: Algorithm,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Full sweep output: every (node, step, algorithm, member) impact.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub members: usize,
    /// Sorted by (node, step, algorithm).
    cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cells(&self) -> &[SweepCell] {
        &self.cells
    }

    pub fn cell(&self, node: usize, step: usize, algorithm: Algorithm) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.node == node && c.step == step && c.algorithm == algorithm)
    }

    pub fn aggregates(&self) -> Vec<SweepAggregate> {
        self.cells
            .iter()
            .map(|c| {
                let mean = c.impacts.iter().sum::<f64>() / c.impacts.len() as f64;
                let min = c.impacts.iter().copied().fold(f64::INFINITY, f64::min);
                let max = c.impacts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                SweepAggregate {
                    node: c.node,
                    step: c.step,
                    algorithm: c.algorithm,
                    mean,
                    min,
                    max,
                }
            })
            .collect()
    }

    /// Long-form CSV: `node,step,algorithm,member,impact_fraction`.
    pub fn write_long_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node", "step", "algorithm", "member", "impact_fraction"])?;
        for cell in &self.cells {
            for (member, &impact) in cell.impacts.iter().enumerate() {
                w.write_record([
                    cell.node.to_string(),
                    cell.step.to_string(),
                    cell.algorithm.to_string(),
                    member.to_string(),
                    impact.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregate CSV: `node,step,algorithm,mean,min,max`.
    pub fn write_aggregate_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node", "step", "algorithm", "mean", "min", "max"])?;
        for agg in self.aggregates() {
            w.write_record([
                agg.node.to_string(),
                agg.step.to_string(),
                agg.algorithm.to_string(),
                agg.mean.to_string(),
                agg.min.to_string(),
                agg.max.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fails each selected node at each decay step on every ensemble member.
/// Weights and topology stay fixed; only the impact matrix is rebuilt per
/// step from the decayed caps. Deterministic; members run in parallel.
pub fn run_failure_sweep(
    ensemble: &[WeightedNetwork],
    schedule: &DecaySchedule,
    nodes: &[usize],
    algorithms: &[Algorithm],
) -> Result<SweepResult> {
    if ensemble.is_empty() {
        return Err(Error::config("ensemble must not be empty".to_string()));
    }
    if nodes.is_empty() {
        return Err(Error::config("node set must not be empty".to_string()));
    }
    if algorithms.is_empty() {
        return Err(Error::config("algorithm set must not be empty".to_string()));
    }
    let n = schedule.base_caps.len();
    for network in ensemble {
        if network.n() != n {
            return Err(Error::config(format!(
                "ensemble member has {} nodes, schedule has {n}",
                network.n()
            )));
        }
    }
    let mut nodes: Vec<usize> = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if let Some(&bad) = nodes.iter().find(|&&node| node >= n) {
        return Err(Error::config(format!(
            "node id {bad} out of range for n = {n}"
        )));
    }
    let mut algorithms: Vec<Algorithm> = algorithms.to_vec();
    algorithms.sort_unstable();
    algorithms.dedup();

    // member-major evaluation so each impact matrix is built once per
    // (member, step); the grid is then transposed into cells
    let per_member: Vec<Vec<f64>> = ensemble
        .par_iter()
        .map(|network| -> Result<Vec<f64>> {
            let mut impacts = Vec::with_capacity(schedule.steps * nodes.len() * algorithms.len());
            for step in 1..=schedule.steps {
                let caps = schedule.caps_at(step)?;
                let matrix = build_impact_matrix_with_caps(network, &caps)?;
                for &node in &nodes {
                    let shock = ShockVector::single_default(n, node)?;
                    for &algorithm in &algorithms {
                        let result = match algorithm {
                            Algorithm::DebtRank => debtrank(&matrix, &shock, &caps)?,
                            Algorithm::Cascade => default_cascade(&matrix, &shock, &caps)?,
                        };
                        impacts.push(result.impact_fraction);
                    }
                }
            }
            Ok(impacts)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(nodes.len() * schedule.steps * algorithms.len());
    for &node in &nodes {
        for step in 1..=schedule.steps {
            for &algorithm in &algorithms {
                // index within a member's flat (step, node, algorithm) grid
                let node_pos = nodes.binary_search(&node).unwrap();
                let alg_pos = algorithms.iter().position(|&a| a == algorithm).unwrap();
                let idx = ((step - 1) * nodes.len() + node_pos) * algorithms.len() + alg_pos;
                cells.push(SweepCell {
                    node,
                    step,
                    algorithm,
                    impacts: per_member.iter().map(|m| m[idx]).collect(),
                });
            }
        }
    }
    Ok(SweepResult {
        members: ensemble.len(),
        cells,
    })
}

/// One histogram bin over [lo, hi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram of impact fractions over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    /// CSV: `bin_lo,bin_hi,count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for bin in &self.bins {
            w.write_record([bin.lo.to_string(), bin.hi.to_string(), bin.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of the ensemble-member impacts in one sweep cell, over `bins`
/// equal-width bins spanning [0, 1]. A value of exactly 1 lands in the last
/// bin. Counts sum to the ensemble size.
pub fn impact_histogram(
    sweep: &SweepResult,
    node: usize,
    step: usize,
    algorithm: Algorithm,
    bins: usize,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::config("bins must be at least 1".to_string()));
    }
    let cell = sweep.cell(node, step, algorithm).ok_or_else(|| {
        Error::config(format!(
            "no sweep cell for node {node}, step {step}, algorithm {algorithm}"
        ))
    })?;
    let mut counts = vec![0usize; bins];
    for &impact in &cell.impacts {
        let idx = ((impact * bins as f64).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram {
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(b, count)| HistogramBin {
                lo: b as f64 / bins as f64,
                hi: (b + 1) as f64 / bins as f64,
                count,
            })
            .collect(),
    })
}
