//! Policy instruments: stress-test sweeps over shock magnitudes, random
//! shock sampling, conditional loss distributions, and empirical
//! Value-at-Risk.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance_sheets::BankPopulation;
use crate::contagion::{build_impact_matrix, debtrank, ImpactMatrix, ShockVector};
use crate::error::{Error, Result};
use crate::weights::WeightedNetwork;

/// Default truncated-normal shock distribution parameters.
pub const DEFAULT_SHOCK_MEAN: f64 = 0.5;
pub const DEFAULT_SHOCK_SD: f64 = 0.05;
/// Default VaR confidence level.
pub const DEFAULT_VAR_ALPHA: f64 = 0.95;

/// A sequence of shock magnitudes to apply to one target node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGrid {
    pub target_node: usize,
    /// Strictly increasing levels in (0, 1].
    pub shock_levels: Vec<f64>,
    /// Decay step the scenario population refers to (descriptive).
    pub step: usize,
}

impl ScenarioGrid {
    pub fn new(target_node: usize, shock_levels: Vec<f64>, step: usize) -> Result<Self> {
        if shock_levels.is_empty() {
            return Err(Error::domain("shock levels must not be empty".to_string()));
        }
        for &level in &shock_levels {
            if !(level > 0.0 && level <= 1.0) {
                return Err(Error::domain(format!(
                    "shock levels must lie in (0, 1], got {level}"
                )));
            }
        }
        for pair in shock_levels.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::domain(
                    "shock levels must be strictly increasing".to_string(),
                ));
            }
        }
        Ok(Self {
            target_node,
            shock_levels,
            step,
        })
    }

    /// `count` equally spaced levels from `min` to `max` inclusive, computed
    /// as exact rationals of the endpoints.
    pub fn linear(target_node: usize, count: usize, min: f64, max: f64, step: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::domain("need at least 2 levels".to_string()));
        }
        let denom = (count - 1) as f64;
        let levels = (0..count)
            .map(|i| ((denom - i as f64) * min + i as f64 * max) / denom)
            .collect();
        Self::new(target_node, levels, step)
    }

    /// The 20-scenario default: levels from 0.1 to 1.0.
    pub fn standard(target_node: usize, step: usize) -> Self {
        Self::linear(target_node, 20, 0.1, 1.0, step).expect("standard grid is valid")
    }
}

/// Impact band at one shock level, aggregated across ensemble members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressPoint {
    pub level: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Runs DebtRank with the shock level on the target node over every
/// ensemble member, for every level of the grid. Returns the mean and the
/// min/max uncertainty bounds of the impact fraction per level.
pub fn stress_sweep(
    ensemble: &[WeightedNetwork],
    population: &BankPopulation,
    grid: &ScenarioGrid,
) -> Result<Vec<StressPoint>> {
    if ensemble.is_empty() {
        return Err(Error::config("ensemble must not be empty".to_string()));
    }
    let n = population.len();
    if grid.target_node >= n {
        return Err(Error::config(format!(
            "target node {} out of range for n = {n}",
            grid.target_node
        )));
    }
    let caps = population.market_caps();
    let per_member: Vec<Vec<f64>> = ensemble
        .par_iter()
        .map(|network| -> Result<Vec<f64>> {
            let matrix = build_impact_matrix(network, population)?;
            grid.shock_levels
                .iter()
                .map(|&level| {
                    let shock = ShockVector::uniform_on(n, &[grid.target_node], level)?;
                    Ok(debtrank(&matrix, &shock, &caps)?.impact_fraction)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(grid
        .shock_levels
        .iter()
        .enumerate()
        .map(|(idx, &level)| {
            let impacts: Vec<f64> = per_member.iter().map(|m| m[idx]).collect();
            StressPoint {
                level,
                mean: impacts.iter().sum::<f64>() / impacts.len() as f64,
                min: impacts.iter().copied().fold(f64::INFINITY, f64::min),
                max: impacts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

/// CSV: `level,mean,min,max`.
pub fn write_stress_csv<W: Write>(points: &[StressPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["level", "mean", "min", "max"])?;
    for p in points {
        w.write_record([
            p.level.to_string(),
            p.mean.to_string(),
            p.min.to_string(),
            p.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Normal shock distribution truncated to [0, 1] by rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockDistribution {
    pub mean: f64,
    pub sd: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl ShockDistribution {
    pub fn new(mean: f64, sd: f64, sample_count: usize, seed: u64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::config(format!("sd must be positive, got {sd}")));
        }
        if !(0.0..=1.0).contains(&mean) {
            return Err(Error::config(format!(
                "mean must lie within the truncation bounds [0, 1], got {mean}"
            )));
        }
        if sample_count == 0 {
            return Err(Error::config("sample_count must be at least 1".to_string()));
        }
        Ok(Self {
            mean,
            sd,
            sample_count,
            seed,
        })
    }

    /// The N(0.5, 0.05) default.
    pub fn standard(sample_count: usize, seed: u64) -> Result<Self> {
        Self::new(DEFAULT_SHOCK_MEAN, DEFAULT_SHOCK_SD, sample_count, seed)
    }
}

/// Draws `sample_count` shocks from the truncated normal. Deterministic per
/// seed; at the default parameters rejection is negligible.
pub fn sample_shocks(dist: &ShockDistribution) -> Vec<f64> {
    let normal = Normal::new(dist.mean, dist.sd).expect("parameters validated on construction");
    let mut rng = ChaCha8Rng::seed_from_u64(dist.seed);
    (0..dist.sample_count)
        .map(|_| loop {
            let x: f64 = normal.sample(&mut rng);
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        })
        .collect()
}

/// What the loss is measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossScope {
    /// Distress level of a single observed node.
    Node(usize),
    /// Value-weighted mean distress of a group of nodes.
    Group(Vec<usize>),
    /// Impact fraction of the whole network.
    Network,
}

/// One (shock sample, ensemble member) loss observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSample {
    pub sample_index: usize,
    pub member_index: usize,
    pub shock: f64,
    pub loss_fraction: f64,
}

/// Loss observations for a scope, conditional on shocks applied to a fixed
/// set of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution {
    pub scope: LossScope,
    pub shocked: Vec<usize>,
    /// Ordered by (sample_index, member_index); exactly
    /// sample_count x ensemble size records.
    pub records: Vec<LossSample>,
}

impl LossDistribution {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss_fraction).collect()
    }

    /// CSV: `sample_index,member_index,shock,loss_fraction`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sample_index", "member_index", "shock", "loss_fraction"])?;
        for r in &self.records {
            w.write_record([
                r.sample_index.to_string(),
                r.member_index.to_string(),
                r.shock.to_string(),
                r.loss_fraction.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads back loss samples written by [`LossDistribution::write_csv`].
pub fn read_loss_samples(path: impl AsRef<Path>) -> Result<Vec<LossSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers: Vec<&str> = reader
        .headers()
        .map_err(|e| Error::schema(e.to_string()))?
        .iter()
        .collect();
    if headers != ["sample_index", "member_index", "shock", "loss_fraction"] {
        return Err(Error::schema(format!(
            "expected header sample_index,member_index,shock,loss_fraction, got {:?}",
            headers.join(",")
        )));
    }
    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::parse(format!("row {row}: {e}")))?;
        let field = |col: usize, name: &str| -> Result<f64> {
            record[col]
                .parse()
                .map_err(|_| Error::parse(format!("row {row}: bad {name} {:?}", &record[col])))
        };
        samples.push(LossSample {
            sample_index: record[0]
                .parse()
                .map_err(|_| Error::parse(format!("row {row}: bad sample_index")))?,
            member_index: record[1]
                .parse()
                .map_err(|_| Error::parse(format!("row {row}: bad member_index")))?,
            shock: field(2, "shock")?,
            loss_fraction: field(3, "loss_fraction")?,
        });
    }
    Ok(samples)
}

fn scope_loss(scope: &LossScope, result_h: &[f64], caps: &[f64], impact_fraction: f64) -> f64 {
    match scope {
        LossScope::Node(i) => result_h[*i],
        LossScope::Group(group) => {
            let weighted: f64 = group.iter().map(|&i| result_h[i] * caps[i]).sum();
            let total: f64 = group.iter().map(|&i| caps[i]).sum();
            weighted / total
        }
        LossScope::Network => impact_fraction,
    }
}

/// Runs DebtRank once per (shock sample, ensemble member) pair with the
/// sampled magnitude on the shocked node(s) and records the scope's loss
/// fraction. Scope nodes must be disjoint from the shocked set, since a
/// shocked node's loss would conflate cause and effect.
pub fn loss_distribution(
    ensemble: &[WeightedNetwork],
    population: &BankPopulation,
    shocked: &[usize],
    shocks: &[f64],
    scope: LossScope,
) -> Result<LossDistribution> {
    if ensemble.is_empty() {
        return Err(Error::config("ensemble must not be empty".to_string()));
    }
    if shocks.is_empty() {
        return Err(Error::config("shock sequence must not be empty".to_string()));
    }
    if shocked.is_empty() {
        return Err(Error::config("shocked set must not be empty".to_string()));
    }
    let n = population.len();
    for &node in shocked {
        if node >= n {
            return Err(Error::config(format!(
                "shocked node {node} out of range for n = {n}"
            )));
        }
    }
    let scope_nodes: &[usize] = match &scope {
        LossScope::Node(i) => std::slice::from_ref(i),
        LossScope::Group(g) => {
            if g.is_empty() {
                return Err(Error::config("scope group must not be empty".to_string()));
            }
            g
        }
        LossScope::Network => &[],
    };
    for &node in scope_nodes {
        if node >= n {
            return Err(Error::config(format!(
                "scope node {node} out of range for n = {n}"
            )));
        }
        if shocked.contains(&node) {
            return Err(Error::config(format!(
                "scope node {node} is in the shocked set; observed losses must be disjoint from the shock source"
            )));
        }
    }

    let caps = population.market_caps();
    let matrices: Vec<ImpactMatrix> = ensemble
        .iter()
        .map(|network| build_impact_matrix(network, population))
        .collect::<Result<_>>()?;

    let records: Vec<Vec<LossSample>> = shocks
        .par_iter()
        .enumerate()
        .map(|(sample_index, &magnitude)| -> Result<Vec<LossSample>> {
            let shock = ShockVector::uniform_on(n, shocked, magnitude)?;
            matrices
                .iter()
                .enumerate()
                .map(|(member_index, matrix)| {
                    let result = debtrank(matrix, &shock, &caps)?;
                    Ok(LossSample {
                        sample_index,
                        member_index,
                        shock: magnitude,
                        loss_fraction: scope_loss(
                            &scope,
                            &result.final_h,
                            &caps,
                            result.impact_fraction,
                        ),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(LossDistribution {
        scope,
        shocked: shocked.to_vec(),
        records: records.into_iter().flatten().collect(),
    })
}

/// Empirical Value-at-Risk report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaRReport {
    pub alpha: f64,
    pub var_value: f64,
    pub n_samples: usize,
}

/// Empirical quantile rule: the smallest sample l such that the fraction of
/// samples strictly exceeding l is at most 1 - alpha. The result is always
/// a member of the sample set.
pub fn empirical_value_at_risk(samples: &[f64], alpha: f64) -> Result<VaRReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::config("loss samples must not be empty".to_string()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut i = 0;
    loop {
        // skip past duplicates of sorted[i]
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let exceeding = (n - j) as f64 / n as f64;
        if exceeding <= 1.0 - alpha {
            return Ok(VaRReport {
                alpha,
                var_value: sorted[i],
                n_samples: n,
            });
        }
        i = j;
    }
}

/// VaR of a loss distribution at confidence `alpha`.
pub fn value_at_risk(losses: &LossDistribution, alpha: f64) -> Result<VaRReport> {
    empirical_value_at_risk(&losses.losses(), alpha)
}
