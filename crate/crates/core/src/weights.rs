//! Round-robin weight assignment over a sampled topology.
//!
//! Weights are kept as integer multiples of the lending increment, so the
//! balance-sheet constraints (a lender never lends more than its interbank
//! assets, a borrower never borrows more than its interbank liabilities)
//! can be checked exactly in grid units.

use std::path::Path;

use crate::balance_sheets::BankPopulation;
use crate::error::{Error, Result};
use crate::topology::Topology;

/// Amount moved per edge per sweep, in millions of USD.
pub const DEFAULT_INCREMENT: f64 = 0.01;
/// Sweep cap over the whole network.
pub const DEFAULT_MAX_SWEEPS: usize = 500;

/// One funded lending relationship: `src` lends `units * increment` to `dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightEntry {
    pub src: usize,
    pub dst: usize,
    pub units: u64,
}

/// A topology with lending amounts on its edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    n: usize,
    increment: f64,
    /// Sorted by (src, dst), unique.
    entries: Vec<WeightEntry>,
}

impl WeightedNetwork {
    /// Assembles a network from raw entries; they are sorted and checked
    /// for duplicates, self-loops, and out-of-range nodes.
    pub fn from_entries(n: usize, increment: f64, mut entries: Vec<WeightEntry>) -> Result<Self> {
        if !(increment > 0.0) || !increment.is_finite() {
            return Err(Error::config(format!(
                "increment must be positive and finite, got {increment}"
            )));
        }
        entries.sort_unstable_by_key(|e| (e.src, e.dst));
        for pair in entries.windows(2) {
            if (pair[0].src, pair[0].dst) == (pair[1].src, pair[1].dst) {
                return Err(Error::config(format!(
                    "duplicate weight entry {}->{}",
                    pair[0].src, pair[0].dst
                )));
            }
        }
        for e in &entries {
            if e.src == e.dst || e.src >= n || e.dst >= n {
                return Err(Error::config(format!(
                    "invalid weight entry {}->{} for n = {n}",
                    e.src, e.dst
                )));
            }
        }
        Ok(Self {
            n,
            increment,
            entries,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn increment(&self) -> f64 {
        self.increment
    }

    pub fn entries(&self) -> &[WeightEntry] {
        &self.entries
    }

    /// Lending amount src -> dst in currency, 0 if the edge is absent.
    pub fn weight(&self, src: usize, dst: usize) -> f64 {
        match self.entries.binary_search_by_key(&(src, dst), |e| (e.src, e.dst)) {
            Ok(idx) => self.entries[idx].units as f64 * self.increment,
            Err(_) => 0.0,
        }
    }

    /// (src, dst, amount) triples in (src, dst) order.
    pub fn weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .iter()
            .map(move |e| (e.src, e.dst, e.units as f64 * self.increment))
    }

    /// Units lent by bank `i` across all its edges.
    pub fn lent_units(&self, i: usize) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.src == i)
            .map(|e| e.units)
            .sum()
    }

    /// Units borrowed by bank `j` across all its edges.
    pub fn borrowed_units(&self, j: usize) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.dst == j)
            .map(|e| e.units)
            .sum()
    }

    /// Total amount lent across the network, in currency.
    pub fn total_lent(&self) -> f64 {
        self.entries.iter().map(|e| e.units).sum::<u64>() as f64 * self.increment
    }
}

/// Largest unit count whose value does not exceed `value`. A small slack
/// absorbs f64 rounding for values that sit on the grid (3.0 / 0.01 divides
/// to just under 300).
pub fn grid_units(value: f64, increment: f64) -> u64 {
    let units = value / increment + 1e-6;
    if units <= 0.0 {
        0
    } else {
        units.floor() as u64
    }
}

/// Assigns weights by sweeping lenders in ascending id order; within a
/// sweep each lender moves one increment to each successor (ascending id),
/// skipping transfers that would push the lender past its interbank assets
/// or the borrower past its interbank liabilities. Stops after a sweep with
/// no transfer, or after `max_sweeps` sweeps. Deterministic.
pub fn assign_weights(
    topology: &Topology,
    population: &BankPopulation,
    increment: f64,
    max_sweeps: usize,
) -> Result<WeightedNetwork> {
    if topology.n != population.len() {
        return Err(Error::config(format!(
            "topology has {} nodes but population has {} banks",
            topology.n,
            population.len()
        )));
    }
    if !(increment > 0.0) || !increment.is_finite() {
        return Err(Error::config(format!(
            "increment must be positive and finite, got {increment}"
        )));
    }
    if max_sweeps == 0 {
        return Err(Error::config("max_sweeps must be at least 1".to_string()));
    }

    let lender_cap: Vec<u64> = population
        .banks
        .iter()
        .map(|b| grid_units(b.interbank_assets, increment))
        .collect();
    let borrower_cap: Vec<u64> = population
        .banks
        .iter()
        .map(|b| grid_units(b.interbank_liabilities, increment))
        .collect();

    // topology edges are already sorted by (src, dst), which is exactly the
    // in-sweep visiting order
    let edges = &topology.edges;
    let mut units = vec![0u64; edges.len()];
    let mut lent = vec![0u64; topology.n];
    let mut borrowed = vec![0u64; topology.n];

    for _ in 0..max_sweeps {
        let mut transferred = false;
        for (k, &(i, j)) in edges.iter().enumerate() {
            if lent[i] < lender_cap[i] && borrowed[j] < borrower_cap[j] {
                units[k] += 1;
                lent[i] += 1;
                borrowed[j] += 1;
                transferred = true;
            }
        }
        if !transferred {
            break;
        }
    }

    let entries = edges
        .iter()
        .zip(units)
        .map(|(&(src, dst), units)| WeightEntry { src, dst, units })
        .collect();
    WeightedNetwork::from_entries(topology.n, increment, entries)
}

/// Drops entries that never received a transfer. Constraint sums are
/// unchanged.
pub fn prune_zero_edges(network: &WeightedNetwork) -> WeightedNetwork {
    WeightedNetwork {
        n: network.n,
        increment: network.increment,
        entries: network
            .entries
            .iter()
            .copied()
            .filter(|e| e.units > 0)
            .collect(),
    }
}

/// Writes `src,dst,weight` rows with 2-decimal weights; exact whenever the
/// increment is a multiple of 0.01.
pub fn write_weighted_csv(network: &WeightedNetwork, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["src", "dst", "weight"])?;
    for (src, dst, weight) in network.weights() {
        writer.write_record([src.to_string(), dst.to_string(), format!("{weight:.2}")])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a weighted edge list written by [`write_weighted_csv`]. Weights
/// are snapped back onto the increment grid by rounding.
pub fn read_weighted_csv(
    path: impl AsRef<Path>,
    n: usize,
    increment: f64,
) -> Result<WeightedNetwork> {
    if !(increment > 0.0) || !increment.is_finite() {
        return Err(Error::config(format!(
            "increment must be positive and finite, got {increment}"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers: Vec<&str> = reader
        .headers()
        .map_err(|e| Error::schema(e.to_string()))?
        .iter()
        .collect();
    if headers != ["src", "dst", "weight"] {
        return Err(Error::schema(format!(
            "expected header src,dst,weight, got {:?}",
            headers.join(",")
        )));
    }
    let mut entries = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::parse(format!("row {row}: {e}")))?;
        let src: usize = record[0]
            .parse()
            .map_err(|_| Error::parse(format!("row {row}: bad src {:?}", &record[0])))?;
        let dst: usize = record[1]
            .parse()
            .map_err(|_| Error::parse(format!("row {row}: bad dst {:?}", &record[1])))?;
        let weight: f64 = record[2]
            .parse()
            .map_err(|_| Error::parse(format!("row {row}: bad weight {:?}", &record[2])))?;
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::validation_at(row, "weight must be non-negative"));
        }
        entries.push(WeightEntry {
            src,
            dst,
            units: (weight / increment).round() as u64,
        });
    }
    WeightedNetwork::from_entries(n, increment, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance_sheets::{BankPopulation, BankRecord};

    fn two_bank_population(a1_ib: f64, l2_ib: f64) -> BankPopulation {
        let banks = vec![
            BankRecord {
                id: 0,
                name: None,
                total_assets: 100.0,
                market_cap: 10.0,
                interbank_assets: a1_ib,
                interbank_liabilities: 0.0,
            },
            BankRecord {
                id: 1,
                name: None,
                total_assets: 100.0,
                market_cap: 10.0,
                interbank_assets: 0.0,
                interbank_liabilities: l2_ib,
            },
        ];
        BankPopulation::new(banks, "pair").unwrap()
    }

    fn single_edge_topology() -> Topology {
        Topology {
            n: 2,
            edges: vec![(0, 1)],
            seed: 0,
        }
    }

    #[test]
    fn borrower_constraint_binds() {
        // min(5.0, 3.0) on the 0.01 grid, reachable within 300 sweeps
        let pop = two_bank_population(5.0, 3.0);
        let net = assign_weights(&single_edge_topology(), &pop, 0.01, 500).unwrap();
        assert_eq!(net.entries()[0].units, 300);
        assert!((net.weight(0, 1) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn lender_constraint_binds() {
        let pop = two_bank_population(2.0, 9.0);
        let net = assign_weights(&single_edge_topology(), &pop, 0.01, 500).unwrap();
        assert_eq!(net.entries()[0].units, 200);
    }

    #[test]
    fn sweep_cap_limits_transfers() {
        let pop = two_bank_population(5.0, 5.0);
        let net = assign_weights(&single_edge_topology(), &pop, 0.01, 50).unwrap();
        assert_eq!(net.entries()[0].units, 50);
    }

    #[test]
    fn zero_interbank_assets_lend_nothing() {
        let pop = two_bank_population(0.0, 3.0);
        let net = assign_weights(&single_edge_topology(), &pop, 0.01, 500).unwrap();
        assert_eq!(net.entries()[0].units, 0);
        assert_eq!(prune_zero_edges(&net).entries().len(), 0);
    }

    #[test]
    fn assignment_is_deterministic() {
        let pop = two_bank_population(5.0, 3.0);
        let a = assign_weights(&single_edge_topology(), &pop, 0.01, 500).unwrap();
        let b = assign_weights(&single_edge_topology(), &pop, 0.01, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn total_lent_nondecreasing_in_sweeps() {
        let pop = two_bank_population(5.0, 4.0);
        let mut prev = 0.0;
        for sweeps in [1, 10, 100, 200, 500] {
            let net = assign_weights(&single_edge_topology(), &pop, 0.01, sweeps).unwrap();
            assert!(net.total_lent() >= prev);
            prev = net.total_lent();
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let pop = two_bank_population(5.0, 3.0);
        let topo = Topology {
            n: 3,
            edges: vec![(0, 1)],
            seed: 0,
        };
        assert!(matches!(
            assign_weights(&topo, &pop, 0.01, 500),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn prune_preserves_totals() {
        let entries = vec![
            WeightEntry { src: 0, dst: 1, units: 10 },
            WeightEntry { src: 1, dst: 2, units: 0 },
            WeightEntry { src: 2, dst: 0, units: 7 },
        ];
        let net = WeightedNetwork::from_entries(3, 0.01, entries).unwrap();
        let pruned = prune_zero_edges(&net);
        assert_eq!(pruned.entries().len(), 2);
        assert_eq!(pruned.total_lent(), net.total_lent());
        assert_eq!(pruned.lent_units(0), net.lent_units(0));
        assert_eq!(pruned.borrowed_units(0), net.borrowed_units(0));
    }

    #[test]
    fn prune_is_identity_without_zeros() {
        let entries = vec![WeightEntry { src: 0, dst: 1, units: 5 }];
        let net = WeightedNetwork::from_entries(2, 0.01, entries).unwrap();
        assert_eq!(prune_zero_edges(&net), net);
    }

    #[test]
    fn grid_units_handles_on_grid_values() {
        assert_eq!(grid_units(3.0, 0.01), 300);
        assert_eq!(grid_units(2.995, 0.01), 299);
        assert_eq!(grid_units(0.0, 0.01), 0);
        assert_eq!(grid_units(-1.0, 0.01), 0);
    }

    #[test]
    fn csv_round_trip() {
        let entries = vec![
            WeightEntry { src: 0, dst: 1, units: 300 },
            WeightEntry { src: 1, dst: 2, units: 12345 },
        ];
        let net = WeightedNetwork::from_entries(3, 0.01, entries).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.csv");
        write_weighted_csv(&net, &path).unwrap();
        let loaded = read_weighted_csv(&path, 3, 0.01).unwrap();
        assert_eq!(loaded, net);
    }

    #[test]
    fn default_parameters_match_protocol() {
        assert_eq!(DEFAULT_INCREMENT, 0.01);
        assert_eq!(DEFAULT_MAX_SWEEPS, 500);
    }
}
