//! Distress propagation on weighted lending networks.
//!
//! Two recursions share the same accumulation rule
//!
//! ```text
//! h_i(t) = min[1, h_i(t-1) + sum over distressed j of W[j][i] * h_j(t-1)]
//! ```
//!
//! and differ only in when a node joins the propagating set: DebtRank admits
//! any node whose cumulative distress h turns positive, the default cascade
//! admits a node only once it defaults (h reaches 1). A node propagates in
//! exactly one step and is inactive afterwards, so both terminate within
//! n + 1 steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance_sheets::BankPopulation;
use crate::error::{Error, Result};
use crate::weights::WeightedNetwork;

/// Absolute tolerance for treating a distress level as a full default.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Which propagation rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    DebtRank,
    Cascade,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::DebtRank => "debtrank",
            Algorithm::Cascade => "cascade",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "debtrank" => Ok(Algorithm::DebtRank),
            "cascade" => Ok(Algorithm::Cascade),
            other => Err(Error::config(format!(
                "unknown algorithm {other:?}, expected debtrank or cascade"
            ))),
        }
    }
}

/// Sparse impact matrix. `entry(j, i)` is the fraction of lender i's market
/// capitalisation wiped out by borrower j's full default, in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMatrix {
    n: usize,
    /// rows[j] lists (i, W[j][i]) for i exposed to j, ascending in i.
    rows: Vec<Vec<(usize, f64)>>,
}

impl ImpactMatrix {
    /// Builds a matrix from (j, i, impact) triples.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for (j, i, w) in entries {
            if j >= n || i >= n {
                return Err(Error::config(format!(
                    "impact entry ({j}, {i}) out of range for n = {n}"
                )));
            }
            if j == i {
                return Err(Error::domain(format!(
                    "impact matrix must have zero diagonal, got entry at ({j}, {j})"
                )));
            }
            if !(0.0..=1.0).contains(&w) || !w.is_finite() {
                return Err(Error::domain(format!(
                    "impact entries must lie in [0, 1], got {w} at ({j}, {i})"
                )));
            }
            if w > 0.0 {
                rows[j].push((i, w));
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(i, _)| i);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::config("duplicate impact entry".to_string()));
                }
            }
        }
        Ok(Self { n, rows })
    }

    /// Builds a matrix from a dense row-major layout `m[j][i]`.
    pub fn from_dense(m: &[Vec<f64>]) -> Result<Self> {
        let n = m.len();
        let mut entries = Vec::new();
        for (j, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config("impact matrix must be square".to_string()));
            }
            for (i, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    entries.push((j, i, w));
                }
            }
        }
        Self::from_entries(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, j: usize, i: usize) -> f64 {
        self.rows[j]
            .binary_search_by_key(&i, |&(node, _)| node)
            .map(|idx| self.rows[j][idx].1)
            .unwrap_or(0.0)
    }

    /// Nodes hit by j's default, with impact fractions.
    pub fn impacts_of(&self, j: usize) -> &[(usize, f64)] {
        &self.rows[j]
    }
}

/// Initial distress levels, one per node, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockVector(Vec<f64>);

impl ShockVector {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        for (i, &x) in psi.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) || !x.is_finite() {
                return Err(Error::domain(format!(
                    "shock entries must lie in [0, 1], got {x} at node {i}"
                )));
            }
        }
        Ok(Self(psi))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Full default of a single node.
    pub fn single_default(n: usize, node: usize) -> Result<Self> {
        Self::uniform_on(n, &[node], 1.0)
    }

    /// The same magnitude applied to every node in `nodes`.
    pub fn uniform_on(n: usize, nodes: &[usize], magnitude: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&magnitude) || !magnitude.is_finite() {
            return Err(Error::domain(format!(
                "shock magnitude must lie in [0, 1], got {magnitude}"
            )));
        }
        let mut psi = vec![0.0; n];
        for &node in nodes {
            if node >= n {
                return Err(Error::config(format!(
                    "shocked node {node} out of range for n = {n}"
                )));
            }
            psi[node] = magnitude;
        }
        Ok(Self(psi))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn psi(&self) -> &[f64] {
        &self.0
    }

    /// Nodes with a positive initial shock.
    pub fn distressed(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0.0).collect()
    }

    fn is_binary(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0 || x == 1.0)
    }
}

/// Outcome of one propagation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionResult {
    /// Cumulative distress per node at termination.
    pub final_h: Vec<f64>,
    /// Systemic impact beyond the initial shock, in currency.
    pub impact_currency: f64,
    /// Impact as a fraction of the total economic value at stake.
    pub impact_fraction: f64,
    /// Nodes whose final distress reached 1 (within tolerance).
    pub defaulted: Vec<usize>,
    /// Number of time steps, initialization included.
    pub steps: usize,
}

fn run_contagion(
    matrix: &ImpactMatrix,
    shock: &ShockVector,
    values: &[f64],
    cascade: bool,
) -> Result<ContagionResult> {
    let n = matrix.n();
    if shock.len() != n || values.len() != n {
        return Err(Error::config(format!(
            "dimension mismatch: matrix n = {n}, shock len = {}, values len = {}",
            shock.len(),
            values.len()
        )));
    }
    if let Some(&v) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!(
            "economic values must be positive and finite, got {v}"
        )));
    }

    let psi = shock.psi();
    let mut h = psi.to_vec();
    let mut inactive = vec![false; n];
    let mut in_frontier = vec![false; n];
    let mut frontier = shock.distressed();
    for &i in &frontier {
        in_frontier[i] = true;
    }

    let mut t = 1usize;
    while !frontier.is_empty() {
        // synchronous step: all contributions read h(t-1)
        let mut delta = vec![0.0; n];
        for &j in &frontier {
            let hj = h[j];
            for &(i, w) in matrix.impacts_of(j) {
                delta[i] += w * hj;
            }
        }
        for &j in &frontier {
            inactive[j] = true;
            in_frontier[j] = false;
        }
        let mut next = Vec::new();
        for i in 0..n {
            if delta[i] > 0.0 {
                h[i] = (h[i] + delta[i]).min(1.0);
            }
            if !inactive[i] && !in_frontier[i] {
                let admit = if cascade {
                    h[i] >= 1.0 - DEFAULT_TOLERANCE
                } else {
                    h[i] > 0.0
                };
                if admit {
                    in_frontier[i] = true;
                    next.push(i);
                }
            }
        }
        frontier = next;
        t += 1;
    }

    let impact_currency: f64 = (0..n).map(|i| (h[i] - psi[i]) * values[i]).sum();
    let total_value: f64 = values.iter().sum();
    let defaulted = (0..n).filter(|&i| h[i] >= 1.0 - DEFAULT_TOLERANCE).collect();
    Ok(ContagionResult {
        final_h: h,
        impact_currency,
        impact_fraction: impact_currency / total_value,
        defaulted,
        steps: t,
    })
}

/// DebtRank: every node whose cumulative distress turns positive propagates
/// it once to its creditors. Returns the systemic impact beyond the initial
/// shock, valued at `values` (market capitalisation).
pub fn debtrank(
    matrix: &ImpactMatrix,
    shock: &ShockVector,
    values: &[f64],
) -> Result<ContagionResult> {
    run_contagion(matrix, shock, values, false)
}

/// Default cascade: distress propagates only through nodes that fully
/// default. Initial shocks must be binary, since the cascade only simulates
/// complete defaults.
pub fn default_cascade(
    matrix: &ImpactMatrix,
    shock: &ShockVector,
    values: &[f64],
) -> Result<ContagionResult> {
    if !shock.is_binary() {
        return Err(Error::domain(
            "the default cascade only simulates complete defaults; shock entries must be 0 or 1"
                .to_string(),
        ));
    }
    run_contagion(matrix, shock, values, true)
}

/// Impact matrix from a weighted lending network. For each lending amount
/// w from i to j, borrower j's full default wipes out min(1, w / C_i) of
/// lender i's capital. This is the single point where the "i lends to j"
/// edge convention is mapped onto exposure direction.
pub fn build_impact_matrix(
    network: &WeightedNetwork,
    population: &BankPopulation,
) -> Result<ImpactMatrix> {
    if network.n() != population.len() {
        return Err(Error::config(format!(
            "network has {} nodes but population has {} banks",
            network.n(),
            population.len()
        )));
    }
    build_impact_matrix_with_caps(network, &population.market_caps())
}

/// Same as [`build_impact_matrix`] with market caps supplied directly;
/// used when sweeping over decayed capitalisation snapshots.
pub fn build_impact_matrix_with_caps(
    network: &WeightedNetwork,
    market_caps: &[f64],
) -> Result<ImpactMatrix> {
    if network.n() != market_caps.len() {
        return Err(Error::config(format!(
            "network has {} nodes but got {} market caps",
            network.n(),
            market_caps.len()
        )));
    }
    if let Some(idx) = market_caps.iter().position(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::validation(format!(
            "market_cap of bank {idx} must be positive, got {}",
            market_caps[idx]
        )));
    }
    let entries = network
        .weights()
        .filter(|&(_, _, w)| w > 0.0)
        .map(|(lender, borrower, w)| (borrower, lender, (w / market_caps[lender]).min(1.0)));
    ImpactMatrix::from_entries(network.n(), entries)
}

/// Runs the chosen algorithm once per node with a unit default on it and
/// ranks the nodes by impact fraction, descending; ties break by ascending
/// node id.
pub fn systemic_ranking(
    matrix: &ImpactMatrix,
    values: &[f64],
    algorithm: Algorithm,
) -> Result<Vec<(usize, f64)>> {
    let n = matrix.n();
    let mut ranking: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|node| {
            let shock = ShockVector::single_default(n, node)?;
            let result = match algorithm {
                Algorithm::DebtRank => debtrank(matrix, &shock, values)?,
                Algorithm::Cascade => default_cascade(matrix, &shock, values)?,
            };
            Ok((node, result.impact_fraction))
        })
        .collect::<Result<_>>()?;
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ranking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance_sheets::{BankPopulation, BankRecord};
    use crate::weights::{WeightEntry, WeightedNetwork};

    fn matrix_3chain() -> ImpactMatrix {
        // node 0's default hits node 1 at 0.5; node 1's hits node 2 at 0.4
        ImpactMatrix::from_entries(3, [(0, 1, 0.5), (1, 2, 0.4)]).unwrap()
    }

    #[test]
    fn zero_shock_is_a_no_op() {
        let m = matrix_3chain();
        let r = debtrank(&m, &ShockVector::zeros(3), &[10.0, 10.0, 10.0]).unwrap();
        assert_eq!(r.impact_currency, 0.0);
        assert_eq!(r.steps, 1);
        assert_eq!(r.final_h, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn chain_recursion_hand_unrolled() {
        // two propagation steps: h = (1, 0.5, 0.2), R = 0.5*10 + 0.2*10
        let m = matrix_3chain();
        let shock = ShockVector::single_default(3, 0).unwrap();
        let r = debtrank(&m, &shock, &[10.0, 10.0, 10.0]).unwrap();
        assert!((r.final_h[0] - 1.0).abs() < 1e-12);
        assert!((r.final_h[1] - 0.5).abs() < 1e-12);
        assert!((r.final_h[2] - 0.2).abs() < 1e-12);
        assert!((r.impact_currency - 7.0).abs() < 1e-12);
        assert!((r.impact_fraction - 7.0 / 30.0).abs() < 1e-12);
        assert_eq!(r.defaulted, vec![0]);
    }

    #[test]
    fn shocked_sink_yields_zero_impact() {
        // the difference form subtracts the initial shock
        let m = ImpactMatrix::from_entries(2, [(1, 0, 0.8)]).unwrap();
        let shock = ShockVector::new(vec![1.0, 0.0]).unwrap();
        let r = debtrank(&m, &shock, &[5.0, 5.0]).unwrap();
        assert_eq!(r.impact_currency, 0.0);
    }

    #[test]
    fn partial_shock_on_sink_yields_zero_impact() {
        let m = ImpactMatrix::from_entries(2, [(1, 0, 0.8)]).unwrap();
        let shock = ShockVector::new(vec![0.7, 0.0]).unwrap();
        let r = debtrank(&m, &shock, &[5.0, 5.0]).unwrap();
        assert_eq!(r.impact_currency, 0.0);
    }

    #[test]
    fn cascade_star_stops_without_defaults() {
        let entries = (1..5).map(|leaf| (0usize, leaf, 0.3));
        let m = ImpactMatrix::from_entries(5, entries).unwrap();
        let shock = ShockVector::single_default(5, 0).unwrap();
        let values = [10.0, 10.0, 10.0, 10.0, 10.0];
        let r = default_cascade(&m, &shock, &values).unwrap();
        for leaf in 1..5 {
            assert!((r.final_h[leaf] - 0.3).abs() < 1e-12);
        }
        assert_eq!(r.defaulted, vec![0]);
        assert_eq!(r.steps, 2);
        assert!((r.impact_currency - 0.3 * 40.0).abs() < 1e-12);
    }

    #[test]
    fn cascade_unit_chain_defaults_transitively() {
        let m = ImpactMatrix::from_entries(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let shock = ShockVector::single_default(4, 0).unwrap();
        let values = [1.0, 2.0, 3.0, 4.0];
        let r = default_cascade(&m, &shock, &values).unwrap();
        assert_eq!(r.defaulted, vec![0, 1, 2, 3]);
        assert!((r.impact_currency - (2.0 + 3.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn cascade_rejects_fractional_shocks() {
        let m = matrix_3chain();
        let shock = ShockVector::new(vec![0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            default_cascade(&m, &shock, &[1.0, 1.0, 1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn shock_vector_rejects_out_of_range() {
        assert!(matches!(
            ShockVector::new(vec![0.5, 1.5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            ShockVector::new(vec![-0.1]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn impact_matrix_from_network() {
        let banks = vec![
            BankRecord {
                id: 0,
                name: None,
                total_assets: 100.0,
                market_cap: 10.0,
                interbank_assets: 50.0,
                interbank_liabilities: 0.0,
            },
            BankRecord {
                id: 1,
                name: None,
                total_assets: 100.0,
                market_cap: 1.0,
                interbank_assets: 0.0,
                interbank_liabilities: 50.0,
            },
        ];
        let pop = BankPopulation::new(banks, "t").unwrap();
        // bank 0 lends 2.0 to bank 1: W[1][0] = min(1, 2.0 / 10.0) = 0.2
        let net = WeightedNetwork::from_entries(
            2,
            0.01,
            vec![WeightEntry { src: 0, dst: 1, units: 200 }],
        )
        .unwrap();
        let m = build_impact_matrix(&net, &pop).unwrap();
        assert!((m.entry(1, 0) - 0.2).abs() < 1e-12);
        assert_eq!(m.entry(0, 1), 0.0);
    }

    #[test]
    fn impact_entries_cap_at_one() {
        let banks = vec![
            BankRecord {
                id: 0,
                name: None,
                total_assets: 100.0,
                market_cap: 1.0,
                interbank_assets: 50.0,
                interbank_liabilities: 0.0,
            },
            BankRecord {
                id: 1,
                name: None,
                total_assets: 100.0,
                market_cap: 1.0,
                interbank_assets: 0.0,
                interbank_liabilities: 50.0,
            },
        ];
        let pop = BankPopulation::new(banks, "t").unwrap();
        // exposure 3.0 against capital 1.0 clamps to 1
        let net = WeightedNetwork::from_entries(
            2,
            0.01,
            vec![WeightEntry { src: 0, dst: 1, units: 300 }],
        )
        .unwrap();
        let m = build_impact_matrix(&net, &pop).unwrap();
        assert_eq!(m.entry(1, 0), 1.0);
    }

    #[test]
    fn zero_market_cap_rejected() {
        let net = WeightedNetwork::from_entries(
            2,
            0.01,
            vec![WeightEntry { src: 0, dst: 1, units: 1 }],
        )
        .unwrap();
        assert!(matches!(
            build_impact_matrix_with_caps(&net, &[0.0, 1.0]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn ranking_breaks_ties_by_id() {
        let m = ImpactMatrix::from_entries(2, [(0, 1, 0.4), (1, 0, 0.4)]).unwrap();
        let ranking = systemic_ranking(&m, &[10.0, 10.0], Algorithm::DebtRank).unwrap();
        assert_eq!(ranking[0].0, 0);
        assert_eq!(ranking[1].0, 1);
        assert!((ranking[0].1 - ranking[1].1).abs() < 1e-15);
    }

    #[test]
    fn empty_matrix_ranks_everything_at_zero() {
        let m = ImpactMatrix::from_entries(4, []).unwrap();
        let ranking = systemic_ranking(&m, &[1.0, 1.0, 1.0, 1.0], Algorithm::Cascade).unwrap();
        assert!(ranking.iter().all(|&(_, r)| r == 0.0));
        assert_eq!(ranking.iter().map(|&(n, _)| n).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn ranking_matches_per_node_runs() {
        // 5-node network, fixed entries
        let entries = [
            (0, 1, 0.5),
            (0, 2, 0.3),
            (1, 3, 0.9),
            (2, 4, 0.2),
            (3, 0, 0.1),
            (4, 1, 0.7),
        ];
        let m = ImpactMatrix::from_entries(5, entries).unwrap();
        let values = [3.0, 1.0, 4.0, 1.0, 5.0];
        let ranking = systemic_ranking(&m, &values, Algorithm::DebtRank).unwrap();
        // brute-force loop over per-node runs
        let mut expected: Vec<(usize, f64)> = (0..5)
            .map(|node| {
                let shock = ShockVector::single_default(5, node).unwrap();
                let r = debtrank(&m, &shock, &values).unwrap();
                (node, r.impact_fraction)
            })
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        assert_eq!(ranking, expected);
    }

    #[test]
    fn steps_stay_within_bound() {
        let m = ImpactMatrix::from_entries(4, [(0, 1, 0.5), (1, 2, 0.5), (2, 3, 0.5)]).unwrap();
        let shock = ShockVector::single_default(4, 0).unwrap();
        let r = debtrank(&m, &shock, &[1.0; 4]).unwrap();
        assert!(r.steps <= 5);
    }

    #[test]
    fn result_serializes_to_json() {
        let m = matrix_3chain();
        let shock = ShockVector::single_default(3, 0).unwrap();
        let r = debtrank(&m, &shock, &[10.0, 10.0, 10.0]).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: ContagionResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(json.contains("\"impact_fraction\""));
    }
}
