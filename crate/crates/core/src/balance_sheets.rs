//! Bank balance-sheet data model: CSV ingestion and a synthetic
//! power-law population generator.
//!
//! All currency figures are millions of USD.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expected CSV header, in order.
pub const CSV_HEADER: [&str; 6] = [
    "id",
    "name",
    "total_assets",
    "market_cap",
    "interbank_assets",
    "interbank_liabilities",
];

/// One institution's balance-sheet attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRecord {
    /// Dense 0-based index; doubles as the node id in sampled networks.
    pub id: usize,
    pub name: Option<String>,
    pub total_assets: f64,
    /// Market capitalisation; the capital buffer and economic value at stake.
    pub market_cap: f64,
    /// Total lending to other banks; caps the bank's outgoing weights.
    pub interbank_assets: f64,
    /// Total borrowing from other banks; caps the bank's incoming weights.
    pub interbank_liabilities: f64,
}

impl BankRecord {
    fn check(&self) -> std::result::Result<(), String> {
        let finite = self.total_assets.is_finite()
            && self.market_cap.is_finite()
            && self.interbank_assets.is_finite()
            && self.interbank_liabilities.is_finite();
        if !finite {
            return Err("balance-sheet fields must be finite".into());
        }
        if self.total_assets <= 0.0 {
            return Err(format!("total_assets must be positive, got {}", self.total_assets));
        }
        if self.market_cap <= 0.0 {
            return Err(format!("market_cap must be positive, got {}", self.market_cap));
        }
        if self.interbank_assets < 0.0 || self.interbank_assets > self.total_assets {
            return Err(format!(
                "interbank_assets must lie in [0, total_assets], got {} vs {}",
                self.interbank_assets, self.total_assets
            ));
        }
        if self.interbank_liabilities < 0.0 {
            return Err(format!(
                "interbank_liabilities must be non-negative, got {}",
                self.interbank_liabilities
            ));
        }
        Ok(())
    }

    /// Validates the per-bank invariants.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(Error::validation)
    }
}

/// A validated, id-contiguous set of banks.
#[derive(Debug, Clone, PartialEq)]
pub struct BankPopulation {
    pub banks: Vec<BankRecord>,
    pub label: String,
}

impl BankPopulation {
    /// Builds a population, enforcing non-emptiness, dense ids, and all
    /// per-bank invariants.
    pub fn new(banks: Vec<BankRecord>, label: impl Into<String>) -> Result<Self> {
        if banks.is_empty() {
            return Err(Error::validation("population must not be empty"));
        }
        for (idx, bank) in banks.iter().enumerate() {
            if bank.id != idx {
                return Err(Error::schema(format!(
                    "bank ids must be contiguous 0..{}, found id {} at position {}",
                    banks.len() - 1,
                    bank.id,
                    idx
                )));
            }
            bank.validate()?;
        }
        Ok(Self {
            banks,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.banks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks.is_empty()
    }

    /// Total assets per bank, in id order; the fitness proxy for link estimation.
    pub fn total_assets(&self) -> Vec<f64> {
        self.banks.iter().map(|b| b.total_assets).collect()
    }

    /// Market capitalisation per bank, in id order.
    pub fn market_caps(&self) -> Vec<f64> {
        self.banks.iter().map(|b| b.market_cap).collect()
    }

    /// Copy of the population with market caps replaced (used for decayed
    /// snapshots); all other fields are untouched.
    pub fn with_market_caps(&self, caps: &[f64]) -> Result<Self> {
        if caps.len() != self.len() {
            return Err(Error::config(format!(
                "expected {} market caps, got {}",
                self.len(),
                caps.len()
            )));
        }
        let banks = self
            .banks
            .iter()
            .zip(caps)
            .map(|(b, &cap)| BankRecord {
                market_cap: cap,
                ..b.clone()
            })
            .collect();
        BankPopulation::new(banks, self.label.clone())
    }

    /// Ids of the `k` largest banks by total assets, descending; ties break
    /// by ascending id.
    pub fn top_k_by_assets(&self, k: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.len()).collect();
        ids.sort_by(|&a, &b| {
            self.banks[b]
                .total_assets
                .partial_cmp(&self.banks[a].total_assets)
                .unwrap()
                .then(a.cmp(&b))
        });
        ids.truncate(k);
        ids
    }
}

/// Parameters for the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Pareto tail exponent of the total-assets draw.
    pub pareto_shape: f64,
    /// Pareto scale: the minimum total-assets value.
    pub pareto_scale: f64,
    /// Uniform range for market_cap / total_assets.
    pub cap_fraction: (f64, f64),
    /// Uniform range for interbank_assets / total_assets.
    pub ib_asset_fraction: (f64, f64),
    /// Uniform range for interbank_liabilities / total_assets.
    pub ib_liab_fraction: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            pareto_shape: 2.0,
            pareto_scale: 100.0,
            cap_fraction: (0.05, 0.20),
            ib_asset_fraction: (0.05, 0.30),
            ib_liab_fraction: (0.05, 0.30),
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if !(self.pareto_shape > 0.0) || !(self.pareto_scale > 0.0) {
            return Err(Error::config(
                "pareto shape and scale must be positive".to_string(),
            ));
        }
        for (name, (lo, hi)) in [
            ("cap_fraction", self.cap_fraction),
            ("ib_asset_fraction", self.ib_asset_fraction),
            ("ib_liab_fraction", self.ib_liab_fraction),
        ] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(Error::config(format!(
                    "{name} range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
                )));
            }
        }
        // interbank assets may not exceed total assets
        if self.ib_asset_fraction.1 > 1.0 {
            return Err(Error::config(
                "ib_asset_fraction upper bound must be <= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Draws a synthetic population with Pareto-distributed total assets and
/// uniformly drawn balance-sheet fractions. Pure in `(n, seed, params)`.
pub fn generate_synthetic_population(
    n: usize,
    seed: u64,
    params: &SynthParams,
) -> Result<BankPopulation> {
    if n < 2 {
        return Err(Error::config(format!("need at least 2 banks, got {n}")));
    }
    params.validate()?;

    let pareto = Pareto::new(params.pareto_scale, params.pareto_shape)
        .map_err(|e| Error::config(format!("pareto parameters: {e}")))?;
    let uniform = |range: (f64, f64)| {
        Uniform::new_inclusive(range.0, range.1)
            .map_err(|e| Error::config(format!("uniform range: {e}")))
    };
    let cap_frac = uniform(params.cap_fraction)?;
    let ib_asset_frac = uniform(params.ib_asset_fraction)?;
    let ib_liab_frac = uniform(params.ib_liab_fraction)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let banks = (0..n)
        .map(|id| {
            let total_assets: f64 = pareto.sample(&mut rng);
            BankRecord {
                id,
                name: Some(format!("bank_{id:03}")),
                total_assets,
                market_cap: cap_frac.sample(&mut rng) * total_assets,
                interbank_assets: ib_asset_frac.sample(&mut rng) * total_assets,
                interbank_liabilities: ib_liab_frac.sample(&mut rng) * total_assets,
            }
        })
        .collect();

    BankPopulation::new(banks, format!("synthetic-n{n}-seed{seed}"))
}

/// Loads a population from CSV. Row order defines the ids: the id column
/// must match the 0-based data-row index.
pub fn load_population(path: impl AsRef<Path>) -> Result<BankPopulation> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader
        .headers()
        .map_err(|e| Error::schema(format!("cannot read header: {e}")))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != CSV_HEADER {
        return Err(Error::schema(format!(
            "expected header {:?}, got {:?}",
            CSV_HEADER.join(","),
            got.join(",")
        )));
    }

    let mut banks = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1; // 1-based data row, matching error messages
        let record = record.map_err(|e| Error::parse(format!("row {row}: {e}")))?;
        if record.len() != CSV_HEADER.len() {
            return Err(Error::schema(format!(
                "row {row}: expected {} fields, got {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let id: usize = record[0]
            .parse()
            .map_err(|_| Error::parse(format!("row {row}: bad id {:?}", &record[0])))?;
        if id != idx {
            return Err(Error::schema(format!(
                "row {row}: ids must be unique and contiguous; expected {idx}, got {id}"
            )));
        }
        let name = if record[1].is_empty() {
            None
        } else {
            Some(record[1].to_string())
        };
        let number = |col: usize| -> Result<f64> {
            record[col].parse().map_err(|_| {
                Error::parse(format!(
                    "row {row}: bad {} {:?}",
                    CSV_HEADER[col], &record[col]
                ))
            })
        };
        let bank = BankRecord {
            id,
            name,
            total_assets: number(2)?,
            market_cap: number(3)?,
            interbank_assets: number(4)?,
            interbank_liabilities: number(5)?,
        };
        bank.check().map_err(|msg| Error::validation_at(row, msg))?;
        banks.push(bank);
    }

    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "population".to_string());
    BankPopulation::new(banks, label)
}

/// Writes a population in the `load_population` schema. Numbers use the
/// shortest round-trip representation, so save/load is lossless.
pub fn save_population(population: &BankPopulation, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(CSV_HEADER)?;
    for bank in &population.banks {
        writer.write_record([
            bank.id.to_string(),
            bank.name.clone().unwrap_or_default(),
            bank.total_assets.to_string(),
            bank.market_cap.to_string(),
            bank.interbank_assets.to_string(),
            bank.interbank_liabilities.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "id,name,total_assets,market_cap,interbank_assets,interbank_liabilities";

    #[test]
    fn loads_well_formed_file() {
        let f = write_temp(&format!(
            "{HEADER}\n0,alpha,100.0,10.0,5.0,4.0\n1,beta,200.0,20.0,10.0,8.0\n2,,50.0,5.0,2.5,2.0\n"
        ));
        let pop = load_population(f.path()).unwrap();
        assert_eq!(pop.len(), 3);
        assert_eq!(pop.banks[0].name.as_deref(), Some("alpha"));
        assert_eq!(pop.banks[2].name, None);
        assert_eq!(pop.banks[1].total_assets, 200.0);
    }

    #[test]
    fn zero_market_cap_reports_row() {
        let f = write_temp(&format!(
            "{HEADER}\n0,a,100.0,10.0,5.0,4.0\n1,b,200.0,0.0,10.0,8.0\n"
        ));
        match load_population(f.path()) {
            Err(Error::ValidationAt { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected row-2 validation error, got {other:?}"),
        }
    }

    #[test]
    fn interbank_assets_above_total_rejected() {
        let f = write_temp(&format!("{HEADER}\n0,a,100.0,10.0,150.0,4.0\n"));
        assert!(matches!(
            load_population(f.path()),
            Err(Error::ValidationAt { .. })
        ));
    }

    #[test]
    fn non_contiguous_ids_rejected() {
        let f = write_temp(&format!(
            "{HEADER}\n0,a,100.0,10.0,5.0,4.0\n2,b,200.0,20.0,10.0,8.0\n"
        ));
        assert!(matches!(load_population(f.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_temp(&format!(
            "{HEADER}\n0,a,100.0,10.0,5.0,4.0\n0,b,200.0,20.0,10.0,8.0\n"
        ));
        assert!(matches!(load_population(f.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn unparsable_number_is_parse_error() {
        let f = write_temp(&format!("{HEADER}\n0,a,abc,10.0,5.0,4.0\n"));
        assert!(matches!(load_population(f.path()), Err(Error::Parse(_))));
    }

    #[test]
    fn wrong_header_is_schema_error() {
        let f = write_temp("id,name,assets\n0,a,100.0\n");
        assert!(matches!(load_population(f.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn synthetic_population_holds_invariants() {
        let pop = generate_synthetic_population(227, 7, &SynthParams::default()).unwrap();
        assert_eq!(pop.len(), 227);
        for bank in &pop.banks {
            bank.validate().unwrap();
        }
    }

    #[test]
    fn synthetic_population_is_deterministic() {
        let params = SynthParams::default();
        let a = generate_synthetic_population(227, 7, &params).unwrap();
        let b = generate_synthetic_population(227, 7, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_population_varies_with_seed() {
        let params = SynthParams::default();
        let a = generate_synthetic_population(10, 1, &params).unwrap();
        let b = generate_synthetic_population(10, 2, &params).unwrap();
        assert_ne!(a.banks, b.banks);
    }

    #[test]
    fn singleton_population_rejected() {
        assert!(matches!(
            generate_synthetic_population(1, 7, &SynthParams::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn save_load_round_trip_is_lossless() {
        let pop = generate_synthetic_population(25, 11, &SynthParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("banks.csv");
        save_population(&pop, &path).unwrap();
        let loaded = load_population(&path).unwrap();
        assert_eq!(loaded.banks, pop.banks);
    }

    #[test]
    fn top_k_by_assets_sorts_descending() {
        let banks = vec![
            BankRecord {
                id: 0,
                name: None,
                total_assets: 100.0,
                market_cap: 10.0,
                interbank_assets: 1.0,
                interbank_liabilities: 1.0,
            },
            BankRecord {
                id: 1,
                name: None,
                total_assets: 300.0,
                market_cap: 10.0,
                interbank_assets: 1.0,
                interbank_liabilities: 1.0,
            },
            BankRecord {
                id: 2,
                name: None,
                total_assets: 200.0,
                market_cap: 10.0,
                interbank_assets: 1.0,
                interbank_liabilities: 1.0,
            },
        ];
        let pop = BankPopulation::new(banks, "t").unwrap();
        assert_eq!(pop.top_k_by_assets(2), vec![1, 2]);
    }
}
