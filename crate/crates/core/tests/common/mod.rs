//! Synthetic fixtures shared by the integration tests.

#![allow(dead_code)]

pub mod query_oracle;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use procurekg::ingest::{ContractRecord, RecordTable};
use procurekg::mapping::{execute_mapping, MappingOptions, MappingSpec, Vocabulary, DEFAULT_BASE_IRI};
use procurekg::rdf::Graph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub struct FixtureShape {
    pub contracts: usize,
    pub institutions: usize,
    pub suppliers: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Amounts are drawn from `1..=max_amount`; small values force ties.
    pub max_amount: u64,
}

impl Default for FixtureShape {
    fn default() -> Self {
        FixtureShape {
            contracts: 50,
            institutions: 8,
            suppliers: 20,
            first_year: 2016,
            last_year: 2021,
            max_amount: 5_000_000,
        }
    }
}

/// Random contracts in which every institution and supplier occurs at
/// least once (requires contracts ≥ max(institutions, suppliers)).
pub fn synthetic_records(shape: &FixtureShape, seed: u64) -> Vec<ContractRecord> {
    assert!(shape.contracts >= shape.institutions.max(shape.suppliers));
    let mut rng = rng(seed);
    let mut inst: Vec<usize> = (0..shape.contracts).map(|i| i % shape.institutions).collect();
    let mut supp: Vec<usize> = (0..shape.contracts).map(|i| i % shape.suppliers).collect();
    for i in shape.institutions.max(shape.suppliers)..shape.contracts {
        inst[i] = rng.gen_range(0..shape.institutions);
        supp[i] = rng.gen_range(0..shape.suppliers);
    }
    inst.shuffle(&mut rng);
    supp.shuffle(&mut rng);
    (0..shape.contracts)
        .map(|i| {
            let year = rng.gen_range(shape.first_year..=shape.last_year);
            let month = rng.gen_range(1..=12);
            let day = if month == 12 { rng.gen_range(1..=31) } else { rng.gen_range(1..=28) };
            ContractRecord {
                record_id: format!("fx-{i:04}"),
                authority: format!("Institution {:02}", inst[i]),
                subject: format!("Purchase of goods lot {i}"),
                supplier: format!("Supplier {:02}", supp[i]),
                date: date(year, month, day),
                amount: rng.gen_range(1..=shape.max_amount),
            }
        })
        .collect()
}

pub fn records_graph(records: &[ContractRecord]) -> (Graph, Vocabulary) {
    let spec = MappingSpec::standard(DEFAULT_BASE_IRI).unwrap();
    let out = execute_mapping(&RecordTable::from_records(records), &spec, MappingOptions::default()).unwrap();
    assert!(out.row_errors.is_empty(), "{:?}", out.row_errors);
    (out.graph, spec.vocabulary())
}

const CLUSTERS: [(&[&str], u64); 5] = [
    (&["road", "asphalt", "paving", "street", "bridge", "highway"], 60_000_000),
    (&["office", "paper", "toner", "printer", "stationery", "folders"], 400_000),
    (&["medical", "hospital", "scanner", "surgical", "diagnostic", "clinic"], 25_000_000),
    (&["school", "furniture", "desks", "chairs", "classroom", "cabinets"], 3_000_000),
    (&["software", "licenses", "servers", "network", "database", "hosting"], 12_000_000),
];

const FILLER: [&str; 6] = ["supply", "procurement", "services", "delivery", "maintenance", "purchase"];

/// Descriptions drawn from five topic vocabularies, with amounts that
/// depend on the topic.
pub fn clustered_corpus(n: usize, seed: u64) -> Vec<ContractRecord> {
    let mut rng = rng(seed);
    (0..n)
        .map(|i| {
            let (words, base) = CLUSTERS[i % CLUSTERS.len()];
            let mut picked: Vec<&str> = words.choose_multiple(&mut rng, 3).copied().collect();
            picked.insert(rng.gen_range(0..=picked.len()), FILLER.choose(&mut rng).unwrap());
            let factor = rng.gen_range(0.4..1.6);
            ContractRecord {
                record_id: format!("cl-{i:05}"),
                authority: format!("Institution {}", i % 7),
                subject: picked.join(" "),
                supplier: format!("Supplier {}", i % 11),
                date: date(2021, 1 + (i % 12) as u32, 1),
                amount: ((base as f64) * factor).round() as u64,
            }
        })
        .collect()
}
