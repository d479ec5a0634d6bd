mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::query_oracle;
use common::{date, records_graph, rng, synthetic_records, FixtureShape};
use procurekg::analytics::{above_average_contracts, canned_report, quarterly_stats, ReportParams};
use procurekg::estimator::{median_amount, EmbeddingVector, IndexEntry, VectorIndex};
use procurekg::ingest::{ContractRecord, RecordTable};
use procurekg::mapping::{execute_mapping, MappingOptions, MappingSpec, DEFAULT_BASE_IRI};
use procurekg::query::{evaluate, parse_query, Value};
use procurekg::rdf::{parse_ntriples, serialize_ntriples, Graph, Iri, Literal, Term, Triple, TriplePattern};

fn small_graph(seed: u64, size: usize) -> Graph {
    let mut rng = rng(seed);
    let mut graph = Graph::new();
    let iri = |i: usize| Iri::new(format!("https://example.org/n{i}")).unwrap();
    for _ in 0..size {
        let object: Term = if rng.gen_bool(0.5) {
            iri(rng.gen_range(0..8)).into()
        } else {
            Literal::integer(rng.gen_range(0..5)).into()
        };
        graph.insert(Triple::new(iri(rng.gen_range(0..8)), iri(rng.gen_range(0..4)), object));
    }
    graph
}

fn records(seed: u64, contracts: usize, max_amount: u64) -> Vec<ContractRecord> {
    let shape = FixtureShape {
        contracts,
        institutions: 4,
        suppliers: 5,
        first_year: 2017,
        last_year: 2021,
        max_amount,
    };
    synthetic_records(&shape, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_lookups_agree_with_full_scan(seed in any::<u64>(), size in 0usize..120, removals in 0usize..20) {
        let mut graph = small_graph(seed, size);
        let all: Vec<Triple> = graph.triples().collect();
        let mut r = rng(seed ^ 1);
        for _ in 0..removals.min(all.len()) {
            graph.remove(all.choose(&mut r).unwrap());
        }
        let remaining: Vec<Triple> = graph.triples().collect();
        prop_assert_eq!(remaining.len(), graph.len());
        let probe = all.first().cloned();
        for mask in 0u8..8 {
            let Some(t) = &probe else { break };
            let pattern = TriplePattern {
                subject: (mask & 1 != 0).then(|| Term::Iri(t.subject.clone())),
                predicate: (mask & 2 != 0).then(|| Term::Iri(t.predicate.clone())),
                object: (mask & 4 != 0).then(|| t.object.clone()),
            };
            let mut found = graph.match_pattern(&pattern);
            found.sort();
            let mut expected: Vec<Triple> = remaining
                .iter()
                .filter(|x| {
                    pattern.subject.as_ref().is_none_or(|s| *s == Term::Iri(x.subject.clone()))
                        && pattern.predicate.as_ref().is_none_or(|p| *p == Term::Iri(x.predicate.clone()))
                        && pattern.object.as_ref().is_none_or(|o| *o == x.object)
                })
                .cloned()
                .collect();
            expected.sort();
            prop_assert_eq!(found, expected);
        }
    }

    #[test]
    fn ntriples_round_trip_of_arbitrary_text(texts in prop::collection::vec(any::<String>(), 0..20)) {
        let mut graph = Graph::new();
        for (i, text) in texts.iter().enumerate() {
            graph.insert(Triple::new(
                Iri::new(format!("https://example.org/s{i}")).unwrap(),
                Iri::new("https://example.org/label").unwrap(),
                Literal::string(text.clone()),
            ));
        }
        let out = serialize_ntriples(&graph);
        let parsed = parse_ntriples(&out).unwrap();
        prop_assert!(parsed == graph);
        prop_assert_eq!(serialize_ntriples(&parsed), out);
    }

    #[test]
    fn pattern_order_does_not_change_results(seed in any::<u64>()) {
        let mut r = rng(seed);
        let graph = query_oracle::random_graph(&mut r);
        let spec = query_oracle::random_query(&mut r);
        let mut shuffled = spec.clone();
        shuffled.patterns.reverse();
        shuffled.patterns.shuffle(&mut r);
        let run = |s: &query_oracle::QuerySpec| {
            let plan = parse_query(&query_oracle::render(s, false)).unwrap();
            query_oracle::engine_cells(&evaluate(&graph, &plan).unwrap())
        };
        let (a, b) = (run(&spec), run(&shuffled));
        // ORDER BY breaks ties on the whole row, so ordered output must match exactly
        prop_assert!(query_oracle::same_results(a, b, spec.is_ordered(), 0.0));
    }

    #[test]
    fn aggregates_match_direct_computation(values in prop::collection::vec(-1_000_000i64..1_000_000, 0..60)) {
        let mut graph = Graph::new();
        let p = Iri::new("https://example.org/v").unwrap();
        for (i, v) in values.iter().enumerate() {
            graph.insert(Triple::new(Iri::new(format!("https://example.org/s{i}")).unwrap(), p.clone(), Literal::integer(*v)));
        }
        let plan = parse_query(
            "SELECT (COUNT(?v) AS ?n) (SUM(?v) AS ?s) (MIN(?v) AS ?lo) (MAX(?v) AS ?hi) (AVG(?v) AS ?m)
             WHERE { ?x <https://example.org/v> ?v }",
        ).unwrap();
        let table = evaluate(&graph, &plan).unwrap();
        let int = |name: &str| table.get(0, name).and_then(Value::as_f64).map(|x| x as i64);
        prop_assert_eq!(int("n"), Some(values.len() as i64));
        prop_assert_eq!(int("s"), Some(values.iter().sum::<i64>()));
        prop_assert_eq!(int("lo"), values.iter().min().copied());
        prop_assert_eq!(int("hi"), values.iter().max().copied());
        let mean = table.get(0, "m").and_then(Value::as_f64);
        match values.len() {
            0 => prop_assert!(mean.is_none()),
            n => {
                let expected = values.iter().sum::<i64>() as f64 / n as f64;
                prop_assert!((mean.unwrap() - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn knn_ranking_is_scale_invariant(seed in any::<u64>(), n in 1usize..300, k in 1usize..20, exp in -20i32..20) {
        let mut r = rng(seed);
        let entries: Vec<IndexEntry> = (0..n)
            .map(|i| IndexEntry {
                record_id: format!("e{i:04}"),
                vector: EmbeddingVector::new((0..16).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap(),
                amount: r.gen_range(1..1000),
            })
            .collect();
        let index = VectorIndex::build(16, entries).unwrap();
        let query = EmbeddingVector::new((0..16).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
        let base = index.knn(&query, k).unwrap();
        let scaled = index.knn(&query.scaled(2f64.powi(exp)).unwrap(), k).unwrap();
        let ids = |v: &[procurekg::estimator::Neighbor]| v.iter().map(|x| x.record_id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&base), ids(&scaled));
        let factor = r.gen_range(0.01..100.0);
        let other = index.knn(&query.scaled(factor).unwrap(), k).unwrap();
        for (a, b) in base.iter().zip(&other) {
            prop_assert!((a.similarity - b.similarity).abs() <= 1e-12);
        }
    }

    #[test]
    fn median_ignores_extreme_values(mut amounts in prop::collection::vec(1u64..1_000_000, 3..40), bump in 1u64..1_000_000_000) {
        let before = median_amount(&amounts);
        let max = amounts.iter().copied().max().unwrap();
        let position = amounts.iter().position(|&a| a == max).unwrap();
        amounts[position] = max + bump;
        prop_assert_eq!(median_amount(&amounts), before);
    }

    #[test]
    fn report_winners_survive_amount_scaling(seed in any::<u64>(), factor in 2u64..1000) {
        let base = records(seed, 30, 1_000);
        let scaled: Vec<ContractRecord> = base.iter().cloned().map(|mut r| { r.amount *= factor; r }).collect();
        let (g1, v1) = records_graph(&base);
        let (g2, v2) = records_graph(&scaled);
        let a = canned_report(&g1, &v1, &ReportParams::default()).unwrap();
        let b = canned_report(&g2, &v2, &ReportParams::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.entities, &y.entities, "{}", x.metric);
        }
    }

    #[test]
    fn above_average_is_a_strict_subset(seed in any::<u64>(), n in 5usize..60, max_amount in 1u64..50) {
        let rs = records(seed, n, max_amount);
        let (graph, vocab) = records_graph(&rs);
        let above = above_average_contracts(&graph, &vocab).unwrap();
        prop_assert!(above.len() < rs.len());
        let total: u64 = rs.iter().map(|r| r.amount).sum();
        for (_, amount) in &above {
            prop_assert!(*amount * rust_decimal::Decimal::from(rs.len()) > rust_decimal::Decimal::from(total));
        }
        let strictly_above = rs.iter().filter(|r| r.amount as u128 * rs.len() as u128 > total as u128).count();
        prop_assert_eq!(above.len(), strictly_above);
    }

    #[test]
    fn quarters_partition_the_window(seed in any::<u64>(), n in 5usize..80) {
        let rs = records(seed, n, 10_000_000);
        let (graph, vocab) = records_graph(&rs);
        let stats = quarterly_stats(&graph, &vocab, 100).unwrap();
        prop_assert_eq!(stats.iter().map(|s| s.count).sum::<usize>(), rs.len());
        let total: f64 = stats.iter().map(|s| s.total).sum();
        prop_assert_eq!(total, rs.iter().map(|r| r.amount).sum::<u64>() as f64);
        let mut keys: Vec<(i32, u32)> = stats.iter().map(|s| (s.year, s.quarter)).collect();
        let sorted = keys.clone();
        keys.dedup();
        prop_assert_eq!(keys, sorted);
    }

    #[test]
    fn mapping_ignores_row_order(seed in any::<u64>(), n in 5usize..60) {
        let mut rs = records(seed, n, 1_000_000);
        let spec = MappingSpec::standard(DEFAULT_BASE_IRI).unwrap();
        let map = |rs: &[ContractRecord]| {
            let out = execute_mapping(&RecordTable::from_records(rs), &spec, MappingOptions::default()).unwrap();
            serialize_ntriples(&out.graph)
        };
        let first = map(&rs);
        prop_assert_eq!(&first, &map(&rs));
        rs.shuffle(&mut rng(seed ^ 2));
        prop_assert_eq!(first, map(&rs));
    }
}

#[test]
fn quarter_boundaries() {
    let rs: Vec<ContractRecord> = [(3, 31), (4, 1), (6, 30), (7, 1), (9, 30), (10, 1), (12, 31)]
        .iter()
        .enumerate()
        .map(|(i, &(m, d))| ContractRecord {
            record_id: format!("b{i}"),
            authority: "A".into(),
            subject: "s".into(),
            supplier: "S".into(),
            date: date(2021, m, d),
            amount: 10,
        })
        .collect();
    let (graph, vocab) = records_graph(&rs);
    let stats = quarterly_stats(&graph, &vocab, 1).unwrap();
    let counts: BTreeMap<u32, usize> = stats.iter().map(|s| (s.quarter, s.count)).collect();
    assert_eq!(counts, BTreeMap::from([(1, 1), (2, 2), (3, 2), (4, 2)]));
}
