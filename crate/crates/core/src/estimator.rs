//! Contract amount estimation from descriptions: exact cosine kNN over
//! embedding vectors, a median-of-neighbours predictor and an evaluation
//! harness against a constant median baseline.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::ContractRecord;

pub const MIN_DIMENSION: usize = 16;
pub const DEFAULT_DIMENSION: usize = 256;
pub const DEFAULT_K: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("embedding dimension must be at least {MIN_DIMENSION}, got {0}")]
    DimensionTooSmall(usize),
    #[error("text must have at least 3 characters after trimming: {0:?}")]
    TextTooShort(String),
    #[error("vector has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector values must be finite")]
    NonFinite,
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("duplicate record id {0}")]
    DuplicateRecord(String),
    #[error("vector file errors: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    VectorFile(Vec<LineError>),
    #[error("no vector for record {0}")]
    MissingVector(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidSplit(f64),
    #[error("evaluation needs at least 10 records, got {0}")]
    TooFewRecords(usize),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EstimatorError> {
        if values.is_empty() {
            return Err(EstimatorError::DimensionMismatch { expected: 1, found: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, EstimatorError> {
        EmbeddingVector::new(self.values.iter().map(|v| v * factor).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity. The index computes exactly this expression, so a
/// full scan with this function reproduces its ranking bit for bit.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

pub trait Embedder {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EstimatorError>;
}

/// Hashed bag of character 3-grams over the lowercased text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramEmbedder {
    dimension: usize,
    seed: u64,
}

impl NgramEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self, EstimatorError> {
        if dimension < MIN_DIMENSION {
            return Err(EstimatorError::DimensionTooSmall(dimension));
        }
        Ok(NgramEmbedder { dimension, seed })
    }
}

impl Default for NgramEmbedder {
    fn default() -> Self {
        NgramEmbedder {
            dimension: DEFAULT_DIMENSION,
            seed: 0,
        }
    }
}

impl Embedder for NgramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EstimatorError> {
        embed_ngram(text, self.dimension, self.seed)
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Raw 3-gram bucket counts, before normalization.
pub fn ngram_counts(text: &str, dimension: usize, seed: u64) -> Result<Vec<f64>, EstimatorError> {
    if dimension < MIN_DIMENSION {
        return Err(EstimatorError::DimensionTooSmall(dimension));
    }
    let chars: Vec<char> = text.trim().to_lowercase().chars().collect();
    if chars.len() < 3 {
        return Err(EstimatorError::TextTooShort(text.to_string()));
    }
    let mut counts = vec![0.0; dimension];
    let mut buf = String::new();
    for gram in chars.windows(3) {
        buf.clear();
        buf.extend(gram);
        counts[(fnv1a(seed, buf.as_bytes()) % dimension as u64) as usize] += 1.0;
    }
    Ok(counts)
}

pub fn embed_ngram(text: &str, dimension: usize, seed: u64) -> Result<EmbeddingVector, EstimatorError> {
    let mut values = ngram_counts(text, dimension, seed)?;
    let n = norm(&values);
    values.iter_mut().for_each(|v| *v /= n);
    EmbeddingVector::new(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub record_id: String,
    pub vector: EmbeddingVector,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<IndexEntry>,
    norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub record_id: String,
    pub similarity: f64,
    pub amount: u64,
}

impl VectorIndex {
    pub fn build(dimension: usize, entries: Vec<IndexEntry>) -> Result<Self, EstimatorError> {
        let mut seen = HashSet::new();
        let mut norms = Vec::with_capacity(entries.len());
        for entry in &entries {
            if entry.vector.dimension() != dimension {
                return Err(EstimatorError::DimensionMismatch {
                    expected: dimension,
                    found: entry.vector.dimension(),
                });
            }
            if !seen.insert(entry.record_id.as_str()) {
                return Err(EstimatorError::DuplicateRecord(entry.record_id.clone()));
            }
            let n = entry.vector.norm();
            if n == 0.0 {
                return Err(EstimatorError::ZeroNorm);
            }
            norms.push(n);
        }
        Ok(VectorIndex {
            dimension,
            entries,
            norms,
        })
    }

    /// Embeds every record's description.
    pub fn from_records(records: &[ContractRecord], embedder: &dyn Embedder) -> Result<Self, EstimatorError> {
        let entries = records
            .iter()
            .map(|r| {
                Ok(IndexEntry {
                    record_id: r.record_id.clone(),
                    vector: embedder.embed(&r.subject)?,
                    amount: r.amount,
                })
            })
            .collect::<Result<Vec<_>, EstimatorError>>()?;
        VectorIndex::build(embedder.dimension(), entries)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, record_id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.record_id == record_id)
    }

    /// Exact top-`k` by cosine similarity, descending; equal similarities
    /// are ordered by ascending record id.
    pub fn knn(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>, EstimatorError> {
        if k == 0 {
            return Err(EstimatorError::InvalidK);
        }
        if self.entries.is_empty() {
            return Err(EstimatorError::EmptyIndex);
        }
        if query.dimension() != self.dimension {
            return Err(EstimatorError::DimensionMismatch {
                expected: self.dimension,
                found: query.dimension(),
            });
        }
        let qnorm = query.norm();
        if qnorm == 0.0 {
            return Err(EstimatorError::ZeroNorm);
        }
        let mut scored: Vec<(f64, usize)> = self
            .entries
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (e, n))| (dot(query.values(), e.vector.values()) / (qnorm * n), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            b.0.total_cmp(&a.0)
                .then_with(|| self.entries[a.1].record_id.cmp(&self.entries[b.1].record_id))
        };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        Ok(scored
            .into_iter()
            .map(|(similarity, i)| Neighbor {
                record_id: self.entries[i].record_id.clone(),
                similarity,
                amount: self.entries[i].amount,
            })
            .collect())
    }
}

/// Parses the vector file format: the first line is the dimension, every
/// further non-blank line is `record_id<TAB>v1 v2 ... vD`. Amounts come
/// from `amounts`. All line errors are collected.
pub fn parse_vectors(text: &str, amounts: &HashMap<String, u64>) -> Result<VectorIndex, EstimatorError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    let dimension: usize = header.parse().map_err(|_| {
        EstimatorError::VectorFile(vec![LineError {
            line: 1,
            message: format!("expected the dimension, found {header:?}"),
        }])
    })?;
    if dimension == 0 {
        return Err(EstimatorError::VectorFile(vec![LineError {
            line: 1,
            message: "dimension must be positive".into(),
        }]));
    }
    let mut errors = Vec::new();
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fail = |message: String| errors.push(LineError { line: line_no, message });
        let Some((id, rest)) = line.split_once('\t') else {
            fail("expected `record_id<TAB>values`".into());
            continue;
        };
        let values: Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse::<f64>).collect();
        let Ok(values) = values else {
            fail("malformed number".into());
            continue;
        };
        if values.len() != dimension {
            fail(format!("dimension mismatch: expected {dimension} values, found {}", values.len()));
            continue;
        }
        let Some(&amount) = amounts.get(id) else {
            fail(format!("unknown record id {id}"));
            continue;
        };
        if !seen.insert(id.to_string()) {
            fail(format!("duplicate record id {id}"));
            continue;
        }
        match EmbeddingVector::new(values) {
            Ok(v) if v.norm() == 0.0 => fail("zero-norm vector".into()),
            Ok(vector) => entries.push(IndexEntry {
                record_id: id.to_string(),
                vector,
                amount,
            }),
            Err(e) => fail(e.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(EstimatorError::VectorFile(errors));
    }
    VectorIndex::build(dimension, entries)
}

pub fn load_vectors(path: &Path, amounts: &HashMap<String, u64>) -> Result<VectorIndex, EstimatorError> {
    let text = std::fs::read_to_string(path).map_err(|e| EstimatorError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_vectors(&text, amounts)
}

/// Median in whole denars; an even count averages the two middle values,
/// rounding halves up.
pub fn median_amount(amounts: &[u64]) -> Option<u64> {
    if amounts.is_empty() {
        return None;
    }
    let mut sorted = amounts.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] as u128 + sorted[mid] as u128).div_ceil(2) as u64
    })
}

pub fn predict_from_vector(index: &VectorIndex, query: &EmbeddingVector, k: usize) -> Result<u64, EstimatorError> {
    let neighbors = index.knn(query, k)?;
    let amounts: Vec<u64> = neighbors.iter().map(|n| n.amount).collect();
    median_amount(&amounts).ok_or(EstimatorError::EmptyIndex)
}

pub fn predict_amount(
    description: &str,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<u64, EstimatorError> {
    predict_from_vector(index, &embedder.embed(description)?, k)
}

/// Constant predictor returning the training median.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineMedian {
    pub value: u64,
}

impl BaselineMedian {
    pub fn predict(&self) -> u64 {
        self.value
    }
}

pub fn baseline_median(train: &[u64]) -> Result<BaselineMedian, EstimatorError> {
    median_amount(train)
        .map(|value| BaselineMedian { value })
        .ok_or(EstimatorError::EmptyIndex)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when every truth value is equal.
    pub r2: Option<f64>,
    pub n: usize,
}

/// RMSE, MAE and R² with the test-set mean as reference.
pub fn compute_metrics(truth: &[f64], predicted: &[f64]) -> Metrics {
    assert_eq!(truth.len(), predicted.len(), "truth and predictions differ in length");
    let n = truth.len();
    if n == 0 {
        return Metrics {
            rmse: 0.0,
            mae: 0.0,
            r2: None,
            n,
        };
    }
    let nf = n as f64;
    let sse: f64 = truth.iter().zip(predicted).map(|(y, p)| (p - y).powi(2)).sum();
    let sae: f64 = truth.iter().zip(predicted).map(|(y, p)| (p - y).abs()).sum();
    let mean = truth.iter().sum::<f64>() / nf;
    let sst: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    Metrics {
        rmse: (sse / nf).sqrt(),
        mae: sae / nf,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub knn: Metrics,
    pub baseline: Metrics,
    pub train: usize,
    pub test: usize,
}

const MILLION: f64 = 1_000_000.0;

/// Deterministic train/test split: records are ordered by id, shuffled
/// with a ChaCha8 generator seeded by `seed`, and the first
/// `round(n * split)` (at least 1, at most n − 1) become the training set.
pub fn split_records(
    records: &[ContractRecord],
    split: f64,
    seed: u64,
) -> Result<(Vec<ContractRecord>, Vec<ContractRecord>), EstimatorError> {
    if !(split > 0.0 && split < 1.0) {
        return Err(EstimatorError::InvalidSplit(split));
    }
    if records.len() < 10 {
        return Err(EstimatorError::TooFewRecords(records.len()));
    }
    let mut shuffled = records.to_vec();
    shuffled.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let train = ((n as f64 * split).round() as usize).clamp(1, n - 1);
    let test = shuffled.split_off(train);
    Ok((shuffled, test))
}

/// Evaluates kNN against the median baseline on the same held-out rows.
/// Metrics are in millions of denars.
pub fn evaluate_estimator(
    records: &[ContractRecord],
    split: f64,
    seed: u64,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Evaluation, EstimatorError> {
    evaluate_with(records, split, seed, k, embedder.dimension(), |r| embedder.embed(&r.subject))
}

/// Like [`evaluate_estimator`] with vectors supplied by the caller, for
/// example from a precomputed vector file.
pub fn evaluate_with(
    records: &[ContractRecord],
    split: f64,
    seed: u64,
    k: usize,
    dimension: usize,
    vector_of: impl Fn(&ContractRecord) -> Result<EmbeddingVector, EstimatorError>,
) -> Result<Evaluation, EstimatorError> {
    if k == 0 {
        return Err(EstimatorError::InvalidK);
    }
    let (train, test) = split_records(records, split, seed)?;
    let entries = train
        .iter()
        .map(|r| {
            Ok(IndexEntry {
                record_id: r.record_id.clone(),
                vector: vector_of(r)?,
                amount: r.amount,
            })
        })
        .collect::<Result<Vec<_>, EstimatorError>>()?;
    let index = VectorIndex::build(dimension, entries)?;
    let baseline = baseline_median(&train.iter().map(|r| r.amount).collect::<Vec<_>>())?;

    let mut truth = Vec::with_capacity(test.len());
    let mut knn_pred = Vec::with_capacity(test.len());
    for r in &test {
        truth.push(r.amount as f64 / MILLION);
        knn_pred.push(predict_from_vector(&index, &vector_of(r)?, k)? as f64 / MILLION);
    }
    let base_pred = vec![baseline.predict() as f64 / MILLION; test.len()];
    Ok(Evaluation {
        knn: compute_metrics(&truth, &knn_pred),
        baseline: compute_metrics(&truth, &base_pred),
        train: train.len(),
        test: test.len(),
    })
}
