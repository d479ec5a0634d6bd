//! Reading, merging and normalizing periodic contract CSV exports.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{source_name}: missing header row")]
    MissingHeader { source_name: String },
    #[error("{source_name}: line {line}: expected {expected} cells, found {found}")]
    Ragged {
        source_name: String,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{source_name}: line {line}: {message}")]
    Csv {
        source_name: String,
        line: u64,
        message: String,
    },
    #[error("nothing to merge")]
    NoTables,
    #[error("no shared columns across tables: {}", describe_columns(.0))]
    EmptyIntersection(Vec<(String, Vec<String>)>),
    #[error("duplicate record id `{0}`")]
    DuplicateRecordId(String),
    #[error("missing canonical field: {0}")]
    MissingCanonicalField(CanonicalField),
    #[error("canonical field {field} matched by several columns: {}", .columns.join(", "))]
    AmbiguousField {
        field: CanonicalField,
        columns: Vec<String>,
    },
    #[error("unknown canonical field name `{0}` in alias map")]
    UnknownCanonical(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("cannot write table: {0}")]
    Write(String),
}

fn describe_columns(tables: &[(String, Vec<String>)]) -> String {
    tables
        .iter()
        .map(|(name, cols)| format!("{name} [{}]", cols.join(", ")))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AmountError {
    #[error("empty amount")]
    Empty,
    #[error("non-numeric amount `{0}`")]
    NonNumeric(String),
    #[error("amount `{0}` is not positive")]
    NonPositive(String),
    #[error("amount `{0}` is out of range")]
    Overflow(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DateError {
    #[error("unparseable date `{0}`")]
    Unparseable(String),
    #[error("impossible date `{0}`")]
    Impossible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanonicalField {
    Authority,
    Subject,
    Supplier,
    Date,
    Amount,
}

impl CanonicalField {
    pub const ALL: [CanonicalField; 5] = [
        CanonicalField::Authority,
        CanonicalField::Subject,
        CanonicalField::Supplier,
        CanonicalField::Date,
        CanonicalField::Amount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalField::Authority => "authority",
            CanonicalField::Subject => "subject",
            CanonicalField::Supplier => "supplier",
            CanonicalField::Date => "date",
            CanonicalField::Amount => "amount",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CanonicalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonicalField {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize_name(s);
        Self::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| IngestError::UnknownCanonical(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Utf8,
    Windows1251,
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "utf-8" | "utf8" => Ok(Encoding::Utf8),
            "windows-1251" | "cp1251" => Ok(Encoding::Windows1251),
            other => Err(format!("unsupported encoding `{other}`")),
        }
    }
}

/// Why a row cannot become a [`ContractRecord`]. Flagged rows are carried,
/// not dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowFlag {
    EmptyField(CanonicalField),
    BadAmount(AmountError),
    BadDate(DateError),
}

impl fmt::Display for RowFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowFlag::EmptyField(field) => write!(f, "empty {field}"),
            RowFlag::BadAmount(e) => e.fmt(f),
            RowFlag::BadDate(e) => e.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub record_id: String,
    /// File name the row was read from.
    pub source: String,
    pub cells: Vec<String>,
    pub flags: Vec<RowFlag>,
}

impl Row {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// A fully parsed, valid contract row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractRecord {
    pub record_id: String,
    pub authority: String,
    pub subject: String,
    pub supplier: String,
    pub date: NaiveDate,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecordTable {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl RecordTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        let norm = normalize_name(name);
        self.columns.iter().position(|c| normalize_name(c) == norm)
    }

    /// Cell lookup that also understands the `record_id` pseudo-column.
    pub fn cell<'a>(&'a self, row: &'a Row, column: &str) -> Option<&'a str> {
        if column == "record_id" {
            return Some(&row.record_id);
        }
        self.column_index(column).map(|i| row.cells[i].as_str())
    }

    pub fn is_canonical(&self) -> bool {
        self.columns.len() == CanonicalField::ALL.len()
            && self
                .columns
                .iter()
                .zip(CanonicalField::ALL)
                .all(|(c, f)| c == f.name())
    }

    /// Typed records for every unflagged row of a normalized table.
    pub fn records(&self) -> Vec<ContractRecord> {
        if !self.is_canonical() {
            return Vec::new();
        }
        self.rows
            .iter()
            .filter(|row| !row.is_flagged())
            .filter_map(|row| {
                let cell = |f: CanonicalField| row.cells[f.index()].as_str();
                Some(ContractRecord {
                    record_id: row.record_id.clone(),
                    authority: cell(CanonicalField::Authority).to_string(),
                    subject: cell(CanonicalField::Subject).to_string(),
                    supplier: cell(CanonicalField::Supplier).to_string(),
                    date: parse_date(cell(CanonicalField::Date)).ok()?,
                    amount: parse_amount(cell(CanonicalField::Amount)).ok()?,
                })
            })
            .collect()
    }

    pub fn flagged(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.is_flagged())
    }

    /// Writes the normalized table with its `record_id` and `source`
    /// provenance columns in front.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let werr = |e: csv::Error| IngestError::Write(e.to_string());
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["record_id".to_string(), "source".to_string()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header).map_err(werr)?;
        for row in &self.rows {
            let mut record = vec![row.record_id.as_str(), row.source.as_str()];
            record.extend(row.cells.iter().map(String::as_str));
            out.write_record(&record).map_err(werr)?;
        }
        out.flush().map_err(|e| IngestError::Write(e.to_string()))
    }

    /// Builds a normalized table from records; used for synthetic corpora.
    pub fn from_records(records: &[ContractRecord]) -> Self {
        let rows = records
            .iter()
            .map(|r| Row {
                record_id: r.record_id.clone(),
                source: String::new(),
                cells: vec![
                    r.authority.clone(),
                    r.subject.clone(),
                    r.supplier.clone(),
                    r.date.format("%Y-%m-%d").to_string(),
                    r.amount.to_string(),
                ],
                flags: Vec::new(),
            })
            .collect();
        RecordTable {
            columns: canonical_columns(),
            rows,
        }
    }
}

fn canonical_columns() -> Vec<String> {
    CanonicalField::ALL.iter().map(|f| f.name().to_string()).collect()
}

/// Trimmed, lowercased, with whitespace runs collapsed to one space.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn decode(bytes: &[u8], encoding: Encoding) -> String {
    match encoding {
        Encoding::Utf8 => encoding_rs::UTF_8.decode(bytes).0.into_owned(),
        Encoding::Windows1251 => encoding_rs::WINDOWS_1251.decode(bytes).0.into_owned(),
    }
}

pub fn read_csv(path: &Path, encoding: Encoding) -> Result<RecordTable, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&decode(&bytes, encoding), &stem, &file_name)
}

/// Parses CSV text; record ids are minted as `<stem>-<1-based row index>`.
pub fn parse_csv(text: &str, stem: &str, source_name: &str) -> Result<RecordTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(e, source_name))?;
    if header.is_empty() || header.iter().all(|h| h.trim().is_empty()) {
        return Err(IngestError::MissingHeader {
            source_name: source_name.to_string(),
        });
    }
    let columns: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(e, source_name))?;
        rows.push(Row {
            record_id: format!("{stem}-{}", idx + 1),
            source: source_name.to_string(),
            cells: record.iter().map(str::to_string).collect(),
            flags: Vec::new(),
        });
    }
    Ok(RecordTable { columns, rows })
}

fn csv_error(err: csv::Error, source_name: &str) -> IngestError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => IngestError::Ragged {
            source_name: source_name.to_string(),
            line,
            expected: *expected_len as usize,
            found: *len as usize,
        },
        _ => IngestError::Csv {
            source_name: source_name.to_string(),
            line,
            message: err.to_string(),
        },
    }
}

/// Concatenates tables over the columns they all share (matched on
/// normalized names); column spelling and order follow the first table.
pub fn merge_tables(tables: Vec<RecordTable>) -> Result<RecordTable, IngestError> {
    let first = tables.first().ok_or(IngestError::NoTables)?;
    let shared: Vec<String> = first
        .columns
        .iter()
        .filter(|c| tables.iter().all(|t| t.column_index(c).is_some()))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(IngestError::EmptyIntersection(
            tables
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let name = t
                        .rows
                        .first()
                        .map(|r| r.source.clone())
                        .unwrap_or_else(|| format!("table {}", i + 1));
                    (name, t.columns.clone())
                })
                .collect(),
        ));
    }

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for table in &tables {
        let indices: Vec<usize> = shared
            .iter()
            .map(|c| table.column_index(c).expect("shared column"))
            .collect();
        for row in &table.rows {
            if !seen.insert(row.record_id.clone()) {
                return Err(IngestError::DuplicateRecordId(row.record_id.clone()));
            }
            rows.push(Row {
                record_id: row.record_id.clone(),
                source: row.source.clone(),
                cells: indices.iter().map(|&i| row.cells[i].clone()).collect(),
                flags: row.flags.clone(),
            });
        }
    }
    Ok(RecordTable {
        columns: shared,
        rows,
    })
}

/// Case-insensitive glob match (`*` any run, `?` one character) on
/// normalized column names.
pub fn glob_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = normalize_name(pattern).chars().collect();
    let n: Vec<char> = normalize_name(name).chars().collect();
    let (mut pi, mut ni) = (0, 0);
    let mut backtrack: Option<(usize, usize)> = None;
    while ni < n.len() {
        match p.get(pi) {
            Some('*') => {
                backtrack = Some((pi, ni));
                pi += 1;
            }
            Some(&c) if c == '?' || c == n[ni] => {
                pi += 1;
                ni += 1;
            }
            _ => match backtrack {
                Some((bp, bn)) => {
                    pi = bp + 1;
                    ni = bn + 1;
                    backtrack = Some((bp, bn + 1));
                }
                None => return false,
            },
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

/// Maps source column names (any spelling) to canonical fields.
pub type AliasMap = BTreeMap<String, String>;

/// Drops columns matching `drop_patterns`, renames the rest onto the five
/// canonical fields and flags rows that cannot yield a valid record. Date
/// and amount cells that parse are rewritten into canonical form.
pub fn normalize(
    table: &RecordTable,
    drop_patterns: &[String],
    aliases: &AliasMap,
) -> Result<RecordTable, IngestError> {
    let mut alias_lookup: HashMap<String, CanonicalField> = HashMap::new();
    for field in CanonicalField::ALL {
        alias_lookup.insert(field.name().to_string(), field);
    }
    for (alias, canonical) in aliases {
        alias_lookup.insert(normalize_name(alias), canonical.parse()?);
    }

    let mut sources: BTreeMap<CanonicalField, Vec<(usize, String)>> = BTreeMap::new();
    for (idx, column) in table.columns.iter().enumerate() {
        if drop_patterns.iter().any(|p| glob_match(p, column)) {
            continue;
        }
        if let Some(&field) = alias_lookup.get(&normalize_name(column)) {
            sources.entry(field).or_default().push((idx, column.clone()));
        }
    }
    let mut indices = Vec::with_capacity(CanonicalField::ALL.len());
    for field in CanonicalField::ALL {
        match sources.get(&field).map(Vec::as_slice) {
            None | Some([]) => return Err(IngestError::MissingCanonicalField(field)),
            Some([(idx, _)]) => indices.push(*idx),
            Some(many) => {
                return Err(IngestError::AmbiguousField {
                    field,
                    columns: many.iter().map(|(_, c)| c.clone()).collect(),
                })
            }
        }
    }

    let rows = table
        .rows
        .iter()
        .map(|row| {
            let mut cells: Vec<String> = indices.iter().map(|&i| row.cells[i].trim().to_string()).collect();
            let flags = canonicalize_cells(&mut cells);
            Row {
                record_id: row.record_id.clone(),
                source: row.source.clone(),
                cells,
                flags,
            }
        })
        .collect();
    Ok(RecordTable {
        columns: canonical_columns(),
        rows,
    })
}

fn canonicalize_cells(cells: &mut [String]) -> Vec<RowFlag> {
    let mut flags: Vec<RowFlag> = CanonicalField::ALL
        .into_iter()
        .filter(|f| cells[f.index()].is_empty())
        .map(RowFlag::EmptyField)
        .collect();
    let amount = &mut cells[CanonicalField::Amount.index()];
    if !amount.is_empty() {
        match parse_amount(amount) {
            Ok(v) => *amount = v.to_string(),
            Err(e) => flags.push(RowFlag::BadAmount(e)),
        }
    }
    let date = &mut cells[CanonicalField::Date.index()];
    if !date.is_empty() {
        match parse_date(date) {
            Ok(d) => *date = d.format("%Y-%m-%d").to_string(),
            Err(e) => flags.push(RowFlag::BadDate(e)),
        }
    }
    flags
}

/// Re-reads a table written by [`RecordTable::write_csv`], re-deriving flags.
pub fn read_normalized(path: &Path) -> Result<RecordTable, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path.display().to_string();
    parse_normalized(&text, &name)
}

pub fn parse_normalized(text: &str, source_name: &str) -> Result<RecordTable, IngestError> {
    let raw = parse_csv(text, "", source_name)?;
    let id_col = raw
        .column_index("record_id")
        .ok_or_else(|| IngestError::MissingColumn("record_id".into()))?;
    let src_col = raw
        .column_index("source")
        .ok_or_else(|| IngestError::MissingColumn("source".into()))?;
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(raw.rows.len());
    let mut field_cols = Vec::new();
    for field in CanonicalField::ALL {
        field_cols.push(
            raw.column_index(field.name())
                .ok_or(IngestError::MissingCanonicalField(field))?,
        );
    }
    for row in &raw.rows {
        let record_id = row.cells[id_col].clone();
        if !seen.insert(record_id.clone()) {
            return Err(IngestError::DuplicateRecordId(record_id));
        }
        let mut cells: Vec<String> = field_cols.iter().map(|&i| row.cells[i].trim().to_string()).collect();
        let flags = canonicalize_cells(&mut cells);
        rows.push(Row {
            record_id,
            source: row.cells[src_col].clone(),
            cells,
            flags,
        });
    }
    Ok(RecordTable {
        columns: canonical_columns(),
        rows,
    })
}

/// Parses a denar amount: dots and spaces are thousands separators, an
/// optional `,` decimal tail is rounded half away from zero.
pub fn parse_amount(text: &str) -> Result<u64, AmountError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(AmountError::Empty);
    }
    let (negative, body) = match trimmed.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, trimmed.strip_prefix('+').unwrap_or(trimmed)),
    };
    let (int_part, frac_part) = match body.split_once(',') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits: String = int_part
        .chars()
        .filter(|c| !matches!(c, '.' | ' ' | '\u{a0}' | '\u{202f}'))
        .collect();
    let non_numeric = || AmountError::NonNumeric(text.to_string());
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(non_numeric());
    }
    let round_up = match frac_part {
        None => false,
        Some(f) if !f.is_empty() && f.chars().all(|c| c.is_ascii_digit()) => f.as_bytes()[0] >= b'5',
        Some(_) => return Err(non_numeric()),
    };
    let whole: u64 = digits
        .parse()
        .map_err(|_| AmountError::Overflow(text.to_string()))?;
    let magnitude = whole
        .checked_add(u64::from(round_up))
        .ok_or_else(|| AmountError::Overflow(text.to_string()))?;
    if negative || magnitude == 0 {
        return Err(AmountError::NonPositive(text.to_string()));
    }
    Ok(magnitude)
}

/// Accepts `DD.MM.YYYY`, `DD/MM/YYYY` and `YYYY-MM-DD`.
pub fn parse_date(text: &str) -> Result<NaiveDate, DateError> {
    let trimmed = text.trim();
    let unparseable = || DateError::Unparseable(text.to_string());
    let parts: Vec<&str>;
    let (y, m, d) = if trimmed.contains('-') {
        parts = trimmed.split('-').collect();
        match parts.as_slice() {
            [y, m, d] if y.len() == 4 && (1..=2).contains(&m.len()) && (1..=2).contains(&d.len()) => (*y, *m, *d),
            _ => return Err(unparseable()),
        }
    } else {
        let sep = if trimmed.contains('.') { '.' } else { '/' };
        parts = trimmed.split(sep).collect();
        match parts.as_slice() {
            [d, m, y] if y.len() == 4 && (1..=2).contains(&m.len()) && (1..=2).contains(&d.len()) => (*y, *m, *d),
            _ => return Err(unparseable()),
        }
    };
    if ![y, m, d].iter().all(|p| p.chars().all(|c| c.is_ascii_digit())) {
        return Err(unparseable());
    }
    let (y, m, d): (i32, u32, u32) = (
        y.parse().map_err(|_| unparseable())?,
        m.parse().map_err(|_| unparseable())?,
        d.parse().map_err(|_| unparseable())?,
    );
    NaiveDate::from_ymd_opt(y, m, d).ok_or_else(|| DateError::Impossible(text.to_string()))
}

/// Renders a positive amount with dot thousands separators.
pub fn format_amount(amount: u64) -> String {
    let digits = amount.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push('.');
        }
        out.push(c);
    }
    out
}
