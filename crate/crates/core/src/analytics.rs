//! Canned procurement analyses over a mapped contract graph: the summary
//! report, quarterly statistics, above-average detection and per-institution
//! trend series, plus SVG chart rendering.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use chrono::{Datelike, NaiveDate};
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::Serialize;
use thiserror::Error;

use crate::mapping::{mint_iri, slug, EntityKind, Vocabulary};
use crate::query::{evaluate, parse_query_with_prefixes, EvalError, QueryError, SolutionTable, Value};
use crate::rdf::{Graph, Iri, Term, TriplePattern};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("institution not found: {institution}{}", suggestion_text(.suggestions))]
    NotFound {
        institution: String,
        suggestions: Vec<String>,
    },
    #[error("nothing to chart")]
    EmptyChart,
}

fn suggestion_text(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", suggestions.join(", "))
    }
}

/// Names of the canned report metrics, in report order.
pub const METRICS: [&str; 13] = [
    "total_contracts",
    "total_amount",
    "year_most_contracts",
    "institution_most_contracts",
    "highest_contract_value",
    "supplier_highest_total",
    "most_supplier_diverse_institution",
    "most_common_institution_supplier_pair",
    "avg_contracts_per_institution",
    "top_avg_contract_value_institution",
    "max_contracts_by_institution",
    "top_institution_in_year",
    "top_contract_in_window",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportValue {
    Number(Decimal),
    Real(f64),
}

impl ReportValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            ReportValue::Number(d) => d.to_f64().unwrap_or(f64::NAN),
            ReportValue::Real(x) => *x,
        }
    }
}

impl fmt::Display for ReportValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportValue::Number(d) => write!(f, "{}", d.normalize()),
            ReportValue::Real(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub metric: &'static str,
    /// `None` when the metric is undefined (for example on an empty graph).
    pub value: Option<ReportValue>,
    /// Supporting entities: the winning institution, supplier or contract.
    pub entities: Vec<Iri>,
    pub labels: Vec<String>,
    /// Parameters the metric was computed with, such as the year.
    pub detail: Option<String>,
}

/// A range of days within one month, applied to every year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayWindow {
    pub month: u32,
    pub first_day: u32,
    pub last_day: u32,
}

impl Default for DayWindow {
    fn default() -> Self {
        DayWindow {
            month: 12,
            first_day: 20,
            last_day: 31,
        }
    }
}

impl DayWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        date.month() == self.month && (self.first_day..=self.last_day).contains(&date.day())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportParams {
    /// Year for `top_institution_in_year`; defaults to the latest contract year.
    pub year: Option<i32>,
    pub window: DayWindow,
}

struct Runner<'g> {
    graph: &'g Graph,
    vocab: &'g Vocabulary,
    prefixes: BTreeMap<String, String>,
}

impl<'g> Runner<'g> {
    fn new(graph: &'g Graph, vocab: &'g Vocabulary) -> Self {
        let mut prefixes = BTreeMap::new();
        prefixes.insert(String::new(), vocab.base.clone());
        Runner { graph, vocab, prefixes }
    }

    fn run(&self, query: &str) -> Result<SolutionTable, AnalyticsError> {
        let plan = parse_query_with_prefixes(query, &self.prefixes)?;
        Ok(evaluate(self.graph, &plan)?)
    }

    fn label(&self, iri: &Iri) -> Option<String> {
        let pattern = TriplePattern {
            subject: Some(Term::Iri(iri.clone())),
            predicate: Some(Term::Iri(self.vocab.label.clone())),
            object: None,
        };
        self.graph
            .match_pattern(&pattern)
            .into_iter()
            .map(|t| t.object.text().to_string())
            .min()
    }

    /// Runs a query and turns its first row into a report row: `value` is
    /// read from the named column and each entity column must hold an IRI.
    fn top(&self, metric: &'static str, query: &str, value: &str, entities: &[&str]) -> Result<ReportRow, AnalyticsError> {
        let table = self.run(query)?;
        let mut row = ReportRow {
            metric,
            value: None,
            entities: Vec::new(),
            labels: Vec::new(),
            detail: None,
        };
        if table.is_empty() {
            return Ok(row);
        }
        row.value = table.get(0, value).and_then(report_value);
        for column in entities {
            if let Some(Value::Term(Term::Iri(iri))) = table.get(0, column) {
                if let Some(label) = self.label(iri) {
                    row.labels.push(label);
                }
                row.entities.push(iri.clone());
            }
        }
        Ok(row)
    }
}

fn report_value(value: &Value) -> Option<ReportValue> {
    match value {
        Value::Double(x) => Some(ReportValue::Real(*x)),
        other => other.as_decimal().map(ReportValue::Number),
    }
}

fn scalar(table: &SolutionTable, column: &str) -> Option<Decimal> {
    table.get(0, column).and_then(Value::as_decimal)
}

/// Computes every canned metric. Ties between entities go to the
/// lexicographically smallest IRI; ties between years to the earliest.
pub fn canned_report(graph: &Graph, vocab: &Vocabulary, params: &ReportParams) -> Result<Vec<ReportRow>, AnalyticsError> {
    let r = Runner::new(graph, vocab);
    let mut rows = Vec::with_capacity(METRICS.len());
    let plain = |metric: &'static str, value: Option<ReportValue>| ReportRow {
        metric,
        value,
        entities: Vec::new(),
        labels: Vec::new(),
        detail: None,
    };

    let totals = r.run(
        "SELECT (COUNT(?c) AS ?n) (SUM(?a) AS ?t) WHERE { ?c a :Contract ; :hasAmount ?a }",
    )?;
    let counted = r.run("SELECT (COUNT(?c) AS ?n) WHERE { ?c a :Contract }")?;
    let total_contracts = scalar(&counted, "n").unwrap_or_default();
    rows.push(plain(METRICS[0], Some(ReportValue::Number(total_contracts))));
    rows.push(plain(
        METRICS[1],
        Some(ReportValue::Number(scalar(&totals, "t").unwrap_or_default())),
    ));

    rows.push(r.top(
        METRICS[2],
        "SELECT ?y (COUNT(?c) AS ?n) WHERE { ?c a :Contract ; :hasDate ?d }
         GROUP BY (YEAR(?d) AS ?y) ORDER BY DESC(?n) ?y LIMIT 1",
        "y",
        &[],
    )?);
    rows.push(r.top(
        METRICS[3],
        "SELECT ?i (COUNT(?c) AS ?n) WHERE { ?c a :Contract ; :hasInstitution ?i }
         GROUP BY ?i ORDER BY DESC(?n) ?i LIMIT 1",
        "n",
        &["i"],
    )?);
    rows.push(r.top(
        METRICS[4],
        "SELECT ?c ?a WHERE { ?c a :Contract ; :hasAmount ?a } ORDER BY DESC(?a) ?c LIMIT 1",
        "a",
        &["c"],
    )?);
    rows.push(r.top(
        METRICS[5],
        "SELECT ?s (SUM(?a) AS ?t) WHERE { ?c a :Contract ; :hasSupplier ?s ; :hasAmount ?a }
         GROUP BY ?s ORDER BY DESC(?t) ?s LIMIT 1",
        "t",
        &["s"],
    )?);
    rows.push(r.top(
        METRICS[6],
        "SELECT ?i (COUNT(DISTINCT ?s) AS ?n) WHERE { ?c a :Contract ; :hasInstitution ?i ; :hasSupplier ?s }
         GROUP BY ?i ORDER BY DESC(?n) ?i LIMIT 1",
        "n",
        &["i"],
    )?);
    rows.push(r.top(
        METRICS[7],
        "SELECT ?i ?s (COUNT(?c) AS ?n) WHERE { ?c a :Contract ; :hasInstitution ?i ; :hasSupplier ?s }
         GROUP BY ?i ?s ORDER BY DESC(?n) ?i ?s LIMIT 1",
        "n",
        &["i", "s"],
    )?);

    let institutions = r.run("SELECT (COUNT(DISTINCT ?i) AS ?k) WHERE { ?c a :Contract ; :hasInstitution ?i }")?;
    let distinct = scalar(&institutions, "k").unwrap_or_default();
    let average = (!distinct.is_zero()).then(|| {
        ReportValue::Real(total_contracts.to_f64().unwrap_or(f64::NAN) / distinct.to_f64().unwrap_or(f64::NAN))
    });
    rows.push(plain(METRICS[8], average));

    rows.push(r.top(
        METRICS[9],
        "SELECT ?i (AVG(?a) AS ?m) WHERE { ?c a :Contract ; :hasInstitution ?i ; :hasAmount ?a }
         GROUP BY ?i ORDER BY DESC(?m) ?i LIMIT 1",
        "m",
        &["i"],
    )?);
    let mut max_contracts = rows[3].clone();
    max_contracts.metric = METRICS[10];
    if max_contracts.value.is_none() {
        max_contracts.value = Some(ReportValue::Number(Decimal::ZERO));
    }
    rows.push(max_contracts);

    let year = match params.year {
        Some(y) => Some(y),
        None => latest_date(&r)?.map(|d| d.year()),
    };
    let mut in_year = match year {
        Some(year) => r.top(
            METRICS[11],
            &format!(
                "SELECT ?i (SUM(?a) AS ?t) WHERE {{ ?c a :Contract ; :hasInstitution ?i ; :hasAmount ?a ; :hasDate ?d
                 FILTER(YEAR(?d) = {year}) }} GROUP BY ?i ORDER BY DESC(?t) ?i LIMIT 1"
            ),
            "t",
            &["i"],
        )?,
        None => plain(METRICS[11], None),
    };
    in_year.detail = year.map(|y| format!("year {y}"));
    rows.push(in_year);

    let w = params.window;
    let mut windowed = r.top(
        METRICS[12],
        &format!(
            "SELECT ?c ?a WHERE {{ ?c a :Contract ; :hasAmount ?a ; :hasDate ?d
             FILTER(MONTH(?d) = {}) FILTER(DAY(?d) >= {}) FILTER(DAY(?d) <= {}) }}
             ORDER BY DESC(?a) ?c LIMIT 1",
            w.month, w.first_day, w.last_day
        ),
        "a",
        &["c"],
    )?;
    windowed.detail = Some(format!("{:02}-{:02}..{:02}-{:02}", w.month, w.first_day, w.month, w.last_day));
    rows.push(windowed);
    Ok(rows)
}

fn latest_date(r: &Runner<'_>) -> Result<Option<NaiveDate>, AnalyticsError> {
    let table = r.run("SELECT (MAX(?d) AS ?m) WHERE { ?c a :Contract ; :hasDate ?d }")?;
    Ok(table.get(0, "m").and_then(Value::as_date))
}

/// Report rows as CSV: `metric,value,entity,label,detail`. Multiple
/// entities or labels are joined with ` | `.
pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["metric", "value", "entity", "label", "detail"])
        .expect("in-memory write");
    for row in rows {
        let entities: Vec<&str> = row.entities.iter().map(Iri::as_str).collect();
        writer
            .write_record([
                row.metric.to_string(),
                row.value.as_ref().map(ToString::to_string).unwrap_or_default(),
                entities.join(" | "),
                row.labels.join(" | "),
                row.detail.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuarterStats {
    pub year: i32,
    pub quarter: u32,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; 0 when `count` is 1.
    pub stddev: f64,
    pub total: f64,
}

/// Per-quarter amount statistics for the `window_years` calendar years
/// ending with the year of the latest contract date.
pub fn quarterly_stats(graph: &Graph, vocab: &Vocabulary, window_years: i64) -> Result<Vec<QuarterStats>, AnalyticsError> {
    if window_years <= 0 {
        return Err(AnalyticsError::InvalidArgument(format!(
            "window must be at least one year, got {window_years}"
        )));
    }
    let r = Runner::new(graph, vocab);
    let latest = latest_date(&r)?.ok_or_else(|| AnalyticsError::NoData("no dated contracts".into()))?;
    let first_year = latest.year() as i64 - window_years + 1;
    let start = match NaiveDate::from_ymd_opt(first_year as i32, 1, 1) {
        Some(d) if first_year >= 1 => d.format("%Y-%m-%d").to_string(),
        _ => "0001-01-01".to_string(),
    };
    let table = r.run(&format!(
        "SELECT ?y ?q (COUNT(?a) AS ?n) (MIN(?a) AS ?lo) (MAX(?a) AS ?hi) (AVG(?a) AS ?mean)
                (MEDIAN(?a) AS ?med) (STDDEV(?a) AS ?sd) (SUM(?a) AS ?sum)
         WHERE {{ ?c a :Contract ; :hasAmount ?a ; :hasDate ?d FILTER(?d >= \"{start}\"^^xsd:date) }}
         GROUP BY (YEAR(?d) AS ?y) (QUARTER(?d) AS ?q) ORDER BY ?y ?q"
    ))?;
    let num = |row: usize, col: &str| table.get(row, col).and_then(Value::as_f64).unwrap_or(f64::NAN);
    Ok((0..table.len())
        .map(|i| QuarterStats {
            year: num(i, "y") as i32,
            quarter: num(i, "q") as u32,
            count: num(i, "n") as usize,
            min: num(i, "lo"),
            max: num(i, "hi"),
            mean: num(i, "mean"),
            median: num(i, "med"),
            stddev: num(i, "sd"),
            total: num(i, "sum"),
        })
        .collect())
}

pub fn quarterly_to_csv(rows: &[QuarterStats]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory write");
    }
    if rows.is_empty() {
        writer
            .write_record(["year", "quarter", "count", "min", "max", "mean", "median", "stddev", "total"])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Contracts whose amount strictly exceeds the mean of all contract
/// amounts, largest first.
pub fn above_average_contracts(graph: &Graph, vocab: &Vocabulary) -> Result<Vec<(Iri, Decimal)>, AnalyticsError> {
    let r = Runner::new(graph, vocab);
    let table = r.run("SELECT ?c ?a WHERE { ?c a :Contract ; :hasAmount ?a } ORDER BY DESC(?a) ?c")?;
    let mut contracts = Vec::with_capacity(table.len());
    for row in &table.rows {
        if let (Some(Value::Term(Term::Iri(c))), Some(a)) = (&row[0], row[1].as_ref().and_then(Value::as_decimal)) {
            contracts.push((c.clone(), a));
        }
    }
    let n = Decimal::from(contracts.len());
    let sum = contracts
        .iter()
        .try_fold(Decimal::ZERO, |acc, (_, a)| acc.checked_add(*a))
        .ok_or_else(|| AnalyticsError::InvalidArgument("amount total overflows".into()))?;
    // a > sum / n, compared without division.
    Ok(contracts
        .into_iter()
        .filter(|(_, a)| a.checked_mul(n).is_some_and(|scaled| scaled > sum))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    pub date: NaiveDate,
    pub amount: Decimal,
    pub contract: Iri,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSeries {
    pub institution: Iri,
    pub label: Option<String>,
    pub points: Vec<TrendPoint>,
}

/// Resolves a user-supplied institution reference: absolute IRIs are used
/// as given, anything else is treated as a name and minted like the mapper does.
pub fn institution_iri(vocab: &Vocabulary, reference: &str) -> Result<Iri, AnalyticsError> {
    if reference.contains("://") || reference.starts_with("urn:") {
        return Iri::new(reference).map_err(|e| AnalyticsError::InvalidArgument(e.to_string()));
    }
    mint_iri(&vocab.base, EntityKind::Institution, reference).map_err(|e| AnalyticsError::InvalidArgument(e.to_string()))
}

/// All contracts of one institution as date-ordered points.
pub fn institution_trend(graph: &Graph, vocab: &Vocabulary, institution: &Iri) -> Result<TrendSeries, AnalyticsError> {
    let r = Runner::new(graph, vocab);
    let known = r.run("SELECT ?i WHERE { ?i a :Institution }")?;
    let used = r.run("SELECT ?i WHERE { ?c :hasInstitution ?i }")?;
    let mut all: Vec<&Iri> = known
        .rows
        .iter()
        .chain(&used.rows)
        .filter_map(|row| match &row[0] {
            Some(Value::Term(Term::Iri(iri))) => Some(iri),
            _ => None,
        })
        .collect();
    all.sort();
    all.dedup();
    if all.binary_search(&institution).is_err() {
        return Err(AnalyticsError::NotFound {
            institution: institution.to_string(),
            suggestions: nearest_slugs(institution.as_str(), &all, 3),
        });
    }

    let table = r.run(&format!(
        "SELECT ?d ?a ?c WHERE {{ ?c :hasInstitution {institution} ; :hasDate ?d ; :hasAmount ?a }} ORDER BY ?d ?c"
    ))?;
    let mut points = Vec::with_capacity(table.len());
    for row in &table.rows {
        let date = row[0].as_ref().and_then(Value::as_date);
        let amount = row[1].as_ref().and_then(Value::as_decimal);
        if let (Some(date), Some(amount), Some(Value::Term(Term::Iri(contract)))) = (date, amount, &row[2]) {
            points.push(TrendPoint {
                date,
                amount,
                contract: contract.clone(),
            });
        }
    }
    Ok(TrendSeries {
        institution: institution.clone(),
        label: r.label(institution),
        points,
    })
}

fn last_segment(iri: &str) -> &str {
    iri.rsplit(['/', '#']).next().unwrap_or(iri)
}

fn nearest_slugs(requested: &str, candidates: &[&Iri], limit: usize) -> Vec<String> {
    let wanted = slug(last_segment(requested));
    let mut scored: Vec<(usize, &str)> = candidates
        .iter()
        .map(|iri| {
            let s = last_segment(iri.as_str());
            (strsim::levenshtein(&wanted, s), s)
        })
        .collect();
    scored.sort();
    scored.into_iter().take(limit).map(|(_, s)| s.to_string()).collect()
}

pub fn trend_to_csv(series: &TrendSeries) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["date", "amount", "contract"]).expect("in-memory write");
    for p in &series.points {
        writer
            .write_record([p.date.to_string(), p.amount.normalize().to_string(), p.contract.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub enum ChartInput<'a> {
    Trend(&'a TrendSeries),
    Quarters(&'a [QuarterStats]),
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 110.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const TICKS: usize = 5;

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn plot_height() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn plot_width() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn y_of(value: f64, max: f64) -> f64 {
    TOP + plot_height() * (1.0 - value / max)
}

/// Frame, title and y axis with denar ticks from 0 to `max`.
fn frame(svg: &mut String, title: &str, max: f64) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    );
    let (x0, y0) = (LEFT, TOP + plot_height());
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{x0:.2}" y1="{TOP:.2}" x2="{x0:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let value = max * i as f64 / TICKS as f64;
        let y = y_of(value, max);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            format_denars(value)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            WIDTH - RIGHT
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">Amount (denars)</text>"#,
        TOP + plot_height() / 2.0,
        TOP + plot_height() / 2.0
    );
}

fn format_denars(value: f64) -> String {
    let rounded = value.round() as i128;
    let digits = rounded.abs().to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    if rounded < 0 {
        out.insert(0, '-');
    }
    out
}

fn axis_max(max: f64) -> f64 {
    if max > 0.0 && max.is_finite() {
        max * 1.05
    } else {
        1.0
    }
}

/// Renders a standalone SVG: a line with one `class="point"` circle per
/// contract for trends, one `class="bar"` rectangle per quarter for
/// quarterly totals. Equal input gives byte-identical output.
pub fn render_svg_chart(input: ChartInput<'_>) -> Result<String, AnalyticsError> {
    let mut svg = String::new();
    match input {
        ChartInput::Trend(series) => {
            if series.points.is_empty() {
                return Err(AnalyticsError::EmptyChart);
            }
            let amounts: Vec<f64> = series.points.iter().map(|p| p.amount.to_f64().unwrap_or(0.0)).collect();
            let max = axis_max(amounts.iter().copied().fold(0.0, f64::max));
            let first = series.points[0].date;
            let last = series.points[series.points.len() - 1].date;
            let span = (last - first).num_days().max(1) as f64;
            let x_of = |d: NaiveDate| {
                if first == last {
                    LEFT + plot_width() / 2.0
                } else {
                    LEFT + plot_width() * (d - first).num_days() as f64 / span
                }
            };
            let name = series.label.clone().unwrap_or_else(|| series.institution.to_string());
            frame(&mut svg, &format!("Contracts of {name}"), max);
            let coords: Vec<(f64, f64)> = series
                .points
                .iter()
                .zip(&amounts)
                .map(|(p, &a)| (x_of(p.date), y_of(a, max)))
                .collect();
            let path: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                svg,
                r##"<polyline class="line" fill="none" stroke="#1f77b4" points="{}"/>"##,
                path.join(" ")
            );
            for ((x, y), p) in coords.iter().zip(&series.points) {
                let _ = writeln!(
                    svg,
                    r##"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="3.5" fill="#1f77b4"><title>{} {}</title></circle>"##,
                    p.date,
                    format_denars(p.amount.to_f64().unwrap_or(0.0))
                );
            }
            let mut labelled = vec![first, last];
            labelled.dedup();
            for d in labelled {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{d}</text>"#,
                    x_of(d),
                    TOP + plot_height() + 18.0
                );
            }
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Date</text>"#,
                LEFT + plot_width() / 2.0,
                HEIGHT - 12.0
            );
        }
        ChartInput::Quarters(rows) => {
            if rows.is_empty() {
                return Err(AnalyticsError::EmptyChart);
            }
            let max = axis_max(rows.iter().map(|r| r.total).fold(0.0, f64::max));
            frame(&mut svg, "Quarterly procurement totals", max);
            let slot = plot_width() / rows.len() as f64;
            for (i, row) in rows.iter().enumerate() {
                let x = LEFT + slot * i as f64 + slot * 0.15;
                let y = y_of(row.total, max);
                let _ = writeln!(
                    svg,
                    r##"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#2ca02c"><title>{} Q{}: {}</title></rect>"##,
                    slot * 0.7,
                    TOP + plot_height() - y,
                    row.year,
                    row.quarter,
                    format_denars(row.total)
                );
                let cx = LEFT + slot * (i as f64 + 0.5);
                let ly = TOP + plot_height() + 14.0;
                let _ = writeln!(
                    svg,
                    r#"<text x="{cx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-45 {cx:.2} {ly:.2})">{}-Q{}</text>"#,
                    row.year, row.quarter
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
