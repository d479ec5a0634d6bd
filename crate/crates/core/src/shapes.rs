//! Class-targeted graph constraints and the validator that checks them.

use std::fmt;
use std::str::FromStr;

use regex::Regex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{resolve_iri, Vocabulary};
use crate::rdf::{Datatype, Graph, Iri, Term, RDF_TYPE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapeError {
    #[error("malformed shapes document: {0}")]
    Malformed(String),
    #[error("unknown constraint kind `{0}`")]
    UnknownKind(String),
    #[error("invalid argument for {kind}: {reason}")]
    BadArgument { kind: &'static str, reason: String },
    #[error("`{0}` is not an absolute IRI and no base_iri is set")]
    Relative(String),
    #[error("invalid IRI: {0}")]
    Iri(String),
}

#[derive(Debug, Clone)]
pub enum ConstraintKind {
    MinCount(usize),
    Datatype(Datatype),
    MinExclusive(Decimal),
    Pattern(Regex),
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::MinCount(_) => "minCount",
            ConstraintKind::Datatype(_) => "datatype",
            ConstraintKind::MinExclusive(_) => "minExclusive",
            ConstraintKind::Pattern(_) => "pattern",
        }
    }

    fn order(&self) -> u8 {
        match self {
            ConstraintKind::MinCount(_) => 0,
            ConstraintKind::Datatype(_) => 1,
            ConstraintKind::MinExclusive(_) => 2,
            ConstraintKind::Pattern(_) => 3,
        }
    }
}

impl PartialEq for ConstraintKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ConstraintKind::MinCount(a), ConstraintKind::MinCount(b)) => a == b,
            (ConstraintKind::Datatype(a), ConstraintKind::Datatype(b)) => a == b,
            (ConstraintKind::MinExclusive(a), ConstraintKind::MinExclusive(b)) => a == b,
            (ConstraintKind::Pattern(a), ConstraintKind::Pattern(b)) => a.as_str() == b.as_str(),
            _ => false,
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::MinCount(n) => write!(f, "minCount {n}"),
            ConstraintKind::Datatype(d) => write!(f, "datatype xsd:{}", d.local_name()),
            ConstraintKind::MinExclusive(x) => write!(f, "minExclusive {x}"),
            ConstraintKind::Pattern(re) => write!(f, "pattern {}", re.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub path: Iri,
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub target_class: Iri,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapeSet {
    pub shapes: Vec<Shape>,
}

pub const ISO_DATE_PATTERN: &str = r"^\d{4}-\d{2}-\d{2}$";

/// The contract shape: an institution and a supplier are required, the
/// amount is a positive decimal and the date an ISO 8601 `xsd:date`.
pub fn builtin_shapes(vocab: &Vocabulary) -> ShapeSet {
    let c = |path: &Iri, kind| Constraint {
        path: path.clone(),
        kind,
    };
    ShapeSet {
        shapes: vec![Shape {
            target_class: vocab.contract.clone(),
            constraints: vec![
                c(&vocab.has_institution, ConstraintKind::MinCount(1)),
                c(&vocab.has_supplier, ConstraintKind::MinCount(1)),
                c(&vocab.has_amount, ConstraintKind::Datatype(Datatype::Decimal)),
                c(&vocab.has_amount, ConstraintKind::MinExclusive(Decimal::ZERO)),
                c(&vocab.has_date, ConstraintKind::Datatype(Datatype::Date)),
                c(
                    &vocab.has_date,
                    ConstraintKind::Pattern(Regex::new(ISO_DATE_PATTERN).expect("static pattern")),
                ),
            ],
        }],
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShapes {
    base_iri: Option<String>,
    #[serde(default)]
    shapes: Vec<RawShape>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShape {
    target_class: String,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    path: String,
    kind: String,
    argument: toml::Value,
}

/// Parses a shapes document (same TOML dialect as mapping files).
pub fn parse_shapes(doc: &str) -> Result<ShapeSet, ShapeError> {
    let raw: RawShapes = toml::from_str(doc).map_err(|e| ShapeError::Malformed(e.message().to_string()))?;
    let resolve = |name: &str| -> Result<Iri, ShapeError> {
        match &raw.base_iri {
            Some(base) => resolve_iri(base, name).map_err(|e| ShapeError::Iri(e.to_string())),
            None if name.contains("://") => Iri::new(name).map_err(|e| ShapeError::Iri(e.to_string())),
            None => Err(ShapeError::Relative(name.to_string())),
        }
    };
    let mut shapes = Vec::with_capacity(raw.shapes.len());
    for shape in &raw.shapes {
        let mut constraints = Vec::with_capacity(shape.constraints.len());
        for c in &shape.constraints {
            constraints.push(Constraint {
                path: resolve(&c.path)?,
                kind: parse_kind(&c.kind, &c.argument)?,
            });
        }
        shapes.push(Shape {
            target_class: resolve(&shape.target_class)?,
            constraints,
        });
    }
    Ok(ShapeSet { shapes })
}

fn parse_kind(kind: &str, arg: &toml::Value) -> Result<ConstraintKind, ShapeError> {
    let bad = |kind: &'static str, reason: String| ShapeError::BadArgument { kind, reason };
    match kind {
        "minCount" => match arg.as_integer() {
            Some(n) if n >= 1 => Ok(ConstraintKind::MinCount(n as usize)),
            _ => Err(bad("minCount", format!("expected an integer >= 1, got {arg}"))),
        },
        "datatype" => {
            let name = arg
                .as_str()
                .ok_or_else(|| bad("datatype", format!("expected a string, got {arg}")))?;
            let local = name.strip_prefix("xsd:").unwrap_or(name);
            Datatype::from_local_name(local)
                .or_else(|| Datatype::from_iri(name))
                .map(ConstraintKind::Datatype)
                .ok_or_else(|| bad("datatype", format!("unsupported datatype `{name}`")))
        }
        "minExclusive" => {
            let parsed = match arg {
                toml::Value::Integer(i) => Some(Decimal::from(*i)),
                toml::Value::Float(f) => Decimal::try_from(*f).ok(),
                toml::Value::String(s) => Decimal::from_str(s).ok(),
                _ => None,
            };
            parsed
                .map(ConstraintKind::MinExclusive)
                .ok_or_else(|| bad("minExclusive", format!("expected a number, got {arg}")))
        }
        "pattern" => {
            let src = arg
                .as_str()
                .ok_or_else(|| bad("pattern", format!("expected a string, got {arg}")))?;
            Regex::new(src)
                .map(ConstraintKind::Pattern)
                .map_err(|e| bad("pattern", e.to_string()))
        }
        other => Err(ShapeError::UnknownKind(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub focus_node: String,
    pub path: String,
    pub constraint_kind: &'static str,
    pub message: String,
    /// Offending value in N-Triples syntax.
    pub value: Option<String>,
    #[serde(skip)]
    order: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub conforms: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn numeric_value(term: &Term) -> Option<Decimal> {
    let lit = term.as_literal()?;
    match lit.datatype() {
        Datatype::Integer | Datatype::Decimal => Decimal::from_str(lit.lexical()).ok(),
        _ => None,
    }
}

/// Evaluates every constraint on every subject typed with the shape's
/// target class. The graph is never modified.
pub fn validate(graph: &Graph, shapes: &ShapeSet) -> ValidationReport {
    let mut violations = Vec::new();
    let Some(rdf_type) = graph.lookup(&Term::iri(RDF_TYPE).expect("static IRI")) else {
        return ValidationReport {
            conforms: true,
            violations,
        };
    };
    for shape in &shapes.shapes {
        let Some(class) = graph.lookup(&Term::Iri(shape.target_class.clone())) else {
            continue;
        };
        let focus_nodes: Vec<_> = graph
            .match_ids([None, Some(rdf_type), Some(class)])
            .map(|[s, _, _]| s)
            .collect();
        for focus in focus_nodes {
            let focus_iri = graph.term(focus).text().to_string();
            for constraint in &shape.constraints {
                let values: Vec<&Term> = match graph.lookup(&Term::Iri(constraint.path.clone())) {
                    Some(path) => graph
                        .match_ids([Some(focus), Some(path), None])
                        .map(|[_, _, o]| graph.term(o))
                        .collect(),
                    None => Vec::new(),
                };
                let mut violation = |message: String, value: Option<&Term>| {
                    violations.push(Violation {
                        focus_node: focus_iri.clone(),
                        path: constraint.path.as_str().to_string(),
                        constraint_kind: constraint.kind.name(),
                        message,
                        value: value.map(Term::to_string),
                        order: constraint.kind.order(),
                    })
                };
                match &constraint.kind {
                    ConstraintKind::MinCount(min) => {
                        if values.len() < *min {
                            violation(
                                format!("expected at least {min} value(s), found {}", values.len()),
                                None,
                            );
                        }
                    }
                    ConstraintKind::Datatype(dt) => {
                        for value in values {
                            if value.as_literal().map(|l| l.datatype()) != Some(*dt) {
                                violation(format!("value is not an xsd:{} literal", dt.local_name()), Some(value));
                            }
                        }
                    }
                    ConstraintKind::MinExclusive(min) => {
                        for value in values {
                            match numeric_value(value) {
                                Some(v) if v > *min => {}
                                Some(_) => violation(format!("value must be greater than {min}"), Some(value)),
                                None => violation("value is not numeric".to_string(), Some(value)),
                            }
                        }
                    }
                    ConstraintKind::Pattern(re) => {
                        for value in values {
                            if !re.is_match(value.text()) {
                                violation(format!("value does not match {}", re.as_str()), Some(value));
                            }
                        }
                    }
                }
            }
        }
    }
    violations.sort_by(|a, b| {
        (&a.focus_node, &a.path, a.order, &a.value).cmp(&(&b.focus_node, &b.path, b.order, &b.value))
    });
    ValidationReport {
        conforms: violations.is_empty(),
        violations,
    }
}
