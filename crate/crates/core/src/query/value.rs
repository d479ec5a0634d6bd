use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::rdf::{Datatype, Term};

/// A solution cell: a graph term or a computed value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Term(Term),
    /// Exact number (counts, sums, medians, temporal parts).
    Number(Decimal),
    /// Binary floating point (averages, standard deviations).
    Double(f64),
    Bool(bool),
}

/// A value viewed through its type, for comparisons and arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Typed<'a> {
    Iri(&'a str),
    Bool(bool),
    Exact(Decimal),
    Double(f64),
    Date(NaiveDate),
    Str(&'a str),
    /// Literal whose lexical form does not fit its datatype.
    Malformed(&'a str),
}

impl Typed<'_> {
    fn rank(&self) -> u8 {
        match self {
            Typed::Iri(_) => 0,
            Typed::Bool(_) => 1,
            Typed::Exact(_) | Typed::Double(_) => 2,
            Typed::Date(_) => 3,
            Typed::Str(_) => 4,
            Typed::Malformed(_) => 5,
        }
    }

    pub(crate) fn kind_name(&self) -> &'static str {
        match self {
            Typed::Iri(_) => "IRI",
            Typed::Bool(_) => "boolean",
            Typed::Exact(_) | Typed::Double(_) => "number",
            Typed::Date(_) => "date",
            Typed::Str(_) => "string",
            Typed::Malformed(_) => "ill-typed literal",
        }
    }

    pub(crate) fn as_f64(&self) -> Option<f64> {
        match self {
            Typed::Exact(d) => d.to_f64(),
            Typed::Double(f) => Some(*f),
            _ => None,
        }
    }
}

pub(crate) fn parse_date_lexical(lexical: &str) -> Option<NaiveDate> {
    if lexical.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(lexical, "%Y-%m-%d").ok()
}

impl Value {
    pub(crate) fn typed(&self) -> Typed<'_> {
        match self {
            Value::Number(d) => Typed::Exact(*d),
            Value::Double(f) => Typed::Double(*f),
            Value::Bool(b) => Typed::Bool(*b),
            Value::Term(Term::Iri(iri)) => Typed::Iri(iri.as_str()),
            Value::Term(Term::Literal(lit)) => {
                let lex = lit.lexical();
                match lit.datatype() {
                    Datatype::String => Typed::Str(lex),
                    Datatype::Integer | Datatype::Decimal => Decimal::from_str(lex)
                        .map(Typed::Exact)
                        .unwrap_or(Typed::Malformed(lex)),
                    Datatype::Date => parse_date_lexical(lex)
                        .map(Typed::Date)
                        .unwrap_or(Typed::Malformed(lex)),
                }
            }
        }
    }

    pub fn as_term(&self) -> Option<&Term> {
        match self {
            Value::Term(t) => Some(t),
            _ => None,
        }
    }

    /// Numeric view of the value, if it has one.
    pub fn as_f64(&self) -> Option<f64> {
        self.typed().as_f64()
    }

    pub fn as_decimal(&self) -> Option<Decimal> {
        match self.typed() {
            Typed::Exact(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_date(&self) -> Option<NaiveDate> {
        match self.typed() {
            Typed::Date(d) => Some(d),
            _ => None,
        }
    }

    /// Plain text rendering used by CSV output.
    pub fn text(&self) -> String {
        match self {
            Value::Term(t) => t.text().to_string(),
            Value::Number(d) => d.normalize().to_string(),
            Value::Double(f) => f.to_string(),
            Value::Bool(b) => b.to_string(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Term(t) => serde_json::Value::String(t.text().to_string()),
            Value::Number(d) => {
                let d = d.normalize();
                if d.fract().is_zero() {
                    if let Some(i) = d.to_i64() {
                        return serde_json::Value::from(i);
                    }
                }
                d.to_f64()
                    .and_then(serde_json::Number::from_f64)
                    .map(serde_json::Value::Number)
                    .unwrap_or_else(|| serde_json::Value::String(d.to_string()))
            }
            Value::Double(f) => serde_json::Number::from_f64(*f)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Bool(b) => serde_json::Value::Bool(*b),
        }
    }

    /// Total order used by ORDER BY, MIN/MAX and row tie-breaking:
    /// IRIs < booleans < numbers < dates < strings < ill-typed literals.
    /// Numbers compare by value, then by representation.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        let (a, b) = (self.typed(), other.typed());
        a.rank()
            .cmp(&b.rank())
            .then_with(|| match (a, b) {
                (Typed::Iri(x), Typed::Iri(y)) => x.cmp(y),
                (Typed::Bool(x), Typed::Bool(y)) => x.cmp(&y),
                (Typed::Exact(x), Typed::Exact(y)) => x.cmp(&y),
                (x, y) if x.rank() == 2 => {
                    let (fx, fy) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
                    fx.total_cmp(&fy)
                }
                (Typed::Date(x), Typed::Date(y)) => x.cmp(&y),
                (Typed::Str(x), Typed::Str(y)) => x.cmp(y),
                (Typed::Malformed(x), Typed::Malformed(y)) => x.cmp(y),
                _ => Ordering::Equal,
            })
            .then_with(|| self.repr_key().cmp(&other.repr_key()))
    }

    fn repr_key(&self) -> (u8, String) {
        match self {
            Value::Term(t) => (0, t.to_string()),
            Value::Number(d) => (1, d.to_string()),
            Value::Double(f) => (2, f.to_string()),
            Value::Bool(b) => (3, b.to_string()),
        }
    }

    /// Identity key for DISTINCT and grouping.
    pub(crate) fn key(&self) -> ValueKey {
        match self {
            Value::Term(t) => ValueKey::Term(t.clone()),
            Value::Number(d) => ValueKey::Number(d.normalize().to_string()),
            Value::Double(f) => ValueKey::Double(f.to_bits()),
            Value::Bool(b) => ValueKey::Bool(*b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum ValueKey {
    Term(Term),
    Number(String),
    Double(u64),
    Bool(bool),
}

/// Total order over optional cells; unbound sorts first.
pub fn cmp_cells(a: &Option<Value>, b: &Option<Value>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(y),
    }
}

pub fn cmp_rows(a: &[Option<Value>], b: &[Option<Value>]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cmp_cells(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::Literal;

    fn lit(lex: &str, dt: Datatype) -> Value {
        Value::Term(Term::Literal(Literal::new(lex, dt)))
    }

    #[test]
    fn numbers_compare_across_representations() {
        let a = lit("5", Datatype::Integer);
        let b = lit("5.5", Datatype::Decimal);
        assert_eq!(a.total_cmp(&b), Ordering::Less);
        assert_eq!(Value::Double(6.0).total_cmp(&b), Ordering::Greater);
        assert_eq!(Value::Number(Decimal::from(5)).total_cmp(&a), Ordering::Greater);
    }

    #[test]
    fn type_ranks() {
        let iri = Value::Term(Term::iri("http://x/a").unwrap());
        let date = lit("2020-01-01", Datatype::Date);
        let s = lit("a", Datatype::String);
        let n = lit("1", Datatype::Integer);
        let mut v = vec![s.clone(), date.clone(), n.clone(), iri.clone()];
        v.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(v, vec![iri, n, date, s]);
    }

    #[test]
    fn ill_typed_literals_are_recognised() {
        assert!(matches!(lit("31-12-2021", Datatype::Date).typed(), Typed::Malformed(_)));
        assert!(matches!(lit("abc", Datatype::Decimal).typed(), Typed::Malformed(_)));
    }

    #[test]
    fn json_numbers() {
        assert_eq!(Value::Number(Decimal::from(300)).to_json(), serde_json::json!(300));
        assert_eq!(Value::Number(Decimal::new(25, 1)).to_json(), serde_json::json!(2.5));
        assert_eq!(Value::Double(f64::NAN).to_json(), serde_json::Value::Null);
    }
}
