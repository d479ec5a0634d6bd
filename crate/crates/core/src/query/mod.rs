//! A SPARQL subset: basic graph patterns, FILTER comparisons, GROUP BY
//! with aggregates, ORDER BY and LIMIT, evaluated over a [`Graph`].
//!
//! [`Graph`]: crate::rdf::Graph

mod eval;
mod parse;
mod value;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::rdf::Term;

pub use eval::{builtin_temporal, evaluate, SolutionTable};
pub use parse::{parse_query, parse_query_with_prefixes};
pub use value::{cmp_cells, cmp_rows, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown prefix `{prefix}:` at line {line}, column {column}")]
    UnknownPrefix {
        prefix: String,
        line: usize,
        column: usize,
    },
    #[error("variable ?{0} is projected but neither grouped nor aggregated")]
    Ungrouped(String),
    #[error("variable ?{0} does not occur in any triple pattern")]
    UnknownVariable(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("type error in `{expr}`: {message}")]
    Type { expr: String, message: String },
    #[error("numeric overflow in `{0}`")]
    Overflow(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternTerm {
    Var(String),
    Term(Term),
}

impl PatternTerm {
    pub fn var(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Term(_) => None,
        }
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "?{v}"),
            PatternTerm::Term(t) => t.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl QueryPattern {
    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Temporal {
    Year,
    Month,
    Day,
    Quarter,
}

impl Temporal {
    pub fn name(self) -> &'static str {
        match self {
            Temporal::Year => "YEAR",
            Temporal::Month => "MONTH",
            Temporal::Day => "DAY",
            Temporal::Quarter => "QUARTER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateFn {
    Count,
    Sum,
    Avg,
    Min,
    Max,
    Median,
    Stddev,
}

impl AggregateFn {
    pub fn name(self) -> &'static str {
        match self {
            AggregateFn::Count => "COUNT",
            AggregateFn::Sum => "SUM",
            AggregateFn::Avg => "AVG",
            AggregateFn::Min => "MIN",
            AggregateFn::Max => "MAX",
            AggregateFn::Median => "MEDIAN",
            AggregateFn::Stddev => "STDDEV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Const(Term),
    Temporal(Temporal, Box<Expr>),
    Compare(CompareOp, Box<Expr>, Box<Expr>),
    Aggregate {
        func: AggregateFn,
        distinct: bool,
        /// `None` for `COUNT(*)`.
        arg: Option<Box<Expr>>,
    },
}

impl Expr {
    pub fn has_aggregate(&self) -> bool {
        match self {
            Expr::Aggregate { .. } => true,
            Expr::Var(_) | Expr::Const(_) => false,
            Expr::Temporal(_, e) => e.has_aggregate(),
            Expr::Compare(_, a, b) => a.has_aggregate() || b.has_aggregate(),
        }
    }

    /// Variables referenced outside of any aggregate.
    pub fn free_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => out.push(v.clone()),
            Expr::Const(_) | Expr::Aggregate { .. } => {}
            Expr::Temporal(_, e) => e.free_vars(out),
            Expr::Compare(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }

    /// Every variable, including those inside aggregates.
    pub fn all_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Aggregate { arg: Some(arg), .. } => arg.all_vars(out),
            Expr::Temporal(_, e) => e.all_vars(out),
            Expr::Compare(_, a, b) => {
                a.all_vars(out);
                b.all_vars(out);
            }
            other => other.free_vars(out),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(v) => write!(f, "?{v}"),
            Expr::Const(t) => t.fmt(f),
            Expr::Temporal(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Compare(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            Expr::Aggregate { func, distinct, arg } => {
                write!(f, "{}(", func.name())?;
                if *distinct {
                    f.write_str("DISTINCT ")?;
                }
                match arg {
                    Some(arg) => write!(f, "{arg})"),
                    None => f.write_str("*)"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionItem {
    pub expr: Expr,
    /// Output column name (the variable or the `AS` alias).
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupKey {
    pub expr: Expr,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderKey {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub prefixes: BTreeMap<String, String>,
    pub projection: Vec<ProjectionItem>,
    pub patterns: Vec<QueryPattern>,
    pub filters: Vec<Expr>,
    pub group_by: Vec<GroupKey>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<usize>,
}

impl QueryPlan {
    pub fn is_aggregate(&self) -> bool {
        !self.group_by.is_empty() || self.projection.iter().any(|p| p.expr.has_aggregate())
    }

    /// Pattern variables in order of first occurrence.
    pub fn pattern_vars(&self) -> Vec<String> {
        let mut vars: Vec<String> = Vec::new();
        for pattern in &self.patterns {
            for v in pattern.positions().into_iter().filter_map(PatternTerm::var) {
                if !vars.iter().any(|x| x == v) {
                    vars.push(v.to_string());
                }
            }
        }
        vars
    }
}
