use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use chrono::Datelike;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::rdf::{Graph, IdPattern, TermId};

use super::value::{cmp_cells, cmp_rows, Typed, Value, ValueKey};
use super::{AggregateFn, CompareOp, EvalError, Expr, PatternTerm, QueryPlan, Temporal};

/// Query result: named columns and rows of optional cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<Value>>>,
}

impl SolutionTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Value> {
        self.rows.get(row)?.get(self.column(name)?)?.as_ref()
    }

    /// CSV with a header line; unbound cells are empty.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|c| c.as_ref().map(Value::text).unwrap_or_default()))
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// `{"head": [...], "rows": [{name: value}, ...]}`; unbound cells are omitted.
    pub fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .filter_map(|(h, c)| c.as_ref().map(|v| (h.clone(), v.to_json())))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::json!({ "head": self.header, "rows": serde_json::Value::Array(rows) })
    }
}

/// Applies a temporal accessor to a date value.
pub fn builtin_temporal(func: Temporal, value: &Value) -> Result<i64, EvalError> {
    let date = value.as_date().ok_or_else(|| EvalError::Type {
        expr: format!("{}({value})", func.name()),
        message: format!("expected a date, found {}", value.typed().kind_name()),
    })?;
    Ok(match func {
        Temporal::Year => date.year() as i64,
        Temporal::Month => date.month() as i64,
        Temporal::Day => date.day() as i64,
        Temporal::Quarter => date.month().div_ceil(3) as i64,
    })
}

#[derive(Clone, Copy)]
enum Slot {
    Var(usize),
    Const(TermId),
}

type Solution = Vec<Option<TermId>>;
type Row = Vec<Option<Value>>;

struct Context<'g> {
    graph: &'g Graph,
    slots: HashMap<String, usize>,
}

/// Variable bindings visible while evaluating one expression.
enum Scope<'a> {
    Row {
        solution: &'a Solution,
        aliases: &'a HashMap<String, Option<Value>>,
    },
    Group {
        members: &'a [&'a Solution],
        aliases: &'a HashMap<String, Option<Value>>,
    },
}

impl Context<'_> {
    fn lookup(&self, var: &str, scope: &Scope<'_>) -> Option<Value> {
        match scope {
            Scope::Row { solution, aliases } => match self.slots.get(var) {
                Some(&i) => solution[i].map(|id| Value::Term(self.graph.term(id).clone())),
                None => aliases.get(var).cloned().flatten(),
            },
            Scope::Group { aliases, .. } => aliases.get(var).cloned().flatten(),
        }
    }

    fn eval(&self, expr: &Expr, scope: &Scope<'_>) -> Result<Option<Value>, EvalError> {
        match expr {
            Expr::Var(v) => Ok(self.lookup(v, scope)),
            Expr::Const(t) => Ok(Some(Value::Term(t.clone()))),
            Expr::Temporal(func, arg) => {
                let value = self.eval(arg, scope)?.ok_or_else(|| unbound(expr))?;
                let n = builtin_temporal(*func, &value).map_err(|e| match e {
                    EvalError::Type { message, .. } => type_error(expr, message),
                    other => other,
                })?;
                Ok(Some(Value::Number(Decimal::from(n))))
            }
            Expr::Compare(op, a, b) => {
                let a = self.eval(a, scope)?.ok_or_else(|| unbound(expr))?;
                let b = self.eval(b, scope)?.ok_or_else(|| unbound(expr))?;
                compare(*op, &a, &b, expr).map(|r| Some(Value::Bool(r)))
            }
            Expr::Aggregate { func, distinct, arg } => {
                let Scope::Group { members, .. } = scope else {
                    return Err(type_error(expr, "aggregate outside of a grouped query"));
                };
                self.aggregate(expr, *func, *distinct, arg.as_deref(), members)
            }
        }
    }

    fn aggregate(
        &self,
        expr: &Expr,
        func: AggregateFn,
        distinct: bool,
        arg: Option<&Expr>,
        members: &[&Solution],
    ) -> Result<Option<Value>, EvalError> {
        let Some(arg) = arg else {
            return Ok(Some(Value::Number(Decimal::from(members.len()))));
        };
        let empty = HashMap::new();
        let mut values = Vec::with_capacity(members.len());
        for solution in members {
            let scope = Scope::Row {
                solution,
                aliases: &empty,
            };
            if let Some(v) = self.eval(arg, &scope)? {
                values.push(v);
            }
        }
        match func {
            AggregateFn::Count => {
                let n = if distinct {
                    values.iter().map(Value::key).collect::<HashSet<ValueKey>>().len()
                } else {
                    values.len()
                };
                Ok(Some(Value::Number(Decimal::from(n))))
            }
            AggregateFn::Min => Ok(values.into_iter().min_by(|a, b| a.total_cmp(b))),
            AggregateFn::Max => Ok(values.into_iter().max_by(|a, b| a.total_cmp(b))),
            AggregateFn::Sum => match numbers(expr, &values)? {
                Numbers::Exact(xs) => {
                    let mut total = Decimal::ZERO;
                    for x in xs {
                        total = total.checked_add(x).ok_or_else(|| EvalError::Overflow(expr.to_string()))?;
                    }
                    Ok(Some(Value::Number(total)))
                }
                Numbers::Float(xs) => Ok(Some(Value::Double(xs.iter().sum()))),
            },
            AggregateFn::Avg => {
                if values.is_empty() {
                    return Ok(None);
                }
                let xs = numbers(expr, &values)?.into_f64();
                Ok(Some(Value::Double(xs.iter().sum::<f64>() / xs.len() as f64)))
            }
            AggregateFn::Median => {
                if values.is_empty() {
                    return Ok(None);
                }
                match numbers(expr, &values)? {
                    Numbers::Exact(mut xs) => {
                        xs.sort();
                        let mid = xs.len() / 2;
                        let m = if xs.len() % 2 == 1 {
                            xs[mid]
                        } else {
                            xs[mid - 1]
                                .checked_add(xs[mid])
                                .ok_or_else(|| EvalError::Overflow(expr.to_string()))?
                                / Decimal::TWO
                        };
                        Ok(Some(Value::Number(m)))
                    }
                    Numbers::Float(mut xs) => {
                        xs.sort_by(f64::total_cmp);
                        let mid = xs.len() / 2;
                        let m = if xs.len() % 2 == 1 {
                            xs[mid]
                        } else {
                            (xs[mid - 1] + xs[mid]) / 2.0
                        };
                        Ok(Some(Value::Double(m)))
                    }
                }
            }
            AggregateFn::Stddev => {
                if values.is_empty() {
                    return Ok(None);
                }
                let xs = numbers(expr, &values)?.into_f64();
                Ok(Some(Value::Double(sample_stddev(&xs))))
            }
        }
    }
}

/// Sample standard deviation (n − 1 denominator); zero for a single value.
pub(crate) fn sample_stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

enum Numbers {
    Exact(Vec<Decimal>),
    Float(Vec<f64>),
}

impl Numbers {
    fn into_f64(self) -> Vec<f64> {
        match self {
            Numbers::Exact(xs) => xs.iter().map(|d| d.to_f64().unwrap_or(f64::NAN)).collect(),
            Numbers::Float(xs) => xs,
        }
    }
}

fn numbers(expr: &Expr, values: &[Value]) -> Result<Numbers, EvalError> {
    let mut exact = Vec::with_capacity(values.len());
    let mut all_exact = true;
    for v in values {
        match v.typed() {
            Typed::Exact(d) => exact.push(Some(d)),
            Typed::Double(_) => {
                all_exact = false;
                exact.push(None)
            }
            other => return Err(type_error(expr, format!("expected a number, found {}", other.kind_name()))),
        }
    }
    if all_exact {
        Ok(Numbers::Exact(exact.into_iter().flatten().collect()))
    } else {
        Ok(Numbers::Float(values.iter().filter_map(Value::as_f64).collect()))
    }
}

fn type_error(expr: &Expr, message: impl Into<String>) -> EvalError {
    EvalError::Type {
        expr: expr.to_string(),
        message: message.into(),
    }
}

fn unbound(expr: &Expr) -> EvalError {
    type_error(expr, "operand is unbound")
}

fn compare(op: CompareOp, a: &Value, b: &Value, expr: &Expr) -> Result<bool, EvalError> {
    let (ta, tb) = (a.typed(), b.typed());
    let ordering = match (ta, tb) {
        (Typed::Malformed(_), _) | (_, Typed::Malformed(_)) => {
            return Err(type_error(expr, "operand is an ill-typed literal"))
        }
        (Typed::Exact(x), Typed::Exact(y)) => Some(x.cmp(&y)),
        (x, y) if x.as_f64().is_some() && y.as_f64().is_some() => x.as_f64().partial_cmp(&y.as_f64()),
        (Typed::Date(x), Typed::Date(y)) => Some(x.cmp(&y)),
        (Typed::Str(x), Typed::Str(y)) => Some(x.cmp(y)),
        (Typed::Iri(x), Typed::Iri(y)) => {
            return match op {
                CompareOp::Eq => Ok(x == y),
                CompareOp::Ne => Ok(x != y),
                _ => Err(type_error(expr, "IRIs are not ordered")),
            }
        }
        (Typed::Bool(x), Typed::Bool(y)) => {
            return match op {
                CompareOp::Eq => Ok(x == y),
                CompareOp::Ne => Ok(x != y),
                _ => Err(type_error(expr, "booleans are not ordered")),
            }
        }
        (Typed::Iri(_), _) | (_, Typed::Iri(_)) if matches!(op, CompareOp::Eq | CompareOp::Ne) => {
            return Ok(op == CompareOp::Ne)
        }
        (x, y) => {
            return Err(type_error(
                expr,
                format!("cannot compare {} with {}", x.kind_name(), y.kind_name()),
            ))
        }
    };
    let Some(ordering) = ordering else {
        return Ok(op == CompareOp::Ne);
    };
    Ok(match op {
        CompareOp::Eq => ordering == Ordering::Equal,
        CompareOp::Ne => ordering != Ordering::Equal,
        CompareOp::Lt => ordering == Ordering::Less,
        CompareOp::Le => ordering != Ordering::Greater,
        CompareOp::Gt => ordering == Ordering::Greater,
        CompareOp::Ge => ordering != Ordering::Less,
    })
}

fn filter_passes(ctx: &Context<'_>, filter: &Expr, scope: &Scope<'_>) -> Result<bool, EvalError> {
    match ctx.eval(filter, scope)? {
        Some(Value::Bool(b)) => Ok(b),
        Some(other) => Err(type_error(
            filter,
            format!("FILTER needs a boolean, found {}", other.typed().kind_name()),
        )),
        None => Err(unbound(filter)),
    }
}

fn join(graph: &Graph, plan: &QueryPlan, slots: &HashMap<String, usize>) -> Vec<Solution> {
    let width = slots.len();
    let mut compiled = Vec::with_capacity(plan.patterns.len());
    for pattern in &plan.patterns {
        let mut positions = [Slot::Var(0); 3];
        for (slot, term) in positions.iter_mut().zip(pattern.positions()) {
            *slot = match term {
                PatternTerm::Var(v) => Slot::Var(slots[v]),
                PatternTerm::Term(t) => match graph.lookup(t) {
                    Some(id) => Slot::Const(id),
                    None => return Vec::new(),
                },
            };
        }
        compiled.push(positions);
    }

    let mut solutions: Vec<Solution> = vec![vec![None; width]];
    for positions in compiled {
        let mut next = Vec::new();
        for solution in &solutions {
            let key: IdPattern = positions.map(|slot| match slot {
                Slot::Const(id) => Some(id),
                Slot::Var(i) => solution[i],
            });
            'triples: for triple in graph.match_ids(key) {
                let mut extended = solution.clone();
                for (slot, id) in positions.iter().zip(triple) {
                    if let Slot::Var(i) = *slot {
                        match extended[i] {
                            None => extended[i] = Some(id),
                            Some(bound) if bound != id => continue 'triples,
                            Some(_) => {}
                        }
                    }
                }
                next.push(extended);
            }
        }
        solutions = next;
        if solutions.is_empty() {
            break;
        }
    }
    solutions
}

/// Evaluates a parsed query against a graph.
///
/// Triple patterns are joined left to right; each step probes the index
/// chosen by the positions already bound.
pub fn evaluate(graph: &Graph, plan: &QueryPlan) -> Result<SolutionTable, EvalError> {
    let slots: HashMap<String, usize> = plan
        .pattern_vars()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let ctx = Context { graph, slots };
    let no_aliases = HashMap::new();

    let mut solutions = join(graph, plan, &ctx.slots);
    if !plan.filters.is_empty() {
        let mut kept = Vec::with_capacity(solutions.len());
        for solution in solutions {
            let scope = Scope::Row {
                solution: &solution,
                aliases: &no_aliases,
            };
            let mut pass = true;
            for filter in &plan.filters {
                if !filter_passes(&ctx, filter, &scope)? {
                    pass = false;
                    break;
                }
            }
            if pass {
                kept.push(solution);
            }
        }
        solutions = kept;
    }

    let header: Vec<String> = plan.projection.iter().map(|p| p.name.clone()).collect();
    let mut rows: Vec<(Row, Row)> = Vec::new();

    if plan.is_aggregate() {
        let mut order: Vec<Vec<Option<ValueKey>>> = Vec::new();
        let mut groups: HashMap<Vec<Option<ValueKey>>, (Row, Vec<&Solution>)> = HashMap::new();
        if plan.group_by.is_empty() {
            order.push(Vec::new());
            groups.insert(Vec::new(), (Vec::new(), solutions.iter().collect()));
        } else {
            for solution in &solutions {
                let scope = Scope::Row {
                    solution,
                    aliases: &no_aliases,
                };
                let mut values = Vec::with_capacity(plan.group_by.len());
                for key in &plan.group_by {
                    values.push(ctx.eval(&key.expr, &scope)?);
                }
                let key: Vec<Option<ValueKey>> = values.iter().map(|v| v.as_ref().map(Value::key)).collect();
                groups
                    .entry(key.clone())
                    .or_insert_with(|| {
                        order.push(key);
                        (values, Vec::new())
                    })
                    .1
                    .push(solution);
            }
        }
        for key in order {
            let (values, members) = &groups[&key];
            let mut aliases: HashMap<String, Option<Value>> = plan
                .group_by
                .iter()
                .map(|k| k.name.clone())
                .zip(values.iter().cloned())
                .collect();
            let mut cells = Vec::with_capacity(plan.projection.len());
            for item in &plan.projection {
                let scope = Scope::Group {
                    members,
                    aliases: &aliases,
                };
                let v = ctx.eval(&item.expr, &scope)?;
                aliases.insert(item.name.clone(), v.clone());
                cells.push(v);
            }
            let scope = Scope::Group {
                members,
                aliases: &aliases,
            };
            let mut keys = Vec::with_capacity(plan.order_by.len());
            for key in &plan.order_by {
                keys.push(ctx.eval(&key.expr, &scope)?);
            }
            rows.push((cells, keys));
        }
    } else {
        for solution in &solutions {
            let mut aliases = HashMap::new();
            let mut cells = Vec::with_capacity(plan.projection.len());
            for item in &plan.projection {
                let scope = Scope::Row {
                    solution,
                    aliases: &aliases,
                };
                let v = ctx.eval(&item.expr, &scope)?;
                aliases.insert(item.name.clone(), v.clone());
                cells.push(v);
            }
            let scope = Scope::Row {
                solution,
                aliases: &aliases,
            };
            let mut keys = Vec::with_capacity(plan.order_by.len());
            for key in &plan.order_by {
                keys.push(ctx.eval(&key.expr, &scope)?);
            }
            rows.push((cells, keys));
        }
    }

    if !plan.order_by.is_empty() {
        rows.sort_by(|(cells_a, keys_a), (cells_b, keys_b)| {
            plan.order_by
                .iter()
                .zip(keys_a.iter().zip(keys_b))
                .map(|(key, (a, b))| {
                    let o = cmp_cells(a, b);
                    if key.descending {
                        o.reverse()
                    } else {
                        o
                    }
                })
                .find(|o| o.is_ne())
                .unwrap_or_else(|| cmp_rows(cells_a, cells_b))
        });
    }
    let mut rows: Vec<Vec<Option<Value>>> = rows.into_iter().map(|(cells, _)| cells).collect();
    if let Some(limit) = plan.limit {
        rows.truncate(limit);
    }
    Ok(SolutionTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;
    use crate::rdf::{Iri, Literal, Triple};
    use chrono::NaiveDate;

    const P: &str = "PREFIX : <https://ex.org/>\n";

    fn iri(local: &str) -> Iri {
        Iri::new(format!("https://ex.org/{local}")).unwrap()
    }

    fn contract(g: &mut Graph, id: &str, inst: &str, amount: i64, date: &str) {
        let c = iri(id);
        g.insert(Triple::new(c.clone(), Iri::new(crate::rdf::RDF_TYPE).unwrap(), iri("Contract")));
        g.insert(Triple::new(c.clone(), iri("hasInstitution"), iri(inst)));
        g.insert(Triple::new(c.clone(), iri("hasAmount"), Literal::integer(amount)));
        g.insert(Triple::new(
            c,
            iri("hasDate"),
            Literal::date(NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap()),
        ));
    }

    fn run(g: &Graph, q: &str) -> SolutionTable {
        evaluate(g, &parse_query(&format!("{P}{q}")).unwrap()).unwrap()
    }

    fn num(v: i64) -> Option<Value> {
        Some(Value::Number(Decimal::from(v)))
    }

    #[test]
    fn count_and_sum() {
        let mut g = Graph::new();
        contract(&mut g, "c1", "i1", 100, "2020-01-01");
        contract(&mut g, "c2", "i1", 200, "2020-02-01");
        let t = run(&g, "SELECT (COUNT(?c) AS ?n) WHERE { ?c a :Contract }");
        assert_eq!(t.rows, vec![vec![num(2)]]);
        let t = run(&g, "SELECT (SUM(?a) AS ?t) WHERE { ?c :hasAmount ?a }");
        assert_eq!(t.rows, vec![vec![num(300)]]);
    }

    #[test]
    fn group_by_counts() {
        let mut g = Graph::new();
        for (i, inst) in ["a", "a", "a", "b", "b"].iter().enumerate() {
            contract(&mut g, &format!("c{i}"), inst, 10, "2020-01-01");
        }
        let t = run(
            &g,
            "SELECT ?i (COUNT(?c) AS ?n) WHERE { ?c :hasInstitution ?i } GROUP BY ?i ORDER BY DESC(?n)",
        );
        assert_eq!(t.len(), 2);
        assert_eq!(t.get(0, "n"), num(3).as_ref());
        assert_eq!(t.get(1, "n"), num(2).as_ref());
    }

    #[test]
    fn empty_graph_aggregates() {
        let g = Graph::new();
        let t = run(
            &g,
            "SELECT (COUNT(?c) AS ?n) (SUM(?a) AS ?s) (AVG(?a) AS ?m) WHERE { ?c :hasAmount ?a }",
        );
        assert_eq!(t.rows, vec![vec![num(0), num(0), None]]);
        let t = run(&g, "SELECT ?c (COUNT(?a) AS ?n) WHERE { ?c :hasAmount ?a } GROUP BY ?c");
        assert!(t.is_empty());
    }

    #[test]
    fn quarter_values() {
        for (date, q) in [("2021-01-15", 1), ("2021-03-31", 1), ("2021-04-01", 2), ("2021-12-31", 4)] {
            let v = Value::Term(Literal::new(date, crate::rdf::Datatype::Date).into());
            assert_eq!(builtin_temporal(Temporal::Quarter, &v).unwrap(), q);
        }
    }

    #[test]
    fn date_vs_number_is_a_type_error() {
        let mut g = Graph::new();
        contract(&mut g, "c1", "i1", 100, "2020-01-01");
        let plan = parse_query(&format!("{P}SELECT ?c WHERE {{ ?c :hasDate ?d FILTER(?d > 5) }}")).unwrap();
        assert!(matches!(evaluate(&g, &plan), Err(EvalError::Type { .. })));
    }

    #[test]
    fn filters_and_temporal_grouping() {
        let mut g = Graph::new();
        contract(&mut g, "c1", "i1", 100, "2020-01-10");
        contract(&mut g, "c2", "i1", 300, "2020-05-10");
        contract(&mut g, "c3", "i2", 500, "2021-11-10");
        let t = run(
            &g,
            "SELECT ?y ?q (MEDIAN(?a) AS ?m) (STDDEV(?a) AS ?s) WHERE { ?c :hasAmount ?a ; :hasDate ?d
               FILTER(?a >= 100) } GROUP BY (YEAR(?d) AS ?y) (QUARTER(?d) AS ?q) ORDER BY ?y ?q",
        );
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows[0][0], num(2020));
        assert_eq!(t.rows[1][1], num(2));
        assert_eq!(t.rows[2][2], num(500));
        assert_eq!(t.rows[2][3], Some(Value::Double(0.0)));
        let t = run(&g, "SELECT (MEDIAN(?a) AS ?m) (STDDEV(?a) AS ?s) WHERE { ?c :hasAmount ?a }");
        assert_eq!(t.rows[0][0], num(300));
        assert_eq!(t.rows[0][1], Some(Value::Double(200.0)));
    }

    #[test]
    fn repeated_variables_must_agree() {
        let mut g = Graph::new();
        g.insert(Triple::new(iri("a"), iri("p"), iri("a")));
        g.insert(Triple::new(iri("a"), iri("p"), iri("b")));
        let t = run(&g, "SELECT ?x WHERE { ?x :p ?x }");
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn order_limit_and_output() {
        let mut g = Graph::new();
        contract(&mut g, "c1", "i1", 100, "2020-01-10");
        contract(&mut g, "c2", "i1", 300, "2020-05-10");
        let t = run(&g, "SELECT ?c ?a WHERE { ?c :hasAmount ?a } ORDER BY DESC(?a) LIMIT 1");
        assert_eq!(t.to_csv(), "c,a\nhttps://ex.org/c2,300\n");
        assert_eq!(
            t.to_json(),
            serde_json::json!({"head": ["c", "a"], "rows": [{"c": "https://ex.org/c2", "a": "300"}]})
        );
    }
}
