//! Random graphs and subset-grammar queries, with a brute-force evaluator
//! that shares nothing with the engine beyond the term types.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;

use procurekg::query::{CompareOp, SolutionTable, Value};
use procurekg::rdf::{Datatype, Graph, Iri, Literal, Term, Triple};

const NS: &str = "http://t.example/";
const VARS: [&str; 4] = ["a", "b", "c", "d"];
const INT_PREDICATES: [&str; 2] = ["p0", "p1"];
const IRI_PREDICATE: &str = "p2";
const DATE_PREDICATE: &str = "p3";

fn iri(local: &str) -> Iri {
    Iri::new(format!("{NS}{local}")).unwrap()
}

fn subject_pool() -> Vec<Iri> {
    (0..6).map(|i| iri(&format!("s{i}"))).collect()
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
}

fn random_date(rng: &mut impl Rng) -> NaiveDate {
    epoch() + Duration::days(rng.gen_range(0..=400))
}

fn random_object(rng: &mut impl Rng, predicate: &str) -> Term {
    match predicate {
        "p0" | "p1" => Literal::integer(rng.gen_range(-3..=12)).into(),
        "p3" => Literal::date(random_date(rng)).into(),
        _ => subject_pool().choose(rng).unwrap().clone().into(),
    }
}

fn all_predicates() -> [&'static str; 4] {
    [INT_PREDICATES[0], INT_PREDICATES[1], IRI_PREDICATE, DATE_PREDICATE]
}

pub fn random_graph(rng: &mut impl Rng) -> Graph {
    let mut graph = Graph::new();
    let n = rng.gen_range(0..=200);
    let subjects = subject_pool();
    for _ in 0..n {
        let s = subjects.choose(rng).unwrap().clone();
        let p = *all_predicates().choose(rng).unwrap();
        let o = random_object(rng, p);
        graph.insert(Triple::new(s, iri(p), o));
    }
    graph
}

#[derive(Debug, Clone)]
pub enum PTerm {
    Var(usize),
    Const(Term),
}

#[derive(Debug, Clone)]
pub enum Operand {
    Var(usize),
    Year(usize),
    Month(usize),
    Const(Term),
}

#[derive(Debug, Clone)]
pub struct Filter {
    pub left: Operand,
    pub op: CompareOp,
    pub right: Operand,
}

#[derive(Debug, Clone)]
pub enum Item {
    Var(usize),
    Year(usize, String),
}

#[derive(Debug, Clone, Copy)]
pub enum Agg {
    CountStar,
    Count(usize, bool),
    Sum(usize),
    Avg(usize),
    Min(usize),
    Max(usize),
    Median(usize),
    Stddev(usize),
}

#[derive(Debug, Clone)]
pub enum Form {
    Select {
        items: Vec<Item>,
        /// (item index, descending)
        order: Vec<(usize, bool)>,
        limit: Option<usize>,
    },
    Aggregate {
        keys: Vec<Item>,
        aggs: Vec<Agg>,
    },
}

#[derive(Debug, Clone)]
pub struct QuerySpec {
    pub patterns: Vec<[PTerm; 3]>,
    pub filters: Vec<Filter>,
    pub form: Form,
}

impl QuerySpec {
    pub fn is_ordered(&self) -> bool {
        matches!(&self.form, Form::Select { order, .. } if !order.is_empty())
    }

    fn pattern_vars(&self) -> Vec<usize> {
        let mut vars = Vec::new();
        for p in &self.patterns {
            for t in p {
                if let PTerm::Var(v) = t {
                    if !vars.contains(v) {
                        vars.push(*v);
                    }
                }
            }
        }
        vars
    }

    /// Variables bound as the object of a constant predicate of the given kind.
    fn vars_of_kind(&self, predicates: &[&str]) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for p in &self.patterns {
            if let (PTerm::Const(Term::Iri(pred)), PTerm::Var(v)) = (&p[1], &p[2]) {
                if predicates.iter().any(|name| pred.as_str() == format!("{NS}{name}")) {
                    out.insert(*v);
                }
            }
        }
        out.into_iter().collect()
    }

    fn subject_vars(&self) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for p in &self.patterns {
            if let PTerm::Var(v) = p[0] {
                out.insert(v);
            }
        }
        out.into_iter().collect()
    }
}

pub fn random_query(rng: &mut impl Rng) -> QuerySpec {
    let subjects = subject_pool();
    let n_patterns = rng.gen_range(1..=3);
    let mut patterns = Vec::new();
    for _ in 0..n_patterns {
        let subject = if rng.gen_bool(0.75) {
            PTerm::Var(rng.gen_range(0..VARS.len()))
        } else {
            PTerm::Const(subjects.choose(rng).unwrap().clone().into())
        };
        let (predicate, kind) = if rng.gen_bool(0.85) {
            let p = *all_predicates().choose(rng).unwrap();
            (PTerm::Const(iri(p).into()), Some(p))
        } else {
            (PTerm::Var(rng.gen_range(0..VARS.len())), None)
        };
        let object = if rng.gen_bool(0.7) {
            PTerm::Var(rng.gen_range(0..VARS.len()))
        } else {
            let p = kind.unwrap_or_else(|| *all_predicates().choose(rng).unwrap());
            PTerm::Const(random_object(rng, p))
        };
        patterns.push([subject, predicate, object]);
    }
    let mut spec = QuerySpec {
        patterns,
        filters: Vec::new(),
        form: Form::Select {
            items: Vec::new(),
            order: Vec::new(),
            limit: None,
        },
    };
    let vars = spec.pattern_vars();
    let ints = spec.vars_of_kind(&INT_PREDICATES);
    let dates = spec.vars_of_kind(&[DATE_PREDICATE]);
    let subject_vars = spec.subject_vars();
    let ops = [CompareOp::Eq, CompareOp::Ne, CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge];

    for _ in 0..rng.gen_range(0..=2) {
        let choice = rng.gen_range(0..3);
        let op = *ops.choose(rng).unwrap();
        let filter = if choice == 0 && !ints.is_empty() {
            Filter {
                left: Operand::Var(*ints.choose(rng).unwrap()),
                op,
                right: Operand::Const(Literal::integer(rng.gen_range(-2..=11)).into()),
            }
        } else if choice == 1 && !dates.is_empty() {
            let v = *dates.choose(rng).unwrap();
            if rng.gen_bool(0.5) {
                Filter {
                    left: Operand::Var(v),
                    op,
                    right: Operand::Const(Literal::date(random_date(rng)).into()),
                }
            } else {
                Filter {
                    left: Operand::Month(v),
                    op,
                    right: Operand::Const(Literal::integer(rng.gen_range(1..=12)).into()),
                }
            }
        } else if !subject_vars.is_empty() {
            Filter {
                left: Operand::Var(*subject_vars.choose(rng).unwrap()),
                op: if rng.gen_bool(0.5) { CompareOp::Eq } else { CompareOp::Ne },
                right: Operand::Const(subjects.choose(rng).unwrap().clone().into()),
            }
        } else {
            continue;
        };
        spec.filters.push(filter);
    }

    if vars.is_empty() || rng.gen_bool(0.45) {
        let mut keys = Vec::new();
        if !vars.is_empty() && rng.gen_bool(0.75) {
            let mut pool = vars.clone();
            pool.shuffle(rng);
            for &v in pool.iter().take(rng.gen_range(1..=2)) {
                if dates.contains(&v) && rng.gen_bool(0.5) {
                    keys.push(Item::Year(v, format!("y{v}")));
                } else {
                    keys.push(Item::Var(v));
                }
            }
        }
        let mut aggs = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let any = vars.choose(rng).copied();
            let int = ints.choose(rng).copied();
            let agg = match (rng.gen_range(0..8), any, int) {
                (0, _, _) | (_, None, _) => Agg::CountStar,
                (1, Some(v), _) => Agg::Count(v, rng.gen_bool(0.5)),
                (2, _, Some(v)) => Agg::Sum(v),
                (3, _, Some(v)) => Agg::Avg(v),
                (4, Some(v), _) => Agg::Min(v),
                (5, Some(v), _) => Agg::Max(v),
                (6, _, Some(v)) => Agg::Median(v),
                (7, _, Some(v)) => Agg::Stddev(v),
                (_, Some(v), _) => Agg::Count(v, false),
            };
            aggs.push(agg);
        }
        spec.form = Form::Aggregate { keys, aggs };
    } else {
        let mut pool = vars.clone();
        pool.shuffle(rng);
        let mut items: Vec<Item> = pool
            .iter()
            .take(rng.gen_range(1..=pool.len()))
            .map(|&v| Item::Var(v))
            .collect();
        if let Some(&d) = dates.choose(rng) {
            if rng.gen_bool(0.4) {
                items.push(Item::Year(d, format!("y{d}")));
            }
        }
        let mut order = Vec::new();
        let mut limit = None;
        if rng.gen_bool(0.5) {
            let mut idx: Vec<usize> = (0..items.len()).collect();
            idx.shuffle(rng);
            for &i in idx.iter().take(rng.gen_range(1..=items.len())) {
                order.push((i, rng.gen_bool(0.5)));
            }
            if rng.gen_bool(0.5) {
                limit = Some(rng.gen_range(0..=8));
            }
        }
        spec.form = Form::Select { items, order, limit };
    }
    spec
}

fn term_text(t: &Term, use_prefix: bool) -> String {
    match t {
        Term::Iri(i) if use_prefix => format!("t:{}", &i.as_str()[NS.len()..]),
        Term::Literal(l) if l.datatype() == Datatype::Integer => l.lexical().to_string(),
        Term::Literal(l) if l.datatype() == Datatype::Date => format!("\"{}\"^^xsd:date", l.lexical()),
        other => other.to_string(),
    }
}

fn var(v: usize) -> String {
    format!("?{}", VARS[v])
}

fn render_operand(o: &Operand, use_prefix: bool) -> String {
    match o {
        Operand::Var(v) => var(*v),
        Operand::Year(v) => format!("YEAR({})", var(*v)),
        Operand::Month(v) => format!("MONTH({})", var(*v)),
        Operand::Const(t) => term_text(t, use_prefix),
    }
}

fn render_item(item: &Item) -> String {
    match item {
        Item::Var(v) => var(*v),
        Item::Year(v, alias) => format!("(YEAR({}) AS ?{alias})", var(*v)),
    }
}

fn item_name(item: &Item) -> String {
    match item {
        Item::Var(v) => VARS[*v].to_string(),
        Item::Year(_, alias) => alias.clone(),
    }
}

fn render_agg(agg: &Agg) -> String {
    match *agg {
        Agg::CountStar => "COUNT(*)".into(),
        Agg::Count(v, true) => format!("COUNT(DISTINCT {})", var(v)),
        Agg::Count(v, false) => format!("COUNT({})", var(v)),
        Agg::Sum(v) => format!("SUM({})", var(v)),
        Agg::Avg(v) => format!("AVG({})", var(v)),
        Agg::Min(v) => format!("MIN({})", var(v)),
        Agg::Max(v) => format!("MAX({})", var(v)),
        Agg::Median(v) => format!("MEDIAN({})", var(v)),
        Agg::Stddev(v) => format!("STDDEV({})", var(v)),
    }
}

/// Query text; IRIs are written prefixed or in full depending on `use_prefix`.
pub fn render(spec: &QuerySpec, use_prefix: bool) -> String {
    let mut q = String::from("PREFIX t: <http://t.example/>\nSELECT");
    match &spec.form {
        Form::Select { items, .. } => {
            for item in items {
                q.push(' ');
                q.push_str(&render_item(item));
            }
        }
        Form::Aggregate { keys, aggs } => {
            for key in keys {
                q.push(' ');
                q.push_str(&match key {
                    Item::Var(v) => var(*v),
                    Item::Year(_, alias) => format!("?{alias}"),
                });
            }
            for (i, agg) in aggs.iter().enumerate() {
                q.push_str(&format!(" ({} AS ?g{i})", render_agg(agg)));
            }
        }
    }
    q.push_str("\nWHERE {\n");
    for p in &spec.patterns {
        let parts: Vec<String> = p
            .iter()
            .map(|t| match t {
                PTerm::Var(v) => var(*v),
                PTerm::Const(t) => term_text(t, use_prefix),
            })
            .collect();
        q.push_str(&format!("  {} {} {} .\n", parts[0], parts[1], parts[2]));
    }
    for f in &spec.filters {
        q.push_str(&format!(
            "  FILTER({} {} {})\n",
            render_operand(&f.left, use_prefix),
            f.op.symbol(),
            render_operand(&f.right, use_prefix)
        ));
    }
    q.push('}');
    match &spec.form {
        Form::Select { items, order, limit } => {
            if !order.is_empty() {
                q.push_str("\nORDER BY");
                for &(i, desc) in order {
                    let name = format!("?{}", item_name(&items[i]));
                    if desc {
                        q.push_str(&format!(" DESC({name})"));
                    } else {
                        q.push_str(&format!(" {name}"));
                    }
                }
            }
            if let Some(n) = limit {
                q.push_str(&format!("\nLIMIT {n}"));
            }
        }
        Form::Aggregate { keys, .. } => {
            if !keys.is_empty() {
                q.push_str("\nGROUP BY");
                for key in keys {
                    q.push(' ');
                    q.push_str(&render_item(key));
                }
            }
        }
    }
    q
}

/// Oracle-side cell.
#[derive(Debug, Clone, PartialEq)]
pub enum OCell {
    Term(Term),
    Int(i64),
    /// Exact value of a halved integer sum (even-count medians).
    Half(i64),
    Real(f64),
    Unbound,
}

fn int_of(t: &Term) -> Option<i64> {
    match t {
        Term::Literal(l) if l.datatype() == Datatype::Integer => l.lexical().parse().ok(),
        _ => None,
    }
}

fn date_of(t: &Term) -> Option<NaiveDate> {
    match t {
        Term::Literal(l) if l.datatype() == Datatype::Date => NaiveDate::parse_from_str(l.lexical(), "%Y-%m-%d").ok(),
        _ => None,
    }
}

/// (rank, numeric value, text) ordering shared by ORDER BY, MIN and MAX:
/// IRIs, then numbers, then dates.
fn ocmp(a: &OCell, b: &OCell) -> Ordering {
    fn key(c: &OCell) -> (u8, f64, String) {
        match c {
            OCell::Unbound => (0, 0.0, String::new()),
            OCell::Term(Term::Iri(i)) => (1, 0.0, i.as_str().to_string()),
            OCell::Term(t) if int_of(t).is_some() => (3, int_of(t).unwrap() as f64, String::new()),
            OCell::Term(t) => (4, 0.0, date_of(t).map(|d| d.to_string()).unwrap_or_default()),
            OCell::Int(i) => (3, *i as f64, String::new()),
            OCell::Half(s) => (3, *s as f64 / 2.0, String::new()),
            OCell::Real(x) => (3, *x, String::new()),
        }
    }
    let (ka, kb) = (key(a), key(b));
    ka.0.cmp(&kb.0)
        .then(ka.1.partial_cmp(&kb.1).unwrap_or(Ordering::Equal))
        .then_with(|| ka.2.cmp(&kb.2))
}

type Binding = Vec<Option<Term>>;

fn operand_value(o: &Operand, b: &Binding) -> OCell {
    match o {
        Operand::Var(v) => OCell::Term(b[*v].clone().unwrap()),
        Operand::Year(v) => OCell::Int(date_of(b[*v].as_ref().unwrap()).unwrap().year() as i64),
        Operand::Month(v) => OCell::Int(date_of(b[*v].as_ref().unwrap()).unwrap().month() as i64),
        Operand::Const(t) => OCell::Term(t.clone()),
    }
}

fn filter_holds(f: &Filter, b: &Binding) -> bool {
    let (l, r) = (operand_value(&f.left, b), operand_value(&f.right, b));
    let as_int = |c: &OCell| match c {
        OCell::Int(i) => Some(*i),
        OCell::Term(t) => int_of(t),
        _ => None,
    };
    let ord = if let (Some(x), Some(y)) = (as_int(&l), as_int(&r)) {
        x.cmp(&y)
    } else if let (OCell::Term(x), OCell::Term(y)) = (&l, &r) {
        match (date_of(x), date_of(y)) {
            (Some(dx), Some(dy)) => dx.cmp(&dy),
            _ => {
                let equal = x == y;
                return match f.op {
                    CompareOp::Eq => equal,
                    CompareOp::Ne => !equal,
                    _ => panic!("ordering comparison between IRIs generated"),
                };
            }
        }
    } else {
        panic!("unexpected operand types in {f:?}");
    };
    match f.op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::Ne => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    }
}

fn bindings(spec: &QuerySpec, triples: &[Triple]) -> Vec<Binding> {
    let mut out = vec![vec![None; VARS.len()]];
    for pattern in &spec.patterns {
        let mut next = Vec::new();
        for b in &out {
            for t in triples {
                let values = [Term::Iri(t.subject.clone()), Term::Iri(t.predicate.clone()), t.object.clone()];
                let mut nb = b.clone();
                let ok = pattern.iter().zip(values).all(|(p, value)| match p {
                    PTerm::Const(c) => *c == value,
                    PTerm::Var(v) => match &nb[*v] {
                        Some(bound) => *bound == value,
                        None => {
                            nb[*v] = Some(value);
                            true
                        }
                    },
                });
                if ok {
                    next.push(nb);
                }
            }
        }
        out = next;
    }
    out.into_iter()
        .filter(|b| spec.filters.iter().all(|f| filter_holds(f, b)))
        .collect()
}

fn item_value(item: &Item, b: &Binding) -> OCell {
    match item {
        Item::Var(v) => OCell::Term(b[*v].clone().unwrap()),
        Item::Year(v, _) => OCell::Int(date_of(b[*v].as_ref().unwrap()).unwrap().year() as i64),
    }
}

fn aggregate(agg: Agg, members: &[&Binding]) -> OCell {
    let values = |v: usize| -> Vec<Term> { members.iter().map(|b| b[v].clone().unwrap()).collect() };
    let ints = |v: usize| -> Vec<i64> { values(v).iter().map(|t| int_of(t).unwrap()).collect() };
    match agg {
        Agg::CountStar => OCell::Int(members.len() as i64),
        Agg::Count(v, false) => OCell::Int(values(v).len() as i64),
        Agg::Count(v, true) => {
            let mut seen: Vec<Term> = Vec::new();
            for t in values(v) {
                if !seen.contains(&t) {
                    seen.push(t);
                }
            }
            OCell::Int(seen.len() as i64)
        }
        Agg::Sum(v) => OCell::Int(ints(v).iter().sum()),
        Agg::Avg(v) => {
            let xs = ints(v);
            if xs.is_empty() {
                OCell::Unbound
            } else {
                OCell::Real(xs.iter().sum::<i64>() as f64 / xs.len() as f64)
            }
        }
        Agg::Min(v) | Agg::Max(v) => {
            let cells: Vec<OCell> = values(v).into_iter().map(OCell::Term).collect();
            let pick = if matches!(agg, Agg::Min(_)) {
                cells.into_iter().min_by(ocmp)
            } else {
                cells.into_iter().max_by(ocmp)
            };
            pick.unwrap_or(OCell::Unbound)
        }
        Agg::Median(v) => {
            let mut xs = ints(v);
            xs.sort();
            match xs.len() {
                0 => OCell::Unbound,
                n if n % 2 == 1 => OCell::Int(xs[n / 2]),
                n => OCell::Half(xs[n / 2 - 1] + xs[n / 2]),
            }
        }
        Agg::Stddev(v) => {
            let xs: Vec<f64> = ints(v).iter().map(|&x| x as f64).collect();
            match xs.len() {
                0 => OCell::Unbound,
                1 => OCell::Real(0.0),
                n => {
                    let mean = xs.iter().sum::<f64>() / n as f64;
                    OCell::Real((xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt())
                }
            }
        }
    }
}

/// Brute-force evaluation: nested loops over every triple, no indexes.
pub fn oracle(spec: &QuerySpec, graph: &Graph) -> Vec<Vec<OCell>> {
    let triples: Vec<Triple> = graph.triples().collect();
    let solutions = bindings(spec, &triples);
    match &spec.form {
        Form::Select { items, order, limit } => {
            let mut rows: Vec<Vec<OCell>> = solutions
                .iter()
                .map(|b| items.iter().map(|i| item_value(i, b)).collect())
                .collect();
            if !order.is_empty() {
                rows.sort_by(|x, y| {
                    for &(i, desc) in order {
                        let o = ocmp(&x[i], &y[i]);
                        let o = if desc { o.reverse() } else { o };
                        if o.is_ne() {
                            return o;
                        }
                    }
                    x.iter().zip(y).map(|(a, b)| ocmp(a, b)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
                });
            }
            if let Some(n) = limit {
                rows.truncate(*n);
            }
            rows
        }
        Form::Aggregate { keys, aggs } => {
            let mut groups: Vec<(Vec<OCell>, Vec<&Binding>)> = Vec::new();
            if keys.is_empty() {
                groups.push((Vec::new(), solutions.iter().collect()));
            } else {
                let mut index: HashMap<String, usize> = HashMap::new();
                for b in &solutions {
                    let key: Vec<OCell> = keys.iter().map(|k| item_value(k, b)).collect();
                    let id = format!("{key:?}");
                    let slot = *index.entry(id).or_insert_with(|| {
                        groups.push((key, Vec::new()));
                        groups.len() - 1
                    });
                    groups[slot].1.push(b);
                }
            }
            groups
                .into_iter()
                .map(|(mut key, members)| {
                    key.extend(aggs.iter().map(|&a| aggregate(a, &members)));
                    key
                })
                .collect()
        }
    }
}

/// Comparable rendering of one cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Exact(String),
    Real(f64),
    Unbound,
}

impl Cell {
    fn exact_key(&self) -> String {
        match self {
            Cell::Exact(s) => s.clone(),
            Cell::Real(_) => "<real>".into(),
            Cell::Unbound => "<unbound>".into(),
        }
    }
}

fn half_text(sum: i64) -> String {
    if sum % 2 == 0 {
        (sum / 2).to_string()
    } else {
        format!("{}{}.5", if sum < 0 { "-" } else { "" }, sum.abs() / 2)
    }
}

pub fn oracle_cells(rows: Vec<Vec<OCell>>) -> Vec<Vec<Cell>> {
    rows.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| match c {
                    OCell::Term(t) => Cell::Exact(t.to_string()),
                    OCell::Int(i) => Cell::Exact(i.to_string()),
                    OCell::Half(s) => Cell::Exact(half_text(s)),
                    OCell::Real(x) => Cell::Real(x),
                    OCell::Unbound => Cell::Unbound,
                })
                .collect()
        })
        .collect()
}

pub fn engine_cells(table: &SolutionTable) -> Vec<Vec<Cell>> {
    table
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| match c {
                    None => Cell::Unbound,
                    Some(Value::Term(t)) => Cell::Exact(t.to_string()),
                    Some(Value::Number(d)) => Cell::Exact(d.normalize().to_string()),
                    Some(Value::Double(x)) => Cell::Real(*x),
                    Some(Value::Bool(b)) => Cell::Exact(b.to_string()),
                })
                .collect()
        })
        .collect()
}

fn cells_match(a: &Cell, b: &Cell, rel: f64) -> bool {
    match (a, b) {
        (Cell::Real(x), Cell::Real(y)) => (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-300) || x == y,
        _ => a == b,
    }
}

/// Multiset equality (or sequence equality when `ordered`) with a relative
/// tolerance on real-valued cells.
pub fn same_results(mut engine: Vec<Vec<Cell>>, mut expected: Vec<Vec<Cell>>, ordered: bool, rel: f64) -> bool {
    if engine.len() != expected.len() {
        return false;
    }
    if !ordered {
        let key = |r: &Vec<Cell>| r.iter().map(Cell::exact_key).collect::<Vec<_>>();
        engine.sort_by_key(key);
        expected.sort_by_key(key);
    }
    engine
        .iter()
        .zip(&expected)
        .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| cells_match(x, y, rel)))
}
