//! RDF data model, an interned in-memory triple store and N-Triples I/O.
//!
//! Every term is interned once into a [`TermId`]; the graph keeps three
//! sorted permutation indexes (SPO, POS, OSP) so that any pattern with at
//! least one bound position is answered by a range scan over exactly the
//! triples sharing the bound key.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::NaiveDate;
use thiserror::Error;

pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RdfError {
    #[error("invalid IRI `{iri}`: {reason}")]
    InvalidIri { iri: String, reason: &'static str },
    #[error("unsupported datatype <{0}>")]
    UnsupportedDatatype(String),
    #[error("literal not allowed in {0} position")]
    LiteralPosition(&'static str),
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

/// An absolute IRI. Unicode letters are allowed; whitespace, control
/// characters and the N-Triples-forbidden ASCII set are not.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(transparent)]
pub struct Iri(String);

impl Iri {
    pub fn new(iri: impl Into<String>) -> Result<Self, RdfError> {
        let iri = iri.into();
        let fail = |reason| RdfError::InvalidIri {
            iri: iri.clone(),
            reason,
        };
        let Some(colon) = iri.find(':') else {
            return Err(fail("missing scheme"));
        };
        let scheme = &iri[..colon];
        let mut chars = scheme.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return Err(fail("scheme must start with a letter")),
        }
        if !chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')) {
            return Err(fail("malformed scheme"));
        }
        if iri.chars().any(|c| {
            c.is_whitespace()
                || c.is_control()
                || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
        }) {
            return Err(fail("contains a forbidden character"));
        }
        Ok(Iri(iri))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

/// The XML Schema datatypes a literal may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Datatype {
    String,
    Integer,
    Decimal,
    Date,
}

impl Datatype {
    pub const ALL: [Datatype; 4] = [
        Datatype::String,
        Datatype::Integer,
        Datatype::Decimal,
        Datatype::Date,
    ];

    pub fn local_name(self) -> &'static str {
        match self {
            Datatype::String => "string",
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Date => "date",
        }
    }

    pub fn iri(self) -> String {
        format!("{XSD}{}", self.local_name())
    }

    pub fn from_local_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.local_name() == name)
    }

    pub fn from_iri(iri: &str) -> Option<Self> {
        iri.strip_prefix(XSD).and_then(Self::from_local_name)
    }
}

/// A typed literal. The lexical form is not checked against the datatype:
/// ill-typed literals are representable so that validation can report them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    lexical: String,
    datatype: Datatype,
}

impl Literal {
    pub fn new(lexical: impl Into<String>, datatype: Datatype) -> Self {
        Literal {
            lexical: lexical.into(),
            datatype,
        }
    }

    pub fn string(value: impl Into<String>) -> Self {
        Self::new(value, Datatype::String)
    }

    pub fn integer(value: i64) -> Self {
        Self::new(value.to_string(), Datatype::Integer)
    }

    pub fn decimal(value: impl fmt::Display) -> Self {
        Self::new(value.to_string(), Datatype::Decimal)
    }

    pub fn date(value: NaiveDate) -> Self {
        Self::new(value.format("%Y-%m-%d").to_string(), Datatype::Date)
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> Datatype {
        self.datatype
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("\"")?;
        for c in self.lexical.chars() {
            match c {
                '"' => f.write_str("\\\"")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                '\r' => f.write_str("\\r")?,
                '\t' => f.write_str("\\t")?,
                c if c.is_control() => write!(f, "\\u{:04X}", c as u32)?,
                c => write!(f, "{c}")?,
            }
        }
        f.write_str("\"")?;
        if self.datatype != Datatype::String {
            write!(f, "^^<{}>", self.datatype.iri())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn iri(iri: impl Into<String>) -> Result<Self, RdfError> {
        Iri::new(iri).map(Term::Iri)
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            Term::Iri(_) => None,
        }
    }

    /// The IRI text or the literal's lexical form.
    pub fn text(&self) -> &str {
        match self {
            Term::Iri(iri) => iri.as_str(),
            Term::Literal(lit) => lit.lexical(),
        }
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri)
    }
}

impl From<Literal> for Term {
    fn from(lit: Literal) -> Self {
        Term::Literal(lit)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => iri.fmt(f),
            Term::Literal(lit) => lit.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Self {
        Triple {
            subject,
            predicate,
            object: object.into(),
        }
    }

    /// Builds a triple from arbitrary terms, rejecting literals in the
    /// subject or predicate position.
    pub fn from_terms(subject: Term, predicate: Term, object: Term) -> Result<Self, RdfError> {
        let Term::Iri(subject) = subject else {
            return Err(RdfError::LiteralPosition("subject"));
        };
        let Term::Iri(predicate) = predicate else {
            return Err(RdfError::LiteralPosition("predicate"));
        };
        Ok(Triple::new(subject, predicate, object))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// Handle of an interned term inside one [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(u32);

/// A pattern over interned ids; `None` is a wildcard.
pub type IdPattern = [Option<TermId>; 3];

/// A triple pattern over terms; `None` is a wildcard.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: Option<Term>,
    pub predicate: Option<Term>,
    pub object: Option<Term>,
}

#[derive(Default)]
pub struct Graph {
    terms: Vec<Term>,
    ids: HashMap<Term, TermId>,
    spo: BTreeSet<[TermId; 3]>,
    pos: BTreeSet<[TermId; 3]>,
    osp: BTreeSet<[TermId; 3]>,
    inspected: AtomicU64,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    fn intern(&mut self, term: Term) -> TermId {
        if let Some(&id) = self.ids.get(&term) {
            return id;
        }
        let id = TermId(u32::try_from(self.terms.len()).expect("term dictionary overflow"));
        self.terms.push(term.clone());
        self.ids.insert(term, id);
        id
    }

    /// Inserts a triple and returns the new graph size.
    pub fn insert(&mut self, triple: Triple) -> usize {
        let s = self.intern(Term::Iri(triple.subject));
        let p = self.intern(Term::Iri(triple.predicate));
        let o = self.intern(triple.object);
        if self.spo.insert([s, p, o]) {
            self.pos.insert([p, o, s]);
            self.osp.insert([o, s, p]);
        }
        self.len()
    }

    /// Checked insertion from raw terms.
    pub fn insert_terms(
        &mut self,
        subject: Term,
        predicate: Term,
        object: Term,
    ) -> Result<usize, RdfError> {
        Ok(self.insert(Triple::from_terms(subject, predicate, object)?))
    }

    pub fn remove(&mut self, triple: &Triple) -> bool {
        let ids = (
            self.lookup(&Term::Iri(triple.subject.clone())),
            self.lookup(&Term::Iri(triple.predicate.clone())),
            self.lookup(&triple.object),
        );
        let (Some(s), Some(p), Some(o)) = ids else {
            return false;
        };
        if self.spo.remove(&[s, p, o]) {
            self.pos.remove(&[p, o, s]);
            self.osp.remove(&[o, s, p]);
            true
        } else {
            false
        }
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        let s = self.lookup(&Term::Iri(triple.subject.clone()));
        let p = self.lookup(&Term::Iri(triple.predicate.clone()));
        let o = self.lookup(&triple.object);
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => self.spo.contains(&[s, p, o]),
            _ => false,
        }
    }

    pub fn lookup(&self, term: &Term) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.terms[id.0 as usize]
    }

    fn resolve(&self, [s, p, o]: [TermId; 3]) -> Triple {
        let iri = |id| match self.term(id) {
            Term::Iri(iri) => iri.clone(),
            Term::Literal(_) => unreachable!("literal stored in subject or predicate position"),
        };
        Triple::new(iri(s), iri(p), self.term(o).clone())
    }

    /// Id-level pattern matching. Bound positions select the index whose key
    /// prefix they form; only triples sharing that prefix are visited, and
    /// each visited entry is counted by the instrumentation counter.
    pub fn match_ids(&self, pattern: IdPattern) -> impl Iterator<Item = [TermId; 3]> + '_ {
        const LO: TermId = TermId(0);
        const HI: TermId = TermId(u32::MAX);
        let iter: Box<dyn Iterator<Item = [TermId; 3]> + '_> = match pattern {
            [Some(s), Some(p), Some(o)] => {
                Box::new(self.spo.range([s, p, o]..=[s, p, o]).copied())
            }
            [Some(s), Some(p), None] => Box::new(self.spo.range([s, p, LO]..=[s, p, HI]).copied()),
            [Some(s), None, None] => Box::new(self.spo.range([s, LO, LO]..=[s, HI, HI]).copied()),
            [None, Some(p), Some(o)] => Box::new(
                self.pos
                    .range([p, o, LO]..=[p, o, HI])
                    .map(|&[p, o, s]| [s, p, o]),
            ),
            [None, Some(p), None] => Box::new(
                self.pos
                    .range([p, LO, LO]..=[p, HI, HI])
                    .map(|&[p, o, s]| [s, p, o]),
            ),
            [Some(s), None, Some(o)] => Box::new(
                self.osp
                    .range([o, s, LO]..=[o, s, HI])
                    .map(|&[o, s, p]| [s, p, o]),
            ),
            [None, None, Some(o)] => Box::new(
                self.osp
                    .range([o, LO, LO]..=[o, HI, HI])
                    .map(|&[o, s, p]| [s, p, o]),
            ),
            [None, None, None] => Box::new(self.spo.iter().copied()),
        };
        iter.inspect(|_| {
            self.inspected.fetch_add(1, Ordering::Relaxed);
        })
    }

    /// Term-level pattern matching; a bound term absent from the graph
    /// matches nothing.
    pub fn match_pattern(&self, pattern: &TriplePattern) -> Vec<Triple> {
        let bind = |t: &Option<Term>| match t {
            None => Some(None),
            Some(term) => self.lookup(term).map(Some),
        };
        let (Some(s), Some(p), Some(o)) = (
            bind(&pattern.subject),
            bind(&pattern.predicate),
            bind(&pattern.object),
        ) else {
            return Vec::new();
        };
        self.match_ids([s, p, o]).map(|ids| self.resolve(ids)).collect()
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|&ids| self.resolve(ids))
    }

    /// Number of index entries visited by pattern matching so far.
    pub fn inspected(&self) -> u64 {
        self.inspected.load(Ordering::Relaxed)
    }

    pub fn reset_inspected(&self) {
        self.inspected.store(0, Ordering::Relaxed);
    }

    pub fn freeze(self) -> FrozenGraph {
        FrozenGraph(Arc::new(self))
    }
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            terms: self.terms.clone(),
            ids: self.ids.clone(),
            spo: self.spo.clone(),
            pos: self.pos.clone(),
            osp: self.osp.clone(),
            inspected: AtomicU64::new(0),
        }
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph").field("len", &self.len()).finish()
    }
}

/// Set equality over triples; term ids are graph-local and ignored.
impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.triples().all(|t| other.contains(&t))
    }
}

impl Eq for Graph {}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut graph = Graph::new();
        for triple in iter {
            graph.insert(triple);
        }
        graph
    }
}

/// A graph that no longer accepts writes and can be shared across threads.
#[derive(Debug, Clone)]
pub struct FrozenGraph(Arc<Graph>);

impl Deref for FrozenGraph {
    type Target = Graph;

    fn deref(&self) -> &Graph {
        &self.0
    }
}

/// Canonical N-Triples: one triple per line, lines sorted bytewise.
pub fn serialize_ntriples(graph: &Graph) -> String {
    let mut lines: Vec<String> = graph.triples().map(|t| t.to_string()).collect();
    lines.sort_unstable();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn parse_ntriples(text: &str) -> Result<Graph, RdfError> {
    let mut graph = Graph::new();
    for (idx, line) in text.lines().enumerate() {
        let mut cursor = Cursor::new(line, idx + 1);
        cursor.skip_ws();
        if cursor.at_end() || cursor.peek() == Some('#') {
            continue;
        }
        let triple = cursor.triple()?;
        graph.insert(triple);
    }
    Ok(graph)
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn err(&self, message: impl Into<String>) -> RdfError {
        RdfError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), RdfError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn triple(&mut self) -> Result<Triple, RdfError> {
        let subject = self.subject_or_predicate("subject")?;
        self.skip_ws();
        let predicate = self.subject_or_predicate("predicate")?;
        self.skip_ws();
        let object = match self.peek() {
            Some('<') => Term::Iri(self.iri()?),
            Some('"') => Term::Literal(self.literal()?),
            Some('_') => return Err(self.err("blank nodes are not supported")),
            _ => return Err(self.err("expected IRI or literal object")),
        };
        self.skip_ws();
        if self.peek() != Some('.') {
            return Err(self.err("expected terminating `.`"));
        }
        self.pos += 1;
        self.skip_ws();
        match self.peek() {
            None | Some('#') => Ok(Triple::new(subject, predicate, object)),
            Some(_) => Err(self.err("unexpected content after `.`")),
        }
    }

    fn subject_or_predicate(&mut self, what: &str) -> Result<Iri, RdfError> {
        match self.peek() {
            Some('<') => self.iri(),
            Some('_') => Err(self.err("blank nodes are not supported")),
            Some('"') => Err(self.err(format!("literal not allowed as {what}"))),
            _ => Err(self.err(format!("expected IRI {what}"))),
        }
    }

    fn iri(&mut self) -> Result<Iri, RdfError> {
        let start = self.pos;
        self.expect('<')?;
        let mut text = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated IRI")),
                Some('>') => break,
                Some('\\') => match self.bump() {
                    Some('u') => text.push(self.hex(4)?),
                    Some('U') => text.push(self.hex(8)?),
                    _ => return Err(self.err("invalid escape in IRI")),
                },
                Some(c) => text.push(c),
            }
        }
        Iri::new(text).map_err(|e| RdfError::Syntax {
            line: self.line,
            column: start + 1,
            message: e.to_string(),
        })
    }

    fn hex(&mut self, digits: usize) -> Result<char, RdfError> {
        let mut value = 0u32;
        for _ in 0..digits {
            let d = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.err("invalid hex digit in escape"))?;
            value = value * 16 + d;
        }
        char::from_u32(value).ok_or_else(|| self.err("escape is not a Unicode scalar value"))
    }

    fn literal(&mut self) -> Result<Literal, RdfError> {
        self.expect('"')?;
        let mut lexical = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string literal")),
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('t') => lexical.push('\t'),
                    Some('b') => lexical.push('\u{8}'),
                    Some('n') => lexical.push('\n'),
                    Some('r') => lexical.push('\r'),
                    Some('f') => lexical.push('\u{c}'),
                    Some('"') => lexical.push('"'),
                    Some('\'') => lexical.push('\''),
                    Some('\\') => lexical.push('\\'),
                    Some('u') => lexical.push(self.hex(4)?),
                    Some('U') => lexical.push(self.hex(8)?),
                    _ => return Err(self.err("invalid escape in string literal")),
                },
                Some(c) => lexical.push(c),
            }
        }
        match self.peek() {
            Some('^') => {
                self.pos += 1;
                self.expect('^')?;
                let at = self.pos;
                let dt = self.iri()?;
                let datatype = Datatype::from_iri(dt.as_str()).ok_or_else(|| RdfError::Syntax {
                    line: self.line,
                    column: at + 1,
                    message: format!("unsupported datatype {dt}"),
                })?;
                Ok(Literal::new(lexical, datatype))
            }
            Some('@') => Err(self.err("language-tagged literals are not supported")),
            _ => Ok(Literal::string(lexical)),
        }
    }
}
