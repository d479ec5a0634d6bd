use std::collections::{BTreeMap, HashSet};

use crate::rdf::{Datatype, Iri, Literal, Term, RDFS_LABEL, RDF_TYPE, XSD};

use super::{
    AggregateFn, CompareOp, Expr, GroupKey, OrderKey, PatternTerm, ProjectionItem, QueryError, QueryPattern, QueryPlan,
    Temporal,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Iri(String),
    PName(String, String),
    Str(String),
    Num(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Dot,
    Comma,
    Semicolon,
    Star,
    Carets,
    Op(CompareOp),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl Lexer {
    fn error(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            line: self.line,
            column: self.pos - self.line_start + 1,
            message: message.into(),
        }
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn tokenize(mut self) -> Result<Vec<Token>, QueryError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column) = (self.line, self.pos - self.line_start + 1);
            let Some(c) = self.peek_at(0) else {
                tokens.push(Token { tok: Tok::Eof, line, column });
                return Ok(tokens);
            };
            let tok = match c {
                '{' => self.single(Tok::LBrace),
                '}' => self.single(Tok::RBrace),
                '(' => self.single(Tok::LParen),
                ')' => self.single(Tok::RParen),
                ',' => self.single(Tok::Comma),
                ';' => self.single(Tok::Semicolon),
                '*' => self.single(Tok::Star),
                '.' if !self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) => self.single(Tok::Dot),
                '=' => self.single(Tok::Op(CompareOp::Eq)),
                '!' if self.peek_at(1) == Some('=') => {
                    self.pos += 2;
                    Tok::Op(CompareOp::Ne)
                }
                '>' if self.peek_at(1) == Some('=') => {
                    self.pos += 2;
                    Tok::Op(CompareOp::Ge)
                }
                '>' => self.single(Tok::Op(CompareOp::Gt)),
                '<' => self.angle(),
                '^' if self.peek_at(1) == Some('^') => {
                    self.pos += 2;
                    Tok::Carets
                }
                '?' | '$' => {
                    self.pos += 1;
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    if name.is_empty() {
                        return Err(self.error("empty variable name"));
                    }
                    Tok::Var(name)
                }
                '"' | '\'' => self.string(c)?,
                c if c.is_ascii_digit() || c == '.' => self.number(),
                '-' | '+' if self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) => self.number(),
                ':' => {
                    self.pos += 1;
                    Tok::PName(String::new(), self.local_name())
                }
                c if c.is_alphabetic() || c == '_' => {
                    let word = self.take_while(is_name_char);
                    if self.peek_at(0) == Some(':') {
                        self.pos += 1;
                        Tok::PName(word, self.local_name())
                    } else {
                        Tok::Word(word)
                    }
                }
                other => return Err(self.error(format!("unexpected character `{other}`"))),
            };
            tokens.push(Token { tok, line, column });
        }
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.pos += 1;
        tok
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek_at(0) {
            if c == '\n' {
                self.pos += 1;
                self.line += 1;
                self.line_start = self.pos;
            } else if c.is_whitespace() {
                self.pos += 1;
            } else if c == '#' {
                while self.peek_at(0).is_some_and(|c| c != '\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.peek_at(0).is_some_and(&pred) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn local_name(&mut self) -> String {
        let mut name = self.take_while(|c| is_name_char(c) || c == '.');
        while name.ends_with('.') {
            name.pop();
            self.pos -= 1;
        }
        name
    }

    /// `<` opens an IRI when a matching `>` follows with no forbidden
    /// characters in between; otherwise it is a comparison operator.
    fn angle(&mut self) -> Tok {
        let mut end = self.pos + 1;
        while let Some(&c) = self.chars.get(end) {
            if c == '>' {
                break;
            }
            if c.is_whitespace() || c.is_control() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
                end = usize::MAX;
                break;
            }
            end += 1;
        }
        if end != usize::MAX && end < self.chars.len() && end > self.pos + 1 {
            let iri: String = self.chars[self.pos + 1..end].iter().collect();
            self.pos = end + 1;
            return Tok::Iri(iri);
        }
        if self.peek_at(1) == Some('=') {
            self.pos += 2;
            Tok::Op(CompareOp::Le)
        } else {
            self.pos += 1;
            Tok::Op(CompareOp::Lt)
        }
    }

    fn string(&mut self, quote: char) -> Result<Tok, QueryError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek_at(0) else {
                return Err(self.error("unterminated string"));
            };
            self.pos += 1;
            match c {
                c if c == quote => return Ok(Tok::Str(out)),
                '\n' => return Err(self.error("newline in string")),
                '\\' => {
                    let esc = self.peek_at(0).ok_or_else(|| self.error("unterminated escape"))?;
                    self.pos += 1;
                    match esc {
                        't' => out.push('\t'),
                        'n' => out.push('\n'),
                        'r' => out.push('\r'),
                        '"' => out.push('"'),
                        '\'' => out.push('\''),
                        '\\' => out.push('\\'),
                        'u' => {
                            let hex: String = (0..4).filter_map(|i| self.peek_at(i)).collect();
                            let ch = u32::from_str_radix(&hex, 16)
                                .ok()
                                .filter(|_| hex.len() == 4)
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.error("invalid \\u escape"))?;
                            self.pos += 4;
                            out.push(ch);
                        }
                        other => return Err(self.error(format!("invalid escape `\\{other}`"))),
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Tok {
        let mut text = String::new();
        if let Some(sign @ ('-' | '+')) = self.peek_at(0) {
            if sign == '-' {
                text.push('-');
            }
            self.pos += 1;
        }
        text.push_str(&self.take_while(|c| c.is_ascii_digit()));
        if self.peek_at(0) == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
            text.push('.');
            text.push_str(&self.take_while(|c| c.is_ascii_digit()));
        }
        if text.starts_with('.') || text.starts_with("-.") {
            text = text.replacen('.', "0.", 1);
        }
        Tok::Num(text)
    }
}

fn builtin_prefixes() -> BTreeMap<String, String> {
    [
        ("rdf", RDF_TYPE.trim_end_matches("type")),
        ("rdfs", RDFS_LABEL.trim_end_matches("label")),
        ("xsd", XSD),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    prefixes: BTreeMap<String, String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn next(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if token.tok != Tok::Eof {
            self.pos += 1;
        }
        token
    }

    fn error_at(&self, token: &Token, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            line: token.line,
            column: token.column,
            message: message.into(),
        }
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        self.error_at(&self.tokens[self.pos], message)
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(word))
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.is_word(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), QueryError> {
        if self.eat_word(word) {
            Ok(())
        } else {
            Err(self.error(format!("expected {word}")))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn expect_var(&mut self) -> Result<String, QueryError> {
        match self.next() {
            Token { tok: Tok::Var(v), .. } => Ok(v),
            other => Err(self.error_at(&other, "expected a variable")),
        }
    }

    fn resolve(&self, token: &Token, prefix: &str, local: &str) -> Result<Iri, QueryError> {
        let ns = self.prefixes.get(prefix).ok_or_else(|| QueryError::UnknownPrefix {
            prefix: prefix.to_string(),
            line: token.line,
            column: token.column,
        })?;
        Iri::new(format!("{ns}{local}")).map_err(|e| self.error_at(token, e.to_string()))
    }

    fn iri_token(&self, token: &Token) -> Result<Option<Iri>, QueryError> {
        match &token.tok {
            Tok::Iri(text) => Iri::new(text.clone())
                .map(Some)
                .map_err(|e| self.error_at(token, e.to_string())),
            Tok::PName(prefix, local) => self.resolve(token, prefix, local).map(Some),
            _ => Ok(None),
        }
    }

    fn literal(&mut self, token: &Token) -> Result<Option<Literal>, QueryError> {
        match &token.tok {
            Tok::Str(text) => {
                if *self.peek() != Tok::Carets {
                    return Ok(Some(Literal::string(text.clone())));
                }
                self.pos += 1;
                let dt_token = self.next();
                let dt = self
                    .iri_token(&dt_token)?
                    .ok_or_else(|| self.error_at(&dt_token, "expected a datatype IRI"))?;
                let datatype = Datatype::from_iri(dt.as_str())
                    .ok_or_else(|| self.error_at(&dt_token, format!("unsupported datatype {dt}")))?;
                Ok(Some(Literal::new(text.clone(), datatype)))
            }
            Tok::Num(text) => {
                let datatype = if text.contains('.') {
                    Datatype::Decimal
                } else {
                    Datatype::Integer
                };
                Ok(Some(Literal::new(text.clone(), datatype)))
            }
            _ => Ok(None),
        }
    }

    fn pattern_term(&mut self, predicate: bool) -> Result<PatternTerm, QueryError> {
        let token = self.next();
        if let Tok::Var(v) = &token.tok {
            return Ok(PatternTerm::Var(v.clone()));
        }
        if predicate && matches!(&token.tok, Tok::Word(w) if w == "a") {
            return Ok(PatternTerm::Term(Term::iri(RDF_TYPE).expect("static IRI")));
        }
        if let Some(iri) = self.iri_token(&token)? {
            return Ok(PatternTerm::Term(Term::Iri(iri)));
        }
        if let Some(lit) = self.literal(&token)? {
            return Ok(PatternTerm::Term(Term::Literal(lit)));
        }
        Err(self.error_at(&token, "expected a variable, IRI or literal"))
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let left = self.primary()?;
        if let Tok::Op(op) = *self.peek() {
            self.pos += 1;
            let right = self.primary()?;
            return Ok(Expr::Compare(op, Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        let token = self.next();
        match &token.tok {
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            Tok::Var(v) => return Ok(Expr::Var(v.clone())),
            Tok::Word(w) => {
                let upper = w.to_ascii_uppercase();
                let temporal = match upper.as_str() {
                    "YEAR" => Some(Temporal::Year),
                    "MONTH" => Some(Temporal::Month),
                    "DAY" => Some(Temporal::Day),
                    "QUARTER" => Some(Temporal::Quarter),
                    _ => None,
                };
                if let Some(func) = temporal {
                    self.expect(Tok::LParen, "`(`")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Temporal(func, Box::new(arg)));
                }
                let aggregate = match upper.as_str() {
                    "COUNT" => Some(AggregateFn::Count),
                    "SUM" => Some(AggregateFn::Sum),
                    "AVG" => Some(AggregateFn::Avg),
                    "MIN" => Some(AggregateFn::Min),
                    "MAX" => Some(AggregateFn::Max),
                    "MEDIAN" => Some(AggregateFn::Median),
                    "STDDEV" => Some(AggregateFn::Stddev),
                    _ => None,
                };
                if let Some(func) = aggregate {
                    return self.aggregate(func, &token);
                }
            }
            _ => {}
        }
        if let Some(iri) = self.iri_token(&token)? {
            return Ok(Expr::Const(Term::Iri(iri)));
        }
        if let Some(lit) = self.literal(&token)? {
            return Ok(Expr::Const(Term::Literal(lit)));
        }
        Err(self.error_at(&token, "expected an expression"))
    }

    fn aggregate(&mut self, func: AggregateFn, token: &Token) -> Result<Expr, QueryError> {
        self.expect(Tok::LParen, "`(`")?;
        let distinct = self.eat_word("DISTINCT");
        if distinct && func != AggregateFn::Count {
            return Err(self.error_at(token, format!("DISTINCT is only supported in COUNT, not {}", func.name())));
        }
        let arg = if *self.peek() == Tok::Star {
            if func != AggregateFn::Count || distinct {
                return Err(self.error("`*` is only allowed in COUNT(*)"));
            }
            self.pos += 1;
            None
        } else {
            let arg = self.expr()?;
            if arg.has_aggregate() {
                return Err(self.error_at(token, "nested aggregates are not allowed"));
            }
            Some(Box::new(arg))
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::Aggregate { func, distinct, arg })
    }

    fn aliased(&mut self) -> Result<(Expr, String), QueryError> {
        self.expect(Tok::LParen, "`(`")?;
        let expr = self.expr()?;
        self.expect_word("AS")?;
        let name = self.expect_var()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok((expr, name))
    }

    fn query(&mut self) -> Result<QueryPlan, QueryError> {
        while self.eat_word("PREFIX") {
            let token = self.next();
            let Tok::PName(prefix, local) = &token.tok else {
                return Err(self.error_at(&token, "expected a prefix name such as `ex:`"));
            };
            if !local.is_empty() {
                return Err(self.error_at(&token, "expected a prefix name such as `ex:`"));
            }
            let iri_token = self.next();
            let Tok::Iri(ns) = &iri_token.tok else {
                return Err(self.error_at(&iri_token, "expected a namespace IRI"));
            };
            self.prefixes.insert(prefix.clone(), ns.clone());
        }

        self.expect_word("SELECT")?;
        let mut star = false;
        let mut projection = Vec::new();
        if *self.peek() == Tok::Star {
            self.pos += 1;
            star = true;
        } else {
            loop {
                match self.peek() {
                    Tok::Var(v) => {
                        let v = v.clone();
                        self.pos += 1;
                        projection.push(ProjectionItem {
                            expr: Expr::Var(v.clone()),
                            name: v,
                        });
                    }
                    Tok::LParen => {
                        let (expr, name) = self.aliased()?;
                        projection.push(ProjectionItem { expr, name });
                    }
                    _ => break,
                }
            }
            if projection.is_empty() {
                return Err(self.error("expected `*`, a variable or `(expression AS ?var)`"));
            }
        }

        self.eat_word("WHERE");
        self.expect(Tok::LBrace, "`{`")?;
        let mut patterns = Vec::new();
        let mut filters = Vec::new();
        loop {
            if *self.peek() == Tok::RBrace {
                self.pos += 1;
                break;
            }
            if self.eat_word("FILTER") {
                self.expect(Tok::LParen, "`(` after FILTER")?;
                filters.push(self.expr()?);
                self.expect(Tok::RParen, "`)`")?;
                if *self.peek() == Tok::Dot {
                    self.pos += 1;
                }
                continue;
            }
            self.triples_block(&mut patterns)?;
            match self.peek() {
                Tok::Dot => self.pos += 1,
                Tok::RBrace => {}
                _ if self.is_word("FILTER") => {}
                _ => return Err(self.error("expected `.` or `}`")),
            }
        }

        let mut group_by = Vec::new();
        if self.eat_word("GROUP") {
            self.expect_word("BY")?;
            loop {
                match self.peek() {
                    Tok::Var(v) => {
                        let v = v.clone();
                        self.pos += 1;
                        group_by.push(GroupKey {
                            expr: Expr::Var(v.clone()),
                            name: v,
                        });
                    }
                    Tok::LParen => {
                        let (expr, name) = self.aliased()?;
                        group_by.push(GroupKey { expr, name });
                    }
                    _ => break,
                }
            }
            if group_by.is_empty() {
                return Err(self.error("expected a grouping variable"));
            }
        }

        let mut order_by = Vec::new();
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            loop {
                let descending = if self.eat_word("DESC") {
                    true
                } else if self.eat_word("ASC") {
                    false
                } else {
                    match self.peek() {
                        Tok::Var(v) => {
                            let v = v.clone();
                            self.pos += 1;
                            order_by.push(OrderKey {
                                expr: Expr::Var(v),
                                descending: false,
                            });
                            continue;
                        }
                        Tok::LParen => {
                            self.pos += 1;
                            let expr = self.expr()?;
                            self.expect(Tok::RParen, "`)`")?;
                            order_by.push(OrderKey {
                                expr,
                                descending: false,
                            });
                            continue;
                        }
                        _ => break,
                    }
                };
                self.expect(Tok::LParen, "`(`")?;
                let expr = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                order_by.push(OrderKey { expr, descending });
            }
            if order_by.is_empty() {
                return Err(self.error("expected an ordering expression"));
            }
        }

        let mut limit = None;
        if self.eat_word("LIMIT") {
            let token = self.next();
            match &token.tok {
                Tok::Num(n) if !n.contains('.') && !n.starts_with('-') => {
                    limit = Some(n.parse().map_err(|_| self.error_at(&token, "LIMIT out of range"))?);
                }
                _ => return Err(self.error_at(&token, "expected a non-negative integer")),
            }
        }
        if *self.peek() != Tok::Eof {
            return Err(self.error("unexpected trailing input"));
        }

        let mut plan = QueryPlan {
            prefixes: self.prefixes.clone(),
            projection,
            patterns,
            filters,
            group_by,
            order_by,
            limit,
        };
        if star {
            if plan.is_aggregate() {
                return Err(QueryError::Invalid("SELECT * cannot be combined with GROUP BY".into()));
            }
            plan.projection = plan
                .pattern_vars()
                .into_iter()
                .map(|v| ProjectionItem {
                    expr: Expr::Var(v.clone()),
                    name: v,
                })
                .collect();
        }
        check_plan(&plan)?;
        Ok(plan)
    }

    fn triples_block(&mut self, patterns: &mut Vec<QueryPattern>) -> Result<(), QueryError> {
        let subject = self.pattern_term(false)?;
        loop {
            let predicate = self.pattern_term(true)?;
            loop {
                let object = self.pattern_term(false)?;
                patterns.push(QueryPattern {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                if *self.peek() == Tok::Comma {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if *self.peek() != Tok::Semicolon {
                return Ok(());
            }
            self.pos += 1;
            if matches!(self.peek(), Tok::Dot | Tok::RBrace) {
                return Ok(());
            }
        }
    }
}

fn check_plan(plan: &QueryPlan) -> Result<(), QueryError> {
    let bound: HashSet<String> = plan.pattern_vars().into_iter().collect();
    let known = |vars: Vec<String>| -> Result<(), QueryError> {
        match vars.into_iter().find(|v| !bound.contains(v)) {
            Some(v) => Err(QueryError::UnknownVariable(v)),
            None => Ok(()),
        }
    };
    let vars_of = |e: &Expr| {
        let mut out = Vec::new();
        e.all_vars(&mut out);
        out
    };
    let free_of = |e: &Expr| {
        let mut out = Vec::new();
        e.free_vars(&mut out);
        out
    };

    for filter in &plan.filters {
        if filter.has_aggregate() {
            return Err(QueryError::Invalid(format!("aggregate in FILTER: {filter}")));
        }
        known(vars_of(filter))?;
    }

    let mut names = HashSet::new();
    let mut group_names = HashSet::new();
    for key in &plan.group_by {
        if key.expr.has_aggregate() {
            return Err(QueryError::Invalid(format!("aggregate in GROUP BY: {}", key.expr)));
        }
        known(vars_of(&key.expr))?;
        if !matches!(&key.expr, Expr::Var(v) if *v == key.name) && bound.contains(&key.name) {
            return Err(QueryError::Invalid(format!("alias ?{} is already bound by a pattern", key.name)));
        }
        group_names.insert(key.name.clone());
    }

    let aggregate = plan.is_aggregate();
    for item in &plan.projection {
        if !names.insert(item.name.clone()) {
            return Err(QueryError::Invalid(format!("duplicate output name ?{}", item.name)));
        }
        let is_plain_var = matches!(&item.expr, Expr::Var(v) if *v == item.name);
        if !is_plain_var && (bound.contains(&item.name) || group_names.contains(&item.name)) {
            return Err(QueryError::Invalid(format!("alias ?{} is already bound", item.name)));
        }
        if aggregate {
            if let Some(v) = free_of(&item.expr).into_iter().find(|v| !group_names.contains(v)) {
                return Err(if bound.contains(&v) {
                    QueryError::Ungrouped(v)
                } else {
                    QueryError::UnknownVariable(v)
                });
            }
            known(vars_of(&item.expr).into_iter().filter(|v| !group_names.contains(v)).collect())?;
        } else {
            known(vars_of(&item.expr))?;
        }
    }

    for key in &plan.order_by {
        let visible = |v: &String| names.contains(v) || if aggregate { group_names.contains(v) } else { bound.contains(v) };
        if !aggregate && key.expr.has_aggregate() {
            return Err(QueryError::Invalid(format!("aggregate in ORDER BY of a non-grouped query: {}", key.expr)));
        }
        if let Some(v) = free_of(&key.expr).into_iter().find(|v| !visible(v)) {
            return Err(if aggregate && bound.contains(&v) {
                QueryError::Ungrouped(v)
            } else {
                QueryError::UnknownVariable(v)
            });
        }
        known(vars_of(&key.expr).into_iter().filter(|v| !visible(v)).collect())?;
    }
    Ok(())
}

/// Parses a query with only the `rdf:`, `rdfs:` and `xsd:` prefixes predeclared.
pub fn parse_query(text: &str) -> Result<QueryPlan, QueryError> {
    parse_query_with_prefixes(text, &BTreeMap::new())
}

/// Parses a query with additional predeclared prefixes; `PREFIX` lines in
/// the text override them.
pub fn parse_query_with_prefixes(text: &str, prefixes: &BTreeMap<String, String>) -> Result<QueryPlan, QueryError> {
    let tokens = Lexer {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        line_start: 0,
    }
    .tokenize()?;
    let mut all = builtin_prefixes();
    all.extend(prefixes.iter().map(|(k, v)| (k.clone(), v.clone())));
    Parser {
        tokens,
        pos: 0,
        prefixes: all,
    }
    .query()
}
