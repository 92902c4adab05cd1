//! Parser for the supported SPARQL subset: `PREFIX` declarations,
//! `SELECT [DISTINCT]` over variables or `*`, and a `WHERE` clause holding a
//! single basic graph pattern. Within the pattern, `;` and `,` abbreviations,
//! the `a` keyword, IRIs, prefixed names, variables, and plain, tagged,
//! typed and numeric literals are accepted.

use crate::term::{Term, RDF_TYPE, XSD_DECIMAL, XSD_INTEGER};
use indexmap::IndexMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown prefix '{prefix}:' at line {line}, column {column}")]
    UnknownPrefix {
        prefix: String,
        line: usize,
        column: usize,
    },
    #[error("projected variable ?{0} does not occur in the pattern")]
    UnusedProjection(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable(Arc<str>);

impl Variable {
    pub fn new(name: impl AsRef<str>) -> Self {
        Variable(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternTerm {
    Var(Variable),
    Const(Term),
}

impl PatternTerm {
    pub fn var(name: &str) -> Self {
        PatternTerm::Var(Variable::new(name))
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<&Term> {
        match self {
            PatternTerm::Const(t) => Some(t),
            PatternTerm::Var(_) => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, PatternTerm::Var(_))
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Const(t)
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "{v}"),
            PatternTerm::Const(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
    /// Position of the pattern in the query text, starting at 0.
    pub ordinal: usize,
}

impl TriplePattern {
    pub fn new(
        subject: impl Into<PatternTerm>,
        predicate: impl Into<PatternTerm>,
        object: impl Into<PatternTerm>,
        ordinal: usize,
    ) -> Self {
        TriplePattern {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
            ordinal,
        }
    }

    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    /// Variables in subject, predicate, object order, without repeats.
    pub fn variables(&self) -> Vec<&Variable> {
        let mut out: Vec<&Variable> = Vec::new();
        for v in self.positions().into_iter().filter_map(PatternTerm::as_var) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    All,
    Vars(Vec<Variable>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpQuery {
    pub prefixes: IndexMap<String, String>,
    pub projection: Projection,
    pub distinct: bool,
    pub patterns: Vec<TriplePattern>,
}

impl BgpQuery {
    /// Variables of all patterns in order of first occurrence.
    pub fn variables(&self) -> Vec<Variable> {
        let mut out: Vec<Variable> = Vec::new();
        for p in &self.patterns {
            for v in p.variables() {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// The projected variables, with `*` expanded.
    pub fn projected_variables(&self) -> Vec<Variable> {
        match &self.projection {
            Projection::All => self.variables(),
            Projection::Vars(vs) => vs.clone(),
        }
    }
}

/// Canonical printer: declared prefixes, then every pattern with full IRIs.
impl fmt::Display for BgpQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (prefix, iri) in &self.prefixes {
            writeln!(f, "PREFIX {prefix}: <{iri}>")?;
        }
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        match &self.projection {
            Projection::All => f.write_str("*")?,
            Projection::Vars(vs) => {
                let names: Vec<String> = vs.iter().map(ToString::to_string).collect();
                f.write_str(&names.join(" "))?;
            }
        }
        f.write_str(" WHERE {\n")?;
        for p in &self.patterns {
            writeln!(f, "  {p} .")?;
        }
        f.write_str("}\n")
    }
}

pub fn parse_query(text: &str) -> Result<BgpQuery, QueryError> {
    Parser::new(text).query()
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    prefixes: IndexMap<String, String>,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            prefixes: IndexMap::new(),
        }
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for &c in &self.chars[..pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn err_at(&self, pos: usize, message: impl Into<String>) -> QueryError {
        let (line, column) = self.line_col(pos);
        QueryError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn err(&self, message: impl Into<String>) -> QueryError {
        self.err_at(self.pos, message)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), QueryError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    /// Case-insensitive keyword that is not followed by a name character.
    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let n = kw.chars().count();
        if self.pos + n > self.chars.len() {
            return false;
        }
        let candidate: String = self.chars[self.pos..self.pos + n].iter().collect();
        if !candidate.eq_ignore_ascii_case(kw) {
            return false;
        }
        if self
            .peek_at(n)
            .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == ':')
        {
            return false;
        }
        self.pos += n;
        true
    }

    fn query(mut self) -> Result<BgpQuery, QueryError> {
        loop {
            if self.keyword("PREFIX") {
                self.skip_ws();
                let start = self.pos;
                let prefix = self.prefix_name();
                if !self.eat(':') {
                    return Err(self.err_at(start, "expected 'prefix:' after PREFIX"));
                }
                self.skip_ws();
                let iri = self.iri_ref()?;
                self.prefixes.insert(prefix, iri);
            } else if self.keyword("BASE") {
                return Err(self.err("BASE is not supported"));
            } else {
                break;
            }
        }
        if !self.keyword("SELECT") {
            return Err(self.err("expected SELECT"));
        }
        let distinct = self.keyword("DISTINCT");
        if !distinct && self.keyword("REDUCED") {
            return Err(self.err("REDUCED is not supported"));
        }
        let projection = if self.eat('*') {
            Projection::All
        } else {
            let mut vars = Vec::new();
            loop {
                self.skip_ws();
                if matches!(self.peek(), Some('?') | Some('$')) {
                    vars.push(self.variable()?);
                } else {
                    break;
                }
            }
            if vars.is_empty() {
                return Err(self.err("expected '*' or variables after SELECT"));
            }
            Projection::Vars(vars)
        };
        self.keyword("WHERE");
        self.expect('{')?;
        let patterns = self.triples_block()?;
        self.expect('}')?;
        self.skip_ws();
        if self.pos < self.chars.len() {
            return Err(self.err(
                "unexpected content after the query (only a basic graph pattern is supported)",
            ));
        }
        let query = BgpQuery {
            prefixes: self.prefixes,
            projection,
            distinct,
            patterns,
        };
        if let Projection::Vars(vs) = &query.projection {
            let used = query.variables();
            if let Some(v) = vs.iter().find(|v| !used.contains(v)) {
                return Err(QueryError::UnusedProjection(v.name().to_string()));
            }
        }
        Ok(query)
    }

    fn triples_block(&mut self) -> Result<Vec<TriplePattern>, QueryError> {
        let mut patterns = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some('}') || self.peek().is_none() {
                break;
            }
            let subject = self.subject_term()?;
            loop {
                let predicate = self.predicate_term()?;
                loop {
                    let object = self.object_term()?;
                    let ordinal = patterns.len();
                    patterns.push(TriplePattern {
                        subject: subject.clone(),
                        predicate: predicate.clone(),
                        object,
                        ordinal,
                    });
                    if !self.eat(',') {
                        break;
                    }
                }
                if !self.eat(';') {
                    break;
                }
                self.skip_ws();
                if matches!(self.peek(), Some('.') | Some('}')) {
                    break;
                }
            }
            if !self.eat('.') {
                self.skip_ws();
                if self.peek() != Some('}') {
                    return Err(self.err("expected '.' or '}' after triple pattern"));
                }
                break;
            }
        }
        Ok(patterns)
    }

    fn subject_term(&mut self) -> Result<PatternTerm, QueryError> {
        self.skip_ws();
        let start = self.pos;
        let t = self.term()?;
        if matches!(&t, PatternTerm::Const(c) if c.is_literal()) {
            return Err(self.err_at(start, "literal in subject position"));
        }
        Ok(t)
    }

    fn predicate_term(&mut self) -> Result<PatternTerm, QueryError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('a')
            && self
                .peek_at(1)
                .is_none_or(|c| c.is_whitespace() || c == '<' || c == '?' || c == '$')
        {
            self.pos += 1;
            return Ok(PatternTerm::Const(Term::iri(RDF_TYPE)));
        }
        let t = self.term()?;
        if matches!(&t, PatternTerm::Const(c) if !c.is_iri()) {
            return Err(self.err_at(start, "predicate must be an IRI or a variable"));
        }
        Ok(t)
    }

    fn object_term(&mut self) -> Result<PatternTerm, QueryError> {
        self.skip_ws();
        self.term()
    }

    fn term(&mut self) -> Result<PatternTerm, QueryError> {
        self.skip_ws();
        match self.peek() {
            Some('?') | Some('$') => Ok(PatternTerm::Var(self.variable()?)),
            Some('<') => Ok(PatternTerm::Const(Term::iri(self.iri_ref()?))),
            Some('"') | Some('\'') => Ok(PatternTerm::Const(self.literal()?)),
            Some(c)
                if c.is_ascii_digit()
                    || ((c == '-' || c == '+')
                        && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                Ok(PatternTerm::Const(self.numeric()))
            }
            Some('_') if self.peek_at(1) == Some(':') => {
                Err(self.err("blank nodes are not supported in patterns; use a variable"))
            }
            Some(c) if c.is_alphabetic() || c == ':' || c == '_' => {
                Ok(PatternTerm::Const(Term::iri(self.prefixed_name()?)))
            }
            Some(c) => Err(self.err(format!("unexpected character '{c}'"))),
            None => Err(self.err("unexpected end of query")),
        }
    }

    fn variable(&mut self) -> Result<Variable, QueryError> {
        let start = self.pos;
        self.pos += 1;
        let mut name = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                name.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        if name.is_empty() {
            return Err(self.err_at(start, "empty variable name"));
        }
        Ok(Variable::new(name))
    }

    fn iri_ref(&mut self) -> Result<String, QueryError> {
        let start = self.pos;
        if self.peek() != Some('<') {
            return Err(self.err("expected '<'"));
        }
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err_at(start, "unterminated IRI")),
                Some('>') => {
                    self.pos += 1;
                    break;
                }
                Some('\\') => {
                    self.pos += 1;
                    out.push(self.unicode_escape()?);
                }
                Some(c) if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}') => {
                    return Err(self.err("invalid character in IRI"))
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
        if out.is_empty() {
            return Err(self.err_at(start, "empty IRI"));
        }
        Ok(out)
    }

    fn unicode_escape(&mut self) -> Result<char, QueryError> {
        let width = match self.peek() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.err("expected \\u or \\U escape")),
        };
        self.pos += 1;
        let mut code = 0u32;
        for _ in 0..width {
            let d = self
                .peek()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.err("invalid hex digit in escape"))?;
            code = code * 16 + d;
            self.pos += 1;
        }
        char::from_u32(code).ok_or_else(|| self.err("escape is not a valid code point"))
    }

    /// Namespace part of a prefixed name (may be empty).
    fn prefix_name(&mut self) -> String {
        let mut name = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '-' || (c == '.' && !name.is_empty()) {
                name.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        while name.ends_with('.') {
            name.pop();
            self.pos -= 1;
        }
        name
    }

    fn prefixed_name(&mut self) -> Result<String, QueryError> {
        let start = self.pos;
        let prefix = self.prefix_name();
        if self.peek() != Some(':') {
            return Err(self.err_at(start, format!("expected a prefixed name, found '{prefix}'")));
        }
        self.pos += 1;
        let mut local = String::new();
        while let Some(c) = self.peek() {
            if c == '\\' {
                match self.peek_at(1) {
                    Some(e) if !e.is_whitespace() => {
                        local.push(e);
                        self.pos += 2;
                    }
                    _ => return Err(self.err("dangling escape in prefixed name")),
                }
            } else if c == '%' {
                let hex: String = [self.peek_at(1), self.peek_at(2)]
                    .into_iter()
                    .flatten()
                    .collect();
                if hex.len() != 2 || !hex.chars().all(|h| h.is_ascii_hexdigit()) {
                    return Err(self.err("invalid percent escape in prefixed name"));
                }
                local.push('%');
                local.push_str(&hex);
                self.pos += 3;
            } else if c.is_alphanumeric() || matches!(c, '_' | '-' | ':' | '.') {
                local.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        while local.ends_with('.') {
            local.pop();
            self.pos -= 1;
        }
        match self.prefixes.get(&prefix) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => {
                let (line, column) = self.line_col(start);
                Err(QueryError::UnknownPrefix {
                    prefix,
                    line,
                    column,
                })
            }
        }
    }

    fn literal(&mut self) -> Result<Term, QueryError> {
        let start = self.pos;
        let quote = self.peek().unwrap_or('"');
        self.pos += 1;
        let mut lexical = String::new();
        loop {
            match self.peek() {
                None | Some('\n') => return Err(self.err_at(start, "unterminated string")),
                Some(c) if c == quote => {
                    self.pos += 1;
                    break;
                }
                Some('\\') => {
                    self.pos += 1;
                    let c = match self.peek() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') | Some('U') => {
                            lexical.push(self.unicode_escape()?);
                            continue;
                        }
                        _ => return Err(self.err("invalid escape in string")),
                    };
                    self.pos += 1;
                    lexical.push(c);
                }
                Some(c) => {
                    lexical.push(c);
                    self.pos += 1;
                }
            }
        }
        match self.peek() {
            Some('@') => {
                self.pos += 1;
                let mut tag = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        tag.push(c);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                if tag.is_empty() {
                    return Err(self.err("empty language tag"));
                }
                Ok(Term::lang_literal(lexical, &tag))
            }
            Some('^') if self.peek_at(1) == Some('^') => {
                self.pos += 2;
                let dt = if self.peek() == Some('<') {
                    self.iri_ref()?
                } else {
                    self.prefixed_name()?
                };
                Ok(Term::typed_literal(lexical, &dt))
            }
            _ => Ok(Term::literal(lexical)),
        }
    }

    fn numeric(&mut self) -> Term {
        let mut text = String::new();
        if let Some(c @ ('-' | '+')) = self.peek() {
            text.push(c);
            self.pos += 1;
        }
        let mut decimal = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.pos += 1;
            } else if c == '.' && !decimal && self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) {
                decimal = true;
                text.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        Term::typed_literal(text, if decimal { XSD_DECIMAL } else { XSD_INTEGER })
    }
}
