//! Crowd knowledge: three fuzzy sets of RDF quads.
//!
//! * `plus`  holds facts the crowd asserted, always with a constant object;
//! * `minus` holds crowd-asserted absence of any value (existential object);
//! * `tilde` holds questions the crowd could not answer.
//!
//! Every quad carries a membership degree `m` in `[0, 1]`. Re-inserting the
//! same `(s, p, o)` into a set replaces its degree.

use crate::ntriples::parse_term;
use crate::term::Term;
use indexmap::IndexMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

pub const FORMAT_HEADER: &str = "# crowd-kb format";
pub const FORMAT_VERSION: u32 = 1;
/// Serialized form of an existential object.
pub const EXISTENTIAL_TOKEN: &str = "_:o";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{set} quads need {expected} object")]
    Shape { set: KbSet, expected: &'static str },
    #[error("membership degree {0} is outside [0, 1]")]
    Membership(f64),
    #[error("predicate must be an IRI, got {0}")]
    Predicate(Term),
    #[error("unsupported knowledge-base format (header {0:?})")]
    Version(String),
    #[error("record {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KbSet {
    Plus,
    Minus,
    Tilde,
}

impl KbSet {
    pub const ALL: [KbSet; 3] = [KbSet::Plus, KbSet::Minus, KbSet::Tilde];

    pub fn tag(self) -> &'static str {
        match self {
            KbSet::Plus => "plus",
            KbSet::Minus => "minus",
            KbSet::Tilde => "tilde",
        }
    }
}

impl fmt::Display for KbSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for KbSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "plus" | "+" => Ok(KbSet::Plus),
            "minus" | "-" => Ok(KbSet::Minus),
            "tilde" | "~" => Ok(KbSet::Tilde),
            other => Err(format!("unknown knowledge-base set {other:?}")),
        }
    }
}

/// Which of the three sets an operation looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KbSelection {
    pub plus: bool,
    pub minus: bool,
    pub tilde: bool,
}

impl KbSelection {
    pub const PLUS: KbSelection = KbSelection {
        plus: true,
        minus: false,
        tilde: false,
    };
    pub const ALL: KbSelection = KbSelection {
        plus: true,
        minus: true,
        tilde: true,
    };

    pub fn contains(self, set: KbSet) -> bool {
        match set {
            KbSet::Plus => self.plus,
            KbSet::Minus => self.minus,
            KbSet::Tilde => self.tilde,
        }
    }

    pub fn is_empty(self) -> bool {
        !(self.plus || self.minus || self.tilde)
    }
}

impl Default for KbSelection {
    fn default() -> Self {
        KbSelection::PLUS
    }
}

impl FromStr for KbSelection {
    type Err = String;

    /// Comma-separated set tags, e.g. `plus,tilde`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut sel = KbSelection {
            plus: false,
            minus: false,
            tilde: false,
        };
        for part in s.split(',') {
            match part.parse::<KbSet>()? {
                KbSet::Plus => sel.plus = true,
                KbSet::Minus => sel.minus = true,
                KbSet::Tilde => sel.tilde = true,
            }
        }
        Ok(sel)
    }
}

/// Object position of a quad: a constant, or "some value" (existential).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuadObject {
    Const(Term),
    Existential,
}

impl QuadObject {
    pub fn as_const(&self) -> Option<&Term> {
        match self {
            QuadObject::Const(t) => Some(t),
            QuadObject::Existential => None,
        }
    }

    pub fn parse(field: &str) -> Result<Self, String> {
        let field = field.trim();
        if field == EXISTENTIAL_TOKEN {
            return Ok(QuadObject::Existential);
        }
        parse_field_term(field).map(QuadObject::Const)
    }
}

impl fmt::Display for QuadObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadObject::Const(t) => write!(f, "{t}"),
            QuadObject::Existential => f.write_str(EXISTENTIAL_TOKEN),
        }
    }
}

/// Parses a term field of a line-delimited record. Full N-Triples syntax is
/// accepted, and a bare absolute IRI (`http://...`) is read as an IRI.
pub fn parse_field_term(field: &str) -> Result<Term, String> {
    let field = field.trim();
    if field.starts_with(['<', '"', '_']) {
        return parse_term(field).map_err(|e| e.message);
    }
    if !field.is_empty() && field.contains(':') && !field.contains(char::is_whitespace) {
        return Ok(Term::iri(field));
    }
    Err(format!("cannot read {field:?} as an RDF term"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrowdQuad {
    pub subject: Term,
    pub predicate: Term,
    pub object: QuadObject,
    pub membership: f64,
}

impl CrowdQuad {
    pub fn new(subject: Term, predicate: Term, object: QuadObject, membership: f64) -> Self {
        CrowdQuad {
            subject,
            predicate,
            object,
            membership,
        }
    }
}

type Key = (Term, Term);

#[derive(Debug, Clone, Default, PartialEq)]
struct FuzzySet {
    by_pair: IndexMap<Key, IndexMap<QuadObject, f64>>,
}

impl FuzzySet {
    fn average(&self, key: &Key) -> f64 {
        match self.by_pair.get(key) {
            Some(objs) if !objs.is_empty() => objs.values().sum::<f64>() / objs.len() as f64,
            _ => 0.0,
        }
    }

    fn len(&self) -> usize {
        self.by_pair.values().map(IndexMap::len).sum()
    }
}

/// The crowd knowledge base.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrowdKb {
    plus: FuzzySet,
    minus: FuzzySet,
    tilde: FuzzySet,
}

impl CrowdKb {
    pub fn new() -> Self {
        Self::default()
    }

    fn set(&self, set: KbSet) -> &FuzzySet {
        match set {
            KbSet::Plus => &self.plus,
            KbSet::Minus => &self.minus,
            KbSet::Tilde => &self.tilde,
        }
    }

    fn set_mut(&mut self, set: KbSet) -> &mut FuzzySet {
        match set {
            KbSet::Plus => &mut self.plus,
            KbSet::Minus => &mut self.minus,
            KbSet::Tilde => &mut self.tilde,
        }
    }

    /// Stores `quad` in `set`, returning the degree it replaced, if any.
    pub fn insert(&mut self, set: KbSet, quad: CrowdQuad) -> Result<Option<f64>, KbError> {
        if !(0.0..=1.0).contains(&quad.membership) {
            return Err(KbError::Membership(quad.membership));
        }
        if !quad.predicate.is_iri() {
            return Err(KbError::Predicate(quad.predicate));
        }
        match (set, &quad.object) {
            (KbSet::Plus, QuadObject::Existential) => {
                return Err(KbError::Shape {
                    set,
                    expected: "a constant",
                })
            }
            (KbSet::Minus, QuadObject::Const(_)) => {
                return Err(KbError::Shape {
                    set,
                    expected: "an existential",
                })
            }
            _ => {}
        }
        Ok(self
            .set_mut(set)
            .by_pair
            .entry((quad.subject, quad.predicate))
            .or_default()
            .insert(quad.object, quad.membership))
    }

    pub fn membership(&self, set: KbSet, s: &Term, p: &Term, o: &QuadObject) -> Option<f64> {
        self.set(set)
            .by_pair
            .get(&(s.clone(), p.clone()))
            .and_then(|objs| objs.get(o).copied())
    }

    /// Average degree of the `(s, p)` quads in `set`; 0 when there are none.
    pub fn average(&self, set: KbSet, s: &Term, p: &Term) -> f64 {
        self.set(set).average(&(s.clone(), p.clone()))
    }

    /// `1 - |m+ - m-|`.
    pub fn disagreement(&self, s: &Term, p: &Term) -> f64 {
        1.0 - (self.average(KbSet::Plus, s, p) - self.average(KbSet::Minus, s, p)).abs()
    }

    /// Average degree of the `(s, p)` quads in `tilde`.
    pub fn uncertainty(&self, s: &Term, p: &Term) -> f64 {
        self.average(KbSet::Tilde, s, p)
    }

    /// Number of distinct objects recorded for `(s, p)` across the selected sets.
    pub fn object_count(&self, selection: KbSelection, s: &Term, p: &Term) -> usize {
        let key = (s.clone(), p.clone());
        let mut seen: Vec<&QuadObject> = Vec::new();
        for set in KbSet::ALL {
            if !selection.contains(set) {
                continue;
            }
            if let Some(objs) = self.set(set).by_pair.get(&key) {
                for o in objs.keys() {
                    if !seen.contains(&o) {
                        seen.push(o);
                    }
                }
            }
        }
        seen.len()
    }

    /// Constant objects asserted in `plus` for `(s, p)`.
    pub fn asserted_objects(&self, s: &Term, p: &Term) -> Vec<&Term> {
        self.plus
            .by_pair
            .get(&(s.clone(), p.clone()))
            .map(|objs| objs.keys().filter_map(QuadObject::as_const).collect())
            .unwrap_or_default()
    }

    /// `(s, p, o)` triples in `plus` agreeing with the bound positions.
    pub fn asserted_matching(
        &self,
        s: Option<&Term>,
        p: Option<&Term>,
        o: Option<&Term>,
    ) -> Vec<(&Term, &Term, &Term)> {
        let mut out = Vec::new();
        for ((qs, qp), objs) in &self.plus.by_pair {
            if s.is_some_and(|s| s != qs) || p.is_some_and(|p| p != qp) {
                continue;
            }
            for obj in objs.keys().filter_map(QuadObject::as_const) {
                if o.is_none_or(|o| o == obj) {
                    out.push((qs, qp, obj));
                }
            }
        }
        out
    }

    pub fn quads(&self, set: KbSet) -> impl Iterator<Item = CrowdQuad> + '_ {
        self.set(set).by_pair.iter().flat_map(|((s, p), objs)| {
            objs.iter()
                .map(move |(o, m)| CrowdQuad::new(s.clone(), p.clone(), o.clone(), *m))
        })
    }

    pub fn len(&self, set: KbSet) -> usize {
        self.set(set).len()
    }

    pub fn is_empty(&self) -> bool {
        KbSet::ALL.iter().all(|&s| self.len(s) == 0)
    }

    /// Writes the versioned line-delimited form.
    pub fn save<W: Write>(&self, mut writer: W) -> Result<(), KbError> {
        writeln!(writer, "{FORMAT_HEADER} {FORMAT_VERSION}")?;
        let mut csv = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for set in KbSet::ALL {
            for q in self.quads(set) {
                csv.write_record([
                    set.tag().to_string(),
                    q.subject.to_string(),
                    q.predicate.to_string(),
                    q.object.to_string(),
                    q.membership.to_string(),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, KbError> {
        let mut reader = BufReader::new(reader);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header.trim_end();
        let version = header
            .strip_prefix(FORMAT_HEADER)
            .and_then(|v| v.trim().parse::<u32>().ok());
        if version != Some(FORMAT_VERSION) {
            return Err(KbError::Version(header.to_string()));
        }
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(false)
            .from_reader(reader);
        let mut kb = CrowdKb::new();
        for (idx, record) in csv.records().enumerate() {
            let record = record?;
            let line = idx + 2;
            let bad = |message: String| KbError::Record { line, message };
            if record.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", record.len())));
            }
            let set: KbSet = record[0].parse().map_err(bad)?;
            let subject = parse_field_term(&record[1]).map_err(bad)?;
            let predicate = parse_field_term(&record[2]).map_err(bad)?;
            let object = QuadObject::parse(&record[3]).map_err(bad)?;
            let membership: f64 = record[4]
                .trim()
                .parse()
                .map_err(|e| bad(format!("membership degree: {e}")))?;
            kb.insert(set, CrowdQuad::new(subject, predicate, object, membership))?;
        }
        Ok(kb)
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<(), KbError> {
        let file = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(file))
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, KbError> {
        Self::load(std::fs::File::open(path)?)
    }
}
