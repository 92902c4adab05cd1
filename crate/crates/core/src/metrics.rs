//! Precision, recall and F-measure of crowd answers against a gold standard.
//!
//! Answers and gold entries are `(subject, predicate, object)` facts where
//! a `None` object means "no value exists". A correct "no value" answer is
//! therefore a true positive like any correct value.

use crate::kb::parse_field_term;
use crate::term::Term;
use indexmap::{IndexMap, IndexSet};
use std::collections::HashSet;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

/// Token marking "no value exists" in gold files.
pub const NONE_TOKEN: &str = "NONE";

pub type Fact = (Term, Term, Option<Term>);

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("gold record {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reference answers per `(subject, predicate)`; an empty object set is
/// the explicit "no value" entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldStandard {
    entries: IndexMap<(Term, Term), IndexSet<Term>>,
}

impl GoldStandard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_value(&mut self, s: Term, p: Term, o: Term) {
        self.entries.entry((s, p)).or_default().insert(o);
    }

    /// Records that `(s, p)` has no value. Ignored if values are known.
    pub fn add_none(&mut self, s: Term, p: Term) {
        self.entries.entry((s, p)).or_default();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The gold answers as facts.
    pub fn facts(&self) -> HashSet<Fact> {
        let mut out = HashSet::new();
        for ((s, p), objs) in &self.entries {
            if objs.is_empty() {
                out.insert((s.clone(), p.clone(), None));
            }
            for o in objs {
                out.insert((s.clone(), p.clone(), Some(o.clone())));
            }
        }
        out
    }

    /// Reads `s, p, o` records; `o` may be `NONE`. `#` starts a comment line.
    pub fn parse<R: Read>(reader: R) -> Result<Self, GoldError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut gold = GoldStandard::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let err = |message: String| GoldError::Record { line, message };
            if rec.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", rec.len())));
            }
            let s = parse_field_term(&rec[0]).map_err(err)?;
            let p = parse_field_term(&rec[1]).map_err(err)?;
            if &rec[2] == NONE_TOKEN {
                gold.add_none(s, p);
            } else {
                gold.add_value(s, p, parse_field_term(&rec[2]).map_err(err)?);
            }
        }
        Ok(gold)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GoldError> {
        Self::parse(std::fs::File::open(path)?)
    }
}

fn hits(crowd: &HashSet<Fact>, gold: &HashSet<Fact>) -> usize {
    crowd.intersection(gold).count()
}

/// Fraction of crowd answers that are gold answers; `None` without answers.
pub fn precision<'a>(
    crowd: impl IntoIterator<Item = &'a Fact>,
    gold: &GoldStandard,
) -> Option<f64> {
    let crowd: HashSet<Fact> = crowd.into_iter().cloned().collect();
    if crowd.is_empty() {
        return None;
    }
    Some(hits(&crowd, &gold.facts()) as f64 / crowd.len() as f64)
}

/// Fraction of gold answers the crowd produced; `None` for an empty gold
/// standard.
pub fn recall<'a>(crowd: impl IntoIterator<Item = &'a Fact>, gold: &GoldStandard) -> Option<f64> {
    let crowd: HashSet<Fact> = crowd.into_iter().cloned().collect();
    let gold = gold.facts();
    if gold.is_empty() {
        return None;
    }
    Some(hits(&crowd, &gold) as f64 / gold.len() as f64)
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r <= 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Scores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

pub fn score<'a>(crowd: impl IntoIterator<Item = &'a Fact>, gold: &GoldStandard) -> Scores {
    let crowd: Vec<&Fact> = crowd.into_iter().collect();
    let p = precision(crowd.iter().copied(), gold);
    let r = recall(crowd.iter().copied(), gold);
    Scores {
        precision: p,
        recall: r,
        f_measure: match (p, r) {
            (Some(p), Some(r)) => Some(f_measure(p, r)),
            _ => None,
        },
    }
}
