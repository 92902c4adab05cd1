//! Replays crowd answers recorded in an earlier session.
//!
//! Records are comma-separated `s, p, target_set, object, m` lines; `#`
//! starts a comment line. Terms use N-Triples syntax and the object `_:o`
//! stands for "no value".

use super::{questions_of, Collected, CrowdGateway};
use crate::kb::{parse_field_term, KbSet, QuadObject};
use crate::microtask::{AggregatedAnswer, Microtask};
use crate::term::Term;
use indexmap::IndexMap;
use std::io::Read;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay record {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub subject: Term,
    pub predicate: Term,
    pub target_set: KbSet,
    pub object: QuadObject,
    pub membership: f64,
}

pub fn parse_replay<R: Read>(reader: R) -> Result<Vec<ReplayRecord>, ReplayError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| ReplayError::Record { line, message };
        if rec.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", rec.len())));
        }
        let subject = parse_field_term(&rec[0]).map_err(err)?;
        let predicate = parse_field_term(&rec[1]).map_err(err)?;
        let target_set: KbSet = rec[2].parse().map_err(err)?;
        let object = QuadObject::parse(&rec[3]).map_err(err)?;
        let membership: f64 = rec[4]
            .parse()
            .map_err(|e| err(format!("bad membership {:?}: {e}", &rec[4])))?;
        if !(0.0..=1.0).contains(&membership) {
            return Err(err(format!("membership {membership} is outside [0, 1]")));
        }
        out.push(ReplayRecord {
            subject,
            predicate,
            target_set,
            object,
            membership,
        });
    }
    Ok(out)
}

pub fn load_replay(path: impl AsRef<Path>) -> Result<Vec<ReplayRecord>, ReplayError> {
    parse_replay(std::fs::File::open(path)?)
}

/// Answers questions from recorded answers keyed by `(subject, predicate)`.
/// Questions without a record are reported unanswered.
#[derive(Debug, Default)]
pub struct ReplayGateway {
    records: IndexMap<(Term, Term), Vec<ReplayRecord>>,
    quota: usize,
    tasks: Vec<Microtask>,
}

impl ReplayGateway {
    /// `quota` is reported as the judgment count of every replayed answer.
    pub fn new(records: Vec<ReplayRecord>, quota: usize) -> Self {
        let mut by_key: IndexMap<(Term, Term), Vec<ReplayRecord>> = IndexMap::new();
        for r in records {
            by_key
                .entry((r.subject.clone(), r.predicate.clone()))
                .or_default()
                .push(r);
        }
        ReplayGateway {
            records: by_key,
            quota,
            tasks: Vec::new(),
        }
    }
}

impl CrowdGateway for ReplayGateway {
    fn submit(&mut self, tasks: Vec<Microtask>) -> Vec<String> {
        let ids = tasks.iter().map(|t| t.id.clone()).collect();
        self.tasks.extend(tasks);
        ids
    }

    fn collect(&mut self, task_ids: &[String], _timeout: Option<Duration>) -> Collected {
        let mut out = Collected::default();
        for q in questions_of(&self.tasks, task_ids) {
            match self.records.get(&(q.subject.clone(), q.predicate.clone())) {
                Some(recs) => {
                    for r in recs {
                        let ans = AggregatedAnswer {
                            question_id: q.id.clone(),
                            target_set: r.target_set,
                            object: r.object.as_const().cloned(),
                            membership: r.membership,
                            judgment_count: self.quota,
                        };
                        out.answers.push((q.clone(), ans));
                    }
                }
                None => out.unanswered.push(q),
            }
        }
        out
    }
}
