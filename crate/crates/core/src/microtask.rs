//! Human tasks: question generation, judgment aggregation, and mapping the
//! aggregated outcome into the crowd knowledge base.
//!
//! "Yes" answers become `plus` quads with the supplied value, "No" answers
//! `minus` quads with an existential object, "Not sure" answers `tilde`
//! quads. The membership degree is the mean of the average worker
//! confidence and the average normalized familiarity, both taken over the
//! judgments that share the winning verdict.

use crate::kb::{parse_field_term, CrowdKb, CrowdQuad, KbError, KbSet, QuadObject};
use crate::store::Dataset;
use crate::term::Term;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_QUOTA: usize = 3;
pub const DEFAULT_QUESTIONS_PER_TASK: usize = 4;

/// A `(subject, predicate)` pair whose values are to be collected.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CrowdTriple {
    pub subject: Term,
    pub predicate: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Question {
    pub id: String,
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub subject: Term,
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub predicate: Term,
    pub existence_text: String,
    pub value_text: String,
    pub subject_label: String,
    pub predicate_label: String,
}

impl Question {
    pub fn new(subject: Term, predicate: Term, d: &Dataset) -> Self {
        let subject_label = d.label_of(&subject);
        let predicate_label = d.label_of(&predicate);
        Question {
            id: question_id(&subject, &predicate),
            existence_text: format!("Does {subject_label} have a {predicate_label}?"),
            value_text: format!("What is the {predicate_label} of {subject_label}?"),
            subject,
            predicate,
            subject_label,
            predicate_label,
        }
    }
}

/// Stable id derived from the pair, so identical questions get identical
/// ids across runs.
pub fn question_id(subject: &Term, predicate: &Term) -> String {
    let mut h = Fnv64::new();
    h.write(subject.to_string().as_bytes());
    h.write(&[0]);
    h.write(predicate.to_string().as_bytes());
    format!("q{:016x}", h.finish())
}

/// 64-bit FNV-1a, used for stable ids and seed derivation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fnv64(u64);

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Collecting,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Microtask {
    pub id: String,
    pub questions: Vec<Question>,
    pub status: TaskStatus,
}

/// One question per triple, labelled from `d`, packed greedily in input
/// order into tasks of at most `max_per_task` questions.
pub fn build_tasks(triples: &[CrowdTriple], d: &Dataset, max_per_task: usize) -> Vec<Microtask> {
    assert!(max_per_task >= 1, "a task holds at least one question");
    triples
        .chunks(max_per_task)
        .map(|chunk| {
            let questions: Vec<Question> = chunk
                .iter()
                .map(|t| Question::new(t.subject.clone(), t.predicate.clone(), d))
                .collect();
            let mut h = Fnv64::new();
            for q in &questions {
                h.write(q.id.as_bytes());
            }
            Microtask {
                id: format!("t{:016x}", h.finish()),
                questions,
                status: TaskStatus::Pending,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    NotSure,
}

impl Verdict {
    pub fn target_set(self) -> KbSet {
        match self {
            Verdict::Yes => KbSet::Plus,
            Verdict::No => KbSet::Minus,
            Verdict::NotSure => KbSet::Tilde,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::NotSure => "not_sure",
        })
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yes" => Ok(Verdict::Yes),
            "no" => Ok(Verdict::No),
            "not_sure" => Ok(Verdict::NotSure),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub question_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub confidence: f64,
    /// Raw self-reported familiarity on the 1..=7 scale.
    pub familiarity: u8,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgmentError {
    #[error("verdict 'yes' requires a non-empty value")]
    MissingValue,
    #[error("confidence {0} is outside [0, 1]")]
    Confidence(f64),
    #[error("familiarity {0} is outside 1..=7")]
    Familiarity(u8),
}

impl Judgment {
    pub fn validate(&self) -> Result<(), JudgmentError> {
        if self.verdict == Verdict::Yes && self.value.as_deref().is_none_or(|v| v.trim().is_empty())
        {
            return Err(JudgmentError::MissingValue);
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(JudgmentError::Confidence(self.confidence));
        }
        if !(1..=7).contains(&self.familiarity) {
            return Err(JudgmentError::Familiarity(self.familiarity));
        }
        Ok(())
    }
}

/// How raw 1..=7 familiarity scores map onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FamiliarityScale {
    /// `(raw - 1) / 6`: 1 maps to 0 and 7 to 1.
    #[default]
    Affine,
    /// `raw / 7`.
    Ratio,
}

impl FamiliarityScale {
    pub fn normalize(self, raw: u8) -> f64 {
        match self {
            FamiliarityScale::Affine => (f64::from(raw) - 1.0) / 6.0,
            FamiliarityScale::Ratio => f64::from(raw) / 7.0,
        }
    }
}

impl FromStr for FamiliarityScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "affine" => Ok(FamiliarityScale::Affine),
            "ratio" => Ok(FamiliarityScale::Ratio),
            other => Err(format!("unknown familiarity scale {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationPolicy {
    pub quota: usize,
    pub familiarity: FamiliarityScale,
}

impl Default for AggregationPolicy {
    fn default() -> Self {
        AggregationPolicy {
            quota: DEFAULT_QUOTA,
            familiarity: FamiliarityScale::Affine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedAnswer {
    pub question_id: String,
    pub target_set: KbSet,
    /// `None` stands for the existential object.
    #[serde(serialize_with = "crate::report::serialize_opt_term")]
    pub object: Option<Term>,
    pub membership: f64,
    pub judgment_count: usize,
}

impl Serialize for KbSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("{got} judgments collected, quota is {quota}")]
    BelowQuota { got: usize, quota: usize },
    #[error("yes, no and not-sure verdicts are tied")]
    Tie,
    #[error("judgments refer to different questions")]
    MixedQuestions,
    #[error("invalid judgment: {0}")]
    Invalid(#[from] JudgmentError),
}

/// `(average confidence + average normalized familiarity) / 2`.
pub fn membership_degree(avg_confidence: f64, avg_familiarity: f64) -> f64 {
    (avg_confidence + avg_familiarity) / 2.0
}

/// Majority verdict. Exact ties between two verdicts resolve as
/// yes > no > not_sure; a three-way tie is an error.
pub fn majority_verdict(judgments: &[Judgment]) -> Result<Verdict, AggregationError> {
    let count = |v: Verdict| judgments.iter().filter(|j| j.verdict == v).count();
    let counts = [
        (Verdict::Yes, count(Verdict::Yes)),
        (Verdict::No, count(Verdict::No)),
        (Verdict::NotSure, count(Verdict::NotSure)),
    ];
    let best = counts.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let leaders: Vec<Verdict> = counts
        .iter()
        .filter(|(_, c)| *c == best)
        .map(|(v, _)| *v)
        .collect();
    if leaders.len() == 3 {
        return Err(AggregationError::Tie);
    }
    Ok(leaders[0])
}

/// Reads a worker-supplied value: N-Triples IRIs (`<...>`) and absolute
/// IRIs are kept as IRIs, everything else becomes a plain literal.
pub fn value_term(value: &str) -> Term {
    let value = value.trim();
    if value.starts_with('<') {
        if let Ok(t) = parse_field_term(value) {
            return t;
        }
    }
    if value.contains("://") && !value.contains(char::is_whitespace) {
        return Term::iri(value);
    }
    Term::literal(value)
}

pub fn aggregate_judgments(
    judgments: &[Judgment],
    policy: &AggregationPolicy,
) -> Result<AggregatedAnswer, AggregationError> {
    if judgments.len() < policy.quota.max(1) {
        return Err(AggregationError::BelowQuota {
            got: judgments.len(),
            quota: policy.quota,
        });
    }
    let question_id = judgments[0].question_id.clone();
    if judgments.iter().any(|j| j.question_id != question_id) {
        return Err(AggregationError::MixedQuestions);
    }
    for j in judgments {
        j.validate()?;
    }
    let verdict = majority_verdict(judgments)?;
    let winners: Vec<&Judgment> = judgments.iter().filter(|j| j.verdict == verdict).collect();
    let n = winners.len() as f64;
    let avg_conf = winners.iter().map(|j| j.confidence).sum::<f64>() / n;
    let avg_fam = winners
        .iter()
        .map(|j| policy.familiarity.normalize(j.familiarity))
        .sum::<f64>()
        / n;

    let object = if verdict == Verdict::Yes {
        // Plurality value; ties go to the lexicographically smallest so the
        // outcome does not depend on arrival order.
        let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
        for j in &winners {
            if let Some(v) = j.value.as_deref() {
                *tally.entry(v.trim()).or_default() += 1;
            }
        }
        let top = tally.values().copied().max().unwrap_or(0);
        tally
            .into_iter()
            .find(|(_, c)| *c == top)
            .map(|(v, _)| value_term(v))
    } else {
        None
    };

    Ok(AggregatedAnswer {
        question_id,
        target_set: verdict.target_set(),
        object,
        membership: membership_degree(avg_conf, avg_fam),
        judgment_count: judgments.len(),
    })
}

/// Stores the answer as a quad about the question's `(subject, predicate)`.
/// A plain-literal value naming a resource of `d` (by label or local name)
/// is replaced by that resource. Returns the set and object stored.
pub fn fold_into_kb(
    answer: &AggregatedAnswer,
    question: &Question,
    kb: &mut CrowdKb,
    d: &Dataset,
) -> Result<(KbSet, QuadObject), KbError> {
    let object = match (&answer.target_set, &answer.object) {
        (KbSet::Minus, _) | (_, None) => QuadObject::Existential,
        (_, Some(t)) => QuadObject::Const(resolve_value(t, d)),
    };
    let set = match (&answer.target_set, &object) {
        // a "yes" without a usable value can only be recorded as unknown
        (KbSet::Plus, QuadObject::Existential) => KbSet::Tilde,
        (s, _) => *s,
    };
    kb.insert(
        set,
        CrowdQuad::new(
            question.subject.clone(),
            question.predicate.clone(),
            object.clone(),
            answer.membership,
        ),
    )?;
    Ok((set, object))
}

fn resolve_value(t: &Term, d: &Dataset) -> Term {
    match t {
        Term::Literal {
            lexical,
            annotation: None,
        } => d.resolve_label(lexical).unwrap_or_else(|| t.clone()),
        _ => t.clone(),
    }
}
