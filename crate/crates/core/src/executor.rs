//! Hybrid query execution.
//!
//! Data sub-queries are bind-joined against the local store. For a crowd
//! sub-query every distinct `(subject, predicate)` instantiation passes a
//! gate: it is crowdsourced only when the data set and the crowd knowledge
//! together look incomplete and the crowdsourcing probability
//!
//! ```text
//! P = alpha * (1 - comp) + (1 - alpha) * min(D, 1 - U)
//! ```
//!
//! exceeds `tau`. The crowd sub-query is then evaluated over the data set
//! united with the constant-object facts of the positive knowledge base.

use crate::decompose::{decompose, SubQuery, SubQueryKind};
use crate::eval::{bind_join, resolve, WithCrowdFacts};
use crate::gateway::CrowdGateway;
use crate::kb::{CrowdKb, KbError, KbSelection, KbSet, QuadObject};
use crate::microtask::{
    build_tasks, fold_into_kb, CrowdTriple, Question, DEFAULT_QUESTIONS_PER_TASK,
};
use crate::plan::{build_plan, describe};
use crate::quality::{AggregationFn, QualityModel};
use crate::query::{BgpQuery, Variable};
use crate::solution::SolutionSet;
use crate::store::Dataset;
use crate::term::Term;
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionConfig {
    pub tau: f64,
    pub alpha: f64,
    pub aggregation: AggregationFn,
    pub kb_sets_for_gate: KbSelection,
    pub crowd_enabled: bool,
    pub questions_per_task: usize,
    /// `None` waits for the crowd indefinitely.
    pub timeout: Option<Duration>,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            tau: 0.02,
            alpha: 0.5,
            aggregation: AggregationFn::Median,
            kb_sets_for_gate: KbSelection::PLUS,
            crowd_enabled: true,
            questions_per_task: DEFAULT_QUESTIONS_PER_TASK,
            timeout: None,
        }
    }
}

impl ExecutionConfig {
    pub fn validate(&self) -> Result<(), ExecutionError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ExecutionError::Config(format!(
                "tau {} is outside [0, 1]",
                self.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ExecutionError::Config(format!(
                "alpha {} is outside [0, 1]",
                self.alpha
            )));
        }
        if self.kb_sets_for_gate.is_empty() {
            return Err(ExecutionError::Config(
                "no knowledge-base set selected for the gate".into(),
            ));
        }
        if self.questions_per_task == 0 {
            return Err(ExecutionError::Config(
                "a task holds at least one question".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExecutionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// `alpha * (1 - comp) + (1 - alpha) * min(dis, 1 - unc)`. Not clamped:
/// `comp > 1` yields a smaller value, which the gate never reaches.
pub fn crowd_probability(comp: f64, dis: f64, unc: f64, alpha: f64) -> f64 {
    alpha * (1.0 - comp) + (1.0 - alpha) * dis.min(1.0 - unc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    /// Data set plus crowd knowledge already reach the class aggregate.
    Complete,
    /// Probability at or below `tau`.
    BelowThreshold,
    /// Would have been crowdsourced, but the crowd is switched off.
    CrowdDisabled,
    Crowdsourced,
}

impl fmt::Display for GateDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateDecision::Complete => "complete",
            GateDecision::BelowThreshold => "below_threshold",
            GateDecision::CrowdDisabled => "crowd_disabled",
            GateDecision::Crowdsourced => "crowdsourced",
        })
    }
}

/// One gate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateRecord {
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub subject: Term,
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub predicate: Term,
    pub comp_d: f64,
    pub comp_kb: f64,
    pub disagreement: f64,
    pub uncertainty: f64,
    pub probability: f64,
    pub decision: GateDecision,
}

impl fmt::Display for GateRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gate s={} p={} comp_d={} comp_kb={} D={} U={} P={} decision={}",
            self.subject,
            self.predicate,
            self.comp_d,
            self.comp_kb,
            self.disagreement,
            self.uncertainty,
            self.probability,
            self.decision
        )
    }
}

/// One crowd answer as stored in the knowledge base. `object` is `None`
/// for "no value" and for unknowns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrowdAnswer {
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub subject: Term,
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub predicate: Term,
    #[serde(serialize_with = "crate::report::serialize_opt_term")]
    pub object: Option<Term>,
    pub set: KbSet,
    pub membership: f64,
    pub judgments: usize,
}

/// Tasks sent to the crowd for one crowd sub-query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Batch {
    pub subquery: String,
    pub task_ids: Vec<String>,
    pub questions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub solutions: SolutionSet,
    pub plan: String,
    pub trace: Vec<GateRecord>,
    pub batches: Vec<Batch>,
    pub answers: Vec<CrowdAnswer>,
    pub unanswered: Vec<Question>,
    pub timed_out: bool,
}

impl Execution {
    pub fn crowdsourced_count(&self) -> usize {
        self.trace
            .iter()
            .filter(|r| r.decision == GateDecision::Crowdsourced)
            .count()
    }

    pub fn task_count(&self) -> usize {
        self.batches.iter().map(|b| b.task_ids.len()).sum()
    }

    /// Total judgments behind the collected answers.
    pub fn response_count(&self) -> usize {
        self.answers.iter().map(|a| a.judgments).sum()
    }
}

/// Evaluates the gate for every distinct `(s, p)` instantiation of the
/// crowd patterns in `sq` under the bindings of `omega`.
pub fn gate(
    sq: &SubQuery,
    omega: &SolutionSet,
    model: &QualityModel<'_>,
    kb: &CrowdKb,
    cfg: &ExecutionConfig,
) -> Vec<GateRecord> {
    let shared: BTreeSet<Variable> = sq
        .variables()
        .into_iter()
        .filter(|v| omega.schema().contains(*v))
        .cloned()
        .collect();
    let projected = omega.project(&shared);
    let mut seen: BTreeSet<(Term, Term)> = BTreeSet::new();
    let mut out = Vec::new();
    for t in &sq.patterns {
        let Some(p) = t.predicate.as_const() else {
            continue;
        };
        for mu in &projected {
            // An unbound subject cannot be phrased as a question.
            let Some(s) = resolve(&t.subject, mu) else {
                continue;
            };
            if !seen.insert((s.clone(), p.clone())) {
                continue;
            }
            let comp_d = model.completeness_d(s, p);
            let comp_kb = model.completeness_kb(kb, s, p, cfg.kb_sets_for_gate);
            let disagreement = kb.disagreement(s, p);
            let uncertainty = kb.uncertainty(s, p);
            let probability =
                crowd_probability(comp_d + comp_kb, disagreement, uncertainty, cfg.alpha);
            let decision = if comp_d + comp_kb >= 1.0 {
                GateDecision::Complete
            } else if probability <= cfg.tau {
                GateDecision::BelowThreshold
            } else if !cfg.crowd_enabled {
                GateDecision::CrowdDisabled
            } else {
                GateDecision::Crowdsourced
            };
            out.push(GateRecord {
                subject: s.clone(),
                predicate: p.clone(),
                comp_d,
                comp_kb,
                disagreement,
                uncertainty,
                probability,
                decision,
            });
        }
    }
    out
}

/// Runs `q` over `d`, asking `gateway` for likely-missing values and
/// folding the answers into `kb`.
pub fn execute(
    q: &BgpQuery,
    d: &Dataset,
    kb: &mut CrowdKb,
    cfg: &ExecutionConfig,
    gateway: &mut dyn CrowdGateway,
) -> Result<Execution, ExecutionError> {
    cfg.validate()?;
    let model = QualityModel::new(d, cfg.aggregation);
    let plan = build_plan(&decompose(q), d);
    let mut exec = Execution {
        solutions: SolutionSet::identity(),
        plan: describe(&plan),
        trace: Vec::new(),
        batches: Vec::new(),
        answers: Vec::new(),
        unanswered: Vec::new(),
        timed_out: false,
    };
    let mut omega = SolutionSet::identity();

    for step in &plan {
        let sq = &step.subquery;
        match sq.kind {
            SubQueryKind::Data => {
                omega = bind_join(d, sq, &omega);
            }
            SubQueryKind::Crowd => {
                let records = gate(sq, &omega, &model, kb, cfg);
                let queued: Vec<CrowdTriple> = records
                    .iter()
                    .filter(|r| r.decision == GateDecision::Crowdsourced)
                    .map(|r| CrowdTriple {
                        subject: r.subject.clone(),
                        predicate: r.predicate.clone(),
                    })
                    .collect();
                exec.trace.extend(records);
                if !queued.is_empty() {
                    let tasks = build_tasks(&queued, d, cfg.questions_per_task);
                    let ids = gateway.submit(tasks);
                    let collected = gateway.collect(&ids, cfg.timeout);
                    for (question, ans) in &collected.answers {
                        let (set, object) = fold_into_kb(ans, question, kb, d)?;
                        exec.answers.push(CrowdAnswer {
                            subject: question.subject.clone(),
                            predicate: question.predicate.clone(),
                            object: match object {
                                QuadObject::Const(t) => Some(t),
                                QuadObject::Existential => None,
                            },
                            set,
                            membership: ans.membership,
                            judgments: ans.judgment_count,
                        });
                    }
                    exec.batches.push(Batch {
                        subquery: sq.to_string(),
                        task_ids: ids,
                        questions: queued.len(),
                    });
                    exec.unanswered.extend(collected.unanswered);
                    exec.timed_out |= collected.timed_out;
                }
                let src = WithCrowdFacts { dataset: d, kb };
                omega = bind_join(&src, sq, &omega);
            }
        }
    }

    let projected: BTreeSet<Variable> = q.projected_variables().into_iter().collect();
    exec.solutions = omega.project(&projected);
    Ok(exec)
}
