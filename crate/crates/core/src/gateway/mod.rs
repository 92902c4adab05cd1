//! Transports between the executor and a crowd.

mod http;
mod replay;
mod sim;

pub use http::{HttpGateway, StatusCounts, DEFAULT_INTERACTIVE_CONFIDENCE};
pub use replay::{load_replay, parse_replay, ReplayError, ReplayGateway, ReplayRecord};
pub use sim::{
    sim_answer, sim_judgment, ConfidenceLaw, FamiliarityLaw, SimCrowdConfig, SimGateway,
};

use crate::microtask::{AggregatedAnswer, Microtask, Question};
use std::time::Duration;

/// Default wait for the interactive gateway.
pub const DEFAULT_HTTP_TIMEOUT: Duration = Duration::from_secs(600);

/// What a [`CrowdGateway::collect`] call produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Collected {
    pub answers: Vec<(Question, AggregatedAnswer)>,
    pub unanswered: Vec<Question>,
    pub timed_out: bool,
}

pub trait CrowdGateway {
    /// Publishes tasks and returns their ids.
    fn submit(&mut self, tasks: Vec<Microtask>) -> Vec<String>;

    /// Blocks until every question of the given tasks has an aggregated
    /// answer, or until `timeout` elapses (`None` waits indefinitely).
    /// Only answers that met the judgment quota are returned.
    fn collect(&mut self, task_ids: &[String], timeout: Option<Duration>) -> Collected;
}

/// A crowd that never answers.
#[derive(Debug, Default)]
pub struct NullGateway {
    tasks: Vec<Microtask>,
}

impl NullGateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every task submitted so far.
    pub fn submitted(&self) -> &[Microtask] {
        &self.tasks
    }
}

impl CrowdGateway for NullGateway {
    fn submit(&mut self, tasks: Vec<Microtask>) -> Vec<String> {
        let ids = tasks.iter().map(|t| t.id.clone()).collect();
        self.tasks.extend(tasks);
        ids
    }

    fn collect(&mut self, task_ids: &[String], _timeout: Option<Duration>) -> Collected {
        Collected {
            unanswered: questions_of(&self.tasks, task_ids),
            ..Collected::default()
        }
    }
}

pub(crate) fn questions_of(tasks: &[Microtask], ids: &[String]) -> Vec<Question> {
    ids.iter()
        .filter_map(|id| tasks.iter().find(|t| &t.id == id))
        .flat_map(|t| t.questions.iter().cloned())
        .collect()
}
