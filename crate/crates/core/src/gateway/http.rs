//! Live gateway for a local workforce.
//!
//! Wire protocol (JSON over HTTP):
//!
//! * `GET /tasks/next` returns one task with its open questions, or 204.
//! * `POST /judgments` accepts `{question_id, verdict, value?, confidence?,
//!   familiarity}`; `confidence` defaults to 1.0.
//! * `GET /status` returns task counts `{pending, collecting, resolved}`.
//!
//! Judgments accumulate per question until the quota is met, then the
//! answer is aggregated and any blocked [`CrowdGateway::collect`] wakes up.

use super::{Collected, CrowdGateway};
use crate::microtask::{
    aggregate_judgments, AggregatedAnswer, AggregationError, AggregationPolicy, Judgment,
    Microtask, Question, TaskStatus, Verdict,
};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use tokio::sync::oneshot;

/// Confidence assigned to judgments that do not carry one.
pub const DEFAULT_INTERACTIVE_CONFIDENCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Open,
    Answered(AggregatedAnswer),
    /// Verdicts stayed tied after twice the quota.
    Failed,
}

#[derive(Debug)]
struct QuestionState {
    question: Question,
    task_id: String,
    judgments: Vec<Judgment>,
    outcome: Outcome,
}

#[derive(Debug)]
struct TaskState {
    task: Microtask,
    served: usize,
}

#[derive(Debug)]
struct GatewayState {
    tasks: IndexMap<String, TaskState>,
    questions: HashMap<String, QuestionState>,
    policy: AggregationPolicy,
    default_confidence: f64,
    cursor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub collecting: usize,
    pub resolved: usize,
}

#[derive(Debug, Serialize)]
struct WireQuestion<'a> {
    question_id: &'a str,
    existence_text: &'a str,
    value_text: &'a str,
    subject_label: &'a str,
    predicate_label: &'a str,
}

#[derive(Debug, Serialize)]
struct WireTask<'a> {
    task_id: &'a str,
    questions: Vec<WireQuestion<'a>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireJudgment {
    question_id: String,
    verdict: Verdict,
    #[serde(default)]
    value: Option<String>,
    #[serde(default)]
    confidence: Option<f64>,
    familiarity: i64,
}

enum Rejection {
    BadRequest(String),
    UnknownQuestion(String),
    AlreadyResolved(String),
}

impl GatewayState {
    fn is_open(&self, question_id: &str) -> bool {
        self.questions
            .get(question_id)
            .is_some_and(|q| q.outcome == Outcome::Open)
    }

    fn refresh_status(&mut self, task_id: &str) {
        let Some(ts) = self.tasks.get(task_id) else {
            return;
        };
        let all_done = ts.task.questions.iter().all(|q| !self.is_open(&q.id));
        let ts = self.tasks.get_mut(task_id).expect("present");
        if all_done {
            ts.task.status = TaskStatus::Resolved;
        } else if ts.served > 0 {
            ts.task.status = TaskStatus::Collecting;
        }
    }

    /// First unresolved task still short of its quota of workers, else the
    /// unresolved tasks in rotation.
    fn next_task(&mut self) -> Option<String> {
        let quota = self.policy.quota;
        let unresolved: Vec<usize> = self
            .tasks
            .values()
            .enumerate()
            .filter(|(_, ts)| ts.task.status != TaskStatus::Resolved)
            .map(|(i, _)| i)
            .collect();
        if unresolved.is_empty() {
            return None;
        }
        let pick = unresolved
            .iter()
            .copied()
            .find(|&i| self.tasks[i].served < quota)
            .unwrap_or_else(|| {
                let i = unresolved[self.cursor % unresolved.len()];
                self.cursor = self.cursor.wrapping_add(1);
                i
            });
        let (id, ts) = self.tasks.get_index_mut(pick).expect("index in range");
        ts.served += 1;
        let id = id.clone();
        self.refresh_status(&id);
        Some(id)
    }

    fn task_json(&self, task_id: &str) -> serde_json::Value {
        let ts = &self.tasks[task_id];
        let wire = WireTask {
            task_id,
            questions: ts
                .task
                .questions
                .iter()
                .filter(|q| self.is_open(&q.id))
                .map(|q| WireQuestion {
                    question_id: &q.id,
                    existence_text: &q.existence_text,
                    value_text: &q.value_text,
                    subject_label: &q.subject_label,
                    predicate_label: &q.predicate_label,
                })
                .collect(),
        };
        serde_json::to_value(wire).expect("serializable")
    }

    /// Records a judgment; returns whether its question is now resolved.
    fn accept(&mut self, body: &[u8]) -> Result<bool, Rejection> {
        let wire: WireJudgment =
            serde_json::from_slice(body).map_err(|e| Rejection::BadRequest(e.to_string()))?;
        if !(1..=7).contains(&wire.familiarity) {
            return Err(Rejection::BadRequest(format!(
                "familiarity {} is outside 1..=7",
                wire.familiarity
            )));
        }
        let judgment = Judgment {
            question_id: wire.question_id,
            verdict: wire.verdict,
            value: wire.value,
            confidence: wire.confidence.unwrap_or(self.default_confidence),
            familiarity: wire.familiarity as u8,
        };
        judgment
            .validate()
            .map_err(|e| Rejection::BadRequest(e.to_string()))?;
        let policy = self.policy;
        let qs = self
            .questions
            .get_mut(&judgment.question_id)
            .ok_or_else(|| Rejection::UnknownQuestion(judgment.question_id.clone()))?;
        if qs.outcome != Outcome::Open {
            return Err(Rejection::AlreadyResolved(judgment.question_id.clone()));
        }
        qs.judgments.push(judgment);
        if qs.judgments.len() >= policy.quota {
            match aggregate_judgments(&qs.judgments, &policy) {
                Ok(ans) => qs.outcome = Outcome::Answered(ans),
                Err(AggregationError::Tie) if qs.judgments.len() < 2 * policy.quota => {}
                Err(_) => qs.outcome = Outcome::Failed,
            }
        }
        let resolved = qs.outcome != Outcome::Open;
        let task_id = qs.task_id.clone();
        self.refresh_status(&task_id);
        Ok(resolved)
    }

    fn status(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for ts in self.tasks.values() {
            match ts.task.status {
                TaskStatus::Pending => c.pending += 1,
                TaskStatus::Collecting => c.collecting += 1,
                TaskStatus::Resolved => c.resolved += 1,
            }
        }
        c
    }
}

#[derive(Debug)]
struct Shared {
    state: Mutex<GatewayState>,
    changed: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, GatewayState> {
        self.state.lock().expect("gateway state poisoned")
    }
}

type AppState = Arc<Shared>;

async fn next_task(State(shared): State<AppState>) -> Response {
    let mut st = shared.lock();
    match st.next_task() {
        Some(id) => Json(st.task_json(&id)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn post_judgment(State(shared): State<AppState>, body: Bytes) -> Response {
    let outcome = shared.lock().accept(&body);
    match outcome {
        Ok(resolved) => {
            shared.changed.notify_all();
            (
                StatusCode::ACCEPTED,
                Json(json!({ "accepted": true, "resolved": resolved })),
            )
                .into_response()
        }
        Err(Rejection::BadRequest(reason)) => error(StatusCode::BAD_REQUEST, reason),
        Err(Rejection::UnknownQuestion(id)) => {
            error(StatusCode::NOT_FOUND, format!("unknown question {id}"))
        }
        Err(Rejection::AlreadyResolved(id)) => error(
            StatusCode::CONFLICT,
            format!("question {id} is already resolved"),
        ),
    }
}

async fn status(State(shared): State<AppState>) -> Json<StatusCounts> {
    Json(shared.lock().status())
}

async fn preflight() -> Response {
    (
        StatusCode::NO_CONTENT,
        [
            (header::ACCESS_CONTROL_ALLOW_METHODS, "GET, POST, OPTIONS"),
            (header::ACCESS_CONTROL_ALLOW_HEADERS, "content-type"),
        ],
    )
        .into_response()
}

async fn allow_any_origin(mut res: Response) -> Response {
    res.headers_mut().insert(
        header::ACCESS_CONTROL_ALLOW_ORIGIN,
        HeaderValue::from_static("*"),
    );
    res
}

fn error(code: StatusCode, reason: String) -> Response {
    (code, Json(json!({ "error": reason }))).into_response()
}

fn router(shared: AppState) -> Router {
    Router::new()
        .route("/tasks/next", get(next_task).options(preflight))
        .route(
            "/judgments",
            axum::routing::post(post_judgment).options(preflight),
        )
        .route("/status", get(status).options(preflight))
        .layer(axum::middleware::map_response(allow_any_origin))
        .with_state(shared)
}

/// HTTP gateway serving tasks to workers from a background thread.
pub struct HttpGateway {
    shared: AppState,
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    server: Option<JoinHandle<io::Result<()>>>,
}

impl HttpGateway {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn bind(addr: impl ToSocketAddrs, policy: AggregationPolicy) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            state: Mutex::new(GatewayState {
                tasks: IndexMap::new(),
                questions: HashMap::new(),
                policy,
                default_confidence: DEFAULT_INTERACTIVE_CONFIDENCE,
                cursor: 0,
            }),
            changed: Condvar::new(),
        });
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let (tx, rx) = oneshot::channel::<()>();
        let app = router(shared.clone());
        let server = std::thread::Builder::new()
            .name("crowd-gateway".into())
            .spawn(move || {
                runtime.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener)?;
                    axum::serve(listener, app)
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        })
                        .await
                })
            })?;
        Ok(HttpGateway {
            shared,
            addr,
            shutdown: Some(tx),
            server: Some(server),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Confidence used for judgments posted without one.
    pub fn set_default_confidence(&self, confidence: f64) {
        assert!(
            (0.0..=1.0).contains(&confidence),
            "confidence lies in [0, 1]"
        );
        self.shared.lock().default_confidence = confidence;
    }

    pub fn status(&self) -> StatusCounts {
        self.shared.lock().status()
    }
}

impl CrowdGateway for HttpGateway {
    fn submit(&mut self, tasks: Vec<Microtask>) -> Vec<String> {
        let mut st = self.shared.lock();
        let mut ids = Vec::with_capacity(tasks.len());
        for task in tasks {
            for q in &task.questions {
                st.questions
                    .entry(q.id.clone())
                    .or_insert_with(|| QuestionState {
                        question: q.clone(),
                        task_id: task.id.clone(),
                        judgments: Vec::new(),
                        outcome: Outcome::Open,
                    });
            }
            ids.push(task.id.clone());
            st.tasks
                .entry(task.id.clone())
                .or_insert(TaskState { task, served: 0 });
        }
        drop(st);
        self.shared.changed.notify_all();
        ids
    }

    fn collect(&mut self, task_ids: &[String], timeout: Option<Duration>) -> Collected {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut st = self.shared.lock();
        let question_ids: Vec<String> = task_ids
            .iter()
            .filter_map(|id| st.tasks.get(id))
            .flat_map(|ts| ts.task.questions.iter().map(|q| q.id.clone()))
            .collect();
        let mut timed_out = false;
        while question_ids.iter().any(|id| st.is_open(id)) {
            match deadline {
                None => {
                    st = self
                        .shared
                        .changed
                        .wait(st)
                        .expect("gateway state poisoned")
                }
                Some(deadline) => {
                    let now = Instant::now();
                    if now >= deadline {
                        timed_out = true;
                        break;
                    }
                    st = self
                        .shared
                        .changed
                        .wait_timeout(st, deadline - now)
                        .expect("gateway state poisoned")
                        .0;
                }
            }
        }
        let mut out = Collected {
            timed_out,
            ..Collected::default()
        };
        for id in &question_ids {
            let qs = &st.questions[id];
            match &qs.outcome {
                Outcome::Answered(ans) => out.answers.push((qs.question.clone(), ans.clone())),
                Outcome::Open | Outcome::Failed => out.unanswered.push(qs.question.clone()),
            }
        }
        out
    }
}

impl Drop for HttpGateway {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(server) = self.server.take() {
            let _ = server.join();
        }
    }
}
