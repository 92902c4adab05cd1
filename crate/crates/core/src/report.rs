//! Run reports in plain text or JSON lines.

use crate::executor::{CrowdAnswer, Execution, GateRecord};
use crate::metrics::Scores;
use crate::quality::CompletenessReport;
use crate::solution::SolutionSet;
use crate::term::Term;
use serde::Serializer;
use serde_json::{json, Map, Value};
use std::fmt::Write as _;
use std::str::FromStr;

/// Serializes a term in N-Triples syntax.
pub fn serialize_term<S: Serializer>(t: &Term, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(t)
}

pub fn serialize_opt_term<S: Serializer>(t: &Option<Term>, s: S) -> Result<S::Ok, S::Error> {
    match t {
        Some(t) => s.collect_str(t),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Jsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?} (expected text or jsonl)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub plan: String,
    pub answers: SolutionSet,
    pub crowdsourced_count: usize,
    pub task_count: usize,
    pub response_count: usize,
    pub gate_trace: Vec<GateRecord>,
    pub crowd_answers: Vec<CrowdAnswer>,
    /// Existence texts of questions left without an answer.
    pub unanswered: Vec<String>,
    pub timed_out: bool,
    pub metrics: Option<Scores>,
}

impl RunReport {
    pub fn new(exec: &Execution, metrics: Option<Scores>) -> Self {
        RunReport {
            plan: exec.plan.clone(),
            answers: exec.solutions.clone(),
            crowdsourced_count: exec.crowdsourced_count(),
            task_count: exec.task_count(),
            response_count: exec.response_count(),
            gate_trace: exec.trace.clone(),
            crowd_answers: exec.answers.clone(),
            unanswered: exec
                .unanswered
                .iter()
                .map(|q| q.existence_text.clone())
                .collect(),
            timed_out: exec.timed_out,
            metrics,
        }
    }

    /// Answer rows in a stable order.
    fn sorted_rows(&self) -> Vec<Vec<(String, String)>> {
        let mut rows: Vec<Vec<(String, String)>> = self
            .answers
            .iter()
            .map(|m| {
                m.iter()
                    .map(|(v, t)| (v.to_string(), t.to_string()))
                    .collect()
            })
            .collect();
        rows.sort();
        rows
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Jsonl => self.to_jsonl(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "plan: {}", self.plan);
        for g in &self.gate_trace {
            let _ = writeln!(out, "{g}");
        }
        let _ = writeln!(
            out,
            "crowdsourced triples: {}  tasks: {}  crowd responses: {}",
            self.crowdsourced_count, self.task_count, self.response_count
        );
        for a in &self.crowd_answers {
            let object = a.object.as_ref().map_or("_:o".to_string(), Term::to_string);
            let _ = writeln!(
                out,
                "crowd {} {} {} {} m={}",
                a.set, a.subject, a.predicate, object, a.membership
            );
        }
        if self.timed_out {
            let _ = writeln!(out, "timed out waiting for the crowd");
        }
        for q in &self.unanswered {
            let _ = writeln!(out, "unanswered: {q}");
        }
        let rows = self.sorted_rows();
        let _ = writeln!(out, "answers: {}", rows.len());
        for row in rows {
            let cells: Vec<String> = row.iter().map(|(v, t)| format!("{v}={t}")).collect();
            let _ = writeln!(out, "  {}", cells.join(" "));
        }
        if let Some(m) = &self.metrics {
            let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(
                out,
                "precision: {}  recall: {}  f-measure: {}",
                fmt(m.precision),
                fmt(m.recall),
                fmt(m.f_measure)
            );
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut lines: Vec<Value> = vec![json!({ "type": "plan", "plan": self.plan })];
        for g in &self.gate_trace {
            let mut v = serde_json::to_value(g).expect("serializable");
            v["type"] = json!("gate");
            lines.push(v);
        }
        for a in &self.crowd_answers {
            let mut v = serde_json::to_value(a).expect("serializable");
            v["type"] = json!("crowd_answer");
            lines.push(v);
        }
        for q in &self.unanswered {
            lines.push(json!({ "type": "unanswered", "question": q }));
        }
        for row in self.sorted_rows() {
            let mut m = Map::new();
            m.insert("type".into(), json!("answer"));
            let bindings: Map<String, Value> = row
                .into_iter()
                .map(|(v, t)| (v, Value::String(t)))
                .collect();
            m.insert("bindings".into(), Value::Object(bindings));
            lines.push(Value::Object(m));
        }
        lines.push(json!({
            "type": "summary",
            "answers": self.answers.len(),
            "crowdsourced": self.crowdsourced_count,
            "tasks": self.task_count,
            "responses": self.response_count,
            "timed_out": self.timed_out,
            "metrics": self.metrics,
        }));
        let mut out = String::new();
        for l in lines {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out
    }
}

/// Completeness rows as tab-separated text with a header line.
pub fn profile_tsv(rows: &[CompletenessReport]) -> String {
    let mut out = String::from(CompletenessReport::TSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_tsv());
        out.push('\n');
    }
    out
}

pub fn profile_jsonl(rows: &[CompletenessReport]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{execute, ExecutionConfig};
    use crate::gateway::NullGateway;
    use crate::kb::CrowdKb;
    use crate::ntriples::parse_ntriples;
    use crate::query::parse_query;

    fn worked_report() -> RunReport {
        let d = parse_ntriples(include_str!("../fixtures/figure2.nt")).unwrap();
        let q = parse_query(include_str!("../fixtures/figure3.rq")).unwrap();
        let mut kb = CrowdKb::load(include_str!("../fixtures/figure3_kb.csv").as_bytes()).unwrap();
        let cfg = ExecutionConfig {
            tau: 0.6,
            ..ExecutionConfig::default()
        };
        let ex = execute(&q, &d, &mut kb, &cfg, &mut NullGateway::new()).unwrap();
        RunReport::new(&ex, None)
    }

    #[test]
    fn text_report() {
        let text = worked_report().to_text();
        assert!(text.contains("answers: 6"));
        assert!(text.contains("crowdsourced triples: 1"));
        assert_eq!(text.lines().filter(|l| l.starts_with("gate ")).count(), 4);
        assert!(text.contains("unanswered: Does Legal Eagles have a producer?"));
    }

    #[test]
    fn jsonl_report_lines_parse() {
        let out = worked_report().to_jsonl();
        let values: Vec<Value> = out
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(values.iter().filter(|v| v["type"] == "answer").count(), 6);
        let gates: Vec<&Value> = values.iter().filter(|v| v["type"] == "gate").collect();
        assert_eq!(gates.len(), 4);
        assert_eq!(gates[2]["decision"], "crowdsourced");
        assert_eq!(values.last().unwrap()["crowdsourced"], 1);
    }

    #[test]
    fn formats() {
        assert_eq!("text".parse::<Format>(), Ok(Format::Text));
        assert_eq!("jsonl".parse::<Format>(), Ok(Format::Jsonl));
        assert!("xml".parse::<Format>().is_err());
    }
}
