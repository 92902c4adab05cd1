use hybrid_sparql::gateway::{CrowdGateway, HttpGateway};
use hybrid_sparql::microtask::{build_tasks, AggregationPolicy, CrowdTriple};
use hybrid_sparql::{
    execute, parse_ntriples, parse_query, CrowdKb, Dataset, ExecutionConfig, KbSet, Term,
};
use serde_json::{json, Value};
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

struct Reply {
    status: u16,
    headers: Vec<(String, String)>,
    body: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {:?}", self.body))
    }

    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

fn request(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> Reply {
    let mut stream = TcpStream::connect(addr).expect("connect");
    stream
        .set_read_timeout(Some(Duration::from_secs(10)))
        .unwrap();
    let body = body.unwrap_or("");
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, rest) = raw.split_once("\r\n\r\n").expect("header terminator");
    let mut lines = head.lines();
    let status = lines
        .next()
        .unwrap()
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let headers: Vec<(String, String)> = lines
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    let chunked = headers
        .iter()
        .any(|(k, v)| k.eq_ignore_ascii_case("transfer-encoding") && v.contains("chunked"));
    let body = if chunked {
        dechunk(rest)
    } else {
        rest.to_string()
    };
    Reply {
        status,
        headers,
        body,
    }
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    loop {
        let (size, rest) = s.split_once("\r\n").expect("chunk size");
        let n = usize::from_str_radix(size.trim(), 16).expect("hex chunk size");
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
}

fn post(addr: SocketAddr, body: Value) -> Reply {
    request(addr, "POST", "/judgments", Some(&body.to_string()))
}

fn capitals() -> Dataset {
    parse_ntriples(include_str!("../fixtures/capitals.nt")).unwrap()
}

fn res(local: &str) -> Term {
    Term::iri(format!("http://dbpedia.org/resource/{local}"))
}

fn country() -> Term {
    Term::iri("http://dbpedia.org/ontology/country")
}

fn gateway(quota: usize) -> HttpGateway {
    let policy = AggregationPolicy {
        quota,
        ..AggregationPolicy::default()
    };
    HttpGateway::bind("127.0.0.1:0", policy).expect("bind")
}

/// One task with one question about `city`.
fn submit_one(gw: &mut HttpGateway, city: &str) -> (Vec<String>, String) {
    let d = capitals();
    let tasks = build_tasks(
        &[CrowdTriple {
            subject: res(city),
            predicate: country(),
        }],
        &d,
        4,
    );
    let qid = tasks[0].questions[0].id.clone();
    (gw.submit(tasks), qid)
}

#[test]
fn empty_queue_answers_no_content() {
    let gw = gateway(3);
    let r = request(gw.local_addr(), "GET", "/tasks/next", None);
    assert_eq!(r.status, 204);
    assert!(r.body.is_empty());
    let s = request(gw.local_addr(), "GET", "/status", None).json();
    assert_eq!(s, json!({ "pending": 0, "collecting": 0, "resolved": 0 }));
}

#[test]
fn task_shape_and_cors() {
    let mut gw = gateway(3);
    let (ids, qid) = submit_one(&mut gw, "Madrid");
    let addr = gw.local_addr();
    assert_eq!(request(addr, "GET", "/status", None).json()["pending"], 1);

    let r = request(addr, "GET", "/tasks/next", None);
    assert_eq!(r.status, 200);
    assert_eq!(r.header("access-control-allow-origin"), Some("*"));
    let task = r.json();
    assert_eq!(task["task_id"], ids[0].as_str());
    let q = &task["questions"][0];
    assert_eq!(q["question_id"], qid.as_str());
    assert_eq!(q["existence_text"], "Does Madrid have a country?");
    assert_eq!(q["subject_label"], "Madrid");
    assert_eq!(q["predicate_label"], "country");
    assert!(q["value_text"].as_str().unwrap().contains("Madrid"));
    assert_eq!(
        request(addr, "GET", "/status", None).json()["collecting"],
        1
    );

    let pre = request(addr, "OPTIONS", "/judgments", None);
    assert_eq!(pre.status, 204);
    assert_eq!(pre.header("access-control-allow-origin"), Some("*"));
    assert!(pre
        .header("access-control-allow-methods")
        .unwrap()
        .contains("POST"));
}

#[test]
fn rejects_bad_judgments() {
    let mut gw = gateway(3);
    let (_, qid) = submit_one(&mut gw, "Madrid");
    let addr = gw.local_addr();

    let r = post(
        addr,
        json!({ "question_id": qid, "verdict": "yes", "familiarity": 5 }),
    );
    assert_eq!(r.status, 400, "yes without a value");
    assert!(r.json()["error"].is_string());
    let r = post(
        addr,
        json!({ "question_id": qid, "verdict": "no", "familiarity": 9 }),
    );
    assert_eq!(r.status, 400, "familiarity out of range");
    let r = post(
        addr,
        json!({ "question_id": qid, "verdict": "no", "familiarity": 4, "confidence": 1.5 }),
    );
    assert_eq!(r.status, 400, "confidence out of range");
    let r = post(
        addr,
        json!({ "question_id": qid, "verdict": "maybe", "familiarity": 4 }),
    );
    assert_eq!(r.status, 400, "unknown verdict");
    let r = post(
        addr,
        json!({ "question_id": qid, "verdict": "no", "familiarity": 4, "extra": 1 }),
    );
    assert_eq!(r.status, 400, "unknown field");
    let r = request(addr, "POST", "/judgments", Some("{not json"));
    assert_eq!(r.status, 400);
    let r = post(
        addr,
        json!({ "question_id": "q0", "verdict": "no", "familiarity": 4 }),
    );
    assert_eq!(r.status, 404);
}

#[test]
fn quota_resolves_and_collect_returns_answer() {
    let mut gw = gateway(3);
    let (ids, qid) = submit_one(&mut gw, "Madrid");
    let addr = gw.local_addr();
    for i in 0..3 {
        let r = post(
            addr,
            json!({
                "question_id": qid,
                "verdict": "yes",
                "value": "http://dbpedia.org/resource/Spain",
                "confidence": 1.0,
                "familiarity": 7,
            }),
        );
        assert_eq!(r.status, 202);
        assert_eq!(r.json(), json!({ "accepted": true, "resolved": i == 2 }));
    }
    let late = post(
        addr,
        json!({ "question_id": qid, "verdict": "no", "familiarity": 4 }),
    );
    assert_eq!(late.status, 409);
    assert_eq!(request(addr, "GET", "/status", None).json()["resolved"], 1);
    assert_eq!(request(addr, "GET", "/tasks/next", None).status, 204);

    let got = gw.collect(&ids, Some(Duration::from_secs(5)));
    assert!(!got.timed_out);
    assert!(got.unanswered.is_empty());
    assert_eq!(got.answers.len(), 1);
    let (q, ans) = &got.answers[0];
    assert_eq!(q.id, qid);
    assert_eq!(ans.target_set, KbSet::Plus);
    assert_eq!(ans.object, Some(res("Spain")));
    assert_eq!(ans.membership, 1.0);
    assert_eq!(ans.judgment_count, 3);
}

#[test]
fn collect_times_out_with_open_questions() {
    let mut gw = gateway(3);
    let (ids, qid) = submit_one(&mut gw, "Helsinki");
    let start = Instant::now();
    let got = gw.collect(&ids, Some(Duration::from_millis(200)));
    assert!(start.elapsed() >= Duration::from_millis(200));
    assert!(got.timed_out);
    assert!(got.answers.is_empty());
    assert_eq!(got.unanswered.len(), 1);
    assert_eq!(got.unanswered[0].id, qid);
}

#[test]
fn tied_verdicts_need_more_judgments() {
    let mut gw = gateway(3);
    let (ids, qid) = submit_one(&mut gw, "Monaco");
    let addr = gw.local_addr();
    let yes = json!({ "question_id": qid, "verdict": "yes", "value": "Monaco", "familiarity": 4 });
    let no = json!({ "question_id": qid, "verdict": "no", "familiarity": 4 });
    let unsure = json!({ "question_id": qid, "verdict": "not_sure", "familiarity": 4 });
    assert_eq!(post(addr, yes).json()["resolved"], false);
    assert_eq!(post(addr, no.clone()).json()["resolved"], false);
    // quota met, but yes, no and not_sure are tied
    assert_eq!(post(addr, unsure).json()["resolved"], false);
    assert_eq!(post(addr, no).json()["resolved"], true);
    let got = gw.collect(&ids, Some(Duration::from_secs(5)));
    assert_eq!(got.answers.len(), 1);
    assert_eq!(got.answers[0].1.target_set, KbSet::Minus);
    assert_eq!(got.answers[0].1.judgment_count, 4);
}

#[test]
fn concurrent_workers() {
    let mut gw = gateway(3);
    let d = capitals();
    let cities = [
        "Madrid",
        "Helsinki",
        "Edinburgh",
        "Gibraltar",
        "Pristina",
        "Monaco",
    ];
    let triples: Vec<CrowdTriple> = cities
        .iter()
        .map(|c| CrowdTriple {
            subject: res(c),
            predicate: country(),
        })
        .collect();
    let tasks = build_tasks(&triples, &d, 4);
    let qids: Vec<String> = tasks
        .iter()
        .flat_map(|t| t.questions.iter().map(|q| q.id.clone()))
        .collect();
    let ids = gw.submit(tasks);
    let addr = gw.local_addr();
    let workers: Vec<_> = (0..3)
        .map(|_| {
            let qids = qids.clone();
            thread::spawn(move || {
                for qid in &qids {
                    let r = post(
                        addr,
                        json!({ "question_id": qid, "verdict": "no", "familiarity": 3 }),
                    );
                    assert_eq!(r.status, 202);
                }
            })
        })
        .collect();
    let got = gw.collect(&ids, Some(Duration::from_secs(20)));
    for w in workers {
        w.join().unwrap();
    }
    assert!(!got.timed_out);
    assert_eq!(got.answers.len(), 6);
    assert!(got
        .answers
        .iter()
        .all(|(_, a)| a.target_set == KbSet::Minus && a.judgment_count == 3));
    assert_eq!(gw.status().resolved, 2);
}

#[test]
fn end_to_end_query_over_http() {
    let d = capitals();
    let q = parse_query(include_str!("../fixtures/listing1.rq")).unwrap();
    let mut gw = gateway(3);
    let addr = gw.local_addr();
    let engine = thread::spawn(move || {
        let mut kb = CrowdKb::new();
        let cfg = ExecutionConfig {
            timeout: Some(Duration::from_secs(30)),
            ..ExecutionConfig::default()
        };
        let ex = execute(&q, &d, &mut kb, &cfg, &mut gw).unwrap();
        (ex, kb)
    });

    // Wait for the engine to publish its questions.
    let start = Instant::now();
    while request(addr, "GET", "/status", None).json()["pending"] == 0 {
        assert!(
            start.elapsed() < Duration::from_secs(10),
            "no tasks published"
        );
        thread::sleep(Duration::from_millis(20));
    }
    let mut posted = 0;
    loop {
        let r = request(addr, "GET", "/tasks/next", None);
        if r.status == 204 {
            break;
        }
        for q in r.json()["questions"].as_array().unwrap() {
            let body = if q["subject_label"] == "Madrid" {
                json!({
                    "question_id": q["question_id"],
                    "verdict": "yes",
                    "value": "http://dbpedia.org/resource/Spain",
                    "confidence": 1.0,
                    "familiarity": 7,
                })
            } else {
                json!({ "question_id": q["question_id"], "verdict": "no", "familiarity": 4 })
            };
            if post(addr, body).status == 202 {
                posted += 1;
            }
        }
    }
    assert_eq!(posted, 27);

    let (ex, kb) = engine.join().unwrap();
    assert!(!ex.timed_out);
    assert_eq!(ex.crowdsourced_count(), 9);
    assert_eq!(ex.task_count(), 3);
    assert_eq!(ex.answers.len(), 9);
    let madrid = ex
        .answers
        .iter()
        .find(|a| a.subject == res("Madrid"))
        .unwrap();
    assert_eq!(madrid.set, KbSet::Plus);
    assert_eq!(madrid.object, Some(res("Spain")));
    assert_eq!(madrid.membership, 1.0);
    assert_eq!(kb.len(KbSet::Plus), 1);
    assert_eq!(kb.len(KbSet::Minus), 8);
    // five machine answers plus Madrid
    assert_eq!(ex.solutions.len(), 6);
}
