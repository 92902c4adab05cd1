use serde_json::Value;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::time::Duration;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-sparql"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn f(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn worked_example_with_simulated_crowd() {
    let o = run(&[
        "run",
        &f("figure2.nt"),
        &f("figure3.rq"),
        "--crowd",
        "sim",
        "--tau",
        "0.6",
        "--kb-in",
        &f("figure3_kb.csv"),
    ]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(
        out.contains("crowdsourced triples: 1  tasks: 1  crowd responses: 3"),
        "{out}"
    );
    assert_eq!(out.lines().filter(|l| l.starts_with("gate ")).count(), 4);
    // the sixth answer is the stored KB+ producer of Tower Heist
    assert!(out.contains("answers: 6"), "{out}");
}

#[test]
fn crowd_off_gives_machine_answers() {
    let o = run(&["run", &f("figure2.nt"), &f("figure3.rq")]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("answers: 5"), "{out}");
    assert!(out.contains("decision=crowd_disabled"), "{out}");
    assert!(out.contains("crowdsourced triples: 0"));
}

#[test]
fn malformed_query_fails() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("bad.rq");
    std::fs::write(&q, "SELECT ?x WHERE { ?x foo:bar ?y }").unwrap();
    let o = run(&["run", &f("figure2.nt"), q.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("foo"), "{err}");
}

#[test]
fn missing_data_file_fails() {
    let o = run(&["run", "/nonexistent.nt", &f("figure3.rq")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn profile_prints_class_multiplicity() {
    let o = run(&[
        "profile",
        &f("figure2.nt"),
        "--class",
        "http://schema.org/Movie",
        "--predicate",
        "http://dbpedia.org/property/producer",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("# aggregated multiplicity (median) of <http://schema.org/Movie> over <http://dbpedia.org/property/producer>: 3")
    );
    assert_eq!(
        lines.next(),
        Some("subject\tpredicate\tm_d\tam_best\tcomp_d\tcomp_kb_plus")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn profile_jsonl() {
    let o = run(&[
        "profile",
        &f("figure2_ext.nt"),
        "--predicate",
        "http://dbpedia.org/property/producer",
        "--format",
        "jsonl",
    ]);
    assert!(o.status.success());
    let rows: Vec<Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let interpreter = rows
        .iter()
        .find(|r| r["subject"] == "<http://dbpedia.org/resource/The_Interpreter>")
        .expect("row for The Interpreter");
    assert_eq!(interpreter["comp_d"], 0.6);
}

#[test]
fn profile_of_empty_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("empty.nt");
    std::fs::write(&d, "").unwrap();
    let o = run(&["profile", d.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "subject\tpredicate\tm_d\tam_best\tcomp_d\tcomp_kb_plus\n"
    );
}

#[test]
fn kb_written_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.csv");
    let kb = kb.to_str().unwrap();
    let args = [
        "run",
        &f("capitals.nt"),
        &f("listing1.rq"),
        "--crowd",
        "replay",
        "--replay",
        &f("table1_replay.csv"),
        "--gold",
        &f("capitals_gold.csv"),
    ];
    let mut first: Vec<&str> = args.to_vec();
    first.extend(["--kb-out", kb]);
    let o = run(&first);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(out.contains("crowdsourced triples: 9"), "{out}");
    assert!(
        out.contains("precision: 1.0000  recall: 1.0000  f-measure: 1.0000"),
        "{out}"
    );
    assert!(out.contains("answers: 13"), "{out}");

    // Only KB+ counts toward completeness by default, so the pair with a
    // negative answer is asked again.
    let o = run(&[
        "run",
        &f("capitals.nt"),
        &f("listing1.rq"),
        "--crowd",
        "sim",
        "--kb-in",
        kb,
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("crowdsourced triples: 1"), "{out}");
    assert!(
        out.contains("Monaco> p=<http://dbpedia.org/ontology/country> comp_d=0 comp_kb=0"),
        "{out}"
    );
    assert!(out.contains("answers: 13"), "{out}");

    let o = run(&[
        "run",
        &f("capitals.nt"),
        &f("listing1.rq"),
        "--crowd",
        "sim",
        "--kb-in",
        kb,
        "--gate-sets",
        "plus,minus",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("crowdsourced triples: 0"), "{out}");
    assert!(out.contains("answers: 13"), "{out}");
}

#[test]
fn jsonl_run_report() {
    let o = run(&[
        "run",
        &f("figure2.nt"),
        &f("figure3.rq"),
        "--format",
        "jsonl",
    ]);
    assert!(o.status.success());
    let lines: Vec<Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["type"], "plan");
    assert_eq!(lines.iter().filter(|l| l["type"] == "answer").count(), 5);
    let summary = lines.last().unwrap();
    assert_eq!(summary["type"], "summary");
    assert_eq!(summary["answers"], 5);
}

#[test]
fn serve_times_out_without_workers() {
    let o = run(&[
        "serve",
        &f("capitals.nt"),
        &f("listing1.rq"),
        "--bind",
        "127.0.0.1:0",
        "--timeout",
        "0.3",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    assert!(out.contains("timed out waiting for the crowd"), "{out}");
    assert_eq!(
        out.lines()
            .filter(|l| l.starts_with("unanswered: "))
            .count(),
        9
    );
    assert!(out.contains("answers: 5"), "{out}");
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("serving tasks on http://127.0.0.1:"), "{err}");
}

#[test]
fn serve_collects_worker_answers() {
    let mut child = bin()
        .args([
            "serve",
            &f("capitals.nt"),
            &f("listing1.rq"),
            "--bind",
            "127.0.0.1:0",
            "--judgments",
            "1",
            "--timeout",
            "30",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut err = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    err.read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("serving tasks on http://")
        .expect("address line")
        .to_string();

    let agent = |method: &str, path: &str, body: Option<String>| -> (u16, String) {
        use std::io::{Read, Write};
        let mut s = std::net::TcpStream::connect(&addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        let body = body.unwrap_or_default();
        write!(
            s,
            "{method} {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        let mut raw = String::new();
        s.read_to_string(&mut raw).unwrap();
        let code = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
        let body = raw
            .split_once("\r\n\r\n")
            .map(|(_, b)| b.to_string())
            .unwrap_or_default();
        (code, body)
    };

    let mut answered = 0;
    for _ in 0..50 {
        let (code, body) = agent("GET", "/tasks/next", None);
        if code == 204 {
            if answered > 0 {
                break;
            }
            std::thread::sleep(Duration::from_millis(20));
            continue;
        }
        let task: Value = serde_json::from_str(&body).unwrap();
        for q in task["questions"].as_array().unwrap() {
            let j = if q["subject_label"] == "Helsinki" {
                serde_json::json!({ "question_id": q["question_id"], "verdict": "yes", "value": "http://dbpedia.org/resource/Finland", "familiarity": 6 })
            } else {
                serde_json::json!({ "question_id": q["question_id"], "verdict": "no", "familiarity": 6 })
            };
            let (code, _) = agent("POST", "/judgments", Some(j.to_string()));
            assert_eq!(code, 202);
            answered += 1;
        }
    }
    assert_eq!(answered, 9);
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("answers: 6"), "{text}");
    assert!(
        text.contains("crowd plus <http://dbpedia.org/resource/Helsinki>"),
        "{text}"
    );
    assert!(
        text.contains("?country=<http://dbpedia.org/resource/Finland>"),
        "{text}"
    );
}
