//! Random graphs, random queries, and a brute-force BGP oracle shared by the
//! integration tests.
#![allow(dead_code)]

use hybrid_sparql::query::{PatternTerm, Projection, TriplePattern, Variable};
use hybrid_sparql::term::RDF_TYPE;
use hybrid_sparql::SolutionSet;
use hybrid_sparql::{BgpQuery, Dataset, Term, Triple};
use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// A solution as plain variable/term pairs.
pub type Row = BTreeMap<Variable, Term>;

pub fn ex(local: &str) -> Term {
    Term::iri(format!("http://example.org/t/{local}"))
}

/// At most `max_triples` triples over 25 entities, 4 predicates, a literal
/// pool, and up to 6 classes.
pub fn random_graph(rng: &mut impl Rng, max_triples: usize) -> Dataset {
    let classes = rng.gen_range(1..=6);
    let target = rng.gen_range(1..=max_triples);
    let mut d = Dataset::new();
    let mut attempts = 0;
    while d.len() < target && attempts < target * 4 {
        attempts += 1;
        let s = ex(&format!("e{}", rng.gen_range(0..25)));
        let t = if rng.gen_bool(0.25) {
            Triple::new(
                s,
                Term::iri(RDF_TYPE),
                ex(&format!("C{}", rng.gen_range(0..classes))),
            )
        } else {
            let p = ex(&format!("p{}", rng.gen_range(0..4)));
            let o = if rng.gen_bool(0.15) {
                Term::literal(format!("v{}", rng.gen_range(0..5)))
            } else {
                ex(&format!("e{}", rng.gen_range(0..25)))
            };
            Triple::new(s, p, o)
        };
        d.insert(t);
    }
    d
}

fn var(i: usize) -> PatternTerm {
    PatternTerm::var(&format!("v{i}"))
}

/// A BGP of 1..=5 patterns. Half of the queries follow a connected walk
/// through `d` (so they usually have answers); the rest are random.
pub fn random_query(rng: &mut impl Rng, d: &Dataset) -> BgpQuery {
    let n = rng.gen_range(1..=5);
    let triples: Vec<&Triple> = d.triples().collect();
    let grounded = !triples.is_empty() && rng.gen_bool(0.5);
    let mut patterns = Vec::new();
    let mut names: IndexMap<Term, usize> = IndexMap::new();
    let mut abstract_term = |t: &Term, rng: &mut dyn rand::RngCore, p_var: f64| -> PatternTerm {
        if let Some(i) = names.get(t) {
            if rng.gen_bool(0.9) {
                return var(*i);
            }
        } else if names.len() < 6 && rng.gen_bool(p_var) {
            let i = names.len();
            names.insert(t.clone(), i);
            return var(i);
        }
        PatternTerm::Const(t.clone())
    };
    let mut current = triples.choose(rng).copied();
    for ordinal in 0..n {
        let pat = if grounded {
            let t = current.expect("non-empty");
            let pat = TriplePattern::new(
                abstract_term(&t.subject, rng, 0.8),
                abstract_term(&t.predicate, rng, 0.15),
                abstract_term(&t.object, rng, 0.6),
                ordinal,
            );
            let hub = if rng.gen_bool(0.6) {
                &t.subject
            } else {
                &t.object
            };
            let next: Vec<&Triple> = triples
                .iter()
                .copied()
                .filter(|u| &u.subject == hub || &u.object == hub)
                .collect();
            current = next.choose(rng).copied().or(current);
            pat
        } else {
            let pos = |rng: &mut dyn rand::RngCore, p_var: f64, pool: &str, size: usize| {
                if rng.gen_bool(p_var) {
                    var(rng.gen_range(0..4))
                } else {
                    PatternTerm::Const(ex(&format!("{pool}{}", rng.gen_range(0..size))))
                }
            };
            let predicate = if rng.gen_bool(0.2) {
                PatternTerm::Const(Term::iri(RDF_TYPE))
            } else {
                pos(rng, 0.15, "p", 4)
            };
            TriplePattern::new(
                pos(rng, 0.85, "e", 25),
                predicate,
                pos(rng, 0.7, "e", 25),
                ordinal,
            )
        };
        patterns.push(pat);
    }
    let mut q = BgpQuery {
        prefixes: IndexMap::new(),
        projection: Projection::All,
        distinct: rng.gen_bool(0.5),
        patterns,
    };
    let vars = q.variables();
    if !vars.is_empty() && rng.gen_bool(0.5) {
        let keep: Vec<Variable> = vars.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        if !keep.is_empty() {
            q.projection = Projection::Vars(keep);
        }
    }
    q
}

/// Every term of `d`: the domain of the brute-force search.
fn domain(d: &Dataset) -> Vec<Term> {
    let mut seen: BTreeSet<Term> = BTreeSet::new();
    for t in d.triples() {
        seen.insert(t.subject.clone());
        seen.insert(t.predicate.clone());
        seen.insert(t.object.clone());
    }
    seen.into_iter().collect()
}

fn ground(pt: &PatternTerm, assignment: &[(Variable, Term)]) -> Option<Term> {
    match pt {
        PatternTerm::Const(t) => Some(t.clone()),
        PatternTerm::Var(v) => assignment
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, t)| t.clone()),
    }
}

/// Enumerates assignments of the query variables to terms of `d`,
/// keeping those under which every pattern becomes a stored triple.
/// Shares no code with the engine's evaluator or solution algebra.
pub fn brute_force(d: &Dataset, q: &BgpQuery) -> BTreeSet<Row> {
    let stored: HashSet<(Term, Term, Term)> = d
        .triples()
        .map(|t| (t.subject.clone(), t.predicate.clone(), t.object.clone()))
        .collect();
    let vars = q.variables();
    let dom = domain(d);
    let projected: BTreeSet<Variable> = q.projected_variables().into_iter().collect();
    let mut results = BTreeSet::new();
    let mut assignment: Vec<(Variable, Term)> = Vec::new();

    fn holds(
        patterns: &[TriplePattern],
        assignment: &[(Variable, Term)],
        stored: &HashSet<(Term, Term, Term)>,
    ) -> bool {
        patterns.iter().all(|p| {
            match (
                ground(&p.subject, assignment),
                ground(&p.predicate, assignment),
                ground(&p.object, assignment),
            ) {
                (Some(s), Some(pr), Some(o)) => stored.contains(&(s, pr, o)),
                _ => true,
            }
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        depth: usize,
        vars: &[Variable],
        dom: &[Term],
        patterns: &[TriplePattern],
        stored: &HashSet<(Term, Term, Term)>,
        assignment: &mut Vec<(Variable, Term)>,
        projected: &BTreeSet<Variable>,
        results: &mut BTreeSet<Row>,
    ) {
        if !holds(patterns, assignment, stored) {
            return;
        }
        if depth == vars.len() {
            results.insert(
                assignment
                    .iter()
                    .filter(|(v, _)| projected.contains(v))
                    .cloned()
                    .collect(),
            );
            return;
        }
        for t in dom {
            assignment.push((vars[depth].clone(), t.clone()));
            search(
                depth + 1,
                vars,
                dom,
                patterns,
                stored,
                assignment,
                projected,
                results,
            );
            assignment.pop();
        }
    }

    search(
        0,
        &vars,
        &dom,
        &q.patterns,
        &stored,
        &mut assignment,
        &projected,
        &mut results,
    );
    results
}

/// The engine's solutions in the oracle's representation.
pub fn rows(set: &SolutionSet) -> BTreeSet<Row> {
    set.iter()
        .map(|m| m.iter().map(|(v, t)| (v.clone(), t.clone())).collect())
        .collect()
}
