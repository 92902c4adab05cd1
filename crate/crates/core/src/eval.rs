//! Basic graph pattern evaluation over the triple store.

use crate::decompose::SubQuery;
use crate::kb::CrowdKb;
use crate::par;
use crate::query::{PatternTerm, TriplePattern, Variable};
use crate::solution::{SolutionMapping, SolutionSet};
use crate::store::Dataset;
use crate::term::Term;
use std::collections::BTreeSet;

/// Variables of `patterns` in first-occurrence order.
pub fn pattern_variables(patterns: &[TriplePattern]) -> Vec<Variable> {
    let mut out: Vec<Variable> = Vec::new();
    for p in patterns {
        for v in p.variables() {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
    }
    out
}

/// Resolves a pattern position under `mu`.
pub fn resolve<'a>(pt: &'a PatternTerm, mu: &'a SolutionMapping) -> Option<&'a Term> {
    match pt {
        PatternTerm::Const(t) => Some(t),
        PatternTerm::Var(v) => mu.get(v),
    }
}

/// Substitutes the bindings of `mu` into the pattern.
pub fn substitute(p: &TriplePattern, mu: &SolutionMapping) -> TriplePattern {
    let sub = |pt: &PatternTerm| match pt {
        PatternTerm::Var(v) => mu
            .get(v)
            .map_or_else(|| pt.clone(), |t| PatternTerm::Const(t.clone())),
        c => c.clone(),
    };
    TriplePattern {
        subject: sub(&p.subject),
        predicate: sub(&p.predicate),
        object: sub(&p.object),
        ordinal: p.ordinal,
    }
}

/// Extends `mu` so that `p` maps onto `(s, pr, o)`, or `None` on a clash.
pub fn extend(
    p: &TriplePattern,
    mu: &SolutionMapping,
    s: &Term,
    pr: &Term,
    o: &Term,
) -> Option<SolutionMapping> {
    let mut out = mu.clone();
    for (pt, t) in [(&p.subject, s), (&p.predicate, pr), (&p.object, o)] {
        match pt {
            PatternTerm::Const(c) => {
                if c != t {
                    return None;
                }
            }
            PatternTerm::Var(v) => match out.get(v) {
                Some(bound) if bound != t => return None,
                Some(_) => {}
                None => {
                    out.insert(v.clone(), t.clone());
                }
            },
        }
    }
    Some(out)
}

/// Anything triple patterns can be matched against.
pub trait TripleSource: Sync {
    /// Calls `f` on every triple agreeing with the bound positions.
    fn for_each_match(
        &self,
        s: Option<&Term>,
        p: Option<&Term>,
        o: Option<&Term>,
        f: &mut dyn FnMut(&Term, &Term, &Term),
    );
}

impl TripleSource for Dataset {
    fn for_each_match(
        &self,
        s: Option<&Term>,
        p: Option<&Term>,
        o: Option<&Term>,
        f: &mut dyn FnMut(&Term, &Term, &Term),
    ) {
        for t in self.matching(s, p, o) {
            f(&t.subject, &t.predicate, &t.object);
        }
    }
}

/// The data set together with the constant-object facts of `plus`.
#[derive(Clone, Copy)]
pub struct WithCrowdFacts<'a> {
    pub dataset: &'a Dataset,
    pub kb: &'a CrowdKb,
}

impl TripleSource for WithCrowdFacts<'_> {
    fn for_each_match(
        &self,
        s: Option<&Term>,
        p: Option<&Term>,
        o: Option<&Term>,
        f: &mut dyn FnMut(&Term, &Term, &Term),
    ) {
        self.dataset.for_each_match(s, p, o, f);
        for (qs, qp, qo) in self.kb.asserted_matching(s, p, o) {
            f(qs, qp, qo);
        }
    }
}

/// Mappings extending `mu` with one stored match of `p`.
pub fn match_pattern<S: TripleSource + ?Sized>(
    src: &S,
    p: &TriplePattern,
    mu: &SolutionMapping,
) -> Vec<SolutionMapping> {
    let mut out = Vec::new();
    src.for_each_match(
        resolve(&p.subject, mu),
        resolve(&p.predicate, mu),
        resolve(&p.object, mu),
        &mut |s, pr, o| {
            if let Some(m) = extend(p, mu, s, pr, o) {
                out.push(m);
            }
        },
    );
    out
}

fn bound_positions(p: &TriplePattern, mu: &SolutionMapping) -> usize {
    p.positions()
        .iter()
        .filter(|pt| resolve(pt, mu).is_some())
        .count()
}

fn extend_all<S: TripleSource + ?Sized>(
    d: &S,
    remaining: &[&TriplePattern],
    mu: SolutionMapping,
    out: &mut Vec<SolutionMapping>,
) {
    if remaining.is_empty() {
        out.push(mu);
        return;
    }
    // Most-bound pattern next; ties keep query order.
    let (idx, _) = remaining
        .iter()
        .enumerate()
        .max_by_key(|(i, p)| (bound_positions(p, &mu), std::cmp::Reverse(*i)))
        .expect("non-empty");
    let mut rest = remaining.to_vec();
    let next = rest.remove(idx);
    for ext in match_pattern(d, next, &mu) {
        extend_all(d, &rest, ext, out);
    }
}

/// Mappings over the variables of `patterns` whose substitution yields only
/// stored triples.
pub fn evaluate_bgp<S: TripleSource + ?Sized>(d: &S, patterns: &[TriplePattern]) -> SolutionSet {
    let schema = pattern_variables(patterns);
    if patterns.is_empty() {
        return SolutionSet::identity();
    }
    let refs: Vec<&TriplePattern> = patterns.iter().collect();
    // Seed with the most constrained pattern and fan out over its matches.
    let (first_idx, _) = refs
        .iter()
        .enumerate()
        .max_by_key(|(i, p)| {
            (
                bound_positions(p, &SolutionMapping::new()),
                std::cmp::Reverse(*i),
            )
        })
        .expect("non-empty");
    let mut rest = refs.clone();
    let first = rest.remove(first_idx);
    let seeds = match_pattern(d, first, &SolutionMapping::new());
    let results = par::flat_map(&seeds, |mu| {
        let mut out = Vec::new();
        extend_all(d, &rest, mu.clone(), &mut out);
        out
    });
    SolutionSet::from_mappings(schema, results)
}

pub fn evaluate_subquery(d: &Dataset, sq: &SubQuery) -> SolutionSet {
    evaluate_bgp(d, &sq.patterns)
}

/// One binding of the shared variables together with the patterns it
/// instantiates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instantiation {
    pub binding: SolutionMapping,
    pub patterns: Vec<TriplePattern>,
}

/// Substitutes each distinct binding of the variables `sq` shares with
/// `omega`. Without shared variables the sub-query is returned unchanged
/// under the empty binding.
pub fn instantiate(sq: &SubQuery, omega: &SolutionSet) -> Vec<Instantiation> {
    let shared: BTreeSet<Variable> = sq
        .variables()
        .into_iter()
        .filter(|v| omega.schema().contains(*v))
        .cloned()
        .collect();
    if shared.is_empty() {
        return vec![Instantiation {
            binding: SolutionMapping::new(),
            patterns: sq.patterns.clone(),
        }];
    }
    let bindings = omega.project(&shared);
    bindings
        .iter()
        .map(|mu| Instantiation {
            binding: mu.clone(),
            patterns: sq.patterns.iter().map(|p| substitute(p, mu)).collect(),
        })
        .collect()
}

/// `omega ⋈ [[sq]]` computed as a bind join: every instantiation is
/// evaluated independently (in parallel) and tagged with its binding.
pub fn bind_join<S: TripleSource + ?Sized>(
    d: &S,
    sq: &SubQuery,
    omega: &SolutionSet,
) -> SolutionSet {
    let insts = instantiate(sq, omega);
    let sq_vars = pattern_variables(&sq.patterns);
    let partial_schema: Vec<Variable> = sq_vars
        .iter()
        .filter(|v| !omega.schema().contains(*v))
        .cloned()
        .collect();
    let shared: Vec<Variable> = sq_vars
        .iter()
        .filter(|v| omega.schema().contains(*v))
        .cloned()
        .collect();
    let rows = par::flat_map(&insts, |inst| {
        evaluate_bgp(d, &inst.patterns)
            .iter()
            .map(|nu| inst.binding.merge(nu))
            .collect::<Vec<_>>()
    });
    let schema = shared.into_iter().chain(partial_schema);
    let evaluated = SolutionSet::from_mappings(schema, rows);
    omega.join(&evaluated)
}
