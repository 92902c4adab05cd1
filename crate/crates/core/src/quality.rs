//! Completeness estimates derived from predicate multiplicities.
//!
//! The multiplicity of `p` for a resource `s` is the number of distinct
//! objects of `(s, p, ·)`. A class aggregates the positive multiplicities of
//! its instances (median by default, rounded up); a resource's completeness
//! is its multiplicity over the largest aggregate among its classes, or 1
//! when no class has any value for `p`.

use crate::kb::{CrowdKb, KbSelection};
use crate::store::Dataset;
use crate::term::Term;
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::RwLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationFn {
    #[default]
    Median,
    Mean,
    Max,
}

impl AggregationFn {
    /// Ceiling of the aggregate of `values`; 0 for an empty multiset.
    /// Computed in integer arithmetic so halves round up exactly.
    pub fn apply_ceil(self, values: &[u64]) -> u64 {
        if values.is_empty() {
            return 0;
        }
        let n = values.len() as u64;
        match self {
            AggregationFn::Max => values.iter().copied().max().unwrap_or(0),
            AggregationFn::Mean => {
                let sum: u64 = values.iter().sum();
                sum.div_ceil(n)
            }
            AggregationFn::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_unstable();
                let mid = sorted.len() / 2;
                if sorted.len() % 2 == 1 {
                    sorted[mid]
                } else {
                    (sorted[mid - 1] + sorted[mid]).div_ceil(2)
                }
            }
        }
    }
}

impl fmt::Display for AggregationFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationFn::Median => "median",
            AggregationFn::Mean => "mean",
            AggregationFn::Max => "max",
        })
    }
}

impl FromStr for AggregationFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "median" => Ok(AggregationFn::Median),
            "mean" | "avg" | "average" => Ok(AggregationFn::Mean),
            "max" => Ok(AggregationFn::Max),
            other => Err(format!("unknown aggregation function {other:?}")),
        }
    }
}

pub fn multiplicity(d: &Dataset, s: &Term, p: &Term) -> u64 {
    d.object_count(s, p) as u64
}

/// Uncached aggregated multiplicity of `class` over `p`. Instances without
/// any `p` value do not take part in the aggregate.
pub fn aggregated_multiplicity(d: &Dataset, class: &Term, p: &Term, f: AggregationFn) -> u64 {
    let values: Vec<u64> = d
        .instances_of(class)
        .into_iter()
        .map(|s| multiplicity(d, s, p))
        .filter(|&m| m > 0)
        .collect();
    f.apply_ceil(&values)
}

/// Completeness queries over one data set, with aggregated multiplicities
/// memoized per `(class, predicate)`.
pub struct QualityModel<'a> {
    dataset: &'a Dataset,
    aggregation: AggregationFn,
    cache: RwLock<HashMap<(Term, Term), u64>>,
}

impl<'a> QualityModel<'a> {
    pub fn new(dataset: &'a Dataset, aggregation: AggregationFn) -> Self {
        QualityModel {
            dataset,
            aggregation,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn aggregation(&self) -> AggregationFn {
        self.aggregation
    }

    pub fn multiplicity(&self, s: &Term, p: &Term) -> u64 {
        multiplicity(self.dataset, s, p)
    }

    pub fn aggregated_multiplicity(&self, class: &Term, p: &Term) -> u64 {
        let key = (class.clone(), p.clone());
        if let Some(&v) = self.cache.read().expect("cache poisoned").get(&key) {
            return v;
        }
        // Concurrent fills compute the same value, so a lost race is harmless.
        let v = aggregated_multiplicity(self.dataset, class, p, self.aggregation);
        self.cache.write().expect("cache poisoned").insert(key, v);
        v
    }

    /// Largest aggregated multiplicity over the classes of `s`; 0 when `s`
    /// has no class or no class has `p` values.
    pub fn best_class_multiplicity(&self, s: &Term, p: &Term) -> u64 {
        self.dataset
            .classes_of(s)
            .into_iter()
            .map(|c| self.aggregated_multiplicity(c, p))
            .max()
            .unwrap_or(0)
    }

    pub fn completeness_d(&self, s: &Term, p: &Term) -> f64 {
        ratio_or_one(self.multiplicity(s, p), self.best_class_multiplicity(s, p))
    }

    /// Completeness of `s` w.r.t. `p` counting the distinct objects the crowd
    /// knowledge holds in the selected sets.
    pub fn completeness_kb(&self, kb: &CrowdKb, s: &Term, p: &Term, sets: KbSelection) -> f64 {
        assert!(
            !sets.is_empty(),
            "at least one knowledge-base set must be selected"
        );
        let m = kb.object_count(sets, s, p) as u64;
        ratio_or_one(m, self.best_class_multiplicity(s, p))
    }

    pub fn report(&self, kb: &CrowdKb, s: &Term, p: &Term) -> CompletenessReport {
        let m_d = self.multiplicity(s, p);
        let am_best = self.best_class_multiplicity(s, p);
        CompletenessReport {
            subject: s.clone(),
            predicate: p.clone(),
            m_d,
            am_best,
            comp_d: ratio_or_one(m_d, am_best),
            comp_kb_plus: self.completeness_kb(kb, s, p, KbSelection::PLUS),
        }
    }

    /// Rows for every `(subject, predicate)` in scope. `class` restricts the
    /// subjects to its instances (otherwise every typed subject); `predicate`
    /// restricts the predicates (otherwise those used by instances of the
    /// subject's classes).
    pub fn profile(
        &self,
        kb: &CrowdKb,
        class: Option<&Term>,
        predicate: Option<&Term>,
    ) -> Vec<CompletenessReport> {
        let d = self.dataset;
        let subjects: Vec<&Term> = match class {
            Some(c) => d.instances_of(c),
            None => d
                .subjects()
                .into_iter()
                .filter(|s| !d.classes_of(s).is_empty())
                .collect(),
        };
        let mut rows = Vec::new();
        for s in subjects {
            let predicates: Vec<Term> = match predicate {
                Some(p) => vec![p.clone()],
                None => {
                    let mut ps: Vec<Term> = Vec::new();
                    for c in d.classes_of(s) {
                        for inst in d.instances_of(c) {
                            for p in d.predicates_of(inst) {
                                if !ps.contains(p) {
                                    ps.push(p.clone());
                                }
                            }
                        }
                    }
                    ps
                }
            };
            for p in &predicates {
                rows.push(self.report(kb, s, p));
            }
        }
        rows
    }
}

fn ratio_or_one(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        1.0
    } else {
        numerator as f64 / denominator as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessReport {
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub subject: Term,
    #[serde(serialize_with = "crate::report::serialize_term")]
    pub predicate: Term,
    pub m_d: u64,
    pub am_best: u64,
    pub comp_d: f64,
    pub comp_kb_plus: f64,
}

impl CompletenessReport {
    pub const TSV_HEADER: &'static str = "subject\tpredicate\tm_d\tam_best\tcomp_d\tcomp_kb_plus";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.subject, self.predicate, self.m_d, self.am_best, self.comp_d, self.comp_kb_plus
        )
    }
}
