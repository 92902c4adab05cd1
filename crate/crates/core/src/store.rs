//! In-memory triple store.
//!
//! Triples keep their insertion order, which makes every scan (and therefore
//! every query answer) deterministic for a given input file.

use crate::term::{Term, Triple, RDFS_LABEL, RDF_TYPE};
use indexmap::{IndexMap, IndexSet};
use percent_encoding::percent_decode_str;
use std::collections::HashMap;

#[derive(Debug, Default, Clone)]
pub struct Dataset {
    triples: IndexSet<Triple>,
    by_subject: HashMap<Term, Vec<usize>>,
    by_predicate: HashMap<Term, Vec<usize>>,
    by_object: HashMap<Term, Vec<usize>>,
    sp_index: HashMap<(Term, Term), IndexSet<Term>>,
    type_index: HashMap<Term, IndexSet<Term>>,
    instances: IndexMap<Term, IndexSet<Term>>,
    labels: HashMap<Term, Term>,
    by_label: HashMap<String, Term>,
    by_local_name: HashMap<String, Term>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut d = Dataset::new();
        for t in triples {
            d.insert(t);
        }
        d
    }

    /// Inserts a triple; returns `false` when it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        assert!(triple.predicate.is_iri(), "predicate must be an IRI");
        if self.triples.contains(&triple) {
            return false;
        }
        let (idx, _) = self.triples.insert_full(triple.clone());
        let Triple {
            subject,
            predicate,
            object,
        } = triple;
        self.by_subject
            .entry(subject.clone())
            .or_default()
            .push(idx);
        self.by_predicate
            .entry(predicate.clone())
            .or_default()
            .push(idx);
        self.by_object.entry(object.clone()).or_default().push(idx);
        self.sp_index
            .entry((subject.clone(), predicate.clone()))
            .or_default()
            .insert(object.clone());

        match predicate.as_iri() {
            Some(RDF_TYPE) => {
                self.type_index
                    .entry(subject.clone())
                    .or_default()
                    .insert(object.clone());
                self.instances
                    .entry(object.clone())
                    .or_default()
                    .insert(subject.clone());
            }
            Some(RDFS_LABEL) if object.is_literal() => {
                self.labels.entry(subject.clone()).or_insert(object.clone());
                self.by_label
                    .entry(object.value().to_string())
                    .or_insert(subject.clone());
            }
            _ => {}
        }
        for t in [&subject, &object] {
            if let Term::Iri(iri) = t {
                self.by_local_name
                    .entry(local_name(iri).to_string())
                    .or_insert_with(|| t.clone());
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    /// Every stored triple agreeing with each bound position. `None` is a
    /// wildcard.
    pub fn matching(
        &self,
        subject: Option<&Term>,
        predicate: Option<&Term>,
        object: Option<&Term>,
    ) -> Vec<&Triple> {
        let agrees = |t: &Triple| {
            subject.is_none_or(|s| &t.subject == s)
                && predicate.is_none_or(|p| &t.predicate == p)
                && object.is_none_or(|o| &t.object == o)
        };
        if let (Some(s), Some(p), Some(o)) = (subject, predicate, object) {
            let t = Triple::new(s.clone(), p.clone(), o.clone());
            return self.triples.get(&t).into_iter().collect();
        }
        // Pick the shortest posting list among the bound positions.
        let postings = [
            subject.map(|s| self.by_subject.get(s)),
            predicate.map(|p| self.by_predicate.get(p)),
            object.map(|o| self.by_object.get(o)),
        ];
        let mut best: Option<&[usize]> = None;
        for list in postings.into_iter().flatten() {
            let list = list.map(Vec::as_slice).unwrap_or(&[]);
            if best.is_none_or(|b| list.len() < b.len()) {
                best = Some(list);
            }
        }
        match best {
            Some(list) => list
                .iter()
                .map(|&i| &self.triples[i])
                .filter(|t| agrees(t))
                .collect(),
            None => self.triples.iter().collect(),
        }
    }

    /// Distinct objects of `(subject, predicate, ·)`, in insertion order.
    pub fn objects(&self, subject: &Term, predicate: &Term) -> impl Iterator<Item = &Term> {
        self.sp_index
            .get(&(subject.clone(), predicate.clone()))
            .into_iter()
            .flatten()
    }

    pub fn object_count(&self, subject: &Term, predicate: &Term) -> usize {
        self.sp_index
            .get(&(subject.clone(), predicate.clone()))
            .map_or(0, IndexSet::len)
    }

    /// The classes `C` with `(subject, rdf:type, C)` stored.
    pub fn classes_of(&self, subject: &Term) -> Vec<&Term> {
        self.type_index
            .get(subject)
            .map(|cs| cs.iter().collect())
            .unwrap_or_default()
    }

    pub fn instances_of(&self, class: &Term) -> Vec<&Term> {
        self.instances
            .get(class)
            .map(|xs| xs.iter().collect())
            .unwrap_or_default()
    }

    pub fn classes(&self) -> impl Iterator<Item = &Term> {
        self.instances.keys()
    }

    /// Subjects in order of first appearance.
    pub fn subjects(&self) -> Vec<&Term> {
        let mut seen = IndexSet::new();
        for t in &self.triples {
            seen.insert(&t.subject);
        }
        seen.into_iter().collect()
    }

    /// Predicates used by `subject` (excluding `rdf:type`).
    pub fn predicates_of(&self, subject: &Term) -> Vec<&Term> {
        let mut seen = IndexSet::new();
        if let Some(list) = self.by_subject.get(subject) {
            for &i in list {
                let p = &self.triples[i].predicate;
                if p.as_iri() != Some(RDF_TYPE) {
                    seen.insert(p);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Human-readable rendering: the `rdfs:label` if present, else the
    /// decoded IRI local name, else the literal's lexical form.
    pub fn label_of(&self, term: &Term) -> String {
        if let Some(label) = self.labels.get(term) {
            return label.value().to_string();
        }
        match term {
            Term::Iri(iri) => display_local_name(iri),
            Term::Blank(id) => id.to_string(),
            Term::Literal { lexical, .. } => lexical.to_string(),
        }
    }

    /// Maps free text to a term of this data set: exact `rdfs:label` match
    /// first, then exact local name (raw or display form).
    pub fn resolve_label(&self, text: &str) -> Option<Term> {
        if let Some(t) = self.by_label.get(text) {
            return Some(t.clone());
        }
        if let Some(t) = self.by_local_name.get(text) {
            return Some(t.clone());
        }
        let underscored = text.replace(' ', "_");
        self.by_local_name.get(&underscored).cloned()
    }
}

/// Segment after the last `#` or `/`.
pub fn local_name(iri: &str) -> &str {
    let cut = iri.rfind(['#', '/']).map_or(0, |i| i + 1);
    let name = &iri[cut..];
    if name.is_empty() {
        iri
    } else {
        name
    }
}

pub fn display_local_name(iri: &str) -> String {
    let decoded = percent_decode_str(local_name(iri)).decode_utf8_lossy();
    decoded.replace('_', " ")
}
