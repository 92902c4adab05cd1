//! Solution mappings and solution sets with set semantics.

use crate::par;
use crate::query::Variable;
use crate::term::Term;
use indexmap::IndexSet;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SolutionMapping(BTreeMap<Variable, Term>);

impl SolutionMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn insert(&mut self, v: Variable, t: Term) -> Option<Term> {
        self.0.insert(v, t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter()
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.0.keys()
    }

    /// Agree on every shared variable.
    pub fn is_compatible(&self, other: &SolutionMapping) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .0
            .iter()
            .all(|(v, t)| large.0.get(v).is_none_or(|u| u == t))
    }

    pub fn merge(&self, other: &SolutionMapping) -> SolutionMapping {
        let mut out = self.clone();
        for (v, t) in &other.0 {
            out.0.entry(v.clone()).or_insert_with(|| t.clone());
        }
        out
    }

    pub fn project(&self, vars: &BTreeSet<Variable>) -> SolutionMapping {
        SolutionMapping(
            self.0
                .iter()
                .filter(|(v, _)| vars.contains(*v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect(),
        )
    }
}

impl FromIterator<(Variable, Term)> for SolutionMapping {
    fn from_iter<I: IntoIterator<Item = (Variable, Term)>>(iter: I) -> Self {
        SolutionMapping(iter.into_iter().collect())
    }
}

impl fmt::Display for SolutionMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(v, t)| format!("{v}={t}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// A set of mappings over a common schema, kept in insertion order.
#[derive(Debug, Clone, Default)]
pub struct SolutionSet {
    schema: BTreeSet<Variable>,
    mappings: IndexSet<SolutionMapping>,
}

impl PartialEq for SolutionSet {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.mappings.len() == other.mappings.len()
            && self.mappings.iter().all(|m| other.mappings.contains(m))
    }
}

impl Eq for SolutionSet {}

impl SolutionSet {
    /// No mappings over `schema`.
    pub fn empty(schema: impl IntoIterator<Item = Variable>) -> Self {
        SolutionSet {
            schema: schema.into_iter().collect(),
            mappings: IndexSet::new(),
        }
    }

    /// The join identity: one empty mapping.
    pub fn identity() -> Self {
        let mut mappings = IndexSet::new();
        mappings.insert(SolutionMapping::new());
        SolutionSet {
            schema: BTreeSet::new(),
            mappings,
        }
    }

    pub fn from_mappings(
        schema: impl IntoIterator<Item = Variable>,
        mappings: impl IntoIterator<Item = SolutionMapping>,
    ) -> Self {
        let mut set = SolutionSet::empty(schema);
        for m in mappings {
            set.insert(m);
        }
        set
    }

    /// Adds a mapping; it must bind exactly the schema variables.
    pub fn insert(&mut self, m: SolutionMapping) -> bool {
        debug_assert!(
            m.len() == self.schema.len() && m.variables().all(|v| self.schema.contains(v)),
            "mapping {m} does not match schema"
        );
        self.mappings.insert(m)
    }

    pub fn schema(&self) -> &BTreeSet<Variable> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.mappings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SolutionMapping> {
        self.mappings.iter()
    }

    pub fn contains(&self, m: &SolutionMapping) -> bool {
        self.mappings.contains(m)
    }

    pub fn mappings(&self) -> Vec<&SolutionMapping> {
        self.mappings.iter().collect()
    }

    /// Natural join: unions of all compatible pairs. Hash-partitions `other`
    /// on the shared variables; probes run in parallel.
    pub fn join(&self, other: &SolutionSet) -> SolutionSet {
        let shared: BTreeSet<Variable> = self.schema.intersection(&other.schema).cloned().collect();
        let schema: BTreeSet<Variable> = self.schema.union(&other.schema).cloned().collect();
        let mut buckets: HashMap<SolutionMapping, Vec<&SolutionMapping>> = HashMap::new();
        for m in &other.mappings {
            buckets.entry(m.project(&shared)).or_default().push(m);
        }
        let left: Vec<&SolutionMapping> = self.mappings.iter().collect();
        let joined = par::flat_map(&left, |l| {
            buckets
                .get(&l.project(&shared))
                .map(|rs| rs.iter().map(|r| l.merge(r)).collect())
                .unwrap_or_default()
        });
        SolutionSet {
            schema,
            mappings: joined.into_iter().collect(),
        }
    }

    pub fn project(&self, vars: &BTreeSet<Variable>) -> SolutionSet {
        let schema: BTreeSet<Variable> = self.schema.intersection(vars).cloned().collect();
        SolutionSet {
            mappings: self.mappings.iter().map(|m| m.project(&schema)).collect(),
            schema,
        }
    }

    /// Set union of two solution sets over the same schema.
    pub fn union(&self, other: &SolutionSet) -> SolutionSet {
        assert_eq!(self.schema, other.schema, "union needs equal schemas");
        let mut out = self.clone();
        for m in &other.mappings {
            out.mappings.insert(m.clone());
        }
        out
    }
}

impl<'a> IntoIterator for &'a SolutionSet {
    type Item = &'a SolutionMapping;
    type IntoIter = indexmap::set::Iter<'a, SolutionMapping>;

    fn into_iter(self) -> Self::IntoIter {
        self.mappings.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(&str, &str)]) -> SolutionMapping {
        pairs
            .iter()
            .map(|(v, t)| (Variable::new(v), Term::iri(format!("http://x/{t}"))))
            .collect()
    }

    fn vars(names: &[&str]) -> Vec<Variable> {
        names.iter().map(Variable::new).collect()
    }

    #[test]
    fn identity_is_neutral() {
        let a = SolutionSet::from_mappings(vars(&["x"]), [m(&[("x", "1")]), m(&[("x", "2")])]);
        assert_eq!(a.join(&SolutionSet::identity()), a);
        assert_eq!(SolutionSet::identity().join(&a), a);
    }

    #[test]
    fn cartesian_product() {
        let a = SolutionSet::from_mappings(vars(&["x"]), [m(&[("x", "1")]), m(&[("x", "2")])]);
        let b = SolutionSet::from_mappings(
            vars(&["y"]),
            [m(&[("y", "a")]), m(&[("y", "b")]), m(&[("y", "c")])],
        );
        let j = a.join(&b);
        assert_eq!(j.len(), 6);
        assert_eq!(j.schema().len(), 2);
    }

    #[test]
    fn join_on_shared_variable() {
        let a = SolutionSet::from_mappings(
            vars(&["x", "y"]),
            [m(&[("x", "1"), ("y", "a")]), m(&[("x", "2"), ("y", "b")])],
        );
        let b = SolutionSet::from_mappings(
            vars(&["y", "z"]),
            [
                m(&[("y", "a"), ("z", "p")]),
                m(&[("y", "a"), ("z", "q")]),
                m(&[("y", "c"), ("z", "r")]),
            ],
        );
        let j = a.join(&b);
        assert_eq!(j.len(), 2);
        assert!(j.contains(&m(&[("x", "1"), ("y", "a"), ("z", "q")])));
        assert_eq!(j, b.join(&a));
        assert!(a.join(&SolutionSet::empty(vars(&["y"]))).is_empty());
    }

    #[test]
    fn projection_collapses_duplicates() {
        let a = SolutionSet::from_mappings(
            vars(&["x", "y"]),
            [m(&[("x", "1"), ("y", "a")]), m(&[("x", "1"), ("y", "b")])],
        );
        let p = a.project(&vars(&["x"]).into_iter().collect());
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn compatibility() {
        assert!(m(&[("x", "1")]).is_compatible(&m(&[("y", "1")])));
        assert!(!m(&[("x", "1")]).is_compatible(&m(&[("x", "2")])));
    }
}
