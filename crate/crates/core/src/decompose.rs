//! Splits a basic graph pattern into star-shaped sub-queries answered by the
//! data set and sub-queries whose values may be collected from the crowd.

use crate::query::{BgpQuery, PatternTerm, TriplePattern, Variable};
use indexmap::IndexMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubQueryKind {
    Data,
    Crowd,
}

impl fmt::Display for SubQueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubQueryKind::Data => "data",
            SubQueryKind::Crowd => "crowd",
        })
    }
}

/// Patterns sharing one subject position value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubQuery {
    pub patterns: Vec<TriplePattern>,
    pub anchor: PatternTerm,
    pub kind: SubQueryKind,
}

impl SubQuery {
    /// Smallest ordinal among the patterns.
    pub fn first_ordinal(&self) -> usize {
        self.patterns
            .iter()
            .map(|p| p.ordinal)
            .min()
            .unwrap_or(usize::MAX)
    }

    pub fn variables(&self) -> Vec<&Variable> {
        let mut out: Vec<&Variable> = Vec::new();
        for p in &self.patterns {
            for v in p.variables() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn shares_variable_with<'a>(&self, vars: impl IntoIterator<Item = &'a Variable>) -> bool {
        let mine = self.variables();
        vars.into_iter().any(|v| mine.contains(&v))
    }

    pub fn ordinals(&self) -> Vec<usize> {
        self.patterns.iter().map(|p| p.ordinal).collect()
    }
}

impl fmt::Display for SubQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ords: Vec<String> = self
            .ordinals()
            .iter()
            .map(|o| format!("t{}", o + 1))
            .collect();
        write!(f, "{}{{{}}}", self.kind, ords.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decomposition {
    pub data: Vec<SubQuery>,
    pub crowd: Vec<SubQuery>,
}

impl Decomposition {
    pub fn is_empty(&self) -> bool {
        self.data.is_empty() && self.crowd.is_empty()
    }

    pub fn len(&self) -> usize {
        self.data.len() + self.crowd.len()
    }
}

/// A pattern is crowd-answerable when its predicate is a constant and its
/// object is a variable; everything else is evaluated on the data set.
pub fn is_crowd_pattern(p: &TriplePattern) -> bool {
    !p.predicate.is_var() && p.object.is_var()
}

/// Returns `(data patterns, crowd patterns)`, each in query order.
pub fn partition(q: &BgpQuery) -> (Vec<TriplePattern>, Vec<TriplePattern>) {
    q.patterns
        .iter()
        .cloned()
        .partition(|p| !is_crowd_pattern(p))
}

/// Groups patterns by subject position value. Groups are ordered by their
/// smallest pattern ordinal.
pub fn group_stars(patterns: &[TriplePattern], kind: SubQueryKind) -> Vec<SubQuery> {
    let mut groups: IndexMap<&PatternTerm, Vec<TriplePattern>> = IndexMap::new();
    let mut sorted: Vec<&TriplePattern> = patterns.iter().collect();
    sorted.sort_by_key(|p| p.ordinal);
    for p in sorted {
        groups.entry(&p.subject).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(anchor, patterns)| SubQuery {
            anchor: anchor.clone(),
            patterns,
            kind,
        })
        .collect()
}

pub fn decompose(q: &BgpQuery) -> Decomposition {
    let (data, crowd) = partition(q);
    Decomposition {
        data: group_stars(&data, SubQueryKind::Data),
        crowd: group_stars(&crowd, SubQueryKind::Crowd),
    }
}
