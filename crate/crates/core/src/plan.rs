//! Left-linear plan generation.
//!
//! The most selective data sub-query goes first. The plan then alternates
//! between a crowd sub-query and the most selective data sub-query that
//! share a variable with what is already planned, so intermediate results
//! stay small and crowd questions are instantiated by data bindings. When
//! nothing connects, one remaining sub-query is appended as a Cartesian
//! product (data before crowd, query order) and the connected phase resumes.

use crate::decompose::{Decomposition, SubQuery};
use crate::eval::evaluate_subquery;
use crate::query::Variable;
use crate::store::Dataset;

/// `1 / (1 + |[[sq]]_D|)`: 1 for an empty result, smaller for larger ones.
pub fn selectivity(sq: &SubQuery, d: &Dataset) -> f64 {
    1.0 / (1.0 + evaluate_subquery(d, sq).len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub subquery: SubQuery,
    /// Whether the step shares no variable with the steps before it.
    pub cartesian: bool,
}

fn most_selective(
    candidates: &[(SubQuery, f64)],
    eligible: impl Fn(&SubQuery) -> bool,
) -> Option<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, (sq, _))| eligible(sq))
        .max_by(|(_, (a, sa)), (_, (b, sb))| {
            sa.total_cmp(sb)
                .then_with(|| b.first_ordinal().cmp(&a.first_ordinal()))
        })
        .map(|(i, _)| i)
}

pub fn build_plan(dec: &Decomposition, d: &Dataset) -> Vec<PlanStep> {
    let mut data: Vec<(SubQuery, f64)> = dec
        .data
        .iter()
        .map(|sq| (sq.clone(), selectivity(sq, d)))
        .collect();
    let mut crowd: Vec<SubQuery> = dec.crowd.clone();
    crowd.sort_by_key(SubQuery::first_ordinal);

    let mut plan: Vec<PlanStep> = Vec::new();
    let mut planned_vars: Vec<Variable> = Vec::new();
    let push = |plan: &mut Vec<PlanStep>, planned: &mut Vec<Variable>, sq: SubQuery| {
        let cartesian = !plan.is_empty() && !sq.shares_variable_with(planned.iter());
        for v in sq.variables() {
            if !planned.contains(v) {
                planned.push(v.clone());
            }
        }
        plan.push(PlanStep {
            subquery: sq,
            cartesian,
        });
    };

    if let Some(i) = most_selective(&data, |_| true) {
        let (sq, _) = data.remove(i);
        push(&mut plan, &mut planned_vars, sq);
    }

    while !data.is_empty() || !crowd.is_empty() {
        let mut progressed = false;
        if let Some(i) = crowd
            .iter()
            .position(|sq| sq.shares_variable_with(planned_vars.iter()))
        {
            let sq = crowd.remove(i);
            push(&mut plan, &mut planned_vars, sq);
            progressed = true;
        }
        let vars = planned_vars.clone();
        if let Some(i) = most_selective(&data, |sq| sq.shares_variable_with(vars.iter())) {
            let (sq, _) = data.remove(i);
            push(&mut plan, &mut planned_vars, sq);
            progressed = true;
        }
        if !progressed {
            // Nothing connects: append one Cartesian product, data first.
            let next = if !data.is_empty() {
                let i = data
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, (sq, _))| sq.first_ordinal())
                    .map(|(i, _)| i)
                    .expect("non-empty");
                data.remove(i).0
            } else {
                crowd.remove(0)
            };
            push(&mut plan, &mut planned_vars, next);
        }
    }
    plan
}

/// Just the sub-queries of a plan.
pub fn plan_subqueries(plan: &[PlanStep]) -> Vec<&SubQuery> {
    plan.iter().map(|s| &s.subquery).collect()
}

pub fn describe(plan: &[PlanStep]) -> String {
    plan.iter()
        .map(|s| {
            if s.cartesian {
                format!("x {}", s.subquery)
            } else {
                s.subquery.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{decompose, SubQueryKind};
    use crate::ntriples::parse_ntriples;
    use crate::query::parse_query;

    fn figure2() -> Dataset {
        parse_ntriples(include_str!("../fixtures/figure2.nt")).unwrap()
    }

    #[test]
    fn movie_plan() {
        let d = figure2();
        let q = parse_query(include_str!("../fixtures/figure3.rq")).unwrap();
        let plan = build_plan(&decompose(&q), &d);
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].subquery.kind, SubQueryKind::Data);
        assert_eq!(plan[0].subquery.ordinals(), vec![0, 2, 3]);
        assert_eq!(plan[1].subquery.kind, SubQueryKind::Crowd);
        assert!(!plan[1].cartesian);
        assert_eq!(selectivity(&plan[0].subquery, &d), 0.2);
    }

    #[test]
    fn selectivity_of_empty_result() {
        let d = figure2();
        let q = parse_query("SELECT * WHERE { ?x <http://x/none> <http://x/o> }").unwrap();
        assert_eq!(selectivity(&decompose(&q).data[0], &d), 1.0);
    }

    #[test]
    fn disconnected_data_stars() {
        let d = figure2();
        // ?m has 4 results, ?p has none
        let q = parse_query(
            "SELECT * WHERE {
               ?m a <http://schema.org/Movie> .
               ?p <http://x/never> <http://x/none> .
             }",
        )
        .unwrap();
        let plan = build_plan(&decompose(&q), &d);
        assert_eq!(plan[0].subquery.ordinals(), vec![1]);
        assert_eq!(plan[1].subquery.ordinals(), vec![0]);
        assert!(plan[1].cartesian);
    }

    #[test]
    fn tie_goes_to_earlier_pattern() {
        let d = figure2();
        let q = parse_query(
            "SELECT * WHERE {
               ?a <http://x/none> <http://x/o> .
               ?b <http://x/none2> <http://x/o> .
             }",
        )
        .unwrap();
        let plan = build_plan(&decompose(&q), &d);
        assert_eq!(plan[0].subquery.ordinals(), vec![0]);
    }

    #[test]
    fn unconnected_crowd_star_goes_last() {
        let d = figure2();
        let q = parse_query(
            "SELECT * WHERE {
               ?m a <http://schema.org/Movie> .
               ?x <http://x/p> ?y .
               ?m <http://x/q> ?z .
               ?m <http://dbpedia.org/ontology/country> <http://dbpedia.org/resource/United_States> .
             }",
        )
        .unwrap();
        let dec = decompose(&q);
        assert_eq!(dec.crowd.len(), 2);
        let plan = build_plan(&dec, &d);
        let order: Vec<Vec<usize>> = plan.iter().map(|s| s.subquery.ordinals()).collect();
        assert_eq!(order, vec![vec![0, 3], vec![2], vec![1]]);
        assert!(plan[2].cartesian);
    }

    #[test]
    fn empty_decomposition() {
        assert!(build_plan(&Decomposition::default(), &figure2()).is_empty());
    }
}
