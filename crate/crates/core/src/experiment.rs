//! Synthetic completeness experiments.
//!
//! An oracle graph of cities, each located in exactly one country, is
//! damaged by deleting `k` country triples. The query asks for every city
//! and its country; the deleted triples form the gold standard that a
//! simulated crowd answering from the oracle should restore.

use crate::executor::{execute, CrowdAnswer, Execution, ExecutionConfig, ExecutionError};
use crate::gateway::{ConfidenceLaw, FamiliarityLaw, SimCrowdConfig, SimGateway};
use crate::kb::{CrowdKb, KbSet};
use crate::metrics::{score, Fact, GoldStandard, Scores};
use crate::microtask::{AggregationPolicy, FamiliarityScale};
use crate::par;
use crate::query::{parse_query, BgpQuery};
use crate::store::Dataset;
use crate::term::{Term, Triple, RDFS_LABEL, RDF_TYPE};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub const NAMESPACE: &str = "http://example.org/geo/";

fn iri(local: &str) -> Term {
    Term::iri(format!("{NAMESPACE}{local}"))
}

pub fn city_class() -> Term {
    iri("City")
}

pub fn country_predicate() -> Term {
    iri("country")
}

/// `cities` cities spread round-robin over `countries` countries. Countries
/// are typed and labelled so they stay in the data set when city triples
/// are deleted.
pub fn city_graph(cities: usize, countries: usize) -> Dataset {
    assert!(countries > 0, "need at least one country");
    let rdf_type = Term::iri(RDF_TYPE);
    let label = Term::iri(RDFS_LABEL);
    let mut d = Dataset::new();
    for j in 0..countries {
        let c = iri(&format!("Country_{j}"));
        d.insert(Triple::new(c.clone(), rdf_type.clone(), iri("Country")));
        d.insert(Triple::new(
            c,
            label.clone(),
            Term::literal(format!("Country {j}")),
        ));
    }
    for i in 0..cities {
        let city = iri(&format!("City_{i}"));
        d.insert(Triple::new(city.clone(), rdf_type.clone(), city_class()));
        d.insert(Triple::new(
            city,
            country_predicate(),
            iri(&format!("Country_{}", i % countries)),
        ));
    }
    d
}

pub fn city_query() -> BgpQuery {
    parse_query(&format!(
        "PREFIX geo: <{NAMESPACE}>\nSELECT ?city ?country WHERE {{ ?city a geo:City . ?city geo:country ?country }}"
    ))
    .expect("well-formed query")
}

#[derive(Debug, Clone)]
pub struct DeletionScenario {
    pub oracle: Arc<Dataset>,
    pub dataset: Dataset,
    pub deleted: Vec<Triple>,
    pub gold: GoldStandard,
    pub query: BgpQuery,
}

/// Deletes `k` randomly chosen country triples (chosen by `seed`).
pub fn deletion_scenario(cities: usize, countries: usize, k: usize, seed: u64) -> DeletionScenario {
    assert!(
        k <= cities,
        "cannot delete more triples than there are cities"
    );
    let oracle = city_graph(cities, countries);
    let mut candidates: Vec<&Triple> = oracle
        .matching(None, Some(&country_predicate()), None)
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let deleted: Vec<Triple> = candidates.into_iter().take(k).cloned().collect();
    let dataset = Dataset::from_triples(oracle.triples().filter(|t| !deleted.contains(t)).cloned());
    let mut gold = GoldStandard::new();
    for t in &deleted {
        gold.add_value(t.subject.clone(), t.predicate.clone(), t.object.clone());
    }
    DeletionScenario {
        oracle: Arc::new(oracle),
        dataset,
        deleted,
        gold,
        query: city_query(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub execution: ExecutionConfig,
    pub error_rate: f64,
    pub not_sure_rate: f64,
    pub seed: u64,
    pub judgments: usize,
    pub confidence: ConfidenceLaw,
    pub familiarity: FamiliarityLaw,
    pub familiarity_scale: FamiliarityScale,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            execution: ExecutionConfig::default(),
            error_rate: 0.0,
            not_sure_rate: 0.0,
            seed: 0,
            judgments: crate::microtask::DEFAULT_QUOTA,
            confidence: ConfidenceLaw::default(),
            familiarity: FamiliarityLaw::default(),
            familiarity_scale: FamiliarityScale::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub execution: Execution,
    pub scores: Scores,
    pub kb: CrowdKb,
    pub judgments_drawn: usize,
}

/// Crowd answers as facts: `plus` with its value, `minus` as "no value".
/// Unknowns (`tilde`) are not answers.
pub fn answer_facts(answers: &[CrowdAnswer]) -> Vec<Fact> {
    answers
        .iter()
        .filter_map(|a| match a.set {
            KbSet::Plus => Some((a.subject.clone(), a.predicate.clone(), a.object.clone())),
            KbSet::Minus => Some((a.subject.clone(), a.predicate.clone(), None)),
            KbSet::Tilde => None,
        })
        .collect()
}

/// Runs the scenario query once against a simulated crowd, starting from
/// `kb`.
pub fn run_trial(
    scenario: &DeletionScenario,
    cfg: &TrialConfig,
    mut kb: CrowdKb,
) -> Result<TrialOutcome, ExecutionError> {
    let mut sim = SimCrowdConfig::new(scenario.oracle.clone(), cfg.seed);
    sim.error_rate = cfg.error_rate;
    sim.not_sure_rate = cfg.not_sure_rate;
    sim.judgments_per_question = cfg.judgments;
    sim.confidence = cfg.confidence;
    sim.familiarity = cfg.familiarity.clone();
    sim.validate().map_err(ExecutionError::Config)?;
    let policy = AggregationPolicy {
        quota: cfg.judgments,
        familiarity: cfg.familiarity_scale,
    };
    let mut gateway = SimGateway::new(sim, policy);
    let execution = execute(
        &scenario.query,
        &scenario.dataset,
        &mut kb,
        &cfg.execution,
        &mut gateway,
    )?;
    let facts = answer_facts(&execution.answers);
    let scores = score(&facts, &scenario.gold);
    Ok(TrialOutcome {
        execution,
        scores,
        kb,
        judgments_drawn: gateway.judgments_drawn(),
    })
}

/// Runs independent trials in parallel, each on a fresh knowledge base.
pub fn sweep(
    trials: &[(DeletionScenario, TrialConfig)],
) -> Vec<Result<TrialOutcome, ExecutionError>> {
    par::map(trials, |(scenario, cfg)| {
        run_trial(scenario, cfg, CrowdKb::new())
    })
}

/// Mean precision per error rate over `seeds`, on scenarios with
/// `cities` cities of which `k` lost their country. Trials without any
/// answer are left out of the mean.
pub fn precision_by_error_rate(
    error_rates: &[f64],
    seeds: &[u64],
    cities: usize,
    countries: usize,
    k: usize,
) -> Result<Vec<(f64, f64)>, ExecutionError> {
    let mut trials = Vec::new();
    for &e in error_rates {
        for &seed in seeds {
            let cfg = TrialConfig {
                error_rate: e,
                seed,
                ..TrialConfig::default()
            };
            trials.push((deletion_scenario(cities, countries, k, seed), cfg));
        }
    }
    let outcomes: Vec<TrialOutcome> = sweep(&trials).into_iter().collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (i, &e) in error_rates.iter().enumerate() {
        let chunk = &outcomes[i * seeds.len()..(i + 1) * seeds.len()];
        let values: Vec<f64> = chunk.iter().filter_map(|o| o.scores.precision).collect();
        let mean = if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        out.push((e, mean));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_shape() {
        let d = city_graph(10, 3);
        assert_eq!(d.instances_of(&city_class()).len(), 10);
        assert_eq!(d.matching(None, Some(&country_predicate()), None).len(), 10);
    }

    #[test]
    fn deletion() {
        let s = deletion_scenario(10, 3, 4, 1);
        assert_eq!(s.deleted.len(), 4);
        assert_eq!(s.dataset.len(), s.oracle.len() - 4);
        assert_eq!(s.gold.len(), 4);
        assert_eq!(deletion_scenario(10, 3, 4, 1).deleted, s.deleted);
    }

    #[test]
    fn noiseless_trial_restores_everything() {
        let s = deletion_scenario(12, 4, 3, 9);
        let out = run_trial(&s, &TrialConfig::default(), CrowdKb::new()).unwrap();
        assert_eq!(out.execution.crowdsourced_count(), 3);
        assert_eq!(out.scores.precision, Some(1.0));
        assert_eq!(out.scores.recall, Some(1.0));
        assert_eq!(out.execution.solutions.len(), 12);
    }
}
