//! A simulated crowd answering from an oracle graph.

use super::{questions_of, Collected, CrowdGateway};
use crate::microtask::{
    aggregate_judgments, AggregationError, AggregationPolicy, Fnv64, Judgment, Microtask, Question,
    Verdict,
};
use crate::store::Dataset;
use crate::term::Term;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use std::sync::Arc;
use std::time::Duration;

/// Normal law for worker confidence, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceLaw {
    pub mean: f64,
    pub spread: f64,
}

impl Default for ConfidenceLaw {
    fn default() -> Self {
        ConfidenceLaw {
            mean: 0.93,
            spread: 0.07,
        }
    }
}

impl ConfidenceLaw {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.spread <= 0.0 {
            return self.mean.clamp(0.0, 1.0);
        }
        let normal = Normal::new(self.mean, self.spread).expect("finite spread");
        normal.sample(rng).clamp(0.0, 1.0)
    }
}

/// Categorical law over the familiarity scores 1..=7.
#[derive(Debug, Clone, PartialEq)]
pub struct FamiliarityLaw {
    pub weights: [f64; 7],
}

impl Default for FamiliarityLaw {
    fn default() -> Self {
        // most workers rate themselves at 5 or above
        FamiliarityLaw {
            weights: [0.05, 0.07, 0.10, 0.17, 0.21, 0.22, 0.18],
        }
    }
}

impl FamiliarityLaw {
    /// Every worker reports the same score.
    pub fn constant(score: u8) -> Self {
        assert!((1..=7).contains(&score), "familiarity is on a 1..=7 scale");
        let mut weights = [0.0; 7];
        weights[usize::from(score - 1)] = 1.0;
        FamiliarityLaw { weights }
    }

    fn sample(&self, rng: &mut impl Rng) -> u8 {
        let dist = WeightedIndex::new(self.weights).expect("valid familiarity weights");
        dist.sample(rng) as u8 + 1
    }
}

#[derive(Debug, Clone)]
pub struct SimCrowdConfig {
    pub oracle: Arc<Dataset>,
    pub error_rate: f64,
    pub not_sure_rate: f64,
    pub confidence: ConfidenceLaw,
    pub familiarity: FamiliarityLaw,
    pub seed: u64,
    pub judgments_per_question: usize,
}

impl SimCrowdConfig {
    pub fn new(oracle: Arc<Dataset>, seed: u64) -> Self {
        SimCrowdConfig {
            oracle,
            error_rate: 0.0,
            not_sure_rate: 0.0,
            confidence: ConfidenceLaw::default(),
            familiarity: FamiliarityLaw::default(),
            seed,
            judgments_per_question: crate::microtask::DEFAULT_QUOTA,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let rate = |x: f64| (0.0..=1.0).contains(&x);
        if !rate(self.error_rate) || !rate(self.not_sure_rate) {
            return Err("error and not-sure rates must lie in [0, 1]".into());
        }
        if self.error_rate + self.not_sure_rate > 1.0 + 1e-12 {
            return Err(format!(
                "error rate {} plus not-sure rate {} exceeds 1",
                self.error_rate, self.not_sure_rate
            ));
        }
        if self.judgments_per_question == 0 {
            return Err("at least one judgment per question is needed".into());
        }
        Ok(())
    }
}

fn rng_for(cfg: &SimCrowdConfig, question_id: &str, draw: usize) -> ChaCha8Rng {
    let mut h = Fnv64::new();
    h.write(&cfg.seed.to_le_bytes());
    h.write(question_id.as_bytes());
    h.write(&(draw as u64).to_le_bytes());
    ChaCha8Rng::seed_from_u64(h.finish())
}

fn value_text(t: &Term, oracle: &Dataset) -> String {
    oracle.label_of(t)
}

/// The `draw`-th judgment of the simulated crowd on `q`. Depends only on
/// the configuration, the question id and `draw`.
pub fn sim_judgment(cfg: &SimCrowdConfig, q: &Question, draw: usize) -> Judgment {
    let mut rng = rng_for(cfg, &q.id, draw);
    let oracle = &cfg.oracle;
    let mut truth: Vec<&Term> = oracle.objects(&q.subject, &q.predicate).collect();
    truth.sort();
    let roll: f64 = rng.gen();
    let (verdict, value) = if roll < cfg.not_sure_rate {
        (Verdict::NotSure, None)
    } else if roll < cfg.not_sure_rate + cfg.error_rate {
        wrong_answer(&mut rng, oracle, q, &truth)
    } else {
        match truth.first() {
            Some(o) => (Verdict::Yes, Some(value_text(o, oracle))),
            None => (Verdict::No, None),
        }
    };
    Judgment {
        question_id: q.id.clone(),
        verdict,
        value,
        confidence: cfg.confidence.sample(&mut rng),
        familiarity: cfg.familiarity.sample(&mut rng),
    }
}

/// A wrong verdict, or a wrong value drawn from other objects of the same
/// predicate.
fn wrong_answer(
    rng: &mut ChaCha8Rng,
    oracle: &Dataset,
    q: &Question,
    truth: &[&Term],
) -> (Verdict, Option<String>) {
    let mut decoys: Vec<&Term> = oracle
        .matching(None, Some(&q.predicate), None)
        .into_iter()
        .map(|t| &t.object)
        .filter(|o| !truth.contains(o))
        .collect();
    decoys.sort();
    decoys.dedup();
    let pick = |rng: &mut dyn rand::RngCore| -> String {
        if decoys.is_empty() {
            "unknown".to_string()
        } else {
            value_text(decoys[rng.gen_range(0..decoys.len())], oracle)
        }
    };
    if truth.is_empty() {
        return (Verdict::Yes, Some(pick(rng)));
    }
    if !decoys.is_empty() && rng.gen_bool(0.5) {
        return (Verdict::Yes, Some(pick(rng)));
    }
    (Verdict::No, None)
}

/// The first `judgments_per_question` judgments on `q`.
pub fn sim_answer(cfg: &SimCrowdConfig, q: &Question) -> Vec<Judgment> {
    (0..cfg.judgments_per_question)
        .map(|i| sim_judgment(cfg, q, i))
        .collect()
}

/// Answers every submitted question at once. A three-way verdict tie draws
/// further judgments, up to twice the quota; a question still tied after
/// that stays unanswered.
#[derive(Debug)]
pub struct SimGateway {
    config: SimCrowdConfig,
    policy: AggregationPolicy,
    tasks: Vec<Microtask>,
    judgments_drawn: usize,
}

impl SimGateway {
    pub fn new(config: SimCrowdConfig, policy: AggregationPolicy) -> Self {
        SimGateway {
            policy: AggregationPolicy {
                quota: config.judgments_per_question,
                ..policy
            },
            config,
            tasks: Vec::new(),
            judgments_drawn: 0,
        }
    }

    pub fn config(&self) -> &SimCrowdConfig {
        &self.config
    }

    /// Total judgments produced so far.
    pub fn judgments_drawn(&self) -> usize {
        self.judgments_drawn
    }
}

impl CrowdGateway for SimGateway {
    fn submit(&mut self, tasks: Vec<Microtask>) -> Vec<String> {
        let ids = tasks.iter().map(|t| t.id.clone()).collect();
        self.tasks.extend(tasks);
        ids
    }

    fn collect(&mut self, task_ids: &[String], _timeout: Option<Duration>) -> Collected {
        let mut out = Collected::default();
        let limit = 2 * self.policy.quota;
        for q in questions_of(&self.tasks, task_ids) {
            let mut judgments = sim_answer(&self.config, &q);
            loop {
                match aggregate_judgments(&judgments, &self.policy) {
                    Ok(ans) => {
                        out.answers.push((q, ans));
                        break;
                    }
                    Err(AggregationError::Tie) if judgments.len() < limit => {
                        judgments.push(sim_judgment(&self.config, &q, judgments.len()));
                    }
                    Err(_) => {
                        out.unanswered.push(q);
                        break;
                    }
                }
            }
            self.judgments_drawn += judgments.len();
        }
        out
    }
}
