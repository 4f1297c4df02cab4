//! Offline trait-driven policy.
//!
//! Share probability is `logistic(intercept + w_E·z_E + w_O·z_O + m)` where
//! `z` are extraversion/openness z-scores and `m` adds `accuracy_penalty`
//! under an accuracy notice and `comment_shift` when peer comments are
//! shown. The draw comes from a stream keyed by (run seed, agent, news id).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DecisionOutcome, DecisionPolicy, DecisionRequest, InterventionContext, OutcomeSource, PolicyError};
use crate::persona::{AgentPersona, BigFiveStats, Trait};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StubParams {
    pub intercept: f64,
    pub weight_e: f64,
    pub weight_o: f64,
    /// Added to the logit once the item has been refuted; should be < 0.
    pub accuracy_penalty: f64,
    /// Added to the logit when at least one peer comment is shown.
    pub comment_shift: f64,
}

impl Default for StubParams {
    /// Weights of 0.8 on both traits; the intercept puts the population
    /// share rate at about 0.45.
    fn default() -> Self {
        StubParams {
            intercept: -0.25,
            weight_e: 0.8,
            weight_o: 0.8,
            accuracy_penalty: -3.0,
            comment_shift: 0.0,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const STUB_COMMENTS: [&str; 4] = [
    "Is this real? Sharing so we can talk about it.",
    "Wow, everyone should see this.",
    "Not sure about the source, what do you think?",
    "This matches what I have been hearing.",
];

#[derive(Debug, Clone, Default)]
pub struct StubPolicy {
    pub params: StubParams,
    pub stats: BigFiveStats,
}

impl StubPolicy {
    pub fn new(params: StubParams, stats: BigFiveStats) -> Self {
        StubPolicy { params, stats }
    }

    pub fn logit(&self, persona: &AgentPersona, ctx: &InterventionContext) -> f64 {
        let p = &self.params;
        let ze = self.stats.z_score(Trait::Extraversion, persona.score(Trait::Extraversion));
        let zo = self.stats.z_score(Trait::Openness, persona.score(Trait::Openness));
        let mut x = p.intercept + p.weight_e * ze + p.weight_o * zo;
        if ctx.accuracy_notice() {
            x += p.accuracy_penalty;
        }
        if !ctx.peer_comments().is_empty() {
            x += p.comment_shift;
        }
        x
    }

    pub fn share_probability(&self, persona: &AgentPersona, ctx: &InterventionContext) -> f64 {
        logistic(self.logit(persona, ctx))
    }
}

impl DecisionPolicy for StubPolicy {
    fn identity(&self) -> String {
        let p = &self.params;
        format!(
            "stub(intercept={},weight_e={},weight_o={},accuracy_penalty={},comment_shift={})",
            p.intercept, p.weight_e, p.weight_o, p.accuracy_penalty, p.comment_shift
        )
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn decide(&self, req: &DecisionRequest<'_>) -> Result<DecisionOutcome, PolicyError> {
        let prob = self.share_probability(req.persona, &req.context);
        let stream = seed::derive(req.stream_seed, req.agent_id as u64, &format!("stub/{}", req.news.news_id));
        let mut rng = seed::rng(stream);
        let draw: f64 = rng.random();
        let share = draw < prob;
        let comment = (share && matches!(req.context, InterventionContext::Commenting { .. }))
            .then(|| STUB_COMMENTS[rng.random_range(0..STUB_COMMENTS.len())].to_string());
        let mut raw = format!("DECISION: {}", if share { "SHARE" } else { "IGNORE" });
        if let Some(c) = &comment {
            raw.push_str("\nCOMMENT: ");
            raw.push_str(c);
        }
        Ok(DecisionOutcome {
            share,
            comment,
            rationale: Some(format!("p_share={prob:.4}")),
            raw_response: raw,
            source: OutcomeSource::Stub,
            parse_failure: false,
            transcript_keys: Vec::new(),
        })
    }
}
