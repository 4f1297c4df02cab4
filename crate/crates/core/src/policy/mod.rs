//! The share/ignore decision boundary.
//!
//! A [`DecisionPolicy`] receives one [`DecisionRequest`] per agent and news
//! item and returns a [`DecisionOutcome`]. Requests for the same simulated
//! day may be decided concurrently.

mod llm;
mod prompt;
mod stub;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::news::NewsItem;
use crate::persona::AgentPersona;

pub use llm::{
    parse_response, ChatMessage, ChatTransport, HttpTransport, LlmPolicy, LlmSettings, ParsedDecision,
    ResponseCache, TransportError, REASK_MESSAGE, SYSTEM_MESSAGE,
};
pub use prompt::{render_prompt, PromptTemplates, TemplateId, DEFAULT_REFUTATION};
pub use stub::{logistic, StubParams, StubPolicy};

/// What an agent sees besides the news itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterventionContext {
    None,
    /// Comments left by neighbours who shared the item, oldest first.
    Commenting { peer_comments: Vec<String> },
    /// The item has been officially refuted.
    AccuracyNotice,
}

impl InterventionContext {
    pub fn template_id(&self) -> TemplateId {
        match self {
            InterventionContext::None => TemplateId::Baseline,
            InterventionContext::Commenting { .. } => TemplateId::Commenting,
            InterventionContext::AccuracyNotice => TemplateId::Accuracy,
        }
    }

    pub fn accuracy_notice(&self) -> bool {
        matches!(self, InterventionContext::AccuracyNotice)
    }

    pub fn peer_comments(&self) -> &[String] {
        match self {
            InterventionContext::Commenting { peer_comments } => peer_comments,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecisionRequest<'a> {
    pub agent_id: usize,
    pub persona: &'a AgentPersona,
    pub news: &'a NewsItem,
    pub day: u32,
    pub context: InterventionContext,
    /// Per-run seed; stochastic policies derive their per-(agent, news)
    /// stream from it.
    pub stream_seed: u64,
}

impl DecisionRequest<'_> {
    pub fn template_id(&self) -> TemplateId {
        self.context.template_id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeSource {
    LlmLive,
    LlmCache,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub share: bool,
    pub comment: Option<String>,
    pub rationale: Option<String>,
    pub raw_response: String,
    pub source: OutcomeSource,
    /// The reply never parsed; `share` is the documented fallback `false`.
    pub parse_failure: bool,
    /// Cache keys of every chat exchange behind this decision.
    pub transcript_keys: Vec<String>,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("chat endpoint failed after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("prompt rendering failed: {0}")]
    Template(String),
    #[error("response cache: {0}")]
    Cache(String),
}

pub trait DecisionPolicy: Send + Sync {
    /// Short description recorded in run provenance.
    fn identity(&self) -> String;

    /// Whether re-running with a different stream seed can change outcomes.
    fn is_stochastic(&self) -> bool;

    fn decide(&self, req: &DecisionRequest<'_>) -> Result<DecisionOutcome, PolicyError>;
}

/// Fixed answer for every request; handy for oracle tests.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub bool);

impl DecisionPolicy for ConstantPolicy {
    fn identity(&self) -> String {
        format!("constant(share={})", self.0)
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn decide(&self, req: &DecisionRequest<'_>) -> Result<DecisionOutcome, PolicyError> {
        let wants_comment = matches!(req.context, InterventionContext::Commenting { .. });
        Ok(DecisionOutcome {
            share: self.0,
            comment: (self.0 && wants_comment).then(|| format!("agent {} shared", req.agent_id)),
            rationale: None,
            raw_response: if self.0 { "DECISION: SHARE" } else { "DECISION: IGNORE" }.into(),
            source: OutcomeSource::Stub,
            parse_failure: false,
            transcript_keys: Vec::new(),
        })
    }
}
