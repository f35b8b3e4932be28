//! Persona chat: budgeted context construction over retrieved memories,
//! sessions with append-only history, and per-turn explanations.

mod context;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use context::{
    construct_context, ContextPrompt, SectionSizes, CHARACTER_HEADER, INSTRUCTIONS_HEADER,
    MEMORIES_HEADER, MEMORY_DATA_HEADER,
};

use crate::embedding::Embedder;
use crate::llm::{ChatProvider, ChatRequest, LlmError};
use crate::memory::{MemoryRecord, MemoryStore};
use crate::ranking::{
    retrieve, FactorToggles, RankingError, RetrievalExplanation, RetrievalParams,
};

/// Smallest context budget a profile may declare.
pub const MIN_CONTEXT_BUDGET: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PersonaError {
    #[error("invalid persona profile: {0}")]
    InvalidProfile(String),
    #[error("context needs at least {required} tokens but the budget is {budget}")]
    BudgetTooSmall { required: usize, budget: usize },
    #[error("{0}")]
    ModeMismatch(String),
    #[error("this mode needs the {0} store, which is not loaded")]
    MissingStore(&'static str),
    #[error("no grounded turn to explain")]
    NothingToExplain,
    #[error(transparent)]
    Retrieval(#[from] RankingError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl PersonaError {
    pub fn code(&self) -> &'static str {
        match self {
            PersonaError::InvalidProfile(_) => "invalid_profile",
            PersonaError::BudgetTooSmall { .. } => "budget_too_small",
            PersonaError::ModeMismatch(_) => "mode_mismatch",
            PersonaError::MissingStore(_) => "missing_store",
            PersonaError::NothingToExplain => "nothing_to_explain",
            PersonaError::Retrieval(e) => e.code(),
            PersonaError::Llm(e) => e.code(),
        }
    }
}

/// Rough token count: a quarter of the character count, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaProfile {
    pub name: String,
    pub character_description: String,
    pub task_instructions: String,
    /// Token budget for everything sent to the model.
    pub context_budget: usize,
    /// Tokens held back from the budget as a safety margin.
    #[serde(default)]
    pub budget_margin: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_output_tokens() -> u32 {
    512
}

impl PersonaProfile {
    pub fn validate(&self) -> Result<(), PersonaError> {
        if self.context_budget < MIN_CONTEXT_BUDGET {
            return Err(PersonaError::InvalidProfile(format!(
                "context_budget {} is below {MIN_CONTEXT_BUDGET}",
                self.context_budget
            )));
        }
        if self.budget_margin >= self.context_budget {
            return Err(PersonaError::InvalidProfile(
                "budget_margin must be smaller than context_budget".into(),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(PersonaError::InvalidProfile(
                "temperature must be a non-negative number".into(),
            ));
        }
        if self.max_output_tokens == 0 {
            return Err(PersonaError::InvalidProfile(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_budget(&self) -> usize {
        self.context_budget - self.budget_margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaMode {
    /// No retrieval at all.
    Baseline,
    /// Cosine-only retrieval over the raw biography segments.
    TraditionalRag,
    /// Compound-score retrieval over the augmented first-person scenes.
    Autonoesis,
    /// As `Autonoesis`, plus each retrieved scene's valence, arousal and
    /// relevance in a data block.
    AutonoesisRankedData,
}

impl PersonaMode {
    pub const ALL: [PersonaMode; 4] = [
        PersonaMode::Baseline,
        PersonaMode::TraditionalRag,
        PersonaMode::Autonoesis,
        PersonaMode::AutonoesisRankedData,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PersonaMode::Baseline => "baseline",
            PersonaMode::TraditionalRag => "traditional_rag",
            PersonaMode::Autonoesis => "autonoesis",
            PersonaMode::AutonoesisRankedData => "autonoesis_ranked_data",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            PersonaMode::Baseline => "Baseline LLM",
            PersonaMode::TraditionalRag => "Traditional RAG",
            PersonaMode::Autonoesis => "Augmented RAG (Autonoesis)",
            PersonaMode::AutonoesisRankedData => "Augmented RAG (Autonoesis + Ranked + Data)",
        }
    }

    /// Which store the mode retrieves from, if any.
    pub fn store_kind(self) -> Option<StoreKind> {
        match self {
            PersonaMode::Baseline => None,
            PersonaMode::TraditionalRag => Some(StoreKind::Raw),
            PersonaMode::Autonoesis | PersonaMode::AutonoesisRankedData => {
                Some(StoreKind::Augmented)
            }
        }
    }

    /// The session parameters adjusted for this mode: traditional RAG ranks
    /// by cosine alone.
    pub fn retrieval_params(self, base: &RetrievalParams) -> RetrievalParams {
        let mut params = base.clone();
        if self == PersonaMode::TraditionalRag {
            params.factor_toggles = FactorToggles::cosine_only();
        }
        params
    }
}

impl std::str::FromStr for PersonaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PersonaMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreKind {
    Raw,
    Augmented,
}

/// The stores a session may draw on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stores<'a> {
    pub raw: Option<&'a MemoryStore>,
    pub augmented: Option<&'a MemoryStore>,
}

impl<'a> Stores<'a> {
    pub fn get(&self, kind: StoreKind) -> Result<&'a MemoryStore, PersonaError> {
        match kind {
            StoreKind::Raw => self.raw.ok_or(PersonaError::MissingStore("raw")),
            StoreKind::Augmented => self
                .augmented
                .ok_or(PersonaError::MissingStore("augmented")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub user_text: String,
    pub assistant_text: String,
    /// Absent only in baseline mode.
    pub explanation: Option<RetrievalExplanation>,
}

/// Everything about a turn except the model's reply.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTurn {
    pub query: String,
    pub explanation: Option<RetrievalExplanation>,
    pub context: ContextPrompt,
    pub retrieval_latency: Option<Duration>,
}

impl PreparedTurn {
    pub fn no_entry_point(&self) -> bool {
        self.explanation.as_ref().is_some_and(|e| e.no_entry_point)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub text: String,
    pub explanation: Option<RetrievalExplanation>,
    pub context: ContextPrompt,
    pub retrieval_latency: Option<Duration>,
    /// Retrieval found nothing above the threshold; the answer is ungrounded.
    pub no_entry_point: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: String,
    pub profile: PersonaProfile,
    pub mode: PersonaMode,
    pub params: RetrievalParams,
    history: Vec<Turn>,
}

impl ChatSession {
    pub fn new(
        id: impl Into<String>,
        profile: PersonaProfile,
        mode: PersonaMode,
        params: RetrievalParams,
    ) -> Result<Self, PersonaError> {
        profile.validate()?;
        params.validate()?;
        Ok(Self {
            id: id.into(),
            profile,
            mode,
            params,
            history: Vec::new(),
        })
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    /// Retrieves and builds the context for `query` without calling the
    /// model or touching the history.
    pub fn prepare(
        &self,
        query: &str,
        stores: Stores<'_>,
        embedder: &dyn Embedder,
    ) -> Result<PreparedTurn, PersonaError> {
        let Some(kind) = self.mode.store_kind() else {
            let context = construct_context(&self.profile, self.mode, None, &self.history, query)?;
            return Ok(PreparedTurn {
                query: query.to_string(),
                explanation: None,
                context,
                retrieval_latency: None,
            });
        };
        let store = stores.get(kind)?;
        let params = self.mode.retrieval_params(&self.params);
        let started = Instant::now();
        let explanation = retrieve(query, store, &params, embedder)?;
        let latency = started.elapsed();
        let records: Vec<&MemoryRecord> = explanation
            .candidates
            .iter()
            .map(|c| {
                store
                    .get(&c.record_id)
                    .expect("retrieved ids exist in the store")
            })
            .collect();
        let context = construct_context(
            &self.profile,
            self.mode,
            Some(&records),
            &self.history,
            query,
        )?;
        Ok(PreparedTurn {
            query: query.to_string(),
            explanation: Some(explanation),
            context,
            retrieval_latency: Some(latency),
        })
    }

    /// Sends a prepared turn to the model. The turn is appended only when
    /// the model answers; on error the session is unchanged.
    pub fn commit(
        &mut self,
        prepared: PreparedTurn,
        llm: &dyn ChatProvider,
    ) -> Result<Answer, PersonaError> {
        let text = llm.complete(&self.request_for(&prepared.context))?;
        let no_entry_point = prepared.no_entry_point();
        self.history.push(Turn {
            user_text: prepared.query,
            assistant_text: text.clone(),
            explanation: prepared.explanation.clone(),
        });
        Ok(Answer {
            text,
            explanation: prepared.explanation,
            context: prepared.context,
            retrieval_latency: prepared.retrieval_latency,
            no_entry_point,
        })
    }

    pub fn request_for(&self, context: &ContextPrompt) -> ChatRequest {
        ChatRequest {
            system_text: context.system_text.clone(),
            messages: context.messages.clone(),
            temperature: self.profile.temperature,
            max_output_tokens: self.profile.max_output_tokens,
        }
    }

    /// Retrieve, build the context, ask the model, record the turn.
    pub fn answer(
        &mut self,
        query: &str,
        stores: Stores<'_>,
        llm: &dyn ChatProvider,
        embedder: &dyn Embedder,
    ) -> Result<Answer, PersonaError> {
        let prepared = self.prepare(query, stores, embedder)?;
        self.commit(prepared, llm)
    }

    /// The explanation stored with the most recent turn.
    pub fn explain_last(&self) -> Result<&RetrievalExplanation, PersonaError> {
        self.history
            .last()
            .and_then(|t| t.explanation.as_ref())
            .ok_or(PersonaError::NothingToExplain)
    }

    /// The whole session, turns and explanations included, as JSON.
    pub fn transcript_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sessions serialize")
    }
}
