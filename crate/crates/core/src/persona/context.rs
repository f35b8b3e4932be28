use serde::{Deserialize, Serialize};

use super::{estimate_tokens, PersonaError, PersonaMode, PersonaProfile, Turn};
use crate::llm::ChatMessage;
use crate::memory::MemoryRecord;

pub const CHARACTER_HEADER: &str = "=== CHARACTER ===";
pub const INSTRUCTIONS_HEADER: &str = "=== INSTRUCTIONS ===";
pub const MEMORIES_HEADER: &str = "=== RETRIEVED MEMORIES ===";
pub const MEMORY_DATA_HEADER: &str = "=== MEMORY DATA ===";

/// Estimated token counts per section of a built context.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSizes {
    pub character: usize,
    pub instructions: usize,
    pub retrieved_memories: usize,
    pub memory_data: usize,
    pub history: usize,
    pub query: usize,
    pub total: usize,
}

/// The system text and messages sent to the model for one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPrompt {
    pub system_text: String,
    pub messages: Vec<ChatMessage>,
    /// Ids of the retrieved records that made it into the context, by rank.
    pub included_scene_ids: Vec<String>,
    /// How many of the most recent history turns were kept.
    pub history_turns: usize,
    pub sections: SectionSizes,
}

impl ContextPrompt {
    /// Estimated size of everything sent: system text plus every message.
    pub fn total_tokens(&self) -> usize {
        estimate_tokens(&self.system_text)
            + self
                .messages
                .iter()
                .map(|m| estimate_tokens(&m.text))
                .sum::<usize>()
    }
}

fn scene_entry(mode: PersonaMode, rank: usize, record: &MemoryRecord) -> String {
    let mut lines = vec![format!("[{rank}] {}", record.id)];
    if mode == PersonaMode::TraditionalRag {
        lines.push(record.first_person_narrative.clone());
    } else {
        if !record.scene_background.is_empty() {
            lines.push(format!("Setting: {}", record.scene_background));
        }
        lines.push(record.first_person_narrative.clone());
        if !record.general_context.is_empty() {
            lines.push(format!("Context: {}", record.general_context));
        }
    }
    lines.join("\n")
}

fn data_entry(rank: usize, record: &MemoryRecord) -> String {
    format!(
        "[{rank}] {} valence={} arousal={} relevance={}",
        record.id, record.valence, record.arousal, record.relevance_score
    )
}

struct Parts {
    character: String,
    instructions: String,
    memories: Vec<String>,
    data: Vec<String>,
}

impl Parts {
    fn system_text(&self, scenes: usize) -> (String, usize, usize) {
        let mut blocks = vec![self.character.clone(), self.instructions.clone()];
        let mut memory_tokens = 0;
        let mut data_tokens = 0;
        if scenes > 0 {
            let block = format!(
                "{MEMORIES_HEADER}\n{}",
                self.memories[..scenes].join("\n\n")
            );
            memory_tokens = estimate_tokens(&block);
            blocks.push(block);
            if !self.data.is_empty() {
                let block = format!("{MEMORY_DATA_HEADER}\n{}", self.data[..scenes].join("\n"));
                data_tokens = estimate_tokens(&block);
                blocks.push(block);
            }
        }
        (blocks.join("\n\n"), memory_tokens, data_tokens)
    }
}

fn messages(history: &[Turn], keep: usize, query: &str) -> Vec<ChatMessage> {
    let mut out = Vec::with_capacity(keep * 2 + 1);
    for turn in &history[history.len() - keep..] {
        out.push(ChatMessage::user(&turn.user_text));
        out.push(ChatMessage::assistant(&turn.assistant_text));
    }
    out.push(ChatMessage::user(query));
    out
}

/// Builds the context for one turn within the profile's budget.
///
/// `retrieved` lists the retrieved records best first and must be given
/// exactly when the mode is not baseline. To fit the budget the oldest
/// history turns are dropped first, then the lowest-ranked records; the
/// character, instructions and query are always kept.
pub fn construct_context(
    profile: &PersonaProfile,
    mode: PersonaMode,
    retrieved: Option<&[&MemoryRecord]>,
    history: &[Turn],
    query: &str,
) -> Result<ContextPrompt, PersonaError> {
    profile.validate()?;
    let retrieved = match (mode, retrieved) {
        (PersonaMode::Baseline, None) => &[][..],
        (PersonaMode::Baseline, Some(_)) => {
            return Err(PersonaError::ModeMismatch(
                "baseline mode takes no retrieved records".into(),
            ))
        }
        (_, Some(r)) => r,
        (_, None) => {
            return Err(PersonaError::ModeMismatch(format!(
                "{} mode needs retrieved records",
                mode.as_str()
            )))
        }
    };
    let parts = Parts {
        character: format!("{CHARACTER_HEADER}\n{}", profile.character_description),
        instructions: format!("{INSTRUCTIONS_HEADER}\n{}", profile.task_instructions),
        memories: retrieved
            .iter()
            .enumerate()
            .map(|(i, r)| scene_entry(mode, i + 1, r))
            .collect(),
        data: if mode == PersonaMode::AutonoesisRankedData {
            retrieved
                .iter()
                .enumerate()
                .map(|(i, r)| data_entry(i + 1, r))
                .collect()
        } else {
            Vec::new()
        },
    };
    let budget = profile.effective_budget();

    let build = |turns: usize, scenes: usize| {
        let (system_text, memory_tokens, data_tokens) = parts.system_text(scenes);
        let messages = messages(history, turns, query);
        let history_tokens: usize = messages[..messages.len() - 1]
            .iter()
            .map(|m| estimate_tokens(&m.text))
            .sum();
        let sections = SectionSizes {
            character: estimate_tokens(&parts.character),
            instructions: estimate_tokens(&parts.instructions),
            retrieved_memories: memory_tokens,
            memory_data: data_tokens,
            history: history_tokens,
            query: estimate_tokens(query),
            total: 0,
        };
        let mut prompt = ContextPrompt {
            system_text,
            messages,
            included_scene_ids: retrieved[..scenes].iter().map(|r| r.id.clone()).collect(),
            history_turns: turns,
            sections,
        };
        prompt.sections.total = prompt.total_tokens();
        prompt
    };

    let floor = build(0, 0);
    if floor.sections.total > budget {
        return Err(PersonaError::BudgetTooSmall {
            required: floor.sections.total,
            budget,
        });
    }
    let scenes = retrieved.len();
    for turns in (0..=history.len()).rev() {
        let prompt = build(turns, scenes);
        if prompt.sections.total <= budget {
            return Ok(prompt);
        }
    }
    for kept in (0..scenes).rev() {
        let prompt = build(0, kept);
        if prompt.sections.total <= budget {
            return Ok(prompt);
        }
    }
    Ok(floor)
}
