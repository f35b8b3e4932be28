//! Side-by-side comparison of the persona modes over a query set.

use serde::{Deserialize, Serialize};

use crate::embedding::Embedder;
use crate::limit::map_bounded;
use crate::llm::ChatProvider;
use crate::persona::{
    ChatSession, ContextPrompt, PersonaError, PersonaMode, PersonaProfile, StoreKind, Stores,
    MEMORY_DATA_HEADER,
};
use crate::ranking::{RankedMemory, RetrievalParams};

/// An error confined to one query × mode cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellError {
    pub error_code: String,
    pub message: String,
}

impl From<&PersonaError> for CellError {
    fn from(e: &PersonaError) -> Self {
        Self {
            error_code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub query_index: usize,
    pub query: String,
    pub mode: PersonaMode,
    pub store: Option<StoreKind>,
    pub answer: Option<String>,
    pub entry_point_id: Option<String>,
    #[serde(default)]
    pub no_entry_point: bool,
    pub retrieved: Vec<RankedMemory>,
    /// Whether the context carried the per-scene valence/arousal/relevance block.
    #[serde(default)]
    pub memory_data_block: bool,
    pub context: Option<ContextPrompt>,
    /// Wall-clock retrieval time; set for every non-baseline cell that got
    /// as far as retrieval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_latency_ms: Option<f64>,
    pub error: Option<CellError>,
}

impl ComparisonRow {
    pub fn retrieved_ids(&self) -> Vec<&str> {
        self.retrieved
            .iter()
            .map(|r| r.record_id.as_str())
            .collect()
    }
}

/// Rows ordered by query, then by mode in `PersonaMode::ALL` order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

/// Everything a cell shares with the rest of the run.
#[derive(Clone, Copy)]
struct Shared<'a> {
    stores: Stores<'a>,
    llm: &'a dyn ChatProvider,
    embedder: &'a dyn Embedder,
    profile: &'a PersonaProfile,
    params: &'a RetrievalParams,
}

fn run_cell(
    query_index: usize,
    query: &str,
    mode: PersonaMode,
    shared: Shared<'_>,
) -> ComparisonRow {
    let Shared {
        stores,
        llm,
        embedder,
        profile,
        params,
    } = shared;
    let mut row = ComparisonRow {
        query_index,
        query: query.to_string(),
        mode,
        store: mode.store_kind(),
        answer: None,
        entry_point_id: None,
        no_entry_point: false,
        retrieved: Vec::new(),
        memory_data_block: false,
        context: None,
        retrieval_latency_ms: None,
        error: None,
    };
    let mut session = match ChatSession::new(
        format!("eval-{query_index}-{}", mode.as_str()),
        profile.clone(),
        mode,
        params.clone(),
    ) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some((&e).into());
            return row;
        }
    };
    let prepared = match session.prepare(query, stores, embedder) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some((&e).into());
            return row;
        }
    };
    row.retrieval_latency_ms = prepared.retrieval_latency.map(|d| d.as_secs_f64() * 1000.0);
    if let Some(ex) = &prepared.explanation {
        row.entry_point_id = ex.entry_point_id.clone();
        row.no_entry_point = ex.no_entry_point;
        row.retrieved = ex.candidates.clone();
    }
    row.memory_data_block = prepared.context.system_text.contains(MEMORY_DATA_HEADER);
    row.context = Some(prepared.context.clone());
    match session.commit(prepared, llm) {
        Ok(answer) => row.answer = Some(answer.text),
        Err(e) => row.error = Some((&e).into()),
    }
    row
}

/// Runs every query under every persona mode, each cell in a fresh session.
///
/// Cells run concurrently up to the provider's limit; the report order is
/// fixed by (query index, mode index) either way. Only an invalid profile or
/// parameter set fails the whole run.
pub fn run_comparison(
    queries: &[String],
    stores: Stores<'_>,
    llm: &dyn ChatProvider,
    embedder: &dyn Embedder,
    profile: &PersonaProfile,
    params: &RetrievalParams,
) -> Result<ComparisonReport, PersonaError> {
    profile.validate()?;
    params.validate()?;
    let cells: Vec<(usize, &str, PersonaMode)> = queries
        .iter()
        .enumerate()
        .flat_map(|(i, q)| PersonaMode::ALL.map(|m| (i, q.as_str(), m)))
        .collect();
    let shared = Shared {
        stores,
        llm,
        embedder,
        profile,
        params,
    };
    let rows = map_bounded(&cells, llm.max_in_flight(), |&(i, q, mode)| {
        run_cell(i, q, mode, shared)
    });
    Ok(ComparisonReport { rows })
}

/// Reads a query file: one query per line, blank lines skipped.
pub fn parse_queries(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "markdown-table" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn table_cell(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('|', "\\|")
        .replace("\r\n", "\n")
        .replace('\n', "<br>")
}

fn markdown(report: &ComparisonReport, include_timings: bool) -> String {
    let mut out = String::new();
    let mut current = None;
    for row in &report.rows {
        if current != Some(row.query_index) {
            if current.is_some() {
                out.push('\n');
            }
            current = Some(row.query_index);
            out.push_str(&format!("### Query: {}\n\n", table_cell(&row.query)));
            out.push_str("| Model configuration | Response |\n");
            out.push_str("|---|---|\n");
        }
        let mut response = match (&row.answer, &row.error) {
            (Some(text), _) => table_cell(text),
            (None, Some(e)) => format!("*error ({}): {}*", e.error_code, table_cell(&e.message)),
            (None, None) => String::new(),
        };
        if !row.retrieved.is_empty() {
            response.push_str(&format!(
                "<br>*retrieved: {}*",
                row.retrieved_ids().join(", ")
            ));
        }
        if include_timings {
            if let Some(ms) = row.retrieval_latency_ms {
                response.push_str(&format!("<br>*retrieval: {ms:.3} ms*"));
            }
        }
        out.push_str(&format!("| {} | {} |\n", row.mode.display_name(), response));
    }
    out
}

/// Serializes a report. Timings vary between runs, so they are left out
/// unless asked for; without them the output is a pure function of the
/// report's other fields.
pub fn emit_report(
    report: &ComparisonReport,
    format: ReportFormat,
    include_timings: bool,
) -> String {
    match format {
        ReportFormat::Json => {
            let mut report = report.clone();
            if !include_timings {
                for row in &mut report.rows {
                    row.retrieval_latency_ms = None;
                }
            }
            let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
            text.push('\n');
            text
        }
        ReportFormat::Markdown => markdown(report, include_timings),
    }
}
