//! Human review of silver labels.
//!
//! Decisions are appended to a JSON-lines log before they are acknowledged;
//! item statuses are a pure function of that log (latest decision per span wins),
//! so restarting the service replays the log to the same state.

mod http;

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SpanKind};
use crate::error::{Error, Result};
use crate::matcher::{concept_distance, retrieve_candidates};
use crate::supervise::{LabelRecord, MatchSummary, Provenance, MISSING_LABEL};
use crate::taxonomy::{CoarseLabel, TaxonomyIndex};
use crate::text::normalize;

pub use http::{router, serve, spawn, ServerHandle};

pub const DEFAULT_PORT: u16 = 7860;
pub const DEFAULT_ALTERNATIVES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Corrected,
    FlaggedMissing,
}

impl std::str::FromStr for ReviewStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pending" => Ok(ReviewStatus::Pending),
            "accepted" => Ok(ReviewStatus::Accepted),
            "corrected" => Ok(ReviewStatus::Corrected),
            "flagged-missing" => Ok(ReviewStatus::FlaggedMissing),
            other => Err(Error::InvalidInput(format!("unknown status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewAction {
    Accept,
    Correct,
    FlagMissing,
}

impl ReviewAction {
    fn status(self) -> ReviewStatus {
        match self {
            ReviewAction::Accept => ReviewStatus::Accepted,
            ReviewAction::Correct => ReviewStatus::Corrected,
            ReviewAction::FlagMissing => ReviewStatus::FlaggedMissing,
        }
    }
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub span_id: String,
    pub label: CoarseLabel,
    pub action: ReviewAction,
    pub timestamp: String,
    pub reviewer_id: String,
}

/// Body of `POST /api/items/{span_id}/decision`. `label` may be omitted for
/// `accept` (keeps the silver label) and `flag-missing` (uses K99).
#[derive(Debug, Clone, Deserialize)]
pub struct DecisionRequest {
    #[serde(default)]
    pub label: Option<String>,
    pub action: ReviewAction,
    #[serde(default)]
    pub reviewer_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextSpan {
    pub span_id: String,
    pub start: usize,
    pub end: usize,
    pub kind: SpanKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceContext {
    pub posting_id: String,
    pub sentence_index: usize,
    pub tokens: Vec<String>,
    pub start: usize,
    pub end: usize,
    /// Other spans in the same sentence, including nested and overlapping ones.
    pub siblings: Vec<ContextSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alternative {
    pub code: String,
    pub label: String,
    pub coarse_label: CoarseLabel,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewItem {
    pub span_id: String,
    pub surface: String,
    pub kind: SpanKind,
    pub silver_label: CoarseLabel,
    pub missing: bool,
    #[serde(rename = "match")]
    pub match_summary: Option<MatchSummary>,
    pub context: Option<SentenceContext>,
    pub alternatives: Vec<Alternative>,
    pub status: ReviewStatus,
    pub decision: Option<ReviewDecision>,
}

impl ReviewItem {
    pub fn current_label(&self) -> CoarseLabel {
        self.decision.as_ref().map_or(self.silver_label, |d| d.label)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("unknown span id {0:?}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("decision log write failed: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub total: usize,
    pub decided: usize,
    pub by_status: BTreeMap<ReviewStatus, usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemPage {
    pub items: Vec<ReviewItem>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

/// Optional inputs enriching review items.
#[derive(Default)]
pub struct ReviewContext<'a> {
    pub corpus: Option<&'a Corpus>,
    pub index: Option<&'a TaxonomyIndex>,
    pub alternatives: usize,
}

pub struct ReviewStore {
    items: Vec<ReviewItem>,
    silver: Vec<LabelRecord>,
    by_id: HashMap<String, usize>,
    log_path: PathBuf,
    log: File,
}

fn alternatives(record: &LabelRecord, index: &TaxonomyIndex, k: usize) -> Vec<Alternative> {
    let query = normalize(&record.surface);
    let mut alts: Vec<Alternative> = retrieve_candidates(&record.surface, record.kind, index, 100)
        .into_iter()
        .filter_map(|c| {
            let (distance, label) = concept_distance(&query, c.concept, index.language())?;
            Some(Alternative {
                code: c.concept.code.clone(),
                label: label.to_string(),
                coarse_label: index.coarse_label(&c.concept.code)?,
                distance,
            })
        })
        .collect();
    alts.sort_by_key(|a| a.distance);
    alts.truncate(k);
    alts
}

fn context_for(span_id: &str, corpus: &Corpus) -> Option<SentenceContext> {
    let span = corpus.spans.iter().find(|s| s.span_id == span_id)?;
    let posting = corpus.posting(&span.posting_id)?;
    let siblings = corpus
        .spans
        .iter()
        .filter(|s| {
            s.posting_id == span.posting_id
                && s.sentence_index == span.sentence_index
                && s.span_id != span.span_id
        })
        .map(|s| ContextSpan {
            span_id: s.span_id.clone(),
            start: s.start,
            end: s.end,
            kind: s.kind,
        })
        .collect();
    Some(SentenceContext {
        posting_id: span.posting_id.clone(),
        sentence_index: span.sentence_index,
        tokens: posting.sentences[span.sentence_index].tokens.clone(),
        start: span.start,
        end: span.end,
        siblings,
    })
}

impl ReviewStore {
    /// Build the item set from a silver file and replay `log_path` (created if absent).
    ///
    /// A final log line without a terminating newline is treated as a torn
    /// write: it is dropped and the file truncated back to the last full line.
    pub fn open(silver: Vec<LabelRecord>, context: ReviewContext<'_>, log_path: impl AsRef<Path>) -> Result<Self> {
        let log_path = log_path.as_ref().to_path_buf();
        let mut by_id = HashMap::with_capacity(silver.len());
        let mut items = Vec::with_capacity(silver.len());
        for (i, record) in silver.iter().enumerate() {
            if by_id.insert(record.span_id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate span id {:?} in silver file", record.span_id)));
            }
            items.push(ReviewItem {
                span_id: record.span_id.clone(),
                surface: record.surface.clone(),
                kind: record.kind,
                silver_label: record.label,
                missing: record.missing,
                match_summary: record.match_summary.clone(),
                context: context.corpus.and_then(|c| context_for(&record.span_id, c)),
                alternatives: context
                    .index
                    .map(|idx| alternatives(record, idx, context.alternatives))
                    .unwrap_or_default(),
                status: ReviewStatus::Pending,
                decision: None,
            });
        }

        let mut log = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        let mut text = String::new();
        log.read_to_string(&mut text).map_err(|e| Error::io(&log_path, e))?;

        let mut store = ReviewStore {
            items,
            silver,
            by_id,
            log_path: log_path.clone(),
            log,
        };
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        for (i, line) in lines.iter().enumerate() {
            offset += line.len();
            let complete = line.ends_with('\n');
            if line.trim().is_empty() {
                good_len = offset;
                continue;
            }
            match serde_json::from_str::<ReviewDecision>(line.trim_end()) {
                Ok(decision) => {
                    if !complete {
                        // parsed but unterminated: keep it and finish the line
                        store.log.write_all(b"\n").map_err(|e| Error::io(&log_path, e))?;
                    }
                    let idx = *store.by_id.get(&decision.span_id).ok_or_else(|| {
                        Error::parse(i + 1, format!("decision for unknown span id {:?}", decision.span_id))
                    })?;
                    store.apply(idx, decision);
                    good_len = offset + usize::from(!complete);
                }
                Err(_) if !complete && i + 1 == lines.len() => {
                    log::warn!("{}: dropping torn final log line", log_path.display());
                    store.log.set_len(good_len as u64).map_err(|e| Error::io(&log_path, e))?;
                    store.log.seek(SeekFrom::End(0)).map_err(|e| Error::io(&log_path, e))?;
                }
                Err(e) => return Err(Error::parse(i + 1, format!("{}: {e}", log_path.display()))),
            }
        }
        Ok(store)
    }

    fn apply(&mut self, idx: usize, decision: ReviewDecision) {
        let item = &mut self.items[idx];
        item.status = decision.action.status();
        item.decision = Some(decision);
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn items(&self) -> &[ReviewItem] {
        &self.items
    }

    pub fn item(&self, span_id: &str) -> Option<&ReviewItem> {
        self.by_id.get(span_id).map(|&i| &self.items[i])
    }

    pub fn page(&self, status: Option<ReviewStatus>, offset: usize, limit: usize) -> ItemPage {
        let matching: Vec<&ReviewItem> = self
            .items
            .iter()
            .filter(|it| status.is_none_or(|s| it.status == s))
            .collect();
        ItemPage {
            total: matching.len(),
            items: matching.into_iter().skip(offset).take(limit).cloned().collect(),
            offset,
            limit,
        }
    }

    pub fn progress(&self) -> Progress {
        let mut by_status = BTreeMap::new();
        for it in &self.items {
            *by_status.entry(it.status).or_insert(0) += 1;
        }
        Progress {
            total: self.items.len(),
            decided: self.items.iter().filter(|it| it.decision.is_some()).count(),
            by_status,
        }
    }

    /// Validate, append to the log, then update the item. Repeating the latest
    /// decision for a span is a no-op.
    pub fn record_decision(&mut self, span_id: &str, request: DecisionRequest) -> Result<ReviewItem, ReviewError> {
        self.record_decision_at(span_id, request, chrono::Utc::now())
    }

    pub fn record_decision_at(
        &mut self,
        span_id: &str,
        request: DecisionRequest,
        now: chrono::DateTime<chrono::Utc>,
    ) -> Result<ReviewItem, ReviewError> {
        let idx = *self
            .by_id
            .get(span_id)
            .ok_or_else(|| ReviewError::NotFound(span_id.to_string()))?;
        let item = &self.items[idx];
        let label = match (&request.label, request.action) {
            (Some(tag), _) => tag
                .parse::<CoarseLabel>()
                .map_err(|e| ReviewError::BadRequest(e.to_string()))?,
            (None, ReviewAction::Accept) => item.silver_label,
            (None, ReviewAction::FlagMissing) => MISSING_LABEL,
            (None, ReviewAction::Correct) => {
                return Err(ReviewError::BadRequest("a correction needs a label".into()))
            }
        };
        if request.action == ReviewAction::Accept && label != item.silver_label {
            return Err(ReviewError::BadRequest(format!(
                "accept keeps the silver label {}; use correct for {}",
                item.silver_label, label
            )));
        }
        let reviewer_id = request.reviewer_id.unwrap_or_else(|| "anonymous".to_string());
        if let Some(prev) = &item.decision {
            if prev.label == label && prev.action == request.action && prev.reviewer_id == reviewer_id {
                return Ok(item.clone());
            }
        }
        let decision = ReviewDecision {
            span_id: span_id.to_string(),
            label,
            action: request.action,
            timestamp: now.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            reviewer_id,
        };
        let mut line = serde_json::to_vec(&decision).map_err(|e| ReviewError::Storage(e.to_string()))?;
        line.push(b'\n');
        self.log
            .write_all(&line)
            .and_then(|_| self.log.sync_data())
            .map_err(|e| ReviewError::Storage(e.to_string()))?;
        self.apply(idx, decision);
        Ok(self.items[idx].clone())
    }

    /// Complete label file: decided spans as gold, the rest unchanged as silver.
    pub fn export_gold(&self) -> Vec<LabelRecord> {
        self.silver
            .iter()
            .zip(&self.items)
            .map(|(silver, item)| match &item.decision {
                None => LabelRecord {
                    provenance: Provenance::Silver,
                    ..silver.clone()
                },
                Some(d) => LabelRecord {
                    label: d.label,
                    provenance: Provenance::Gold,
                    missing: match d.action {
                        ReviewAction::FlagMissing => true,
                        ReviewAction::Accept => silver.missing,
                        ReviewAction::Correct => false,
                    },
                    ..silver.clone()
                },
            })
            .collect()
    }
}
