//! Distant supervision: coarse spans in, silver coarse labels out.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{SpanKind, SpanRecord};
use crate::error::{Error, Result};
use crate::matcher::{fetch_skill, retrieve_candidates, MatchResult};
use crate::taxonomy::{coarse_label, CoarseLabel, ConceptKind, EscoClient, TaxonomyIndex};

/// Label assigned when no taxonomy concept matches a span.
pub const MISSING_LABEL: CoarseLabel = CoarseLabel::K99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Silver,
    Gold,
    Artifact,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpanDiagnostics {
    pub candidates: usize,
    pub best_distance: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpan {
    pub span: SpanRecord,
    pub label: CoarseLabel,
    pub provenance: Provenance,
    pub match_result: Option<MatchResult>,
    pub missing: bool,
    pub diagnostics: SpanDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub code: String,
    pub distance: usize,
}

/// One line of a silver or gold label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub span_id: String,
    pub surface: String,
    pub kind: SpanKind,
    pub label: CoarseLabel,
    pub provenance: Provenance,
    pub missing: bool,
    #[serde(rename = "match")]
    pub match_summary: Option<MatchSummary>,
}

impl LabeledSpan {
    pub fn to_record(&self) -> LabelRecord {
        LabelRecord {
            span_id: self.span.span_id.clone(),
            surface: self.span.surface.clone(),
            kind: self.span.kind,
            label: self.label,
            provenance: self.provenance,
            missing: self.missing,
            match_summary: self.match_result.as_ref().map(|m| MatchSummary {
                code: m.concept.code.clone(),
                distance: m.distance,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuperviseOptions {
    /// Candidates retrieved per span before the Levenshtein rerank.
    pub k: usize,
    /// Pass through spans whose input label is already an artifact tag.
    pub keep_input_artifacts: bool,
}

impl Default for SuperviseOptions {
    fn default() -> Self {
        SuperviseOptions {
            k: 100,
            keep_input_artifacts: true,
        }
    }
}

fn artifact_passthrough(span: &SpanRecord, options: &SuperviseOptions) -> Option<LabeledSpan> {
    let label = span.label.filter(|l| options.keep_input_artifacts && l.is_artifact())?;
    Some(LabeledSpan {
        span: span.clone(),
        label,
        provenance: Provenance::Artifact,
        match_result: None,
        missing: false,
        diagnostics: SpanDiagnostics::default(),
    })
}

fn missing(span: &SpanRecord, diagnostics: SpanDiagnostics) -> LabeledSpan {
    LabeledSpan {
        span: span.clone(),
        label: MISSING_LABEL,
        provenance: Provenance::Silver,
        match_result: None,
        missing: true,
        diagnostics,
    }
}

fn labeled(
    span: &SpanRecord,
    found: Option<MatchResult>,
    candidates: usize,
    resolve: impl Fn(&MatchResult) -> Result<CoarseLabel>,
) -> LabeledSpan {
    let mut diagnostics = SpanDiagnostics {
        candidates,
        best_distance: found.as_ref().map(|m| m.distance),
        error: None,
    };
    let Some(found) = found else {
        return missing(span, diagnostics);
    };
    match resolve(&found) {
        Ok(label) => LabeledSpan {
            span: span.clone(),
            label,
            provenance: Provenance::Silver,
            match_result: Some(found),
            missing: false,
            diagnostics,
        },
        Err(e) => {
            diagnostics.error = Some(e.to_string());
            missing(span, diagnostics)
        }
    }
}

/// Label every span against an offline index. Output order equals input order.
pub fn distant_label(
    spans: &[SpanRecord],
    index: &TaxonomyIndex,
    options: &SuperviseOptions,
) -> Vec<LabeledSpan> {
    spans
        .par_iter()
        .map(|span| {
            if let Some(passed) = artifact_passthrough(span, options) {
                return passed;
            }
            let candidates = retrieve_candidates(&span.surface, span.kind, index, options.k);
            let found = fetch_skill(
                &span.surface,
                span.kind,
                candidates.iter().map(|c| c.concept),
                index.language(),
            );
            labeled(span, found, candidates.len(), |m| {
                index
                    .coarse_label(&m.concept.code)
                    .ok_or_else(|| Error::UnmappableCode(m.concept.code.clone()))
            })
        })
        .collect()
}

/// Label every span using live search results as the candidate list.
/// Request failures become per-span diagnostics on a missing label.
pub fn distant_label_online(
    spans: &[SpanRecord],
    client: &EscoClient,
    language: &str,
    options: &SuperviseOptions,
) -> Vec<LabeledSpan> {
    spans
        .par_iter()
        .map(|span| {
            if let Some(passed) = artifact_passthrough(span, options) {
                return passed;
            }
            let kind = match span.kind {
                SpanKind::Skill => ConceptKind::Skill,
                SpanKind::Knowledge => ConceptKind::Knowledge,
            };
            match client.fetch(&span.surface, kind, language, options.k) {
                Ok(candidates) => {
                    let found = fetch_skill(&span.surface, span.kind, &candidates, language);
                    labeled(span, found, candidates.len(), |m| coarse_label(&m.concept))
                }
                Err(e) => missing(
                    span,
                    SpanDiagnostics {
                        error: Some(e.to_string()),
                        ..SpanDiagnostics::default()
                    },
                ),
            }
        })
        .collect()
}

/// Label histogram, iterated in tag order.
pub fn label_distribution<I>(labels: I) -> BTreeMap<CoarseLabel, usize>
where
    I: IntoIterator<Item = CoarseLabel>,
{
    let mut hist = BTreeMap::new();
    for label in labels {
        *hist.entry(label).or_insert(0) += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityAudit {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub missing: usize,
    pub missing_rate: f64,
}

/// Compare silver labels with gold labels for the same spans (joined on span id).
pub fn silver_quality(silver: &[LabelRecord], gold: &[LabelRecord]) -> Result<QualityAudit> {
    if silver.is_empty() {
        return Err(Error::InvalidInput("no silver labels to audit".into()));
    }
    let mut gold_by_id: HashMap<&str, CoarseLabel> = HashMap::with_capacity(gold.len());
    for g in gold {
        if gold_by_id.insert(g.span_id.as_str(), g.label).is_some() {
            return Err(Error::InvalidInput(format!("duplicate gold span id {:?}", g.span_id)));
        }
    }
    if gold_by_id.len() != silver.len() {
        return Err(Error::InvalidInput(format!(
            "span id sets differ: {} silver vs {} gold",
            silver.len(),
            gold_by_id.len()
        )));
    }
    let mut correct = 0;
    let mut missing = 0;
    for s in silver {
        let gold_label = gold_by_id.remove(s.span_id.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!("span id {:?} has no gold label", s.span_id))
        })?;
        correct += usize::from(gold_label == s.label);
        missing += usize::from(s.missing);
    }
    let total = silver.len();
    Ok(QualityAudit {
        total,
        correct,
        accuracy: correct as f64 / total as f64,
        missing,
        missing_rate: missing as f64 / total as f64,
    })
}

pub fn read_label_records<R: Read>(source: R) -> Result<Vec<LabelRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_label_file(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_label_records(file)
}

pub fn write_label_records<W: Write>(records: &[LabelRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use crate::taxonomy::{load_taxonomy, write_concepts, TaxonomyConcept};

    fn concept(code: &str, kind: ConceptKind, da: &str) -> TaxonomyConcept {
        TaxonomyConcept {
            code: code.into(),
            uri: format!("urn:{code}"),
            kind,
            preferred_label: BTreeMap::from([("da".into(), da.into())]),
            alt_labels: BTreeMap::new(),
            description: None,
            parent_code: None,
        }
    }

    fn index() -> TaxonomyIndex {
        let mut buf = Vec::new();
        write_concepts(
            &[
                concept("L1", ConceptKind::Language, "dansk"),
                concept("0613", ConceptKind::Knowledge, "datamodellering"),
                concept("S5.6", ConceptKind::Skill, "arbejde med retningslinjer for datamodeller"),
                concept("A1.1", ConceptKind::Attitude, "arbejde selvstændigt"),
            ],
            &mut buf,
        )
        .unwrap();
        load_taxonomy(&buf[..], "da").unwrap()
    }

    fn record(id: &str, label: CoarseLabel, missing: bool) -> LabelRecord {
        LabelRecord {
            span_id: id.into(),
            surface: id.into(),
            kind: SpanKind::Skill,
            label,
            provenance: Provenance::Silver,
            missing,
            match_summary: None,
        }
    }

    #[test]
    fn language_concept_matches_knowledge_span() {
        let corpus = parse_corpus(
            r#"{"id":"p1","lang":"da","sentences":[{"tokens":["Du","skal","kunne","tale","dansk"]}],"spans":[{"sid":0,"start":4,"end":5,"kind":"KNOWLEDGE"}]}"#.as_bytes(),
        )
        .unwrap();
        let out = distant_label(&corpus.spans, &index(), &SuperviseOptions::default());
        assert_eq!(out[0].label, CoarseLabel::L1);
        assert_eq!(out[0].match_result.as_ref().unwrap().distance, 0);
        assert!(!out[0].missing);
    }

    #[test]
    fn nested_spans_are_labeled_independently() {
        let corpus = parse_corpus(
            r#"{"id":"p1","lang":"da","sentences":[{"tokens":["arbejde","med","retningslinjer","for","datamodellering"]}],"spans":[{"sid":0,"start":0,"end":5,"kind":"SKILL"},{"sid":0,"start":4,"end":5,"kind":"KNOWLEDGE"}]}"#.as_bytes(),
        )
        .unwrap();
        let out = distant_label(&corpus.spans, &index(), &SuperviseOptions::default());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].label, CoarseLabel::S5);
        assert_eq!(out[0].span.span_id, "p1-0");
        assert_eq!(out[1].label, CoarseLabel::K06);
        assert_eq!(out[1].match_result.as_ref().unwrap().distance, 0);
    }

    #[test]
    fn no_candidates_falls_back_to_k99() {
        let corpus = parse_corpus(
            r#"{"id":"p1","lang":"da","sentences":[{"tokens":["qqq"]}],"spans":[{"sid":0,"start":0,"end":1,"kind":"SKILL"}]}"#.as_bytes(),
        )
        .unwrap();
        let out = distant_label(&corpus.spans, &index(), &SuperviseOptions::default());
        assert_eq!(out[0].label, CoarseLabel::K99);
        assert!(out[0].missing);
        assert!(out[0].match_result.is_none());
        assert_eq!(out[0].diagnostics.candidates, 0);
        assert_eq!(out[0].to_record().match_summary, None);
    }

    #[test]
    fn artifact_input_labels_pass_through() {
        let corpus = parse_corpus(
            r#"{"id":"p1","lang":"da","sentences":[{"tokens":["dansk"]}],"spans":[{"sid":0,"start":0,"end":1,"kind":"SKILL","label":"S?"}]}"#.as_bytes(),
        )
        .unwrap();
        let out = distant_label(&corpus.spans, &index(), &SuperviseOptions::default());
        assert_eq!(out[0].label, CoarseLabel::SkillArtifact);
        assert_eq!(out[0].provenance, Provenance::Artifact);
    }

    #[test]
    fn distribution_counts() {
        assert!(label_distribution(std::iter::empty()).is_empty());
        let h = label_distribution([CoarseLabel::S1, CoarseLabel::S1, CoarseLabel::A1]);
        assert_eq!(h.into_iter().collect::<Vec<_>>(), vec![(CoarseLabel::A1, 1), (CoarseLabel::S1, 2)]);
    }

    #[test]
    fn audit_counts_correct_and_missing() {
        let gold: Vec<_> = (0..10).map(|i| record(&format!("s{i}"), CoarseLabel::S1, false)).collect();
        let silver: Vec<_> = (0..10)
            .map(|i| {
                let label = if i < 7 { CoarseLabel::S1 } else { CoarseLabel::K99 };
                record(&format!("s{i}"), label, i >= 8)
            })
            .collect();
        let audit = silver_quality(&silver, &gold).unwrap();
        assert_eq!(audit.correct, 7);
        assert!((audit.accuracy - 0.7).abs() < 1e-12);
        assert!((audit.missing_rate - 0.2).abs() < 1e-12);
    }

    #[test]
    fn audit_rejects_mismatched_ids() {
        let a = vec![record("a", CoarseLabel::S1, false)];
        let b = vec![record("b", CoarseLabel::S1, false)];
        assert!(silver_quality(&a, &b).is_err());
        let self_audit = silver_quality(&a, &a).unwrap();
        assert_eq!(self_audit.accuracy, 1.0);
    }

    #[test]
    fn label_record_wire_format() {
        let mut r = record("p1-0", CoarseLabel::K06, false);
        r.match_summary = Some(MatchSummary { code: "0613".into(), distance: 2 });
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(
            line,
            r#"{"span_id":"p1-0","surface":"p1-0","kind":"SKILL","label":"K06","provenance":"silver","missing":false,"match":{"code":"0613","distance":2}}"#
        );
        let back = read_label_records(line.as_bytes()).unwrap();
        assert_eq!(back, vec![r]);
    }
}
