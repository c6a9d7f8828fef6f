//! Classification scores against gold coarse labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::SpanRecord;
use crate::error::{Error, Result};
use crate::supervise::{distant_label, SuperviseOptions};
use crate::taxonomy::{CoarseLabel, TaxonomyIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_class: BTreeMap<CoarseLabel, ClassScores>,
    pub weighted_macro_f1: f64,
    pub accuracy: f64,
    pub n: usize,
}

fn check_pair(gold: &[CoarseLabel], pred: &[CoarseLabel]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "gold has {} labels but predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidInput("no labels to evaluate".into()));
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 over the union of gold and predicted labels,
/// with F1 averaged by gold support.
pub fn weighted_macro_f1(gold: &[CoarseLabel], pred: &[CoarseLabel]) -> Result<EvalReport> {
    check_pair(gold, pred)?;
    let mut tp: HashMap<CoarseLabel, usize> = HashMap::new();
    let mut gold_count: HashMap<CoarseLabel, usize> = HashMap::new();
    let mut pred_count: HashMap<CoarseLabel, usize> = HashMap::new();
    for (&g, &p) in gold.iter().zip(pred) {
        *gold_count.entry(g).or_default() += 1;
        *pred_count.entry(p).or_default() += 1;
        if g == p {
            *tp.entry(g).or_default() += 1;
        }
    }
    let n = gold.len();
    let classes: BTreeSet<CoarseLabel> = gold.iter().chain(pred).copied().collect();
    let mut per_class = BTreeMap::new();
    let mut weighted = 0.0;
    for c in classes {
        let hits = tp.get(&c).copied().unwrap_or(0);
        let support = gold_count.get(&c).copied().unwrap_or(0);
        let precision = ratio(hits, pred_count.get(&c).copied().unwrap_or(0));
        let recall = ratio(hits, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        weighted += support as f64 * f1;
        per_class.insert(
            c,
            ClassScores {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    let correct = tp.values().sum();
    Ok(EvalReport {
        per_class,
        weighted_macro_f1: weighted / n as f64,
        accuracy: ratio(correct, n),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    Row,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<CoarseLabel>,
    /// Rows are gold labels, columns predicted labels.
    pub counts: Vec<Vec<f64>>,
    pub normalization: Normalization,
}

/// Gold × predicted tally over the labels present in either list, in tag order.
/// Row normalization divides each non-empty row by its total.
pub fn confusion_matrix(
    gold: &[CoarseLabel],
    pred: &[CoarseLabel],
    normalization: Normalization,
) -> Result<ConfusionMatrix> {
    check_pair(gold, pred)?;
    let labels: Vec<CoarseLabel> = gold
        .iter()
        .chain(pred)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let position: HashMap<CoarseLabel, usize> =
        labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut counts = vec![vec![0.0; labels.len()]; labels.len()];
    for (g, p) in gold.iter().zip(pred) {
        counts[position[g]][position[p]] += 1.0;
    }
    if normalization == Normalization::Row {
        for row in &mut counts {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|x| *x /= total);
            }
        }
    }
    Ok(ConfusionMatrix {
        labels,
        counts,
        normalization,
    })
}

pub enum Baseline<'a> {
    /// Predict the most frequent training label (earliest tag on ties).
    Majority(&'a BTreeMap<CoarseLabel, usize>),
    /// Predict the distant-supervision label.
    Matcher(&'a TaxonomyIndex),
}

/// Most frequent label in a histogram; the earliest tag wins ties.
pub fn majority_label(hist: &BTreeMap<CoarseLabel, usize>) -> Result<CoarseLabel> {
    let mut best: Option<(CoarseLabel, usize)> = None;
    for (&label, &count) in hist {
        if count > 0 && best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.map(|(l, _)| l)
        .ok_or_else(|| Error::InvalidInput("empty training histogram".into()))
}

pub fn baseline_predict(spans: &[SpanRecord], baseline: Baseline<'_>) -> Result<Vec<CoarseLabel>> {
    match baseline {
        Baseline::Majority(hist) => Ok(vec![majority_label(hist)?; spans.len()]),
        Baseline::Matcher(index) => Ok(distant_label(spans, index, &SuperviseOptions::default())
            .into_iter()
            .map(|l| l.label)
            .collect()),
    }
}

/// One scored item: span id with gold and predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictionRow {
    pub span_id: String,
    pub gold: Option<CoarseLabel>,
    pub pred: CoarseLabel,
}

#[derive(Deserialize)]
struct PredictionJson {
    span_id: String,
    #[serde(default)]
    gold: Option<CoarseLabel>,
    #[serde(default)]
    pred: Option<CoarseLabel>,
    #[serde(default)]
    label: Option<CoarseLabel>,
}

/// Parse a predictions file: TSV with a header naming `span_id`, `pred` and
/// optionally `gold`, or JSON lines with `span_id`, `pred` (or `label`) and
/// optionally `gold`. Label files written by `supervise` are accepted as-is.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRow>> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim_start().starts_with('{') {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: PredictionJson =
                serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            let pred = raw
                .pred
                .or(raw.label)
                .ok_or_else(|| Error::parse(i + 1, "missing \"pred\""))?;
            rows.push(PredictionRow {
                span_id: raw.span_id,
                gold: raw.gold,
                pred,
            });
        }
        return Ok(rows);
    }

    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let col = |name: &str| columns.iter().position(|c| *c == name);
    let id_col = col("span_id").ok_or_else(|| Error::parse(1, "header lacks span_id"))?;
    let pred_col = col("pred").ok_or_else(|| Error::parse(1, "header lacks pred"))?;
    let gold_col = col("gold");
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(
                i + 1,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let label = |s: &str| s.parse::<CoarseLabel>().map_err(|e| Error::parse(i + 1, e.to_string()));
        rows.push(PredictionRow {
            span_id: fields[id_col].to_string(),
            gold: gold_col.map(|c| label(fields[c])).transpose()?,
            pred: label(fields[pred_col])?,
        });
    }
    Ok(rows)
}

pub fn read_predictions_file(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}

/// Pair gold and predicted labels.
///
/// With `gold` given, rows are taken in gold order and joined on span id; every
/// gold span must have a prediction. Otherwise each row must carry its own gold.
pub fn align(
    rows: &[PredictionRow],
    gold: Option<&[(String, CoarseLabel)]>,
) -> Result<(Vec<CoarseLabel>, Vec<CoarseLabel>)> {
    match gold {
        Some(gold) => {
            let mut by_id: HashMap<&str, CoarseLabel> = HashMap::with_capacity(rows.len());
            for r in rows {
                if by_id.insert(r.span_id.as_str(), r.pred).is_some() {
                    return Err(Error::InvalidInput(format!("duplicate prediction for {:?}", r.span_id)));
                }
            }
            let mut g = Vec::with_capacity(gold.len());
            let mut p = Vec::with_capacity(gold.len());
            for (id, label) in gold {
                let pred = by_id.get(id.as_str()).ok_or_else(|| {
                    Error::InvalidInput(format!("no prediction for gold span {id:?}"))
                })?;
                g.push(*label);
                p.push(*pred);
            }
            Ok((g, p))
        }
        None => rows
            .iter()
            .map(|r| {
                r.gold
                    .map(|g| (g, r.pred))
                    .ok_or_else(|| Error::InvalidInput(format!("no gold label for {:?}", r.span_id)))
            })
            .collect::<Result<Vec<_>>>()
            .map(|pairs| pairs.into_iter().unzip()),
    }
}
