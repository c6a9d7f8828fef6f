//! Inter-annotator agreement (Cohen's and Fleiss' kappa) at token and span level.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use serde::Serialize;

use crate::corpus::{Corpus, SpanKind};
use crate::error::{Error, Result};

/// One annotator's spans over a corpus shared with the other annotators.
#[derive(Debug, Clone)]
pub struct AnnotatorView {
    pub annotator_id: String,
    pub corpus: Corpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Token,
    Span,
}

/// Token category. `SkillKnowledge` marks a token covered by both kinds
/// (nested or overlapping spans).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TokenTag {
    O,
    S,
    K,
    SK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kappa {
    pub kappa: f64,
    /// Observed agreement (Cohen's P_o, Fleiss' mean P_i).
    pub observed: f64,
    /// Chance agreement.
    pub expected: f64,
    pub items: usize,
}

fn finish(observed: f64, expected: f64, items: usize) -> Result<Kappa> {
    let kappa = if expected == 1.0 {
        if observed == 1.0 {
            1.0
        } else {
            return Err(Error::UndefinedKappa { observed });
        }
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(Kappa {
        kappa,
        observed,
        expected,
        items,
    })
}

/// Cohen's kappa over two aligned label sequences.
pub fn cohen_kappa_labels<T: Ord>(a: &[T], b: &[T]) -> Result<Kappa> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "annotations cover {} and {} items",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("no items to compare".into()));
    }
    let n = a.len() as f64;
    let mut marginal_a: BTreeMap<&T, usize> = BTreeMap::new();
    let mut marginal_b: BTreeMap<&T, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        *marginal_a.entry(x).or_default() += 1;
        *marginal_b.entry(y).or_default() += 1;
        agree += usize::from(x == y);
    }
    let expected = marginal_a
        .iter()
        .map(|(label, &ca)| {
            let cb = marginal_b.get(label).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum::<f64>();
    finish(agree as f64 / n, expected, a.len())
}

/// Fleiss' kappa. `items[i]` holds every rater's label for item `i`; all items
/// must have the same number (≥ 2) of ratings.
pub fn fleiss_kappa_ratings<T: Ord>(items: &[Vec<T>]) -> Result<Kappa> {
    let raters = items
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidInput("no items to compare".into()))?;
    if raters < 2 {
        return Err(Error::InvalidInput("Fleiss' kappa needs at least 2 raters".into()));
    }
    let r = raters as f64;
    // ordered maps keep the floating-point sums reproducible
    let mut pooled: BTreeMap<&T, usize> = BTreeMap::new();
    let mut sum_agreement = 0.0;
    for (i, ratings) in items.iter().enumerate() {
        if ratings.len() != raters {
            return Err(Error::InvalidInput(format!(
                "item {i} has {} ratings, expected {raters}",
                ratings.len()
            )));
        }
        let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
        for label in ratings {
            *counts.entry(label).or_default() += 1;
            *pooled.entry(label).or_default() += 1;
        }
        let pairs: usize = counts.values().map(|&c| c * c).sum::<usize>() - raters;
        sum_agreement += pairs as f64 / (r * (r - 1.0));
    }
    let n = items.len() as f64;
    let total = n * r;
    let expected = pooled
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            p * p
        })
        .sum::<f64>();
    finish(sum_agreement / n, expected, items.len())
}

/// Posting ids in canonical (sorted) order after checking every view shares
/// the same postings and tokens.
fn shared_postings(views: &[&AnnotatorView]) -> Result<Vec<String>> {
    let reference = views
        .first()
        .ok_or_else(|| Error::InvalidInput("no annotator views".into()))?;
    let mut ids: Vec<String> = reference.corpus.postings.iter().map(|p| p.id.clone()).collect();
    ids.sort();
    for view in &views[1..] {
        let mut other: Vec<&str> = view.corpus.postings.iter().map(|p| p.id.as_str()).collect();
        other.sort();
        if other != ids.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::InvalidInput(format!(
                "annotators {:?} and {:?} cover different postings",
                reference.annotator_id, view.annotator_id
            )));
        }
        for p in &view.corpus.postings {
            let r = reference.corpus.posting(&p.id).expect("same id set");
            if r.sentences != p.sentences {
                return Err(Error::InvalidInput(format!(
                    "annotators {:?} and {:?} disagree on the tokens of posting {:?}",
                    reference.annotator_id, view.annotator_id, p.id
                )));
            }
        }
    }
    Ok(ids)
}

/// Token tags for every token of the shared corpus, postings in sorted id order.
pub fn token_tags(view: &AnnotatorView, posting_order: &[String]) -> Vec<TokenTag> {
    // bit 0: inside a SKILL span, bit 1: inside a KNOWLEDGE span
    let mut flags: HashMap<&str, Vec<Vec<u8>>> = view
        .corpus
        .postings
        .iter()
        .map(|p| {
            (
                p.id.as_str(),
                p.sentences.iter().map(|s| vec![0u8; s.tokens.len()]).collect(),
            )
        })
        .collect();
    for span in &view.corpus.spans {
        let bit = match span.kind {
            SpanKind::Skill => 1,
            SpanKind::Knowledge => 2,
        };
        if let Some(sentences) = flags.get_mut(span.posting_id.as_str()) {
            for f in &mut sentences[span.sentence_index][span.start..span.end] {
                *f |= bit;
            }
        }
    }
    posting_order
        .iter()
        .flat_map(|id| flags[id.as_str()].iter().flatten())
        .map(|f| match f {
            0 => TokenTag::O,
            1 => TokenTag::S,
            2 => TokenTag::K,
            _ => TokenTag::SK,
        })
        .collect()
}

type SpanKey = (String, usize, usize, usize);

fn span_keys(view: &AnnotatorView) -> BTreeSet<SpanKey> {
    view.corpus
        .spans
        .iter()
        .map(|s| (s.posting_id.clone(), s.sentence_index, s.start, s.end))
        .collect()
}

/// Per-item ratings for `views`: tokens tagged O/S/K/SK, or the union of
/// proposed span positions each marked or not (kind ignored).
fn ratings(views: &[&AnnotatorView], level: Level) -> Result<Vec<Vec<u8>>> {
    let order = shared_postings(views)?;
    match level {
        Level::Token => {
            let per_view: Vec<Vec<TokenTag>> = views.iter().map(|v| token_tags(v, &order)).collect();
            let n = per_view[0].len();
            Ok((0..n)
                .map(|i| per_view.iter().map(|tags| tags[i] as u8).collect())
                .collect())
        }
        Level::Span => {
            let keys: Vec<BTreeSet<SpanKey>> = views.iter().map(|v| span_keys(v)).collect();
            let union: BTreeSet<&SpanKey> = keys.iter().flatten().collect();
            Ok(union
                .into_iter()
                .map(|k| keys.iter().map(|set| u8::from(set.contains(k))).collect())
                .collect())
        }
    }
}

pub fn cohen_kappa(a: &AnnotatorView, b: &AnnotatorView, level: Level) -> Result<Kappa> {
    let items = ratings(&[a, b], level)?;
    let (xs, ys): (Vec<u8>, Vec<u8>) = items.iter().map(|r| (r[0], r[1])).unzip();
    cohen_kappa_labels(&xs, &ys)
}

pub fn fleiss_kappa(views: &[AnnotatorView], level: Level) -> Result<Kappa> {
    if views.len() < 2 {
        return Err(Error::InvalidInput("Fleiss' kappa needs at least 2 annotators".into()));
    }
    let refs: Vec<&AnnotatorView> = views.iter().collect();
    fleiss_kappa_ratings(&ratings(&refs, level)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairKappa {
    pub a: String,
    pub b: String,
    pub cohen: Kappa,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub level: Level,
    pub annotators: Vec<String>,
    pub pairwise: Vec<PairKappa>,
    pub fleiss: Kappa,
}

pub fn agreement_report(views: &[AnnotatorView], level: Level) -> Result<AgreementReport> {
    let fleiss = fleiss_kappa(views, level)?;
    let mut pairwise = Vec::new();
    for i in 0..views.len() {
        for j in i + 1..views.len() {
            pairwise.push(PairKappa {
                a: views[i].annotator_id.clone(),
                b: views[j].annotator_id.clone(),
                cohen: cohen_kappa(&views[i], &views[j], level)?,
            });
        }
    }
    Ok(AgreementReport {
        level,
        annotators: views.iter().map(|v| v.annotator_id.clone()).collect(),
        pairwise,
        fleiss,
    })
}
