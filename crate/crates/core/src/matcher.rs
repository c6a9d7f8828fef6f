//! Edit distance, offline candidate retrieval and best-match selection.

use std::collections::HashSet;

use serde::Serialize;

use crate::corpus::SpanKind;
use crate::taxonomy::{ConceptKind, TaxonomyConcept, TaxonomyIndex};
use crate::text::{char_trigrams, normalize};

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let substitution = prev[j] + usize::from(lc != sc);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// Concept kinds a span of `kind` may be matched against.
///
/// Language concepts pass both filters: ESCO files languages under `L1`
/// while annotators mark them as knowledge.
pub fn admits(kind: SpanKind, concept: ConceptKind) -> bool {
    match kind {
        SpanKind::Skill => matches!(
            concept,
            ConceptKind::Skill | ConceptKind::Attitude | ConceptKind::Language
        ),
        SpanKind::Knowledge => matches!(concept, ConceptKind::Knowledge | ConceptKind::Language),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub concept: &'a TaxonomyConcept,
    /// Best trigram Jaccard similarity over the concept's labels.
    pub score: f64,
}

/// Rank concepts by character-trigram Jaccard against `query`, after the kind
/// filter. Ties are broken by code. At most `k` candidates are returned.
pub fn retrieve_candidates<'a>(
    query: &str,
    kind: SpanKind,
    index: &'a TaxonomyIndex,
    k: usize,
) -> Vec<Candidate<'a>> {
    let grams = char_trigrams(&normalize(query));
    let query_len = grams.len();
    let mut known: Vec<u32> = grams.iter().filter_map(|g| index.trigram_id(g)).collect();
    known.sort_unstable();

    let touched: HashSet<usize> = known
        .iter()
        .flat_map(|&id| index.posting(id).iter().copied())
        .collect();

    let mut scored: Vec<Candidate<'a>> = touched
        .into_iter()
        .filter(|&ci| admits(kind, index.concept_at(ci).kind))
        .filter_map(|ci| {
            let best = index
                .indexed_labels(ci)
                .iter()
                .map(|label| {
                    let shared = count_shared(&known, &label.trigrams);
                    shared as f64 / (query_len + label.trigrams.len() - shared) as f64
                })
                .fold(0.0_f64, f64::max);
            (best > 0.0).then(|| Candidate {
                concept: index.concept_at(ci),
                score: best,
            })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.concept.code.cmp(&b.concept.code))
    });
    scored.truncate(k);
    scored
}

fn count_shared(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub concept: TaxonomyConcept,
    pub distance: usize,
    /// The label (as written in the taxonomy) that achieved `distance`.
    pub matched_label: String,
    pub perfect: bool,
}

/// Closest label of one concept: `(distance, label)`, preferred label first,
/// earliest label on ties. `None` when the concept has no label in `language`.
pub fn concept_distance<'a>(
    normalized_query: &str,
    concept: &'a TaxonomyConcept,
    language: &str,
) -> Option<(usize, &'a str)> {
    let mut best: Option<(usize, &str)> = None;
    for label in concept.labels(language) {
        let d = levenshtein(normalized_query, &normalize(label));
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, label));
            if d == 0 {
                break;
            }
        }
    }
    best
}

/// Best Levenshtein match among `candidates`, in the given order.
///
/// Candidates failing the kind filter are skipped. A distance of zero returns
/// immediately; otherwise the first candidate reaching a strictly smaller
/// distance than all before it is kept.
pub fn fetch_skill<'a, I>(
    query: &str,
    kind: SpanKind,
    candidates: I,
    language: &str,
) -> Option<MatchResult>
where
    I: IntoIterator<Item = &'a TaxonomyConcept>,
{
    let query = normalize(query);
    let mut best: Option<(usize, &TaxonomyConcept, &str)> = None;
    for concept in candidates {
        if !admits(kind, concept.kind) {
            continue;
        }
        let Some((distance, label)) = concept_distance(&query, concept, language) else {
            continue;
        };
        if distance == 0 {
            best = Some((0, concept, label));
            break;
        }
        if best.is_none_or(|(d, _, _)| distance < d) {
            best = Some((distance, concept, label));
        }
    }
    best.map(|(distance, concept, label)| MatchResult {
        concept: concept.clone(),
        distance,
        matched_label: label.to_string(),
        perfect: distance == 0,
    })
}
