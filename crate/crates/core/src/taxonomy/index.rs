use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::text::{char_trigrams, normalize};

use super::{validate_concepts, CoarseLabel, TaxonomyConcept};

/// A normalized concept label with its interned trigram ids (sorted, unique).
#[derive(Debug, Clone)]
pub(crate) struct IndexedLabel {
    pub(crate) trigrams: Vec<u32>,
}

/// Immutable, validated taxonomy snapshot indexed for one language.
#[derive(Debug, Clone)]
pub struct TaxonomyIndex {
    language: String,
    concepts: Vec<TaxonomyConcept>,
    coarse: Vec<CoarseLabel>,
    by_code: HashMap<String, usize>,
    by_uri: HashMap<String, usize>,
    labels: Vec<Vec<IndexedLabel>>,
    trigram_ids: HashMap<String, u32>,
    postings: Vec<Vec<usize>>,
}

impl TaxonomyIndex {
    pub fn build(concepts: Vec<TaxonomyConcept>, language: &str) -> Result<Self> {
        let coarse = validate_concepts(&concepts)?;
        if !concepts
            .iter()
            .any(|c| c.preferred_label.contains_key(language))
        {
            return Err(Error::NoConceptsForLanguage(language.to_string()));
        }

        let mut trigram_ids: HashMap<String, u32> = HashMap::new();
        let mut postings: Vec<Vec<usize>> = Vec::new();
        let mut labels = Vec::with_capacity(concepts.len());
        for (ci, concept) in concepts.iter().enumerate() {
            let mut indexed = Vec::new();
            for label in concept.labels(language) {
                let mut ids: Vec<u32> = char_trigrams(&normalize(label))
                    .into_iter()
                    .map(|gram| {
                        let next = trigram_ids.len() as u32;
                        let id = *trigram_ids.entry(gram).or_insert(next);
                        if id == next {
                            postings.push(Vec::new());
                        }
                        id
                    })
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                for &id in &ids {
                    let list = &mut postings[id as usize];
                    if list.last() != Some(&ci) {
                        list.push(ci);
                    }
                }
                indexed.push(IndexedLabel { trigrams: ids });
            }
            labels.push(indexed);
        }

        let by_code = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.code.clone(), i))
            .collect();
        let by_uri = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.uri.clone(), i))
            .collect();

        Ok(TaxonomyIndex {
            language: language.to_string(),
            concepts,
            coarse,
            by_code,
            by_uri,
            labels,
            trigram_ids,
            postings,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[TaxonomyConcept] {
        &self.concepts
    }

    pub fn get(&self, code: &str) -> Option<&TaxonomyConcept> {
        self.by_code.get(code).map(|&i| &self.concepts[i])
    }

    pub fn get_by_uri(&self, uri: &str) -> Option<&TaxonomyConcept> {
        self.by_uri.get(uri).map(|&i| &self.concepts[i])
    }

    /// Coarse label of a concept in this snapshot, resolved through parents.
    pub fn coarse_label(&self, code: &str) -> Option<CoarseLabel> {
        self.by_code.get(code).map(|&i| self.coarse[i])
    }

    /// Codes of concepts whose labels (in the index language) contain `trigram`.
    pub fn concepts_with_trigram(&self, trigram: &str) -> Vec<&str> {
        self.trigram_ids
            .get(trigram)
            .map(|&id| {
                self.postings[id as usize]
                    .iter()
                    .map(|&i| self.concepts[i].code.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub(crate) fn trigram_id(&self, trigram: &str) -> Option<u32> {
        self.trigram_ids.get(trigram).copied()
    }

    pub(crate) fn posting(&self, id: u32) -> &[usize] {
        &self.postings[id as usize]
    }

    pub(crate) fn indexed_labels(&self, concept: usize) -> &[IndexedLabel] {
        &self.labels[concept]
    }

    pub(crate) fn concept_at(&self, i: usize) -> &TaxonomyConcept {
        &self.concepts[i]
    }
}
