//! ESCO-style taxonomy snapshots: loading, validation, coarse labels and the
//! live search client.

mod index;
mod label;
pub mod online;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use index::TaxonomyIndex;
pub use label::CoarseLabel;
pub use online::{EscoClient, EscoClientConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptKind {
    Skill,
    Knowledge,
    Attitude,
    Language,
}

impl ConceptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConceptKind::Skill => "skill",
            ConceptKind::Knowledge => "knowledge",
            ConceptKind::Attitude => "attitude",
            ConceptKind::Language => "language",
        }
    }
}

/// One line of a taxonomy snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyConcept {
    pub code: String,
    pub uri: String,
    pub kind: ConceptKind,
    pub preferred_label: BTreeMap<String, String>,
    #[serde(default)]
    pub alt_labels: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub parent_code: Option<String>,
}

impl TaxonomyConcept {
    /// Labels in `language`: preferred first, then alternates in file order.
    pub fn labels<'a>(&'a self, language: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.preferred_label
            .get(language)
            .map(String::as_str)
            .into_iter()
            .chain(
                self.alt_labels
                    .get(language)
                    .into_iter()
                    .flatten()
                    .map(String::as_str),
            )
    }
}

/// Map a taxonomy code to its coarse label.
///
/// `S<g>[.…]` → `S<g>`, `A1`/`A2` → attitude tags, `L1[.…]` → `L1`, and an
/// ISCED-F digit code → `K` + its first two digits (`"0612"` → `K06`). Codes
/// already at the coarse level (`K06`, `K06.1`) map to themselves.
pub fn coarse_label_of_code(code: &str) -> Result<CoarseLabel> {
    let unmappable = || Error::UnmappableCode(code.to_string());
    let code = code.trim();
    let top = code.split('.').next().unwrap_or_default();
    if top.len() >= 2 && top.bytes().all(|b| b.is_ascii_digit()) {
        let field: u8 = top[..2].parse().map_err(|_| unmappable())?;
        return CoarseLabel::knowledge_field(field).ok_or_else(unmappable);
    }
    let mut chars = top.chars();
    let letter = chars.next().ok_or_else(unmappable)?;
    let digits = chars.as_str();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(unmappable());
    }
    let number: u8 = digits.parse().map_err(|_| unmappable())?;
    let label = match letter {
        'S' => CoarseLabel::skill_group(number),
        'A' if number == 1 => Some(CoarseLabel::A1),
        'A' if number == 2 => Some(CoarseLabel::A2),
        'L' if number == 1 => Some(CoarseLabel::L1),
        'K' if digits.len() == 2 => CoarseLabel::knowledge_field(number),
        _ => None,
    };
    label.ok_or_else(unmappable)
}

/// Coarse label of a standalone concept: its own code, falling back to the
/// parent code when the concept's code is not itself a group code (e.g. a
/// UUID-coded leaf skill).
pub fn coarse_label(concept: &TaxonomyConcept) -> Result<CoarseLabel> {
    match coarse_label_of_code(&concept.code) {
        Ok(label) => Ok(label),
        Err(err) => match concept.parent_code.as_deref() {
            Some(parent) => coarse_label_of_code(parent).map_err(|_| err),
            None => Err(err),
        },
    }
}

/// Infer a concept kind from a group code, if the code is one.
pub fn kind_of_code(code: &str) -> Option<ConceptKind> {
    match coarse_label_of_code(code).ok()?.group() {
        "S" => Some(ConceptKind::Skill),
        "K" => Some(ConceptKind::Knowledge),
        "A" => Some(ConceptKind::Attitude),
        "L" => Some(ConceptKind::Language),
        _ => None,
    }
}

/// Parse a JSON-lines snapshot without validating cross-concept invariants.
pub fn read_concepts<R: Read>(source: R) -> Result<Vec<TaxonomyConcept>> {
    let mut concepts = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let concept: TaxonomyConcept =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if concept.code.trim().is_empty() {
            return Err(Error::parse(line_no, "empty concept code"));
        }
        concepts.push(concept);
    }
    Ok(concepts)
}

/// Check code uniqueness, parent closure and coarse-label totality.
/// Returns the resolved coarse label of every concept, in input order.
pub fn validate_concepts(concepts: &[TaxonomyConcept]) -> Result<Vec<CoarseLabel>> {
    let mut by_code: HashMap<&str, usize> = HashMap::with_capacity(concepts.len());
    for (i, c) in concepts.iter().enumerate() {
        if by_code.insert(c.code.as_str(), i).is_some() {
            return Err(Error::DuplicateCode(c.code.clone()));
        }
    }
    for c in concepts {
        if let Some(parent) = &c.parent_code {
            if !by_code.contains_key(parent.as_str()) {
                return Err(Error::DanglingParent {
                    code: c.code.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }
    concepts
        .iter()
        .map(|c| {
            let mut seen = HashSet::new();
            let mut current = c;
            loop {
                if let Ok(label) = coarse_label_of_code(&current.code) {
                    return Ok(label);
                }
                if !seen.insert(current.code.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "parent cycle through concept {:?}",
                        current.code
                    )));
                }
                match &current.parent_code {
                    Some(parent) => current = &concepts[by_code[parent.as_str()]],
                    None => return Err(Error::UnmappableCode(c.code.clone())),
                }
            }
        })
        .collect()
}

/// Load and index a snapshot for one language.
pub fn load_taxonomy<R: Read>(source: R, language: &str) -> Result<TaxonomyIndex> {
    TaxonomyIndex::build(read_concepts(source)?, language)
}

pub fn load_taxonomy_file(path: impl AsRef<Path>, language: &str) -> Result<TaxonomyIndex> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_taxonomy(file, language)
}

/// Write concepts back out in the snapshot format, one per line.
pub fn write_concepts<W: Write>(concepts: &[TaxonomyConcept], mut out: W) -> std::io::Result<()> {
    for c in concepts {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn concept(code: &str, kind: ConceptKind, da: &str, parent: Option<&str>) -> TaxonomyConcept {
        TaxonomyConcept {
            code: code.into(),
            uri: format!("http://data.europa.eu/esco/test/{code}"),
            kind,
            preferred_label: BTreeMap::from([("da".to_string(), da.to_string())]),
            alt_labels: BTreeMap::new(),
            description: None,
            parent_code: parent.map(str::to_string),
        }
    }

    fn snapshot(concepts: &[TaxonomyConcept]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_concepts(concepts, &mut buf).unwrap();
        buf
    }

    #[test]
    fn coarse_label_examples() {
        assert_eq!(coarse_label_of_code("S1.2.1").unwrap(), CoarseLabel::S1);
        assert_eq!(coarse_label_of_code("02").unwrap(), CoarseLabel::K02);
        assert_eq!(coarse_label_of_code("0612").unwrap(), CoarseLabel::K06);
        assert_eq!(coarse_label_of_code("A1.3").unwrap(), CoarseLabel::A1);
        assert_eq!(coarse_label_of_code("L1").unwrap(), CoarseLabel::L1);
        assert_eq!(coarse_label_of_code("10").unwrap(), CoarseLabel::K10);
        assert_eq!(coarse_label_of_code("K06.1").unwrap(), CoarseLabel::K06);
    }

    #[test]
    fn coarse_label_rejects_unknown_roots() {
        for code in ["S9", "S0.1", "A3", "L2", "T1", "0", "42", "K6", "", "S", "abc"] {
            assert!(coarse_label_of_code(code).is_err(), "{code:?} should not map");
        }
    }

    #[test]
    fn coarse_label_falls_back_to_parent() {
        let leaf = concept("6f1b0ad4", ConceptKind::Skill, "x", Some("S4.1"));
        assert_eq!(coarse_label(&leaf).unwrap(), CoarseLabel::S4);
        let orphan = concept("6f1b0ad4", ConceptKind::Skill, "x", None);
        assert!(matches!(coarse_label(&orphan), Err(Error::UnmappableCode(_))));
    }

    #[test]
    fn loads_three_danish_concepts() {
        let data = snapshot(&[
            concept("S1", ConceptKind::Skill, "kommunikation", None),
            concept("S1.2", ConceptKind::Skill, "samarbejde", Some("S1")),
            concept("0612", ConceptKind::Knowledge, "databaser", None),
        ]);
        let index = load_taxonomy(&data[..], "da").unwrap();
        assert_eq!(index.len(), 3);
        assert_eq!(index.language(), "da");
        assert!(!index.concepts_with_trigram(" ko").is_empty());
        assert!(!index.concepts_with_trigram("sam").is_empty());
        assert!(!index.concepts_with_trigram("dat").is_empty());
    }

    #[test]
    fn rejects_dangling_parent() {
        let data = snapshot(&[concept("S1.2", ConceptKind::Skill, "samarbejde", Some("S1"))]);
        let err = load_taxonomy(&data[..], "da").unwrap_err();
        assert!(matches!(err, Error::DanglingParent { .. }));
        assert!(err.to_string().contains("dangling parent"));
    }

    #[test]
    fn rejects_duplicate_code() {
        let data = snapshot(&[
            concept("S1.2.1", ConceptKind::Skill, "a", None),
            concept("S1.2.1", ConceptKind::Skill, "b", None),
        ]);
        let err = load_taxonomy(&data[..], "da").unwrap_err();
        assert!(err.to_string().contains("duplicate code"));
    }

    #[test]
    fn rejects_missing_language() {
        let data = snapshot(&[concept("S1", ConceptKind::Skill, "a", None)]);
        assert!(matches!(
            load_taxonomy(&data[..], "en"),
            Err(Error::NoConceptsForLanguage(_))
        ));
    }

    #[test]
    fn reports_malformed_line_number() {
        let mut data = snapshot(&[concept("S1", ConceptKind::Skill, "a", None)]);
        data.extend_from_slice(b"{not json}\n");
        match load_taxonomy(&data[..], "da") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unmappable_concept_and_parent_cycle() {
        let data = snapshot(&[concept("X1", ConceptKind::Skill, "a", None)]);
        assert!(matches!(
            load_taxonomy(&data[..], "da"),
            Err(Error::UnmappableCode(_))
        ));
        let data = snapshot(&[
            concept("u1", ConceptKind::Skill, "a", Some("u2")),
            concept("u2", ConceptKind::Skill, "b", Some("u1")),
        ]);
        assert!(load_taxonomy(&data[..], "da").is_err());
    }

    #[test]
    fn kind_of_code_follows_groups() {
        assert_eq!(kind_of_code("S5.1"), Some(ConceptKind::Skill));
        assert_eq!(kind_of_code("0613"), Some(ConceptKind::Knowledge));
        assert_eq!(kind_of_code("A2"), Some(ConceptKind::Attitude));
        assert_eq!(kind_of_code("L1"), Some(ConceptKind::Language));
        assert_eq!(kind_of_code("1c3f-uuid"), None);
    }
}
