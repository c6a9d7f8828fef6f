//! Span-annotated job postings: parsing, statistics and posting-level splits.
//!
//! Spans use token offsets with an exclusive end and may nest or overlap.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::CoarseLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SpanKind {
    Skill,
    Knowledge,
}

impl SpanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanKind::Skill => "SKILL",
            SpanKind::Knowledge => "KNOWLEDGE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobPosting {
    pub id: String,
    pub lang: String,
    pub sentences: Vec<Sentence>,
}

impl JobPosting {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub span_id: String,
    pub posting_id: String,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    pub kind: SpanKind,
    pub surface: String,
    pub label: Option<CoarseLabel>,
}

impl SpanRecord {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Parsed corpus: postings and their spans, both in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub postings: Vec<JobPosting>,
    pub spans: Vec<SpanRecord>,
}

impl Corpus {
    pub fn posting(&self, id: &str) -> Option<&JobPosting> {
        self.postings.iter().find(|p| p.id == id)
    }

    pub fn token_count(&self) -> usize {
        self.postings.iter().map(JobPosting::token_count).sum()
    }

    /// Concatenate corpora, rejecting posting ids that appear twice.
    pub fn merge(parts: Vec<Corpus>) -> Result<Corpus> {
        let mut merged = Corpus::default();
        let mut seen = HashSet::new();
        for part in parts {
            for p in &part.postings {
                if !seen.insert(p.id.clone()) {
                    return Err(Error::InvalidCorpus(format!("duplicate posting id {:?}", p.id)));
                }
            }
            merged.postings.extend(part.postings);
            merged.spans.extend(part.spans);
        }
        Ok(merged)
    }
}

#[derive(Serialize, Deserialize)]
struct PostingLine {
    id: String,
    lang: String,
    sentences: Vec<Sentence>,
    #[serde(default)]
    spans: Vec<SpanLine>,
}

#[derive(Serialize, Deserialize)]
struct SpanLine {
    sid: usize,
    start: usize,
    end: usize,
    kind: SpanKind,
    #[serde(default)]
    label: Option<String>,
}

pub fn parse_corpus<R: Read>(source: R) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: PostingLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if !ids.insert(raw.id.clone()) {
            return Err(Error::parse(line_no, format!("duplicate posting id {:?}", raw.id)));
        }
        for (si, sentence) in raw.sentences.iter().enumerate() {
            if sentence.tokens.is_empty() {
                return Err(Error::parse(line_no, format!("sentence {si} is empty")));
            }
            if sentence.tokens.iter().any(String::is_empty) {
                return Err(Error::parse(line_no, format!("sentence {si} has an empty token")));
            }
        }
        for (ordinal, span) in raw.spans.iter().enumerate() {
            let sentence = raw.sentences.get(span.sid).ok_or_else(|| {
                Error::parse(line_no, format!("span {ordinal}: no sentence {}", span.sid))
            })?;
            if span.start >= span.end {
                return Err(Error::parse(
                    line_no,
                    format!("span {ordinal}: empty span ({}, {})", span.start, span.end),
                ));
            }
            if span.end > sentence.tokens.len() {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "span {ordinal}: span out of sentence bounds ({}, {}) for {} tokens",
                        span.start,
                        span.end,
                        sentence.tokens.len()
                    ),
                ));
            }
            let label = match &span.label {
                None => None,
                Some(tag) => Some(tag.parse::<CoarseLabel>().map_err(|_| {
                    Error::parse(line_no, format!("span {ordinal}: unknown label tag {tag:?}"))
                })?),
            };
            corpus.spans.push(SpanRecord {
                span_id: format!("{}-{}", raw.id, ordinal),
                posting_id: raw.id.clone(),
                sentence_index: span.sid,
                start: span.start,
                end: span.end,
                kind: span.kind,
                surface: sentence.tokens[span.start..span.end].join(" "),
                label,
            });
        }
        corpus.postings.push(JobPosting {
            id: raw.id,
            lang: raw.lang,
            sentences: raw.sentences,
        });
    }
    Ok(corpus)
}

pub fn parse_corpus_file(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(file).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for posting in &corpus.postings {
        let spans = corpus
            .spans
            .iter()
            .filter(|s| s.posting_id == posting.id)
            .map(|s| SpanLine {
                sid: s.sentence_index,
                start: s.start,
                end: s.end,
                kind: s.kind,
                label: s.label.map(|l| l.tag().to_string()),
            })
            .collect();
        let line = PostingLine {
            id: posting.id.clone(),
            lang: posting.lang.clone(),
            sentences: posting.sentences.clone(),
            spans,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Import BIO-tagged JSON lines, one sentence per line:
/// `{"idx": <posting>, "tokens": [...], "tags_skill": [...], "tags_knowledge": [...]}`.
/// Consecutive lines sharing `idx` form one posting. A tag beginning with `B`
/// opens a span, `I` continues it (or opens one if none is open), anything
/// else closes it.
pub fn import_bio<R: Read>(source: R, lang: &str) -> Result<Corpus> {
    #[derive(Deserialize)]
    struct BioLine {
        idx: serde_json::Value,
        tokens: Vec<String>,
        #[serde(default)]
        tags_skill: Vec<String>,
        #[serde(default)]
        tags_knowledge: Vec<String>,
    }

    fn spans_of(tags: &[String]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut open: Option<usize> = None;
        for (i, tag) in tags.iter().enumerate() {
            match tag.chars().next() {
                Some('B') => {
                    if let Some(s) = open.take() {
                        out.push((s, i));
                    }
                    open = Some(i);
                }
                Some('I') => {
                    open.get_or_insert(i);
                }
                _ => {
                    if let Some(s) = open.take() {
                        out.push((s, i));
                    }
                }
            }
        }
        if let Some(s) = open {
            out.push((s, tags.len()));
        }
        out
    }

    let mut lines: Vec<PostingLine> = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bio: BioLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if bio.tokens.is_empty() {
            continue;
        }
        for (name, tags) in [("tags_skill", &bio.tags_skill), ("tags_knowledge", &bio.tags_knowledge)] {
            if !tags.is_empty() && tags.len() != bio.tokens.len() {
                return Err(Error::parse(line_no, format!("{name} length differs from tokens")));
            }
        }
        let id = match &bio.idx {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        if lines.last().map(|p| p.id != id).unwrap_or(true) {
            lines.push(PostingLine {
                id,
                lang: lang.to_string(),
                sentences: Vec::new(),
                spans: Vec::new(),
            });
        }
        let posting = lines.last_mut().expect("pushed above");
        let sid = posting.sentences.len();
        for (kind, tags) in [(SpanKind::Skill, &bio.tags_skill), (SpanKind::Knowledge, &bio.tags_knowledge)] {
            for (start, end) in spans_of(tags) {
                posting.spans.push(SpanLine {
                    sid,
                    start,
                    end,
                    kind,
                    label: None,
                });
            }
        }
        posting.sentences.push(Sentence { tokens: bio.tokens });
    }

    let mut buf = Vec::new();
    for line in &lines {
        serde_json::to_writer(&mut buf, line).map_err(|e| Error::InvalidInput(e.to_string()))?;
        buf.push(b'\n');
    }
    parse_corpus(&buf[..])
}

/// Length statistics for one span kind. `None` marks an undefined value (no spans).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<usize>,
    /// Upper bound of the 90th-percentile interval `[1, p90]`.
    pub p90: Option<usize>,
}

impl LengthStats {
    pub fn from_lengths(mut lengths: Vec<usize>) -> Self {
        let count = lengths.len();
        if count == 0 {
            return LengthStats {
                count,
                mean: None,
                median: None,
                p90: None,
            };
        }
        lengths.sort_unstable();
        let mean = lengths.iter().sum::<usize>() as f64 / count as f64;
        let median = lengths[(count - 1) / 2];
        // nearest rank: ceil(0.9 * n), 1-based
        let rank = (9 * count).div_ceil(10);
        LengthStats {
            count,
            mean: Some(mean),
            median: Some(median),
            p90: Some(lengths[rank - 1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub posts: usize,
    pub sentences: usize,
    pub tokens: usize,
    pub skill_spans: usize,
    pub knowledge_spans: usize,
    pub skill: LengthStats,
    pub knowledge: LengthStats,
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let lengths = |kind: SpanKind| {
        corpus
            .spans
            .iter()
            .filter(|s| s.kind == kind)
            .map(SpanRecord::len)
            .collect::<Vec<_>>()
    };
    let skill = LengthStats::from_lengths(lengths(SpanKind::Skill));
    let knowledge = LengthStats::from_lengths(lengths(SpanKind::Knowledge));
    StatsReport {
        posts: corpus.postings.len(),
        sentences: corpus.postings.iter().map(|p| p.sentences.len()).sum(),
        tokens: corpus.token_count(),
        skill_spans: skill.count,
        knowledge_spans: knowledge.count,
        skill,
        knowledge,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffle the sorted posting ids with a seeded ChaCha8 generator and cut the
/// result into train/dev/test prefixes. Each part is returned sorted.
pub fn split_corpus(corpus: &Corpus, sizes: (usize, usize, usize), seed: u64) -> Result<Split> {
    let (train, dev, test) = sizes;
    let n = corpus.postings.len();
    if train + dev + test != n {
        return Err(Error::InvalidInput(format!(
            "split sizes {train}+{dev}+{test} do not sum to {n} postings"
        )));
    }
    let mut ids: Vec<String> = corpus.postings.iter().map(|p| p.id.clone()).collect();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let part = |range: std::ops::Range<usize>| {
        let mut v = ids[range].to_vec();
        v.sort();
        v
    };
    Ok(Split {
        train: part(0..train),
        dev: part(train..train + dev),
        test: part(train + dev..n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DANSK: &str = r#"{"id":"p1","lang":"da","sentences":[{"tokens":["Du","skal","kunne","tale","dansk"]}],"spans":[{"sid":0,"start":4,"end":5,"kind":"KNOWLEDGE","label":null}]}"#;

    #[test]
    fn materializes_surface() {
        let c = parse_corpus(DANSK.as_bytes()).unwrap();
        assert_eq!(c.spans.len(), 1);
        assert_eq!(c.spans[0].surface, "dansk");
        assert_eq!(c.spans[0].kind, SpanKind::Knowledge);
        assert_eq!(c.spans[0].span_id, "p1-0");
    }

    #[test]
    fn rejects_empty_span() {
        let line = DANSK.replace(r#""start":4,"end":5"#, r#""start":3,"end":3"#);
        let err = parse_corpus(line.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("empty span"), "{err}");
    }

    #[test]
    fn rejects_out_of_bounds_unknown_kind_and_label() {
        let oob = DANSK.replace(r#""end":5"#, r#""end":6"#);
        assert!(parse_corpus(oob.as_bytes()).unwrap_err().to_string().contains("out of sentence bounds"));
        let kind = DANSK.replace("KNOWLEDGE", "ATTITUDE");
        assert!(matches!(parse_corpus(kind.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let label = DANSK.replace(r#""label":null"#, r#""label":"K6""#);
        assert!(parse_corpus(label.as_bytes()).unwrap_err().to_string().contains("unknown label tag"));
        let sid = DANSK.replace(r#""sid":0"#, r#""sid":1"#);
        assert!(parse_corpus(sid.as_bytes()).is_err());
    }

    #[test]
    fn accepts_nested_spans() {
        let line = r#"{"id":"p","lang":"da","sentences":[{"tokens":["a","b","c","d","e","f"]}],"spans":[{"sid":0,"start":1,"end":6,"kind":"SKILL"},{"sid":0,"start":5,"end":6,"kind":"KNOWLEDGE"}]}"#;
        let c = parse_corpus(line.as_bytes()).unwrap();
        assert_eq!(c.spans.len(), 2);
        assert_eq!(c.spans[0].surface, "b c d e f");
        assert_eq!(c.spans[1].surface, "f");
    }

    #[test]
    fn rejects_duplicate_ids_and_empty_sentences() {
        let twice = format!("{DANSK}\n{DANSK}\n");
        assert!(parse_corpus(twice.as_bytes()).is_err());
        let empty = r#"{"id":"p","lang":"da","sentences":[{"tokens":[]}],"spans":[]}"#;
        assert!(parse_corpus(empty.as_bytes()).is_err());
    }

    #[test]
    fn length_stats_even_count() {
        let s = LengthStats::from_lengths(vec![4, 2]);
        assert_eq!(s.mean, Some(3.0));
        assert_eq!(s.median, Some(2));
        assert_eq!(s.p90, Some(4));
    }

    #[test]
    fn zero_knowledge_spans_are_undefined() {
        let line = DANSK.replace("KNOWLEDGE", "SKILL");
        let stats = corpus_stats(&parse_corpus(line.as_bytes()).unwrap());
        assert_eq!(stats.knowledge_spans, 0);
        assert_eq!(stats.knowledge.mean, None);
        assert_eq!(stats.skill.mean, Some(1.0));
        let empty = corpus_stats(&Corpus::default());
        assert_eq!((empty.posts, empty.tokens, empty.skill.mean), (0, 0, None));
    }

    #[test]
    fn split_single_posting() {
        let c = parse_corpus(DANSK.as_bytes()).unwrap();
        let s = split_corpus(&c, (1, 0, 0), 7).unwrap();
        assert_eq!(s.train, vec!["p1".to_string()]);
        assert!(s.dev.is_empty() && s.test.is_empty());
        assert!(split_corpus(&c, (1, 1, 0), 7).is_err());
    }

    #[test]
    fn bio_import_builds_nested_spans() {
        let data = concat!(
            r#"{"idx": 3, "tokens": ["arbejde", "med", "SQL"], "tags_skill": ["B", "I", "I"], "tags_knowledge": ["O", "O", "B"]}"#,
            "\n",
            r#"{"idx": 3, "tokens": ["dansk"], "tags_skill": ["O"], "tags_knowledge": ["B"]}"#,
            "\n",
            r#"{"idx": 4, "tokens": ["x"], "tags_skill": ["I"], "tags_knowledge": ["O"]}"#,
            "\n",
        );
        let c = import_bio(data.as_bytes(), "da").unwrap();
        assert_eq!(c.postings.len(), 2);
        assert_eq!(c.postings[0].sentences.len(), 2);
        let surfaces: Vec<_> = c.spans.iter().map(|s| s.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["arbejde med SQL", "SQL", "dansk", "x"]);
    }
}
