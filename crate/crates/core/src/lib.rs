//! Distant supervision of skill and knowledge spans in job postings.
//!
//! Coarse SKILL/KNOWLEDGE span annotations are matched against an ESCO-style
//! taxonomy (trigram candidate retrieval followed by a Levenshtein rerank) to
//! produce silver coarse labels such as `S1`, `K06` or `A1`. Around that the
//! crate provides corpus statistics, classification metrics, inter-annotator
//! agreement, Almost Stochastic Order significance tests and an HTTP review
//! backend for turning silver labels into gold.

pub mod agreement;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod matcher;
pub mod review;
pub mod significance;
pub mod supervise;
pub mod taxonomy;
pub mod text;

pub use error::{Error, Result};
