//! Sonnet generation by hard-constrained backward beam search.
//!
//! The pipeline picks rhyme pairs that suit a topic, then builds every line
//! right to left from its rhyme word with a beam search over a backward
//! language model. Each partial line must scan as iambic pentameter and avoid
//! forbidden part-of-speech sequences. Commas are placed afterwards where the
//! model finds them most likely. [`lint`] re-checks any poem independently.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod embedding;
pub mod form;
pub mod grammar;
pub mod io;
pub mod langmodel;
pub mod linesearch;
pub mod lint;
pub mod phonodict;
pub mod poemgen;
pub mod punctuate;
pub mod rhymeplan;
pub mod rng;

pub use form::{Form, RhymeScheme};
pub use langmodel::{LanguageModel, NGramModel};
pub use phonodict::{PronouncingDict, Pronunciation, Relaxations, StressPattern};
