//! Backward word-level language models.
//!
//! Models score a word given the words to its right in the surface line. A
//! surface line `w1 .. wn` is presented to the model as the reversed sequence
//! `</s> wn .. w1 <s>`: the line-end marker is the initial context and the
//! line-start marker is the final prediction.

mod container;
mod kneser_ney;

use std::collections::HashMap;
use std::io;

use thiserror::Error;

pub use kneser_ney::NGramModel;

pub type TokenId = u32;

pub const LINE_START: &str = "<s>";
pub const LINE_END: &str = "</s>";
pub const COMMA: &str = ",";
pub const PERIOD: &str = ".";

pub const LINE_START_ID: TokenId = 0;
pub const LINE_END_ID: TokenId = 1;
pub const COMMA_ID: TokenId = 2;
pub const PERIOD_ID: TokenId = 3;

/// Placeholder for context tokens the model has never seen.
pub const UNKNOWN_ID: TokenId = TokenId::MAX;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("order must be at least 2, got {0}")]
    Order(usize),
    #[error("discount must lie in [0, 1), got {0}")]
    Discount(f64),
    #[error("no training sequences")]
    NoData,
    #[error("training sequence {0} is not wrapped as `</s> ... <s>`")]
    Unwrapped(usize),
    #[error("vocabulary of {vocab} tokens is too large for an order-{order} model")]
    Capacity { vocab: usize, order: usize },
    #[error("token {0:?} is not in the model vocabulary")]
    OutOfVocabulary(String),
    #[error("unsupported model format version {0:?}")]
    Version(String),
    #[error("malformed model file at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("model file is truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Token inventory. Ids 0..4 are the boundary markers and punctuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub const RESERVED: [&'static str; 4] = [LINE_START, LINE_END, COMMA, PERIOD];

    /// Reserved tokens first, then `words` in sorted order without duplicates.
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut rest: Vec<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| !Self::RESERVED.contains(&w.as_str()))
            .collect();
        rest.sort();
        rest.dedup();
        let tokens: Vec<String> = Self::RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(rest)
            .collect();
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// True for the line markers, which are never emitted as poem words.
    pub fn is_boundary(id: TokenId) -> bool {
        id == LINE_START_ID || id == LINE_END_ID
    }

    pub fn is_punctuation(id: TokenId) -> bool {
        id == COMMA_ID || id == PERIOD_ID
    }
}

/// A trained, immutable backward language model.
///
/// Contexts are given oldest first in reversed-sequence order, so the last
/// element is the word immediately to the right of the one being scored.
/// For every context the probabilities over the vocabulary sum to one.
pub trait LanguageModel: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Number of trailing context tokens the model looks at.
    fn context_len(&self) -> usize;

    fn prob_id(&self, word: TokenId, context: &[TokenId]) -> f64;

    fn log_prob_id(&self, word: TokenId, context: &[TokenId]) -> f64 {
        self.prob_id(word, context).ln()
    }

    /// Scores many words against one context. Results must equal `log_prob_id` exactly.
    fn log_probs(&self, context: &[TokenId], words: &[TokenId], out: &mut Vec<f64>) {
        out.clear();
        out.extend(words.iter().map(|&w| self.log_prob_id(w, context)));
    }

    /// Whether training data ever predicted `word`. Reserved tokens are in
    /// every vocabulary whether or not the corpus used them.
    fn observed(&self, word: TokenId) -> bool {
        (word as usize) < self.vocabulary().len()
    }

    fn id_of(&self, token: &str) -> Result<TokenId, LmError> {
        self.vocabulary()
            .id(token)
            .ok_or_else(|| LmError::OutOfVocabulary(token.to_string()))
    }
}

/// Natural-log probability of `word` given context tokens (oldest first).
///
/// Unknown context tokens are allowed and simply never match a stored n-gram.
pub fn log_prob<M: LanguageModel + ?Sized, S: AsRef<str>>(
    model: &M,
    word: &str,
    context: &[S],
) -> Result<f64, LmError> {
    let w = model.id_of(word)?;
    let ctx: Vec<TokenId> = context
        .iter()
        .map(|t| model.vocabulary().id(t.as_ref()).unwrap_or(UNKNOWN_ID))
        .collect();
    Ok(model.log_prob_id(w, &ctx))
}

/// Log-likelihood of a surface-order line, scored right to left with boundary markers.
pub fn sequence_logprob<M: LanguageModel + ?Sized, S: AsRef<str>>(
    model: &M,
    tokens: &[S],
) -> Result<f64, LmError> {
    let ids = tokens
        .iter()
        .map(|t| model.id_of(t.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sequence_logprob_ids(model, &ids))
}

/// As [`sequence_logprob`] for already-interned surface tokens.
pub fn sequence_logprob_ids<M: LanguageModel + ?Sized>(model: &M, surface: &[TokenId]) -> f64 {
    let mut context = vec![LINE_END_ID];
    let mut total = 0.0;
    for &id in surface.iter().rev() {
        total += model.log_prob_id(id, &context);
        context.push(id);
    }
    total + model.log_prob_id(LINE_START_ID, &context)
}

/// Wraps a surface-order line as a reversed training sequence `</s> wn .. w1 <s>`.
pub fn reversed_sequence<S: AsRef<str>>(surface: &[S]) -> Vec<String> {
    std::iter::once(LINE_END.to_string())
        .chain(surface.iter().rev().map(|s| s.as_ref().to_string()))
        .chain(std::iter::once(LINE_START.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_reserves_markers() {
        let v = Vocabulary::new(["b", "a", ",", "a"]);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id(LINE_START), Some(LINE_START_ID));
        assert_eq!(v.id(LINE_END), Some(LINE_END_ID));
        assert_eq!(v.id(COMMA), Some(COMMA_ID));
        assert_eq!(v.id(PERIOD), Some(PERIOD_ID));
        assert_eq!(v.token(4), "a");
        assert_eq!(v.token(5), "b");
    }

    #[test]
    fn reversal_wraps_with_markers() {
        assert_eq!(reversed_sequence(&["a", "b"]), vec!["</s>", "b", "a", "<s>"]);
        assert_eq!(reversed_sequence::<&str>(&[]), vec!["</s>", "<s>"]);
    }
}
