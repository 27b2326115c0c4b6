//! Pretrained word vectors in the plain-text `word v1 v2 ... vd` format.

use std::collections::HashMap;
use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("vector file is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("no prompt token has a vector: {}", .0.join(", "))]
    AllOutOfVocabulary(Vec<String>),
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("vectors of different dimension ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
    duplicates: Vec<String>,
}

impl EmbeddingTable {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }

    /// Words that appeared more than once in the source file (last occurrence kept).
    pub fn duplicates(&self) -> &[String] {
        &self.duplicates
    }

    /// Builds a table from in-memory vectors; all must share one dimension.
    pub fn from_vectors<I, S>(vectors: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable::default();
        for (i, (word, v)) in vectors.into_iter().enumerate() {
            table.push(i + 1, word.into(), v)?;
        }
        if table.vectors.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        Ok(table)
    }

    fn push(&mut self, line: usize, word: String, v: Vec<f64>) -> Result<(), EmbeddingError> {
        if self.dimension == 0 {
            self.dimension = v.len();
        } else if v.len() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch {
                line,
                expected: self.dimension,
                found: v.len(),
            });
        }
        let word = word.to_lowercase();
        if self.vectors.insert(word.clone(), v).is_some() {
            log::warn!("line {line}: duplicate vector for {word:?}, keeping the last one");
            self.duplicates.push(word);
        }
        Ok(())
    }
}

pub fn load_vectors<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut table = EmbeddingTable::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| EmbeddingError::Parse {
                    line: lineno,
                    message: format!("bad component {f:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(EmbeddingError::Parse {
                line: lineno,
                message: format!("no components for {word:?}"),
            });
        }
        table.push(lineno, word.to_string(), values)?;
    }
    if table.vectors.is_empty() {
        return Err(EmbeddingError::Empty);
    }
    Ok(table)
}

/// Mean of the prompt's in-vocabulary word vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicVector {
    pub values: Vec<f64>,
    pub source_tokens: Vec<String>,
    /// Prompt tokens without a vector.
    pub dropped: Vec<String>,
}

pub fn topic_vector<S: AsRef<str>>(
    prompt: &[S],
    table: &EmbeddingTable,
) -> Result<TopicVector, EmbeddingError> {
    if prompt.is_empty() {
        return Err(EmbeddingError::EmptyPrompt);
    }
    let mut sum = vec![0.0; table.dimension()];
    let mut source_tokens = Vec::new();
    let mut dropped = Vec::new();
    for token in prompt {
        let token = token.as_ref().to_lowercase();
        match table.get(&token) {
            Some(v) => {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                source_tokens.push(token);
            }
            None => {
                log::warn!("prompt token {token:?} has no vector; ignoring it");
                dropped.push(token);
            }
        }
    }
    if source_tokens.is_empty() {
        return Err(EmbeddingError::AllOutOfVocabulary(dropped));
    }
    let n = source_tokens.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(TopicVector {
        values: sum,
        source_tokens,
        dropped,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::Dimension(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_single_line() {
        let t = load_vectors("love 0.1 0.2\n".as_bytes()).unwrap();
        assert_eq!(t.dimension(), 2);
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("love").unwrap(), &[0.1, 0.2]);
    }

    #[test]
    fn rejects_mismatched_dimension() {
        match load_vectors("a 1 2\nb 1 2 3\n".as_bytes()) {
            Err(EmbeddingError::DimensionMismatch {
                line: 2,
                expected: 2,
                found: 3,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_vectors("".as_bytes()), Err(EmbeddingError::Empty)));
        assert!(matches!(
            load_vectors("a 1 x\n".as_bytes()),
            Err(EmbeddingError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_keeps_last() {
        let t = load_vectors("a 1 0\nA 0 1\n".as_bytes()).unwrap();
        assert_eq!(t.get("a").unwrap(), &[0.0, 1.0]);
        assert_eq!(t.duplicates(), &["a".to_string()]);
    }

    #[test]
    fn topic_is_mean_of_known_tokens() {
        let t = load_vectors("a 1 0\nb 0 1\nlove 0.25 -3.5\n".as_bytes()).unwrap();
        assert_eq!(topic_vector(&["love"], &t).unwrap().values, vec![0.25, -3.5]);
        assert_eq!(topic_vector(&["a", "b"], &t).unwrap().values, vec![0.5, 0.5]);
        let tv = topic_vector(&["love", "zzxqy"], &t).unwrap();
        assert_eq!(tv.values, vec![0.25, -3.5]);
        assert_eq!(tv.dropped, vec!["zzxqy"]);
        match topic_vector(&["zzxqy", "qq"], &t) {
            Err(EmbeddingError::AllOutOfVocabulary(tokens)) => assert_eq!(tokens, vec!["zzxqy", "qq"]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(topic_vector::<&str>(&[], &t).is_err());
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[0.3, 0.4], &[0.3, 0.4]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbeddingError::ZeroVector)));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, dim)
            .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in nonzero_vec(5),
            b in nonzero_vec(5),
            lambda in 0.01f64..100.0,
        ) {
            let c = cosine(&a, &b).unwrap();
            prop_assert!((c - cosine(&b, &a).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = a.iter().map(|x| x * lambda).collect();
            prop_assert!((cosine(&scaled, &b).unwrap() - c).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
