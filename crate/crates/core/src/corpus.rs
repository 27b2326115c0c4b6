//! Corpus tokenization and per-author model bundles.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::langmodel::{reversed_sequence, LanguageModel, LmError, NGramModel, Vocabulary, COMMA, PERIOD};
use crate::phonodict::PronouncingDict;

pub const DEFAULT_VOCABULARY_FLOOR: usize = 500;
pub const BUNDLE_MAGIC: &str = "sonneteer-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus produced no tokens")]
    Empty,
    #[error("generation vocabulary has {found} words, below the floor of {floor}")]
    VocabularyTooSmall { found: usize, floor: usize },
    #[error("author name must be a non-empty single line")]
    AuthorName,
    #[error("malformed bundle: {0}")]
    Format(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One sequence per line.
    Verse,
    /// One sequence per sentence.
    Prose,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verse" => Ok(Mode::Verse),
            "prose" => Ok(Mode::Prose),
            _ => Err(format!("unknown mode {s:?} (expected verse or prose)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Verse => "verse",
            Mode::Prose => "prose",
        })
    }
}

/// Words whose leading apostrophe is part of the word.
const ELISIONS: &[&str] = &[
    "'tis", "'twas", "'twere", "'twill", "'twould", "'gainst", "'em", "'neath", "'tween", "'twixt",
    "'til", "'cause", "'round",
];

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "jr", "sr", "gen", "col", "capt", "lieut", "hon", "rev", "gov",
    "messrs", "vs", "etc", "no", "viz",
];

#[derive(Clone, Debug)]
pub struct Tokenizer {
    pub mode: Mode,
    /// Lowercase words whose trailing period does not end a sentence.
    pub abbreviations: HashSet<String>,
}

impl Tokenizer {
    pub fn new(mode: Mode) -> Self {
        Tokenizer {
            mode,
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Replaces the abbreviation list with one word per line (`#` comments allowed).
    pub fn with_abbreviations<R: BufRead>(mut self, reader: R) -> io::Result<Self> {
        self.abbreviations.clear();
        for line in reader.lines() {
            let line = line?;
            let word = line.split('#').next().unwrap_or_default().trim();
            if !word.is_empty() {
                self.abbreviations
                    .insert(word.trim_end_matches('.').to_lowercase());
            }
        }
        Ok(self)
    }

    /// Lowercased token sequences. Commas and periods become tokens of their
    /// own, other punctuation is dropped, and hyphens and dashes separate words.
    pub fn tokenize(&self, text: &str) -> Result<Vec<Vec<String>>, CorpusError> {
        let mut out = Vec::new();
        match self.mode {
            Mode::Verse => {
                for line in text.lines() {
                    let mut seq = Vec::new();
                    self.scan(line, &mut |tok, _| seq.push(tok));
                    if seq.iter().any(|t| t != COMMA && t != PERIOD) {
                        out.push(seq);
                    }
                }
            }
            Mode::Prose => {
                let mut seq = Vec::new();
                self.scan(text, &mut |tok, ends| {
                    seq.push(tok);
                    if ends {
                        flush(&mut seq, &mut out);
                    }
                });
                flush(&mut seq, &mut out);
            }
        }
        if out.is_empty() {
            return Err(CorpusError::Empty);
        }
        Ok(out)
    }

    /// Emits `(token, ends_sentence)` pairs; sentence ends carry an empty token
    /// when the terminator is not itself kept.
    fn scan(&self, text: &str, emit: &mut dyn FnMut(String, bool)) {
        let chars: Vec<char> = text
            .chars()
            .map(|c| match c {
                '\u{2019}' | '\u{2018}' | '`' => '\'',
                c => c,
            })
            .collect();
        let mut i = 0;
        let mut prev_word: Option<String> = None;
        while i < chars.len() {
            let c = chars[i];
            if c.is_alphanumeric() || (c == '\'' && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())) {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let next = chars.get(i + 1);
                    let joins = match chars[i] {
                        '\'' => next.is_some_and(|n| n.is_alphanumeric()),
                        '.' => chars[i - 1].is_ascii_digit() && next.is_some_and(|n| n.is_ascii_digit()),
                        d => d.is_alphanumeric(),
                    };
                    if joins {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let mut word: String = chars[start..i].iter().collect::<String>().to_lowercase();
                if word.starts_with('\'') && !ELISIONS.contains(&word.as_str()) {
                    word.remove(0);
                }
                if !word.is_empty() {
                    emit(word.clone(), false);
                    prev_word = Some(word);
                }
                continue;
            }
            match c {
                ',' => {
                    emit(COMMA.to_string(), false);
                    prev_word = None;
                }
                '.' => {
                    while chars.get(i + 1) == Some(&'.') {
                        i += 1;
                    }
                    let abbrev = prev_word
                        .as_ref()
                        .is_some_and(|w| self.abbreviations.contains(w.as_str()));
                    if !abbrev {
                        emit(PERIOD.to_string(), self.mode == Mode::Prose);
                    }
                    prev_word = None;
                }
                '!' | '?' if self.mode == Mode::Prose => {
                    emit(String::new(), true);
                    prev_word = None;
                }
                _ => {
                    if !c.is_whitespace() {
                        prev_word = None;
                    }
                }
            }
            i += 1;
        }
    }
}

fn flush(seq: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    seq.retain(|t| !t.is_empty());
    if seq.iter().any(|t| t != COMMA && t != PERIOD) {
        out.push(std::mem::take(seq));
    } else {
        seq.clear();
    }
}

pub fn tokenize(text: &str, mode: Mode) -> Result<Vec<Vec<String>>, CorpusError> {
    Tokenizer::new(mode).tokenize(text)
}

/// One author's language model and the words it may generate.
#[derive(Clone, Debug)]
pub struct AuthorBundle {
    pub author: String,
    pub model: NGramModel,
    /// Model words that also have a pronunciation and a vector, sorted.
    pub vocabulary: Vec<String>,
}

/// Model words (without markers and punctuation) present in `dict` and `table`.
pub fn generation_vocabulary(model: &dyn LanguageModel, dict: &PronouncingDict, table: &EmbeddingTable) -> Vec<String> {
    let vocab = model.vocabulary();
    vocab
        .tokens()
        .iter()
        .skip(Vocabulary::RESERVED.len())
        .filter(|w| dict.contains(w) && table.contains(w))
        .cloned()
        .collect()
}

impl AuthorBundle {
    pub fn from_model(
        author: &str,
        model: NGramModel,
        dict: &PronouncingDict,
        table: &EmbeddingTable,
        floor: usize,
    ) -> Result<Self, CorpusError> {
        check_author(author)?;
        let vocabulary = generation_vocabulary(&model, dict, table);
        if vocabulary.len() < floor.max(1) {
            return Err(CorpusError::VocabularyTooSmall {
                found: vocabulary.len(),
                floor,
            });
        }
        Ok(AuthorBundle {
            author: author.to_string(),
            model,
            vocabulary,
        })
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        writeln!(out, "{BUNDLE_MAGIC} {BUNDLE_VERSION}")?;
        writeln!(out, "author {}", self.author)?;
        self.model.save(out)?;
        Ok(())
    }
}

fn check_author(author: &str) -> Result<(), CorpusError> {
    if author.trim().is_empty() || author.contains('\n') || author.trim() != author {
        return Err(CorpusError::AuthorName);
    }
    Ok(())
}

/// Reads a bundle file's author and model. The generation vocabulary depends
/// on the dictionary and vectors in use, so it is rebuilt with
/// [`AuthorBundle::from_model`].
pub fn load_bundle<R: BufRead>(mut reader: R) -> Result<(String, NGramModel), CorpusError> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    match line.trim_end().split_once(' ') {
        Some((BUNDLE_MAGIC, v)) if v == BUNDLE_VERSION.to_string() => {}
        _ => return Err(CorpusError::Format(format!("expected `{BUNDLE_MAGIC} {BUNDLE_VERSION}` header"))),
    }
    line.clear();
    reader.read_line(&mut line)?;
    let author = line
        .trim_end_matches(['\n', '\r'])
        .strip_prefix("author ")
        .ok_or_else(|| CorpusError::Format("expected `author NAME`".into()))?
        .to_string();
    check_author(&author)?;
    let model = NGramModel::load(reader)?;
    Ok((author, model))
}

/// Trains the backward model on `sequences` and intersects its vocabulary
/// with the dictionary and the vectors.
pub fn build_bundle(
    author: &str,
    sequences: &[Vec<String>],
    dict: &PronouncingDict,
    table: &EmbeddingTable,
    order: usize,
    discount: f64,
    floor: usize,
) -> Result<AuthorBundle, CorpusError> {
    if sequences.is_empty() {
        return Err(CorpusError::Empty);
    }
    let reversed: Vec<Vec<String>> = sequences.iter().map(|s| reversed_sequence(s)).collect();
    let model = NGramModel::train(&reversed, order, discount)?;
    AuthorBundle::from_model(author, model, dict, table, floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langmodel::LanguageModel;
    use crate::phonodict::parse_cmu_dict;

    fn toks(seqs: &[Vec<String>]) -> Vec<String> {
        seqs.iter().map(|s| s.join(" ")).collect()
    }

    #[test]
    fn prose_sentence() {
        assert_eq!(toks(&tokenize("The sun, and light.", Mode::Prose).unwrap()), vec!["the sun , and light ."]);
    }

    #[test]
    fn prose_splitting_and_abbreviations() {
        let t = tokenize("Mr. Smith came. Did he? Yes! It cost 3.5 dollars...", Mode::Prose).unwrap();
        assert_eq!(
            toks(&t),
            vec!["mr smith came .", "did he", "yes", "it cost 3.5 dollars ."]
        );
    }

    #[test]
    fn verse_keeps_trailing_comma() {
        let t = tokenize("With a minute and, crashing through the plain,\nI see.\n\n", Mode::Verse).unwrap();
        assert_eq!(toks(&t), vec!["with a minute and , crashing through the plain ,", "i see ."]);
    }

    #[test]
    fn dashes_quotes_and_apostrophes() {
        let t = tokenize("\u{201c}Night\u{2019}s\u{201d} — dark—deep; 'Tis the lovers' well-worn 'song'", Mode::Verse)
            .unwrap();
        assert_eq!(toks(&t), vec!["night's dark deep 'tis the lovers well worn song"]);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(tokenize("  \n ,.;\n", Mode::Verse), Err(CorpusError::Empty)));
        assert!(matches!(tokenize("", Mode::Prose), Err(CorpusError::Empty)));
    }

    #[test]
    fn custom_abbreviations() {
        let t = Tokenizer::new(Mode::Prose)
            .with_abbreviations("# titles\nprof.\n".as_bytes())
            .unwrap();
        assert_eq!(toks(&t.tokenize("Prof. X spoke. Mr. Y.").unwrap()), vec!["prof x spoke .", "mr .", "y ."]);
    }

    fn resources() -> (PronouncingDict, EmbeddingTable) {
        let dict = parse_cmu_dict("the DH AH0\nsun S AH1 N\nlight L AY1 T\nand AH0 N D\n".as_bytes()).unwrap();
        let table = EmbeddingTable::from_vectors(
            ["the", "sun", "light", "and", "zorbly"].map(|w| (w, vec![1.0, 0.5])),
        )
        .unwrap();
        (dict, table)
    }

    #[test]
    fn bundle_vocabulary_is_the_intersection() {
        let (dict, table) = resources();
        let seqs = tokenize("the sun , and zorbly light .\nthe light", Mode::Verse).unwrap();
        let b = build_bundle("fixture", &seqs, &dict, &table, 3, 0.75, 1).unwrap();
        assert!(b.model.vocabulary().contains("zorbly"));
        assert_eq!(b.vocabulary, vec!["and", "light", "sun", "the"]);
        assert!(matches!(
            build_bundle("fixture", &seqs, &dict, &table, 3, 0.75, 500),
            Err(CorpusError::VocabularyTooSmall { found: 4, floor: 500 })
        ));
        assert!(matches!(
            build_bundle(" ", &seqs, &dict, &table, 3, 0.75, 1),
            Err(CorpusError::AuthorName)
        ));
    }

    #[test]
    fn stored_sequences_read_backward_to_the_surface() {
        let seqs = tokenize("the sun , and light .", Mode::Verse).unwrap();
        let rev = reversed_sequence(&seqs[0]);
        let back: Vec<String> = rev[1..rev.len() - 1].iter().rev().cloned().collect();
        assert_eq!(back, seqs[0]);
    }

    #[test]
    fn bundle_round_trip() {
        let (dict, table) = resources();
        let seqs = tokenize("the sun , and light .\nthe light and the sun", Mode::Verse).unwrap();
        let a = build_bundle("fixture", &seqs, &dict, &table, 3, 0.75, 1).unwrap();
        let b = build_bundle("fixture", &seqs, &dict, &table, 3, 0.75, 1).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.save(&mut ba).unwrap();
        b.save(&mut bb).unwrap();
        assert_eq!(ba, bb);
        let (author, model) = load_bundle(&ba[..]).unwrap();
        assert_eq!(author, "fixture");
        let back = AuthorBundle::from_model(&author, model, &dict, &table, 1).unwrap();
        assert_eq!(back.vocabulary, a.vocabulary);
        let n = a.model.vocabulary().len() as u32;
        for c in 0..n {
            for w in 0..n {
                assert_eq!(
                    a.model.log_prob_id(w, &[c]).to_bits(),
                    back.model.log_prob_id(w, &[c]).to_bits()
                );
            }
        }
        assert!(matches!(load_bundle("nope\n".as_bytes()), Err(CorpusError::Format(_))));
    }
}
