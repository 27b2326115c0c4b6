//! Versioned text container for [`NGramModel`].
//!
//! ```text
//! sonneteer-ngram 1
//! order 3
//! discount 0.75
//! vocab 6
//! <s>
//! </s>
//! ...
//! ngrams 9
//! 1 1 5 2
//! ...
//! end
//! ```
//!
//! The vocabulary block lists one token per line in id order. Each n-gram
//! line holds `order` token ids followed by the raw count. Lines are written
//! in ascending id order, so saving a loaded model reproduces the file byte
//! for byte.

use std::io::{BufRead, Write};

use super::kneser_ney::NGramModel;
use super::{LanguageModel, LmError, TokenId, Vocabulary};

pub const MAGIC: &str = "sonneteer-ngram";
pub const FORMAT_VERSION: u32 = 1;

impl NGramModel {
    pub fn save<W: Write>(&self, mut out: W) -> Result<(), LmError> {
        writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
        writeln!(out, "order {}", self.order())?;
        writeln!(out, "discount {}", self.discount())?;
        let vocab = self.vocabulary();
        writeln!(out, "vocab {}", vocab.len())?;
        for t in vocab.tokens() {
            writeln!(out, "{t}")?;
        }
        let ngrams = self.raw_ngrams();
        writeln!(out, "ngrams {}", ngrams.len())?;
        let mut line = String::new();
        for (ids, count) in &ngrams {
            line.clear();
            for id in ids {
                line.push_str(&id.to_string());
                line.push(' ');
            }
            line.push_str(&count.to_string());
            writeln!(out, "{line}")?;
        }
        writeln!(out, "end")?;
        out.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, LmError> {
        let mut lines = Lines {
            inner: reader.lines(),
            line: 0,
        };
        let header = lines.next()?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v == FORMAT_VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(LmError::Version(v.to_string())),
            _ => return Err(lines.format(format!("expected `{MAGIC} <version>` header"))),
        }
        let order: usize = lines.field("order")?;
        let discount: f64 = lines.field("discount")?;
        let vocab_len: usize = lines.field("vocab")?;
        if vocab_len < Vocabulary::RESERVED.len() {
            return Err(lines.format("vocabulary block is empty".into()));
        }
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let t = lines.next()?;
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(lines.format(format!("invalid token {t:?}")));
            }
            tokens.push(t);
        }
        if tokens[..Vocabulary::RESERVED.len()] != Vocabulary::RESERVED {
            return Err(lines.format("reserved tokens missing from vocabulary".into()));
        }
        let vocab = Vocabulary::new(&tokens);
        if vocab.tokens() != tokens.as_slice() {
            return Err(lines.format("vocabulary is not sorted and unique".into()));
        }
        let n: usize = lines.field("ngrams")?;
        let mut raw: Vec<(Vec<TokenId>, u32)> = Vec::with_capacity(n);
        for _ in 0..n {
            let l = lines.next()?;
            let nums = l
                .split(' ')
                .map(str::parse::<u64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| lines.format(format!("bad n-gram line {l:?}")))?;
            if nums.len() != order + 1 {
                return Err(lines.format(format!("expected {} fields", order + 1)));
            }
            let ids: Vec<TokenId> = nums[..order].iter().map(|&x| x as TokenId).collect();
            if nums[..order].iter().any(|&x| x as usize >= vocab_len) {
                return Err(lines.format("token id out of range".into()));
            }
            let count = u32::try_from(nums[order])
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| lines.format("count must be a positive 32-bit integer".into()))?;
            raw.push((ids, count));
        }
        if lines.next()? != "end" {
            return Err(lines.format("missing end marker".into()));
        }
        NGramModel::from_parts(order, discount, vocab, raw)
    }
}

struct Lines<I> {
    inner: I,
    line: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> Lines<I> {
    fn next(&mut self) -> Result<String, LmError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(LmError::Truncated),
        }
    }

    fn format(&self, message: String) -> LmError {
        LmError::Format {
            line: self.line,
            message,
        }
    }

    fn field<T: std::str::FromStr>(&mut self, name: &str) -> Result<T, LmError> {
        let l = self.next()?;
        l.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(' '))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| self.format(format!("expected `{name} <value>`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langmodel::reversed_sequence;

    fn tiny() -> NGramModel {
        let seqs = vec![reversed_sequence(&["a", "b", "a", "c"])];
        NGramModel::train(&seqs, 2, 0.75).unwrap()
    }

    fn bytes(m: &NGramModel) -> Vec<u8> {
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_scores_identically() {
        let m = tiny();
        let buf = bytes(&m);
        let back = NGramModel::load(&buf[..]).unwrap();
        assert_eq!(bytes(&back), buf);
        let v = m.vocabulary().len() as TokenId;
        for ctx in 0..v {
            for w in 0..v {
                assert_eq!(
                    m.log_prob_id(w, &[ctx]).to_bits(),
                    back.log_prob_id(w, &[ctx]).to_bits()
                );
            }
        }
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = String::from_utf8(bytes(&tiny())).unwrap().replacen(" 1\n", " 9\n", 1);
        assert!(matches!(NGramModel::load(text.as_bytes()), Err(LmError::Version(v)) if v == "9"));
        assert!(matches!(
            NGramModel::load("something else\n".as_bytes()),
            Err(LmError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn truncation_is_detected() {
        let buf = bytes(&tiny());
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(matches!(NGramModel::load(cut.as_bytes()), Err(LmError::Truncated)));
        let no_end = text.replace("end\n", "");
        assert!(matches!(NGramModel::load(no_end.as_bytes()), Err(LmError::Truncated)));
    }

    #[test]
    fn empty_vocabulary_block_is_rejected() {
        let text = "sonneteer-ngram 1\norder 2\ndiscount 0.5\nvocab 0\nngrams 0\nend\n";
        assert!(matches!(NGramModel::load(text.as_bytes()), Err(LmError::Format { line: 4, .. })));
    }
}
