//! Part-of-speech lexicon and forbidden tag sequences.
//!
//! Each word gets its single most frequent tag from the lexicon. A rule is a
//! run of two or three tags that may not appear contiguously in a line;
//! `LINE_START` and `LINE_END` pseudo-tags let rules pin positions, so
//! `DT LINE_END` forbids ending a line on a determiner.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

macro_rules! tags {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Penn Treebank word tags plus the two line-boundary pseudo-tags.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Tag {
            $($variant),*
        }

        impl Tag {
            pub const ALL: &'static [Tag] = &[$(Tag::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Tag::$variant => $name),*
                }
            }
        }

        impl FromStr for Tag {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Tag::$variant),)*
                    _ => Err(format!("unknown tag {s:?}")),
                }
            }
        }
    };
}

tags! {
    CC => "CC", CD => "CD", DT => "DT", EX => "EX", FW => "FW", IN => "IN",
    JJ => "JJ", JJR => "JJR", JJS => "JJS", LS => "LS", MD => "MD", NN => "NN",
    NNS => "NNS", NNP => "NNP", NNPS => "NNPS", PDT => "PDT", POS => "POS",
    PRP => "PRP", PRPS => "PRP$", RB => "RB", RBR => "RBR", RBS => "RBS",
    RP => "RP", SYM => "SYM", TO => "TO", UH => "UH", VB => "VB", VBD => "VBD",
    VBG => "VBG", VBN => "VBN", VBP => "VBP", VBZ => "VBZ", WDT => "WDT",
    WP => "WP", WPS => "WP$", WRB => "WRB",
    LineStart => "LINE_START", LineEnd => "LINE_END",
}

impl Tag {
    pub fn is_boundary(self) -> bool {
        matches!(self, Tag::LineStart | Tag::LineEnd)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct TagLexicon {
    entries: HashMap<String, Vec<(Tag, u32)>>,
    default_tag: Tag,
}

impl Default for TagLexicon {
    fn default() -> Self {
        TagLexicon {
            entries: HashMap::new(),
            default_tag: Tag::NN,
        }
    }
}

impl TagLexicon {
    pub fn with_default_tag(mut self, tag: Tag) -> Self {
        self.default_tag = tag;
        self
    }

    pub fn default_tag(&self) -> Tag {
        self.default_tag
    }

    pub fn tags(&self, word: &str) -> Option<&[(Tag, u32)]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds or replaces an entry; tags are kept sorted by descending count.
    pub fn insert(&mut self, word: &str, mut tags: Vec<(Tag, u32)>) {
        tags.sort_by_key(|t| std::cmp::Reverse(t.1));
        self.entries.insert(word.to_lowercase(), tags);
    }
}

pub fn load_tag_lexicon<R: BufRead>(reader: R) -> Result<TagLexicon, GrammarError> {
    let mut lex = TagLexicon::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let err = |message: String| GrammarError::Parse {
            line: lineno,
            message,
        };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, body) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `word<TAB>tag:count[,tag:count...]`".into()))?;
        let mut tags = Vec::new();
        for item in body.trim().split(',') {
            let (tag, count) = item
                .split_once(':')
                .ok_or_else(|| err(format!("expected tag:count, got {item:?}")))?;
            let tag: Tag = tag.trim().parse().map_err(err)?;
            if tag.is_boundary() {
                return Err(err(format!("{tag} is not a word tag")));
            }
            let count: i64 = count
                .trim()
                .parse()
                .map_err(|_| err(format!("bad count in {item:?}")))?;
            if count <= 0 || count > u32::MAX as i64 {
                return Err(err(format!("count must be positive, got {count}")));
            }
            tags.push((tag, count as u32));
        }
        lex.insert(word.trim(), tags);
    }
    Ok(lex)
}

/// Highest-count tag for `word`, or the lexicon's default tag.
pub fn primary_tag(lex: &TagLexicon, word: &str) -> Tag {
    let found = match lex.entries.get(word) {
        Some(tags) => tags.first(),
        None => lex
            .entries
            .get(&word.to_lowercase())
            .and_then(|t| t.first()),
    };
    found.map_or(lex.default_tag, |&(tag, _)| tag)
}

/// Primary tags of a surface line framed by `LINE_START` and `LINE_END`.
pub fn line_tags<S: AsRef<str>>(lex: &TagLexicon, words: &[S]) -> Vec<Tag> {
    std::iter::once(Tag::LineStart)
        .chain(words.iter().map(|w| primary_tag(lex, w.as_ref())))
        .chain(std::iter::once(Tag::LineEnd))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForbiddenRuleSet {
    rules: Vec<Vec<Tag>>,
}

impl ForbiddenRuleSet {
    pub fn new(rules: Vec<Vec<Tag>>) -> Result<Self, String> {
        for r in &rules {
            if !(2..=3).contains(&r.len()) {
                return Err(format!("rule of length {} (expected 2 or 3)", r.len()));
            }
        }
        let mut rules = rules;
        rules.sort();
        rules.dedup();
        Ok(ForbiddenRuleSet { rules })
    }

    pub fn rules(&self) -> &[Vec<Tag>] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Every `(start, rule)` where `rule` matches `tags[start..]` contiguously.
    pub fn matches<'a>(&'a self, tags: &'a [Tag]) -> impl Iterator<Item = (usize, &'a [Tag])> + 'a {
        (0..tags.len()).flat_map(move |start| {
            self.rules
                .iter()
                .filter(move |r| tags[start..].starts_with(r))
                .map(move |r| (start, r.as_slice()))
        })
    }
}

pub fn load_rules<R: BufRead>(reader: R) -> Result<ForbiddenRuleSet, GrammarError> {
    let mut rules = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or_default().trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| GrammarError::Parse {
            line: idx + 1,
            message,
        };
        let rule = body
            .split_whitespace()
            .map(str::parse::<Tag>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        if !(2..=3).contains(&rule.len()) {
            return Err(err(format!("rule has {} tags (expected 2 or 3)", rule.len())));
        }
        rules.push(rule);
    }
    Ok(ForbiddenRuleSet::new(rules).expect("lengths checked"))
}

/// Whether any rule matches a contiguous run of `window`.
///
/// The window holds the last few tags of a line in progress in surface
/// order. Lines grow leftwards, so the newest tag is `window[0]`.
pub fn violates(rules: &ForbiddenRuleSet, window: &[Tag]) -> bool {
    rules.matches(window).next().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(text: &str) -> ForbiddenRuleSet {
        load_rules(text.as_bytes()).unwrap()
    }

    #[test]
    fn lexicon_parsing_and_primary_tags() {
        let lex = load_tag_lexicon("he\tPRP:120\nrun\tNN:30,VB:50\n".as_bytes()).unwrap();
        assert_eq!(primary_tag(&lex, "he"), Tag::PRP);
        assert_eq!(primary_tag(&lex, "run"), Tag::VB);
        assert_eq!(primary_tag(&lex, "zzxqy"), Tag::NN);
        assert_eq!(primary_tag(&lex, "He"), Tag::PRP);
        assert_eq!(lex.tags("run").unwrap(), &[(Tag::VB, 50), (Tag::NN, 30)]);
        let lex = lex.with_default_tag(Tag::JJ);
        assert_eq!(primary_tag(&lex, "zzxqy"), Tag::JJ);
    }

    #[test]
    fn lexicon_errors() {
        for (text, line) in [
            ("he\tXYZ:3\n", 1),
            ("he\tPRP:3\nit\tPRP:0\n", 2),
            ("he\tPRP:-4\n", 1),
            ("he PRP:4\n", 1),
            ("he\tLINE_END:4\n", 1),
        ] {
            match load_tag_lexicon(text.as_bytes()) {
                Err(GrammarError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn rule_examples() {
        let r = rules("PRP PRP\nJJR VB\nNNS NN # adjacent nouns\n\nDT LINE_END\n");
        assert_eq!(r.len(), 4);
        assert!(violates(&r, &[Tag::PRP, Tag::PRP]));
        assert!(violates(&r, &[Tag::JJR, Tag::VB]));
        assert!(violates(&r, &[Tag::NNS, Tag::NN]));
        assert!(violates(&r, &[Tag::DT, Tag::LineEnd]));
        assert!(!violates(&r, &[Tag::NN, Tag::NNS]));
        assert!(!violates(&r, &[Tag::PRP]));
        assert!(!violates(&r, &[]));
        assert!(violates(&r, &[Tag::VB, Tag::PRP, Tag::PRP]));
    }

    #[test]
    fn trigram_rules() {
        let r = rules("DT JJ LINE_END\n");
        assert!(violates(&r, &[Tag::DT, Tag::JJ, Tag::LineEnd]));
        assert!(!violates(&r, &[Tag::DT, Tag::JJ, Tag::NN]));
    }

    #[test]
    fn rule_file_errors() {
        assert!(load_rules("PRP\n".as_bytes()).is_err());
        assert!(load_rules("PRP PRP PRP PRP\n".as_bytes()).is_err());
        assert!(matches!(
            load_rules("PRP PRP\nFOO BAR\n".as_bytes()),
            Err(GrammarError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn matches_reports_positions() {
        let r = rules("NN NN\n");
        let tags = [Tag::LineStart, Tag::NN, Tag::NN, Tag::NN, Tag::LineEnd];
        let found: Vec<usize> = r.matches(&tags).map(|(i, _)| i).collect();
        assert_eq!(found, vec![1, 2]);
    }

    #[test]
    fn tagset_size() {
        // 36 Penn word tags and two boundary markers
        assert_eq!(Tag::ALL.len(), 38);
        assert_eq!("PRP$".parse::<Tag>().unwrap(), Tag::PRPS);
    }
}
