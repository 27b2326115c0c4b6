//! CMU pronouncing dictionary: parsing, stress patterns and rhyme keys.
//!
//! Both the classic `WORD  PH1 PH2` layout and the lowercase single-space
//! layout of newer releases are accepted. Alternate pronunciations are written
//! `WORD(n)`. Every vowel carries a stress digit (0, 1 or 2); for metrical
//! purposes 2 is treated as stressed, so a word's stress pattern is a plain
//! binary string with one bit per syllable.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::io::latin1_lines;

#[derive(Debug, Error)]
pub enum PhonoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("pronunciation for {0:?} has no vowel")]
    NoVowel(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

macro_rules! arpabet {
    ($($sym:ident => $vowel:expr),* $(,)?) => {
        /// One of the 39 ARPABET phoneme symbols used by the CMU dictionary.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Arpabet {
            $($sym),*
        }

        impl Arpabet {
            pub const ALL: &'static [Arpabet] = &[$(Arpabet::$sym),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Arpabet::$sym => stringify!($sym)),*
                }
            }

            pub fn is_vowel(self) -> bool {
                match self {
                    $(Arpabet::$sym => $vowel),*
                }
            }
        }

        impl FromStr for Arpabet {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($sym) => Ok(Arpabet::$sym),)*
                    _ => Err(format!("unknown ARPABET symbol {s:?}")),
                }
            }
        }
    };
}

arpabet! {
    AA => true, AE => true, AH => true, AO => true, AW => true, AY => true,
    B => false, CH => false, D => false, DH => false, EH => true, ER => true,
    EY => true, F => false, G => false, HH => false, IH => true, IY => true,
    JH => false, K => false, L => false, M => false, N => false, NG => false,
    OW => true, OY => true, P => false, R => false, S => false, SH => false,
    T => false, TH => false, UH => true, UW => true, V => false, W => false,
    Y => false, Z => false, ZH => false,
}

impl fmt::Display for Arpabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lexical stress as written in the dictionary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stress {
    Unstressed,
    Primary,
    Secondary,
}

impl Stress {
    fn digit(self) -> char {
        match self {
            Stress::Unstressed => '0',
            Stress::Primary => '1',
            Stress::Secondary => '2',
        }
    }

    /// Binary metrical value: only unstressed maps to 0.
    pub fn is_stressed(self) -> bool {
        !matches!(self, Stress::Unstressed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phoneme {
    pub symbol: Arpabet,
    /// Present iff `symbol` is a vowel.
    pub stress: Option<Stress>,
}

impl Phoneme {
    pub fn is_vowel(&self) -> bool {
        self.symbol.is_vowel()
    }
}

impl FromStr for Phoneme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (body, stress) = match s.as_bytes().last() {
            Some(b'0') => (&s[..s.len() - 1], Some(Stress::Unstressed)),
            Some(b'1') => (&s[..s.len() - 1], Some(Stress::Primary)),
            Some(b'2') => (&s[..s.len() - 1], Some(Stress::Secondary)),
            _ => (s, None),
        };
        let symbol: Arpabet = body.parse()?;
        match (symbol.is_vowel(), stress) {
            (true, None) => Err(format!("vowel {s:?} has no stress digit")),
            (false, Some(_)) => Err(format!("consonant {s:?} carries a stress digit")),
            _ => Ok(Phoneme { symbol, stress }),
        }
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol.as_str())?;
        if let Some(stress) = self.stress {
            write!(f, "{}", stress.digit())?;
        }
        Ok(())
    }
}

/// One dictionary row: a word and one of its pronunciations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pronunciation {
    pub word: String,
    /// 0 for the base entry, `n` for `WORD(n)`.
    pub variant: u32,
    pub phonemes: Vec<Phoneme>,
}

impl Pronunciation {
    pub fn new(word: &str, variant: u32, phonemes: Vec<Phoneme>) -> Result<Self, PhonoError> {
        if !phonemes.iter().any(Phoneme::is_vowel) {
            return Err(PhonoError::NoVowel(word.to_string()));
        }
        Ok(Pronunciation {
            word: word.to_lowercase(),
            variant,
            phonemes,
        })
    }

    /// Builds a pronunciation from a space-separated phoneme string such as `"G EY1 M"`.
    pub fn from_phones(word: &str, variant: u32, phones: &str) -> Result<Self, PhonoError> {
        let phonemes = phones
            .split_whitespace()
            .map(|p| p.parse())
            .collect::<Result<Vec<Phoneme>, _>>()
            .map_err(|message| PhonoError::Parse { line: 0, message })?;
        Pronunciation::new(word, variant, phonemes)
    }

    pub fn stress_pattern(&self) -> StressPattern {
        stress_pattern(self)
    }

    pub fn rhyme_key(&self) -> RhymeKey {
        rhyme_key(self)
    }

    pub fn syllable_count(&self) -> usize {
        syllable_count(self)
    }

    /// Consonants between the previous vowel (or the word start) and the final vowel.
    pub fn final_onset(&self) -> Vec<Arpabet> {
        let last = self.last_vowel_index();
        let start = self.phonemes[..last]
            .iter()
            .rposition(Phoneme::is_vowel)
            .map_or(0, |i| i + 1);
        self.phonemes[start..last].iter().map(|p| p.symbol).collect()
    }

    fn last_vowel_index(&self) -> usize {
        self.phonemes
            .iter()
            .rposition(Phoneme::is_vowel)
            .expect("pronunciation invariant: at least one vowel")
    }

    pub fn phones(&self) -> String {
        self.phonemes
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Per-syllable binary stress: `false` unstressed, `true` stressed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StressPattern {
    pub bits: Vec<bool>,
}

impl StressPattern {
    pub fn iambic_pentameter() -> Self {
        "0101010101".parse().unwrap()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl FromStr for StressPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid stress character {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|bits| StressPattern { bits })
    }
}

impl fmt::Display for StressPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Stress-stripped phonemes from the final vowel to the end of the word.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RhymeKey {
    pub phonemes: Vec<Arpabet>,
}

impl fmt::Display for RhymeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.phonemes.iter().map(|p| p.as_str()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl serde::Serialize for RhymeKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn stress_pattern(p: &Pronunciation) -> StressPattern {
    StressPattern {
        bits: p
            .phonemes
            .iter()
            .filter_map(|ph| ph.stress.map(Stress::is_stressed))
            .collect(),
    }
}

pub fn rhyme_key(p: &Pronunciation) -> RhymeKey {
    RhymeKey {
        phonemes: p.phonemes[p.last_vowel_index()..]
            .iter()
            .map(|ph| ph.symbol)
            .collect(),
    }
}

pub fn syllable_count(p: &Pronunciation) -> usize {
    p.phonemes.iter().filter(|ph| ph.is_vowel()).count()
}

/// Metrical licences applied when matching words against a template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Relaxations {
    /// One-syllable words may fill either a stressed or an unstressed slot.
    pub monosyllable_flexible: bool,
    /// A word-final unstressed syllable may fill the last, stressed slot of a line.
    pub final_promotion: bool,
}

impl Relaxations {
    pub const STRICT: Relaxations = Relaxations {
        monosyllable_flexible: false,
        final_promotion: false,
    };
}

impl Default for Relaxations {
    fn default() -> Self {
        Relaxations {
            monosyllable_flexible: true,
            final_promotion: true,
        }
    }
}

/// Whether `pattern` can occupy template positions `end_pos + 1 - len ..= end_pos`.
pub fn pattern_fits_at(
    pattern: &StressPattern,
    template: &StressPattern,
    end_pos: usize,
    relax: Relaxations,
) -> bool {
    let len = pattern.len();
    if len == 0 || end_pos >= template.len() || len > end_pos + 1 {
        return false;
    }
    if len == 1 && relax.monosyllable_flexible {
        return true;
    }
    let start = end_pos + 1 - len;
    let line_final = end_pos + 1 == template.len();
    pattern.bits.iter().enumerate().all(|(i, &bit)| {
        let want = template.bits[start + i];
        bit == want || (relax.final_promotion && line_final && i + 1 == len && want && !bit)
    })
}

pub fn fits_at(
    p: &Pronunciation,
    template: &StressPattern,
    end_pos: usize,
    relax: Relaxations,
) -> bool {
    pattern_fits_at(&p.stress_pattern(), template, end_pos, relax)
}

/// Parsed dictionary keyed by lowercase word.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PronouncingDict {
    entries: BTreeMap<String, Vec<Pronunciation>>,
}

impl PronouncingDict {
    pub fn lookup(&self, word: &str) -> Option<&[Pronunciation]> {
        match self.entries.get(word) {
            Some(v) => Some(v),
            None => self.entries.get(&word.to_lowercase()).map(Vec::as_slice),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Pronunciation])> {
        self.entries.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// Adds a pronunciation, rejecting a repeated variant index for the same word.
    pub fn insert(&mut self, p: Pronunciation) -> Result<(), String> {
        let list = self.entries.entry(p.word.clone()).or_default();
        if list.iter().any(|q| q.variant == p.variant) {
            return Err(format!("duplicate variant {} for {:?}", p.variant, p.word));
        }
        let at = list.partition_point(|q| q.variant < p.variant);
        list.insert(at, p);
        Ok(())
    }

    /// Writes the dictionary back out in CMU layout.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (word, prons) in &self.entries {
            for p in prons {
                if p.variant == 0 {
                    writeln!(out, "{word}  {}", p.phones())?;
                } else {
                    writeln!(out, "{word}({})  {}", p.variant, p.phones())?;
                }
            }
        }
        Ok(())
    }
}

/// Spelled-out punctuation headwords such as `!EXCLAMATION-POINT` or `'END-QUOTE`.
fn is_punctuation_headword(head: &str) -> bool {
    let mut chars = head.chars();
    match chars.next() {
        Some('\'') => head[1..].to_ascii_uppercase().ends_with("QUOTE"),
        Some(c) => c.is_ascii_punctuation(),
        None => true,
    }
}

fn split_variant(head: &str) -> Result<(&str, u32), String> {
    match head.strip_suffix(')').and_then(|h| h.rsplit_once('(')) {
        Some((word, n)) => n
            .parse()
            .map(|n| (word, n))
            .map_err(|_| format!("bad variant marker in {head:?}")),
        None => Ok((head, 0)),
    }
}

pub fn parse_cmu_dict<R: BufRead>(reader: R) -> Result<PronouncingDict, PhonoError> {
    let mut dict = PronouncingDict::default();
    for (idx, line) in latin1_lines(reader).enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let err = |message: String| PhonoError::Parse {
            line: lineno,
            message,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;;") {
            continue;
        }
        // trailing `# comment` (newer releases); a leading `#` is a headword
        let body = match trimmed.find(" #") {
            Some(i) => trimmed[..i].trim_end(),
            None => trimmed,
        };
        let mut fields = body.split_whitespace();
        let head = fields.next().unwrap_or_default();
        if is_punctuation_headword(head) {
            continue;
        }
        let (word, variant) = split_variant(head).map_err(err)?;
        let phonemes = fields
            .map(|f| f.parse::<Phoneme>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        if phonemes.is_empty() {
            return Err(err(format!("no phonemes for {head:?}")));
        }
        if !phonemes.iter().any(Phoneme::is_vowel) {
            // interjections like `HMM  HH M` have no syllable to scan
            log::debug!("line {lineno}: skipping vowelless entry {head:?}");
            continue;
        }
        let pron = Pronunciation {
            word: word.to_lowercase(),
            variant,
            phonemes,
        };
        dict.insert(pron).map_err(err)?;
    }
    Ok(dict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pron(word: &str, phones: &str) -> Pronunciation {
        Pronunciation::from_phones(word, 0, phones).unwrap()
    }

    fn parse(text: &str) -> PronouncingDict {
        parse_cmu_dict(text.as_bytes()).unwrap()
    }

    #[test]
    fn parses_basic_entry() {
        let d = parse("GAME  G EY1 M\n");
        let g = &d.lookup("game").unwrap()[0];
        assert_eq!(g.phones(), "G EY1 M");
        assert_eq!(g.variant, 0);
        assert!(d.lookup("GAME").is_some());
    }

    #[test]
    fn skips_comments_and_punctuation() {
        let d = parse(";;; comment\n!EXCLAMATION-POINT  EH2 K S K L AH0 M EY1 SH AH0 N P OY2 N T\n'END-QUOTE  EH1 N D K W OW1 T\n'TIS  T IH1 Z\n");
        assert_eq!(d.len(), 1);
        assert!(d.contains("'tis"));
    }

    #[test]
    fn collects_variants() {
        let d = parse("NAME  N EY1 M\nNAME(1)  N EY1 M\n");
        let v = d.lookup("name").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].variant, 1);
    }

    #[test]
    fn modern_layout_with_inline_comment() {
        let d = parse("aalborg AO1 L B AO0 R G # place, danish\nthe(2) DH AH1\n");
        assert_eq!(d.lookup("aalborg").unwrap()[0].phones(), "AO1 L B AO0 R G");
        assert_eq!(d.lookup("the").unwrap()[0].variant, 2);
    }

    #[test]
    fn latin1_comment_bytes_tolerated() {
        let d = parse_cmu_dict(&b";;; caf\xe9\nGAME  G EY1 M\n"[..]).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_cmu_dict("GAME  G EY1 M\nBAD  G QQ1 M\n".as_bytes()) {
            Err(PhonoError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("QQ"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            parse_cmu_dict("GAME\n".as_bytes()),
            Err(PhonoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_cmu_dict("NAME  N EY1 M\nNAME  N EY1 M\n".as_bytes()),
            Err(PhonoError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn stress_patterns() {
        assert_eq!(pron("lament", "L AH0 M EH1 N T").stress_pattern().to_string(), "01");
        assert_eq!(
            pron("ability", "AH0 B IH1 L AH0 T IY0").stress_pattern().to_string(),
            "0100"
        );
        assert_eq!(pron("game", "G EY1 M").stress_pattern().to_string(), "1");
        assert_eq!(pron("glorify", "G L AO1 R AH0 F AY2").stress_pattern().to_string(), "101");
    }

    #[test]
    fn rhyme_keys() {
        let key = |w, p| pron(w, p).rhyme_key().to_string();
        assert_eq!(key("game", "G EY1 M"), "EY M");
        assert_eq!(key("game", "G EY1 M"), key("name", "N EY1 M"));
        assert_eq!(key("ability", "AH0 B IH1 L AH0 T IY0"), "IY");
        assert_eq!(key("ability", "AH0 B IH1 L AH0 T IY0"), key("me", "M IY1"));
        assert_eq!(key("doom", "D UW1 M"), "UW M");
        assert_eq!(key("roam", "R OW1 M"), "OW M");
        assert_ne!(key("doom", "D UW1 M"), key("roam", "R OW1 M"));
        assert_eq!(key("glorify", "G L AO1 R AH0 F AY2"), key("my", "M AY1"));
    }

    #[test]
    fn syllables() {
        assert_eq!(pron("game", "G EY1 M").syllable_count(), 1);
        assert_eq!(pron("ability", "AH0 B IH1 L AH0 T IY0").syllable_count(), 4);
    }

    #[test]
    fn fits_at_relaxations() {
        let penta = StressPattern::iambic_pentameter();
        let ability = pron("ability", "AH0 B IH1 L AH0 T IY0");
        assert!(fits_at(&ability, &penta, 9, Relaxations::default()));
        assert!(!fits_at(&ability, &penta, 9, Relaxations::STRICT));
        // promotion only applies at the end of the line
        assert!(!fits_at(&ability, &penta, 7, Relaxations::default()));
        let the = pron("the", "DH AH0");
        for pos in 0..10 {
            assert!(fits_at(&the, &penta, pos, Relaxations::default()));
        }
        assert!(!fits_at(&the, &penta, 1, Relaxations::STRICT));
        assert!(fits_at(&the, &penta, 0, Relaxations::STRICT));
        // longer than the available prefix
        let glorify = pron("glorify", "G L AO1 R AH0 F AY2");
        assert!(!fits_at(&glorify, &penta, 1, Relaxations::default()));
        assert!(fits_at(&glorify, &penta, 9, Relaxations::STRICT));
    }

    #[test]
    fn final_onset() {
        assert_eq!(pron("game", "G EY1 M").final_onset(), vec![Arpabet::G]);
        assert_eq!(
            pron("ability", "AH0 B IH1 L AH0 T IY0").final_onset(),
            vec![Arpabet::T]
        );
        assert!(pron("eye", "AY1").final_onset().is_empty());
    }

    #[test]
    fn arpabet_has_39_symbols() {
        assert_eq!(Arpabet::ALL.len(), 39);
        assert_eq!(Arpabet::ALL.iter().filter(|a| a.is_vowel()).count(), 15);
    }
}
