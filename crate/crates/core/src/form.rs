//! Poem shapes: rhyme schemes, stanza ends and the line template.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::phonodict::StressPattern;

/// Rhyme letters, one per line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhymeScheme {
    labels: Vec<char>,
}

impl RhymeScheme {
    /// Every letter must label at least two lines.
    pub fn new(labels: &str) -> Result<Self, String> {
        let labels: Vec<char> = labels.trim().chars().collect();
        if labels.is_empty() {
            return Err("empty rhyme scheme".into());
        }
        if let Some(c) = labels.iter().find(|c| !c.is_ascii_alphabetic()) {
            return Err(format!("invalid rhyme letter {c:?}"));
        }
        let labels: Vec<char> = labels.iter().map(|c| c.to_ascii_uppercase()).collect();
        for &c in &labels {
            if labels.iter().filter(|&&d| d == c).count() < 2 {
                return Err(format!("rhyme letter {c} labels only one line"));
            }
        }
        Ok(RhymeScheme { labels })
    }

    pub fn sonnet() -> Self {
        RhymeScheme::new("ABABCDCDEFEFGG").unwrap()
    }

    /// Quatrain plus couplet.
    pub fn short() -> Self {
        RhymeScheme::new("ABABCC").unwrap()
    }

    pub fn labels(&self) -> &[char] {
        &self.labels
    }

    pub fn line_count(&self) -> usize {
        self.labels.len()
    }

    /// Distinct letters in order of first appearance.
    pub fn letters(&self) -> Vec<char> {
        let mut out = Vec::new();
        for &c in &self.labels {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// Line indices carrying `letter`, ascending.
    pub fn lines_for(&self, letter: char) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == letter)
            .collect()
    }

    /// True when every letter labels exactly two lines, as generation requires.
    pub fn is_paired(&self) -> bool {
        self.letters().iter().all(|&c| self.lines_for(c).len() == 2)
    }
}

impl fmt::Display for RhymeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.labels.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Sonnet,
    Short,
}

impl Form {
    pub fn scheme(self) -> RhymeScheme {
        match self {
            Form::Sonnet => RhymeScheme::sonnet(),
            Form::Short => RhymeScheme::short(),
        }
    }

    pub fn line_count(self) -> usize {
        match self {
            Form::Sonnet => 14,
            Form::Short => 6,
        }
    }

    /// 0-based indices of lines that close a stanza and take a period.
    pub fn period_lines(self) -> &'static [usize] {
        match self {
            Form::Sonnet => &[3, 7, 11, 13],
            Form::Short => &[3, 5],
        }
    }

    pub fn template(self) -> StressPattern {
        StressPattern::iambic_pentameter()
    }
}

impl FromStr for Form {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sonnet" => Ok(Form::Sonnet),
            "short" => Ok(Form::Short),
            _ => Err(format!("unknown form {s:?} (expected sonnet or short)")),
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Sonnet => "sonnet",
            Form::Short => "short",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sonnet_scheme() {
        let s = RhymeScheme::sonnet();
        assert_eq!(s.line_count(), 14);
        assert_eq!(s.letters(), vec!['A', 'B', 'C', 'D', 'E', 'F', 'G']);
        assert_eq!(s.lines_for('G'), vec![12, 13]);
        assert!(s.is_paired());
        assert_eq!(RhymeScheme::short().to_string(), "ABABCC");
    }

    #[test]
    fn rejects_lonely_letters() {
        assert!(RhymeScheme::new("ABA").is_err());
        assert!(RhymeScheme::new("").is_err());
        assert!(RhymeScheme::new("A1A1").is_err());
        assert!(!RhymeScheme::new("AAAB B").is_ok());
        assert!(!RhymeScheme::new("AAABB").unwrap().is_paired());
    }
}
