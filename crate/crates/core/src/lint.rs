//! Independent checks of meter, rhyme and part-of-speech rules.
//!
//! Lint reads plain poem text and relies only on the dictionary, the tag
//! lexicon and the rule set. It never consults search state, so it can judge
//! generated and human poems alike.

use std::fmt;

use serde::Serialize;

use crate::form::RhymeScheme;
use crate::grammar::{line_tags, ForbiddenRuleSet, Tag, TagLexicon};
use crate::phonodict::{pattern_fits_at, PronouncingDict, Pronunciation, Relaxations, RhymeKey, StressPattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FindingKind {
    Meter,
    Rhyme,
    Pos,
    /// A word missing from the dictionary; reported but never fatal.
    Oov,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::Meter => "METER",
            FindingKind::Rhyme => "RHYME",
            FindingKind::Pos => "POS",
            FindingKind::Oov => "OOV",
        })
    }
}

/// One problem, located by 1-based source line and character column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub line: usize,
    pub col: usize,
    pub kind: FindingKind,
    pub message: String,
}

impl Finding {
    pub fn is_warning(&self) -> bool {
        self.kind == FindingKind::Oov
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} {} {}", self.line, self.col, self.kind, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LintWord {
    /// Lowercase word without punctuation.
    pub text: String,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LintLine {
    /// 1-based line number in the source text.
    pub number: usize,
    pub words: Vec<LintWord>,
}

/// Non-blank lines of a poem, split into words.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LintPoem {
    pub lines: Vec<LintLine>,
}

const ELISIONS: &[&str] = &["'tis", "'twas", "'twere", "'twill", "'twould", "'gainst", "'em", "'neath"];

pub fn parse_poem(text: &str) -> LintPoem {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let words = split_words(raw);
        if !words.is_empty() {
            lines.push(LintLine {
                number: i + 1,
                words,
            });
        }
    }
    LintPoem { lines }
}

fn split_words(line: &str) -> Vec<LintWord> {
    let chars: Vec<char> = line
        .chars()
        .map(|c| if matches!(c, '\u{2019}' | '\u{2018}') { '\'' } else { c })
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !(chars[i].is_alphanumeric() || chars[i] == '\'') {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '\'') {
            i += 1;
        }
        let raw: String = chars[start..i].iter().collect::<String>().to_lowercase();
        let mut lead = 0;
        let mut text = raw.trim_end_matches('\'').to_string();
        if text.starts_with('\'') && !ELISIONS.contains(&text.as_str()) {
            let trimmed = text.trim_start_matches('\'');
            lead = text.len() - trimmed.len();
            text = trimmed.to_string();
        }
        if !text.is_empty() {
            out.push(LintWord {
                text,
                col: start + lead + 1,
            });
        }
    }
    out
}

/// Pronunciation variants chosen for each word of each line.
pub type RecordedVariants = [Vec<u32>];

/// Whether the line scans as `template` under some choice of variants, or
/// under exactly `recorded` when given.
fn scans(
    prons: &[Vec<&Pronunciation>],
    template: &StressPattern,
    relax: Relaxations,
) -> bool {
    // reachable[k]: the first k template slots can be covered by a prefix of the words
    let n = template.len();
    let mut reachable = vec![false; n + 1];
    reachable[0] = true;
    for options in prons {
        let mut next = vec![false; n + 1];
        for start in (0..=n).filter(|&s| reachable[s]) {
            for p in options {
                let pattern = p.stress_pattern();
                let end = start + pattern.len();
                if end <= n && pattern_fits_at(&pattern, template, end - 1, relax) {
                    next[end] = true;
                }
            }
        }
        reachable = next;
    }
    reachable[n]
}

pub fn verify_meter(
    poem: &LintPoem,
    dict: &PronouncingDict,
    template: &StressPattern,
    relax: Relaxations,
    recorded: Option<&RecordedVariants>,
) -> Vec<Finding> {
    let mut findings = Vec::new();
    for (li, line) in poem.lines.iter().enumerate() {
        let mut prons: Vec<Vec<&Pronunciation>> = Vec::new();
        let mut missing = false;
        for (wi, w) in line.words.iter().enumerate() {
            let Some(all) = dict.lookup(&w.text) else {
                findings.push(Finding {
                    line: line.number,
                    col: w.col,
                    kind: FindingKind::Oov,
                    message: format!("{:?} is not in the dictionary; line not scanned", w.text),
                });
                missing = true;
                continue;
            };
            let chosen: Vec<&Pronunciation> = match recorded.and_then(|r| r.get(li)) {
                Some(vars) => match vars.get(wi).and_then(|v| all.iter().find(|p| p.variant == *v)) {
                    Some(p) => vec![p],
                    None => {
                        findings.push(Finding {
                            line: line.number,
                            col: w.col,
                            kind: FindingKind::Meter,
                            message: format!("no recorded pronunciation for {:?}", w.text),
                        });
                        missing = true;
                        continue;
                    }
                },
                None => all.iter().collect(),
            };
            prons.push(chosen);
        }
        if missing || scans(&prons, template, relax) {
            continue;
        }
        let min: usize = prons.iter().map(|o| o.iter().map(|p| p.syllable_count()).min().unwrap_or(0)).sum();
        let max: usize = prons.iter().map(|o| o.iter().map(|p| p.syllable_count()).max().unwrap_or(0)).sum();
        let n = template.len();
        let message = if n < min || n > max {
            if min == max {
                format!("{min} syllables, expected {n}")
            } else {
                format!("{min} to {max} syllables, expected {n}")
            }
        } else {
            let first: String = prons
                .iter()
                .map(|o| o[0].stress_pattern().to_string())
                .collect();
            format!("stress pattern {first} does not fit {template}")
        };
        findings.push(Finding {
            line: line.number,
            col: 1,
            kind: FindingKind::Meter,
            message,
        });
    }
    findings
}

/// Rhyme keys the last word of a line may take.
fn line_keys(
    line: &LintLine,
    index: usize,
    dict: &PronouncingDict,
    recorded: Option<&RecordedVariants>,
) -> Option<Vec<RhymeKey>> {
    let last = line.words.last()?;
    let prons = dict.lookup(&last.text)?;
    let wanted = recorded.and_then(|r| r.get(index)).and_then(|v| v.get(line.words.len() - 1));
    let mut keys: Vec<RhymeKey> = prons
        .iter()
        .filter(|p| wanted.is_none_or(|&v| p.variant == v))
        .map(Pronunciation::rhyme_key)
        .collect();
    keys.sort();
    keys.dedup();
    Some(keys)
}

/// Same-letter lines must share a rhyme key and each letter needs its own key.
pub fn verify_rhyme(
    poem: &LintPoem,
    scheme: &RhymeScheme,
    dict: &PronouncingDict,
    recorded: Option<&RecordedVariants>,
) -> Vec<Finding> {
    let mut findings = Vec::new();
    if poem.lines.len() != scheme.line_count() {
        findings.push(Finding {
            line: poem.lines.first().map_or(1, |l| l.number),
            col: 1,
            kind: FindingKind::Rhyme,
            message: format!(
                "poem has {} lines but scheme {scheme} has {}",
                poem.lines.len(),
                scheme.line_count()
            ),
        });
        return findings;
    }
    let end = |i: usize| {
        let l = &poem.lines[i];
        (l.number, l.words.last().map_or(1, |w| w.col), l.words.last().map_or("", |w| w.text.as_str()))
    };

    // letter -> keys shared by all of its lines
    let mut letters: Vec<(char, Vec<RhymeKey>)> = Vec::new();
    for letter in scheme.letters() {
        let lines = scheme.lines_for(letter);
        let mut shared: Option<Vec<RhymeKey>> = None;
        let mut unknown = false;
        for &i in &lines {
            match line_keys(&poem.lines[i], i, dict, recorded) {
                Some(keys) => {
                    shared = Some(match shared {
                        None => keys,
                        Some(s) => s.into_iter().filter(|k| keys.contains(k)).collect(),
                    })
                }
                None => unknown = true,
            }
        }
        if unknown {
            let (line, col, word) = end(lines[0]);
            findings.push(Finding {
                line,
                col,
                kind: FindingKind::Oov,
                message: format!("rhyme {letter} not checked: an end word is not in the dictionary (first is {word:?})"),
            });
            continue;
        }
        let shared = shared.unwrap_or_default();
        if shared.is_empty() {
            let words: Vec<&str> = lines.iter().map(|&i| end(i).2).collect();
            let (line, col, _) = end(*lines.last().unwrap());
            findings.push(Finding {
                line,
                col,
                kind: FindingKind::Rhyme,
                message: format!("rhyme {letter}: {} do not share a rhyme sound", words.join("/")),
            });
            continue;
        }
        letters.push((letter, shared));
    }

    if !distinct_assignment(&letters, &mut Vec::new()) {
        // report each pair of letters forced onto the same single key
        for a in 0..letters.len() {
            for b in a + 1..letters.len() {
                let clash = letters[a].1.len() == 1 && letters[a].1 == letters[b].1;
                if clash {
                    let (line, col, _) = end(scheme.lines_for(letters[b].0)[0]);
                    findings.push(Finding {
                        line,
                        col,
                        kind: FindingKind::Rhyme,
                        message: format!(
                            "rhymes {} and {} share the sound {}",
                            letters[a].0, letters[b].0, letters[a].1[0]
                        ),
                    });
                }
            }
        }
        if !findings.iter().any(|f| f.kind == FindingKind::Rhyme) {
            let (line, col, _) = end(0);
            findings.push(Finding {
                line,
                col,
                kind: FindingKind::Rhyme,
                message: "rhyme letters cannot all take distinct sounds".into(),
            });
        }
    }
    findings
}

fn distinct_assignment<'k>(letters: &'k [(char, Vec<RhymeKey>)], used: &mut Vec<&'k RhymeKey>) -> bool {
    let Some(((_, keys), rest)) = letters.split_first() else {
        return true;
    };
    for k in keys {
        if used.contains(&k) {
            continue;
        }
        used.push(k);
        if distinct_assignment(rest, used) {
            return true;
        }
        used.pop();
    }
    false
}

/// Flags every contiguous run of primary tags that matches a rule.
pub fn verify_pos(poem: &LintPoem, lexicon: &TagLexicon, rules: &ForbiddenRuleSet) -> Vec<Finding> {
    let mut findings = Vec::new();
    for line in &poem.lines {
        let words: Vec<&str> = line.words.iter().map(|w| w.text.as_str()).collect();
        let tags = line_tags(lexicon, &words);
        for (start, rule) in rules.matches(&tags) {
            let covered: Vec<&str> = (start..start + rule.len())
                .filter(|&t| !tags[t].is_boundary())
                .map(|t| words[t - 1])
                .collect();
            let first_word = if tags[start] == Tag::LineStart { start } else { start - 1 };
            let col = line.words.get(first_word).map_or(1, |w| w.col);
            let rule_text: Vec<&str> = rule.iter().map(|t| t.as_str()).collect();
            findings.push(Finding {
                line: line.number,
                col,
                kind: FindingKind::Pos,
                message: format!("{} ({})", rule_text.join(" "), covered.join(" ")),
            });
        }
    }
    findings
}

/// Everything lint needs besides the poem.
pub struct LintContext<'a> {
    pub dict: &'a PronouncingDict,
    pub scheme: RhymeScheme,
    pub template: StressPattern,
    pub relax: Relaxations,
    /// Tag checks run only when both are present.
    pub grammar: Option<(&'a TagLexicon, &'a ForbiddenRuleSet)>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LintReport {
    pub findings: Vec<Finding>,
}

impl LintReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| !f.is_warning())
    }

    pub fn is_clean(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }
}

pub fn lint_poem(poem: &LintPoem, ctx: &LintContext<'_>, recorded: Option<&RecordedVariants>) -> LintReport {
    let mut findings = verify_meter(poem, ctx.dict, &ctx.template, ctx.relax, recorded);
    findings.extend(verify_rhyme(poem, &ctx.scheme, ctx.dict, recorded));
    if let Some((lexicon, rules)) = ctx.grammar {
        findings.extend(verify_pos(poem, lexicon, rules));
    }
    findings.sort_by_key(|f| (f.line, f.col));
    findings.dedup();
    LintReport { findings }
}
