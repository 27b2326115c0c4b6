//! Comma placement and line-end punctuation for a finished poem.
//!
//! A comma budget `n` is drawn, every gap is scored by how much a comma there
//! changes its line's log-likelihood, and the `n` best gaps across the whole
//! poem get a comma. Gaps are scored once against the bare lines; placing
//! one comma does not rescore the others.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::langmodel::{sequence_logprob, LanguageModel, LmError, COMMA, PERIOD};

#[derive(Debug, Error)]
pub enum PunctError {
    #[error("the language model has no comma token; retrain it with punctuation kept")]
    NoComma,
    #[error("comma distribution is empty or has invalid weights")]
    Distribution,
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Categorical distribution over comma counts `start, start + 1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommaDistribution {
    pub start: usize,
    pub weights: Vec<f64>,
}

impl CommaDistribution {
    pub fn new(start: usize, weights: Vec<f64>) -> Result<Self, PunctError> {
        let ok = !weights.is_empty()
            && weights.iter().all(|w| w.is_finite() && *w >= 0.0)
            && weights.iter().sum::<f64>() > 0.0;
        if !ok {
            return Err(PunctError::Distribution);
        }
        Ok(CommaDistribution { start, weights })
    }

    /// Uniform on `lo..=hi`.
    pub fn uniform(lo: usize, hi: usize) -> Result<Self, PunctError> {
        if hi < lo {
            return Err(PunctError::Distribution);
        }
        Self::new(lo, vec![1.0; hi - lo + 1])
    }

    pub fn point(n: usize) -> Self {
        CommaDistribution {
            start: n,
            weights: vec![1.0],
        }
    }

    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.start + self.weights.len() - 1
    }
}

pub fn sample_budget<R: Rng + ?Sized>(dist: &CommaDistribution, rng: &mut R) -> usize {
    let total: f64 = dist.weights.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in dist.weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return dist.start + i;
        }
    }
    dist.start + last
}

/// A place a comma could go. `gap` counts the words before it, so interior
/// gaps run from 1 to `len - 1` and `len` is the end of the line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InsertionPoint {
    pub line: usize,
    pub gap: usize,
    pub score: f64,
}

/// Scores every interior gap, plus the end gap of lines that will not take a
/// period, as the change in the line's log-likelihood from adding a comma.
pub fn score_insertions<M: LanguageModel + ?Sized, S: AsRef<str>>(
    lines: &[Vec<S>],
    period_lines: &[usize],
    lm: &M,
) -> Result<Vec<InsertionPoint>, PunctError> {
    if !lm.vocabulary().id(COMMA).is_some_and(|id| lm.observed(id)) {
        return Err(PunctError::NoComma);
    }
    let mut points = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        let words: Vec<&str> = line.iter().map(AsRef::as_ref).collect();
        let base = sequence_logprob(lm, &words)?;
        let last_gap = if period_lines.contains(&li) {
            words.len().saturating_sub(1)
        } else {
            words.len()
        };
        for gap in 1..=last_gap {
            let mut with = words.clone();
            with.insert(gap, COMMA);
            points.push(InsertionPoint {
                line: li,
                gap,
                score: sequence_logprob(lm, &with)? - base,
            });
        }
    }
    Ok(points)
}

/// The `n` best points, by score and then by (line, gap).
pub fn choose_points(points: &[InsertionPoint], n: usize) -> Vec<InsertionPoint> {
    if n > points.len() {
        log::warn!(
            "comma budget {n} exceeds the {} available gaps; filling every gap",
            points.len()
        );
    }
    let mut ranked = points.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.line.cmp(&b.line))
            .then(a.gap.cmp(&b.gap))
    });
    ranked.dedup_by(|a, b| a.line == b.line && a.gap == b.gap);
    ranked.truncate(n);
    ranked
}

/// Inserts commas at the `n` best points.
pub fn place_commas<S: AsRef<str>>(
    lines: &[Vec<S>],
    points: &[InsertionPoint],
    n: usize,
) -> Vec<Vec<String>> {
    let chosen = choose_points(points, n);
    lines
        .iter()
        .enumerate()
        .map(|(li, line)| {
            let mut gaps: Vec<usize> = chosen.iter().filter(|p| p.line == li).map(|p| p.gap).collect();
            gaps.sort_unstable();
            let mut out = Vec::with_capacity(line.len() + gaps.len());
            for (wi, w) in line.iter().enumerate() {
                out.push(w.as_ref().to_string());
                if gaps.binary_search(&(wi + 1)).is_ok() {
                    out.push(COMMA.to_string());
                }
            }
            out
        })
        .collect()
}

/// Ends each of `period_lines` with a period, replacing a trailing comma.
pub fn finalize_line_ends(lines: &mut [Vec<String>], period_lines: &[usize]) {
    for &li in period_lines {
        let Some(line) = lines.get_mut(li) else { continue };
        if line.last().is_some_and(|t| t == COMMA) {
            line.pop();
        }
        line.push(PERIOD.to_string());
    }
}

fn is_punct(token: &str) -> bool {
    token == COMMA || token == PERIOD
}

/// Renders tokens as text: punctuation attached to the preceding word, the
/// first letter and the pronoun `i` capitalised.
pub fn render_line<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        let t = t.as_ref();
        if i > 0 && !is_punct(t) {
            out.push(' ');
        }
        if t == "i" || t.starts_with("i'") {
            out.push('I');
            out.push_str(&t[1..]);
        } else {
            out.push_str(t);
        }
    }
    if let Some(first) = out.chars().next() {
        let upper: String = first.to_uppercase().collect();
        out.replace_range(..first.len_utf8(), &upper);
    }
    out
}

/// Words of a punctuated line with the punctuation removed.
pub fn strip_punctuation<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_punct(t))
        .map(str::to_string)
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Punctuated {
    pub lines: Vec<Vec<String>>,
    pub budget: usize,
    pub commas: Vec<InsertionPoint>,
}

/// Samples a budget, places commas and closes the stanzas.
pub fn punctuate<M: LanguageModel + ?Sized, S: AsRef<str>, R: Rng + ?Sized>(
    lines: &[Vec<S>],
    period_lines: &[usize],
    lm: &M,
    dist: &CommaDistribution,
    rng: &mut R,
) -> Result<Punctuated, PunctError> {
    let budget = sample_budget(dist, rng);
    let points = score_insertions(lines, period_lines, lm)?;
    let commas = choose_points(&points, budget);
    let mut out = place_commas(lines, &points, budget);
    finalize_line_ends(&mut out, period_lines);
    Ok(Punctuated {
        lines: out,
        budget,
        commas,
    })
}
