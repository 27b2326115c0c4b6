//! Backward beam search for a single line.
//!
//! A line grows leftwards from its rhyme word one word at a time. Every
//! extension must fit the stress template at the slots it occupies and must
//! not create a forbidden tag sequence. Hypotheses are ranked by their
//! accumulated backward log-likelihood, which for a finished line equals
//! [`sequence_logprob`](crate::langmodel::sequence_logprob) exactly.

use std::cmp::Ordering;

use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{primary_tag, violates, ForbiddenRuleSet, Tag, TagLexicon};
use crate::langmodel::{LanguageModel, TokenId, Vocabulary, LINE_END_ID, LINE_START_ID};
use crate::phonodict::{
    pattern_fits_at, PronouncingDict, Pronunciation, Relaxations, RhymeKey, StressPattern,
};

/// Lines are sampled from at most this many top drafts.
pub const SAMPLE_POOL: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("no complete line ends in {0:?}")]
    NoLine(String),
    #[error("{word:?} (variant {variant}) cannot end a line")]
    RhymeDoesNotFit { word: String, variant: u32 },
    #[error("{0:?} is missing from the model vocabulary or the dictionary")]
    UnknownWord(String),
    #[error("beam width and draft count must be at least 1")]
    Width,
}

/// Tag slot with room for "no tag" (index 38) in short windows.
type TagSlot = u8;
const NO_TAG: TagSlot = Tag::ALL.len() as TagSlot;
const SLOTS: usize = Tag::ALL.len() + 1;

fn slot(tag: Tag) -> TagSlot {
    Tag::ALL.iter().position(|&t| t == tag).expect("tag in ALL") as TagSlot
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    word: TokenId,
    variant: u32,
    syllables: u8,
    tag: TagSlot,
}

/// Precomputed line-building material: every (word, stress pattern) that can
/// fill the template slots ending at each position.
pub struct CandidateIndex {
    template: StressPattern,
    relax: Relaxations,
    by_end: Vec<Vec<Candidate>>,
    ids_by_end: Vec<Vec<TokenId>>,
    /// `forbidden[a][b][c]`: the surface window `a b c` matches a rule.
    forbidden: Vec<bool>,
}

fn window_index(a: TagSlot, b: TagSlot, c: TagSlot) -> usize {
    (a as usize * SLOTS + b as usize) * SLOTS + c as usize
}

impl CandidateIndex {
    /// Words are taken from `vocab`; each must also be known to the model and
    /// the dictionary. Punctuation and line markers are skipped.
    pub fn new<S: AsRef<str>>(
        vocab: &[S],
        lm_vocab: &Vocabulary,
        dict: &PronouncingDict,
        lexicon: &TagLexicon,
        rules: &ForbiddenRuleSet,
        template: &StressPattern,
        relax: Relaxations,
    ) -> Self {
        let n = template.len();
        let mut by_end: Vec<Vec<Candidate>> = vec![Vec::new(); n];
        for w in vocab {
            let w = w.as_ref();
            let Some(id) = lm_vocab.id(w) else { continue };
            if Vocabulary::is_boundary(id) || Vocabulary::is_punctuation(id) {
                continue;
            }
            let Some(prons) = dict.lookup(w) else { continue };
            let tag = slot(primary_tag(lexicon, w));
            let mut seen: Vec<StressPattern> = Vec::new();
            for p in prons {
                let pattern = p.stress_pattern();
                if seen.contains(&pattern) {
                    continue;
                }
                for (end, list) in by_end.iter_mut().enumerate() {
                    if pattern_fits_at(&pattern, template, end, relax) {
                        list.push(Candidate {
                            word: id,
                            variant: p.variant,
                            syllables: pattern.len() as u8,
                            tag,
                        });
                    }
                }
                seen.push(pattern);
            }
        }
        for list in &mut by_end {
            list.sort_by_key(|c| (c.word, c.variant));
            list.dedup_by_key(|c| (c.word, c.variant));
        }
        let ids_by_end = by_end
            .iter()
            .map(|l| l.iter().map(|c| c.word).collect())
            .collect();

        let mut forbidden = vec![false; SLOTS * SLOTS * SLOTS];
        for a in 0..SLOTS as TagSlot {
            for b in 0..SLOTS as TagSlot {
                for c in 0..SLOTS as TagSlot {
                    let window: Vec<Tag> = [a, b, c]
                        .iter()
                        .filter(|&&s| s != NO_TAG)
                        .map(|&s| Tag::ALL[s as usize])
                        .collect();
                    forbidden[window_index(a, b, c)] = violates(rules, &window);
                }
            }
        }
        CandidateIndex {
            template: template.clone(),
            relax,
            by_end,
            ids_by_end,
            forbidden,
        }
    }

    pub fn template(&self) -> &StressPattern {
        &self.template
    }

    /// Number of distinct words available anywhere in the line.
    pub fn word_count(&self) -> usize {
        let mut ids: Vec<TokenId> = self.by_end.iter().flatten().map(|c| c.word).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    fn forbidden(&self, a: TagSlot, b: TagSlot, c: TagSlot) -> bool {
        self.forbidden[window_index(a, b, c)]
    }
}

/// A partial line. Words are kept right to left, rhyme word first.
#[derive(Clone, Debug)]
pub struct SearchState {
    reversed: Vec<(TokenId, u32)>,
    syllables_remaining: u8,
    context: Vec<TokenId>,
    window: [TagSlot; 2],
    score: f64,
}

impl SearchState {
    pub fn syllables_remaining(&self) -> usize {
        self.syllables_remaining as usize
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// Words in reading order with their pronunciation variants.
    pub fn words<'v>(&self, vocab: &'v Vocabulary) -> Vec<(&'v str, u32)> {
        self.reversed
            .iter()
            .rev()
            .map(|&(id, v)| (vocab.token(id), v))
            .collect()
    }

    fn surface_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.reversed.iter().rev().map(|&(id, _)| id)
    }

    fn key(&self) -> (u8, &[TokenId], [TagSlot; 2]) {
        (self.syllables_remaining, &self.context, self.window)
    }
}

/// A finished line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineDraft {
    pub words: Vec<String>,
    pub variants: Vec<u32>,
    pub score: f64,
    pub rhyme_word: String,
    pub rhyme_key: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Every one of the top drafts is equally likely.
    #[default]
    Uniform,
    /// Drafts are weighted by likelihood.
    ScoreProportional,
}

/// Beam search over one [`CandidateIndex`] and language model.
pub struct LineSearcher<'a> {
    lm: &'a dyn LanguageModel,
    dict: &'a PronouncingDict,
    lexicon: &'a TagLexicon,
    index: &'a CandidateIndex,
}

#[derive(Clone, Copy)]
struct Expansion {
    score: f64,
    parent: u32,
    cand: u32,
}

struct Finished {
    score: f64,
    surface: Vec<(TokenId, u32)>,
}

fn finished_order(a: &Finished, b: &Finished) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.surface.iter().map(|x| x.0).cmp(b.surface.iter().map(|x| x.0)))
        .then_with(|| a.surface.cmp(&b.surface))
}

impl<'a> LineSearcher<'a> {
    pub fn new(
        lm: &'a dyn LanguageModel,
        dict: &'a PronouncingDict,
        lexicon: &'a TagLexicon,
        index: &'a CandidateIndex,
    ) -> Self {
        LineSearcher {
            lm,
            dict,
            lexicon,
            index,
        }
    }

    fn pronunciation(&self, word: &str, variant: u32) -> Option<&'a Pronunciation> {
        self.dict.lookup(word)?.iter().find(|p| p.variant == variant)
    }

    fn trim_context(&self, mut ctx: Vec<TokenId>) -> Vec<TokenId> {
        let keep = self.lm.context_len();
        if ctx.len() > keep {
            ctx.drain(..ctx.len() - keep);
        }
        ctx
    }

    /// The one-word state holding just the rhyme word.
    pub fn initial_state(&self, rhyme_word: &str, variant: u32) -> Result<SearchState, SearchError> {
        let vocab = self.lm.vocabulary();
        let id = vocab
            .id(rhyme_word)
            .filter(|&id| !Vocabulary::is_boundary(id) && !Vocabulary::is_punctuation(id))
            .ok_or_else(|| SearchError::UnknownWord(rhyme_word.to_string()))?;
        let pron = self
            .pronunciation(rhyme_word, variant)
            .ok_or_else(|| SearchError::UnknownWord(rhyme_word.to_string()))?;
        let pattern = pron.stress_pattern();
        let template = &self.index.template;
        if !pattern_fits_at(&pattern, template, template.len() - 1, self.index.relax) {
            return Err(SearchError::RhymeDoesNotFit {
                word: rhyme_word.to_string(),
                variant,
            });
        }
        let tag = slot(primary_tag(self.lexicon, rhyme_word));
        let end = slot(Tag::LineEnd);
        if self.index.forbidden(tag, end, NO_TAG) {
            return Err(SearchError::NoLine(rhyme_word.to_string()));
        }
        Ok(SearchState {
            reversed: vec![(id, variant)],
            syllables_remaining: (template.len() - pattern.len()) as u8,
            context: self.trim_context(vec![LINE_END_ID, id]),
            window: [tag, end],
            score: self.lm.log_prob_id(id, &[LINE_END_ID]),
        })
    }

    /// Every (word, variant) that may be prepended to `state`.
    pub fn candidate_extensions(&self, state: &SearchState) -> Vec<(&'a str, u32)> {
        let vocab = self.lm.vocabulary();
        self.extensions(state)
            .map(|c| (vocab.token(c.word), c.variant))
            .collect()
    }

    fn extensions<'s>(&'s self, state: &'s SearchState) -> impl Iterator<Item = &'a Candidate> + 's {
        let rem = state.syllables_remaining;
        let list: &'a [Candidate] = if rem == 0 {
            &[]
        } else {
            &self.index.by_end[rem as usize - 1]
        };
        list.iter().filter(move |c| self.admissible(state, c))
    }

    fn admissible(&self, state: &SearchState, c: &Candidate) -> bool {
        let [w0, w1] = state.window;
        if c.syllables > state.syllables_remaining || self.index.forbidden(c.tag, w0, w1) {
            return false;
        }
        c.syllables < state.syllables_remaining
            || !self.index.forbidden(slot(Tag::LineStart), c.tag, w0)
    }

    fn extend(&self, parent: &SearchState, c: &Candidate, score: f64) -> SearchState {
        let mut reversed = parent.reversed.clone();
        reversed.push((c.word, c.variant));
        let mut context = parent.context.clone();
        context.push(c.word);
        SearchState {
            reversed,
            syllables_remaining: parent.syllables_remaining - c.syllables,
            context: self.trim_context(context),
            window: [c.tag, parent.window[0]],
            score,
        }
    }

    /// Up to `keep` best complete lines ending in `rhyme_word`, best first.
    ///
    /// Each step extends every beam state by one word and keeps the `width`
    /// best results, merging states that agree on remaining syllables, model
    /// context and tag window. Lines that reach the first syllable are closed
    /// with the line-start term and collected outside the beam. Ties go to
    /// the lexicographically smaller word sequence.
    pub fn beam_search_line(
        &self,
        rhyme_word: &str,
        variant: u32,
        width: usize,
        keep: usize,
    ) -> Result<Vec<LineDraft>, SearchError> {
        if width == 0 || keep == 0 {
            return Err(SearchError::Width);
        }
        let start = self.initial_state(rhyme_word, variant)?;
        let mut finished: Vec<Finished> = Vec::new();
        let mut beam = Vec::new();
        if start.syllables_remaining == 0 {
            let mut ctx = start.context.clone();
            ctx.push(LINE_START_ID);
            let score = start.score + self.lm.log_prob_id(LINE_START_ID, &start.context);
            if !self.index.forbidden(slot(Tag::LineStart), start.window[0], start.window[1]) {
                self.offer(&mut finished, keep, score, &start.reversed, None);
            }
        } else {
            beam.push(start);
        }

        let mut scores = Vec::new();
        let mut expansions: Vec<Expansion> = Vec::new();
        let mut seen: FxHashSet<(u8, Vec<TokenId>, [TagSlot; 2])> = FxHashSet::default();
        while !beam.is_empty() {
            expansions.clear();
            for (pi, state) in beam.iter().enumerate() {
                let e = state.syllables_remaining as usize - 1;
                let list = &self.index.by_end[e];
                self.lm.log_probs(&state.context, &self.index.ids_by_end[e], &mut scores);
                for (ci, c) in list.iter().enumerate() {
                    if !self.admissible(state, c) {
                        continue;
                    }
                    let score = state.score + scores[ci];
                    if c.syllables == state.syllables_remaining {
                        let mut ctx = state.context.clone();
                        ctx.push(c.word);
                        let ctx = self.trim_context(ctx);
                        let total = score + self.lm.log_prob_id(LINE_START_ID, &ctx);
                        self.offer(&mut finished, keep, total, &state.reversed, Some((c.word, c.variant)));
                    } else {
                        expansions.push(Expansion {
                            score,
                            parent: pi as u32,
                            cand: ci as u32,
                        });
                    }
                }
            }
            beam = self.select(&beam, &expansions, width, &mut seen);
        }

        if finished.is_empty() {
            return Err(SearchError::NoLine(rhyme_word.to_string()));
        }
        finished.sort_by(finished_order);
        let vocab = self.lm.vocabulary();
        let key: RhymeKey = self
            .pronunciation(rhyme_word, variant)
            .expect("checked in initial_state")
            .rhyme_key();
        Ok(finished
            .into_iter()
            .map(|f| LineDraft {
                words: f.surface.iter().map(|&(id, _)| vocab.token(id).to_string()).collect(),
                variants: f.surface.iter().map(|&(_, v)| v).collect(),
                score: f.score,
                rhyme_word: rhyme_word.to_string(),
                rhyme_key: key.to_string(),
            })
            .collect())
    }

    /// Adds a finished line to the bounded top-`keep` pool, one entry per word sequence.
    fn offer(
        &self,
        pool: &mut Vec<Finished>,
        keep: usize,
        score: f64,
        reversed: &[(TokenId, u32)],
        first: Option<(TokenId, u32)>,
    ) {
        if pool.len() >= keep {
            let worst = pool.iter().map(|f| f.score).fold(f64::INFINITY, f64::min);
            if score < worst {
                return;
            }
        }
        let surface: Vec<(TokenId, u32)> = first
            .into_iter()
            .chain(reversed.iter().rev().copied())
            .collect();
        let cand = Finished { score, surface };
        if let Some(i) = pool
            .iter()
            .position(|f| f.surface.iter().map(|x| x.0).eq(cand.surface.iter().map(|x| x.0)))
        {
            if finished_order(&cand, &pool[i]) == Ordering::Less {
                pool[i] = cand;
            }
            return;
        }
        pool.push(cand);
        if pool.len() > keep {
            pool.sort_by(finished_order);
            pool.truncate(keep);
        }
    }

    fn select(
        &self,
        beam: &[SearchState],
        expansions: &[Expansion],
        width: usize,
        seen: &mut FxHashSet<(u8, Vec<TokenId>, [TagSlot; 2])>,
    ) -> Vec<SearchState> {
        if expansions.is_empty() {
            return Vec::new();
        }
        // Rank parents by their word sequence so ties can be broken lexicographically.
        let mut order: Vec<usize> = (0..beam.len()).collect();
        order.sort_by(|&a, &b| beam[a].surface_ids().cmp(beam[b].surface_ids()));
        let mut rank = vec![0u32; beam.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
        }
        let candidate = |e: &Expansion| {
            let s = beam[e.parent as usize].syllables_remaining as usize;
            self.index.by_end[s - 1][e.cand as usize]
        };
        let cmp = |a: &Expansion, b: &Expansion| {
            b.score.total_cmp(&a.score).then_with(|| {
                let (ca, cb) = (candidate(a), candidate(b));
                ca.word
                    .cmp(&cb.word)
                    .then(rank[a.parent as usize].cmp(&rank[b.parent as usize]))
                    .then(ca.variant.cmp(&cb.variant))
            })
        };

        let mut pool: Vec<Expansion> = expansions.to_vec();
        let mut head = (width * 4).min(pool.len());
        loop {
            if head < pool.len() {
                pool.select_nth_unstable_by(head - 1, cmp);
            }
            pool[..head].sort_by(cmp);
            seen.clear();
            let mut next = Vec::with_capacity(width);
            for e in &pool[..head] {
                let parent = &beam[e.parent as usize];
                let state = self.extend(parent, &candidate(e), e.score);
                let (r, ctx, w) = state.key();
                if seen.insert((r, ctx.to_vec(), w)) {
                    next.push(state);
                    if next.len() == width {
                        return next;
                    }
                }
            }
            if head == pool.len() {
                return next;
            }
            head = pool.len();
        }
    }
}

/// Draws one of the top [`SAMPLE_POOL`] drafts (drafts must be sorted best first).
pub fn sample_line<R: Rng + ?Sized>(drafts: &[LineDraft], mode: SampleMode, rng: &mut R) -> Option<LineDraft> {
    let top = &drafts[..drafts.len().min(SAMPLE_POOL)];
    if top.is_empty() {
        return None;
    }
    let i = match mode {
        SampleMode::Uniform => rng.gen_range(0..top.len()),
        SampleMode::ScoreProportional => {
            let best = top.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = top.iter().map(|d| (d.score - best).exp()).collect();
            let total: f64 = weights.iter().sum();
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            weights
                .iter()
                .position(|w| {
                    acc += w;
                    target < acc
                })
                .unwrap_or(top.len() - 1)
        }
    };
    Some(top[i].clone())
}
