//! Rhyme pairs, their topic-weighted distribution and rhyme-plan sampling.
//!
//! Pairs are grouped by rhyme key. Drawing a pair and then discarding every
//! pair with the same key is the same as drawing a key in proportion to its
//! group's total mass, drawing a pair within the group, and dropping the
//! group. The sampler works that way so a discard costs nothing.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::embedding::{cosine, EmbeddingTable, TopicVector};
use crate::form::RhymeScheme;
use crate::phonodict::{fits_at, PronouncingDict, Relaxations, RhymeKey, StressPattern};

#[derive(Debug, Error, PartialEq)]
pub enum RhymeError {
    #[error("only {found} distinct rhyme sounds available, {required} needed")]
    TooFewKeys { found: usize, required: usize },
    #[error("no rhyme pairs")]
    NoPairs,
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("rhyme scheme {0} does not give every letter exactly two lines")]
    UnpairedScheme(String),
    #[error("rhyme pairs exhausted before letter {0} was filled")]
    Exhausted(char),
}

/// A line-final-capable word under one pronunciation variant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhymeWord {
    pub word: String,
    pub variant: u32,
    /// Cosine of the word's vector to the topic.
    pub cosine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhymePair {
    pub word_a: RhymeWord,
    pub word_b: RhymeWord,
    pub key: RhymeKey,
    /// Larger of the two members' topic cosines.
    pub similarity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct PairRef {
    a: u32,
    b: u32,
}

/// A set of rhyme pairs stored by member index.
#[derive(Clone, Debug, Default)]
pub struct RhymePairs {
    words: Vec<RhymeWord>,
    keys: Vec<RhymeKey>,
    /// Key index of every word.
    word_key: Vec<u32>,
    pairs: Vec<PairRef>,
}

impl RhymePairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, index: usize) -> RhymePair {
        let p = self.pairs[index];
        let (a, b) = (&self.words[p.a as usize], &self.words[p.b as usize]);
        RhymePair {
            word_a: a.clone(),
            word_b: b.clone(),
            key: self.keys[self.word_key[p.a as usize] as usize].clone(),
            similarity: a.cosine.max(b.cosine),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = RhymePair> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn similarity(&self, index: usize) -> f64 {
        let p = self.pairs[index];
        self.words[p.a as usize]
            .cosine
            .max(self.words[p.b as usize].cosine)
    }

    fn key_index(&self, index: usize) -> usize {
        self.word_key[self.pairs[index].a as usize] as usize
    }

    pub fn distinct_keys(&self) -> usize {
        self.pairs
            .iter()
            .map(|p| self.word_key[p.a as usize])
            .collect::<HashSet<_>>()
            .len()
    }

    /// Builds a set from explicit pairs. Members are identified by
    /// `(word, variant)`; both members of a pair must carry the pair's key.
    pub fn from_pairs(pairs: Vec<RhymePair>) -> Self {
        let mut out = RhymePairs::default();
        let mut word_index: BTreeMap<(String, u32), u32> = BTreeMap::new();
        let mut key_index: BTreeMap<RhymeKey, u32> = BTreeMap::new();
        for pair in pairs {
            let k = *key_index.entry(pair.key.clone()).or_insert_with(|| {
                out.keys.push(pair.key.clone());
                out.keys.len() as u32 - 1
            });
            let mut intern = |w: RhymeWord| {
                *word_index
                    .entry((w.word.clone(), w.variant))
                    .or_insert_with(|| {
                        out.words.push(w);
                        out.word_key.push(k);
                        out.words.len() as u32 - 1
                    })
            };
            let a = intern(pair.word_a);
            let b = intern(pair.word_b);
            out.pairs.push(PairRef { a, b });
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct RhymeOptions {
    pub template: StressPattern,
    pub relax: Relaxations,
    /// Reject pairs whose final syllables share an onset, as in `bear`/`bare`.
    pub distinct_onsets: bool,
    /// Fewest distinct keys that must survive (one per scheme letter).
    pub required_keys: usize,
}

impl Default for RhymeOptions {
    fn default() -> Self {
        RhymeOptions {
            template: StressPattern::iambic_pentameter(),
            relax: Relaxations::default(),
            distinct_onsets: false,
            required_keys: 7,
        }
    }
}

/// All unordered pairs of distinct words that can end a line and share a
/// rhyme key. A word with several line-final pronunciations joins one group
/// per distinct key, through its lowest-numbered variant for that key.
pub fn enumerate_pairs<S: AsRef<str>>(
    dict: &PronouncingDict,
    vocab: &[S],
    topic: &TopicVector,
    table: &EmbeddingTable,
    options: &RhymeOptions,
) -> Result<RhymePairs, RhymeError> {
    let end = options.template.len() - 1;
    let mut words: Vec<&str> = vocab.iter().map(AsRef::as_ref).collect();
    words.sort_unstable();
    words.dedup();

    let mut groups: BTreeMap<RhymeKey, Vec<(RhymeWord, Vec<crate::phonodict::Arpabet>)>> =
        BTreeMap::new();
    for word in words {
        let (Some(prons), Some(vector)) = (dict.lookup(word), table.get(word)) else {
            continue;
        };
        let Ok(cos) = cosine(&topic.values, vector) else {
            continue;
        };
        let mut seen_keys = Vec::new();
        for p in prons.iter().filter(|p| fits_at(p, &options.template, end, options.relax)) {
            let key = p.rhyme_key();
            if seen_keys.contains(&key) {
                continue;
            }
            seen_keys.push(key.clone());
            let member = RhymeWord {
                word: word.to_string(),
                variant: p.variant,
                cosine: cos,
            };
            groups.entry(key).or_default().push((member, p.final_onset()));
        }
    }

    let mut out = RhymePairs::default();
    for (key, members) in groups {
        if members.len() < 2 {
            continue;
        }
        let k = out.keys.len() as u32;
        let base = out.words.len() as u32;
        let mut any = false;
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                if options.distinct_onsets && members[i].1 == members[j].1 {
                    continue;
                }
                out.pairs.push(PairRef {
                    a: base + i as u32,
                    b: base + j as u32,
                });
                any = true;
            }
        }
        if any {
            out.keys.push(key);
            for (m, _) in members {
                out.words.push(m);
                out.word_key.push(k);
            }
        }
    }
    let found = out.keys.len();
    if found < options.required_keys {
        return Err(RhymeError::TooFewKeys {
            found,
            required: options.required_keys,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct KeyGroup {
    pairs: Vec<u32>,
    mass: f64,
}

/// Softmax of pair similarities, with pairs grouped by rhyme key.
#[derive(Clone, Debug)]
pub struct PairDistribution {
    pairs: RhymePairs,
    probabilities: Vec<f64>,
    groups: Vec<KeyGroup>,
}

impl PairDistribution {
    pub fn pairs(&self) -> &RhymePairs {
        &self.pairs
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// `p_i = exp(s_i / T) / sum_j exp(s_j / T)`, shifted by the largest
/// similarity before exponentiation.
pub fn build_distribution(pairs: RhymePairs, temperature: f64) -> Result<PairDistribution, RhymeError> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(RhymeError::Temperature(temperature));
    }
    if pairs.is_empty() {
        return Err(RhymeError::NoPairs);
    }
    let max = (0..pairs.len())
        .map(|i| pairs.similarity(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = (0..pairs.len())
        .map(|i| ((pairs.similarity(i) - max) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let mut groups = vec![
        KeyGroup {
            pairs: Vec::new(),
            mass: 0.0
        };
        pairs.keys.len()
    ];
    for (i, &p) in probabilities.iter().enumerate() {
        let g = &mut groups[pairs.key_index(i)];
        g.pairs.push(i as u32);
        g.mass += p;
    }
    Ok(PairDistribution {
        pairs,
        probabilities,
        groups,
    })
}

/// One rhyme word placed on one line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhymeChoice {
    pub word: String,
    pub variant: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LetterAssignment {
    pub letter: char,
    pub pair: usize,
    pub key: RhymeKey,
    /// The letter's two lines, ascending.
    pub lines: [usize; 2],
    /// Words for `lines[0]` and `lines[1]`.
    pub words: [RhymeChoice; 2],
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhymePlan {
    pub scheme: String,
    pub letters: Vec<LetterAssignment>,
}

impl RhymePlan {
    /// Rhyme word for line `index`.
    pub fn line_word(&self, index: usize) -> &RhymeChoice {
        self.letters
            .iter()
            .find_map(|a| a.lines.iter().position(|&l| l == index).map(|i| &a.words[i]))
            .expect("plan covers every line")
    }

    pub fn line_count(&self) -> usize {
        self.letters.len() * 2
    }
}

/// Sequential draw-and-discard over a [`PairDistribution`].
///
/// Keeps which key groups are still live so a letter can be redrawn after a
/// dead-end line search without disturbing the other letters' keys.
pub struct PlanSampler<'d> {
    dist: &'d PairDistribution,
    live: Vec<bool>,
    excluded: HashSet<u32>,
    excluded_mass: Vec<f64>,
}

impl<'d> PlanSampler<'d> {
    pub fn new(dist: &'d PairDistribution) -> Self {
        let n = dist.groups.len();
        PlanSampler {
            dist,
            live: vec![true; n],
            excluded: HashSet::new(),
            excluded_mass: vec![0.0; n],
        }
    }

    fn remaining(&self, g: usize) -> f64 {
        if !self.live[g] {
            return 0.0;
        }
        let group = &self.dist.groups[g];
        let left = group.pairs.iter().any(|p| !self.excluded.contains(p));
        if left {
            (group.mass - self.excluded_mass[g]).max(0.0)
        } else {
            0.0
        }
    }

    /// Probability that the next draw returns each pair; pairs of retired keys
    /// and rejected pairs get 0.
    pub fn probabilities(&self) -> Vec<f64> {
        let masses: Vec<f64> = (0..self.live.len()).map(|g| self.remaining(g)).collect();
        let total: f64 = masses.iter().sum();
        let mut out = vec![0.0; self.dist.len()];
        if !(total > 0.0) {
            return out;
        }
        for (g, group) in self.dist.groups.iter().enumerate() {
            if masses[g] == 0.0 {
                continue;
            }
            for &p in group.pairs.iter().filter(|p| !self.excluded.contains(p)) {
                out[p as usize] = self.dist.probabilities[p as usize] / total;
            }
        }
        out
    }

    /// Draws one pair and retires its key. Returns the pair index.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<usize> {
        let masses: Vec<f64> = (0..self.live.len()).map(|g| self.remaining(g)).collect();
        let g = pick(&masses, rng.gen::<f64>())?;
        let group = &self.dist.groups[g];
        let weights: Vec<f64> = group
            .pairs
            .iter()
            .map(|p| {
                if self.excluded.contains(p) {
                    0.0
                } else {
                    self.dist.probabilities[*p as usize]
                }
            })
            .collect();
        let i = pick(&weights, rng.gen::<f64>())?;
        self.live[g] = false;
        Some(group.pairs[i] as usize)
    }

    /// Gives up on `pair`: its key becomes drawable again, minus that pair.
    pub fn reject(&mut self, pair: usize) {
        let g = self.dist.pairs.key_index(pair);
        if self.excluded.insert(pair as u32) {
            self.excluded_mass[g] += self.dist.probabilities[pair];
        }
        self.live[g] = true;
    }

    /// Draws a pair for `letter` and assigns its members to the letter's lines
    /// by a fair coin.
    pub fn assign<R: Rng + ?Sized>(
        &mut self,
        letter: char,
        lines: [usize; 2],
        rng: &mut R,
    ) -> Result<LetterAssignment, RhymeError> {
        let pair = self.draw(rng).ok_or(RhymeError::Exhausted(letter))?;
        let p = self.dist.pairs.get(pair);
        let a = RhymeChoice {
            word: p.word_a.word,
            variant: p.word_a.variant,
        };
        let b = RhymeChoice {
            word: p.word_b.word,
            variant: p.word_b.variant,
        };
        let words = if rng.gen::<bool>() { [a, b] } else { [b, a] };
        Ok(LetterAssignment {
            letter,
            pair,
            key: p.key,
            lines,
            words,
            similarity: p.similarity,
        })
    }
}

/// Index drawn from unnormalised `weights` at uniform point `u` in [0, 1).
/// Falls back to the last positive weight when rounding leaves `u` past the end.
fn pick(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}

/// Draws one pair per letter of `scheme`, in order of first appearance.
pub fn sample_plan<R: Rng + ?Sized>(
    dist: &PairDistribution,
    scheme: &RhymeScheme,
    rng: &mut R,
) -> Result<RhymePlan, RhymeError> {
    let mut sampler = PlanSampler::new(dist);
    sample_plan_with(&mut sampler, scheme, rng)
}

/// As [`sample_plan`], leaving the sampler available for redraws.
pub fn sample_plan_with<R: Rng + ?Sized>(
    sampler: &mut PlanSampler<'_>,
    scheme: &RhymeScheme,
    rng: &mut R,
) -> Result<RhymePlan, RhymeError> {
    if !scheme.is_paired() {
        return Err(RhymeError::UnpairedScheme(scheme.to_string()));
    }
    let mut letters = Vec::new();
    for letter in scheme.letters() {
        let l = scheme.lines_for(letter);
        letters.push(sampler.assign(letter, [l[0], l[1]], rng)?);
    }
    Ok(RhymePlan {
        scheme: scheme.to_string(),
        letters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::topic_vector;
    use crate::phonodict::{parse_cmu_dict, Pronunciation};
    use crate::rng::substream;

    fn key(phones: &str) -> RhymeKey {
        Pronunciation::from_phones("x", 0, phones).unwrap().rhyme_key()
    }

    fn pair(a: &str, b: &str, k: &str, sim: f64) -> RhymePair {
        let w = |word: &str| RhymeWord {
            word: word.into(),
            variant: 0,
            cosine: sim,
        };
        RhymePair {
            word_a: w(a),
            word_b: w(b),
            key: key(k),
            similarity: sim,
        }
    }

    fn setup(words: &[&str]) -> (PronouncingDict, EmbeddingTable) {
        let dict = parse_cmu_dict(
            "game G EY1 M\nname N EY1 M\nfame F EY1 M\ndoom D UW1 M\nroam R OW1 M\nthe DH AH0\n"
                .as_bytes(),
        )
        .unwrap();
        let table = EmbeddingTable::from_vectors(
            words
                .iter()
                .enumerate()
                .map(|(i, w)| (w.to_string(), vec![1.0, i as f64 * 0.1])),
        )
        .unwrap();
        (dict, table)
    }

    fn opts(required_keys: usize) -> RhymeOptions {
        RhymeOptions {
            required_keys,
            ..RhymeOptions::default()
        }
    }

    #[test]
    fn game_and_name_pair() {
        let (dict, table) = setup(&["game", "name"]);
        let topic = topic_vector(&["game"], &table).unwrap();
        let pairs = enumerate_pairs(&dict, &["game", "name"], &topic, &table, &opts(1)).unwrap();
        assert_eq!(pairs.len(), 1);
        let p = pairs.get(0);
        assert_eq!((p.word_a.word.as_str(), p.word_b.word.as_str()), ("game", "name"));
        assert_eq!(p.key.to_string(), "EY M");
        assert_eq!(p.similarity, 1.0);
    }

    #[test]
    fn doom_and_roam_do_not_pair() {
        let (dict, table) = setup(&["doom", "roam"]);
        let topic = topic_vector(&["doom"], &table).unwrap();
        let pairs = enumerate_pairs(&dict, &["doom", "roam"], &topic, &table, &opts(0)).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(
            enumerate_pairs(&dict, &["doom", "roam"], &topic, &table, &opts(7)).unwrap_err(),
            RhymeError::TooFewKeys { found: 0, required: 7 }
        );
    }

    #[test]
    fn similarity_is_max_member_cosine() {
        let (dict, table) = setup(&["game", "name", "fame", "the"]);
        let topic = TopicVector {
            values: vec![0.0, 1.0],
            source_tokens: vec![],
            dropped: vec![],
        };
        let pairs =
            enumerate_pairs(&dict, &["game", "name", "fame", "the"], &topic, &table, &opts(1)).unwrap();
        assert_eq!(pairs.len(), 3);
        for p in pairs.iter() {
            let ca = cosine(&topic.values, table.get(&p.word_a.word).unwrap()).unwrap();
            let cb = cosine(&topic.values, table.get(&p.word_b.word).unwrap()).unwrap();
            assert_eq!(p.similarity, ca.max(cb));
        }
    }

    #[test]
    fn softmax_examples() {
        let d = build_distribution(
            RhymePairs::from_pairs(vec![pair("a", "b", "EY1 M", 1.0), pair("c", "d", "UW1 M", 0.0)]),
            1.0,
        )
        .unwrap();
        let e = std::f64::consts::E;
        assert!((d.probabilities()[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((d.probabilities()[1] - 1.0 / (e + 1.0)).abs() < 1e-12);

        let d = build_distribution(
            RhymePairs::from_pairs(vec![pair("a", "b", "EY1 M", 0.3), pair("c", "d", "UW1 M", 0.3)]),
            0.1,
        )
        .unwrap();
        assert_eq!(d.probabilities(), &[0.5, 0.5]);

        let d = build_distribution(
            RhymePairs::from_pairs(vec![pair("a", "b", "EY1 M", 0.9), pair("c", "d", "UW1 M", 0.1)]),
            1e-4,
        )
        .unwrap();
        assert!(d.probabilities()[0] > 1.0 - 1e-12);
    }

    #[test]
    fn bad_temperature() {
        let pairs = RhymePairs::from_pairs(vec![pair("a", "b", "EY1 M", 0.3)]);
        for t in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                build_distribution(pairs.clone(), t),
                Err(RhymeError::Temperature(_))
            ));
        }
        assert_eq!(
            build_distribution(RhymePairs::default(), 1.0).unwrap_err(),
            RhymeError::NoPairs
        );
    }

    #[test]
    fn same_key_pairs_never_share_a_plan() {
        let d = build_distribution(
            RhymePairs::from_pairs(vec![
                pair("a", "b", "EY1 M", 0.5),
                pair("c", "e", "EY1 M", 0.5),
                pair("f", "g", "UW1 M", 0.5),
            ]),
            1.0,
        )
        .unwrap();
        let scheme = RhymeScheme::new("AABB").unwrap();
        let mut rng = substream(1, 0);
        for _ in 0..2000 {
            let plan = sample_plan(&d, &scheme, &mut rng).unwrap();
            let mut used: Vec<usize> = plan.letters.iter().map(|l| l.pair).collect();
            used.sort();
            assert_ne!(used, vec![0, 1]);
            assert_ne!(plan.letters[0].key, plan.letters[1].key);
        }
    }

    #[test]
    fn exhausted_distribution_errors() {
        let d = build_distribution(RhymePairs::from_pairs(vec![pair("a", "b", "EY1 M", 0.5)]), 1.0).unwrap();
        let scheme = RhymeScheme::new("AABB").unwrap();
        assert_eq!(
            sample_plan(&d, &scheme, &mut substream(0, 0)).unwrap_err(),
            RhymeError::Exhausted('B')
        );
        let odd = RhymeScheme::new("AAA").unwrap();
        assert!(matches!(
            sample_plan(&d, &odd, &mut substream(0, 0)),
            Err(RhymeError::UnpairedScheme(_))
        ));
    }

    #[test]
    fn reject_restores_key_without_the_pair() {
        let d = build_distribution(
            RhymePairs::from_pairs(vec![pair("a", "b", "EY1 M", 0.9), pair("c", "e", "EY1 M", 0.1)]),
            1.0,
        )
        .unwrap();
        let mut s = PlanSampler::new(&d);
        let mut rng = substream(3, 0);
        let first = s.draw(&mut rng).unwrap();
        assert_eq!(s.draw(&mut rng), None);
        s.reject(first);
        let second = s.draw(&mut rng).unwrap();
        assert_ne!(first, second);
        s.reject(second);
        assert_eq!(s.draw(&mut rng), None);
    }

    #[test]
    fn fixed_seed_fixed_plan() {
        let d = build_distribution(
            RhymePairs::from_pairs(vec![
                pair("a", "b", "EY1 M", 0.9),
                pair("c", "e", "UW1 M", 0.1),
                pair("f", "g", "OW1 M", 0.4),
            ]),
            0.5,
        )
        .unwrap();
        let scheme = RhymeScheme::new("ABAB").unwrap();
        let p1 = sample_plan(&d, &scheme, &mut substream(9, 0)).unwrap();
        let p2 = sample_plan(&d, &scheme, &mut substream(9, 0)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.line_word(0).word, p1.letters[0].words[0].word);
        assert_eq!(p1.line_word(3).word, p1.letters[1].words[1].word);
    }

    #[test]
    fn distinct_onsets_flag() {
        let dict = parse_cmu_dict("bare B EH1 R\nbear B EH1 R\ncare K EH1 R\n".as_bytes()).unwrap();
        let table = EmbeddingTable::from_vectors([
            ("bare", vec![1.0, 0.0]),
            ("bear", vec![1.0, 0.2]),
            ("care", vec![1.0, 0.4]),
        ])
        .unwrap();
        let topic = topic_vector(&["care"], &table).unwrap();
        let words = ["bare", "bear", "care"];
        let all = enumerate_pairs(&dict, &words, &topic, &table, &opts(1)).unwrap();
        assert_eq!(all.len(), 3);
        let strict = RhymeOptions {
            distinct_onsets: true,
            ..opts(1)
        };
        let some = enumerate_pairs(&dict, &words, &topic, &table, &strict).unwrap();
        assert_eq!(some.len(), 2);
        assert!(some.iter().all(|p| (p.word_a.word.as_str(), p.word_b.word.as_str()) != ("bare", "bear")));
    }
}
