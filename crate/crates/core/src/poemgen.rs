//! End-to-end generation: author, rhyme plan, lines, punctuation, lint.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_bundle, tokenize, AuthorBundle, CorpusError, Mode, DEFAULT_VOCABULARY_FLOOR};
use crate::embedding::{load_vectors, topic_vector, EmbeddingError, EmbeddingTable};
use crate::form::Form;
use crate::grammar::{load_rules, load_tag_lexicon, primary_tag, violates, ForbiddenRuleSet, GrammarError, Tag, TagLexicon};
use crate::io::open_text;
use crate::langmodel::{LanguageModel, COMMA, PERIOD};
use crate::linesearch::{sample_line, CandidateIndex, LineDraft, LineSearcher, SampleMode, SearchError};
use crate::lint::{lint_poem, parse_poem, Finding, LintContext};
use crate::phonodict::{parse_cmu_dict, PhonoError, PronouncingDict, Relaxations};
use crate::punctuate::{punctuate, render_line, CommaDistribution, InsertionPoint, PunctError};
use crate::rhymeplan::{
    build_distribution, enumerate_pairs, sample_plan_with, PlanSampler, RhymeError, RhymeOptions, RhymePlan,
};
use crate::rng::{line_stream, substream, PLAN_STREAM, PUNCTUATION_STREAM};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MAX_BEAM_WIDTH: usize = 256;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no author bundles loaded")]
    NoBundles,
    #[error("no bundle for author {0:?}")]
    UnknownAuthor(String),
    #[error("loading {path}: {message}")]
    Resource { path: PathBuf, message: String },
    #[error("topic: {0}")]
    Topic(#[from] EmbeddingError),
    #[error("rhyme plan: {0}")]
    Rhyme(#[from] RhymeError),
    #[error("line search for rhyme {letter} failed after {attempts} attempts: {source}")]
    Line {
        letter: char,
        attempts: usize,
        source: SearchError,
    },
    #[error("punctuation: {0}")]
    Punctuation(#[from] PunctError),
    #[error("lint rejected the poem: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Lint(Vec<Finding>),
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorChoice {
    #[default]
    Random,
    Named(String),
}

impl std::str::FromStr for AuthorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" => Err("empty author".into()),
            "random" => Ok(AuthorChoice::Random),
            name => Ok(AuthorChoice::Named(name.to_string())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub prompt: String,
    pub form: Form,
    pub seed: u64,
    pub beam_width: usize,
    /// Complete lines kept per search; one of the best ten is sampled.
    pub top_k: usize,
    pub temperature: f64,
    /// Comma budget; `None` uses the form's default.
    pub commas: Option<CommaDistribution>,
    pub author: AuthorChoice,
    pub sample_mode: SampleMode,
    pub distinct_onsets: bool,
    /// Extra rhyme pairs tried per letter after a dead-end search.
    pub retries: usize,
    /// Worker threads for line searches; 0 means one per core.
    pub jobs: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            prompt: String::new(),
            form: Form::Sonnet,
            seed: 0,
            beam_width: 20,
            top_k: 10,
            temperature: 0.1,
            commas: None,
            author: AuthorChoice::Random,
            sample_mode: SampleMode::Uniform,
            distinct_onsets: false,
            retries: 3,
            jobs: 0,
        }
    }
}

/// Uniform on 4..=8 commas for a sonnet, scaled by line count otherwise.
pub fn default_commas(form: Form) -> CommaDistribution {
    let scale = form.line_count() as f64 / 14.0;
    let lo = (4.0 * scale).round() as usize;
    let hi = (8.0 * scale).round() as usize;
    CommaDistribution::uniform(lo, hi).expect("lo <= hi")
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let err = |m: &str| Err(GenError::Config(m.to_string()));
        if self.prompt.trim().is_empty() {
            return err("prompt is empty");
        }
        if !(1..=MAX_BEAM_WIDTH).contains(&self.beam_width) {
            return err("beam width must be between 1 and 256");
        }
        if self.top_k == 0 {
            return err("top-k must be at least 1");
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return err("temperature must be positive");
        }
        Ok(())
    }
}

/// File locations of the shared resources and the author bundles.
#[derive(Clone, Debug, Default)]
pub struct ResourcePaths {
    pub dict: PathBuf,
    pub embeddings: PathBuf,
    pub tag_lexicon: PathBuf,
    pub pos_rules: PathBuf,
    pub bundles: Vec<PathBuf>,
}

impl ResourcePaths {
    /// The standard layout under a resource directory; bundles are every
    /// `*.model` file in `models/`.
    pub fn in_dir(dir: &Path) -> Self {
        let mut bundles: Vec<PathBuf> = std::fs::read_dir(dir.join("models"))
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .map(|e| e.path())
                    .filter(|p| p.extension().is_some_and(|x| x == "model"))
                    .collect()
            })
            .unwrap_or_default();
        bundles.sort();
        ResourcePaths {
            dict: dir.join("cmudict/cmudict.dict"),
            embeddings: dir.join("embeddings/vectors.50d.txt.gz"),
            tag_lexicon: dir.join("tags/lexicon.tsv"),
            pos_rules: dir.join("grammar/rules.txt"),
            bundles,
        }
    }
}

fn resource_err(path: &Path, e: impl std::fmt::Display) -> GenError {
    GenError::Resource {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn load_dict(path: &Path) -> Result<PronouncingDict, GenError> {
    let r = open_text(path).map_err(|e| resource_err(path, e))?;
    parse_cmu_dict(r).map_err(|e: PhonoError| resource_err(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, GenError> {
    let r = open_text(path).map_err(|e| resource_err(path, e))?;
    load_vectors(r).map_err(|e| resource_err(path, e))
}

pub fn load_lexicon(path: &Path) -> Result<TagLexicon, GenError> {
    let r = open_text(path).map_err(|e| resource_err(path, e))?;
    load_tag_lexicon(r).map_err(|e: GrammarError| resource_err(path, e))
}

pub fn load_rule_file(path: &Path) -> Result<ForbiddenRuleSet, GenError> {
    let r = open_text(path).map_err(|e| resource_err(path, e))?;
    load_rules(r).map_err(|e: GrammarError| resource_err(path, e))
}

/// Shared immutable inputs for generation.
pub struct Resources {
    pub dict: PronouncingDict,
    pub table: EmbeddingTable,
    pub lexicon: TagLexicon,
    pub rules: ForbiddenRuleSet,
    pub bundles: Vec<AuthorBundle>,
}

impl Resources {
    pub fn load(paths: &ResourcePaths) -> Result<Self, GenError> {
        let dict = load_dict(&paths.dict)?;
        let table = load_embeddings(&paths.embeddings)?;
        let lexicon = load_lexicon(&paths.tag_lexicon)?;
        let rules = load_rule_file(&paths.pos_rules)?;
        let mut bundles = Vec::new();
        for p in &paths.bundles {
            let r = open_text(p).map_err(|e| resource_err(p, e))?;
            let (author, model) = load_bundle(r).map_err(|e: CorpusError| resource_err(p, e))?;
            let b = AuthorBundle::from_model(&author, model, &dict, &table, DEFAULT_VOCABULARY_FLOOR)
                .map_err(|e| resource_err(p, e))?;
            bundles.push(b);
        }
        Ok(Resources {
            dict,
            table,
            lexicon,
            rules,
            bundles,
        })
    }
}

struct PreparedBundle {
    bundle: AuthorBundle,
    index: CandidateIndex,
    /// Generation words that may end a line without breaking a tag rule.
    rhyme_vocab: Vec<String>,
}

/// Generator with per-author search indexes built once.
pub struct Generator {
    dict: PronouncingDict,
    table: EmbeddingTable,
    lexicon: TagLexicon,
    rules: ForbiddenRuleSet,
    relax: Relaxations,
    bundles: Vec<PreparedBundle>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Retry {
    pub letter: char,
    pub rejected: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PoemLine {
    pub text: String,
    /// Lowercase tokens with punctuation.
    pub tokens: Vec<String>,
    pub words: Vec<String>,
    pub variants: Vec<u32>,
    pub score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Poem {
    pub version: &'static str,
    pub prompt: String,
    pub form: Form,
    pub scheme: String,
    pub author: String,
    pub seed: u64,
    pub beam_width: usize,
    pub top_k: usize,
    pub temperature: f64,
    pub relaxations: Relaxations,
    pub lines: Vec<PoemLine>,
    pub rhyme_plan: RhymePlan,
    pub retries: Vec<Retry>,
    pub comma_budget: usize,
    pub commas: Vec<InsertionPoint>,
}

impl Poem {
    /// The poem as plain text, one line per row.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&l.text);
            s.push('\n');
        }
        s
    }

    pub fn variants(&self) -> Vec<Vec<u32>> {
        self.lines.iter().map(|l| l.variants.clone()).collect()
    }
}

impl Generator {
    pub fn new(resources: Resources, relax: Relaxations) -> Result<Self, GenError> {
        let Resources {
            dict,
            table,
            lexicon,
            rules,
            mut bundles,
        } = resources;
        if bundles.is_empty() {
            return Err(GenError::NoBundles);
        }
        bundles.sort_by(|a, b| a.author.cmp(&b.author));
        if let Some(w) = bundles.windows(2).find(|w| w[0].author == w[1].author) {
            return Err(GenError::Config(format!("two bundles for author {:?}", w[0].author)));
        }
        let template = Form::Sonnet.template();
        let prepared = bundles
            .into_iter()
            .map(|bundle| {
                let index = CandidateIndex::new(
                    &bundle.vocabulary,
                    bundle.model.vocabulary(),
                    &dict,
                    &lexicon,
                    &rules,
                    &template,
                    relax,
                );
                let rhyme_vocab = bundle
                    .vocabulary
                    .iter()
                    .filter(|w| !violates(&rules, &[primary_tag(&lexicon, w), Tag::LineEnd]))
                    .cloned()
                    .collect();
                PreparedBundle {
                    bundle,
                    index,
                    rhyme_vocab,
                }
            })
            .collect();
        Ok(Generator {
            dict,
            table,
            lexicon,
            rules,
            relax,
            bundles: prepared,
        })
    }

    pub fn authors(&self) -> Vec<&str> {
        self.bundles.iter().map(|b| b.bundle.author.as_str()).collect()
    }

    pub fn relaxations(&self) -> Relaxations {
        self.relax
    }

    pub fn dict(&self) -> &PronouncingDict {
        &self.dict
    }

    pub fn lexicon(&self) -> &TagLexicon {
        &self.lexicon
    }

    pub fn rules(&self) -> &ForbiddenRuleSet {
        &self.rules
    }

    /// Generation vocabulary of `author`.
    pub fn vocabulary(&self, author: &str) -> Option<&[String]> {
        self.bundles
            .iter()
            .find(|b| b.bundle.author == author)
            .map(|b| b.bundle.vocabulary.as_slice())
    }

    pub fn generate(&self, config: &GenerationConfig) -> Result<Poem, GenError> {
        config.validate()?;
        let mut plan_rng = substream(config.seed, PLAN_STREAM);
        let prepared = match &config.author {
            AuthorChoice::Random => &self.bundles[plan_rng.gen_range(0..self.bundles.len())],
            AuthorChoice::Named(name) => self
                .bundles
                .iter()
                .find(|b| &b.bundle.author == name)
                .ok_or_else(|| GenError::UnknownAuthor(name.clone()))?,
        };
        let model = &prepared.bundle.model;

        let prompt: Vec<String> = tokenize(&config.prompt, Mode::Verse)
            .map_err(|_| GenError::Config("prompt has no words".into()))?
            .into_iter()
            .flatten()
            .filter(|t| t != COMMA && t != PERIOD)
            .collect();
        let topic = topic_vector(&prompt, &self.table)?;

        let scheme = config.form.scheme();
        let options = RhymeOptions {
            template: config.form.template(),
            relax: self.relax,
            distinct_onsets: config.distinct_onsets,
            required_keys: scheme.letters().len(),
        };
        let pairs = enumerate_pairs(&self.dict, &prepared.rhyme_vocab, &topic, &self.table, &options)?;
        let dist = build_distribution(pairs, config.temperature)?;
        let mut sampler = PlanSampler::new(&dist);
        let mut plan = sample_plan_with(&mut sampler, &scheme, &mut plan_rng)?;

        let searcher = LineSearcher::new(model, &self.dict, &self.lexicon, &prepared.index);
        let search = |line: usize, plan: &RhymePlan| -> Result<LineDraft, SearchError> {
            let rhyme = plan.line_word(line);
            let drafts = searcher.beam_search_line(&rhyme.word, rhyme.variant, config.beam_width, config.top_k)?;
            let mut rng = substream(config.seed, line_stream(line));
            Ok(sample_line(&drafts, config.sample_mode, &mut rng).expect("drafts are non-empty"))
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| GenError::Config(format!("worker pool: {e}")))?;

        let n = scheme.line_count();
        let mut drafts: Vec<Option<LineDraft>> = vec![None; n];
        let mut pending: Vec<usize> = (0..n).collect();
        let mut attempts = vec![0usize; plan.letters.len()];
        let mut retries = Vec::new();
        while !pending.is_empty() {
            let results: Vec<(usize, Result<LineDraft, SearchError>)> =
                pool.install(|| pending.par_iter().map(|&i| (i, search(i, &plan))).collect());
            let mut failed: Vec<(usize, SearchError)> = Vec::new();
            for (i, r) in results {
                match r {
                    Ok(d) => drafts[i] = Some(d),
                    Err(e) => {
                        let li = plan.letters.iter().position(|a| a.lines.contains(&i)).expect("line in plan");
                        if !failed.iter().any(|(l, _)| *l == li) {
                            failed.push((li, e));
                        }
                    }
                }
            }
            failed.sort_by_key(|(l, _)| *l);
            pending.clear();
            for (li, err) in failed {
                attempts[li] += 1;
                let letter = plan.letters[li].letter;
                if attempts[li] > config.retries {
                    return Err(GenError::Line {
                        letter,
                        attempts: attempts[li],
                        source: err,
                    });
                }
                let old = &plan.letters[li];
                log::info!("rhyme {letter}: {err}; drawing another pair");
                retries.push(Retry {
                    letter,
                    rejected: format!("{}/{}", old.words[0].word, old.words[1].word),
                    reason: err.to_string(),
                });
                sampler.reject(old.pair);
                let lines = old.lines;
                plan.letters[li] = sampler.assign(letter, lines, &mut plan_rng)?;
                pending.extend(lines);
            }
            pending.sort_unstable();
        }
        let drafts: Vec<LineDraft> = drafts.into_iter().map(|d| d.expect("every line searched")).collect();

        let commas = config.commas.clone().unwrap_or_else(|| default_commas(config.form));
        let bare: Vec<Vec<String>> = drafts.iter().map(|d| d.words.clone()).collect();
        let mut punct_rng = substream(config.seed, PUNCTUATION_STREAM);
        let punctuated = punctuate(&bare, config.form.period_lines(), model, &commas, &mut punct_rng)?;

        let lines: Vec<PoemLine> = drafts
            .into_iter()
            .zip(punctuated.lines)
            .map(|(d, tokens)| PoemLine {
                text: render_line(&tokens),
                tokens,
                words: d.words,
                variants: d.variants,
                score: d.score,
            })
            .collect();
        let poem = Poem {
            version: VERSION,
            prompt: config.prompt.clone(),
            form: config.form,
            scheme: scheme.to_string(),
            author: prepared.bundle.author.clone(),
            seed: config.seed,
            beam_width: config.beam_width,
            top_k: config.top_k,
            temperature: config.temperature,
            relaxations: self.relax,
            lines,
            rhyme_plan: plan,
            retries,
            comma_budget: punctuated.budget,
            commas: punctuated.commas,
        };
        self.check(&poem)?;
        Ok(poem)
    }

    /// Lints a generated poem against its recorded pronunciations.
    pub fn check(&self, poem: &Poem) -> Result<(), GenError> {
        let ctx = LintContext {
            dict: &self.dict,
            scheme: poem.form.scheme(),
            template: poem.form.template(),
            relax: poem.relaxations,
            grammar: Some((&self.lexicon, &self.rules)),
        };
        let report = lint_poem(&parse_poem(&poem.text()), &ctx, Some(&poem.variants()));
        if report.findings.is_empty() {
            Ok(())
        } else {
            Err(GenError::Lint(report.findings))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    use crate::langmodel::{reversed_sequence, NGramModel};
    use crate::phonodict::Pronunciation;

    const FILLERS: [&str; 8] = ["ba", "da", "ga", "ka", "la", "ma", "na", "pa"];
    const RHYMES: [(&str, &str); 8] = [
        ("bite", "B AY1 T"),
        ("kite", "K AY1 T"),
        ("bone", "B OW1 N"),
        ("cone", "K OW1 N"),
        ("beam", "B IY1 M"),
        ("seem", "S IY1 M"),
        ("zoo", "Z UW1"),
        ("too", "T UW1"),
    ];

    /// Nouns everywhere except zoo/too, verbs that nothing may precede, so
    /// any line ending in them is a dead end.
    fn generator() -> Generator {
        let mut dict = PronouncingDict::default();
        for (i, w) in FILLERS.iter().enumerate() {
            let onset = ["B", "D", "G", "K", "L", "M", "N", "P"][i];
            dict.insert(Pronunciation::from_phones(w, 0, &format!("{onset} AA1")).unwrap()).unwrap();
        }
        for (w, phones) in RHYMES {
            dict.insert(Pronunciation::from_phones(w, 0, phones).unwrap()).unwrap();
        }
        let mut lexicon = TagLexicon::default();
        lexicon.insert("zoo", vec![(Tag::VB, 1)]);
        lexicon.insert("too", vec![(Tag::VB, 1)]);
        let rules = ForbiddenRuleSet::new(vec![vec![Tag::NN, Tag::VB], vec![Tag::VB, Tag::VB]]).unwrap();

        // the prompt word "sun" has a vector but no pronunciation
        let vectors = FILLERS
            .iter()
            .map(|w| (w.to_string(), vec![0.0, 1.0]))
            .chain([("sun".to_string(), vec![1.0, 0.0])])
            .chain(RHYMES.iter().map(|(w, _)| {
                let v = if *w == "zoo" || *w == "too" { vec![1.0, 0.0] } else { vec![0.6, 0.8] };
                (w.to_string(), v)
            }));
        let table = EmbeddingTable::from_vectors(vectors).unwrap();

        let mut lines = Vec::new();
        for i in 0..48 {
            let mut line: Vec<&str> = (0..9).map(|j| FILLERS[(i * 3 + j * 5) % 8]).collect();
            if i % 3 == 0 {
                line.insert(4, COMMA);
            }
            line.push(RHYMES[i % 8].0);
            lines.push(reversed_sequence(&line));
        }
        let model = NGramModel::train(&lines, 3, 0.5).unwrap();
        let bundle = AuthorBundle::from_model("tiny", model, &dict, &table, 1).unwrap();
        let resources = Resources {
            dict,
            table,
            lexicon,
            rules,
            bundles: vec![bundle],
        };
        Generator::new(resources, Relaxations::default()).unwrap()
    }

    fn config(seed: u64) -> GenerationConfig {
        GenerationConfig {
            prompt: "sun".into(),
            form: Form::Short,
            seed,
            ..GenerationConfig::default()
        }
    }

    #[test]
    fn dead_end_pair_is_redrawn() {
        let gen = generator();
        let mut redrawn = 0;
        for seed in 0..10 {
            let poem = gen.generate(&config(seed)).unwrap();
            assert_eq!(poem.lines.len(), 6);
            assert!(poem.lines.iter().all(|l| !["zoo", "too"].contains(&l.words.last().unwrap().as_str())));
            for r in &poem.retries {
                assert!(r.rejected == "zoo/too" || r.rejected == "too/zoo", "{r:?}");
                redrawn += 1;
            }
            let keys: HashSet<String> = poem.rhyme_plan.letters.iter().map(|a| a.key.to_string()).collect();
            assert_eq!(keys.len(), 3);
        }
        assert!(redrawn > 0);
    }

    #[test]
    fn retries_are_bounded() {
        let gen = generator();
        let failing = (0..10)
            .find(|&s| !gen.generate(&config(s)).unwrap().retries.is_empty())
            .unwrap();
        let err = gen
            .generate(&GenerationConfig {
                retries: 0,
                ..config(failing)
            })
            .unwrap_err();
        assert!(matches!(err, GenError::Line { attempts: 1, .. }), "{err}");
        assert!(err.to_string().starts_with("line search"));
    }

    #[test]
    fn same_seed_any_thread_count() {
        let gen = generator();
        let one = gen.generate(&GenerationConfig { jobs: 1, ..config(3) }).unwrap();
        let four = gen.generate(&GenerationConfig { jobs: 4, ..config(3) }).unwrap();
        assert_eq!(one.text(), four.text());
        assert_eq!(one.rhyme_plan, four.rhyme_plan);
    }

    #[test]
    fn stanza_ends_take_periods() {
        let poem = generator().generate(&config(1)).unwrap();
        for (i, l) in poem.lines.iter().enumerate() {
            assert_eq!(l.text.ends_with('.'), i == 3 || i == 5, "{}", l.text);
        }
    }

    #[test]
    fn config_errors() {
        let gen = generator();
        let bad = |c: GenerationConfig| gen.generate(&c).unwrap_err();
        assert!(matches!(bad(GenerationConfig { beam_width: 0, ..config(0) }), GenError::Config(_)));
        assert!(matches!(bad(GenerationConfig { beam_width: 257, ..config(0) }), GenError::Config(_)));
        assert!(matches!(bad(GenerationConfig { temperature: 0.0, ..config(0) }), GenError::Config(_)));
        assert!(matches!(bad(GenerationConfig { prompt: " ".into(), ..config(0) }), GenError::Config(_)));
        assert!(matches!(
            bad(GenerationConfig {
                author: AuthorChoice::Named("nobody".into()),
                ..config(0)
            }),
            GenError::UnknownAuthor(_)
        ));
        assert!(matches!(bad(GenerationConfig { prompt: "qqq".into(), ..config(0) }), GenError::Topic(_)));
    }

    #[test]
    fn default_comma_ranges() {
        assert_eq!(default_commas(Form::Sonnet).support(), 4..=8);
        assert_eq!(default_commas(Form::Short).support(), 2..=3);
    }
}
