#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sonneteer::corpus::{build_bundle, tokenize, AuthorBundle, Mode, DEFAULT_VOCABULARY_FLOOR};
use sonneteer::embedding::EmbeddingTable;
use sonneteer::grammar::{ForbiddenRuleSet, TagLexicon};
use sonneteer::io::read_to_string;
use sonneteer::langmodel::reversed_sequence;
use sonneteer::phonodict::Pronunciation;
use sonneteer::poemgen::{load_dict, load_embeddings, load_lexicon, load_rule_file, Generator, Resources};
use sonneteer::{NGramModel, PronouncingDict, Relaxations, StressPattern};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub struct Shared {
    pub dict: PronouncingDict,
    pub table: EmbeddingTable,
    pub lexicon: TagLexicon,
    pub rules: ForbiddenRuleSet,
}

pub fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let d = data_dir();
        Shared {
            dict: load_dict(&d.join("cmudict/cmudict.dict")).unwrap(),
            table: load_embeddings(&d.join("embeddings/vectors.50d.txt.gz")).unwrap(),
            lexicon: load_lexicon(&d.join("tags/lexicon.tsv")).unwrap(),
            rules: load_rule_file(&d.join("grammar/rules.txt")).unwrap(),
        }
    })
}

/// Verse in pentameter, free verse, and prose.
pub const FIXTURES: [(&str, &str, Mode); 3] = [
    ("milton", "milton.txt", Mode::Verse),
    ("hopkins", "hopkins.txt", Mode::Verse),
    ("sotu", "sotu_early.txt", Mode::Prose),
];

pub fn train(author: &str, file: &str, mode: Mode) -> AuthorBundle {
    let s = shared();
    let text = read_to_string(&data_dir().join("corpora").join(file)).unwrap();
    let seqs = tokenize(&text, mode).unwrap();
    build_bundle(author, &seqs, &s.dict, &s.table, 3, 0.75, DEFAULT_VOCABULARY_FLOOR).unwrap()
}

pub fn fixture_bundles() -> &'static [AuthorBundle] {
    static BUNDLES: OnceLock<Vec<AuthorBundle>> = OnceLock::new();
    BUNDLES.get_or_init(|| FIXTURES.iter().map(|(a, f, m)| train(a, f, *m)).collect())
}

pub fn resources(bundles: Vec<AuthorBundle>) -> Resources {
    let s = shared();
    Resources {
        dict: s.dict.clone(),
        table: s.table.clone(),
        lexicon: s.lexicon.clone(),
        rules: s.rules.clone(),
        bundles,
    }
}

pub fn fixture_generator() -> &'static Generator {
    static GEN: OnceLock<Generator> = OnceLock::new();
    GEN.get_or_init(|| Generator::new(resources(fixture_bundles().to_vec()), Relaxations::default()).unwrap())
}

pub struct Tiny {
    pub dict: PronouncingDict,
    pub words: Vec<String>,
    pub model: NGramModel,
    pub template: StressPattern,
}

/// A random dictionary of up to 30 made-up words, a bigram model over them
/// and an alternating template of 4 to 6 syllables.
pub fn tiny_instance(rng: &mut ChaCha8Rng) -> Tiny {
    const ONSETS: [&str; 6] = ["K", "T", "P", "S", "M", "N"];
    const VOWELS: [&str; 5] = ["AH", "IY", "EY", "OW", "AE"];
    let n = rng.gen_range(8..=30);
    let words: Vec<String> = (0..n)
        .map(|i| format!("{}{}", (b'a' + i / 26) as char, (b'a' + i % 26) as char))
        .collect();
    let mut dict = PronouncingDict::default();
    for w in &words {
        let variants = if rng.gen_bool(0.2) { 2 } else { 1 };
        for v in 0..variants {
            let syllables = *[1, 1, 1, 2, 2, 3].choose(rng).unwrap();
            let phones: Vec<String> = (0..syllables)
                .flat_map(|_| {
                    [
                        ONSETS.choose(rng).unwrap().to_string(),
                        format!("{}{}", VOWELS.choose(rng).unwrap(), rng.gen_range(0..=1)),
                    ]
                })
                .collect();
            dict.insert(Pronunciation::from_phones(w, v, &phones.join(" ")).unwrap()).unwrap();
        }
    }
    let mut lines: Vec<Vec<String>> = (0..40)
        .map(|_| {
            let len = rng.gen_range(2..=7);
            (0..len).map(|_| words.choose(rng).unwrap().clone()).collect()
        })
        .collect();
    let mut all = words.clone();
    all.shuffle(rng);
    lines.push(all);
    let seqs: Vec<Vec<String>> = lines.iter().map(|l| reversed_sequence(l)).collect();
    let model = NGramModel::train(&seqs, 2, 0.75).unwrap();
    let len = rng.gen_range(4..=6);
    let template = StressPattern {
        bits: (0..len).map(|i| i % 2 == 1).collect(),
    };
    Tiny {
        dict,
        words,
        model,
        template,
    }
}

/// Distinct stress patterns of `word`, with the first variant carrying each.
pub fn patterns(dict: &PronouncingDict, word: &str) -> Vec<(u32, StressPattern)> {
    let mut out: Vec<(u32, StressPattern)> = Vec::new();
    for p in dict.lookup(word).unwrap() {
        let sp = p.stress_pattern();
        if !out.iter().any(|(_, q)| *q == sp) {
            out.push((p.variant, sp));
        }
    }
    out
}
