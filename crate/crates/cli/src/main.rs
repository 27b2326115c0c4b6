//! `sonneteer`: train author models, generate poems, lint them.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Cursor, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sonneteer::corpus::{build_bundle, load_bundle, Mode, Tokenizer, BUNDLE_MAGIC};
use sonneteer::io::{create_text, open_text, read_to_string};
use sonneteer::langmodel::LanguageModel;
use sonneteer::lint::{lint_poem, parse_poem, LintContext};
use sonneteer::poemgen::{
    load_dict, load_embeddings, load_lexicon, load_rule_file, AuthorChoice, GenerationConfig, Generator,
    ResourcePaths, Resources,
};
use sonneteer::punctuate::CommaDistribution;
use sonneteer::linesearch::SampleMode;
use sonneteer::{Form, NGramModel, Relaxations, RhymeScheme};

const DATA_ENV: &str = "SONNETEER_DATA";

#[derive(Parser)]
#[command(name = "sonneteer", version, about = "Metrical sonnet generation and linting")]
struct Cli {
    /// Worker threads for line searches (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Log more detail to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an author bundle from a plain-text corpus.
    Train(TrainArgs),
    /// Generate a poem from a prompt.
    Generate(GenerateArgs),
    /// Check meter, rhyme and part-of-speech rules of a poem.
    Lint(LintArgs),
    /// Summarize a trained model or bundle.
    InspectModel(InspectArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Resource directory holding cmudict/, embeddings/, tags/, grammar/ and models/.
    #[arg(long, env = DATA_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

impl DataArgs {
    fn dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| PathBuf::from("data"))
    }

    fn paths(&self) -> ResourcePaths {
        let mut p = ResourcePaths::in_dir(&self.dir());
        if let Some(d) = &self.dict {
            p.dict = d.clone();
        }
        if let Some(e) = &self.embeddings {
            p.embeddings = e.clone();
        }
        p
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_parser = parse_from_str::<Mode>)]
    mode: Mode,
    #[arg(long)]
    author: String,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 0.75)]
    discount: f64,
    #[arg(long)]
    out: PathBuf,
    /// Words whose trailing period does not end a prose sentence, one per line.
    #[arg(long)]
    abbreviations: Option<PathBuf>,
    /// Smallest acceptable generation vocabulary.
    #[arg(long, default_value_t = sonneteer::corpus::DEFAULT_VOCABULARY_FLOOR)]
    min_vocabulary: usize,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Full,
}

#[derive(Args)]
struct GenerateArgs {
    /// `key = value` file; flags take precedence over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    prompt: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_from_str::<Form>)]
    form: Option<Form>,
    /// Author name, or `random`.
    #[arg(long)]
    author: Option<String>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Softmax temperature over rhyme-pair similarity.
    #[arg(long)]
    temperature: Option<f64>,
    /// Comma count range such as `4-8`, or a single number.
    #[arg(long)]
    commas: Option<String>,
    /// `uniform` or `score-proportional` choice among the best lines.
    #[arg(long)]
    sample: Option<String>,
    #[arg(long)]
    distinct_onsets: bool,
    #[arg(long)]
    retries: Option<usize>,
    /// Disable the metrical relaxations.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum)]
    output: Option<OutputFormat>,
    #[arg(long)]
    tags: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Author bundle file; repeatable. Defaults to every `*.model` in the resource models/ directory.
    #[arg(long = "bundle")]
    bundles: Vec<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct LintArgs {
    /// Poem file (plain text, or a `--output full` document), or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// `sonnet`, `short`, or `custom:LETTERS`. Defaults to the scheme a full
    /// document records, otherwise `sonnet`.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    tags: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Skip part-of-speech rules.
    #[arg(long)]
    no_pos: bool,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct InspectArgs {
    /// Bundle or bare model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn parse_from_str<T: FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

/// Failure with its exit status.
enum Fail {
    Usage(String),
    Run(String),
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fail::Usage(m) | Fail::Run(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl fmt::Display) -> Fail {
    Fail::Usage(e.to_string())
}

fn run_err(e: impl fmt::Display) -> Fail {
    Fail::Run(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Generate(a) => generate(a, cli.jobs),
        Command::Lint(a) => lint(a),
        Command::InspectModel(a) => inspect(a),
    };
    match result {
        Ok(code) => code,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn train(a: TrainArgs) -> Result<ExitCode, Fail> {
    if a.order < 2 {
        return Err(usage("--order must be at least 2"));
    }
    let paths = a.data.paths();
    let mut tokenizer = Tokenizer::new(a.mode);
    if let Some(p) = &a.abbreviations {
        tokenizer = tokenizer
            .with_abbreviations(open_text(p).map_err(usage)?)
            .map_err(usage)?;
    }
    let text = read_to_string(&a.corpus).map_err(usage)?;
    let sequences = tokenizer.tokenize(&text).map_err(run_err)?;
    let dict = load_dict(&paths.dict).map_err(usage)?;
    let table = load_embeddings(&paths.embeddings).map_err(usage)?;
    let bundle = build_bundle(&a.author, &sequences, &dict, &table, a.order, a.discount, a.min_vocabulary)
        .map_err(run_err)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    let out = create_text(&a.out).map_err(usage)?;
    bundle.save(out).map_err(run_err)?;
    eprintln!(
        "trained {} on {} sequences: {} model words, {} generation words",
        bundle.author,
        sequences.len(),
        bundle.model.vocabulary().len(),
        bundle.vocabulary.len()
    );
    Ok(ExitCode::SUCCESS)
}

/// `key = value` lines; `#` starts a comment.
fn read_config(path: &Path) -> Result<HashMap<String, String>, Fail> {
    let text = read_to_string(path).map_err(usage)?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

const CONFIG_KEYS: &[&str] = &[
    "prompt", "seed", "form", "author", "beam-width", "top-k", "temperature", "commas", "sample",
    "distinct-onsets", "retries", "strict", "output", "tags", "rules", "bundle", "data-dir", "dict",
    "embeddings",
];

/// Flag value, else config entry, else nothing.
fn setting<T: FromStr>(flag: Option<T>, config: &HashMap<String, String>, key: &str) -> Result<Option<T>, Fail>
where
    T::Err: fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    match config.get(key) {
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| usage(format!("config {key}: {e}"))),
        None => Ok(None),
    }
}

fn parse_commas(s: &str) -> Result<CommaDistribution, Fail> {
    let bad = || usage(format!("invalid comma range {s:?}"));
    let (lo, hi) = match s.split_once(['-', ':']) {
        Some((lo, hi)) => (lo.trim(), hi.trim()),
        None => (s.trim(), s.trim()),
    };
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    CommaDistribution::uniform(lo, hi).map_err(|_| bad())
}

fn parse_sample(s: &str) -> Result<SampleMode, Fail> {
    match s {
        "uniform" => Ok(SampleMode::Uniform),
        "score-proportional" => Ok(SampleMode::ScoreProportional),
        _ => Err(usage(format!("unknown sample mode {s:?}"))),
    }
}

fn parse_bool(s: &str) -> Result<bool, Fail> {
    match s {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(usage(format!("expected a boolean, found {s:?}"))),
    }
}

fn generate(a: GenerateArgs, jobs: usize) -> Result<ExitCode, Fail> {
    let config = match &a.config {
        Some(p) => read_config(p)?,
        None => HashMap::new(),
    };
    if let Some(k) = config.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(usage(format!("unknown config key {k:?}")));
    }
    let prompt: String = setting(a.prompt, &config, "prompt")?
        .ok_or_else(|| usage("--prompt is required"))?;
    let seed = match setting(a.seed, &config, "seed")? {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        }
    };
    let form = match a.form {
        Some(f) => f,
        None => config.get("form").map(|s| s.parse::<Form>()).transpose().map_err(usage)?.unwrap_or(Form::Sonnet),
    };
    let author = match a.author.as_deref().or(config.get("author").map(String::as_str)) {
        Some(s) => s.parse::<AuthorChoice>().map_err(usage)?,
        None => AuthorChoice::Random,
    };
    let defaults = GenerationConfig::default();
    let commas = a.commas.as_deref().or(config.get("commas").map(String::as_str)).map(parse_commas).transpose()?;
    let sample_mode = match a.sample.as_deref().or(config.get("sample").map(String::as_str)) {
        Some(s) => parse_sample(s)?,
        None => defaults.sample_mode,
    };
    let flag = |set: bool, key: &str| -> Result<bool, Fail> {
        if set {
            return Ok(true);
        }
        config.get(key).map(|v| parse_bool(v)).transpose().map(|b| b.unwrap_or(false))
    };
    let strict = flag(a.strict, "strict")?;
    let output = match a.output {
        Some(o) => o,
        None => match config.get("output").map(String::as_str) {
            None | Some("text") => OutputFormat::Text,
            Some("full") => OutputFormat::Full,
            Some(o) => return Err(usage(format!("unknown output format {o:?}"))),
        },
    };
    let gen_config = GenerationConfig {
        prompt,
        form,
        seed,
        beam_width: setting(a.beam_width, &config, "beam-width")?.unwrap_or(defaults.beam_width),
        top_k: setting(a.top_k, &config, "top-k")?.unwrap_or(defaults.top_k),
        temperature: setting(a.temperature, &config, "temperature")?.unwrap_or(defaults.temperature),
        commas,
        author,
        sample_mode,
        distinct_onsets: flag(a.distinct_onsets, "distinct-onsets")?,
        retries: setting(a.retries, &config, "retries")?.unwrap_or(defaults.retries),
        jobs,
    };
    gen_config.validate().map_err(usage)?;

    let data = DataArgs {
        data_dir: setting(a.data.data_dir.clone(), &config, "data-dir")?,
        dict: setting(a.data.dict.clone(), &config, "dict")?,
        embeddings: setting(a.data.embeddings.clone(), &config, "embeddings")?,
    };
    let mut paths = data.paths();
    if let Some(t) = setting(a.tags, &config, "tags")? {
        paths.tag_lexicon = t;
    }
    if let Some(r) = setting(a.rules, &config, "rules")? {
        paths.pos_rules = r;
    }
    if !a.bundles.is_empty() {
        paths.bundles = a.bundles;
    } else if let Some(b) = config.get("bundle") {
        paths.bundles = b.split(',').map(|s| PathBuf::from(s.trim())).collect();
    }
    if paths.bundles.is_empty() {
        return Err(usage(format!(
            "no author bundles: pass --bundle or train into {}",
            data.dir().join("models").display()
        )));
    }
    let resources = Resources::load(&paths).map_err(usage)?;
    let relax = if strict { Relaxations::STRICT } else { Relaxations::default() };
    let generator = Generator::new(resources, relax).map_err(usage)?;
    let poem = generator.generate(&gen_config).map_err(run_err)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let rendered = match output {
        OutputFormat::Text => poem.text(),
        OutputFormat::Full => serde_json::to_string_pretty(&poem).map_err(run_err)? + "\n",
    };
    out.write_all(rendered.as_bytes()).map_err(run_err)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_scheme(s: &str) -> Result<RhymeScheme, Fail> {
    match s {
        "sonnet" => Ok(RhymeScheme::sonnet()),
        "short" => Ok(RhymeScheme::short()),
        _ => match s.strip_prefix("custom:") {
            Some(letters) => RhymeScheme::new(letters).map_err(usage),
            None => Err(usage(format!("unknown scheme {s:?}; use sonnet, short or custom:LETTERS"))),
        },
    }
}

struct PoemInput {
    text: String,
    /// Recorded pronunciation variants, from a full document.
    variants: Option<Vec<Vec<u32>>>,
    scheme: Option<String>,
}

fn read_poem(input: &Path) -> Result<PoemInput, Fail> {
    let text = if input == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(usage)?;
        s
    } else {
        read_to_string(input).map_err(usage)?
    };
    if !text.trim_start().starts_with('{') {
        return Ok(PoemInput { text, variants: None, scheme: None });
    }
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| usage(format!("poem document: {e}")))?;
    let lines = doc["lines"]
        .as_array()
        .ok_or_else(|| usage("poem document has no lines"))?;
    let mut poem = String::new();
    let mut variants = Vec::new();
    for l in lines {
        let t = l["text"].as_str().ok_or_else(|| usage("poem line has no text"))?;
        poem.push_str(t);
        poem.push('\n');
        let v: Option<Vec<u32>> = l["variants"]
            .as_array()
            .map(|vs| vs.iter().filter_map(|x| x.as_u64().map(|n| n as u32)).collect());
        variants.push(v.ok_or_else(|| usage("poem line has no variants"))?);
    }
    Ok(PoemInput {
        text: poem,
        variants: Some(variants),
        scheme: doc["scheme"].as_str().map(str::to_string),
    })
}

fn lint(a: LintArgs) -> Result<ExitCode, Fail> {
    let paths = a.data.paths();
    let input = read_poem(&a.input)?;
    let scheme = match (&a.scheme, &input.scheme) {
        (Some(s), _) => parse_scheme(s)?,
        (None, Some(letters)) => RhymeScheme::new(letters).map_err(usage)?,
        (None, None) => RhymeScheme::sonnet(),
    };
    let dict = load_dict(&paths.dict).map_err(usage)?;
    let grammar = if a.no_pos {
        None
    } else {
        let tags = a.tags.clone().unwrap_or(paths.tag_lexicon);
        let rules = a.rules.clone().unwrap_or(paths.pos_rules);
        let explicit = a.tags.is_some() || a.rules.is_some();
        if explicit || (tags.exists() && rules.exists()) {
            Some((load_lexicon(&tags).map_err(usage)?, load_rule_file(&rules).map_err(usage)?))
        } else {
            log::warn!("no tag lexicon or rules found; skipping part-of-speech checks");
            None
        }
    };
    let ctx = LintContext {
        dict: &dict,
        scheme,
        template: Form::Sonnet.template(),
        relax: if a.strict { Relaxations::STRICT } else { Relaxations::default() },
        grammar: grammar.as_ref().map(|(l, r)| (l, r)),
    };
    let report = lint_poem(&parse_poem(&input.text), &ctx, input.variants.as_deref());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for f in &report.findings {
        writeln!(out, "{f}").map_err(run_err)?;
    }
    Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn inspect(a: InspectArgs) -> Result<ExitCode, Fail> {
    let mut bytes = Vec::new();
    open_text(&a.model)
        .and_then(|mut r| r.read_to_end(&mut bytes))
        .map_err(usage)?;
    let (author, model) = if bytes.starts_with(BUNDLE_MAGIC.as_bytes()) {
        let (author, model) = load_bundle(Cursor::new(bytes)).map_err(usage)?;
        (Some(author), model)
    } else {
        (None, NGramModel::load(Cursor::new(bytes)).map_err(usage)?)
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut emit = || -> io::Result<()> {
        if let Some(author) = &author {
            writeln!(out, "author: {author}")?;
        }
        writeln!(out, "order: {}", model.order())?;
        writeln!(out, "discount: {}", model.discount())?;
        writeln!(out, "vocabulary: {}", model.vocabulary().len())?;
        writeln!(out, "ngrams: {}", model.raw_ngrams().len())?;
        writeln!(out, "top {}-grams (reading order):", model.order())?;
        for (tokens, count) in model.top_ngrams(a.top) {
            let surface: Vec<&str> = tokens.iter().rev().map(String::as_str).collect();
            writeln!(out, "{count:>8}  {}", surface.join(" "))?;
        }
        Ok(())
    };
    emit().map_err(run_err)?;
    Ok(ExitCode::SUCCESS)
}
