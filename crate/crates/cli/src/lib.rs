//! Command implementations behind the `lipogram` binary.
//!
//! Exit codes: 0 success (warnings allowed), 1 usage error, 2 I/O or input
//! format error, 3 decode failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::{json, Value};

use lipogram::decoder::{parse_kv_lines, DecoderConfig, CONFIG_KEYS};
use lipogram::lexicon::{load_lexicon, Dictionary, Lexicon};
use lipogram::lm::{NGramModel, DEFAULT_ORDER, MAX_ORDER};
use lipogram::metrics::embedding::{Embedder, TfIdfEmbedder};
use lipogram::metrics::{e_score, evaluate_document};
use lipogram::passes::CasingTable;
use lipogram::pipeline::{translate_document, Method, Resources, WarningKind};
use lipogram::providers::{GrammarProvider, LanguageToolClient, OfflineGrammar, RemoteEmbedder};
use lipogram::sweep::{
    default_constraint_sets, emit_dat, emit_report, emit_svg, emit_sweep_csv, fit_decay, run_sweep,
    sweep_spearman, SweepSettings,
};
use lipogram::text::{join_paragraphs, letter_frequencies, split_paragraphs, ConstraintSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DECODE: i32 = 3;

pub const DEFAULT_PARAGRAPHS: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "lipogram",
    version,
    about = "Rewrite text without forbidden letters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an n-gram model on a corpus and save it.
    Train(RunArgs),
    /// Translate a document into a lipogram.
    Translate(RunArgs),
    /// Score a candidate translation against its source.
    Evaluate(RunArgs),
    /// Translate under many constraint sets and fit the fidelity decay.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Source text: paragraphs separated by blank lines.
    #[arg(long, env = "LIPO_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// Synonym lexicon (word, lemma, synonyms, frequency; tab separated).
    #[arg(long, env = "LIPO_LEXICON")]
    pub lexicon: Option<PathBuf>,
    /// Word list for the OOV metric, one word per line.
    #[arg(long, env = "LIPO_DICTIONARY")]
    pub dictionary: Option<PathBuf>,
    /// Model file to read, or to write when training.
    #[arg(long, env = "LIPO_MODEL")]
    pub model: Option<PathBuf>,
    /// Candidate translation to evaluate.
    #[arg(long, env = "LIPO_CANDIDATE")]
    pub candidate: Option<PathBuf>,
    /// Forbidden letters.
    #[arg(long, env = "LIPO_LETTERS", default_value = "e")]
    pub letters: String,
    /// edelete, synonym or beam.
    #[arg(long, env = "LIPO_METHOD", default_value = "beam")]
    pub method: String,
    /// N-gram order for training.
    #[arg(long, env = "LIPO_ORDER", default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    /// Number of leading paragraphs to use (sweep default 200, otherwise all).
    #[arg(long, env = "LIPO_PARAGRAPHS")]
    pub paragraphs: Option<usize>,
    /// Decoder settings as key = value lines.
    #[arg(long, env = "LIPO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "LIPO_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Decoder seed; overrides the config file.
    #[arg(long, env = "LIPO_SEED")]
    pub seed: Option<u64>,
    /// LanguageTool-compatible server; empty selects the offline checker.
    #[arg(long, env = "LIPO_GRAMMAR_ENDPOINT")]
    pub grammar_endpoint: Option<String>,
    /// Sentence-embedding service; empty selects the built-in TF-IDF.
    #[arg(long, env = "LIPO_EMBED_ENDPOINT")]
    pub embed_endpoint: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Decode(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Decode(_) => EXIT_DECODE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Decode(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(e.to_string())
}

/// Settings from the `--config` file plus flag overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub decoder: DecoderConfig,
    pub grammar_endpoint: String,
    pub embed_endpoint: String,
    pub extra_sets: Vec<ConstraintSet>,
    pub letters: ConstraintSet,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> CliResult<Self> {
        let letters = ConstraintSet::parse(&args.letters)
            .map_err(|e| CliError::Usage(format!("--letters: {e}")))?;
        let mut cfg = RunConfig {
            decoder: DecoderConfig::default(),
            grammar_endpoint: String::new(),
            embed_endpoint: String::new(),
            extra_sets: Vec::new(),
            letters,
        };
        if let Some(path) = &args.config {
            let text = read(path)?;
            let pairs = parse_kv_lines(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            for (key, value) in pairs {
                match key.as_str() {
                    "grammar.endpoint" => cfg.grammar_endpoint = value,
                    "embed.endpoint" => cfg.embed_endpoint = value,
                    "sweep.extra_sets" => {
                        for set in value.split([',', ' ']).filter(|s| !s.is_empty()) {
                            cfg.extra_sets.push(
                                ConstraintSet::parse(set).map_err(|e| {
                                    CliError::Usage(format!("sweep.extra_sets: {e}"))
                                })?,
                            );
                        }
                    }
                    k if CONFIG_KEYS.contains(&k) => cfg
                        .decoder
                        .set(k, &value)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
                    other => {
                        return Err(CliError::Usage(format!(
                            "{}: unknown key {other:?}",
                            path.display()
                        )))
                    }
                }
            }
        }
        if let Some(seed) = args.seed {
            cfg.decoder.seed = seed;
        }
        if let Some(e) = &args.grammar_endpoint {
            cfg.grammar_endpoint = e.clone();
        }
        if let Some(e) = &args.embed_endpoint {
            cfg.embed_endpoint = e.clone();
        }
        cfg.decoder
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn grammar(&self) -> Box<dyn GrammarProvider> {
        if self.grammar_endpoint.trim().is_empty() {
            Box::new(OfflineGrammar)
        } else {
            Box::new(LanguageToolClient::new(self.grammar_endpoint.trim()))
        }
    }

    fn remote_embedder(&self) -> Option<RemoteEmbedder> {
        let e = self.embed_endpoint.trim();
        (!e.is_empty()).then(|| RemoteEmbedder::new(e))
    }

    fn echo(&self, args: &RunArgs, method: Option<Method>) -> Value {
        json!({
            "letters": self.letters.to_string(),
            "method": method.map(|m| m.to_string()),
            "paragraphs": args.paragraphs,
            "decoder": self.decoder,
            "grammar_endpoint": self.grammar_endpoint,
            "embed_endpoint": self.embed_endpoint,
            "extra_sets": self.extra_sets.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        })
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn require<'a>(opt: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    opt.as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn method(args: &RunArgs) -> CliResult<Method> {
    args.method.parse().map_err(CliError::Usage)
}

/// The corpus text, all of its paragraphs, and the number selected by `--paragraphs`.
fn load_corpus(args: &RunArgs) -> CliResult<(String, Vec<String>, usize)> {
    let text = read(require(&args.corpus, "corpus")?)?;
    let paragraphs = split_paragraphs(&text);
    let n = match args.paragraphs {
        Some(n) if n == 0 || n > paragraphs.len() => {
            return Err(CliError::Usage(format!(
                "--paragraphs must be between 1 and {}",
                paragraphs.len()
            )))
        }
        Some(n) => n,
        None => paragraphs.len(),
    };
    Ok((text, paragraphs, n))
}

fn load_dictionary(args: &RunArgs) -> CliResult<Dictionary> {
    match &args.dictionary {
        Some(p) => Dictionary::load(p).map_err(io),
        None => {
            warn!("no --dictionary given; every word counts as out of vocabulary");
            Ok(Dictionary::default())
        }
    }
}

fn load_lexicon_opt(args: &RunArgs, required: bool) -> CliResult<Lexicon> {
    match &args.lexicon {
        Some(p) => load_lexicon(p).map_err(io),
        None if required => Err(CliError::Usage("missing required flag --lexicon".into())),
        None => Ok(Lexicon::default()),
    }
}

fn load_model(args: &RunArgs, corpus: &str) -> CliResult<NGramModel> {
    match &args.model {
        Some(p) => NGramModel::load(p).map_err(io),
        None => {
            info!(
                "no --model given; training an order-{} model on the corpus",
                args.order
            );
            NGramModel::train(corpus, args.order).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

pub fn cmd_train(args: &RunArgs) -> CliResult<()> {
    if !(1..=MAX_ORDER).contains(&args.order) {
        return Err(CliError::Usage(format!(
            "--order must be between 1 and {MAX_ORDER}"
        )));
    }
    let corpus = read(require(&args.corpus, "corpus")?)?;
    let model = NGramModel::train(&corpus, args.order).map_err(|e| CliError::Io(e.to_string()))?;
    let path = match &args.model {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io)?;
            }
            p.clone()
        }
        None => {
            fs::create_dir_all(&args.out).map_err(io)?;
            args.out.join("model.lm")
        }
    };
    model.save(&path).map_err(io)?;
    println!("model: {}", path.display());
    println!("order: {}", model.order());
    println!("vocabulary: {}", model.vocab_size());
    println!("tokens: {}", model.total_predicted());
    for n in 1..=model.order() {
        println!("{n}-grams: {}", model.ngram_types(n));
    }
    Ok(())
}

pub fn cmd_translate(args: &RunArgs) -> CliResult<()> {
    let method = method(args)?;
    let cfg = RunConfig::resolve(args)?;
    let (corpus_text, paragraphs, n) = load_corpus(args)?;
    let needs_resources = method != Method::Edelete;
    let lexicon = load_lexicon_opt(args, needs_resources)?;
    let model = if method == Method::Beam {
        load_model(args, &corpus_text)?
    } else {
        NGramModel::train("unused", 1).map_err(io)?
    };
    let tfidf = TfIdfEmbedder::from_documents(&paragraphs);
    let remote = cfg.remote_embedder();
    let similarity: &dyn Embedder = match &remote {
        Some(r) => r,
        None => &tfidf,
    };
    let grammar = cfg.grammar();
    let casing = CasingTable::from_corpus(&corpus_text);
    let res = Resources {
        model: &model,
        lexicon: &lexicon,
        tfidf: &tfidf,
        similarity,
        grammar: grammar.as_ref(),
        casing: &casing,
    };
    let t = translate_document(&paragraphs[..n], &cfg.letters, method, &cfg.decoder, &res)
        .map_err(|e| CliError::Decode(e.to_string()))?;
    let doc = t.to_document();
    let path = write_out(&args.out, "translation.txt", &doc)?;
    println!("translation: {}", path.display());
    println!("paragraphs: {}", t.paragraphs.len());
    println!(
        "E-score ({}): {:.2}",
        cfg.letters,
        e_score(&join_paragraphs(&t.paragraphs), &cfg.letters)
    );
    println!("warnings: {}", t.warnings.len());
    if t.has_decode_failure() {
        let failed: Vec<String> = t
            .warnings
            .iter()
            .filter(|w| w.kind == WarningKind::DecodeFailure)
            .map(|w| w.index.to_string())
            .collect();
        return Err(CliError::Decode(format!(
            "decoding failed for paragraph(s) {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

pub fn cmd_evaluate(args: &RunArgs) -> CliResult<()> {
    let cfg = RunConfig::resolve(args)?;
    let (_, all, n) = load_corpus(args)?;
    let source = &all[..n];
    let candidate_path = require(&args.candidate, "candidate")?;
    let mut candidate = split_paragraphs(&read(candidate_path)?);
    if args.paragraphs.is_some() && candidate.len() >= source.len() {
        candidate.truncate(source.len());
    }
    let dictionary = load_dictionary(args)?;
    let tfidf = TfIdfEmbedder::from_documents(&all);
    let remote = cfg.remote_embedder();
    let embedder: &dyn Embedder = match &remote {
        Some(r) => r,
        None => &tfidf,
    };
    let grammar = cfg.grammar();
    let mut report = evaluate_document(
        source,
        &candidate,
        &cfg.letters,
        &dictionary,
        grammar.as_ref(),
        embedder,
    )
    .map_err(|e| match e {
        lipogram::metrics::MetricsError::ParagraphMismatch { .. } => CliError::Usage(e.to_string()),
        other => CliError::Io(other.to_string()),
    })?;
    report.config_echo = cfg.echo(args, None);
    let json = serde_json::to_string_pretty(&report).map_err(io)?;
    let path = write_out(&args.out, "report.json", &(json + "\n"))?;
    println!("report: {}", path.display());
    println!(
        "{:>10} {:>8} {:>8} {:>8} {:>11}",
        "Similarity", "OOV %", "E-Score", "Grammar", "Readability"
    );
    match &report.aggregates {
        Some(a) => println!(
            "{:>10.2} {:>8.2} {:>8.2} {:>8.2} {:>11}",
            a.similarity,
            a.oov,
            a.e_score,
            a.grammar_count,
            a.readability
                .map_or("n/a".to_string(), |r| format!("{r:.2}"))
        ),
        None => println!("(no paragraphs)"),
    }
    Ok(())
}

pub fn cmd_sweep(args: &RunArgs) -> CliResult<()> {
    let method = method(args)?;
    let cfg = RunConfig::resolve(args)?;
    let n = args.paragraphs.unwrap_or(DEFAULT_PARAGRAPHS);
    if n == 0 {
        return Err(CliError::Usage("--paragraphs must be at least 1".into()));
    }
    let corpus_text = read(require(&args.corpus, "corpus")?)?;
    let all = split_paragraphs(&corpus_text);
    if n > all.len() {
        return Err(CliError::Usage(format!(
            "--paragraphs {n} exceeds the {} paragraphs in the corpus",
            all.len()
        )));
    }
    let frequencies = letter_frequencies(&corpus_text).map_err(io)?;
    let lexicon = load_lexicon_opt(args, method != Method::Edelete)?;
    let dictionary = load_dictionary(args)?;
    let model = if method == Method::Beam {
        load_model(args, &corpus_text)?
    } else {
        NGramModel::train("unused", 1).map_err(io)?
    };
    let tfidf = TfIdfEmbedder::from_documents(&all);
    let remote = cfg.remote_embedder();
    let similarity: &dyn Embedder = match &remote {
        Some(r) => r,
        None => &tfidf,
    };
    let grammar = cfg.grammar();
    let casing = CasingTable::from_corpus(&corpus_text);
    let res = Resources {
        model: &model,
        lexicon: &lexicon,
        tfidf: &tfidf,
        similarity,
        grammar: grammar.as_ref(),
        casing: &casing,
    };
    let mut sets = default_constraint_sets();
    for extra in &cfg.extra_sets {
        sets.push((extra.to_string(), *extra));
    }
    let settings = SweepSettings {
        method,
        decoder: &cfg.decoder,
        dictionary: &dictionary,
        frequencies: &frequencies,
    };
    let points =
        run_sweep(&all, &sets, n, &settings, &res).map_err(|e| CliError::Decode(e.to_string()))?;
    let fit = fit_decay(&points).ok();
    fs::create_dir_all(&args.out).map_err(io)?;
    emit_sweep_csv(&points, args.out.join("sweep.csv")).map_err(io)?;
    emit_report(
        &points,
        fit.as_ref(),
        &cfg.echo(args, Some(method)),
        args.out.join("report.json"),
    )
    .map_err(io)?;
    emit_svg(&points, fit.as_ref(), args.out.join("sweep.svg")).map_err(io)?;
    emit_dat(&points, args.out.join("sweep.dat")).map_err(io)?;
    println!("points: {}", points.len());
    if let Some(r) = sweep_spearman(&points) {
        println!("spearman(exclusion, similarity): {r:.4}");
    }
    if let Some(fit) = &fit {
        println!(
            "linear: y = {:.4} x + {:.4} (r2 {:.4})",
            fit.linear.slope, fit.linear.intercept, fit.linear.r2
        );
        if let Some(e) = &fit.exponential {
            println!(
                "exponential: y = {:.4} exp(-{:.4} x) (r2 {:.4})",
                e.a, e.b, e.r2
            );
        }
    }
    println!("outputs: {}", args.out.display());
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Translate(a) => cmd_translate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
