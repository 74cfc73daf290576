//! The `seqtag` command line.
//!
//! Exit codes: 0 success, 2 usage, 3 file I/O, 4 malformed input,
//! 5 tagset violation, 6 training failure, 7 checkpoint failure,
//! 8 evaluation mismatch, 9 bootstrap merge conflict.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bootstrap::{self, BootstrapError, CycleInputs, Provenance};
use crate::corpus::{
    builtin_bis_tagset, corpus_stats, parse_column_file, split_corpus, write_column_file, CorpusError, ParseMode, TagSet,
    TaggedCorpus,
};
use crate::embeddings::{
    load_precomputed, load_static_vectors, CharEncoder, EmbeddingError, EmbeddingStack, OovPolicy, Provider, StackEntry,
    DEFAULT_CHAR_DIM, DEFAULT_CHAR_HIDDEN,
};
use crate::eval::{evaluate_with, render_json, render_text, EvalError, EvalOptions};
use crate::training::{load_model, save_model, train_with, SequenceModel, TrainError, TrainingConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{path}: {source}")]
    Embeddings { path: PathBuf, source: EmbeddingError },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Corpus { source: CorpusError::UnknownTag { .. }, .. } => 5,
            CliError::Corpus { .. } | CliError::Embeddings { .. } => 4,
            CliError::Train(e) => train_code(e),
            CliError::Eval(EvalError::TagSetMismatch) => 5,
            CliError::Eval(_) => 8,
            CliError::Bootstrap(e) => match e {
                BootstrapError::DuplicateId(_) => 9,
                BootstrapError::TagSetMismatch | BootstrapError::Untagged { .. } => 5,
                BootstrapError::EmptyRaw | BootstrapError::Corpus(_) => 4,
                BootstrapError::Train(t) => train_code(t),
                BootstrapError::Eval(_) => 8,
            },
        }
    }

    /// Short machine-readable kind, printed as `error[<kind>]`.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            3 => "io",
            4 => "format",
            5 => "tagset",
            6 => "training",
            7 => "checkpoint",
            8 => "evaluation",
            _ => "merge",
        }
    }
}

fn train_code(e: &TrainError) -> i32 {
    match e {
        TrainError::Checkpoint(_) => 7,
        TrainError::TagSetMismatch | TrainError::InvalidTag { .. } => 5,
        TrainError::Embedding(_) => 4,
        _ => 6,
    }
}

#[derive(Debug, Parser)]
#[command(name = "seqtag", version, about = "BiLSTM-CRF part-of-speech tagging toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a tagger and write a checkpoint plus a learning-curve file.
    Train(TrainArgs),
    /// Tag raw or column-format text with a trained model.
    Tag(TagArgs),
    /// Score predicted tags against gold tags.
    Eval(EvalArgs),
    /// Corpus counts and per-tag histogram.
    Stats(StatsArgs),
    /// Seeded train/dev/test split of a column file.
    Split(SplitArgs),
    /// Rewrite a column file in canonical form (NFC, one tab, no comments).
    Convert(ConvertArgs),
    /// Semi-automatic annotation workflow.
    #[command(subcommand)]
    Bootstrap(BootstrapCommand),
    /// Summarize a static embedding file and its coverage of a corpus.
    InspectEmbeddings(InspectArgs),
}

#[derive(Debug, Subcommand)]
pub enum BootstrapCommand {
    /// Tag one-sentence-per-line raw text into a review file.
    Annotate(AnnotateArgs),
    /// Merge corrected review files into a base corpus.
    Merge(MergeArgs),
    /// Evaluate, merge corrections, retrain, re-evaluate on a fixed held-out set.
    Cycle(CycleArgs),
}

/// Hyperparameter overrides; each beats the config file, which beats defaults.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Flat `key = value` config file (e.g. paper.cfg).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// [default: 512]
    #[arg(long)]
    pub hidden_size: Option<usize>,
    /// [default: 2]
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    pub word_dropout: Option<f64>,
    /// [default: 0.01]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Training-time chunk length in tokens [default: 128]
    #[arg(long)]
    pub sequence_length: Option<usize>,
    /// [default: 16]
    #[arg(long)]
    pub mini_batch_size: Option<usize>,
    /// [default: 0.5]
    #[arg(long)]
    pub anneal_factor: Option<f64>,
    /// Bad epochs before annealing [default: 3]
    #[arg(long)]
    pub patience: Option<usize>,
    /// [default: 0.0001]
    #[arg(long)]
    pub min_learning_rate: Option<f64>,
    /// Global gradient-norm clip [default: 5]
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Uniform init half-width [default: 0.1]
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// RNG seed [default: 1]
    #[arg(long, env = "SEQTAG_SEED")]
    pub seed: Option<u64>,
    /// bilstm-crf | crf [default: bilstm-crf]
    #[arg(long)]
    pub architecture: Option<String>,
}

impl ConfigArgs {
    /// Resolves flags > config file > `base`.
    pub fn resolve(&self, base: TrainingConfig) -> Result<TrainingConfig, CliError> {
        let mut c = base;
        if let Some(path) = &self.config {
            let text = read_text(path)?;
            c.apply_text(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        let overrides: [(&str, Option<String>); 14] = [
            ("hidden_size", self.hidden_size.map(|v| v.to_string())),
            ("hidden_layers", self.hidden_layers.map(|v| v.to_string())),
            ("word_dropout", self.word_dropout.map(|v| v.to_string())),
            ("learning_rate", self.learning_rate.map(|v| v.to_string())),
            ("max_epochs", self.max_epochs.map(|v| v.to_string())),
            ("sequence_length", self.sequence_length.map(|v| v.to_string())),
            ("mini_batch_size", self.mini_batch_size.map(|v| v.to_string())),
            ("anneal_factor", self.anneal_factor.map(|v| v.to_string())),
            ("patience", self.patience.map(|v| v.to_string())),
            ("min_learning_rate", self.min_learning_rate.map(|v| v.to_string())),
            ("clip_norm", self.clip_norm.map(|v| v.to_string())),
            ("init_scale", self.init_scale.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("architecture", self.architecture.clone()),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                c.set(k, &v).map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OovArg {
    Zero,
    Mean,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus (column format).
    #[arg(long)]
    pub train: PathBuf,
    /// Dev corpus for model selection (column format).
    #[arg(long)]
    pub dev: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Learning-curve output [default: <out>.curve.tsv]
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Static word vectors, `name=path` (repeatable).
    #[arg(long = "embeddings", value_name = "NAME=PATH")]
    pub embeddings: Vec<String>,
    /// Precomputed contextual vectors, `name=path` (repeatable).
    #[arg(long = "precomputed", value_name = "NAME=PATH")]
    pub precomputed: Vec<String>,
    /// Add a trainable character-level BiLSTM provider.
    #[arg(long)]
    pub char_embeddings: bool,
    /// Fine-tune static vectors instead of keeping them frozen.
    #[arg(long)]
    pub train_static: bool,
    /// OOV vector for static tables.
    #[arg(long, value_enum, default_value = "zero")]
    pub oov: OovArg,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// One sentence per line, whitespace-separated tokens.
    Raw,
    /// Column format; any tags present are ignored.
    Column,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output column file [default: stdout]
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "column")]
    pub format: InputFormat,
    /// Precomputed vectors to attach, `name=path` (repeatable).
    #[arg(long = "precomputed", value_name = "NAME=PATH")]
    pub precomputed: Vec<String>,
    /// Tagging worker threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Number of confusion pairs listed.
    #[arg(long, default_value_t = 10)]
    pub top_confusions: usize,
    /// Count zero-support tags as F1 = 0 in the macro mean.
    #[arg(long)]
    pub include_zero_support: bool,
    /// Also write the full report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Report surfaces missing from this static vector file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Keep unknown tags as untagged tokens instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated ratios summing to 1.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub ratios: String,
    /// Shuffle seed [default: 1]
    #[arg(long, env = "SEQTAG_SEED")]
    pub seed: Option<u64>,
    /// Output directory; files are named train/dev/test.col (part<k>.col beyond three).
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Drop unknown tags (reported on stderr) instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Corpus to measure vocabulary coverage on.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Print the vector of this word (repeatable).
    #[arg(long = "word")]
    pub words: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Raw text, one pre-tokenized sentence per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Review file output.
    #[arg(long)]
    pub out: PathBuf,
    /// Provenance timestamp in unix seconds [default: now]
    #[arg(long)]
    pub timestamp: Option<u64>,
    #[arg(long = "precomputed", value_name = "NAME=PATH")]
    pub precomputed: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub base: PathBuf,
    /// Corrected review file (repeatable).
    #[arg(long)]
    pub corrected: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CycleArgs {
    /// Incumbent checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// The incumbent's training corpus.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Held-out evaluation corpus, fixed across the cycle.
    #[arg(long = "eval")]
    pub eval: PathBuf,
    /// Raw text to annotate.
    #[arg(long)]
    pub raw: PathBuf,
    /// Corrected review file (repeatable).
    #[arg(long)]
    pub corrected: Vec<PathBuf>,
    /// New checkpoint output.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the auto-annotated review file.
    #[arg(long)]
    pub review_out: Option<PathBuf>,
    /// Before/after reports as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Provenance timestamp in unix seconds [default: now]
    #[arg(long)]
    pub timestamp: Option<u64>,
    #[arg(long = "precomputed", value_name = "NAME=PATH")]
    pub precomputed: Vec<String>,
    /// Retraining overrides on top of the incumbent's config.
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_bytes(path)?).map_err(|e| CliError::Corpus {
        path: path.to_path_buf(),
        source: CorpusError::InvalidUtf8 { offset: e.utf8_error().valid_up_to() },
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn source_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn read_corpus(path: &Path, tagset: &Arc<TagSet>, mode: ParseMode, err: &mut dyn Write) -> Result<TaggedCorpus, CliError> {
    let parsed = parse_column_file(&read_bytes(path)?, &source_name(path), Arc::clone(tagset), mode)
        .map_err(|source| CliError::Corpus { path: path.to_path_buf(), source })?;
    for d in &parsed.diagnostics {
        let _ = writeln!(err, "warning: {}:{}: {}", path.display(), d.line, d.message);
    }
    Ok(parsed.corpus)
}

fn name_and_path(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((n, p)) => (n.to_string(), PathBuf::from(p)),
        None => {
            let p = PathBuf::from(spec);
            let n = p.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (n, p)
        }
    }
}

fn attach_precomputed(model: &mut SequenceModel, specs: &[String]) -> Result<(), CliError> {
    for spec in specs {
        let (name, path) = name_and_path(spec);
        let store = load_precomputed(&read_bytes(&path)?).map_err(|source| CliError::Embeddings { path: path.clone(), source })?;
        model
            .stack
            .attach_precomputed(&name, store)
            .map_err(|source| CliError::Embeddings { path, source })?;
    }
    Ok(())
}

fn load_with_precomputed(path: &Path, specs: &[String]) -> Result<SequenceModel, CliError> {
    let mut model = load_model(path)?;
    attach_precomputed(&mut model, specs)?;
    Ok(model)
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn echo(err: &mut dyn Write, what: &str, fields: &[(&str, String)]) {
    let mut line = format!("effective {what}:");
    for (k, v) in fields {
        let _ = write!(line, " {k}={v}");
    }
    let _ = writeln!(err, "{line}");
}

fn echo_config(err: &mut dyn Write, config: &TrainingConfig) {
    for line in config.render().lines() {
        let _ = writeln!(err, "config: {line}");
    }
}

fn paths(ps: &[PathBuf]) -> String {
    ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = a.config.resolve(TrainingConfig::default())?;
    let curve_path = a.curve.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".curve.tsv");
        PathBuf::from(p)
    });
    echo(
        err,
        "train",
        &[
            ("train", a.train.display().to_string()),
            ("dev", a.dev.display().to_string()),
            ("out", a.out.display().to_string()),
            ("curve", curve_path.display().to_string()),
            ("embeddings", a.embeddings.join(",")),
            ("precomputed", a.precomputed.join(",")),
            ("char_embeddings", a.char_embeddings.to_string()),
            ("train_static", a.train_static.to_string()),
            ("oov", format!("{:?}", a.oov).to_lowercase()),
        ],
    );
    echo_config(err, &config);

    let tagset = Arc::new(builtin_bis_tagset());
    let train_set = read_corpus(&a.train, &tagset, ParseMode::Strict, err)?;
    let dev = read_corpus(&a.dev, &tagset, ParseMode::Strict, err)?;
    let policy = match a.oov {
        OovArg::Zero => OovPolicy::Zero,
        OovArg::Mean => OovPolicy::MeanOfRows,
    };
    let mut entries = Vec::new();
    for spec in &a.embeddings {
        let (name, path) = name_and_path(spec);
        let (table, diags) =
            load_static_vectors(&read_bytes(&path)?, policy).map_err(|source| CliError::Embeddings { path: path.clone(), source })?;
        for d in diags {
            let _ = writeln!(err, "warning: {}:{}: {}", path.display(), d.line, d.message);
        }
        entries.push(StackEntry::new(name, Provider::Static(table), a.train_static));
    }
    for spec in &a.precomputed {
        let (name, path) = name_and_path(spec);
        let store = load_precomputed(&read_bytes(&path)?).map_err(|source| CliError::Embeddings { path, source })?;
        entries.push(StackEntry::new(name, Provider::Precomputed(store), false));
    }
    if a.char_embeddings {
        let chars = train_set.sentences.iter().flat_map(|s| s.surfaces().flat_map(str::chars).collect::<Vec<_>>());
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(config.seed ^ 0x5eed);
        let enc = CharEncoder::new(chars, DEFAULT_CHAR_DIM, DEFAULT_CHAR_HIDDEN, config.init_scale, &mut rng);
        entries.push(StackEntry::new("chars", Provider::Char(enc), true));
    }
    if entries.is_empty() {
        return Err(CliError::Usage("at least one of --embeddings, --precomputed, --char-embeddings is required".into()));
    }
    let stack = EmbeddingStack::new(entries).map_err(|e| CliError::Usage(e.to_string()))?;
    let model = SequenceModel::new(stack, Arc::clone(&tagset), config.clone())?;
    let (best, curve) = train_with(model, &train_set, &dev, &config, |r| {
        let _ = writeln!(err, "epoch {} loss {:.6} dev {:.6} lr {}", r.epoch, r.train_loss, r.dev_score, r.lr);
    })?;
    save_model(&best, &a.out)?;
    write_bytes(&curve_path, curve.to_tsv().as_bytes())?;
    let best_rec = curve.best().expect("non-empty curve");
    let _ = writeln!(
        out,
        "best dev micro F1 {} at epoch {} of {}",
        crate::eval::percent(best_rec.dev_score),
        best_rec.epoch,
        curve.records.len()
    );
    Ok(())
}

fn cmd_tag(a: &TagArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo(
        err,
        "tag",
        &[
            ("model", a.model.display().to_string()),
            ("input", a.input.display().to_string()),
            ("output", a.output.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("format", format!("{:?}", a.format).to_lowercase()),
            ("precomputed", a.precomputed.join(",")),
            ("threads", a.threads.to_string()),
        ],
    );
    let model = load_with_precomputed(&a.model, &a.precomputed)?;
    let input = match a.format {
        InputFormat::Column => {
            let c = read_corpus(&a.input, &model.tagset, ParseMode::Lenient, err)?;
            TaggedCorpus::new(c.sentences.iter().map(|s| s.without_tags()).collect(), Arc::clone(&model.tagset))
        }
        InputFormat::Raw => {
            let text = read_text(&a.input)?;
            let (sentences, diags) = bootstrap::parse_raw(&text, &source_name(&a.input))
                .map_err(|source| CliError::Corpus { path: a.input.clone(), source })?;
            for d in diags {
                let _ = writeln!(err, "warning: {}:{}: {}", a.input.display(), d.line, d.message);
            }
            TaggedCorpus::new(sentences, Arc::clone(&model.tagset))
        }
    };
    let tagged = model.tag_corpus(&input, a.threads.max(1))?;
    let bytes = write_column_file(&tagged);
    match &a.output {
        Some(p) => write_bytes(p, &bytes)?,
        None => out.write_all(&bytes).map_err(|source| CliError::Io { path: "<stdout>".into(), source })?,
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo(
        err,
        "eval",
        &[
            ("gold", a.gold.display().to_string()),
            ("pred", a.pred.display().to_string()),
            ("top_confusions", a.top_confusions.to_string()),
            ("include_zero_support", a.include_zero_support.to_string()),
            ("json", a.json.as_ref().map_or("-".into(), |p| p.display().to_string())),
        ],
    );
    if a.top_confusions == 0 {
        return Err(CliError::Usage("--top-confusions must be at least 1".into()));
    }
    let tagset = Arc::new(builtin_bis_tagset());
    let gold = read_corpus(&a.gold, &tagset, ParseMode::Strict, err)?;
    let pred = read_corpus(&a.pred, &tagset, ParseMode::Strict, err)?;
    let opts = EvalOptions { include_zero_support: a.include_zero_support, top_confusions: a.top_confusions };
    let report = evaluate_with(&gold, &pred, opts)?;
    let _ = out.write_all(render_text(&report, &tagset).as_bytes());
    if let Some(p) = &a.json {
        write_bytes(p, render_json(&report).as_bytes())?;
    }
    Ok(())
}

fn cmd_stats(a: &StatsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo(
        err,
        "stats",
        &[
            ("input", a.input.display().to_string()),
            ("embeddings", a.embeddings.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("lenient", a.lenient.to_string()),
        ],
    );
    let tagset = Arc::new(builtin_bis_tagset());
    let mode = if a.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let corpus = read_corpus(&a.input, &tagset, mode, err)?;
    let stats = match &a.embeddings {
        Some(p) => {
            let (table, _) = load_static_vectors(&read_bytes(p)?, OovPolicy::Zero)
                .map_err(|source| CliError::Embeddings { path: p.clone(), source })?;
            corpus_stats(&corpus, Some(|s: &str| table.contains(s)))
        }
        None => corpus.stats(),
    };
    let mut text = format!(
        "sentences\t{}\ntokens\t{}\nuntagged\t{}\n",
        stats.sentence_count, stats.token_count, stats.untagged_count
    );
    for (i, &n) in stats.tag_histogram.iter().enumerate() {
        if n > 0 {
            let _ = writeln!(text, "tag\t{}\t{n}", tagset.code(i));
        }
    }
    if a.embeddings.is_some() {
        let _ = writeln!(text, "oov_types\t{}", stats.oov_candidates.len());
        for w in &stats.oov_candidates {
            let _ = writeln!(text, "oov\t{w}");
        }
    }
    let _ = out.write_all(text.as_bytes());
    Ok(())
}

fn cmd_split(a: &SplitArgs, _out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let seed = a.seed.unwrap_or(1);
    echo(
        err,
        "split",
        &[
            ("input", a.input.display().to_string()),
            ("ratios", a.ratios.clone()),
            ("seed", seed.to_string()),
            ("out_dir", a.out_dir.display().to_string()),
        ],
    );
    let ratios = a
        .ratios
        .split(',')
        .map(|r| r.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad ratio {r:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let tagset = Arc::new(builtin_bis_tagset());
    let corpus = read_corpus(&a.input, &tagset, ParseMode::Strict, err)?;
    let parts = split_corpus(&corpus, &ratios, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(&a.out_dir).map_err(|source| CliError::Io { path: a.out_dir.clone(), source })?;
    let names = ["train", "dev", "test"];
    for (k, part) in parts.iter().enumerate() {
        let name = if parts.len() <= 3 { names[k].to_string() } else { format!("part{}", k + 1) };
        write_bytes(&a.out_dir.join(format!("{name}.col")), &write_column_file(part))?;
    }
    Ok(())
}

fn cmd_convert(a: &ConvertArgs, _out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo(
        err,
        "convert",
        &[
            ("input", a.input.display().to_string()),
            ("output", a.output.display().to_string()),
            ("lenient", a.lenient.to_string()),
        ],
    );
    let tagset = Arc::new(builtin_bis_tagset());
    let mode = if a.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let corpus = read_corpus(&a.input, &tagset, mode, err)?;
    write_bytes(&a.output, &write_column_file(&corpus))
}

fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo(
        err,
        "inspect-embeddings",
        &[
            ("embeddings", a.embeddings.display().to_string()),
            ("corpus", a.corpus.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("words", a.words.join(",")),
        ],
    );
    let (table, diags) = load_static_vectors(&read_bytes(&a.embeddings)?, OovPolicy::Zero)
        .map_err(|source| CliError::Embeddings { path: a.embeddings.clone(), source })?;
    for d in diags {
        let _ = writeln!(err, "warning: {}:{}: {}", a.embeddings.display(), d.line, d.message);
    }
    let mut text = format!("vocabulary\t{}\ndim\t{}\n", table.len(), table.dim());
    if let Some(p) = &a.corpus {
        let tagset = Arc::new(builtin_bis_tagset());
        let corpus = read_corpus(p, &tagset, ParseMode::Lenient, err)?;
        let total = corpus.token_count();
        let covered = corpus.sentences.iter().flat_map(|s| s.surfaces()).filter(|w| table.contains(w)).count();
        let stats = corpus_stats(&corpus, Some(|s: &str| table.contains(s)));
        let _ = writeln!(text, "corpus_tokens\t{total}");
        let _ = writeln!(text, "covered_tokens\t{covered}");
        let _ = writeln!(text, "token_coverage\t{}", crate::eval::percent(if total == 0 { 0.0 } else { covered as f64 / total as f64 }));
        let _ = writeln!(text, "oov_types\t{}", stats.oov_candidates.len());
    }
    for w in &a.words {
        let status = if table.contains(w) { "in" } else { "oov" };
        let v: Vec<String> = table.lookup(w).iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(text, "word\t{w}\t{status}\t{}", v.join(" "));
    }
    let _ = out.write_all(text.as_bytes());
    Ok(())
}

fn cmd_annotate(a: &AnnotateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let timestamp = a.timestamp.unwrap_or_else(now);
    echo(
        err,
        "bootstrap annotate",
        &[
            ("model", a.model.display().to_string()),
            ("in", a.input.display().to_string()),
            ("out", a.out.display().to_string()),
            ("timestamp", timestamp.to_string()),
            ("precomputed", a.precomputed.join(",")),
            ("threads", a.threads.to_string()),
        ],
    );
    let model = load_with_precomputed(&a.model, &a.precomputed)?;
    let raw = read_text(&a.input)?;
    let provenance = Provenance { source: source_name(&a.input), model_id: bootstrap::model_id(&model), timestamp };
    let review = bootstrap::annotate_raw(&model, &raw, provenance, a.threads.max(1))?;
    for d in &review.diagnostics {
        let _ = writeln!(err, "warning: {}:{}: {}", a.input.display(), d.line, d.message);
    }
    write_bytes(&a.out, review.render().as_bytes())?;
    let _ = writeln!(
        out,
        "annotated {} sentences, {} tokens",
        review.corpus.sentence_count(),
        review.corpus.token_count()
    );
    Ok(())
}

fn cmd_merge(a: &MergeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    echo(
        err,
        "bootstrap merge",
        &[
            ("base", a.base.display().to_string()),
            ("corrected", paths(&a.corrected)),
            ("out", a.out.display().to_string()),
        ],
    );
    let tagset = Arc::new(builtin_bis_tagset());
    let base = read_corpus(&a.base, &tagset, ParseMode::Strict, err)?;
    let corrected = a
        .corrected
        .iter()
        .map(|p| read_corpus(p, &tagset, ParseMode::Strict, err))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = bootstrap::merge_corrected(&base, &corrected)?;
    write_bytes(&a.out, &write_column_file(&merged))?;
    let _ = writeln!(out, "merged {} sentences, {} tokens", merged.sentence_count(), merged.token_count());
    Ok(())
}

fn cmd_cycle(a: &CycleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let timestamp = a.timestamp.unwrap_or_else(now);
    let model = load_with_precomputed(&a.model, &a.precomputed)?;
    let config = a.config.resolve(model.config.clone())?;
    echo(
        err,
        "bootstrap cycle",
        &[
            ("model", a.model.display().to_string()),
            ("base", a.base.display().to_string()),
            ("dev", a.dev.display().to_string()),
            ("eval", a.eval.display().to_string()),
            ("raw", a.raw.display().to_string()),
            ("corrected", paths(&a.corrected)),
            ("out", a.out.display().to_string()),
            ("timestamp", timestamp.to_string()),
        ],
    );
    echo_config(err, &config);
    let tagset = Arc::clone(&model.tagset);
    let base = read_corpus(&a.base, &tagset, ParseMode::Strict, err)?;
    let dev = read_corpus(&a.dev, &tagset, ParseMode::Strict, err)?;
    let heldout = read_corpus(&a.eval, &tagset, ParseMode::Strict, err)?;
    let raw = read_text(&a.raw)?;
    let corrected = a
        .corrected
        .iter()
        .map(|p| read_corpus(p, &tagset, ParseMode::Strict, err))
        .collect::<Result<Vec<_>, _>>()?;
    let provenance = Provenance { source: source_name(&a.raw), model_id: bootstrap::model_id(&model), timestamp };
    let report = bootstrap::bootstrap_cycle(
        &model,
        CycleInputs { base: &base, dev: &dev, heldout: &heldout, raw: &raw, provenance, corrected: &corrected },
        &config,
    )?;
    save_model(&report.model, &a.out)?;
    if let Some(p) = &a.review_out {
        write_bytes(p, report.review.render().as_bytes())?;
    }
    if let Some(p) = &a.report {
        let json = serde_json::json!({
            "merged_tokens": report.merged_tokens,
            "heldout_hash_before": report.heldout_hash_before,
            "heldout_hash_after": report.heldout_hash_after,
            "before": report.before,
            "after": report.after,
            "curve": report.curve,
        });
        write_bytes(p, serde_json::to_string_pretty(&json).expect("serializable").as_bytes())?;
    }
    let _ = writeln!(
        out,
        "held-out micro F1 {} -> {} ({} merged tokens, held-out hash {})",
        crate::eval::percent(report.before.micro_f1),
        crate::eval::percent(report.after.micro_f1),
        report.merged_tokens,
        if report.heldout_hash_before == report.heldout_hash_after { "unchanged" } else { "CHANGED" }
    );
    Ok(())
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, out, err),
        Command::Tag(a) => cmd_tag(a, out, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Stats(a) => cmd_stats(a, out, err),
        Command::Split(a) => cmd_split(a, out, err),
        Command::Convert(a) => cmd_convert(a, out, err),
        Command::InspectEmbeddings(a) => cmd_inspect(a, out, err),
        Command::Bootstrap(BootstrapCommand::Annotate(a)) => cmd_annotate(a, out, err),
        Command::Bootstrap(BootstrapCommand::Merge(a)) => cmd_merge(a, out, err),
        Command::Bootstrap(BootstrapCommand::Cycle(a)) => cmd_cycle(a, out, err),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "seqtag: error[{}]: {msg}", e.kind());
            e.exit_code()
        }
    }
}
