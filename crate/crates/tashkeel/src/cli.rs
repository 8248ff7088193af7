//! Command line front end over the library: stream filters, data
//! preparation, corpus statistics, training, windowed inference, and
//! evaluation as non-interactive subcommands.
//!
//! Behavior is driven by a flat TOML run configuration (paths, model and
//! training settings, mixing weights, flags, seed); unknown keys are
//! rejected, and a handful of command line flags override the file. Exit
//! codes: 0 success, 1 usage errors, 2 data errors, 3 numeric failures.
//! Diagnostics go to stderr. The same configuration and seed produce
//! byte-identical reports across runs.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    freq_table, load_bitext, load_diacritized, oov_report, Bitext, DiacritizedCorpus, LinePolicy,
    OovMode, OovReport,
};
use crate::data::{
    make_diacritization_examples, make_translation_examples, mix, save_examples, translation_tag,
    CharVocab, Direction, DIAC_TAG, DEFAULT_TRANSLATION_MAX_CHARS,
};
use crate::eval::{
    self, AnnotationSet, EvalError, EvalOptions,
};
use crate::model::{
    checkpoint, train, CheckpointMeta, DecodeOptions, ModelConfig, ModelDecoder, TrainConfig,
    TrainError,
};
use crate::text::{normalize, segment, strip_diacritics};
use crate::window::{diacritize_lines, MismatchPolicy, Windowing};

/// Errors carried up to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration. Exit code 1.
    Usage(String),
    /// Unreadable or malformed input. Exit code 2.
    Data(anyhow::Error),
    /// Training diverged. Exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }
}

/// Wrap any error type as a data error.
fn data<E: Into<anyhow::Error>>(err: E) -> CliError {
    CliError::Data(err.into())
}

fn data_msg(msg: String) -> CliError {
    CliError::Data(anyhow::anyhow!(msg))
}

fn train_error(err: TrainError) -> CliError {
    match err {
        TrainError::NonFiniteLoss { .. } => CliError::Numeric(err.to_string()),
        other => data(other),
    }
}

/// One run's knobs, loadable from a flat TOML file. Every field has a
/// default, so an absent file or empty table is a valid configuration;
/// unknown keys are rejected to catch typos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Paths.
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub bitext_src_path: Option<PathBuf>,
    pub bitext_tgt_path: Option<PathBuf>,
    pub annotations_path: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
    /// When set, commands that produce a report also write it here as JSON.
    pub report_path: Option<PathBuf>,
    pub src_lang: String,
    pub tgt_lang: String,

    // Model shape.
    pub d_model: usize,
    pub ffn_dim: usize,
    pub n_heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub dropout: f64,
    pub attn_dropout: f64,
    pub act_dropout: f64,
    pub max_positions: usize,

    // Training.
    pub epochs: usize,
    pub char_budget: usize,
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub label_smoothing: f64,
    pub seed: u64,
    pub stop_at_zero_dev_wer: bool,

    // Task mixing.
    pub diac_weight: f64,
    pub forward_weight: f64,
    pub reverse_weight: f64,

    // Flags.
    pub constrained: bool,
    pub arabic_tokens_only: bool,
    pub normalize_variants: bool,
    pub skip_bad_lines: bool,

    // Inference windowing.
    pub window: usize,
    pub step: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            train_path: None,
            dev_path: None,
            bitext_src_path: None,
            bitext_tgt_path: None,
            annotations_path: None,
            checkpoint_dir: PathBuf::from("checkpoints"),
            report_path: None,
            src_lang: "ar".into(),
            tgt_lang: "en".into(),
            d_model: 64,
            ffn_dim: 128,
            n_heads: 4,
            enc_layers: 2,
            dec_layers: 2,
            dropout: 0.1,
            attn_dropout: 0.0,
            act_dropout: 0.0,
            max_positions: 304,
            epochs: 30,
            char_budget: 4_000,
            peak_lr: 3e-3,
            warmup_steps: 100,
            label_smoothing: 0.1,
            seed: 0,
            stop_at_zero_dev_wer: false,
            diac_weight: 1.0,
            forward_weight: 1.0,
            reverse_weight: 1.0,
            constrained: true,
            arabic_tokens_only: true,
            normalize_variants: false,
            skip_bad_lines: false,
            window: 300,
            step: 100,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d_model: self.d_model,
            ffn_dim: self.ffn_dim,
            n_heads: self.n_heads,
            enc_layers: self.enc_layers,
            dec_layers: self.dec_layers,
            dropout: self.dropout,
            attn_dropout: self.attn_dropout,
            act_dropout: self.act_dropout,
            max_positions: self.max_positions,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            char_budget: self.char_budget,
            peak_lr: self.peak_lr,
            warmup_steps: self.warmup_steps,
            label_smoothing: self.label_smoothing,
            seed: self.seed,
            stop_at_zero_dev_wer: self.stop_at_zero_dev_wer,
        }
    }

    pub fn windowing(&self) -> Windowing {
        Windowing { window: self.window, step: self.step, policy: MismatchPolicy::Align }
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions { constrained: self.constrained, ..DecodeOptions::default() }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            arabic_tokens_only: self.arabic_tokens_only,
            normalize_variants: self.normalize_variants,
        }
    }

    pub fn line_policy(&self) -> LinePolicy {
        if self.skip_bad_lines {
            LinePolicy::Skip
        } else {
            LinePolicy::Fail
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.window == 0 || self.step == 0 {
            return Err(CliError::usage("window and step must be at least 1"));
        }
        if self.step > self.window {
            return Err(CliError::usage("step must not exceed window"));
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(CliError::usage("d_model must be a positive multiple of n_heads"));
        }
        if self.max_positions < self.window + 1 {
            return Err(CliError::usage(
                "max_positions must cover a full window plus the task tag",
            ));
        }
        for (name, w) in [
            ("diac_weight", self.diac_weight),
            ("forward_weight", self.forward_weight),
            ("reverse_weight", self.reverse_weight),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(CliError::usage(format!("{name} must be finite and nonnegative")));
            }
        }
        for (name, p) in [
            ("dropout", self.dropout),
            ("attn_dropout", self.attn_dropout),
            ("act_dropout", self.act_dropout),
            ("label_smoothing", self.label_smoothing),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(CliError::usage(format!("{name} must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "tashkeel",
    version,
    about = "Arabic diacritization workbench",
    arg_required_else_help = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct GlobalOpts {
    /// Run configuration file (flat TOML, key = value).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Override the configured epoch count.
    #[arg(long, global = true, value_name = "N")]
    epochs: Option<usize>,
    /// Override the inference window length, in characters.
    #[arg(long, global = true, value_name = "CHARS")]
    window: Option<usize>,
    /// Override the inference window step, in characters.
    #[arg(long, global = true, value_name = "CHARS")]
    step: Option<usize>,
    /// Override constrained decoding.
    #[arg(long, global = true, value_name = "BOOL")]
    constrained: Option<bool>,
    /// Override scoring scope: count only tokens with Arabic letters.
    #[arg(long = "arabic-only", global = true, value_name = "BOOL")]
    arabic_only: Option<bool>,
    /// Override mark variant normalization in scoring.
    #[arg(long = "normalize-variants", global = true, value_name = "BOOL")]
    normalize_variants: Option<bool>,
    /// Skip malformed corpus lines instead of failing.
    #[arg(long = "skip-bad-lines", global = true)]
    skip_bad_lines: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Remove diacritics from text, line by line.
    Strip {
        /// Input file; standard input when omitted.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Split text into tokens of base characters and mark sets, as JSON lines.
    Segment {
        /// Input file; standard input when omitted.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Build the vocabulary and training example streams from the configured corpora.
    Prepare {
        /// Directory for vocab.json and the example stream files.
        #[arg(long = "out-dir", value_name = "DIR")]
        out_dir: PathBuf,
        /// Print the preparation report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Report word frequencies and out-of-vocabulary rates for a corpus.
    Stats {
        /// Diacritized corpus to describe.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Test corpus to score for OOV against `--corpus` as training data.
        #[arg(long, value_name = "FILE")]
        against: Option<PathBuf>,
        /// How many of the most frequent forms to list.
        #[arg(long, default_value_t = 10, value_name = "N")]
        top: usize,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Train a model on the configured corpora and write a checkpoint.
    Train {
        /// Training corpus; overrides train_path from the config.
        #[arg(long, value_name = "FILE")]
        train: Option<PathBuf>,
        /// Dev corpus for epoch selection; overrides dev_path.
        #[arg(long, value_name = "FILE")]
        dev: Option<PathBuf>,
        /// Bitext source side; overrides bitext_src_path.
        #[arg(long = "bitext-src", value_name = "FILE")]
        bitext_src: Option<PathBuf>,
        /// Bitext target side; overrides bitext_tgt_path.
        #[arg(long = "bitext-tgt", value_name = "FILE")]
        bitext_tgt: Option<PathBuf>,
        /// Checkpoint directory; overrides checkpoint_dir.
        #[arg(long = "out-dir", value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Diacritize text with a trained checkpoint, windowing long lines.
    Diacritize {
        /// Checkpoint file written by `train`.
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Vocabulary file; defaults to vocab.json next to the checkpoint.
        #[arg(long, value_name = "FILE")]
        vocab: Option<PathBuf>,
        /// Input file; standard input when omitted.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Score predictions against a reference: word and diacritic error rates.
    Evaluate {
        /// Predicted diacritized lines.
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Reference diacritized lines.
        #[arg(long = "ref", value_name = "FILE")]
        reference: PathBuf,
        /// Token annotation file for the case-ending error scope.
        #[arg(long, value_name = "FILE")]
        annotations: Option<PathBuf>,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Break word error rate down by frequency bucket, part of speech, gender, and length.
    Analyze {
        /// Predicted diacritized lines.
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Reference diacritized lines.
        #[arg(long = "ref", value_name = "FILE")]
        reference: PathBuf,
        /// Training corpus for frequency buckets; defaults to train_path.
        #[arg(long = "train-corpus", value_name = "FILE")]
        train_corpus: Option<PathBuf>,
        /// Token annotation file; defaults to annotations_path.
        #[arg(long, value_name = "FILE")]
        annotations: Option<PathBuf>,
        /// Sentence length bin width, in tokens.
        #[arg(long = "bin-width", default_value_t = 10, value_name = "N")]
        bin_width: usize,
        /// Require the part-of-speech breakdown (needs annotations).
        #[arg(long)]
        pos: bool,
        /// Require the gender breakdown (needs annotations).
        #[arg(long)]
        gender: bool,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

/// Parse arguments, run one command, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational { 0 } else { 1 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("usage error: {msg}"),
                CliError::Data(err) => eprintln!("data error: {err}"),
                CliError::Numeric(msg) => eprintln!("numeric error: {msg}"),
            }
            e.exit_code()
        }
    }
}

fn effective_config(global: &GlobalOpts) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = global.epochs {
        cfg.epochs = epochs;
    }
    if let Some(window) = global.window {
        cfg.window = window;
    }
    if let Some(step) = global.step {
        cfg.step = step;
    }
    if let Some(constrained) = global.constrained {
        cfg.constrained = constrained;
    }
    if let Some(arabic_only) = global.arabic_only {
        cfg.arabic_tokens_only = arabic_only;
    }
    if let Some(normalize_variants) = global.normalize_variants {
        cfg.normalize_variants = normalize_variants;
    }
    if global.skip_bad_lines {
        cfg.skip_bad_lines = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli.global)?;
    match cli.command {
        Command::Strip { input, output } => cmd_strip(input.as_deref(), output.as_deref()),
        Command::Segment { input, output } => cmd_segment(input.as_deref(), output.as_deref()),
        Command::Prepare { out_dir, json } => cmd_prepare(&cfg, &out_dir, json),
        Command::Stats { corpus, against, top, json } => {
            cmd_stats(&cfg, &corpus, against.as_deref(), top, json)
        }
        Command::Train { train, dev, bitext_src, bitext_tgt, out_dir } => {
            cmd_train(&cfg, train, dev, bitext_src, bitext_tgt, out_dir)
        }
        Command::Diacritize { checkpoint, vocab, input, output } => {
            cmd_diacritize(&cfg, &checkpoint, vocab, input.as_deref(), output.as_deref())
        }
        Command::Evaluate { pred, reference, annotations, json } => {
            cmd_evaluate(&cfg, &pred, &reference, annotations, json)
        }
        Command::Analyze {
            pred,
            reference,
            train_corpus,
            annotations,
            bin_width,
            pos,
            gender,
            json,
        } => cmd_analyze(
            &cfg,
            &pred,
            &reference,
            train_corpus,
            annotations,
            bin_width,
            pos,
            gender,
            json,
        ),
    }
}

// ---------------------------------------------------------------- plumbing

fn read_lines(path: Option<&Path>) -> Result<Vec<String>, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| data_msg(format!("cannot read {}: {e}", p.display())))?,
        None => {
            let mut buf = String::new();
            io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| data_msg(format!("cannot read standard input: {e}")))?;
            buf
        }
    };
    Ok(text.lines().map(str::to_string).collect())
}

fn write_text(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| data_msg(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| data_msg(format!("cannot write standard output: {e}"))),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| data_msg(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, content).map_err(|e| data_msg(format!("cannot write {}: {e}", path.display())))
}

/// Serialize a report value; report structs in this crate cannot fail here.
fn to_pretty_json<S: Serialize>(value: &S) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// Print a report and, when the configuration names a report file, write the
/// JSON form there as well.
fn emit_report(cfg: &RunConfig, json: bool, json_text: &str, table: &str) -> Result<(), CliError> {
    if json {
        print!("{json_text}");
    } else {
        print!("{table}");
    }
    if let Some(path) = &cfg.report_path {
        write_file(path, json_text)?;
    }
    Ok(())
}

const VOCAB_FILE: &str = "vocab.json";

/// On-disk vocabulary: the task tags in order plus every character symbol.
/// `CharVocab::build` reconstructs the exact id assignment from this.
#[derive(Serialize, Deserialize)]
struct VocabFile {
    task_tags: Vec<String>,
    chars: String,
}

fn vocab_to_json(vocab: &CharVocab) -> String {
    let mut chars = String::new();
    let mut id = (4 + vocab.task_tags().len()) as u32;
    while let Some(symbol) = vocab.symbol(id) {
        chars.push_str(symbol);
        id += 1;
    }
    to_pretty_json(&VocabFile { task_tags: vocab.task_tags().to_vec(), chars })
}

fn vocab_from_json(text: &str) -> Result<CharVocab, CliError> {
    let file: VocabFile =
        serde_json::from_str(text).map_err(|e| data_msg(format!("malformed vocabulary: {e}")))?;
    let tags: Vec<&str> = file.task_tags.iter().map(String::as_str).collect();
    Ok(CharVocab::build([file.chars.as_str()], &tags))
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn load_corpus(path: &Path, policy: LinePolicy) -> Result<DiacritizedCorpus, CliError> {
    load_diacritized(path, policy).map_err(data)
}

/// Load the configured bitext when both sides are present; one side alone is
/// a configuration mistake.
fn load_configured_bitext(
    cfg: &RunConfig,
    src: Option<PathBuf>,
    tgt: Option<PathBuf>,
) -> Result<Option<Bitext>, CliError> {
    let src = src.or_else(|| cfg.bitext_src_path.clone());
    let tgt = tgt.or_else(|| cfg.bitext_tgt_path.clone());
    match (src, tgt) {
        (Some(s), Some(t)) => {
            Ok(Some(load_bitext(&s, &t, &cfg.src_lang, &cfg.tgt_lang).map_err(data)?))
        }
        (None, None) => Ok(None),
        _ => Err(CliError::usage("a bitext needs both a source and a target file")),
    }
}

/// Vocabulary over the rendered training lines, both bitext sides, and the
/// task tags for every configured task.
fn build_vocab(train: &DiacritizedCorpus, bitext: Option<&Bitext>) -> CharVocab {
    let rendered: Vec<String> = train.lines().iter().map(|l| l.render()).collect();
    let mut texts: Vec<&str> = rendered.iter().map(String::as_str).collect();
    let mut tags = vec![DIAC_TAG.to_string()];
    if let Some(b) = bitext {
        for (s, t) in b.pairs() {
            texts.push(s);
            texts.push(t);
        }
        tags.push(translation_tag(b.src_lang(), b.tgt_lang()));
        tags.push(translation_tag(b.tgt_lang(), b.src_lang()));
    }
    let tag_refs: Vec<&str> = tags.iter().map(String::as_str).collect();
    CharVocab::build(texts, &tag_refs)
}

// ---------------------------------------------------------------- commands

fn cmd_strip(input: Option<&Path>, output: Option<&Path>) -> Result<(), CliError> {
    let lines = read_lines(input)?;
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let stripped = strip_diacritics(&normalize(line))
            .map_err(|e| data_msg(format!("line {}: {e}", i + 1)))?;
        out.push_str(&stripped);
        out.push('\n');
    }
    write_text(output, &out)
}

#[derive(Serialize)]
struct TokenView {
    text: String,
    bases: String,
    /// Mark names per base character slot, in canonical order.
    marks: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct LineView {
    line: usize,
    tokens: Vec<TokenView>,
}

fn cmd_segment(input: Option<&Path>, output: Option<&Path>) -> Result<(), CliError> {
    let lines = read_lines(input)?;
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let seq = segment(&normalize(line))
            .map_err(|e| data_msg(format!("line {}: {e}", i + 1)))?;
        let tokens = seq
            .tokens()
            .iter()
            .map(|tok| TokenView {
                text: tok.render(),
                bases: tok.bases(),
                marks: tok
                    .slots()
                    .iter()
                    .map(|slot| slot.marks.iter().map(|m| format!("{m:?}")).collect())
                    .collect(),
            })
            .collect();
        let view = LineView { line: i + 1, tokens };
        out.push_str(&serde_json::to_string(&view).expect("token view serializes"));
        out.push('\n');
    }
    write_text(output, &out)
}

#[derive(Serialize)]
struct StreamReport {
    file: String,
    examples: usize,
    dropped_long: usize,
    dropped_empty: usize,
}

fn cmd_prepare(cfg: &RunConfig, out_dir: &Path, json: bool) -> Result<(), CliError> {
    let train_path = cfg
        .train_path
        .clone()
        .ok_or_else(|| CliError::usage("prepare needs train_path in the configuration"))?;
    let corpus = load_corpus(&train_path, cfg.line_policy())?;
    let bitext = load_configured_bitext(cfg, None, None)?;
    let vocab = build_vocab(&corpus, bitext.as_ref());

    fs::create_dir_all(out_dir)
        .map_err(|e| data_msg(format!("cannot create {}: {e}", out_dir.display())))?;
    write_file(&out_dir.join(VOCAB_FILE), &vocab_to_json(&vocab))?;

    // Window inference caps sources at window + tag, so train on the same cap.
    let max_src_chars = cfg.max_positions - 1;
    let mut streams = Vec::new();

    let diac = make_diacritization_examples(&corpus, &vocab, Some(max_src_chars));
    save_examples(out_dir.join("diac.jsonl"), &diac.examples).map_err(data)?;
    streams.push(StreamReport {
        file: "diac.jsonl".into(),
        examples: diac.examples.len(),
        dropped_long: diac.dropped_long,
        dropped_empty: diac.dropped_empty,
    });

    if let Some(b) = &bitext {
        let max_pair_chars = max_src_chars.min(DEFAULT_TRANSLATION_MAX_CHARS);
        for (direction, name) in [
            (Direction::Forward, format!("{}2{}.jsonl", cfg.src_lang, cfg.tgt_lang)),
            (Direction::Reverse, format!("{}2{}.jsonl", cfg.tgt_lang, cfg.src_lang)),
        ] {
            let set = make_translation_examples(b, &vocab, direction, max_pair_chars);
            save_examples(out_dir.join(&name), &set.examples).map_err(data)?;
            streams.push(StreamReport {
                file: name,
                examples: set.examples.len(),
                dropped_long: set.dropped_long,
                dropped_empty: set.dropped_empty,
            });
        }
    }

    let report = serde_json::json!({
        "out_dir": out_dir.display().to_string(),
        "corpus_lines": corpus.len(),
        "skipped_lines": corpus.skipped_lines(),
        "bitext_pairs": bitext.as_ref().map(|b| b.len()),
        "vocab_symbols": vocab.len(),
        "task_tags": vocab.task_tags(),
        "streams": streams,
    });
    let mut table = format!(
        "prepared {} with {} vocabulary symbols ({} task tags)\n",
        out_dir.display(),
        vocab.len(),
        vocab.task_tags().len()
    );
    for s in &streams {
        table.push_str(&format!(
            "{:<16} {:>8} examples ({} dropped long, {} dropped empty)\n",
            s.file, s.examples, s.dropped_long, s.dropped_empty
        ));
    }
    emit_report(cfg, json, &to_pretty_json(&report), &table)
}

fn cmd_stats(
    cfg: &RunConfig,
    corpus_path: &Path,
    against: Option<&Path>,
    top: usize,
    json: bool,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus_path, cfg.line_policy())?;
    let freqs = freq_table(&corpus);
    let top_forms: Vec<(String, u64)> =
        freqs.sorted().into_iter().take(top).map(|(w, c)| (w.to_string(), c)).collect();

    let mut oov_token: Option<OovReport> = None;
    let mut oov_type: Option<OovReport> = None;
    if let Some(test_path) = against {
        let test = load_corpus(test_path, cfg.line_policy())?;
        oov_token = Some(oov_report(&corpus, &test, OovMode::Token).map_err(data)?);
        oov_type = Some(oov_report(&corpus, &test, OovMode::Type).map_err(data)?);
    }

    let report = serde_json::json!({
        "corpus": corpus_path.display().to_string(),
        "lines": corpus.len(),
        "skipped_lines": corpus.skipped_lines(),
        "tokens": corpus.token_count(),
        "types": freqs.len(),
        "top_forms": top_forms,
        "oov_token": oov_token,
        "oov_type": oov_type,
    });

    let mut table = format!(
        "{}: {} lines, {} tokens, {} stripped types\n",
        corpus_path.display(),
        corpus.len(),
        corpus.token_count(),
        freqs.len()
    );
    if !top_forms.is_empty() {
        table.push_str(&format!("top {} stripped forms:\n", top_forms.len()));
        for (word, count) in &top_forms {
            table.push_str(&format!("{count:>10}  {word}\n"));
        }
    }
    for (label, oov) in [("token", &oov_token), ("type", &oov_type)] {
        if let Some(o) = oov {
            table.push_str(&format!(
                "{label} OOV: encoder {:.2}% ({} / {}), decoder {:.2}% ({} / {})\n",
                o.encoder_oov_rate * 100.0,
                o.encoder_oov_units,
                o.test_units,
                o.decoder_oov_rate * 100.0,
                o.decoder_oov_units,
                o.test_units,
            ));
        }
    }
    emit_report(cfg, json, &to_pretty_json(&report), &table)
}

fn cmd_train(
    cfg: &RunConfig,
    train_path: Option<PathBuf>,
    dev_path: Option<PathBuf>,
    bitext_src: Option<PathBuf>,
    bitext_tgt: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let train_path = train_path
        .or_else(|| cfg.train_path.clone())
        .ok_or_else(|| CliError::usage("train needs train_path in the configuration or --train"))?;
    let dev_path = dev_path
        .or_else(|| cfg.dev_path.clone())
        .ok_or_else(|| CliError::usage("train needs dev_path in the configuration or --dev"))?;
    let ckpt_dir = out_dir.unwrap_or_else(|| cfg.checkpoint_dir.clone());

    let policy = cfg.line_policy();
    let train_corpus = load_corpus(&train_path, policy)?;
    let dev_corpus = load_corpus(&dev_path, policy)?;
    let bitext = load_configured_bitext(cfg, bitext_src, bitext_tgt)?;
    let vocab = build_vocab(&train_corpus, bitext.as_ref());

    let max_src_chars = cfg.max_positions - 1;
    let diac = make_diacritization_examples(&train_corpus, &vocab, Some(max_src_chars));
    let mut dropped = diac.dropped_long + diac.dropped_empty;
    let mut streams = vec![diac.examples];
    let mut weights = vec![cfg.diac_weight];
    if let Some(b) = &bitext {
        let max_pair_chars = max_src_chars.min(DEFAULT_TRANSLATION_MAX_CHARS);
        let forward = make_translation_examples(b, &vocab, Direction::Forward, max_pair_chars);
        let reverse = make_translation_examples(b, &vocab, Direction::Reverse, max_pair_chars);
        dropped += forward.dropped_long + reverse.dropped_long;
        streams.push(forward.examples);
        weights.push(cfg.forward_weight);
        streams.push(reverse.examples);
        weights.push(cfg.reverse_weight);
    }
    let examples = mix(&streams, &weights, cfg.seed);
    if dropped > 0 {
        eprintln!("dropped {dropped} over-length or empty lines while building examples");
    }

    let model_cfg = cfg.model_config(vocab.len());
    let trained = train(
        &model_cfg,
        &cfg.train_config(),
        &examples,
        &dev_corpus,
        &vocab,
        &cfg.decode_options(),
    )
    .map_err(train_error)?;
    for e in &trained.report.epochs {
        eprintln!(
            "epoch {:>3}: {} batches, mean loss {:.4}, dev WER {:.2}%",
            e.epoch,
            e.batches,
            e.mean_loss,
            e.dev_wer * 100.0
        );
    }

    fs::create_dir_all(&ckpt_dir)
        .map_err(|e| data_msg(format!("cannot create {}: {e}", ckpt_dir.display())))?;
    let vocab_json = vocab_to_json(&vocab);
    write_file(&ckpt_dir.join(VOCAB_FILE), &vocab_json)?;
    let ckpt_path = ckpt_dir.join("model.ckpt");
    let meta = CheckpointMeta {
        config: model_cfg,
        vocab_sha256: sha256_hex(vocab_json.as_bytes()),
        epoch: trained.report.best_epoch,
        dev_wer: Some(trained.report.best_dev_wer),
        tensors: Vec::new(),
    };
    checkpoint::save(&ckpt_path, &trained.params, meta).map_err(data)?;

    let report_path =
        cfg.report_path.clone().unwrap_or_else(|| ckpt_dir.join("train_report.json"));
    write_file(&report_path, &to_pretty_json(&trained.report))?;

    println!(
        "trained {} epochs on {} examples, {} vocabulary symbols",
        trained.report.epochs.len(),
        examples.len(),
        vocab.len()
    );
    println!(
        "best dev WER {:.2}% at epoch {}",
        trained.report.best_dev_wer * 100.0,
        trained.report.best_epoch
    );
    println!("checkpoint: {}", ckpt_path.display());
    Ok(())
}

fn cmd_diacritize(
    cfg: &RunConfig,
    checkpoint_path: &Path,
    vocab_path: Option<PathBuf>,
    input: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let (params, meta) = checkpoint::load(checkpoint_path).map_err(data)?;
    let vocab_path = vocab_path.unwrap_or_else(|| {
        checkpoint_path.parent().unwrap_or(Path::new(".")).join(VOCAB_FILE)
    });
    let vocab_bytes = fs::read(&vocab_path)
        .map_err(|e| data_msg(format!("cannot read {}: {e}", vocab_path.display())))?;
    if sha256_hex(&vocab_bytes) != meta.vocab_sha256 {
        return Err(data_msg(format!(
            "vocabulary {} does not match the checkpoint",
            vocab_path.display()
        )));
    }
    let vocab_text = std::str::from_utf8(&vocab_bytes)
        .map_err(|e| data_msg(format!("vocabulary {} is not UTF-8: {e}", vocab_path.display())))?;
    let vocab = vocab_from_json(vocab_text)?;
    if cfg.window + 1 > meta.config.max_positions {
        return Err(CliError::usage(format!(
            "window {} exceeds the checkpoint's position budget {}; pass a smaller --window",
            cfg.window,
            meta.config.max_positions - 1
        )));
    }

    let lines = read_lines(input)?;
    let mut stripped = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        stripped.push(
            strip_diacritics(&normalize(line))
                .map_err(|e| data_msg(format!("line {}: {e}", i + 1)))?,
        );
    }

    let decoder = ModelDecoder {
        params: &params,
        cfg: &meta.config,
        vocab: &vocab,
        opts: cfg.decode_options(),
    };
    let (out_lines, stats) =
        diacritize_lines(&decoder, &stripped, &cfg.windowing()).map_err(CliError::Data)?;

    let mut out = String::new();
    for line in &out_lines {
        out.push_str(line);
        out.push('\n');
    }
    write_text(output, &out)?;
    eprintln!(
        "{} lines, {} windowed, {} windows, {} mismatched",
        stats.lines, stats.windowed_lines, stats.windows, stats.mismatched_windows
    );
    Ok(())
}

fn load_annotations(path: &Path) -> Result<AnnotationSet, CliError> {
    AnnotationSet::load(path).map_err(data)
}

fn cmd_evaluate(
    cfg: &RunConfig,
    pred_path: &Path,
    ref_path: &Path,
    annotations: Option<PathBuf>,
    json: bool,
) -> Result<(), CliError> {
    let pred = read_lines(Some(pred_path))?;
    let reference = read_lines(Some(ref_path))?;
    let annotations = match annotations.or_else(|| cfg.annotations_path.clone()) {
        Some(p) => Some(load_annotations(&p)?),
        None => None,
    };
    let opts = cfg.eval_options();
    let wer = eval::wer(&pred, &reference, &opts).map_err(data)?;
    let der = eval::der(&pred, &reference, annotations.as_ref(), &opts).map_err(data)?;

    let report = serde_json::json!({ "wer": wer, "der": der });
    let table = format!("{}{}", wer.to_text(), der.to_text());
    emit_report(cfg, json, &to_pretty_json(&report), &table)
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    cfg: &RunConfig,
    pred_path: &Path,
    ref_path: &Path,
    train_corpus: Option<PathBuf>,
    annotations: Option<PathBuf>,
    bin_width: usize,
    pos: bool,
    gender: bool,
    json: bool,
) -> Result<(), CliError> {
    if bin_width == 0 {
        return Err(CliError::usage("bin width must be at least 1"));
    }
    let pred = read_lines(Some(pred_path))?;
    let reference = read_lines(Some(ref_path))?;
    let opts = cfg.eval_options();

    let annotations_path = annotations.or_else(|| cfg.annotations_path.clone());
    if (pos || gender) && annotations_path.is_none() {
        return Err(data(EvalError::MissingAnnotations));
    }

    let mut sections = serde_json::Map::new();
    let mut table = String::new();

    let length = eval::wer_by_length(&pred, &reference, bin_width, &opts).map_err(data)?;
    sections.insert("length".into(), serde_json::to_value(&length).expect("report serializes"));
    table.push_str(&length.to_text());

    if let Some(train_path) = train_corpus.or_else(|| cfg.train_path.clone()) {
        let train = load_corpus(&train_path, cfg.line_policy())?;
        let freqs = freq_table(&train);
        let bucket = eval::wer_by_bucket(&pred, &reference, &freqs, &opts).map_err(data)?;
        sections.insert("bucket".into(), serde_json::to_value(&bucket).expect("report serializes"));
        table.push('\n');
        table.push_str(&bucket.to_text());
    }

    if let Some(ann_path) = annotations_path {
        let ann = load_annotations(&ann_path)?;
        let pos_report = eval::wer_by_pos(&pred, &reference, &ann, &opts).map_err(data)?;
        let gender_report = eval::wer_by_gender(&pred, &reference, &ann, &opts).map_err(data)?;
        sections.insert("pos".into(), serde_json::to_value(&pos_report).expect("report serializes"));
        sections
            .insert("gender".into(), serde_json::to_value(&gender_report).expect("report serializes"));
        table.push('\n');
        table.push_str(&pos_report.to_text());
        table.push('\n');
        table.push_str(&gender_report.to_text());
    }

    emit_report(cfg, json, &to_pretty_json(&sections), &table)
}
