//! Multitask training data: a shared character vocabulary, task-tagged
//! examples, stream mixing, and character-budget batching.
//!
//! Every example is a pair of id sequences over one [`CharVocab`]. The first
//! source id is always a task tag, a control symbol such as `<diac>` or
//! `<ar2en>`, which is how one model learns several tasks at once.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Bitext, DiacritizedCorpus};

/// Padding id, also the id rows attention must ignore.
pub const PAD: u32 = 0;
/// Decoder start-of-sequence id.
pub const BOS: u32 = 1;
/// End-of-sequence id, the label after the last target character.
pub const EOS: u32 = 2;
/// Fallback id for characters outside the vocabulary.
pub const UNK: u32 = 3;

const VOCAB_HEADER: &str = "tashkeel-vocab v1";

/// The tag that marks a diacritization example.
pub const DIAC_TAG: &str = "<diac>";

/// The tag for a translation example from `src` to `tgt` language codes.
pub fn translation_tag(src_lang: &str, tgt_lang: &str) -> String {
    format!("<{src_lang}2{tgt_lang}>")
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    BadFile { path: String, reason: String },
    #[error("line {line_no} of {path}: {source}")]
    BadLine {
        path: String,
        line_no: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// A character-level vocabulary shared by all tasks.
///
/// Id layout: `<pad>`=0, `<bos>`=1, `<eos>`=2, `<unk>`=3, then the task tags
/// in the order given at build time, then every character sorted by code
/// point. The layout is deterministic for a given (tags, character set)
/// input, so two builds over the same data agree id for id.
#[derive(Debug, Clone)]
pub struct CharVocab {
    symbols: Vec<String>,
    index: HashMap<String, u32>,
    char_index: HashMap<char, u32>,
    n_tags: usize,
}

impl CharVocab {
    /// Collect every character of every text, then lay out the id space.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, task_tags: &[&str]) -> CharVocab {
        let mut chars = BTreeSet::new();
        for t in texts {
            chars.extend(t.chars());
        }
        let mut symbols: Vec<String> =
            vec!["<pad>".into(), "<bos>".into(), "<eos>".into(), "<unk>".into()];
        symbols.extend(task_tags.iter().map(|t| t.to_string()));
        symbols.extend(chars.iter().map(|c| c.to_string()));
        Self::from_symbols(symbols, task_tags.len())
    }

    fn from_symbols(symbols: Vec<String>, n_tags: usize) -> CharVocab {
        let mut index = HashMap::new();
        let mut char_index = HashMap::new();
        for (i, s) in symbols.iter().enumerate() {
            index.insert(s.clone(), i as u32);
            let mut it = s.chars();
            if let (Some(c), None) = (it.next(), it.next()) {
                char_index.insert(c, i as u32);
            }
        }
        CharVocab { symbols, index, char_index, n_tags }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Task tags in id order.
    pub fn task_tags(&self) -> &[String] {
        &self.symbols[4..4 + self.n_tags]
    }

    pub fn id(&self, symbol: &str) -> Option<u32> {
        self.index.get(symbol).copied()
    }

    /// Id of a character, or [`UNK`] when it is not in the vocabulary.
    pub fn char_id(&self, c: char) -> u32 {
        self.char_index.get(&c).copied().unwrap_or(UNK)
    }

    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.symbols.get(id as usize).map(|s| s.as_str())
    }

    /// Encode a text character by character (no specials added).
    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        text.chars().map(|c| self.char_id(c)).collect()
    }

    /// Decode character ids back to text. Control symbols (pad, bos, eos,
    /// task tags) are skipped; unknowns render as U+FFFD.
    pub fn decode_to_string(&self, ids: &[u32]) -> String {
        let first_char = 4 + self.n_tags as u32;
        let mut out = String::new();
        for &id in ids {
            if id == UNK {
                out.push('\u{FFFD}');
            } else if id >= first_char {
                if let Some(s) = self.symbol(id) {
                    out.push_str(s);
                }
            }
        }
        out
    }

    /// Serialize: a header line, the tag count, then one JSON-escaped symbol
    /// per line in id order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(VOCAB_HEADER);
        out.push('\n');
        out.push_str(&format!("tags {}\n", self.n_tags));
        for s in &self.symbols {
            out.push_str(&serde_json::to_string(s).expect("string to json"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_file_string()).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CharVocab, DataError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let content = std::fs::read_to_string(path)
            .map_err(|source| DataError::Io { path: display.clone(), source })?;
        Self::from_file_string(&content)
            .map_err(|reason| DataError::BadFile { path: display, reason })
    }

    pub fn from_file_string(content: &str) -> Result<CharVocab, String> {
        let mut lines = content.lines();
        match lines.next() {
            Some(h) if h == VOCAB_HEADER => {}
            other => return Err(format!("bad header {other:?}, expected {VOCAB_HEADER:?}")),
        }
        let n_tags: usize = match lines.next().and_then(|l| l.strip_prefix("tags ")) {
            Some(n) => n.parse().map_err(|e| format!("bad tag count: {e}"))?,
            None => return Err("missing tag count line".into()),
        };
        let mut symbols = Vec::new();
        for (i, line) in lines.enumerate() {
            let s: String = serde_json::from_str(line)
                .map_err(|e| format!("symbol line {}: {e}", i + 1))?;
            symbols.push(s);
        }
        if symbols.len() < 4 + n_tags {
            return Err(format!("{} symbols is too few for {} tags", symbols.len(), n_tags));
        }
        for (want, id) in [("<pad>", PAD), ("<bos>", BOS), ("<eos>", EOS), ("<unk>", UNK)] {
            if symbols[id as usize] != want {
                return Err(format!("symbol {id} is {:?}, expected {want:?}", symbols[id as usize]));
            }
        }
        Ok(Self::from_symbols(symbols, n_tags))
    }

    /// Hash of the serialized form, recorded in checkpoints so a model is
    /// never decoded against the wrong id space.
    pub fn sha256_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_file_string().as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One training pair. `src` starts with a task tag id; `tgt` is bare
/// character ids (batching adds bos/eos/padding).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
}

impl Example {
    /// The task tag id, always the first source id.
    pub fn tag(&self) -> u32 {
        self.src[0]
    }

    /// Cost used for character-budget batching.
    pub fn cost(&self) -> usize {
        self.src.len().max(self.tgt.len())
    }
}

/// Examples plus counts of what the constructor refused.
#[derive(Debug, Clone)]
pub struct ExampleSet {
    pub examples: Vec<Example>,
    /// Lines or pairs over the length limit.
    pub dropped_long: usize,
    /// Whitespace-only lines, which carry no training signal.
    pub dropped_empty: usize,
}

/// Default per-side character limit for translation pairs.
pub const DEFAULT_TRANSLATION_MAX_CHARS: usize = 600;

/// Diacritization examples: source is the stripped line, target the fully
/// diacritized line. Long lines are kept by default (windowed inference
/// handles them); pass a limit to drop them instead.
pub fn make_diacritization_examples(
    corpus: &DiacritizedCorpus,
    vocab: &CharVocab,
    max_chars: Option<usize>,
) -> ExampleSet {
    let tag = vocab.id(DIAC_TAG).expect("vocabulary lacks the diacritization tag");
    let mut examples = Vec::new();
    let mut dropped_long = 0usize;
    let mut dropped_empty = 0usize;
    for line in corpus.lines() {
        let stripped = line.bases();
        let rendered = line.render();
        if stripped.trim().is_empty() {
            dropped_empty += 1;
            continue;
        }
        if let Some(limit) = max_chars {
            if stripped.chars().count() > limit {
                dropped_long += 1;
                continue;
            }
        }
        let mut src = vec![tag];
        src.extend(vocab.encode_text(&stripped));
        examples.push(Example { src, tgt: vocab.encode_text(&rendered) });
    }
    ExampleSet { examples, dropped_long, dropped_empty }
}

/// Which way through a bitext a translation task reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Bitext source language to target language.
    Forward,
    /// Target language back to source language.
    Reverse,
}

/// Translation examples in one direction. A pair is dropped when either side
/// exceeds `max_chars` characters; both directions therefore drop the same
/// pairs.
pub fn make_translation_examples(
    bitext: &Bitext,
    vocab: &CharVocab,
    direction: Direction,
    max_chars: usize,
) -> ExampleSet {
    let tag_name = match direction {
        Direction::Forward => translation_tag(bitext.src_lang(), bitext.tgt_lang()),
        Direction::Reverse => translation_tag(bitext.tgt_lang(), bitext.src_lang()),
    };
    let tag = vocab
        .id(&tag_name)
        .unwrap_or_else(|| panic!("vocabulary lacks the translation tag {tag_name}"));
    let mut examples = Vec::new();
    let mut dropped_long = 0usize;
    for (s, t) in bitext.pairs() {
        if s.chars().count() > max_chars || t.chars().count() > max_chars {
            dropped_long += 1;
            continue;
        }
        let (from, to) = match direction {
            Direction::Forward => (s, t),
            Direction::Reverse => (t, s),
        };
        let mut src = vec![tag];
        src.extend(vocab.encode_text(from));
        examples.push(Example { src, tgt: vocab.encode_text(to) });
    }
    ExampleSet { examples, dropped_long, dropped_empty: 0 }
}

/// Mix task streams into one training sequence. Each stream is repeated
/// `ceil(weight)` times (a fractional weight rounds up, zero drops the
/// stream), then the whole pool is shuffled once with a seeded generator.
pub fn mix(streams: &[Vec<Example>], weights: &[f64], seed: u64) -> Vec<Example> {
    assert_eq!(streams.len(), weights.len(), "one weight per stream");
    let mut pool = Vec::new();
    for (stream, &w) in streams.iter().zip(weights) {
        assert!(w >= 0.0 && w.is_finite(), "weights must be finite and nonnegative");
        let copies = w.ceil() as usize;
        for _ in 0..copies {
            pool.extend(stream.iter().cloned());
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool
}

/// A batch is a run of example indices whose summed cost fits the budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
}

/// Greedy order-preserving batching: examples join the current batch while
/// the sum of per-example costs (max of source and target length) stays
/// within `char_budget`. An example larger than the whole budget still gets
/// a singleton batch.
pub fn make_batches(examples: &[Example], char_budget: usize) -> Vec<Batch> {
    assert!(char_budget > 0, "char budget must be positive");
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut used = 0usize;
    for (i, ex) in examples.iter().enumerate() {
        let cost = ex.cost();
        if !current.is_empty() && used + cost > char_budget {
            batches.push(Batch { indices: std::mem::take(&mut current) });
            used = 0;
        }
        current.push(i);
        used += cost;
    }
    if !current.is_empty() {
        batches.push(Batch { indices: current });
    }
    batches
}

/// Write examples as JSON lines.
pub fn save_examples(path: impl AsRef<Path>, examples: &[Example]) -> Result<(), DataError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file =
        File::create(path).map_err(|source| DataError::Io { path: display.clone(), source })?;
    let mut w = BufWriter::new(file);
    for ex in examples {
        let line = serde_json::to_string(ex).expect("example to json");
        writeln!(w, "{line}").map_err(|source| DataError::Io { path: display.clone(), source })?;
    }
    w.flush().map_err(|source| DataError::Io { path: display, source })
}

/// Read examples written by [`save_examples`].
pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<Example>, DataError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file =
        File::open(path).map_err(|source| DataError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: Example = serde_json::from_str(&line).map_err(|source| DataError::BadLine {
            path: display.clone(),
            line_no: i + 1,
            source,
        })?;
        out.push(ex);
    }
    Ok(out)
}
