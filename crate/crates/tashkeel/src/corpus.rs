//! Corpus and bitext ingestion, word-frequency tables, and OOV reports.
//!
//! All text is canonically normalized at ingestion. Diacritized corpora are
//! segmented line by line; a malformed line either fails the load or is
//! skipped with a count, per [`LinePolicy`].

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::{self, DiacritizedSeq, SegmentError};

/// What to do with a line that fails segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinePolicy {
    /// Abort the load with the line number. Default for gold diacritized data.
    Fail,
    /// Drop the line and count it.
    Skip,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line_no} of {path}: {source}")]
    MalformedLine {
        path: String,
        /// 1-based line number.
        line_no: usize,
        #[source]
        source: SegmentError,
    },
    #[error("line count mismatch: {src_path} has {src_lines} lines, {tgt_path} has {tgt_lines}")]
    LineCountMismatch {
        src_path: String,
        tgt_path: String,
        src_lines: usize,
        tgt_lines: usize,
    },
    #[error("test corpus is empty")]
    EmptyTest,
}

/// A line-per-sentence diacritized corpus.
#[derive(Debug, Clone)]
pub struct DiacritizedCorpus {
    lines: Vec<DiacritizedSeq>,
    source_path: String,
    skipped_lines: usize,
}

impl DiacritizedCorpus {
    /// Build from in-memory lines (normalizing and segmenting each).
    pub fn from_lines<I, S>(lines: I, policy: LinePolicy) -> Result<DiacritizedCorpus, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::from_named_lines(lines, policy, "<memory>")
    }

    fn from_named_lines<I, S>(
        lines: I,
        policy: LinePolicy,
        path: &str,
    ) -> Result<DiacritizedCorpus, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut skipped = 0usize;
        for (i, line) in lines.into_iter().enumerate() {
            let norm = text::normalize(line.as_ref());
            match text::segment(&norm) {
                Ok(seq) => out.push(seq),
                Err(e) => match policy {
                    LinePolicy::Fail => {
                        return Err(CorpusError::MalformedLine {
                            path: path.to_string(),
                            line_no: i + 1,
                            source: e,
                        })
                    }
                    LinePolicy::Skip => skipped += 1,
                },
            }
        }
        Ok(DiacritizedCorpus { lines: out, source_path: path.to_string(), skipped_lines: skipped })
    }

    pub fn lines(&self) -> &[DiacritizedSeq] {
        &self.lines
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    /// Lines dropped under [`LinePolicy::Skip`].
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Whitespace-separated tokens of every line, in order.
    pub fn tokens(&self) -> impl Iterator<Item = DiacritizedSeq> + '_ {
        self.lines.iter().flat_map(|l| l.tokens())
    }

    pub fn token_count(&self) -> usize {
        self.lines.iter().map(|l| l.token_spans().len()).sum()
    }
}

/// Read a one-sentence-per-line diacritized corpus.
pub fn load_diacritized(
    path: impl AsRef<Path>,
    policy: LinePolicy,
) -> Result<DiacritizedCorpus, CorpusError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| CorpusError::Io { path: display.clone(), source })?;
        lines.push(line.trim_end_matches('\r').to_string());
    }
    DiacritizedCorpus::from_named_lines(lines, policy, &display)
}

/// Sentence-aligned parallel text.
#[derive(Debug, Clone)]
pub struct Bitext {
    pairs: Vec<(String, String)>,
    src_lang: String,
    tgt_lang: String,
    dropped_pairs: usize,
}

impl Bitext {
    /// Pair up two equal-length line sets, dropping pairs with a blank side.
    pub fn from_pairs<I, S, T>(
        pairs: I,
        src_lang: &str,
        tgt_lang: &str,
    ) -> Bitext
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut kept = Vec::new();
        let mut dropped = 0usize;
        for (s, t) in pairs {
            let s = text::normalize(s.as_ref());
            let t = text::normalize(t.as_ref());
            if s.trim().is_empty() || t.trim().is_empty() {
                dropped += 1;
            } else {
                kept.push((s, t));
            }
        }
        Bitext {
            pairs: kept,
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            dropped_pairs: dropped,
        }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn src_lang(&self) -> &str {
        &self.src_lang
    }

    pub fn tgt_lang(&self) -> &str {
        &self.tgt_lang
    }

    /// Pairs dropped for having a blank side.
    pub fn dropped_pairs(&self) -> usize {
        self.dropped_pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| CorpusError::Io { path: display.clone(), source })?;
        out.push(line.trim_end_matches('\r').to_string());
    }
    Ok(out)
}

/// Load two parallel files into a [`Bitext`]. The files must have equal line
/// counts; pairs with a blank side are dropped with a count.
pub fn load_bitext(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    src_lang: &str,
    tgt_lang: &str,
) -> Result<Bitext, CorpusError> {
    let src_path = src_path.as_ref();
    let tgt_path = tgt_path.as_ref();
    let src = read_lines(src_path)?;
    let tgt = read_lines(tgt_path)?;
    if src.len() != tgt.len() {
        return Err(CorpusError::LineCountMismatch {
            src_path: src_path.display().to_string(),
            tgt_path: tgt_path.display().to_string(),
            src_lines: src.len(),
            tgt_lines: tgt.len(),
        });
    }
    Ok(Bitext::from_pairs(src.into_iter().zip(tgt), src_lang, tgt_lang))
}

/// Occurrence counts of undiacritized (stripped) words.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FreqTable {
    counts: HashMap<String, u64>,
}

impl FreqTable {
    pub fn count(&self, stripped_word: &str) -> u64 {
        self.counts.get(stripped_word).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Entries sorted by descending count, then by word.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

/// Count undiacritized word occurrences over a corpus.
pub fn freq_table(corpus: &DiacritizedCorpus) -> FreqTable {
    let mut counts = HashMap::new();
    for tok in corpus.tokens() {
        *counts.entry(tok.bases()).or_insert(0u64) += 1;
    }
    FreqTable { counts }
}

/// Whether OOV rates are computed over running tokens or distinct types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovMode {
    Token,
    Type,
}

/// Out-of-vocabulary rates for the two model sides: the encoder sees words
/// without diacritics, the decoder produces words with them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OovReport {
    pub mode: OovMode,
    /// Fraction of test units whose stripped form is unseen in training.
    pub encoder_oov_rate: f64,
    /// Fraction of test units whose fully diacritized form is unseen.
    pub decoder_oov_rate: f64,
    pub test_units: usize,
    pub encoder_oov_units: usize,
    pub decoder_oov_units: usize,
    pub train_tokens: usize,
    pub test_tokens: usize,
}

/// OOV rates of `test` against `train` vocabularies.
pub fn oov_report(
    train: &DiacritizedCorpus,
    test: &DiacritizedCorpus,
    mode: OovMode,
) -> Result<OovReport, CorpusError> {
    oov_report_with_extra(train, test, mode, &HashSet::new(), &HashSet::new())
}

/// OOV rates with extra words added to the training vocabularies, e.g. the
/// Arabic side of a bitext. Extra encoder words are matched against stripped
/// test forms, extra decoder words against diacritized test forms.
pub fn oov_report_with_extra(
    train: &DiacritizedCorpus,
    test: &DiacritizedCorpus,
    mode: OovMode,
    extra_encoder_words: &HashSet<String>,
    extra_decoder_words: &HashSet<String>,
) -> Result<OovReport, CorpusError> {
    if test.token_count() == 0 {
        return Err(CorpusError::EmptyTest);
    }

    let mut enc_vocab: HashSet<String> = HashSet::new();
    let mut dec_vocab: HashSet<String> = HashSet::new();
    for tok in train.tokens() {
        enc_vocab.insert(tok.bases());
        dec_vocab.insert(tok.render());
    }
    enc_vocab.extend(extra_encoder_words.iter().cloned());
    dec_vocab.extend(extra_decoder_words.iter().cloned());

    let test_forms: Vec<(String, String)> =
        test.tokens().map(|t| (t.bases(), t.render())).collect();
    let units: Vec<(&str, &str)> = match mode {
        OovMode::Token => test_forms.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect(),
        OovMode::Type => {
            let mut seen = HashSet::new();
            test_forms
                .iter()
                .filter(|(_, dia)| seen.insert(dia.clone()))
                .map(|(a, b)| (a.as_str(), b.as_str()))
                .collect()
        }
    };

    let total = units.len();
    let enc_oov = units.iter().filter(|(s, _)| !enc_vocab.contains(*s)).count();
    let dec_oov = units.iter().filter(|(_, d)| !dec_vocab.contains(*d)).count();

    Ok(OovReport {
        mode,
        encoder_oov_rate: enc_oov as f64 / total as f64,
        decoder_oov_rate: dec_oov as f64 / total as f64,
        test_units: total,
        encoder_oov_units: enc_oov,
        decoder_oov_units: dec_oov,
        train_tokens: train.token_count(),
        test_tokens: test.token_count(),
    })
}

/// The undiacritized word set of the Arabic side of a bitext, for vocabulary
/// augmentation in OOV reports.
pub fn bitext_word_set(bitext: &Bitext, arabic_side_is_src: bool) -> HashSet<String> {
    let mut words = HashSet::new();
    for (s, t) in bitext.pairs() {
        let side = if arabic_side_is_src { s } else { t };
        for w in side.split_whitespace() {
            words.insert(w.to_string());
        }
    }
    words
}
