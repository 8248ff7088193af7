//! Synthetic benchmark for measuring how much sentence context a diacritizer
//! uses, and whether auxiliary translation streams can supply that context.
//!
//! The generated language has three word kinds. Homographs drop their marks
//! ambiguously: the same base string is vowelled all-damma in one kind of
//! sentence and all-kasra in the other, so no lexical table can restore it.
//! Which kind a sentence is depends only on its trigger, a single non-Arabic
//! code symbol that itself carries no diacritics. Filler words have fixed
//! vowels and are trivially learnable. Triggers are split disjointly across
//! train/dev/test, so a model trained on the diacritization stream alone has
//! never seen a test trigger and can only guess its homographs.
//!
//! The bitext covers every trigger and is built on a context-sensitive
//! cipher: sentences are ciphered letter for letter into Latin, but the
//! letter table is rotated by half the alphabet in one trigger class. Content
//! lexemes come in rotation-partner pairs, so every ciphered word reads as
//! two different Arabic words and every Arabic word ciphers two ways; both
//! translation directions are therefore unsolvable without classifying the
//! trigger. A model that also learns translation must internalize the class
//! of every trigger, including the held-out ones, and can resolve homographs
//! the lexical route cannot. Comparing test error across the four training
//! mixtures measures that transfer directly.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::corpus::{Bitext, DiacritizedCorpus, LinePolicy};
use crate::data::{
    make_diacritization_examples, make_translation_examples, mix, translation_tag, CharVocab,
    Direction, Example, DEFAULT_TRANSLATION_MAX_CHARS, DIAC_TAG,
};
use crate::eval::{self, EvalOptions};
use crate::model::{
    train, DecodeOptions, ModelConfig, ModelDecoder, TrainConfig, TrainReport,
};
use crate::text::Mark;
use crate::window::{diacritize_lines, Windowing};

/// Arabic letters the generated lexicon draws from. The cipher maps the
/// letter at index `i` to `'a' + i`, or to `'a' + (i + 7) % 14` in the
/// shifted trigger class.
const LETTER_POOL: [char; 14] = [
    '\u{0628}', '\u{062A}', '\u{062C}', '\u{062F}', '\u{0631}', '\u{0633}', '\u{0639}',
    '\u{0641}', '\u{0642}', '\u{0643}', '\u{0644}', '\u{0645}', '\u{0646}', '\u{0647}',
];

/// Half the alphabet; rotation by it is an involution, so partner pairs close.
const SHIFT: usize = 7;

/// Symbols trigger words draw from: single non-Arabic characters, disjoint
/// from the cipher image `'a'..='n'` so triggers pass through the cipher
/// untouched and never collide with it. Single symbols keep the class
/// feature in one embedding, where both tasks can reach it.
const TRIGGER_POOL: [char; 48] = [
    'o', 'p', 'q', 'r', 's', 't', 'u', 'v', 'w', 'x', 'y', 'z', 'A', 'B', 'C', 'D', 'E', 'F',
    'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q', 'R', 'S', 'T', 'U', 'V', 'W', 'X',
    'Y', 'Z', '0', '1', '2', '3', '4', '5', '6', '7', '8', '9',
];

/// Sizes and seed for one generated benchmark. The seed fixes the language
/// itself; training seeds vary per run, not per language. Homograph and
/// filler counts must be even, since those lexemes come in partner pairs.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub train_triggers: usize,
    pub dev_triggers: usize,
    pub test_triggers: usize,
    pub homographs: usize,
    pub fillers: usize,
    pub train_lines_per_trigger: usize,
    pub dev_lines_per_trigger: usize,
    pub test_lines_per_trigger: usize,
    pub bitext_lines_per_trigger: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            train_triggers: 24,
            dev_triggers: 8,
            test_triggers: 16,
            homographs: 6,
            fillers: 10,
            train_lines_per_trigger: 10,
            dev_lines_per_trigger: 6,
            test_lines_per_trigger: 9,
            bitext_lines_per_trigger: 6,
            seed: 7,
        }
    }
}

/// A context word. `shifted` is the sentence class it induces: homographs in
/// its sentences take kasra instead of damma, and the cipher table rotates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub word: String,
    pub shifted: bool,
}

/// One generated benchmark: three diacritized splits with disjoint triggers,
/// plus class-ciphered bitext covering every trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchmark {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    /// (Arabic bases side, ciphered side) pairs.
    pub bitext: Vec<(String, String)>,
    pub triggers_train: Vec<Trigger>,
    pub triggers_dev: Vec<Trigger>,
    pub triggers_test: Vec<Trigger>,
    /// Homograph base strings, never seen with fixed vowels.
    pub homographs: Vec<String>,
    /// Filler base strings, each with one fixed vowelling.
    pub fillers: Vec<String>,
}

fn letter_index(c: char) -> Option<usize> {
    LETTER_POOL.iter().position(|&l| l == c)
}

/// The base string whose cipher image equals this one's under the other
/// class: every letter rotated by half the alphabet.
fn rotation_partner(bases: &str) -> String {
    bases
        .chars()
        .map(|c| match letter_index(c) {
            Some(i) => LETTER_POOL[(i + SHIFT) % LETTER_POOL.len()],
            None => c,
        })
        .collect()
}

/// A pair of base strings mapped to each other by the cipher rotation. Both
/// go into the lexicon, so every ciphered content word is two-way ambiguous.
fn fresh_base_pair<R: Rng>(
    rng: &mut R,
    len: usize,
    used: &mut HashSet<String>,
) -> (String, String) {
    loop {
        let w: String =
            (0..len).map(|_| LETTER_POOL[rng.gen_range(0..LETTER_POOL.len())]).collect();
        let p = rotation_partner(&w);
        if !used.contains(&w) && !used.contains(&p) {
            used.insert(w.clone());
            used.insert(p.clone());
            return (w, p);
        }
    }
}

/// Every base carries the same vowel; the homograph surface forms.
fn mark_uniform(bases: &str, mark: Mark) -> String {
    let mut out = String::new();
    for c in bases.chars() {
        out.push(c);
        out.push(mark.ch());
    }
    out
}

/// Deal disjoint trigger sets from a shuffled symbol pool, classes balanced
/// within each split.
fn make_trigger_sets<R: Rng>(rng: &mut R, counts: [usize; 3]) -> [Vec<Trigger>; 3] {
    assert!(
        counts.iter().sum::<usize>() <= TRIGGER_POOL.len(),
        "more triggers than symbols"
    );
    let mut pool = TRIGGER_POOL.to_vec();
    pool.shuffle(rng);
    counts.map(|n| {
        (0..n)
            .map(|i| Trigger { word: pool.pop().unwrap().to_string(), shifted: i % 2 == 1 })
            .collect()
    })
}

/// Word-for-word cipher of an undiacritized sentence under one class.
fn cipher_line(bases: &str, shifted: bool) -> String {
    let offset = if shifted { SHIFT } else { 0 };
    bases
        .chars()
        .map(|c| match letter_index(c) {
            Some(i) => (b'a' + ((i + offset) % LETTER_POOL.len()) as u8) as char,
            None => c,
        })
        .collect()
}

/// Invert the cipher under one class; the inverse of [`cipher_line`].
#[cfg(test)]
fn decipher_line(latin: &str, shifted: bool) -> String {
    let n = LETTER_POOL.len();
    let offset = if shifted { SHIFT } else { 0 };
    latin
        .chars()
        .map(|c| match c {
            'a'..='n' => LETTER_POOL[((c as u8 - b'a') as usize + n - offset) % n],
            other => other,
        })
        .collect()
}

/// One sentence as diacritized tokens: the trigger, one homograph vowelled by
/// the trigger class, and one or two fillers, in random order.
fn sentence_tokens<R: Rng>(
    rng: &mut R,
    trigger: &Trigger,
    homographs: &[String],
    fillers: &[String],
) -> Vec<String> {
    let vowel = if trigger.shifted { Mark::Kasra } else { Mark::Damma };
    let homograph = &homographs[rng.gen_range(0..homographs.len())];
    let mut tokens = vec![trigger.word.clone(), mark_uniform(homograph, vowel)];
    for _ in 0..rng.gen_range(1..=2usize) {
        tokens.push(fillers[rng.gen_range(0..fillers.len())].clone());
    }
    tokens.shuffle(rng);
    tokens
}

fn strip_line(diacritized: &str) -> String {
    diacritized.chars().filter(|&c| Mark::from_char(c).is_none()).collect()
}

fn diac_split<R: Rng>(
    rng: &mut R,
    triggers: &[Trigger],
    lines_per_trigger: usize,
    homographs: &[String],
    fillers: &[String],
) -> Vec<String> {
    let mut lines = Vec::new();
    for trigger in triggers {
        for _ in 0..lines_per_trigger {
            lines.push(sentence_tokens(rng, trigger, homographs, fillers).join(" "));
        }
    }
    lines
}

/// Generate the benchmark. The same spec always yields the same language,
/// sentences, and bitext.
pub fn generate(spec: &SynthSpec) -> SynthBenchmark {
    assert!(spec.homographs % 2 == 0, "homographs come in rotation-partner pairs");
    assert!(spec.fillers % 2 == 0, "fillers come in rotation-partner pairs");
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let [triggers_train, triggers_dev, triggers_test] = make_trigger_sets(
        &mut rng,
        [spec.train_triggers, spec.dev_triggers, spec.test_triggers],
    );

    let mut used_bases = HashSet::new();
    let mut homographs = Vec::new();
    while homographs.len() < spec.homographs {
        let (w, p) = fresh_base_pair(&mut rng, 3, &mut used_bases);
        homographs.push(w);
        homographs.push(p);
    }
    let vowels = [Mark::Fatha, Mark::Damma, Mark::Kasra];
    let mut fillers = Vec::new();
    while fillers.len() < spec.fillers {
        let (w, p) = fresh_base_pair(&mut rng, 3, &mut used_bases);
        for bases in [w, p] {
            let mut out = String::new();
            for c in bases.chars() {
                out.push(c);
                out.push(vowels[rng.gen_range(0..vowels.len())].ch());
            }
            fillers.push(out);
        }
    }

    let train =
        diac_split(&mut rng, &triggers_train, spec.train_lines_per_trigger, &homographs, &fillers);
    let dev =
        diac_split(&mut rng, &triggers_dev, spec.dev_lines_per_trigger, &homographs, &fillers);
    let test =
        diac_split(&mut rng, &triggers_test, spec.test_lines_per_trigger, &homographs, &fillers);

    let mut bitext = Vec::new();
    let all_triggers: Vec<&Trigger> =
        triggers_train.iter().chain(&triggers_dev).chain(&triggers_test).collect();
    for trigger in all_triggers {
        for _ in 0..spec.bitext_lines_per_trigger {
            let line = sentence_tokens(&mut rng, trigger, &homographs, &fillers).join(" ");
            let bases = strip_line(&line);
            let ciphered = cipher_line(&bases, trigger.shifted);
            bitext.push((bases, ciphered));
        }
    }

    let fillers = fillers.iter().map(|f| strip_line(f)).collect();
    SynthBenchmark {
        train,
        dev,
        test,
        bitext,
        triggers_train,
        triggers_dev,
        triggers_test,
        homographs,
        fillers,
    }
}

/// Everything four training runs share: one vocabulary, the three example
/// streams, the dev corpus driving checkpoint selection, and the test split.
#[derive(Debug, Clone)]
pub struct MtlData {
    pub vocab: CharVocab,
    pub diac: Vec<Example>,
    pub ar_to_xx: Vec<Example>,
    pub xx_to_ar: Vec<Example>,
    pub dev: DiacritizedCorpus,
    pub test_inputs: Vec<String>,
    pub test_refs: Vec<String>,
}

/// Build the shared data. The vocabulary is built from the training split and
/// the bitext only; it still covers dev and test because every trigger occurs
/// in the bitext and all splits share one lexicon.
pub fn prepare_mtl_data(bench: &SynthBenchmark) -> anyhow::Result<MtlData> {
    let train_corpus = DiacritizedCorpus::from_lines(bench.train.clone(), LinePolicy::Fail)?;
    let dev = DiacritizedCorpus::from_lines(bench.dev.clone(), LinePolicy::Fail)?;
    let test_corpus = DiacritizedCorpus::from_lines(bench.test.clone(), LinePolicy::Fail)?;

    let bitext = Bitext::from_pairs(bench.bitext.iter().cloned(), "ar", "xx");
    let forward_tag = translation_tag("ar", "xx");
    let reverse_tag = translation_tag("xx", "ar");

    let rendered: Vec<String> = train_corpus.lines().iter().map(|l| l.render()).collect();
    let mut texts: Vec<&str> = rendered.iter().map(String::as_str).collect();
    for (src, tgt) in bitext.pairs() {
        texts.push(src);
        texts.push(tgt);
    }
    let vocab =
        CharVocab::build(texts, &[DIAC_TAG, forward_tag.as_str(), reverse_tag.as_str()]);

    let diac = make_diacritization_examples(&train_corpus, &vocab, None).examples;
    let ar_to_xx =
        make_translation_examples(&bitext, &vocab, Direction::Forward, DEFAULT_TRANSLATION_MAX_CHARS)
            .examples;
    let xx_to_ar =
        make_translation_examples(&bitext, &vocab, Direction::Reverse, DEFAULT_TRANSLATION_MAX_CHARS)
            .examples;

    let test_inputs: Vec<String> = test_corpus.lines().iter().map(|l| l.bases()).collect();
    let test_refs: Vec<String> = test_corpus.lines().iter().map(|l| l.render()).collect();
    Ok(MtlData { vocab, diac, ar_to_xx, xx_to_ar, dev, test_inputs, test_refs })
}

/// Which streams a run trains on, alongside the diacritization stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtlCondition {
    /// Diacritization only.
    Baseline,
    /// Adds translation out of Arabic.
    ToTarget,
    /// Adds translation into Arabic.
    FromTarget,
    /// Adds both directions.
    Both,
}

impl MtlCondition {
    pub const ALL: [MtlCondition; 4] =
        [MtlCondition::Baseline, MtlCondition::ToTarget, MtlCondition::FromTarget, MtlCondition::Both];

    pub fn label(self) -> &'static str {
        match self {
            MtlCondition::Baseline => "baseline",
            MtlCondition::ToTarget => "+to-target",
            MtlCondition::FromTarget => "+from-target",
            MtlCondition::Both => "+both",
        }
    }
}

/// Model size for the benchmark: big enough to route context, small enough
/// that twelve runs fit a desk budget.
pub fn synth_model_config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        d_model: 64,
        ffn_dim: 128,
        n_heads: 4,
        enc_layers: 2,
        dec_layers: 2,
        dropout: 0.1,
        attn_dropout: 0.0,
        act_dropout: 0.0,
        max_positions: 128,
    }
}

pub fn synth_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 120,
        char_budget: 1500,
        peak_lr: 3e-3,
        warmup_steps: 50,
        label_smoothing: 0.1,
        seed,
        stop_at_zero_dev_wer: true,
    }
}

/// Outcome of one trained condition.
#[derive(Debug, Clone)]
pub struct ConditionRun {
    pub condition: MtlCondition,
    pub seed: u64,
    pub test_wer: f64,
    pub report: TrainReport,
}

/// Train one condition at one seed and score it on the held-out split. All
/// conditions share the data, vocabulary, model size, and schedule; only the
/// example mixture differs.
pub fn run_condition(
    data: &MtlData,
    condition: MtlCondition,
    seed: u64,
) -> anyhow::Result<ConditionRun> {
    let mut streams = vec![data.diac.clone()];
    match condition {
        MtlCondition::Baseline => {}
        MtlCondition::ToTarget => streams.push(data.ar_to_xx.clone()),
        MtlCondition::FromTarget => streams.push(data.xx_to_ar.clone()),
        MtlCondition::Both => {
            streams.push(data.ar_to_xx.clone());
            streams.push(data.xx_to_ar.clone());
        }
    }
    let weights = vec![1.0; streams.len()];
    let mixed = mix(&streams, &weights, seed);

    let cfg = synth_model_config(data.vocab.len());
    let tcfg = synth_train_config(seed);
    let opts = DecodeOptions::default();
    let trained = train(&cfg, &tcfg, &mixed, &data.dev, &data.vocab, &opts)?;

    let decoder =
        ModelDecoder { params: &trained.params, cfg: &cfg, vocab: &data.vocab, opts };
    let (preds, _) = diacritize_lines(&decoder, &data.test_inputs, &Windowing::default())?;
    let report = eval::wer(&preds, &data.test_refs, &EvalOptions::default())?;
    Ok(ConditionRun { condition, seed, test_wer: report.rate, report: trained.report })
}
