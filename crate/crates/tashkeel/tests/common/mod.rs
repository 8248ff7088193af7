//! Shared fixture generators and independent brute-force scorers. The
//! scorers recount errors with the plainest possible loops, sharing no
//! counting code with the library, so agreement is meaningful evidence.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::rngs::StdRng;
use rand::Rng;
use tashkeel::text::{classify_char, normalize, segment, CharClass, Mark, MarkSet, Slot};

pub const ARABIC_LETTERS: &[char] = &[
    'ب', 'ت', 'ج', 'د', 'ر', 'س', 'ع', 'ف', 'ق', 'ك', 'ل', 'م', 'ن', 'ه', 'و', 'ي', 'ء', 'ة',
    'ى', 'ا',
];

/// The seven marks that compete for the vowel position of a slot.
pub const VOWEL_SLOT_MARKS: [Mark; 7] = [
    Mark::Fathatan,
    Mark::Dammatan,
    Mark::Kasratan,
    Mark::Fatha,
    Mark::Damma,
    Mark::Kasra,
    Mark::Sukun,
];

fn is_arabic(c: char) -> bool {
    matches!(classify_char(c), CharClass::ArabicLetter)
}

/// A random string that always segments: Arabic letters carrying legal mark
/// stacks, mixed with Latin, digits, punctuation, and spaces.
pub fn random_marked_text(rng: &mut StdRng) -> String {
    const OTHER: &[char] = &['a', 'b', 'z', '3', '.', '،', '-', '(', ')'];
    let len = rng.gen_range(0..60);
    let mut out = String::new();
    for _ in 0..len {
        let roll: f64 = rng.gen();
        if roll < 0.6 {
            out.push(ARABIC_LETTERS[rng.gen_range(0..ARABIC_LETTERS.len())]);
            if rng.gen_bool(0.2) {
                out.push(Mark::Shadda.ch());
            }
            if rng.gen_bool(0.6) {
                out.push(VOWEL_SLOT_MARKS[rng.gen_range(0..VOWEL_SLOT_MARKS.len())].ch());
            }
        } else if roll < 0.8 {
            out.push(' ');
        } else {
            out.push(OTHER[rng.gen_range(0..OTHER.len())]);
        }
    }
    out
}

/// A random undiacritized sentence: 1 to 8 bare Arabic words.
pub fn random_bare_sentence(rng: &mut StdRng) -> String {
    let n_words = rng.gen_range(1..=8);
    let mut words = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        let len = rng.gen_range(2..=6);
        let word: String =
            (0..len).map(|_| ARABIC_LETTERS[rng.gen_range(0..ARABIC_LETTERS.len())]).collect();
        words.push(word);
    }
    words.join(" ")
}

/// One token as generated: base characters with mark sets.
type GenToken = Vec<(char, MarkSet)>;

fn render_tokens(tokens: &[GenToken]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        for (base, marks) in tok {
            out.push(*base);
            out.push_str(&marks.to_string());
        }
    }
    out
}

/// A prediction/reference pair with every error planted deliberately and
/// counted at construction time. Flips only ever touch Arabic-letter slots.
pub struct PlantedFixture {
    pub refs: Vec<String>,
    pub pred: Vec<String>,
    /// Tokens containing an Arabic letter (the default scoring scope).
    pub word_total_arabic: u64,
    pub word_total_all: u64,
    /// Tokens with at least one flipped slot; all flipped tokens are Arabic.
    pub word_errors: u64,
    /// Character slots including spaces.
    pub slot_total_all: u64,
    pub slot_total_arabic: u64,
    /// Flipped slots; every flip changes that slot's mark set.
    pub slot_errors: u64,
}

/// Change one slot's mark set, always to a different legal set.
fn flip_marks(rng: &mut StdRng, marks: &mut MarkSet) {
    if rng.gen_bool(0.3) {
        // Toggle shadda: flips set membership, always a change.
        if marks.contains(Mark::Shadda) {
            marks.remove(Mark::Shadda);
        } else {
            marks.insert(Mark::Shadda);
        }
        return;
    }
    let current = marks.iter().find(|m| m.is_vowel_slot());
    let mut options: Vec<Option<Mark>> =
        VOWEL_SLOT_MARKS.iter().copied().map(Some).collect();
    options.push(None);
    options.retain(|o| *o != current);
    let choice = options[rng.gen_range(0..options.len())];
    if let Some(old) = current {
        marks.remove(old);
    }
    if let Some(new) = choice {
        marks.insert(new);
    }
}

pub fn plant_fixture(rng: &mut StdRng, n_lines: usize) -> PlantedFixture {
    const LATIN: &[char] = &['a', 'b', 'c', 'x', 'y', 'z', '0', '9'];
    let mut fixture = PlantedFixture {
        refs: Vec::with_capacity(n_lines),
        pred: Vec::with_capacity(n_lines),
        word_total_arabic: 0,
        word_total_all: 0,
        word_errors: 0,
        slot_total_all: 0,
        slot_total_arabic: 0,
        slot_errors: 0,
    };
    for _ in 0..n_lines {
        let n_tokens = rng.gen_range(1..=7);
        let mut ref_tokens: Vec<GenToken> = Vec::with_capacity(n_tokens);
        for _ in 0..n_tokens {
            let arabic = rng.gen_bool(0.85);
            let len = rng.gen_range(if arabic { 2..=5 } else { 1..=4 });
            let tok: GenToken = (0..len)
                .map(|_| {
                    if arabic {
                        let mut marks = MarkSet::EMPTY;
                        if rng.gen_bool(0.2) {
                            marks.insert(Mark::Shadda);
                        }
                        if rng.gen_bool(0.65) {
                            marks.insert(
                                VOWEL_SLOT_MARKS[rng.gen_range(0..VOWEL_SLOT_MARKS.len())],
                            );
                        }
                        (ARABIC_LETTERS[rng.gen_range(0..ARABIC_LETTERS.len())], marks)
                    } else {
                        (LATIN[rng.gen_range(0..LATIN.len())], MarkSet::EMPTY)
                    }
                })
                .collect();
            ref_tokens.push(tok);
        }

        let mut pred_tokens = ref_tokens.clone();
        for tok in pred_tokens.iter_mut() {
            let arabic = tok.iter().any(|(base, _)| is_arabic(*base));
            if arabic && rng.gen_bool(0.35) {
                let n_flips = rng.gen_range(1..=2.min(tok.len()));
                let mut picked = HashSet::new();
                while picked.len() < n_flips {
                    picked.insert(rng.gen_range(0..tok.len()));
                }
                for &slot in &picked {
                    flip_marks(rng, &mut tok[slot].1);
                    fixture.slot_errors += 1;
                }
                fixture.word_errors += 1;
            }
        }

        // Totals by direct counting over the generated shapes.
        fixture.word_total_all += ref_tokens.len() as u64;
        fixture.slot_total_all += (ref_tokens.len() as u64).saturating_sub(1);
        for tok in &ref_tokens {
            if tok.iter().any(|(base, _)| is_arabic(*base)) {
                fixture.word_total_arabic += 1;
            }
            for (base, _) in tok {
                fixture.slot_total_all += 1;
                if is_arabic(*base) {
                    fixture.slot_total_arabic += 1;
                }
            }
        }

        fixture.refs.push(render_tokens(&ref_tokens));
        fixture.pred.push(render_tokens(&pred_tokens));
    }
    fixture
}

fn line_slots(line: &str) -> Vec<Slot> {
    segment(&normalize(line)).expect("fixture lines segment").slots().to_vec()
}

fn line_tokens(line: &str) -> Vec<Vec<Slot>> {
    let seq = segment(&normalize(line)).expect("fixture lines segment");
    seq.token_spans().into_iter().map(|span| seq.slots()[span].to_vec()).collect()
}

/// Brute-force word error rate: plain loops over whitespace tokens. Assumes
/// the fixture shape (equal token counts, equal bases per token).
pub fn oracle_wer(pred: &[String], refs: &[String], arabic_only: bool) -> (u64, u64) {
    let mut errors = 0u64;
    let mut total = 0u64;
    for (p_line, r_line) in pred.iter().zip(refs) {
        let p_tokens = line_tokens(p_line);
        let r_tokens = line_tokens(r_line);
        assert_eq!(p_tokens.len(), r_tokens.len(), "fixtures keep token counts equal");
        for (pt, rt) in p_tokens.iter().zip(&r_tokens) {
            if arabic_only && !rt.iter().any(|s| is_arabic(s.base)) {
                continue;
            }
            total += 1;
            let same = pt.len() == rt.len()
                && pt.iter().zip(rt).all(|(a, b)| a.base == b.base && a.marks == b.marks);
            if !same {
                errors += 1;
            }
        }
    }
    (errors, total)
}

pub struct OracleDer {
    pub all: (u64, u64),
    pub arabic: (u64, u64),
    pub case_ending: (u64, u64),
    pub non_case_ending: (u64, u64),
}

/// Brute-force diacritic error rate over aligned slots. `case_tokens` lists
/// (line, token) pairs that carry a case ending; the case slot is the
/// token's last Arabic slot.
pub fn oracle_der(
    pred: &[String],
    refs: &[String],
    case_tokens: Option<&HashSet<(usize, usize)>>,
) -> OracleDer {
    let mut all = (0u64, 0u64);
    let mut arabic = (0u64, 0u64);
    let mut case_ending = (0u64, 0u64);
    let mut non_case_ending = (0u64, 0u64);
    for (li, (p_line, r_line)) in pred.iter().zip(refs).enumerate() {
        let p_slots = line_slots(p_line);
        let r_slots = line_slots(r_line);
        assert_eq!(p_slots.len(), r_slots.len(), "fixtures keep bases identical");

        // Which slot is the case slot of which token, if any.
        let mut case_slots: HashSet<usize> = HashSet::new();
        if let Some(bearing) = case_tokens {
            let seq = segment(&normalize(r_line)).expect("fixture lines segment");
            for (ti, span) in seq.token_spans().into_iter().enumerate() {
                if bearing.contains(&(li, ti)) {
                    if let Some(s) = span.clone().rev().find(|&s| is_arabic(r_slots[s].base)) {
                        case_slots.insert(s);
                    }
                }
            }
        }

        for (s, (ps, rs)) in p_slots.iter().zip(&r_slots).enumerate() {
            assert_eq!(ps.base, rs.base, "fixtures keep bases identical");
            let error = ps.marks != rs.marks;
            all.1 += 1;
            all.0 += error as u64;
            if is_arabic(rs.base) {
                arabic.1 += 1;
                arabic.0 += error as u64;
                if case_slots.contains(&s) {
                    case_ending.1 += 1;
                    case_ending.0 += error as u64;
                } else {
                    non_case_ending.1 += 1;
                    non_case_ending.0 += error as u64;
                }
            }
        }
    }
    OracleDer { all, arabic, case_ending, non_case_ending }
}

/// Sixty-four distinct two-word sentences over eight fixed words: every
/// ordered pair. Each word has exactly one diacritization, so a small model
/// can reach zero training error.
pub fn overfit_corpus_lines() -> Vec<String> {
    const WORDS: [&str; 8] =
        ["كَتَبَ", "يَدٌ", "صَفّ", "نَمْ", "بابٌ", "سُوقٌ", "عِلْمٌ", "دَرْسٌ"];
    let mut lines = Vec::with_capacity(64);
    for a in WORDS {
        for b in WORDS {
            lines.push(format!("{a} {b}"));
        }
    }
    lines
}
