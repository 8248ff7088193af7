//! Randomized scoring fixtures with planted, counted errors.
//!
//! The generator builds an all-Arabic reference corpus, then flips the mark
//! set of one slot in each of `k` distinct tokens. Because stripped forms are
//! untouched, token alignment is the identity, so the planted counts are the
//! ground truth the scorers must reproduce exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::text::{Mark, MarkSet};

const LETTERS: [char; 12] = [
    '\u{0628}', '\u{062A}', '\u{062B}', '\u{062C}', '\u{062D}', '\u{062F}', '\u{0631}',
    '\u{0633}', '\u{0639}', '\u{0642}', '\u{0643}', '\u{0645}',
];

const VOWEL_SLOT: [Mark; 7] = [
    Mark::Fathatan,
    Mark::Dammatan,
    Mark::Kasratan,
    Mark::Fatha,
    Mark::Damma,
    Mark::Kasra,
    Mark::Sukun,
];

/// One of the 16 valid mark sets (vowel-slot choice or none, shadda or not).
fn random_markset(rng: &mut ChaCha20Rng) -> MarkSet {
    let mut set = MarkSet::EMPTY;
    let v = rng.gen_range(0..=VOWEL_SLOT.len());
    if v < VOWEL_SLOT.len() {
        set.insert(VOWEL_SLOT[v]);
    }
    if rng.gen_bool(0.5) {
        set.insert(Mark::Shadda);
    }
    set
}

fn render(bases: &[char], marks: &[MarkSet]) -> String {
    let mut out = String::new();
    for (b, m) in bases.iter().zip(marks) {
        out.push(*b);
        for mark in m.iter() {
            out.push(mark.ch());
        }
    }
    out
}

pub(crate) struct PerturbedFixture {
    pub reference: Vec<String>,
    pub pred: Vec<String>,
    pub wer_errors: u64,
    pub wer_total: u64,
    pub der_all_errors: u64,
    pub der_all_total: u64,
    pub der_arabic_errors: u64,
    pub der_arabic_total: u64,
}

pub(crate) fn perturbed_fixture(rng: &mut ChaCha20Rng) -> PerturbedFixture {
    let n_lines = rng.gen_range(1..=6);
    let mut bases: Vec<Vec<Vec<char>>> = Vec::new();
    let mut marks: Vec<Vec<Vec<MarkSet>>> = Vec::new();
    let mut coords = Vec::new();
    for li in 0..n_lines {
        let n_tokens = rng.gen_range(1..=8);
        let mut line_b = Vec::new();
        let mut line_m = Vec::new();
        for ti in 0..n_tokens {
            let len = rng.gen_range(1..=5);
            line_b.push(
                (0..len)
                    .map(|_| LETTERS[rng.gen_range(0..LETTERS.len())])
                    .collect::<Vec<char>>(),
            );
            line_m.push((0..len).map(|_| random_markset(rng)).collect::<Vec<MarkSet>>());
            coords.push((li, ti));
        }
        bases.push(line_b);
        marks.push(line_m);
    }

    let total_tokens = coords.len() as u64;
    let arabic_slots: u64 = bases.iter().flatten().map(|t| t.len() as u64).sum();
    let whitespace: u64 = bases.iter().map(|l| (l.len() - 1) as u64).sum();

    coords.shuffle(rng);
    let k = rng.gen_range(0..=coords.len().min(5));
    let mut perturbed = marks.clone();
    for &(li, ti) in &coords[..k] {
        let slot = rng.gen_range(0..perturbed[li][ti].len());
        let old = perturbed[li][ti][slot];
        loop {
            let new = random_markset(rng);
            if new != old {
                perturbed[li][ti][slot] = new;
                break;
            }
        }
    }

    let join = |m: &Vec<Vec<Vec<MarkSet>>>| {
        (0..n_lines)
            .map(|li| {
                (0..bases[li].len())
                    .map(|ti| render(&bases[li][ti], &m[li][ti]))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<String>>()
    };

    PerturbedFixture {
        reference: join(&marks),
        pred: join(&perturbed),
        wer_errors: k as u64,
        wer_total: total_tokens,
        der_all_errors: k as u64,
        der_all_total: arabic_slots + whitespace,
        der_arabic_errors: k as u64,
        der_arabic_total: arabic_slots,
    }
}
