//! Fuzzes the segmentation layer: random mixed Arabic and Latin strings go
//! through segment, render, and strip, and every invariant that the rest of
//! the workbench leans on is checked on each one. Prints a few sample
//! segmentations and the failure count (which must be zero).
//!
//! Usage: roundtrip [N_STRINGS]   (defaults to 2000)

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tashkeel::text::{normalize, segment, strip_diacritics};

/// Random text that always segments: Arabic letters with legal mark stacks
/// (optional shadda plus at most one vowel-position mark), Latin, digits,
/// spaces, and punctuation.
fn random_text(rng: &mut StdRng) -> String {
    const LETTERS: &[char] = &['ب', 'ت', 'ج', 'د', 'ر', 'س', 'ع', 'ف', 'ق', 'ك', 'ل', 'م', 'ن', 'ه', 'و', 'ي', 'ء', 'ة', 'ى', 'ا'];
    const VOWEL_POSITION: &[char] =
        &['\u{064B}', '\u{064C}', '\u{064D}', '\u{064E}', '\u{064F}', '\u{0650}', '\u{0652}'];
    const OTHER: &[char] = &['a', 'b', 'z', '3', '.', '،', '-', '(', ')'];
    let len = rng.gen_range(0..60);
    let mut out = String::new();
    for _ in 0..len {
        let roll: f64 = rng.gen();
        if roll < 0.6 {
            out.push(LETTERS[rng.gen_range(0..LETTERS.len())]);
            if rng.gen_bool(0.2) {
                out.push('\u{0651}');
            }
            if rng.gen_bool(0.6) {
                out.push(VOWEL_POSITION[rng.gen_range(0..VOWEL_POSITION.len())]);
            }
        } else if roll < 0.8 {
            out.push(' ');
        } else {
            out.push(OTHER[rng.gen_range(0..OTHER.len())]);
        }
    }
    out
}

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("the argument is a count"))
        .unwrap_or(2000);
    let mut rng = StdRng::seed_from_u64(42);
    let mut failures = 0usize;
    let start = std::time::Instant::now();

    for i in 0..n {
        let raw = normalize(&random_text(&mut rng));
        let seq = match segment(&raw) {
            Ok(seq) => seq,
            Err(e) => {
                // The generator only attaches legal mark stacks to letters,
                // so every string must segment.
                println!("segment failed on fuzz case {i}: {e}");
                failures += 1;
                continue;
            }
        };
        let rendered = seq.render();
        if rendered != raw {
            println!("round trip changed fuzz case {i}: {raw:?} -> {rendered:?}");
            failures += 1;
        }
        let bare = strip_diacritics(&raw).expect("a segmentable string strips");
        if strip_diacritics(&bare).as_deref() != Ok(bare.as_str()) {
            println!("strip is not idempotent on fuzz case {i}: {bare:?}");
            failures += 1;
        }
        if seq.bases() != bare {
            println!("bases and strip disagree on fuzz case {i}");
            failures += 1;
        }
    }

    println!("{n} fuzzed strings in {:.0?}, {failures} failures", start.elapsed());

    println!("\nsample segmentations:");
    for text in ["هَيَّا لِنَذْهَبْ", "قَلَمٌ جَدِيدٌ", "word وَرْد 33"] {
        let seq = segment(&normalize(text)).expect("sample segments");
        let slots: Vec<String> = seq
            .slots()
            .iter()
            .map(|s| {
                let marks: Vec<String> = s.marks.iter().map(|m| format!("{m:?}")).collect();
                if marks.is_empty() {
                    format!("{}", s.base)
                } else {
                    format!("{}+{}", s.base, marks.join("+"))
                }
            })
            .collect();
        println!("  {text}\n    -> {}", slots.join(" | "));
    }
}
