//! Walks the overlapping-window plan for long lines: which windows are cut,
//! which span of each window survives stitching, and how the stats come out
//! when a decoder runs under it. The decoder here is a stub that marks every
//! Arabic letter with Fatha, so the focus stays on the windowing itself.

use tashkeel::text::{classify_char, normalize, segment, CharClass};
use tashkeel::window::{
    diacritize_lines, stitch_ranges, window_starts, SentenceDecoder, Windowing,
};

/// Marks every Arabic letter with Fatha and leaves everything else alone.
struct FathaEverything;

impl SentenceDecoder for FathaEverything {
    fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
        Ok(lines
            .iter()
            .map(|line| {
                let mut out = String::new();
                for c in line.chars() {
                    out.push(c);
                    if matches!(classify_char(c), CharClass::ArabicLetter) {
                        out.push('\u{064E}');
                    }
                }
                out
            })
            .collect())
    }
}

fn main() -> anyhow::Result<()> {
    let w = Windowing::default();
    println!("window {} chars, step {} chars", w.window, w.step);
    for len in [120, 300, 350, 600] {
        let starts = window_starts(len, w.window, w.step);
        let ranges = stitch_ranges(&starts, len, w.window);
        println!("\nline of {len} chars:");
        println!("  window starts: {starts:?}");
        for (start, range) in starts.iter().zip(&ranges) {
            println!(
            "  window [{start}, {}) keeps [{}, {})",
                (start + w.window).min(len),
                range.start,
                range.end
            );
        }
    }

    // A long line: one Arabic word repeated far past the window length.
    let long = normalize(&"كتب ".repeat(120)).trim_end().to_string();
    let n_chars = long.chars().count();
    let (out, stats) = diacritize_lines(&FathaEverything, &[long.clone()], &w)?;
    println!(
        "\ndecoded a {n_chars}-char line: {} windows, {} mismatched",
        stats.windows, stats.mismatched_windows
    );
    let seq = segment(&out[0])?;
    println!(
        "output still strips back to the input: {}",
        seq.bases() == long
    );
    Ok(())
}
