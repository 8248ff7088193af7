//! Overlapping-window inference for lines longer than a decoder's budget.
//!
//! A long line is cut into fixed-size windows at a fixed stride, each window
//! is diacritized independently, and the outputs are stitched back together
//! with each character taken from exactly one window: adjacent windows split
//! their overlap at its midpoint, so every character is predicted with
//! context on both sides except near the line edges.

use std::ops::Range;

use crate::text::{self, MarkSet, Slot};

/// Default window length in characters.
pub const WINDOW_CHARS: usize = 300;
/// Default stride between window starts.
pub const STEP_CHARS: usize = 100;

/// Anything that can diacritize short lines. Implementations may assume
/// every input fits their own length budget when driven through
/// [`diacritize_lines`] with a matching window size.
pub trait SentenceDecoder {
    /// Diacritize each undiacritized line. Must return one output per input,
    /// in order.
    fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>>;
}

/// What to do when a window's output does not reproduce the window's
/// characters once stripped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MismatchPolicy {
    /// Recover marks through a character alignment and keep going.
    #[default]
    Align,
    /// Fail the whole call.
    Error,
}

#[derive(Debug, Clone, Copy)]
pub struct Windowing {
    pub window: usize,
    pub step: usize,
    pub policy: MismatchPolicy,
}

impl Default for Windowing {
    fn default() -> Self {
        Windowing { window: WINDOW_CHARS, step: STEP_CHARS, policy: MismatchPolicy::Align }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowStats {
    pub lines: usize,
    /// Lines long enough to need more than one window.
    pub windowed_lines: usize,
    /// Total decoder calls, including single-window lines.
    pub windows: usize,
    /// Windows whose stripped output mismatched their input and went through
    /// alignment recovery.
    pub mismatched_windows: usize,
}

/// Start offsets of the windows covering `len` characters: 0, step, 2*step,
/// ... stopping at the first start whose window reaches the end.
pub fn window_starts(len: usize, window: usize, step: usize) -> Vec<usize> {
    assert!(window >= step && step >= 1, "need window >= step >= 1");
    if len <= window {
        return vec![0];
    }
    let mut starts = Vec::new();
    let mut s = 0;
    loop {
        starts.push(s);
        if s + window >= len {
            break;
        }
        s += step;
    }
    starts
}

/// The half-open character range each window contributes to the stitched
/// output. Adjacent windows split their overlap at its midpoint; the ranges
/// partition `[0, len)` in order.
pub fn stitch_ranges(starts: &[usize], len: usize, window: usize) -> Vec<Range<usize>> {
    assert!(!starts.is_empty());
    let mut ranges = Vec::with_capacity(starts.len());
    let mut from = 0usize;
    for i in 0..starts.len() {
        let to = if i + 1 == starts.len() {
            len
        } else {
            let overlap = starts[i] + window - starts[i + 1];
            starts[i + 1] + overlap / 2
        };
        ranges.push(from..to);
        from = to;
    }
    ranges
}

/// Diacritize whole lines of any length with a bounded-length decoder.
/// Returns one output per line plus windowing statistics.
pub fn diacritize_lines(
    decoder: &dyn SentenceDecoder,
    lines: &[String],
    cfg: &Windowing,
) -> anyhow::Result<(Vec<String>, WindowStats)> {
    let mut stats = WindowStats { lines: lines.len(), ..Default::default() };

    // Collect every window of every line into one decoder call.
    let mut window_texts: Vec<String> = Vec::new();
    // Per line: (chars, starts, index of first window in window_texts).
    let mut plans: Vec<(Vec<char>, Vec<usize>, usize)> = Vec::new();
    for line in lines {
        let chars: Vec<char> = line.chars().collect();
        if chars.is_empty() {
            plans.push((chars, Vec::new(), window_texts.len()));
            continue;
        }
        let starts = window_starts(chars.len(), cfg.window, cfg.step);
        if starts.len() > 1 {
            stats.windowed_lines += 1;
        }
        stats.windows += starts.len();
        let first = window_texts.len();
        for &s in &starts {
            let end = (s + cfg.window).min(chars.len());
            window_texts.push(chars[s..end].iter().collect());
        }
        plans.push((chars, starts, first));
    }

    let outputs = decoder.diacritize_batch(&window_texts)?;
    anyhow::ensure!(
        outputs.len() == window_texts.len(),
        "decoder returned {} outputs for {} windows",
        outputs.len(),
        window_texts.len()
    );

    let mut results = Vec::with_capacity(lines.len());
    for (chars, starts, first) in &plans {
        if chars.is_empty() {
            results.push(String::new());
            continue;
        }
        let ranges = stitch_ranges(starts, chars.len(), cfg.window);
        let mut slots: Vec<Slot> = Vec::with_capacity(chars.len());
        for (wi, (&start, range)) in starts.iter().zip(&ranges).enumerate() {
            let end = (start + cfg.window).min(chars.len());
            let window_chars = &chars[start..end];
            let out = &outputs[first + wi];
            let window_slots = recover_window_slots(window_chars, out, cfg.policy, &mut stats)?;
            for gi in range.clone() {
                slots.push(window_slots[gi - start].clone());
            }
        }
        let seq = text::DiacritizedSeq::new(slots)
            .map_err(|e| anyhow::anyhow!("stitched output fails validation: {e}"))?;
        results.push(seq.render());
    }
    Ok((results, stats))
}

/// One slot per window character, from the decoder's output for the window.
/// When the stripped output equals the window this is exact; otherwise the
/// policy decides between alignment recovery and failure.
fn recover_window_slots(
    window_chars: &[char],
    output: &str,
    policy: MismatchPolicy,
    stats: &mut WindowStats,
) -> anyhow::Result<Vec<Slot>> {
    let seq = match text::segment(output) {
        Ok(seq) => seq,
        Err(e) => {
            return match policy {
                MismatchPolicy::Error => Err(anyhow::anyhow!("window output fails to segment: {e}")),
                MismatchPolicy::Align => {
                    stats.mismatched_windows += 1;
                    Ok(window_chars.iter().map(|&c| Slot::bare(c)).collect())
                }
            }
        }
    };
    let out_bases: Vec<char> = seq.slots().iter().map(|s| s.base).collect();
    if out_bases == window_chars {
        return Ok(seq.slots().to_vec());
    }
    match policy {
        MismatchPolicy::Error => Err(anyhow::anyhow!(
            "window output bases {:?} do not match input {:?}",
            out_bases.iter().take(20).collect::<String>(),
            window_chars.iter().take(20).collect::<String>()
        )),
        MismatchPolicy::Align => {
            stats.mismatched_windows += 1;
            Ok(align_marks(window_chars, &seq))
        }
    }
}

/// Map marks onto the true characters through a minimum-edit alignment.
/// Characters aligned to an identical output base take its marks; inserted,
/// deleted, or substituted characters stay bare.
fn align_marks(truth: &[char], out: &crate::text::DiacritizedSeq) -> Vec<Slot> {
    let a = truth;
    let b: Vec<char> = out.slots().iter().map(|s| s.base).collect();
    let (n, m) = (a.len(), b.len());
    // Classic edit-distance DP with backtrace.
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in 0..=n {
        dp[i][0] = i as u32;
    }
    for j in 0..=m {
        dp[0][j] = j as u32;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dp[i - 1][j - 1] + u32::from(a[i - 1] != b[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    let mut marks: Vec<MarkSet> = vec![MarkSet::EMPTY; n];
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + u32::from(a[i - 1] != b[j - 1]) {
            if a[i - 1] == b[j - 1] {
                marks[i - 1] = out.slots()[j - 1].marks;
            }
            i -= 1;
            j -= 1;
        } else if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    a.iter().zip(marks).map(|(&c, m)| Slot { base: c, marks: m }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Mark;

    #[test]
    fn starts_for_short_and_long_lines() {
        assert_eq!(window_starts(1, 300, 100), vec![0]);
        assert_eq!(window_starts(300, 300, 100), vec![0]);
        assert_eq!(window_starts(301, 300, 100), vec![0, 100]);
        assert_eq!(window_starts(350, 300, 100), vec![0, 100]);
        assert_eq!(window_starts(600, 300, 100), vec![0, 100, 200, 300]);
    }

    #[test]
    fn stitch_plan_hand_checked() {
        let starts = window_starts(350, 300, 100);
        assert_eq!(stitch_ranges(&starts, 350, 300), vec![0..200, 200..350]);
        let starts = window_starts(600, 300, 100);
        assert_eq!(
            stitch_ranges(&starts, 600, 300),
            vec![0..200, 200..300, 300..400, 400..600]
        );
        assert_eq!(stitch_ranges(&[0], 120, 300), vec![0..120]);
    }

    #[test]
    fn stitch_ranges_partition_and_stay_inside_windows() {
        for len in (301..1500).step_by(7) {
            let starts = window_starts(len, 300, 100);
            let ranges = stitch_ranges(&starts, len, 300);
            assert_eq!(ranges.len(), starts.len());
            let mut expect_from = 0;
            for (r, &s) in ranges.iter().zip(&starts) {
                assert_eq!(r.start, expect_from, "len {len}");
                assert!(r.start >= s, "len {len}");
                assert!(r.end <= s + 300, "len {len}");
                assert!(r.start < r.end, "len {len}");
                expect_from = r.end;
            }
            assert_eq!(expect_from, len);
        }
    }

    /// Echoes its input untouched.
    struct Echo;
    impl SentenceDecoder for Echo {
        fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
            Ok(lines.to_vec())
        }
    }

    /// Puts a fatha on every Arabic letter; a per-character rule, so the
    /// result must not depend on how the line was windowed.
    struct FathaAll;
    impl SentenceDecoder for FathaAll {
        fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
            Ok(lines
                .iter()
                .map(|l| {
                    let mut out = String::new();
                    for c in l.chars() {
                        out.push(c);
                        if matches!(
                            crate::text::classify_char(c),
                            crate::text::CharClass::ArabicLetter
                        ) && c != crate::text::TATWEEL
                        {
                            out.push(Mark::Fatha.ch());
                        }
                    }
                    out
                })
                .collect())
        }
    }

    #[test]
    fn echo_round_trips_any_length() {
        let long = "هب ".repeat(250);
        let lines = vec!["هيا لنذهب".to_string(), String::new(), long.trim_end().to_string()];
        let (out, stats) = diacritize_lines(&Echo, &lines, &Windowing::default()).unwrap();
        assert_eq!(out, lines);
        assert_eq!(stats.lines, 3);
        assert_eq!(stats.windowed_lines, 1);
        assert_eq!(stats.mismatched_windows, 0);
    }

    #[test]
    fn per_char_decoder_is_window_invariant() {
        let line: String = "هب وقد ".repeat(120).trim_end().to_string();
        let lines = vec![line.clone()];
        let (out, stats) = diacritize_lines(&FathaAll, &lines, &Windowing::default()).unwrap();
        let (direct, _) = diacritize_lines(&FathaAll, &lines, &Windowing {
            window: 10000,
            step: 10000,
            policy: MismatchPolicy::Error,
        })
        .unwrap();
        assert_eq!(out, direct);
        assert!(stats.windows > 1);
        assert_eq!(text::strip_diacritics(&out[0]).unwrap(), line);
    }

    /// Marks the first letter of its window with a damma: output depends on
    /// the window, which exposes exactly which window supplied each char.
    struct FirstCharDamma;
    impl SentenceDecoder for FirstCharDamma {
        fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
            Ok(lines
                .iter()
                .map(|l| {
                    let mut out = String::new();
                    for (i, c) in l.chars().enumerate() {
                        out.push(c);
                        if i == 0 {
                            out.push(Mark::Damma.ch());
                        }
                    }
                    out
                })
                .collect())
        }
    }

    #[test]
    fn each_char_comes_from_its_planned_window() {
        // 350 chars: windows start at 0 and 100; the stitched line takes
        // [0,200) from the first window and [200,350) from the second, so
        // only position 0 keeps its damma (the second window's damma lands
        // on position 100, which the plan takes from window one instead).
        let line: String = std::iter::repeat('ه').take(350).collect();
        let (out, _) = diacritize_lines(&FirstCharDamma, &[line], &Windowing::default()).unwrap();
        let seq = text::segment(&out[0]).unwrap();
        let marked: Vec<usize> = seq
            .slots()
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.marks.is_empty())
            .map(|(i, _)| i)
            .collect();
        assert_eq!(marked, vec![0]);
    }

    /// Drops the second character of every window and marks the rest.
    struct Mangler;
    impl SentenceDecoder for Mangler {
        fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
            Ok(lines
                .iter()
                .map(|l| {
                    let mut out = String::new();
                    for (i, c) in l.chars().enumerate() {
                        if i == 1 {
                            continue;
                        }
                        out.push(c);
                        out.push(Mark::Kasra.ch());
                    }
                    out
                })
                .collect())
        }
    }

    #[test]
    fn mismatch_policies() {
        let lines = vec!["هيا".to_string()];
        let err = diacritize_lines(&Mangler, &lines, &Windowing {
            policy: MismatchPolicy::Error,
            ..Windowing::default()
        });
        assert!(err.is_err());

        let (out, stats) =
            diacritize_lines(&Mangler, &lines, &Windowing::default()).unwrap();
        assert_eq!(stats.mismatched_windows, 1);
        // The true bases survive; aligned chars keep their marks, the
        // dropped one stays bare.
        let seq = text::segment(&out[0]).unwrap();
        let bases: String = seq.slots().iter().map(|s| s.base).collect();
        assert_eq!(bases, "هيا");
        assert!(!seq.slots()[0].marks.is_empty());
        assert!(seq.slots()[1].marks.is_empty());
        assert!(!seq.slots()[2].marks.is_empty());
    }
}
