//! Word- and character-level error rates.
//!
//! Both metrics score a prediction corpus against a reference corpus line by
//! line. Tokens are paired by minimum-edit-distance alignment over their
//! stripped forms; within a paired token whose base characters match, mark
//! sets are compared slot by slot. The word metric asks whether the whole
//! diacritized token matches; the character metric counts one slot per
//! reference base character.

use serde::Serialize;

use crate::eval::align::align_tokens;
use crate::eval::annot::AnnotationSet;
use crate::eval::{EvalError, EvalOptions};
use crate::text::{classify_char, normalize, segment, CharClass, Mark, MarkSet, Slot};

const ALEF: char = '\u{0627}';

/// Error/total pair with a derived rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Counts {
    pub errors: u64,
    pub total: u64,
    pub rate: f64,
}

impl Counts {
    pub fn new(errors: u64, total: u64) -> Counts {
        Counts {
            errors,
            total,
            rate: if total == 0 {
                0.0
            } else {
                errors as f64 / total as f64
            },
        }
    }

    pub(crate) fn bump(&mut self, error: bool) {
        self.total += 1;
        self.errors += u64::from(error);
    }

    pub(crate) fn seal(&mut self) {
        *self = Counts::new(self.errors, self.total);
    }
}

/// Word error rate over the selected token scope.
#[derive(Debug, Clone, Serialize)]
pub struct WerReport {
    pub errors: u64,
    pub total: u64,
    pub rate: f64,
    /// True when only tokens containing Arabic letters were counted.
    pub arabic_tokens_only: bool,
}

impl WerReport {
    pub fn to_text(&self) -> String {
        format!(
            "word error rate: {:.4}% ({} / {} {} tokens)\n",
            self.rate * 100.0,
            self.errors,
            self.total,
            if self.arabic_tokens_only { "Arabic" } else { "all" },
        )
    }
}

/// Character-slot error rates in four scopes.
#[derive(Debug, Clone, Serialize)]
pub struct DerReport {
    /// Every reference base character, whitespace included.
    pub all: Counts,
    /// Slots whose base is an Arabic letter.
    pub arabic: Counts,
    /// The last Arabic slot of each token flagged as case-bearing.
    pub case_ending: Counts,
    /// Arabic slots outside the case-ending scope.
    pub non_case_ending: Counts,
}

impl DerReport {
    pub fn to_text(&self) -> String {
        let row = |name: &str, c: &Counts| {
            format!(
                "{name:<18} {:>10.4}% {:>10} / {:<10}\n",
                c.rate * 100.0,
                c.errors,
                c.total
            )
        };
        let mut out = String::from("diacritic error rate by scope:\n");
        out.push_str(&row("all chars", &self.all));
        out.push_str(&row("arabic chars", &self.arabic));
        out.push_str(&row("case endings", &self.case_ending));
        out.push_str(&row("non case endings", &self.non_case_ending));
        out
    }
}

/// One token of one segmented line, ready for comparison.
#[derive(Debug, Clone)]
pub(crate) struct TokenView {
    pub bases: Vec<char>,
    pub marks: Vec<MarkSet>,
    pub stripped: String,
    pub has_arabic: bool,
}

/// A scored line: reference slots plus the token alignment against the
/// prediction.
pub(crate) struct LinePair {
    pub ref_slots: Vec<Slot>,
    pub ref_spans: Vec<std::ops::Range<usize>>,
    pub ref_tokens: Vec<TokenView>,
    pub pred_tokens: Vec<TokenView>,
    /// For each reference token, the aligned prediction token.
    pub pred_of_ref: Vec<Option<usize>>,
}

/// Remove the mark distinctions the variant-normalization flag declares
/// equivalent: a sukun equals no mark, and a fatha immediately before a plain
/// alef equals its absence.
fn canonicalize(slots: &mut [Slot]) {
    for i in 0..slots.len() {
        slots[i].marks.remove(Mark::Sukun);
        if i + 1 < slots.len() && slots[i + 1].base == ALEF {
            slots[i].marks.remove(Mark::Fatha);
        }
    }
}

fn token_views(slots: &[Slot], spans: &[std::ops::Range<usize>]) -> Vec<TokenView> {
    spans
        .iter()
        .map(|r| {
            let tok = &slots[r.clone()];
            TokenView {
                bases: tok.iter().map(|s| s.base).collect(),
                marks: tok.iter().map(|s| s.marks).collect(),
                stripped: tok.iter().map(|s| s.base).collect(),
                has_arabic: tok
                    .iter()
                    .any(|s| matches!(classify_char(s.base), CharClass::ArabicLetter)),
            }
        })
        .collect()
}

pub(crate) fn prepare_pairs(
    pred_lines: &[String],
    ref_lines: &[String],
    opts: &EvalOptions,
) -> Result<Vec<LinePair>, EvalError> {
    if pred_lines.len() != ref_lines.len() {
        return Err(EvalError::LineCountMismatch {
            pred: pred_lines.len(),
            reference: ref_lines.len(),
        });
    }
    let parse = |line: &str, side: &'static str, line_no: usize| {
        segment(&normalize(line)).map_err(|source| EvalError::BadLine {
            side,
            line_no,
            source,
        })
    };
    let mut out = Vec::with_capacity(ref_lines.len());
    for (i, (pred, reference)) in pred_lines.iter().zip(ref_lines).enumerate() {
        let ref_seq = parse(reference, "reference", i + 1)?;
        let pred_seq = parse(pred, "prediction", i + 1)?;
        let mut ref_slots = ref_seq.slots().to_vec();
        let mut pred_slots = pred_seq.slots().to_vec();
        if opts.normalize_variants {
            canonicalize(&mut ref_slots);
            canonicalize(&mut pred_slots);
        }
        let ref_spans = ref_seq.token_spans();
        let pred_spans = pred_seq.token_spans();
        let ref_tokens = token_views(&ref_slots, &ref_spans);
        let pred_tokens = token_views(&pred_slots, &pred_spans);
        let pred_stripped: Vec<String> = pred_tokens.iter().map(|t| t.stripped.clone()).collect();
        let ref_stripped: Vec<String> = ref_tokens.iter().map(|t| t.stripped.clone()).collect();
        let alignment = align_tokens(&pred_stripped, &ref_stripped);
        let pred_of_ref = alignment.pred_of_ref(ref_tokens.len());
        out.push(LinePair {
            ref_slots,
            ref_spans,
            ref_tokens,
            pred_tokens,
            pred_of_ref,
        });
    }
    Ok(out)
}

/// Outcome of scoring one reference token.
#[derive(Debug, Clone)]
pub struct TokenOutcome {
    pub line_index: usize,
    pub token_index: usize,
    /// Undiacritized form, the lookup key for frequency buckets.
    pub stripped: String,
    /// Whether the token contains at least one Arabic letter.
    pub arabic: bool,
    pub correct: bool,
}

fn token_correct(pair: &LinePair, r: usize) -> bool {
    match pair.pred_of_ref[r] {
        None => false,
        Some(p) => {
            let rt = &pair.ref_tokens[r];
            let pt = &pair.pred_tokens[p];
            rt.bases == pt.bases && rt.marks == pt.marks
        }
    }
}

/// Score every reference token. The building block under the word error rate
/// and all its breakdowns.
pub fn token_outcomes(
    pred_lines: &[String],
    ref_lines: &[String],
    opts: &EvalOptions,
) -> Result<Vec<TokenOutcome>, EvalError> {
    let pairs = prepare_pairs(pred_lines, ref_lines, opts)?;
    let mut out = Vec::new();
    for (li, pair) in pairs.iter().enumerate() {
        for r in 0..pair.ref_tokens.len() {
            out.push(TokenOutcome {
                line_index: li,
                token_index: r,
                stripped: pair.ref_tokens[r].stripped.clone(),
                arabic: pair.ref_tokens[r].has_arabic,
                correct: token_correct(pair, r),
            });
        }
    }
    Ok(out)
}

/// Word error rate: the fraction of in-scope reference tokens whose predicted
/// diacritized form is not exactly the reference form. Unaligned reference
/// tokens count as errors; inserted prediction tokens are ignored.
pub fn wer(
    pred_lines: &[String],
    ref_lines: &[String],
    opts: &EvalOptions,
) -> Result<WerReport, EvalError> {
    let outcomes = token_outcomes(pred_lines, ref_lines, opts)?;
    let mut c = Counts::default();
    for o in &outcomes {
        if o.arabic || !opts.arabic_tokens_only {
            c.bump(!o.correct);
        }
    }
    c.seal();
    Ok(WerReport {
        errors: c.errors,
        total: c.total,
        rate: c.rate,
        arabic_tokens_only: opts.arabic_tokens_only,
    })
}

/// Diacritic error rate: one slot per reference base character. Whitespace
/// slots count toward the all-chars denominator and are never errors. A slot
/// inside a token is an error when the aligned prediction slot's mark set
/// differs; a reference token with no aligned prediction, or whose base
/// characters disagree with its aligned prediction, has all its slots counted
/// as errors. Without annotations no token is case-bearing, so the
/// case-ending scope is empty.
pub fn der(
    pred_lines: &[String],
    ref_lines: &[String],
    annotations: Option<&AnnotationSet>,
    opts: &EvalOptions,
) -> Result<DerReport, EvalError> {
    let pairs = prepare_pairs(pred_lines, ref_lines, opts)?;
    if let Some(ann) = annotations {
        for a in ann.iter() {
            let n_tokens = pairs
                .get(a.line_index)
                .map(|p| p.ref_tokens.len())
                .ok_or(EvalError::AnnotationOutOfRange {
                    line_index: a.line_index,
                    token_index: a.token_index,
                })?;
            if a.token_index >= n_tokens {
                return Err(EvalError::AnnotationOutOfRange {
                    line_index: a.line_index,
                    token_index: a.token_index,
                });
            }
        }
    }

    let mut all = Counts::default();
    let mut arabic = Counts::default();
    let mut ce = Counts::default();
    let mut non_ce = Counts::default();
    for (li, pair) in pairs.iter().enumerate() {
        let mut in_token: Vec<Option<usize>> = vec![None; pair.ref_slots.len()];
        for (r, span) in pair.ref_spans.iter().enumerate() {
            for s in span.clone() {
                in_token[s] = Some(r);
            }
        }
        // Case-ending slot: the last Arabic slot of each case-bearing token.
        let mut ce_slot: Vec<Option<usize>> = vec![None; pair.ref_tokens.len()];
        if let Some(ann) = annotations {
            for (r, span) in pair.ref_spans.iter().enumerate() {
                let bearing = ann.get(li, r).is_some_and(|a| a.has_case_ending);
                if bearing {
                    ce_slot[r] = span
                        .clone()
                        .rev()
                        .find(|&s| {
                            matches!(classify_char(pair.ref_slots[s].base), CharClass::ArabicLetter)
                        });
                }
            }
        }
        for (s, slot) in pair.ref_slots.iter().enumerate() {
            let Some(r) = in_token[s] else {
                // Whitespace: counted, never wrong.
                all.bump(false);
                continue;
            };
            let error = match pair.pred_of_ref[r] {
                None => true,
                Some(p) => {
                    let rt = &pair.ref_tokens[r];
                    let pt = &pair.pred_tokens[p];
                    if rt.bases != pt.bases {
                        true
                    } else {
                        let off = s - pair.ref_spans[r].start;
                        rt.marks[off] != pt.marks[off]
                    }
                }
            };
            all.bump(error);
            if matches!(classify_char(slot.base), CharClass::ArabicLetter) {
                arabic.bump(error);
                if ce_slot[r] == Some(s) {
                    ce.bump(error);
                } else {
                    non_ce.bump(error);
                }
            }
        }
    }
    all.seal();
    arabic.seal();
    ce.seal();
    non_ce.seal();
    Ok(DerReport {
        all,
        arabic,
        case_ending: ce,
        non_case_ending: non_ce,
    })
}
