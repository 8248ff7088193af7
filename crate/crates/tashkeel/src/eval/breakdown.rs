//! Word-error breakdowns: training-frequency buckets, part-of-speech
//! categories, gendered-word cells, and sentence-length bins.
//!
//! Every breakdown scores tokens exactly as [`wer`] does and differs only in
//! how tokens are grouped. Bucket and length groupings partition the in-scope
//! tokens, so their rows re-sum to the overall counts; the part-of-speech
//! grouping deliberately counts a multi-tag token once per tag.
//!
//! [`wer`]: crate::eval::score::wer

use serde::Serialize;

use crate::corpus::FreqTable;
use crate::eval::annot::{AnnotationSet, Gender, GenderContext, POS_CATEGORIES};
use crate::eval::score::{token_outcomes, Counts, TokenOutcome};
use crate::eval::{EvalError, EvalOptions};
use crate::text::{normalize, strip_diacritics};

/// Labels for the training-count buckets, in order.
pub const BUCKET_LABELS: [&str; 8] = ["0", "1", "2-4", "5-16", "17-64", "65-256", "257-1024", ">1024"];

/// Which bucket a training count falls in.
pub fn bucket_index(count: u64) -> usize {
    match count {
        0 => 0,
        1 => 1,
        2..=4 => 2,
        5..=16 => 3,
        17..=64 => 4,
        65..=256 => 5,
        257..=1024 => 6,
        _ => 7,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BucketRow {
    pub label: String,
    pub errors: u64,
    pub total: u64,
    pub rate: f64,
}

/// Per-bucket word error rate; always all 8 buckets, empty ones included.
#[derive(Debug, Clone, Serialize)]
pub struct BucketReport {
    pub rows: Vec<BucketRow>,
}

impl BucketReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("word error rate by training count:\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>10.4}% {:>10} / {:<10}\n",
                r.label,
                r.rate * 100.0,
                r.errors,
                r.total
            ));
        }
        out
    }
}

fn in_scope(o: &TokenOutcome, opts: &EvalOptions) -> bool {
    o.arabic || !opts.arabic_tokens_only
}

fn n_tokens_per_line(outcomes: &[TokenOutcome], n_lines: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_lines];
    for o in outcomes {
        counts[o.line_index] = counts[o.line_index].max(o.token_index + 1);
    }
    counts
}

fn validate_annotations(
    counts: &[usize],
    annotations: &AnnotationSet,
) -> Result<(), EvalError> {
    for a in annotations.iter() {
        if a.line_index >= counts.len() || a.token_index >= counts[a.line_index] {
            return Err(EvalError::AnnotationOutOfRange {
                line_index: a.line_index,
                token_index: a.token_index,
            });
        }
    }
    Ok(())
}

/// Word error rate grouped by how often each token's stripped form occurs in
/// the training data. Unseen forms land in the "0" bucket.
pub fn wer_by_bucket(
    pred_lines: &[String],
    ref_lines: &[String],
    train_freqs: &FreqTable,
    opts: &EvalOptions,
) -> Result<BucketReport, EvalError> {
    let outcomes = token_outcomes(pred_lines, ref_lines, opts)?;
    let mut counts = [Counts::default(); 8];
    for o in outcomes.iter().filter(|o| in_scope(o, opts)) {
        counts[bucket_index(train_freqs.count(&o.stripped))].bump(!o.correct);
    }
    let rows = BUCKET_LABELS
        .iter()
        .zip(counts)
        .map(|(label, c)| BucketRow {
            label: label.to_string(),
            errors: c.errors,
            total: c.total,
            rate: Counts::new(c.errors, c.total).rate,
        })
        .collect();
    Ok(BucketReport { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct PosRow {
    pub category: String,
    pub errors: u64,
    pub total: u64,
    pub rate: f64,
}

/// Word error rate per part-of-speech category. A token tagged with several
/// categories is counted once in each.
#[derive(Debug, Clone, Serialize)]
pub struct PosReport {
    pub rows: Vec<PosRow>,
}

impl PosReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("word error rate by part of speech:\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>10.4}% {:>10} / {:<10}\n",
                r.category,
                r.rate * 100.0,
                r.errors,
                r.total
            ));
        }
        out
    }
}

pub fn wer_by_pos(
    pred_lines: &[String],
    ref_lines: &[String],
    annotations: &AnnotationSet,
    opts: &EvalOptions,
) -> Result<PosReport, EvalError> {
    let outcomes = token_outcomes(pred_lines, ref_lines, opts)?;
    validate_annotations(&n_tokens_per_line(&outcomes, ref_lines.len()), annotations)?;
    let mut counts = vec![Counts::default(); POS_CATEGORIES.len()];
    for o in outcomes.iter().filter(|o| in_scope(o, opts)) {
        let Some(a) = annotations.get(o.line_index, o.token_index) else {
            continue;
        };
        for tag in &a.pos_tags {
            let idx = POS_CATEGORIES
                .iter()
                .position(|c| c == tag)
                .expect("annotation parser admits only known categories");
            counts[idx].bump(!o.correct);
        }
    }
    let rows = POS_CATEGORIES
        .iter()
        .zip(counts)
        .map(|(category, c)| PosRow {
            category: category.to_string(),
            errors: c.errors,
            total: c.total,
            rate: Counts::new(c.errors, c.total).rate,
        })
        .collect();
    Ok(PosReport { rows })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GenderCell {
    pub errors: u64,
    pub total: u64,
    pub rate: f64,
}

/// One gendered-word group: the male and female cells plus the relative
/// difference of their rates. A cell with no tokens is absent, not zero.
#[derive(Debug, Clone, Serialize)]
pub struct GenderRow {
    pub context: String,
    pub male: Option<GenderCell>,
    pub female: Option<GenderCell>,
    /// (female rate - male rate) / male rate; absent unless both cells have
    /// tokens and the male rate is nonzero.
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenderReport {
    pub rows: Vec<GenderRow>,
}

impl GenderReport {
    pub fn to_text(&self) -> String {
        let cell = |c: &Option<GenderCell>| match c {
            Some(c) => format!("{:>8.4}% ({:>6}/{:<6})", c.rate * 100.0, c.errors, c.total),
            None => format!("{:>25}", "-"),
        };
        let mut out = String::from("word error rate by gender:\n");
        for r in &self.rows {
            let bias = match r.bias {
                Some(b) => format!("{:>+8.1}%", b * 100.0),
                None => format!("{:>9}", "-"),
            };
            out.push_str(&format!(
                "{:<10} male {} female {} bias {}\n",
                r.context,
                cell(&r.male),
                cell(&r.female),
                bias
            ));
        }
        out
    }
}

/// Relative rate difference used by the gender report.
pub fn bias_ratio(male_rate: f64, female_rate: f64) -> Option<f64> {
    if male_rate > 0.0 {
        Some((female_rate - male_rate) / male_rate)
    } else {
        None
    }
}

pub fn wer_by_gender(
    pred_lines: &[String],
    ref_lines: &[String],
    annotations: &AnnotationSet,
    opts: &EvalOptions,
) -> Result<GenderReport, EvalError> {
    let outcomes = token_outcomes(pred_lines, ref_lines, opts)?;
    validate_annotations(&n_tokens_per_line(&outcomes, ref_lines.len()), annotations)?;
    // cells[context][0 = male, 1 = female]
    let mut cells = vec![[None::<Counts>; 2]; GenderContext::GROUPS.len()];
    for o in outcomes.iter().filter(|o| in_scope(o, opts)) {
        let Some(a) = annotations.get(o.line_index, o.token_index) else {
            continue;
        };
        let Some(g) = GenderContext::GROUPS.iter().position(|&c| c == a.gender_context) else {
            continue;
        };
        let side = match a.gender {
            Gender::Male => 0,
            Gender::Female => 1,
            Gender::None => continue,
        };
        cells[g][side].get_or_insert_with(Counts::default).bump(!o.correct);
    }
    let rows = GenderContext::GROUPS
        .iter()
        .zip(cells)
        .map(|(ctx, pair)| {
            let seal = |c: Option<Counts>| {
                c.map(|c| {
                    let c = Counts::new(c.errors, c.total);
                    GenderCell {
                        errors: c.errors,
                        total: c.total,
                        rate: c.rate,
                    }
                })
            };
            let male = seal(pair[0]);
            let female = seal(pair[1]);
            let bias = match (&male, &female) {
                (Some(m), Some(f)) => bias_ratio(m.rate, f.rate),
                _ => None,
            };
            GenderRow {
                context: ctx.label().to_string(),
                male,
                female,
                bias,
            }
        })
        .collect();
    Ok(GenderReport { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthRow {
    /// Inclusive bin bounds in undiacritized characters.
    pub min_chars: usize,
    pub max_chars: usize,
    pub lines: u64,
    pub errors: u64,
    pub total: u64,
    pub rate: f64,
}

/// Word error rate against sentence length; bins with no lines are omitted.
#[derive(Debug, Clone, Serialize)]
pub struct LengthCurve {
    pub bin_width: usize,
    pub rows: Vec<LengthRow>,
}

impl LengthCurve {
    pub fn to_text(&self) -> String {
        let mut out = format!("word error rate by line length (bin width {}):\n", self.bin_width);
        for r in &self.rows {
            out.push_str(&format!(
                "{:>5}-{:<5} {:>6} lines {:>10.4}% {:>10} / {:<10}\n",
                r.min_chars,
                r.max_chars,
                r.lines,
                r.rate * 100.0,
                r.errors,
                r.total
            ));
        }
        out
    }

    /// Two tab-separated columns for plotting: bin start and error rate.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&format!("{}\t{:.6}\n", r.min_chars, r.rate));
        }
        out
    }
}

/// Word error rate grouped by the undiacritized character length of the
/// reference line (whitespace included).
pub fn wer_by_length(
    pred_lines: &[String],
    ref_lines: &[String],
    bin_width: usize,
    opts: &EvalOptions,
) -> Result<LengthCurve, EvalError> {
    assert!(bin_width > 0, "bin width must be at least 1");
    let outcomes = token_outcomes(pred_lines, ref_lines, opts)?;
    let mut per_line = vec![Counts::default(); ref_lines.len()];
    for o in outcomes.iter().filter(|o| in_scope(o, opts)) {
        per_line[o.line_index].bump(!o.correct);
    }
    let mut bins: std::collections::BTreeMap<usize, (u64, Counts)> = std::collections::BTreeMap::new();
    for (li, (line, c)) in ref_lines.iter().zip(per_line).enumerate() {
        let len = strip_diacritics(&normalize(line))
            .map_err(|source| EvalError::BadLine {
                side: "reference",
                line_no: li + 1,
                source,
            })?
            .chars()
            .count();
        let entry = bins.entry(len / bin_width).or_default();
        entry.0 += 1;
        entry.1.errors += c.errors;
        entry.1.total += c.total;
    }
    let rows = bins
        .into_iter()
        .map(|(bin, (lines, c))| {
            let c = Counts::new(c.errors, c.total);
            LengthRow {
                min_chars: bin * bin_width,
                max_chars: bin * bin_width + bin_width - 1,
                lines,
                errors: c.errors,
                total: c.total,
                rate: c.rate,
            }
        })
        .collect();
    Ok(LengthCurve {
        bin_width,
        rows,
    })
}
