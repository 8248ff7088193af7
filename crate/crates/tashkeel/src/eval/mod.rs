//! Scoring and analysis of diacritization output.
//!
//! The entry points are [`wer`] (word error rate) and [`der`] (per-character
//! diacritic error rate in four scopes), plus grouped breakdowns of the word
//! metric: by training-count bucket, part of speech, gendered-word class, and
//! sentence length. All comparisons run over NFC-normalized text and share
//! one token-alignment and token-scoring core, so every breakdown agrees with
//! the headline number it decomposes.

pub mod align;
pub mod annot;
pub mod breakdown;
pub mod score;

#[cfg(test)]
pub(crate) mod fixtures;

use crate::text::SegmentError;

pub use align::{align_tokens, AlignedPair, Alignment};
pub use annot::{
    AnnotError, AnnotationSet, Gender, GenderContext, TokenAnnotation, POS_CATEGORIES,
};
pub use breakdown::{
    bias_ratio, bucket_index, wer_by_bucket, wer_by_gender, wer_by_length, wer_by_pos,
    BucketReport, GenderCell, GenderReport, GenderRow, LengthCurve, LengthRow, PosReport, PosRow,
    BUCKET_LABELS,
};
pub use score::{der, token_outcomes, wer, Counts, DerReport, TokenOutcome, WerReport};

/// Scoring failed before any counting happened.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction has {pred} lines but reference has {reference}")]
    LineCountMismatch { pred: usize, reference: usize },
    #[error("{side} line {line_no}: {source}")]
    BadLine {
        side: &'static str,
        line_no: usize,
        source: SegmentError,
    },
    #[error("annotation points at line {line_index} token {token_index}, which does not exist")]
    AnnotationOutOfRange {
        line_index: usize,
        token_index: usize,
    },
    #[error("this analysis needs a token annotation file")]
    MissingAnnotations,
    #[error(transparent)]
    Annot(#[from] AnnotError),
}

/// Shared scoring switches.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Count only reference tokens containing at least one Arabic letter.
    pub arabic_tokens_only: bool,
    /// Treat the two documented mark variants as equivalent before comparing
    /// (sukun vs no mark; fatha before a plain alef vs none).
    pub normalize_variants: bool,
}

impl Default for EvalOptions {
    fn default() -> EvalOptions {
        EvalOptions {
            arabic_tokens_only: true,
            normalize_variants: false,
        }
    }
}
