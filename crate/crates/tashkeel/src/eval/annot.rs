//! Per-token linguistic annotations: part-of-speech tags, grammatical gender,
//! and whether the token carries a case ending.
//!
//! File format is tab-separated, one row per annotated token:
//!
//! ```text
//! line_index<TAB>token_index<TAB>pos;pos;...<TAB>gender<TAB>gender_context<TAB>case_ending
//! ```
//!
//! Indices are 0-based into the reference corpus. The pos field may be empty;
//! gender is `male`, `female`, or `none`; gender_context is `pronoun`, `verb`,
//! `suffix`, or `none`; case_ending is `0` or `1`. Blank lines and lines
//! starting with `#` are skipped. Tokens without a row get the defaults (no
//! tags, no gender, no case ending).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// The fixed part-of-speech category inventory used by the breakdown reports.
pub const POS_CATEGORIES: [&str; 15] = [
    "noun-proper",
    "noun-numeric",
    "noun-quantity",
    "noun-other",
    "pronoun-possessive",
    "pronoun-demonstrative",
    "pronoun-other",
    "verb-perfect",
    "verb-imperfect",
    "verb-imperative",
    "adverb",
    "adjective-cardinal",
    "adjective-comparative",
    "adjective-other",
    "determiner",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    None,
}

/// Which kind of gendered word a token is, for the gender breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderContext {
    Pronoun,
    Verb,
    Suffix,
    None,
}

impl GenderContext {
    pub const GROUPS: [GenderContext; 3] = [
        GenderContext::Pronoun,
        GenderContext::Verb,
        GenderContext::Suffix,
    ];

    pub fn label(self) -> &'static str {
        match self {
            GenderContext::Pronoun => "pronoun",
            GenderContext::Verb => "verb",
            GenderContext::Suffix => "suffix",
            GenderContext::None => "none",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenAnnotation {
    pub line_index: usize,
    pub token_index: usize,
    /// Categories from [`POS_CATEGORIES`]; a token may carry several.
    pub pos_tags: Vec<String>,
    pub gender: Gender,
    pub gender_context: GenderContext,
    pub has_case_ending: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum AnnotError {
    #[error("annotation io: {0}")]
    Io(#[from] std::io::Error),
    #[error("annotation line {line_no}: {msg}")]
    Bad { line_no: usize, msg: String },
    #[error("annotation line {line_no}: duplicate row for line {line_index} token {token_index}")]
    Duplicate {
        line_no: usize,
        line_index: usize,
        token_index: usize,
    },
}

/// All annotations for one reference corpus, keyed by (line, token).
#[derive(Debug, Clone, Default)]
pub struct AnnotationSet {
    rows: BTreeMap<(usize, usize), TokenAnnotation>,
}

impl AnnotationSet {
    pub fn new(rows: impl IntoIterator<Item = TokenAnnotation>) -> AnnotationSet {
        let mut set = AnnotationSet::default();
        for a in rows {
            set.rows.insert((a.line_index, a.token_index), a);
        }
        set
    }

    pub fn get(&self, line_index: usize, token_index: usize) -> Option<&TokenAnnotation> {
        self.rows.get(&(line_index, token_index))
    }

    pub fn iter(&self) -> impl Iterator<Item = &TokenAnnotation> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn load(path: &Path) -> Result<AnnotationSet, AnnotError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<AnnotationSet, AnnotError> {
        let bad = |line_no: usize, msg: String| AnnotError::Bad { line_no, msg };
        let mut set = AnnotationSet::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(bad(line_no, format!("want 6 fields, got {}", fields.len())));
            }
            let line_index: usize = fields[0]
                .parse()
                .map_err(|_| bad(line_no, format!("bad line index {:?}", fields[0])))?;
            let token_index: usize = fields[1]
                .parse()
                .map_err(|_| bad(line_no, format!("bad token index {:?}", fields[1])))?;
            let mut pos_tags = Vec::new();
            for tag in fields[2].split(';').filter(|t| !t.is_empty()) {
                if !POS_CATEGORIES.contains(&tag) {
                    return Err(bad(line_no, format!("unknown pos category {tag:?}")));
                }
                pos_tags.push(tag.to_string());
            }
            let gender = match fields[3] {
                "male" => Gender::Male,
                "female" => Gender::Female,
                "none" => Gender::None,
                g => return Err(bad(line_no, format!("bad gender {g:?}"))),
            };
            let gender_context = match fields[4] {
                "pronoun" => GenderContext::Pronoun,
                "verb" => GenderContext::Verb,
                "suffix" => GenderContext::Suffix,
                "none" => GenderContext::None,
                g => return Err(bad(line_no, format!("bad gender context {g:?}"))),
            };
            let has_case_ending = match fields[5] {
                "0" => false,
                "1" => true,
                f => return Err(bad(line_no, format!("bad case-ending flag {f:?}"))),
            };
            let key = (line_index, token_index);
            if set.rows.contains_key(&key) {
                return Err(AnnotError::Duplicate {
                    line_no,
                    line_index,
                    token_index,
                });
            }
            set.rows.insert(
                key,
                TokenAnnotation {
                    line_index,
                    token_index,
                    pos_tags,
                    gender,
                    gender_context,
                    has_case_ending,
                },
            );
        }
        Ok(set)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for a in self.rows.values() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                a.line_index,
                a.token_index,
                a.pos_tags.join(";"),
                match a.gender {
                    Gender::Male => "male",
                    Gender::Female => "female",
                    Gender::None => "none",
                },
                a.gender_context.label(),
                u8::from(a.has_case_ending),
            ));
        }
        out
    }
}
