//! Unicode-level handling of Arabic diacritics: classification, segmentation
//! into base/mark slots, stripping, and rendering back to text.
//!
//! The central representation is [`DiacritizedSeq`]: a sentence as an ordered
//! sequence of slots, each a base scalar plus the set of combining marks
//! attached to it. Segmenting and rendering are exact inverses on canonical
//! input, which makes slot-level comparison (and therefore diacritic error
//! scoring) well defined.

use std::fmt;

use unicode_normalization::UnicodeNormalization;

/// Tatweel / kashida (U+0640). Orthographic stretching only; it is preserved
/// verbatim but never carries marks.
pub const TATWEEL: char = '\u{0640}';

/// Superscript (dagger) alef, U+0670. Not part of the default mark inventory;
/// see [`SegmentOptions::superscript_alef_is_mark`].
pub const SUPERSCRIPT_ALEF: char = '\u{0670}';

/// One Arabic diacritic mark.
///
/// Variants are ordered by Unicode canonical combining class, so the
/// discriminant order is also the canonical rendering order within a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Mark {
    /// U+064B, tanween fath (ccc 27)
    Fathatan = 0,
    /// U+064C, tanween damm (ccc 28)
    Dammatan = 1,
    /// U+064D, tanween kasr (ccc 29)
    Kasratan = 2,
    /// U+064E (ccc 30)
    Fatha = 3,
    /// U+064F (ccc 31)
    Damma = 4,
    /// U+0650 (ccc 32)
    Kasra = 5,
    /// U+0651, gemination (ccc 33)
    Shadda = 6,
    /// U+0652, vowel absence (ccc 34)
    Sukun = 7,
    /// U+0670, dagger alef (ccc 35); only active when enabled in
    /// [`SegmentOptions`]
    SuperscriptAlef = 8,
}

impl Mark {
    /// The eight-mark MSA tashkeel inventory (excludes the optional
    /// superscript alef).
    pub const STANDARD: [Mark; 8] = [
        Mark::Fathatan,
        Mark::Dammatan,
        Mark::Kasratan,
        Mark::Fatha,
        Mark::Damma,
        Mark::Kasra,
        Mark::Shadda,
        Mark::Sukun,
    ];

    /// All nine marks, superscript alef included.
    pub const ALL: [Mark; 9] = [
        Mark::Fathatan,
        Mark::Dammatan,
        Mark::Kasratan,
        Mark::Fatha,
        Mark::Damma,
        Mark::Kasra,
        Mark::Shadda,
        Mark::Sukun,
        Mark::SuperscriptAlef,
    ];

    /// The code point for this mark.
    pub fn ch(self) -> char {
        match self {
            Mark::Fathatan => '\u{064B}',
            Mark::Dammatan => '\u{064C}',
            Mark::Kasratan => '\u{064D}',
            Mark::Fatha => '\u{064E}',
            Mark::Damma => '\u{064F}',
            Mark::Kasra => '\u{0650}',
            Mark::Shadda => '\u{0651}',
            Mark::Sukun => '\u{0652}',
            Mark::SuperscriptAlef => SUPERSCRIPT_ALEF,
        }
    }

    /// Map a code point in the standard eight-mark inventory back to a mark.
    pub fn from_char(c: char) -> Option<Mark> {
        Some(match c {
            '\u{064B}' => Mark::Fathatan,
            '\u{064C}' => Mark::Dammatan,
            '\u{064D}' => Mark::Kasratan,
            '\u{064E}' => Mark::Fatha,
            '\u{064F}' => Mark::Damma,
            '\u{0650}' => Mark::Kasra,
            '\u{0651}' => Mark::Shadda,
            '\u{0652}' => Mark::Sukun,
            _ => return None,
        })
    }

    /// Unicode canonical combining class of the mark's code point.
    pub fn combining_class(self) -> u8 {
        27 + self as u8
    }

    /// True for the marks that fill a slot's single "vowel position": the
    /// three nunation marks, the three short vowels, and sukun. Shadda and
    /// superscript alef stack on top of these.
    pub fn is_vowel_slot(self) -> bool {
        !matches!(self, Mark::Shadda | Mark::SuperscriptAlef)
    }
}

/// Classification of a Unicode scalar for segmentation purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharClass {
    /// An Arabic-script letter (including tatweel).
    ArabicLetter,
    /// One of the diacritic marks in the active inventory.
    DiacriticMark(Mark),
    /// Any Unicode whitespace.
    Whitespace,
    /// Everything else: punctuation, digits, Latin letters, out-of-inventory
    /// combining marks, ...
    Other,
}

/// Options controlling segmentation and classification.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentOptions {
    /// Treat U+0670 (superscript alef) as a ninth diacritic mark instead of a
    /// letter. Off by default: the standard MSA tashkeel set has eight marks.
    pub superscript_alef_is_mark: bool,
}

impl SegmentOptions {
    /// The active mark inventory under these options.
    pub fn inventory(&self) -> &'static [Mark] {
        if self.superscript_alef_is_mark {
            &Mark::ALL
        } else {
            &Mark::STANDARD
        }
    }
}

fn is_arabic_letter_scalar(c: char) -> bool {
    matches!(u32::from(c),
        0x0620..=0x064A          // hamza forms, core letters, tatweel
        | 0x066E..=0x066F        // dotless beh, dotless qaf
        | 0x0671..=0x06D3        // alef wasla through extended letters
        | 0x06D5                 // ae
        | 0x06EE..=0x06EF
        | 0x06FA..=0x06FF
        | 0x0750..=0x077F        // Arabic Supplement
        | 0x0870..=0x088E        // Arabic Extended-B
        | 0x08A0..=0x08C9        // Arabic Extended-A letters
        | 0xFB50..=0xFBC1        // presentation forms
        | 0xFBD3..=0xFD3D
        | 0xFDF0..=0xFDFB
        | 0xFE70..=0xFEFC)
}

/// Classify a scalar under the default options (eight-mark inventory).
///
/// Total and pure: every scalar maps to exactly one class.
pub fn classify_char(c: char) -> CharClass {
    classify_char_with(c, &SegmentOptions::default())
}

/// Classify a scalar under explicit options.
pub fn classify_char_with(c: char, opts: &SegmentOptions) -> CharClass {
    if let Some(m) = Mark::from_char(c) {
        return CharClass::DiacriticMark(m);
    }
    if c == SUPERSCRIPT_ALEF {
        return if opts.superscript_alef_is_mark {
            CharClass::DiacriticMark(Mark::SuperscriptAlef)
        } else {
            CharClass::ArabicLetter
        };
    }
    if c.is_whitespace() {
        return CharClass::Whitespace;
    }
    if is_arabic_letter_scalar(c) {
        return CharClass::ArabicLetter;
    }
    CharClass::Other
}

/// A set of marks on one slot, stored as a bitmask over [`Mark`].
///
/// Equality is set equality; iteration is in canonical combining-class order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MarkSet(u16);

impl MarkSet {
    pub const EMPTY: MarkSet = MarkSet(0);

    pub fn single(mark: Mark) -> MarkSet {
        MarkSet(1 << mark as u16)
    }

    pub fn from_marks(marks: &[Mark]) -> MarkSet {
        let mut s = MarkSet::EMPTY;
        for &m in marks {
            s.0 |= 1 << m as u16;
        }
        s
    }

    pub fn contains(self, mark: Mark) -> bool {
        self.0 & (1 << mark as u16) != 0
    }

    /// Insert a mark; returns false if it was already present.
    pub fn insert(&mut self, mark: Mark) -> bool {
        let bit = 1 << mark as u16;
        let fresh = self.0 & bit == 0;
        self.0 |= bit;
        fresh
    }

    pub fn remove(&mut self, mark: Mark) {
        self.0 &= !(1 << mark as u16);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Marks in canonical (ascending combining class) order.
    pub fn iter(self) -> impl Iterator<Item = Mark> {
        Mark::ALL.into_iter().filter(move |m| self.contains(*m))
    }

    /// Whether this set is a legal per-slot combination: at most one mark in
    /// the vowel position, plus optionally shadda, plus optionally superscript
    /// alef. For the eight-mark inventory this is exactly "at most two marks,
    /// and a pair must include shadda".
    pub fn is_valid(self) -> bool {
        self.iter().filter(|m| m.is_vowel_slot()).count() <= 1
    }
}

impl fmt::Display for MarkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in self.iter() {
            write!(f, "{}", m.ch())?;
        }
        Ok(())
    }
}

/// One slot of a [`DiacritizedSeq`]: a base scalar plus its marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub base: char,
    pub marks: MarkSet,
}

impl Slot {
    pub fn new(base: char, marks: MarkSet) -> Slot {
        Slot { base, marks }
    }

    pub fn bare(base: char) -> Slot {
        Slot { base, marks: MarkSet::EMPTY }
    }
}

/// A sentence as an ordered sequence of (base, mark set) slots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DiacritizedSeq {
    slots: Vec<Slot>,
}

/// Why a piece of text failed to segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentErrorKind {
    /// A mark with no preceding base character.
    LeadingMark,
    /// A mark attached to whitespace, punctuation, tatweel, or any other base
    /// that cannot carry diacritics.
    MarkOnNonArabic,
    /// A slot accumulated an illegal mark combination (two vowel-position
    /// marks, or a repeated mark).
    TooManyMarks,
}

/// Segmentation failure, located by byte and scalar offset in the input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind:?} at char {char_offset} (byte {byte_offset})")]
pub struct SegmentError {
    pub kind: SegmentErrorKind,
    pub byte_offset: usize,
    pub char_offset: usize,
}

impl DiacritizedSeq {
    /// Build from raw slots, validating the type invariants: no base is a
    /// mark, only Arabic letters (excluding tatweel) carry marks, and each
    /// mark set is a legal combination.
    pub fn new(slots: Vec<Slot>) -> Result<DiacritizedSeq, SegmentError> {
        Self::new_with(slots, &SegmentOptions::default())
    }

    pub fn new_with(slots: Vec<Slot>, opts: &SegmentOptions) -> Result<DiacritizedSeq, SegmentError> {
        for (i, slot) in slots.iter().enumerate() {
            let err = |kind| SegmentError { kind, byte_offset: i, char_offset: i };
            match classify_char_with(slot.base, opts) {
                CharClass::DiacriticMark(_) => return Err(err(SegmentErrorKind::LeadingMark)),
                CharClass::ArabicLetter if slot.base != TATWEEL => {}
                _ => {
                    if !slot.marks.is_empty() {
                        return Err(err(SegmentErrorKind::MarkOnNonArabic));
                    }
                }
            }
            if !slot.marks.is_valid() {
                return Err(err(SegmentErrorKind::TooManyMarks));
            }
            if !opts.superscript_alef_is_mark && slot.marks.contains(Mark::SuperscriptAlef) {
                return Err(err(SegmentErrorKind::TooManyMarks));
            }
        }
        Ok(DiacritizedSeq { slots })
    }

    /// Slots in order.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Render back to text: each base followed by its marks in canonical
    /// order. Exact inverse of [`segment`] on canonical input.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.slots.len() * 2);
        for slot in &self.slots {
            out.push(slot.base);
            for m in slot.marks.iter() {
                out.push(m.ch());
            }
        }
        out
    }

    /// The base characters only (the undiacritized form).
    pub fn bases(&self) -> String {
        self.slots.iter().map(|s| s.base).collect()
    }

    /// Slot-index ranges of whitespace-separated tokens (runs of
    /// non-whitespace slots).
    pub fn token_spans(&self) -> Vec<std::ops::Range<usize>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, slot) in self.slots.iter().enumerate() {
            let ws = matches!(classify_char(slot.base), CharClass::Whitespace);
            match (ws, start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    spans.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(s..self.slots.len());
        }
        spans
    }

    /// Whitespace-separated tokens as sub-sequences.
    pub fn tokens(&self) -> Vec<DiacritizedSeq> {
        self.token_spans()
            .into_iter()
            .map(|r| DiacritizedSeq { slots: self.slots[r].to_vec() })
            .collect()
    }

    /// Sub-sequence over a slot range. Panics if out of bounds.
    pub fn slice(&self, range: std::ops::Range<usize>) -> DiacritizedSeq {
        DiacritizedSeq { slots: self.slots[range].to_vec() }
    }
}

/// Canonical Unicode normalization (composed form). Applied to all text at
/// ingestion; puts marks within a slot in ascending combining-class order and
/// composes hamza/madda letter forms.
pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

/// Segment text into a [`DiacritizedSeq`] under default options.
///
/// Marks attach to the immediately preceding base. The input should already be
/// canonically normalized (see [`normalize`]); mark order within a slot is
/// accepted either way since mark sets are unordered.
pub fn segment(text: &str) -> Result<DiacritizedSeq, SegmentError> {
    segment_with(text, &SegmentOptions::default())
}

/// Segment with explicit options.
pub fn segment_with(text: &str, opts: &SegmentOptions) -> Result<DiacritizedSeq, SegmentError> {
    let mut slots: Vec<Slot> = Vec::with_capacity(text.len() / 2);
    let mut can_carry = false;
    for (char_offset, (byte_offset, c)) in text.char_indices().enumerate() {
        let err = |kind| SegmentError { kind, byte_offset, char_offset };
        match classify_char_with(c, opts) {
            CharClass::DiacriticMark(m) => {
                let slot = match slots.last_mut() {
                    Some(s) => s,
                    None => return Err(err(SegmentErrorKind::LeadingMark)),
                };
                if !can_carry {
                    return Err(err(SegmentErrorKind::MarkOnNonArabic));
                }
                if !slot.marks.insert(m) || !slot.marks.is_valid() {
                    return Err(err(SegmentErrorKind::TooManyMarks));
                }
            }
            class => {
                can_carry = class == CharClass::ArabicLetter && c != TATWEEL;
                slots.push(Slot::bare(c));
            }
        }
    }
    Ok(DiacritizedSeq { slots })
}

/// Remove all diacritic marks, keeping bases in order. Idempotent.
pub fn strip_diacritics(text: &str) -> Result<String, SegmentError> {
    Ok(segment(text)?.bases())
}
