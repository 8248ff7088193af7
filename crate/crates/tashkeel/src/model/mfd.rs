//! Most-frequent-diacritization lookup baseline.
//!
//! For every stripped word seen in training, remember the diacritized form it
//! most often appears as; at decode time emit that form, and pass unseen words
//! through unchanged. No context is used, so homographs always get the same
//! marks. The table plugs into the same windowed-inference path as the neural
//! decoder via [`SentenceDecoder`].

use std::collections::HashMap;

use crate::corpus::DiacritizedCorpus;
use crate::text::strip_diacritics;
use crate::window::SentenceDecoder;

/// Word-level lookup table from stripped forms to diacritized forms.
pub struct MfdBaseline {
    map: HashMap<String, String>,
}

impl MfdBaseline {
    /// Build the table from a diacritized corpus. Ties in frequency go to the
    /// code-point-lexicographically smallest diacritized form so the table is
    /// independent of corpus order.
    pub fn from_corpus(corpus: &DiacritizedCorpus) -> MfdBaseline {
        let mut counts: HashMap<String, HashMap<String, u64>> = HashMap::new();
        for tok in corpus.tokens() {
            *counts
                .entry(tok.bases())
                .or_default()
                .entry(tok.render())
                .or_default() += 1;
        }
        let map = counts
            .into_iter()
            .map(|(stripped, forms)| {
                let best = forms
                    .into_iter()
                    .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                    .expect("every stripped form has at least one rendered form")
                    .0;
                (stripped, best)
            })
            .collect();
        MfdBaseline { map }
    }

    /// Number of distinct stripped words in the table.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Look up the remembered form for one stripped word.
    pub fn lookup(&self, stripped: &str) -> Option<&str> {
        self.map.get(stripped).map(|s| s.as_str())
    }

    /// Diacritize one line word by word, preserving all whitespace exactly.
    pub fn diacritize_line(&self, line: &str) -> String {
        let chars: Vec<char> = line.chars().collect();
        let mut out = String::with_capacity(line.len() * 2);
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_whitespace() {
                out.push(chars[i]);
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            // A word whose marks do not even segment passes through.
            match strip_diacritics(&word).ok().and_then(|key| self.map.get(&key)) {
                Some(form) => out.push_str(form),
                None => out.push_str(&word),
            }
        }
        out
    }
}

impl SentenceDecoder for MfdBaseline {
    fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
        Ok(lines.iter().map(|l| self.diacritize_line(l)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::{diacritize_lines, Windowing};

    const KAF_FATHA: &str = "\u{0643}\u{064E}"; // ka
    const KAF_DAMMA: &str = "\u{0643}\u{064F}"; // ku
    const TA: &str = "\u{062A}";
    const BA: &str = "\u{0628}";

    fn corpus(lines: &[String]) -> DiacritizedCorpus {
        DiacritizedCorpus::from_lines(lines.iter().cloned(), crate::corpus::LinePolicy::Fail)
            .unwrap()
    }

    #[test]
    fn majority_form_wins() {
        let ka_tb = format!("{KAF_FATHA}{TA}{BA}");
        let ku_tb = format!("{KAF_DAMMA}{TA}{BA}");
        let c = corpus(&[format!("{ka_tb} {ka_tb}"), ku_tb.clone()]);
        let mfd = MfdBaseline::from_corpus(&c);
        assert_eq!(mfd.lookup(&format!("\u{0643}{TA}{BA}")), Some(ka_tb.as_str()));
    }

    #[test]
    fn ties_pick_the_smallest_form() {
        // One occurrence each; Fatha (U+064E) sorts below Damma (U+064F).
        let ka_tb = format!("{KAF_FATHA}{TA}{BA}");
        let ku_tb = format!("{KAF_DAMMA}{TA}{BA}");
        let c = corpus(&[ku_tb, ka_tb.clone()]);
        let mfd = MfdBaseline::from_corpus(&c);
        assert_eq!(mfd.lookup(&format!("\u{0643}{TA}{BA}")), Some(ka_tb.as_str()));
    }

    #[test]
    fn unseen_words_and_whitespace_pass_through() {
        let ka_tb = format!("{KAF_FATHA}{TA}{BA}");
        let c = corpus(&[ka_tb.clone()]);
        let mfd = MfdBaseline::from_corpus(&c);
        let line = format!("\u{0643}{TA}{BA}  abc\t\u{0642}{TA}");
        let got = mfd.diacritize_line(&line);
        assert_eq!(got, format!("{ka_tb}  abc\t\u{0642}{TA}"));
    }

    #[test]
    fn works_through_windowed_inference() {
        let ka_tb = format!("{KAF_FATHA}{TA}{BA}");
        let c = corpus(&[ka_tb.clone()]);
        let mfd = MfdBaseline::from_corpus(&c);
        let stripped = format!("\u{0643}{TA}{BA}");
        let long: Vec<String> = std::iter::repeat(stripped.clone()).take(120).collect();
        let lines = vec![long.join(" "), String::new(), stripped.clone()];
        let (outs, stats) = diacritize_lines(&mfd, &lines, &Windowing::default()).unwrap();
        let want: Vec<String> = std::iter::repeat(ka_tb.clone()).take(120).collect();
        assert_eq!(outs[0], want.join(" "));
        assert_eq!(outs[1], "");
        assert_eq!(outs[2], ka_tb);
        assert!(stats.windowed_lines >= 1);
        assert_eq!(stats.mismatched_windows, 0);
    }
}
