//! Runs the most-frequent-diacritization lookup baseline: each stripped
//! word maps to the marking it carried most often in training, and unseen
//! words pass through bare. Plugged into the windowed pipeline and scored,
//! it shows both why the baseline is strong on seen words and how it fails
//! on homographs whose readings split by context.

use tashkeel::corpus::{DiacritizedCorpus, LinePolicy};
use tashkeel::eval::{wer, EvalOptions};
use tashkeel::model::MfdBaseline;
use tashkeel::window::{diacritize_lines, SentenceDecoder, Windowing};

struct MfdDecoder<'a>(&'a MfdBaseline);

impl SentenceDecoder for MfdDecoder<'_> {
    fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
        Ok(lines.iter().map(|l| self.0.diacritize_line(l)).collect())
    }
}

fn main() -> anyhow::Result<()> {
    // The written form كتب appears twice as "he wrote" and once as "books",
    // so the table keeps the majority reading and always loses the minority
    // one.
    let train = DiacritizedCorpus::from_lines(
        [
            "كَتَبَ الوَلَدُ",
            "كَتَبَ المُعَلِّمُ",
            "كُتُبٌ جَدِيدَةٌ",
            "قَرَأَ الوَلَدُ",
        ]
        .iter()
        .map(|s| s.to_string()),
        LinePolicy::Fail,
    )?;
    let baseline = MfdBaseline::from_corpus(&train);
    println!("lookup table: {} stripped forms", baseline.len());
    for word in ["كتب", "الولد", "غائب"] {
        match baseline.lookup(word) {
            Some(marked) => println!("  {word} -> {marked}"),
            None => println!("  {word} -> (unseen, passes through)"),
        }
    }

    let reference = vec![
        "كَتَبَ الوَلَدُ".to_string(),
        "كُتُبٌ قَدِيمَةٌ".to_string(),
    ];
    let bare: Vec<String> = vec!["كتب الولد".into(), "كتب قديمة".into()];
    let (pred, stats) =
        diacritize_lines(&MfdDecoder(&baseline), &bare, &Windowing::default())?;
    for (b, p) in bare.iter().zip(&pred) {
        println!("{b}  ->  {p}");
    }
    let report = wer(&pred, &reference, &EvalOptions::default())?;
    print!("\n{}", report.to_text());
    println!(
        "({} windows decoded, {} mismatched)",
        stats.windows, stats.mismatched_windows
    );
    Ok(())
}
