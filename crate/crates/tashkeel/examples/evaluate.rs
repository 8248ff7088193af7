//! Scores a deliberately flawed prediction against its reference and prints
//! every report the evaluation battery produces: word and diacritic error
//! rates, frequency-bucket and sentence-length breakdowns, and the
//! annotation-driven part-of-speech and gender tables with the relative
//! bias between genders.

use tashkeel::corpus::{freq_table, DiacritizedCorpus, LinePolicy};
use tashkeel::eval::{
    bias_ratio, der, wer, wer_by_bucket, wer_by_gender, wer_by_length, wer_by_pos, AnnotationSet,
    EvalOptions,
};

fn main() -> anyhow::Result<()> {
    let reference = vec![
        "كَتَبَ الوَلَدُ دَرْسَهُ".to_string(),
        "قَرَأَتْ البِنْتُ كِتابَها".to_string(),
    ];
    // Two word errors: a wrong final vowel on the first verb, and a wrong
    // vowel before the suffix of the last noun.
    let pred = vec![
        "كَتَبُ الوَلَدُ دَرْسَهُ".to_string(),
        "قَرَأَتْ البِنْتُ كِتابُها".to_string(),
    ];
    let opts = EvalOptions::default();

    print!("{}", wer(&pred, &reference, &opts)?.to_text());

    // One row per token: line index, token index, part-of-speech tags,
    // gender, gendered-word group, and whether the token carries a case
    // ending.
    let annotations = AnnotationSet::parse(
        "0\t0\tverb-perfect\tmale\tverb\t0\n\
         0\t1\tnoun-other\tmale\tnone\t1\n\
         0\t2\tnoun-other;pronoun-possessive\tmale\tsuffix\t0\n\
         1\t0\tverb-perfect\tfemale\tverb\t0\n\
         1\t1\tnoun-other\tfemale\tnone\t1\n\
         1\t2\tnoun-other;pronoun-possessive\tfemale\tsuffix\t0\n",
    )?;
    print!("\n{}", der(&pred, &reference, Some(&annotations), &opts)?.to_text());

    let train = DiacritizedCorpus::from_lines(
        ["كَتَبَ الوَلَدُ", "كَتَبَ المُعَلِّمُ دَرْسَهُ"].iter().map(|s| s.to_string()),
        LinePolicy::Fail,
    )?;
    let freqs = freq_table(&train);
    print!("\n{}", wer_by_bucket(&pred, &reference, &freqs, &opts)?.to_text());
    print!("\n{}", wer_by_length(&pred, &reference, 5, &opts)?.to_text());
    print!("\n{}", wer_by_pos(&pred, &reference, &annotations, &opts)?.to_text());

    let gender = wer_by_gender(&pred, &reference, &annotations, &opts)?;
    print!("\n{}", gender.to_text());
    for row in &gender.rows {
        if let Some(bias) = row.bias {
            println!(
                "{} group: female error rate differs from male by {:+.1}%",
                row.context,
                bias * 100.0
            );
        }
    }
    // The same relative-difference formula, standalone.
    let ratio = bias_ratio(0.10, 0.12).expect("male rate is nonzero");
    println!("\nbias_ratio(10.0%, 12.0%) = {:+.1}%", ratio * 100.0);
    Ok(())
}
