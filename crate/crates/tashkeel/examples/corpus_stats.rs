//! Builds a small diacritized corpus and a held-out test set in memory,
//! then walks the corpus-statistics toolkit: frequency table, top forms,
//! and out-of-vocabulary rates in both token and type modes, with and
//! without bitext words folded into the known vocabulary.

use std::collections::HashSet;

use tashkeel::corpus::{
    freq_table, oov_report, oov_report_with_extra, DiacritizedCorpus, LinePolicy, OovMode,
};

fn corpus(lines: &[&str]) -> DiacritizedCorpus {
    DiacritizedCorpus::from_lines(lines.iter().map(|s| s.to_string()), LinePolicy::Fail)
        .expect("example lines are well formed")
}

fn main() {
    let train = corpus(&[
        "كَتَبَ الوَلَدُ دَرْسَهُ",
        "قَرَأَ الوَلَدُ كِتابًا",
        "كَتَبَ المُعَلِّمُ دَرْسًا",
        "ذَهَبَ الوَلَدُ إِلى المَدْرَسَةِ",
        "قَرَأَ المُعَلِّمُ الكِتابَ",
    ]);
    let test = corpus(&[
        "كَتَبَ الوَلَدُ رِسالَةً",
        "ذَهَبَتْ البِنْتُ إِلى السُوقِ",
    ]);

    let freqs = freq_table(&train);
    println!(
        "train: {} lines, {} tokens, {} stripped types ({} occurrences)",
        train.len(),
        train.token_count(),
        freqs.len(),
        freqs.total()
    );
    println!("forms by training count:");
    for (word, count) in freqs.sorted() {
        println!("  {count:>3}  {word}");
    }

    for mode in [OovMode::Token, OovMode::Type] {
        let report = oov_report(&train, &test, mode).expect("test corpus is nonempty");
        println!(
            "\n{mode:?} OOV: encoder {:.1}% ({} / {}), decoder {:.1}% ({} / {})",
            report.encoder_oov_rate * 100.0,
            report.encoder_oov_units,
            report.test_units,
            report.decoder_oov_rate * 100.0,
            report.decoder_oov_units,
            report.test_units,
        );
    }

    // A bitext's Arabic side only ever helps the encoder: its words are bare,
    // so they can never match a diacritized decoder form.
    let bitext_words: HashSet<String> =
        ["رسالة", "البنت", "السوق"].iter().map(|s| s.to_string()).collect();
    let with_extra = oov_report_with_extra(
        &train,
        &test,
        OovMode::Token,
        &bitext_words,
        &HashSet::new(),
    )
    .expect("test corpus is nonempty");
    println!(
        "\ntoken OOV with bitext words as extra encoder vocabulary: encoder {:.1}%, decoder {:.1}%",
        with_extra.encoder_oov_rate * 100.0,
        with_extra.decoder_oov_rate * 100.0,
    );
}
