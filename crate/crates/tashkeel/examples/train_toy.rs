//! Trains the desk-scale model on eight short sentences until it reproduces
//! them exactly, then decodes each one. A quick end-to-end check that the
//! manual forward, backward, and optimizer plumbing actually learns.

use tashkeel::corpus::{DiacritizedCorpus, LinePolicy};
use tashkeel::data::{make_diacritization_examples, CharVocab, DIAC_TAG};
use tashkeel::model::{train, DecodeOptions, ModelConfig, ModelDecoder, TrainConfig};
use tashkeel::window::{diacritize_lines, Windowing};

fn main() -> anyhow::Result<()> {
    let lines = [
        "كَتَبَ",
        "يَدٌ",
        "صَفّ",
        "نَمْ",
        "كَتَبَ يَدٌ",
        "صَفّ نَمْ",
        "يَدٌ صَفّ",
        "نَمْ كَتَبَ",
    ];
    let corpus = DiacritizedCorpus::from_lines(
        lines.iter().map(|s| s.to_string()),
        LinePolicy::Fail,
    )?;
    let rendered: Vec<String> = corpus.lines().iter().map(|l| l.render()).collect();
    let vocab = CharVocab::build(rendered.iter().map(String::as_str), &[DIAC_TAG]);
    let examples = make_diacritization_examples(&corpus, &vocab, None).examples;

    let model_cfg = ModelConfig::desk(vocab.len());
    let train_cfg = TrainConfig {
        epochs: 120,
        warmup_steps: 30,
        stop_at_zero_dev_wer: true,
        seed: 5,
        ..TrainConfig::desk()
    };
    let opts = DecodeOptions::default();
    let start = std::time::Instant::now();
    let trained = train(&model_cfg, &train_cfg, &examples, &corpus, &vocab, &opts)?;
    println!(
        "reached dev WER {:.2}% at epoch {} of {} run, in {:.1?}",
        trained.report.best_dev_wer * 100.0,
        trained.report.best_epoch,
        trained.report.epochs.len(),
        start.elapsed()
    );

    let decoder = ModelDecoder {
        params: &trained.params,
        cfg: &model_cfg,
        vocab: &vocab,
        opts,
    };
    let bare: Vec<String> = corpus.lines().iter().map(|l| l.bases()).collect();
    let (decoded, _) = diacritize_lines(&decoder, &bare, &Windowing::default())?;
    let mut exact = 0;
    for (out, want) in decoded.iter().zip(lines) {
        let ok = out == want;
        exact += ok as usize;
        println!("{} {}", if ok { "=" } else { "!" }, out);
    }
    println!("{exact} / {} lines reproduced exactly", lines.len());
    Ok(())
}
