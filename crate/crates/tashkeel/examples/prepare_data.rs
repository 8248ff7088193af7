//! Shows how training data is put together: a character vocabulary over a
//! diacritized corpus and a bitext, one example stream per task (each source
//! prefixed with its task tag), and a seeded weighted mix of the streams.
//! Prints one example per task with its ids decoded back to text.

use tashkeel::corpus::{Bitext, DiacritizedCorpus, LinePolicy};
use tashkeel::data::{
    make_diacritization_examples, make_translation_examples, mix, translation_tag, CharVocab,
    Direction, Example, DIAC_TAG, DEFAULT_TRANSLATION_MAX_CHARS,
};

fn show(label: &str, example: &Example, vocab: &CharVocab) {
    let tag = vocab.symbol(example.tag()).expect("tag id resolves");
    println!(
        "{label}\n  tag {tag}\n  src {:?}\n  ->  {:?}",
        vocab.decode_to_string(&example.src[1..]),
        vocab.decode_to_string(&example.tgt),
    );
}

fn main() {
    let corpus = DiacritizedCorpus::from_lines(
        ["كَتَبَ الوَلَدُ", "قَرَأَ المُعَلِّمُ"].iter().map(|s| s.to_string()),
        LinePolicy::Fail,
    )
    .expect("corpus lines are well formed");
    let bitext = Bitext::from_pairs(
        [("كتب الولد", "the boy wrote"), ("قرأ المعلم", "the teacher read")]
            .iter()
            .map(|(s, t)| (s.to_string(), t.to_string())),
        "ar",
        "en",
    );

    // The vocabulary covers rendered training lines, both bitext sides, and
    // one tag per task, so no training symbol ever maps to unknown.
    let rendered: Vec<String> = corpus.lines().iter().map(|l| l.render()).collect();
    let mut texts: Vec<&str> = rendered.iter().map(String::as_str).collect();
    for (s, t) in bitext.pairs() {
        texts.push(s);
        texts.push(t);
    }
    let fwd = translation_tag(bitext.src_lang(), bitext.tgt_lang());
    let rev = translation_tag(bitext.tgt_lang(), bitext.src_lang());
    let vocab = CharVocab::build(texts, &[DIAC_TAG, &fwd, &rev]);
    println!(
        "vocabulary: {} symbols, task tags {:?}",
        vocab.len(),
        vocab.task_tags()
    );

    let diac = make_diacritization_examples(&corpus, &vocab, None);
    let forward =
        make_translation_examples(&bitext, &vocab, Direction::Forward, DEFAULT_TRANSLATION_MAX_CHARS);
    let reverse =
        make_translation_examples(&bitext, &vocab, Direction::Reverse, DEFAULT_TRANSLATION_MAX_CHARS);
    println!(
        "streams: {} diacritization, {} forward, {} reverse",
        diac.examples.len(),
        forward.examples.len(),
        reverse.examples.len()
    );

    show("\ndiacritization example:", &diac.examples[0], &vocab);
    show("\nforward translation example:", &forward.examples[0], &vocab);
    show("\nreverse translation example:", &reverse.examples[0], &vocab);

    // Double weight on diacritization: that stream appears twice in the mix.
    let mixed = mix(
        &[diac.examples, forward.examples, reverse.examples],
        &[2.0, 1.0, 1.0],
        7,
    );
    println!("\nmixed order (diacritization weighted 2x):");
    for example in &mixed {
        println!("  {}", vocab.symbol(example.tag()).expect("tag id resolves"));
    }
}
