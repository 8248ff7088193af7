//! Acceptance battery: ten numbered checks covering the whole workbench,
//! from text round trips to the multitask training benchmark. Every test
//! prints exactly one stdout verdict line tagged [PASS] or [FAIL] with its
//! measured numbers; tolerances are pinned in the assertions. Progress for
//! the long-running checks goes to stderr.

mod common;

use std::collections::HashSet;
use std::time::Instant;

use ndarray::{arr2, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tashkeel::corpus::{freq_table, DiacritizedCorpus, LinePolicy};
use tashkeel::data::{make_diacritization_examples, CharVocab, BOS, DIAC_TAG, EOS, PAD};
use tashkeel::eval::{
    self, bias_ratio, bucket_index, wer_by_bucket, wer_by_gender, wer_by_length, wer_by_pos,
    AnnotationSet, EvalOptions,
};
use tashkeel::model::checkpoint;
use tashkeel::model::loss::label_smoothed_ce;
use tashkeel::model::net::{backward, forward_train};
use tashkeel::model::{
    train, CheckpointMeta, DecodeOptions, ModelConfig, ModelDecoder, Params, TrainConfig,
};
use tashkeel::synth::{generate, prepare_mtl_data, run_condition, MtlCondition, SynthSpec};
use tashkeel::text::{classify_char, normalize, segment, strip_diacritics, CharClass, Mark};
use tashkeel::window::{
    diacritize_lines, stitch_ranges, window_starts, MismatchPolicy, SentenceDecoder, Windowing,
};

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[test]
fn criterion_01_round_trip_invariants_hold_on_fuzzed_text() {
    let start = Instant::now();
    let n = 10_000;
    let mut rng = StdRng::seed_from_u64(42);
    let mut failures = 0usize;
    for _ in 0..n {
        let raw = normalize(&common::random_marked_text(&mut rng));
        let seq = match segment(&raw) {
            Ok(seq) => seq,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        if seq.render() != raw {
            failures += 1;
        }
        let bare = strip_diacritics(&raw).expect("a segmentable string strips");
        if strip_diacritics(&bare).as_deref() != Ok(bare.as_str()) {
            failures += 1;
        }
        if seq.bases() != bare {
            failures += 1;
        }
        let restripped = segment(&bare).expect("bare text segments");
        if restripped.slots().iter().any(|s| !s.marks.is_empty()) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = failures == 0 && elapsed.as_secs_f64() < 5.0;
    println!(
        "[{}] criterion 1: segment/render/strip round trip on {n} fuzzed strings, \
         {failures} failures in {elapsed:.2?} (limit 5s)",
        verdict(ok)
    );
    assert!(ok, "{failures} round-trip failures in {elapsed:?}");
}

#[test]
fn criterion_02_metrics_match_brute_force_oracles() {
    let mut rng = StdRng::seed_from_u64(7);
    let arabic_opts = EvalOptions::default();
    let all_opts = EvalOptions { arabic_tokens_only: false, ..EvalOptions::default() };
    let n_fixtures = 1_000;
    let mut failures = 0usize;
    let mut planted_errors = 0u64;
    for i in 0..n_fixtures {
        let n_lines = rng.gen_range(1..=3);
        let fx = common::plant_fixture(&mut rng, n_lines);
        planted_errors += fx.word_errors;

        let lib = eval::wer(&fx.pred, &fx.refs, &arabic_opts).expect("fixtures score");
        let oracle = common::oracle_wer(&fx.pred, &fx.refs, true);
        if (lib.errors, lib.total) != oracle
            || oracle != (fx.word_errors, fx.word_total_arabic)
        {
            failures += 1;
        }

        let lib_all = eval::wer(&fx.pred, &fx.refs, &all_opts).expect("fixtures score");
        let oracle_all = common::oracle_wer(&fx.pred, &fx.refs, false);
        if (lib_all.errors, lib_all.total) != oracle_all
            || oracle_all != (fx.word_errors, fx.word_total_all)
        {
            failures += 1;
        }

        let der = eval::der(&fx.pred, &fx.refs, None, &arabic_opts).expect("fixtures score");
        let ora = common::oracle_der(&fx.pred, &fx.refs, None);
        if (der.all.errors, der.all.total) != ora.all
            || (der.arabic.errors, der.arabic.total) != ora.arabic
            || ora.all != (fx.slot_errors, fx.slot_total_all)
            || ora.arabic != (fx.slot_errors, fx.slot_total_arabic)
        {
            failures += 1;
        }

        // Every fifth fixture also exercises the case-ending split.
        if i % 5 == 0 {
            let mut tsv = String::new();
            let mut bearing: HashSet<(usize, usize)> = HashSet::new();
            for (li, line) in fx.refs.iter().enumerate() {
                for ti in 0..line.split_whitespace().count() {
                    let flag = rng.gen_bool(0.5);
                    if flag {
                        bearing.insert((li, ti));
                    }
                    tsv.push_str(&format!("{li}\t{ti}\tnoun-other\tnone\tnone\t{}\n", flag as u8));
                }
            }
            let ann = AnnotationSet::parse(&tsv).expect("fixture annotations parse");
            let der_ann =
                eval::der(&fx.pred, &fx.refs, Some(&ann), &arabic_opts).expect("fixtures score");
            let ora_ann = common::oracle_der(&fx.pred, &fx.refs, Some(&bearing));
            let split_conserves = der_ann.case_ending.errors + der_ann.non_case_ending.errors
                == der_ann.arabic.errors
                && der_ann.case_ending.total + der_ann.non_case_ending.total
                    == der_ann.arabic.total;
            if (der_ann.case_ending.errors, der_ann.case_ending.total) != ora_ann.case_ending
                || (der_ann.non_case_ending.errors, der_ann.non_case_ending.total)
                    != ora_ann.non_case_ending
                || !split_conserves
            {
                failures += 1;
            }
        }
    }

    // Hand-counted single-error pair: the shadda is dropped from the second
    // letter. Nine aligned slots (eight Arabic letters and one space), one
    // of them wrong.
    let refs = vec!["هَيَّا لِنَذْهَبْ".to_string()];
    let pred = vec!["هَيَا لِنَذْهَبْ".to_string()];
    let hand = eval::der(&pred, &refs, None, &arabic_opts).expect("hand pair scores");
    let hand_ok = (hand.all.errors, hand.all.total) == (1, 9)
        && (hand.arabic.errors, hand.arabic.total) == (1, 8);

    let ok = failures == 0 && hand_ok && planted_errors > 0;
    println!(
        "[{}] criterion 2: wer/der equal the brute-force oracles and the planted counts on \
         {n_fixtures} fixtures ({planted_errors} planted errors), hand-counted pair 1/9 all \
         and 1/8 Arabic: {}",
        verdict(ok),
        if hand_ok { "exact" } else { "WRONG" }
    );
    assert!(ok, "{failures} oracle disagreements, hand pair ok: {hand_ok}");
}

#[test]
fn criterion_03_analytic_gradients_match_finite_differences() {
    let start = Instant::now();
    let cfg = ModelConfig {
        vocab_size: 40,
        d_model: 16,
        ffn_dim: 24,
        n_heads: 2,
        enc_layers: 2,
        dec_layers: 2,
        dropout: 0.2,
        attn_dropout: 0.15,
        act_dropout: 0.1,
        max_positions: 12,
    };
    let p: Params<f64> = Params::init(&cfg, 42);
    // Ragged batch so the padding masks participate.
    let src = arr2(&[[10, 22, 35, 4, 17], [8, 39, 5, PAD, PAD]]);
    let dec_in = arr2(&[[BOS, 12, 30, 6], [BOS, 9, PAD, PAD]]);
    let labels = arr2(&[[12, 30, 6, EOS], [9, EOS, PAD, PAD]]);
    let seed = 9;

    // The dropout masks depend only on the seed, not on parameter values, so
    // the two perturbed losses of each central difference see identical masks.
    let loss_at = |p: &Params<f64>| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (logits, _) = forward_train(p, &cfg, &src, &dec_in, Some(&mut rng));
        label_smoothed_ce(&logits, &labels, 0.1).0
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (logits, cache) = forward_train(&p, &cfg, &src, &dec_in, Some(&mut rng));
    let (_, dlogits) = label_smoothed_ce(&logits, &labels, 0.1);
    let grads = backward(&p, &cfg, &cache, &dlogits);
    let mut flat: Vec<Vec<f64>> = Vec::new();
    grads.visit(&mut |_, _, data| flat.push(data.to_vec()));

    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut p_mut = p.clone();
    for ti in 0..flat.len() {
        for i in 0..flat[ti].len() {
            let orig = p_mut.flat_mut()[ti][i];
            p_mut.flat_mut()[ti][i] = orig + eps;
            let up = loss_at(&p_mut);
            p_mut.flat_mut()[ti][i] = orig - eps;
            let down = loss_at(&p_mut);
            p_mut.flat_mut()[ti][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = flat[ti][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let grad_mass: f64 = flat.iter().flatten().map(|g| g.abs()).sum();
    let elapsed = start.elapsed();
    let ok = worst < 1e-4 && grad_mass > 1.0 && elapsed.as_secs_f64() < 120.0;
    println!(
        "[{}] criterion 3: analytic vs central-difference gradients over {checked} parameters, \
         max relative error {worst:.2e} (limit 1e-4) in {elapsed:.1?} (limit 2min)",
        verdict(ok)
    );
    assert!(ok, "worst {worst:.3e}, gradient mass {grad_mass:.3e}, elapsed {elapsed:?}");
}

#[test]
fn criterion_04_overfit_reaches_zero_train_wer_deterministically() {
    let start = Instant::now();
    let lines = common::overfit_corpus_lines();
    assert_eq!(lines.len(), 64, "the toy corpus is all 64 ordered word pairs");

    let run = || {
        let corpus = DiacritizedCorpus::from_lines(lines.iter().map(String::as_str), LinePolicy::Fail)
            .expect("toy corpus loads");
        let vocab = CharVocab::build(lines.iter().map(String::as_str), &[DIAC_TAG]);
        let examples = make_diacritization_examples(&corpus, &vocab, None).examples;
        let cfg = ModelConfig::desk(vocab.len());
        let tcfg = TrainConfig {
            epochs: 200,
            char_budget: 600,
            warmup_steps: 50,
            stop_at_zero_dev_wer: true,
            seed: 11,
            ..TrainConfig::desk()
        };
        let opts = DecodeOptions::default();
        let trained =
            train(&cfg, &tcfg, &examples, &corpus, &vocab, &opts).expect("toy training runs");
        let decoder =
            ModelDecoder { params: &trained.params, cfg: &cfg, vocab: &vocab, opts };
        let inputs: Vec<String> = corpus.lines().iter().map(|l| l.bases()).collect();
        let refs: Vec<String> = corpus.lines().iter().map(|l| l.render()).collect();
        let (outs, _) =
            diacritize_lines(&decoder, &inputs, &Windowing::default()).expect("decoding runs");
        let report = eval::wer(&outs, &refs, &EvalOptions::default()).expect("outputs score");
        let report_json = serde_json::to_string(&trained.report).expect("report serializes");
        (report.errors, report.total, trained.report.epochs.len(), outs, report_json)
    };

    eprintln!("criterion 4: first training run");
    let (errors_a, total_a, epochs_a, outs_a, json_a) = run();
    eprintln!("criterion 4: second training run (same seed)");
    let (errors_b, _, _, outs_b, json_b) = run();

    let elapsed = start.elapsed();
    let ok = errors_a == 0
        && errors_b == 0
        && total_a == 128
        && epochs_a <= 200
        && outs_a == outs_b
        && json_a == json_b
        && elapsed.as_secs_f64() < 600.0;
    println!(
        "[{}] criterion 4: train WER {errors_a}/{total_a} after {epochs_a} epochs (limit 200), \
         two same-seed runs byte-identical: {}, {elapsed:.1?} (limit 10min)",
        verdict(ok),
        outs_a == outs_b && json_a == json_b
    );
    assert!(ok, "errors {errors_a}/{errors_b}, epochs {epochs_a}, elapsed {elapsed:?}");
}

/// Deterministic stand-in decoder whose marks depend on the character's
/// position inside the window it sees, so overlapping windows genuinely
/// disagree and stitched output reveals which window owned each region.
struct PositionCycler;

impl SentenceDecoder for PositionCycler {
    fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
        Ok(lines
            .iter()
            .map(|line| {
                let mut out = String::new();
                for (i, c) in line.chars().enumerate() {
                    out.push(c);
                    if matches!(classify_char(c), CharClass::ArabicLetter) {
                        out.push(common::VOWEL_SLOT_MARKS[i % 7].ch());
                    }
                }
                out
            })
            .collect())
    }
}

/// A bare Arabic line of exactly `len` characters.
fn arabic_line(len: usize) -> String {
    let unit: Vec<char> = "كتب ".chars().collect();
    let line: String = (0..len).map(|i| unit[i % unit.len()]).collect();
    assert_eq!(line.chars().count(), len);
    line
}

/// What stitching must produce: each output region rendered from the window
/// that the stitch plan assigns it to.
fn expected_stitched(line: &str, cfg: &Windowing, dec: &impl SentenceDecoder) -> String {
    let chars: Vec<char> = line.chars().collect();
    let starts = window_starts(chars.len(), cfg.window, cfg.step);
    let ranges = stitch_ranges(&starts, chars.len(), cfg.window);
    let mut out = String::new();
    for (&s, r) in starts.iter().zip(ranges) {
        let end = (s + cfg.window).min(chars.len());
        let win_text: String = chars[s..end].iter().collect();
        let win_out = dec.diacritize_batch(std::slice::from_ref(&win_text)).expect("stub decodes");
        let seq = segment(&win_out[0]).expect("stub output segments");
        for slot in &seq.slots()[r.start - s..r.end - s] {
            out.push(slot.base);
            out.push_str(&slot.marks.to_string());
        }
    }
    out
}

#[test]
fn criterion_05_windowed_inference_matches_direct_and_pins_the_plan() {
    let dec = PositionCycler;
    let windowing = Windowing { window: 300, step: 100, policy: MismatchPolicy::Error };
    let mut failures = 0usize;

    // Short lines: windowed output must equal the direct decoder call bit
    // for bit. Lengths sweep 1..=300 with random fill.
    let mut rng = StdRng::seed_from_u64(61);
    let mut short_lines: Vec<String> = Vec::new();
    for len in [1usize, 2, 99, 100, 101, 299, 300] {
        short_lines.push(arabic_line(len));
    }
    for _ in 0..300 {
        let len = rng.gen_range(1..=300);
        let mut line: String = common::random_bare_sentence(&mut rng);
        while line.chars().count() < len {
            line.push(' ');
            line.push_str(&common::random_bare_sentence(&mut rng));
        }
        short_lines.push(line.chars().take(len).collect());
    }
    let direct = dec.diacritize_batch(&short_lines).expect("stub decodes");
    let (windowed, stats) =
        diacritize_lines(&dec, &short_lines, &windowing).expect("windowed decoding runs");
    for (d, w) in direct.iter().zip(&windowed) {
        if d != w {
            failures += 1;
        }
    }
    let short_ok = failures == 0 && stats.windowed_lines == 0 && stats.mismatched_windows == 0;

    // Long lines: the split and stitch plans are pinned exactly.
    let starts_350 = window_starts(350, 300, 100);
    let ranges_350 = stitch_ranges(&starts_350, 350, 300);
    let plan_350_ok = starts_350 == vec![0, 100] && ranges_350 == vec![0..200, 200..350];

    let starts_600 = window_starts(600, 300, 100);
    let ranges_600 = stitch_ranges(&starts_600, 600, 300);
    let plan_600_ok = starts_600 == vec![0, 100, 200, 300]
        && ranges_600 == vec![0..200, 200..300, 300..400, 400..600];

    // The stub must actually disagree across windows in the overlap, or the
    // ownership check below would be vacuous.
    let chars: Vec<char> = arabic_line(350).chars().collect();
    let w0: String = chars[0..300].iter().collect();
    let w1: String = chars[100..350].iter().collect();
    let outs = dec.diacritize_batch(&[w0, w1]).expect("stub decodes");
    let tail_of_w0: Vec<_> = segment(&outs[0]).unwrap().slots()[200..300].to_vec();
    let same_region_in_w1: Vec<_> = segment(&outs[1]).unwrap().slots()[100..200].to_vec();
    let windows_disagree = tail_of_w0 != same_region_in_w1;

    // End to end, every region must come from the window the plan assigns.
    let mut ownership_ok = true;
    for len in [350usize, 600] {
        let line = arabic_line(len);
        let (outs, stats) = diacritize_lines(&dec, std::slice::from_ref(&line), &windowing)
            .expect("windowed decoding runs");
        let expected = expected_stitched(&line, &windowing, &dec);
        if outs[0] != expected
            || strip_diacritics(&outs[0]).as_deref() != Ok(line.as_str())
            || stats.mismatched_windows != 0
            || stats.windows != if len == 350 { 2 } else { 4 }
        {
            ownership_ok = false;
        }
    }

    let ok = short_ok && plan_350_ok && plan_600_ok && windows_disagree && ownership_ok;
    println!(
        "[{}] criterion 5: windowed == direct on {} short lines ({failures} mismatches), \
         350-char plan {starts_350:?}/{ranges_350:?}, 600-char plan {starts_600:?}/{ranges_600:?}, \
         stitched regions owned per plan: {ownership_ok}",
        verdict(ok),
        short_lines.len()
    );
    assert!(
        ok,
        "short {short_ok}, plan350 {plan_350_ok}, plan600 {plan_600_ok}, \
         disagree {windows_disagree}, ownership {ownership_ok}"
    );
}

#[test]
fn criterion_06_constrained_decoding_preserves_every_input() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(20);
    let mut lines: Vec<String> = (0..1_000).map(|_| common::random_bare_sentence(&mut rng)).collect();
    // Probes off the generator's path: characters the vocabulary has never
    // seen, and a minimal one-letter line.
    lines.push("قQر سZم".to_string());
    lines.push("XYZW".to_string());
    lines.push("ب".to_string());

    let mark_bank: String = Mark::ALL.iter().map(|m| m.ch()).collect();
    let vocab = CharVocab::build(
        lines.iter().map(String::as_str).take(1_000).chain([mark_bank.as_str()]),
        &[DIAC_TAG],
    );
    let cfg = ModelConfig {
        vocab_size: vocab.len(),
        d_model: 16,
        ffn_dim: 32,
        n_heads: 2,
        enc_layers: 1,
        dec_layers: 1,
        dropout: 0.0,
        attn_dropout: 0.0,
        act_dropout: 0.0,
        max_positions: 64,
    };
    // Untrained weights: the guarantee must not depend on what the model
    // learned.
    let params: Params<f32> = Params::init(&cfg, 99);
    let decoder = ModelDecoder { params: &params, cfg: &cfg, vocab: &vocab, opts: DecodeOptions::default() };
    // MismatchPolicy::Error turns any constraint leak into a hard failure.
    let windowing = Windowing { window: 60, step: 30, policy: MismatchPolicy::Error };

    let (outs, _) = diacritize_lines(&decoder, &lines, &windowing).expect("decoding runs");
    let mut violations = 0usize;
    let mut marks_emitted = 0usize;
    for (line, out) in lines.iter().zip(&outs) {
        if strip_diacritics(out).as_deref() != Ok(line.as_str()) {
            violations += 1;
        }
        marks_emitted += out.chars().count() - line.chars().count();
    }
    let elapsed = start.elapsed();
    // A silent all-bare output would satisfy the invariant vacuously; the
    // random model must have actually placed marks somewhere.
    let ok = violations == 0 && marks_emitted > 0;
    println!(
        "[{}] criterion 6: strip(output) == input on {}/{} lines from an untrained model \
         ({marks_emitted} marks emitted) in {elapsed:.1?}",
        verdict(ok),
        lines.len() - violations,
        lines.len()
    );
    assert!(ok, "{violations} constraint violations, {marks_emitted} marks emitted");
}

#[test]
fn criterion_07_translation_streams_improve_context_homographs() {
    let start = Instant::now();
    let bench = generate(&SynthSpec::default());
    let data = prepare_mtl_data(&bench).expect("benchmark data prepares");
    let seeds = [11u64, 12, 13];
    let mut by_cond: Vec<Vec<f64>> = vec![Vec::new(); MtlCondition::ALL.len()];
    for &seed in &seeds {
        for (ci, cond) in MtlCondition::ALL.iter().enumerate() {
            let run = run_condition(&data, *cond, seed).expect("condition trains");
            eprintln!(
                "criterion 7: seed {seed} {:<12} test WER {:6.2}%",
                cond.label(),
                run.test_wer * 100.0
            );
            by_cond[ci].push(run.test_wer);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m: Vec<f64> = by_cond.iter().map(|v| mean(v)).collect();
    let both_wins_every_seed =
        by_cond[0].iter().zip(&by_cond[3]).filter(|(base, both)| both < base).count();

    let elapsed = start.elapsed();
    let ok = m[3] < m[0]
        && m[1] <= m[0]
        && m[2] <= m[0]
        && both_wins_every_seed == seeds.len()
        && elapsed.as_secs_f64() < 3_600.0;
    println!(
        "[{}] criterion 7: mean held-out WER baseline {:.2}% / +to-target {:.2}% / \
         +from-target {:.2}% / both {:.2}%; both < baseline in {both_wins_every_seed}/{} seeds; \
         {elapsed:.0?} (limit 1h)",
        verdict(ok),
        m[0] * 100.0,
        m[1] * 100.0,
        m[2] * 100.0,
        m[3] * 100.0,
        seeds.len()
    );
    assert!(ok, "means {m:?}, both wins {both_wins_every_seed}/3, elapsed {elapsed:?}");
}

#[test]
fn criterion_08_bucket_edges_multi_tag_counting_and_bias_formula() {
    // Every boundary of the eight frequency buckets, from both sides.
    let edges: &[(u64, usize)] = &[
        (0, 0),
        (1, 1),
        (2, 2),
        (3, 2),
        (4, 2),
        (5, 3),
        (16, 3),
        (17, 4),
        (64, 4),
        (65, 5),
        (256, 5),
        (257, 6),
        (1024, 6),
        (1025, 7),
        (100_000, 7),
    ];
    let bucket_ok = edges.iter().all(|&(count, bucket)| bucket_index(count) == bucket);

    // A token tagged with two categories counts once in each row.
    let refs = vec!["كَتَبَ يَدٌ".to_string()];
    let pred = vec!["كَتُبَ يَدٌ".to_string()];
    let ann = AnnotationSet::parse(
        "0\t0\tverb-perfect;noun-other\tnone\tnone\t0\n0\t1\tnoun-other\tnone\tnone\t0\n",
    )
    .expect("annotations parse");
    let pos = wer_by_pos(&pred, &refs, &ann, &EvalOptions::default()).expect("breakdown runs");
    let row = |cat: &str| pos.rows.iter().find(|r| r.category == cat).expect("category row");
    let multi_ok = row("verb-perfect").errors == 1
        && row("verb-perfect").total == 1
        && row("noun-other").errors == 1
        && row("noun-other").total == 2;

    // The published bias convention: (female - male) / male, reported as a
    // percentage. 5.34% and 6.39% component rates give 19.6(6)%.
    let bias_pct = bias_ratio(0.0534, 0.0639).expect("a nonzero male rate") * 100.0;
    let bias_formula_ok = (bias_pct - 19.6).abs() < 0.1;

    // End to end: one error in four male verb tokens against two in four
    // female ones must report a +100% bias.
    let g_refs = vec![
        "كَتَبَ يَدٌ صَفّ نَمْ".to_string(),
        "بابٌ سُوقٌ عِلْمٌ دَرْسٌ".to_string(),
    ];
    let g_pred = vec![
        "كَتُبَ يَدٌ صَفّ نَمْ".to_string(),
        "بابُ سُوقَ عِلْمٌ دَرْسٌ".to_string(),
    ];
    let mut g_tsv = String::new();
    for ti in 0..4 {
        g_tsv.push_str(&format!("0\t{ti}\tverb-perfect\tmale\tverb\t0\n"));
        g_tsv.push_str(&format!("1\t{ti}\tverb-perfect\tfemale\tverb\t0\n"));
    }
    let g_ann = AnnotationSet::parse(&g_tsv).expect("annotations parse");
    let gender =
        wer_by_gender(&g_pred, &g_refs, &g_ann, &EvalOptions::default()).expect("breakdown runs");
    let g_row = gender
        .rows
        .iter()
        .find(|r| r.male.is_some() && r.female.is_some())
        .expect("a populated gender row");
    let male = g_row.male.as_ref().expect("male cell");
    let female = g_row.female.as_ref().expect("female cell");
    let gender_ok = (male.errors, male.total) == (1, 4)
        && (female.errors, female.total) == (2, 4)
        && g_row.bias.is_some_and(|b| (b - 1.0).abs() < 1e-12);

    let ok = bucket_ok && multi_ok && bias_formula_ok && gender_ok;
    println!(
        "[{}] criterion 8: bucket edges exact, double-tagged token counted in both rows, \
         bias({:.2}%, {:.2}%) = {bias_pct:.2}% (target 19.6 within 0.1), planted gender bias \
         reported as {:+.0}%",
        verdict(ok),
        5.34,
        6.39,
        g_row.bias.unwrap_or(f64::NAN) * 100.0
    );
    assert!(
        ok,
        "buckets {bucket_ok}, multi-tag {multi_ok}, bias formula {bias_formula_ok}, \
         gender {gender_ok}"
    );
}

#[test]
fn criterion_09_breakdowns_resum_to_overall_counts() {
    let mut rng = StdRng::seed_from_u64(31);
    let opts = EvalOptions::default();
    let n_fixtures = 50;
    let mut failures = 0usize;
    let mut checked_totals = 0u64;
    for i in 0..n_fixtures {
        let n_lines = rng.gen_range(2..=6);
        let mut fx = common::plant_fixture(&mut rng, n_lines);
        if i == 0 {
            // Degenerate case: a perfect prediction must conserve too.
            fx.pred = fx.refs.clone();
        }
        let overall = eval::wer(&fx.pred, &fx.refs, &opts).expect("fixtures score");
        checked_totals += overall.total;

        // Training counts taken from the reference lines themselves, so the
        // tokens spread over several buckets.
        let train =
            DiacritizedCorpus::from_lines(fx.refs.iter().map(String::as_str), LinePolicy::Fail)
                .expect("fixture lines load");
        let freqs = freq_table(&train);
        let buckets =
            wer_by_bucket(&fx.pred, &fx.refs, &freqs, &opts).expect("bucket breakdown runs");
        let bucket_errors: u64 = buckets.rows.iter().map(|r| r.errors).sum();
        let bucket_total: u64 = buckets.rows.iter().map(|r| r.total).sum();

        let curve = wer_by_length(&fx.pred, &fx.refs, 10, &opts).expect("length breakdown runs");
        let length_errors: u64 = curve.rows.iter().map(|r| r.errors).sum();
        let length_total: u64 = curve.rows.iter().map(|r| r.total).sum();
        let length_lines: u64 = curve.rows.iter().map(|r| r.lines).sum();

        if (bucket_errors, bucket_total) != (overall.errors, overall.total)
            || (length_errors, length_total) != (overall.errors, overall.total)
            || length_lines != fx.refs.len() as u64
        {
            failures += 1;
        }
    }
    let ok = failures == 0 && checked_totals > 0;
    println!(
        "[{}] criterion 9: bucket and length rows re-sum to the overall counts on \
         {n_fixtures} fixtures ({checked_totals} scored tokens), {failures} violations",
        verdict(ok)
    );
    assert!(ok, "{failures} conservation violations");
}

#[test]
fn criterion_10_checkpoints_reload_to_bit_identical_forward_passes() {
    let cfg = ModelConfig {
        vocab_size: 48,
        d_model: 16,
        ffn_dim: 24,
        n_heads: 2,
        enc_layers: 2,
        dec_layers: 1,
        dropout: 0.0,
        attn_dropout: 0.0,
        act_dropout: 0.0,
        max_positions: 20,
    };
    let params: Params<f32> = Params::init(&cfg, 123);
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("model.ckpt");
    let meta = CheckpointMeta {
        config: cfg.clone(),
        vocab_sha256: "0f".repeat(32),
        epoch: 7,
        dev_wer: Some(0.25),
        tensors: Vec::new(),
    };
    checkpoint::save(&path, &params, meta).expect("checkpoint saves");
    let (loaded, loaded_meta) = checkpoint::load(&path).expect("checkpoint loads");
    let meta_ok = loaded_meta.config == cfg
        && loaded_meta.vocab_sha256 == "0f".repeat(32)
        && loaded_meta.epoch == 7
        && loaded_meta.dev_wer == Some(0.25)
        && !loaded_meta.tensors.is_empty();

    let mut rng = StdRng::seed_from_u64(5);
    let mut mismatched_inputs = 0usize;
    let n_inputs = 100;
    for _ in 0..n_inputs {
        let b = rng.gen_range(1..=3);
        let src_len = rng.gen_range(2..=8);
        let tgt_len = rng.gen_range(2..=6);
        let row_lens: Vec<usize> = (0..b).map(|_| rng.gen_range(1..=src_len)).collect();
        let src = Array2::from_shape_fn((b, src_len), |(r, c)| {
            if c < row_lens[r] {
                rng.gen_range(4..48u32)
            } else {
                PAD
            }
        });
        let dec = Array2::from_shape_fn((b, tgt_len), |(_, c)| {
            if c == 0 {
                BOS
            } else {
                rng.gen_range(4..48u32)
            }
        });
        let (before, _) = forward_train(&params, &cfg, &src, &dec, None);
        let (after, _) = forward_train(&loaded, &cfg, &src, &dec, None);
        let identical = before.len() == after.len()
            && before.iter().zip(after.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
        if !identical {
            mismatched_inputs += 1;
        }
    }
    let ok = meta_ok && mismatched_inputs == 0;
    println!(
        "[{}] criterion 10: save/load round trip, forward logits bit-identical on \
         {}/{n_inputs} random inputs, metadata intact: {meta_ok}",
        verdict(ok),
        n_inputs - mismatched_inputs
    );
    assert!(ok, "meta {meta_ok}, {mismatched_inputs} mismatched inputs");
}
