//! Trains the four synthetic-benchmark conditions over a few seeds and
//! reports held-out WER per condition. Homographs in the benchmark can only
//! be resolved from a context word, and held-out context words appear solely
//! in the translation streams, so the gap between the baseline and the
//! multitask rows measures cross-task transfer.
//!
//! Usage: synthetic_mtl [SEED ...]   (defaults to 11 12 13)

use tashkeel::synth::{generate, prepare_mtl_data, run_condition, MtlCondition, SynthSpec};

fn main() -> anyhow::Result<()> {
    let seeds: Vec<u64> = {
        let given: Vec<u64> =
            std::env::args().skip(1).map(|a| a.parse().expect("seeds are integers")).collect();
        if given.is_empty() {
            vec![11, 12, 13]
        } else {
            given
        }
    };

    let spec = SynthSpec::default();
    let bench = generate(&spec);
    println!(
        "benchmark: {} train / {} dev / {} test lines, {} bitext pairs, {} homographs",
        bench.train.len(),
        bench.dev.len(),
        bench.test.len(),
        bench.bitext.len(),
        bench.homographs.len()
    );
    let data = prepare_mtl_data(&bench)?;
    println!("vocabulary: {} symbols", data.vocab.len());

    let mut means = Vec::new();
    for condition in MtlCondition::ALL {
        let mut rates = Vec::new();
        for &seed in &seeds {
            let t0 = std::time::Instant::now();
            let run = run_condition(&data, condition, seed)?;
            println!(
                "{:<12} seed {:<3} test WER {:6.2}%  (best epoch {}, dev WER {:.2}%, {:.0?})",
                condition.label(),
                seed,
                100.0 * run.test_wer,
                run.report.best_epoch,
                100.0 * run.report.best_dev_wer,
                t0.elapsed()
            );
            rates.push(run.test_wer);
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        means.push((condition, mean));
    }

    println!("\nmean held-out WER over {} seeds", seeds.len());
    for (condition, mean) in &means {
        println!("  {:<12} {:6.2}%", condition.label(), 100.0 * mean);
    }
    Ok(())
}
