//! The training loop: epochs of Adam over char-budget batches, with the best
//! checkpoint chosen by decoding the dev corpus after every epoch.
//!
//! Everything stochastic (parameter init, dropout, per-epoch example order)
//! flows from one seed, so two runs with the same seed produce identical
//! parameters. Dev decoding uses the same windowed, constrained path as
//! inference, so the selection signal is the metric that matters.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DiacritizedCorpus;
use crate::data::{make_batches, CharVocab, Example, BOS, EOS, PAD};
use crate::eval::{wer, EvalOptions};
use crate::model::loss::label_smoothed_ce;
use crate::model::net::{backward, forward_train};
use crate::model::opt::{lr_at, Adam};
use crate::model::{DecodeOptions, ModelConfig, ModelDecoder, Params};
use crate::window::{diacritize_lines, Windowing};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Batch size cap, in summed per-example costs (max of source and target
    /// lengths).
    pub char_budget: usize,
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub label_smoothing: f64,
    pub seed: u64,
    /// Stop as soon as an epoch reaches dev WER 0. Off by default: later
    /// epochs can matter when the dev set is a weak proxy.
    #[serde(default)]
    pub stop_at_zero_dev_wer: bool,
}

impl TrainConfig {
    /// Small-corpus settings for tests and desk experiments.
    pub fn desk() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            char_budget: 4_000,
            peak_lr: 3e-3,
            warmup_steps: 100,
            label_smoothing: 0.1,
            seed: 0,
            stop_at_zero_dev_wer: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no training examples")]
    NoExamples,
    #[error("no dev lines")]
    NoDev,
    #[error("loss became non-finite in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("dev evaluation: {0}")]
    Dev(#[from] anyhow::Error),
}

/// Per-epoch progress record.
#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub batches: usize,
    pub mean_loss: f64,
    /// Learning rate after the epoch's last step.
    pub lr: f64,
    pub dev_wer: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose weights were kept (minimum dev WER, earliest on
    /// ties).
    pub best_epoch: usize,
    pub best_dev_wer: f64,
    pub steps: u64,
}

/// Outcome of a run: the selected weights plus the full progress record.
pub struct Trained {
    pub params: Params<f32>,
    pub report: TrainReport,
}

/// Pad a batch of examples into source, decoder-input, and label id grids.
/// Decoder input is BOS followed by the target; labels are the target
/// followed by EOS; PAD fills the tails and is ignored by the loss.
pub fn pad_batch(examples: &[Example], indices: &[usize]) -> (Array2<u32>, Array2<u32>, Array2<u32>) {
    let b = indices.len();
    let src_len = indices.iter().map(|&i| examples[i].src.len()).max().unwrap_or(1);
    let tgt_len = indices.iter().map(|&i| examples[i].tgt.len()).max().unwrap_or(0) + 1;
    let mut src = Array2::from_elem((b, src_len), PAD);
    let mut dec_in = Array2::from_elem((b, tgt_len), PAD);
    let mut labels = Array2::from_elem((b, tgt_len), PAD);
    for (row, &i) in indices.iter().enumerate() {
        let ex = &examples[i];
        for (col, &id) in ex.src.iter().enumerate() {
            src[[row, col]] = id;
        }
        dec_in[[row, 0]] = BOS;
        for (col, &id) in ex.tgt.iter().enumerate() {
            dec_in[[row, col + 1]] = id;
            labels[[row, col]] = id;
        }
        labels[[row, ex.tgt.len()]] = EOS;
    }
    (src, dec_in, labels)
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(epoch as u64).to_le_bytes());
    key[16] = 0x5e;
    ChaCha20Rng::from_seed(key)
}

/// Decode the dev corpus with the current weights and score it.
fn dev_wer(
    params: &Params<f32>,
    cfg: &ModelConfig,
    vocab: &CharVocab,
    dev: &DiacritizedCorpus,
    opts: &DecodeOptions,
) -> Result<f64, TrainError> {
    let stripped: Vec<String> = dev.lines().iter().map(|l| l.bases()).collect();
    let rendered: Vec<String> = dev.lines().iter().map(|l| l.render()).collect();
    let decoder = ModelDecoder {
        params,
        cfg,
        vocab,
        opts: opts.clone(),
    };
    let (outs, _) = diacritize_lines(&decoder, &stripped, &Windowing::default())?;
    let report = wer(&outs, &rendered, &EvalOptions::default()).map_err(anyhow::Error::from)?;
    Ok(report.rate)
}

/// Run the full recipe and return the best-dev-WER weights.
pub fn train(
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    examples: &[Example],
    dev: &DiacritizedCorpus,
    vocab: &CharVocab,
    decode_opts: &DecodeOptions,
) -> Result<Trained, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    if dev.lines().is_empty() {
        return Err(TrainError::NoDev);
    }
    let mut params = Params::<f32>::init(cfg, tcfg.seed);
    let mut adam = Adam::new(&params);
    let mut dropout_rng = epoch_rng(tcfg.seed, usize::MAX);
    let mut best: Option<(f64, usize, Params<f32>)> = None;
    let mut epochs = Vec::new();

    for epoch in 1..=tcfg.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut epoch_rng(tcfg.seed, epoch));
        let shuffled: Vec<Example> = order.iter().map(|&i| examples[i].clone()).collect();
        let batches = make_batches(&shuffled, tcfg.char_budget);

        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let (src, dec_in, labels) = pad_batch(&shuffled, &batch.indices);
            let (logits, cache) =
                forward_train(&params, cfg, &src, &dec_in, Some(&mut dropout_rng));
            let (loss, dlogits) = label_smoothed_ce(&logits, &labels, tcfg.label_smoothing);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: bi });
            }
            loss_sum += f64::from(loss);
            let grads = backward(&params, cfg, &cache, &dlogits);
            lr = lr_at(adam.steps() + 1, tcfg.peak_lr, tcfg.warmup_steps);
            adam.step(&mut params, &grads, lr);
        }

        let epoch_wer = dev_wer(&params, cfg, vocab, dev, decode_opts)?;
        let keep = match &best {
            None => true,
            Some((w, _, _)) => epoch_wer < *w,
        };
        if keep {
            best = Some((epoch_wer, epoch, params.clone()));
        }
        epochs.push(EpochStats {
            epoch,
            batches: batches.len(),
            mean_loss: loss_sum / batches.len().max(1) as f64,
            lr,
            dev_wer: epoch_wer,
        });
        if tcfg.stop_at_zero_dev_wer && epoch_wer == 0.0 {
            break;
        }
    }

    let (best_dev_wer, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(Trained {
        params,
        report: TrainReport {
            epochs,
            best_epoch,
            best_dev_wer,
            steps: adam.steps(),
        },
    })
}
