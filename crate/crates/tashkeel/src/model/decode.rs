//! Batched decoding with an incremental key/value cache.
//!
//! The incremental step reuses the exact forward primitives (same matrix
//! shapes along the reduction axis, same masks underflowing to exact
//! zeros), so cached decoding is bit-identical to re-running the full
//! forward pass per step; a test pins that equality. Ties in the argmax,
//! vanishingly rare with real weights but routine in degenerate tests, go
//! to the lowest id.
//!
//! Constrained diacritization never emits free text: at every step the
//! candidate set is {next source character} plus {marks that keep the
//! current slot valid} plus {end, once the source is exhausted}, and the
//! output string is rebuilt from the true source characters, so stripping
//! the output always returns the input, unknown characters included.

use ndarray::{s, Array2, Array3};

use super::net::{embed, encode, ffn, key_pad_mask, layer_norm, linear3};
use super::params::{s as sc, Params, Scalar};
use super::ModelConfig;
use crate::data::{CharVocab, DIAC_TAG, BOS, EOS, PAD, UNK};
use crate::text::{classify_char_with, CharClass, Mark, SegmentOptions, Slot, TATWEEL};
use crate::window::SentenceDecoder;

/// Per-layer cached keys and values for incremental decoding.
#[derive(Clone)]
pub struct KvState<F> {
    self_k: Vec<Array3<F>>,
    self_v: Vec<Array3<F>>,
    cross_k: Vec<Array3<F>>,
    cross_v: Vec<Array3<F>>,
    cross_mask: Array3<F>,
    /// Additive mask over fed positions: NEG where a fed token was padding,
    /// mirroring the full forward's causal-plus-padding mask.
    self_mask: Array2<F>,
    t: usize,
    cap: usize,
}

impl<F: Scalar> KvState<F> {
    /// Precompute the cross-attention keys/values from the encoder output
    /// and reserve self-attention space for `cap` steps.
    pub fn new(
        p: &Params<F>,
        cfg: &ModelConfig,
        enc_out: &Array3<F>,
        src_ids: &Array2<u32>,
        cap: usize,
    ) -> KvState<F> {
        let (b, _, d) = enc_out.dim();
        let mut self_k = Vec::with_capacity(cfg.dec_layers);
        let mut self_v = Vec::with_capacity(cfg.dec_layers);
        let mut cross_k = Vec::with_capacity(cfg.dec_layers);
        let mut cross_v = Vec::with_capacity(cfg.dec_layers);
        for l in &p.dec {
            self_k.push(Array3::zeros((b, cap, d)));
            self_v.push(Array3::zeros((b, cap, d)));
            cross_k.push(linear3(enc_out, &l.cross_attn.wk, &l.cross_attn.bk));
            cross_v.push(linear3(enc_out, &l.cross_attn.wv, &l.cross_attn.bv));
        }
        KvState {
            self_k,
            self_v,
            cross_k,
            cross_v,
            cross_mask: key_pad_mask(src_ids, 1),
            self_mask: Array2::zeros((b, cap)),
            t: 0,
            cap,
        }
    }

    /// Steps taken so far.
    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }
}

/// Advance one position: feed the previous tokens (batch, 1) and get logits
/// (batch, vocab) for the next. Panics if the cache capacity is exhausted.
pub fn decoder_step<F: Scalar>(
    p: &Params<F>,
    cfg: &ModelConfig,
    st: &mut KvState<F>,
    last_ids: &Array2<u32>,
) -> Array2<F> {
    assert!(st.t < st.cap, "decode cache capacity exhausted");
    let b = last_ids.nrows();
    let d = cfg.d_model;
    let h = cfg.n_heads;
    let dh = d / h;
    let scale: F = sc(1.0 / (dh as f64).sqrt());

    for bi in 0..b {
        if last_ids[[bi, 0]] == PAD {
            st.self_mask[[bi, st.t]] = sc(-1e30);
        }
    }
    let mut x = embed(&p.embedding, last_ids, st.t);
    for (li, l) in p.dec.iter().enumerate() {
        // Self-attention over everything cached plus the new position.
        let (ln1, _) = layer_norm(&x, &l.ln1);
        let q = linear3(&ln1, &l.self_attn.wq, &l.self_attn.bq);
        let kn = linear3(&ln1, &l.self_attn.wk, &l.self_attn.bk);
        let vn = linear3(&ln1, &l.self_attn.wv, &l.self_attn.bv);
        st.self_k[li].slice_mut(s![.., st.t, ..]).assign(&kn.slice(s![.., 0, ..]));
        st.self_v[li].slice_mut(s![.., st.t, ..]).assign(&vn.slice(s![.., 0, ..]));

        let mut ctx = Array3::zeros((b, 1, d));
        for bi in 0..b {
            for hi in 0..h {
                let cols = hi * dh..(hi + 1) * dh;
                let qh = q.slice(s![bi, .., cols.clone()]);
                let kh = st.self_k[li].slice(s![bi, ..=st.t, cols.clone()]);
                let vh = st.self_v[li].slice(s![bi, ..=st.t, cols.clone()]);
                let mut scores = qh.dot(&kh.t());
                scores.mapv_inplace(|v| v * scale);
                scores += &st.self_mask.slice(s![bi..bi + 1, ..=st.t]);
                softmax_row(&mut scores);
                let ch = scores.dot(&vh);
                ctx.slice_mut(s![bi, .., cols]).assign(&ch);
            }
        }
        x += &linear3(&ctx, &l.self_attn.wo, &l.self_attn.bo);

        // Cross-attention against the precomputed encoder projections.
        let (ln2, _) = layer_norm(&x, &l.ln2);
        let q2 = linear3(&ln2, &l.cross_attn.wq, &l.cross_attn.bq);
        let mut ctx2 = Array3::zeros((b, 1, d));
        for bi in 0..b {
            for hi in 0..h {
                let cols = hi * dh..(hi + 1) * dh;
                let qh = q2.slice(s![bi, .., cols.clone()]);
                let kh = st.cross_k[li].slice(s![bi, .., cols.clone()]);
                let vh = st.cross_v[li].slice(s![bi, .., cols.clone()]);
                let mut scores = qh.dot(&kh.t());
                scores.mapv_inplace(|v| v * scale);
                scores += &st.cross_mask.slice(s![bi, .., ..]);
                softmax_row(&mut scores);
                let ch = scores.dot(&vh);
                ctx2.slice_mut(s![bi, .., cols]).assign(&ch);
            }
        }
        x += &linear3(&ctx2, &l.cross_attn.wo, &l.cross_attn.bo);

        let (ln3, _) = layer_norm(&x, &l.ln3);
        let (f, _) = ffn(&l.ffn, &ln3, 0.0, None);
        x += &f;
    }
    let (out, _) = layer_norm(&x, &p.dec_ln);
    st.t += 1;
    out.index_axis(ndarray::Axis(1), 0).dot(&p.embedding.t())
}

fn softmax_row<F: Scalar>(x: &mut Array2<F>) {
    for mut row in x.rows_mut() {
        let mut m = row[0];
        for &v in row.iter() {
            if v > m {
                m = v;
            }
        }
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// Right-pad id sequences into a (batch, max_len) matrix of ids.
pub fn pad_sources(sources: &[Vec<u32>]) -> Array2<u32> {
    let b = sources.len();
    let s = sources.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Array2::from_elem((b, s), PAD);
    for (bi, src) in sources.iter().enumerate() {
        for (si, &id) in src.iter().enumerate() {
            out[[bi, si]] = id;
        }
    }
    out
}

fn argmax_lowest<F: Scalar>(row: ndarray::ArrayView1<'_, F>) -> u32 {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}

/// Batched greedy decoding over the full vocabulary. Returns output ids
/// without `BOS`/`EOS`. Generation stops at `EOS` or after `max_len` steps.
pub fn greedy_decode_ids<F: Scalar>(
    p: &Params<F>,
    cfg: &ModelConfig,
    sources: &[Vec<u32>],
    max_len: usize,
) -> Vec<Vec<u32>> {
    if sources.is_empty() {
        return Vec::new();
    }
    let b = sources.len();
    let src = pad_sources(sources);
    let enc = encode(p, cfg, &src);
    let mut st = KvState::new(p, cfg, &enc, &src, max_len);
    let mut last = Array2::from_elem((b, 1), BOS);
    let mut done = vec![false; b];
    let mut outs = vec![Vec::new(); b];
    for _ in 0..max_len {
        let logits = decoder_step(p, cfg, &mut st, &last);
        for bi in 0..b {
            if done[bi] {
                last[[bi, 0]] = EOS;
                continue;
            }
            let choice = argmax_lowest(logits.row(bi));
            if choice == EOS {
                done[bi] = true;
            } else {
                outs[bi].push(choice);
            }
            last[[bi, 0]] = choice;
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    outs
}

/// What a constrained decoder may do next for one example.
enum Action {
    AdvanceBase,
    AddMark(Mark),
    Finish,
}

struct ConstraintState {
    chars: Vec<char>,
    pos: usize,
    out: Vec<Slot>,
    done: bool,
}

impl ConstraintState {
    fn new(line: &str) -> ConstraintState {
        ConstraintState { chars: line.chars().collect(), pos: 0, out: Vec::new(), done: false }
    }

    /// Candidate ids in ascending order (a BTreeMap), each mapped to its
    /// action. If two actions collide on one id (possible only through
    /// `UNK`), the base advance wins: it was inserted first.
    fn candidates(
        &self,
        vocab: &CharVocab,
        seg_opts: &SegmentOptions,
    ) -> std::collections::BTreeMap<u32, Action> {
        let mut c = std::collections::BTreeMap::new();
        if self.pos < self.chars.len() {
            c.entry(vocab.char_id(self.chars[self.pos])).or_insert(Action::AdvanceBase);
        } else {
            c.entry(EOS).or_insert(Action::Finish);
        }
        if let Some(slot) = self.out.last() {
            let can_carry = slot.base != TATWEEL
                && matches!(classify_char_with(slot.base, seg_opts), CharClass::ArabicLetter);
            if can_carry {
                for &m in seg_opts.inventory() {
                    let mut tmp = slot.marks;
                    if !tmp.insert(m) || !tmp.is_valid() {
                        continue;
                    }
                    let id = vocab.char_id(m.ch());
                    if id == UNK {
                        continue;
                    }
                    c.entry(id).or_insert(Action::AddMark(m));
                }
            }
        }
        c
    }

    fn apply(&mut self, action: &Action) {
        match action {
            Action::AdvanceBase => {
                self.out.push(Slot::bare(self.chars[self.pos]));
                self.pos += 1;
            }
            Action::AddMark(m) => {
                let slot = self.out.last_mut().expect("marks require a base");
                let inserted = slot.marks.insert(*m);
                debug_assert!(inserted && slot.marks.is_valid());
            }
            Action::Finish => self.done = true,
        }
    }

    /// Render from the true characters plus chosen marks, in canonical
    /// order. Never fails, whatever the input contained.
    fn render(&self) -> String {
        let mut s = String::new();
        for slot in &self.out {
            s.push(slot.base);
            for m in slot.marks.iter() {
                s.push(m.ch());
            }
        }
        s
    }
}

/// Constrained diacritization of a batch of undiacritized lines: the model
/// chooses, per step, between copying the next source character, adding a
/// valid mark to the current slot, or finishing. `strip(output) == input`
/// holds by construction.
pub fn constrained_diacritize_batch<F: Scalar>(
    p: &Params<F>,
    cfg: &ModelConfig,
    vocab: &CharVocab,
    tag_id: u32,
    lines: &[String],
    seg_opts: &SegmentOptions,
    max_len: usize,
) -> Vec<String> {
    if lines.is_empty() {
        return Vec::new();
    }
    let b = lines.len();
    let sources: Vec<Vec<u32>> = lines
        .iter()
        .map(|l| {
            let mut ids = vec![tag_id];
            ids.extend(vocab.encode_text(l));
            ids
        })
        .collect();
    let src = pad_sources(&sources);
    let enc = encode(p, cfg, &src);
    let mut st = KvState::new(p, cfg, &enc, &src, max_len);
    let mut states: Vec<ConstraintState> = lines.iter().map(|l| ConstraintState::new(l)).collect();
    let mut last = Array2::from_elem((b, 1), BOS);
    for _ in 0..max_len {
        if states.iter().all(|s| s.done) {
            break;
        }
        let logits = decoder_step(p, cfg, &mut st, &last);
        for (bi, state) in states.iter_mut().enumerate() {
            if state.done {
                last[[bi, 0]] = EOS;
                continue;
            }
            let cands = state.candidates(vocab, seg_opts);
            let row = logits.row(bi);
            // Strictly-greater scan in ascending id order: ties go to the
            // lowest candidate id.
            let mut best: Option<(u32, &Action)> = None;
            for (&id, action) in &cands {
                let better = match best {
                    None => true,
                    Some((bid, _)) => row[id as usize] > row[bid as usize],
                };
                if better {
                    best = Some((id, action));
                }
            }
            let (id, action) = best.expect("candidate set is never empty");
            state.apply(action);
            last[[bi, 0]] = if state.done { EOS } else { id };
        }
    }
    states.iter().map(|s| s.render()).collect()
}

/// Beam search for one source, over the full vocabulary. No length
/// normalization: hypotheses compare by summed log-probability. Returns the
/// best finished hypothesis, or the best live one if nothing finished
/// within `max_len` steps. `width` 1 reproduces greedy decoding.
pub fn beam_decode_ids<F: Scalar>(
    p: &Params<F>,
    cfg: &ModelConfig,
    source: &[u32],
    width: usize,
    max_len: usize,
) -> Vec<u32> {
    assert!(width >= 1, "beam width must be positive");
    let src = pad_sources(&[source.to_vec()]);
    let enc = encode(p, cfg, &src);

    struct Beam<F> {
        st: KvState<F>,
        last: u32,
        logp: f64,
        seq: Vec<u32>,
        done: bool,
    }
    let mut beams = vec![Beam {
        st: KvState::new(p, cfg, &enc, &src, max_len),
        last: BOS,
        logp: 0.0,
        seq: Vec::new(),
        done: false,
    }];

    for _ in 0..max_len {
        if beams.iter().all(|b| b.done) {
            break;
        }
        let mut cands: Vec<Beam<F>> = Vec::new();
        for beam in beams {
            if beam.done {
                cands.push(beam);
                continue;
            }
            let mut st = beam.st;
            let logits = decoder_step(p, cfg, &mut st, &Array2::from_elem((1, 1), beam.last));
            let row = logits.row(0);
            // Log-softmax of the row.
            let mut m = row[0];
            for &v in row.iter() {
                if v > m {
                    m = v;
                }
            }
            let mut sum = F::zero();
            for &v in row.iter() {
                sum = sum + (v - m).exp();
            }
            let lse = m + sum.ln();
            // Top `width` expansions of this beam suffice: the global top
            // `width` cannot contain more from a single parent.
            let mut scored: Vec<(u32, f64)> = row
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as u32, (v - lse).to_f64().unwrap()))
                .collect();
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for &(id, lp) in scored.iter().take(width) {
                let mut seq = beam.seq.clone();
                let done = id == EOS;
                if !done {
                    seq.push(id);
                }
                cands.push(Beam { st: st.clone(), last: id, logp: beam.logp + lp, seq, done });
            }
        }
        cands.sort_by(|a, b| b.logp.partial_cmp(&a.logp).unwrap());
        cands.truncate(width);
        beams = cands;
    }
    beams
        .iter()
        .filter(|b| b.done)
        .chain(beams.iter())
        .max_by(|a, b| {
            let fin = a.done.cmp(&b.done);
            fin.then(a.logp.partial_cmp(&b.logp).unwrap_or(std::cmp::Ordering::Equal))
        })
        .map(|b| b.seq.clone())
        .unwrap_or_default()
}

/// Unconstrained greedy translation: tag each line, decode, map ids back to
/// text (control symbols dropped).
pub fn translate_batch<F: Scalar>(
    p: &Params<F>,
    cfg: &ModelConfig,
    vocab: &CharVocab,
    tag: &str,
    lines: &[String],
    max_len: usize,
) -> anyhow::Result<Vec<String>> {
    let tag_id =
        vocab.id(tag).ok_or_else(|| anyhow::anyhow!("vocabulary has no task tag {tag}"))?;
    let sources: Vec<Vec<u32>> = lines
        .iter()
        .map(|l| {
            let mut ids = vec![tag_id];
            ids.extend(vocab.encode_text(l));
            ids
        })
        .collect();
    let outs = greedy_decode_ids(p, cfg, &sources, max_len);
    Ok(outs.iter().map(|ids| vocab.decode_to_string(ids)).collect())
}

/// How [`ModelDecoder`] decodes.
#[derive(Debug, Clone)]
pub struct DecodeOptions {
    /// Restrict outputs to marked copies of the input (the default). When
    /// off, the model writes freely and windowing repairs mismatches.
    pub constrained: bool,
    /// Lines decoded per forward batch.
    pub batch_lines: usize,
    /// Decode step budget as a multiple of the input length (plus a small
    /// constant), covering one base plus up to three marks per character.
    pub max_output_factor: usize,
    /// Treat the superscript alef as a ninth mark.
    pub superscript_alef_is_mark: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            constrained: true,
            batch_lines: 16,
            max_output_factor: 4,
            superscript_alef_is_mark: false,
        }
    }
}

/// A trained model plus vocabulary, ready to diacritize short lines. Drive
/// it through [`crate::window::diacritize_lines`] for unbounded input.
pub struct ModelDecoder<'a> {
    pub params: &'a Params<f32>,
    pub cfg: &'a ModelConfig,
    pub vocab: &'a CharVocab,
    pub opts: DecodeOptions,
}

impl SentenceDecoder for ModelDecoder<'_> {
    fn diacritize_batch(&self, lines: &[String]) -> anyhow::Result<Vec<String>> {
        let tag_id = self
            .vocab
            .id(DIAC_TAG)
            .ok_or_else(|| anyhow::anyhow!("vocabulary has no {DIAC_TAG} tag"))?;
        for l in lines {
            let n = l.chars().count();
            anyhow::ensure!(
                n + 1 <= self.cfg.max_positions,
                "line of {n} chars exceeds the model's {} positions; window it first",
                self.cfg.max_positions
            );
        }
        let seg_opts =
            SegmentOptions { superscript_alef_is_mark: self.opts.superscript_alef_is_mark };
        let mut out = Vec::with_capacity(lines.len());
        for chunk in lines.chunks(self.opts.batch_lines.max(1)) {
            let longest = chunk.iter().map(|l| l.chars().count()).max().unwrap_or(0);
            let max_len = self.opts.max_output_factor * longest + 8;
            if self.opts.constrained {
                out.extend(constrained_diacritize_batch(
                    self.params,
                    self.cfg,
                    self.vocab,
                    tag_id,
                    chunk,
                    &seg_opts,
                    max_len,
                ));
            } else {
                let sources: Vec<Vec<u32>> = chunk
                    .iter()
                    .map(|l| {
                        let mut ids = vec![tag_id];
                        ids.extend(self.vocab.encode_text(l));
                        ids
                    })
                    .collect();
                let ids = greedy_decode_ids(self.params, self.cfg, &sources, max_len);
                out.extend(ids.iter().map(|seq| self.vocab.decode_to_string(seq)));
            }
        }
        Ok(out)
    }
}
