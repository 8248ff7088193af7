//! Forward and backward passes, written out by hand over `ndarray`.
//!
//! The backward pass mirrors the forward pass exactly; its correctness
//! oracle is a central finite-difference check over every parameter of a
//! small f64 model (see the tests). Padding needs no special casing in the
//! backward pass: padded keys get exactly zero attention weight (the
//! additive mask underflows the softmax), and padded label positions get
//! zero loss gradient, so no gradient flows anywhere a pad could matter.

use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::params::{s as sc, AttnP, FfnP, LayerNormP, Params, Scalar};
use super::ModelConfig;
use crate::data::PAD;

const LN_EPS: f64 = 1e-5;
/// Additive mask value: finite, but far enough down that softmax underflows
/// to exactly zero.
const NEG: f64 = -1e30;

/// Sinusoidal position table for `len` positions, computed on demand so any
/// length works.
pub fn positional<F: Scalar>(len: usize, d: usize) -> Array2<F> {
    let mut pe = Array2::zeros((len, d));
    for pos in 0..len {
        for i in 0..d / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            pe[[pos, 2 * i]] = sc(angle.sin());
            pe[[pos, 2 * i + 1]] = sc(angle.cos());
        }
    }
    pe
}

/// Scaled embedding lookup plus positions: `E[id] * sqrt(d) + pos`, starting
/// at position `pos_offset` (nonzero during incremental decoding).
pub fn embed<F: Scalar>(emb: &Array2<F>, ids: &Array2<u32>, pos_offset: usize) -> Array3<F> {
    let (b, l) = ids.dim();
    let d = emb.ncols();
    let scale: F = sc((d as f64).sqrt());
    let pe = positional::<F>(pos_offset + l, d);
    let mut x = Array3::zeros((b, l, d));
    for bi in 0..b {
        for li in 0..l {
            let row = emb.row(ids[[bi, li]] as usize);
            let mut dst = x.slice_mut(s![bi, li, ..]);
            dst.assign(&row);
            dst.mapv_inplace(|v| v * scale);
            dst += &pe.row(pos_offset + li);
        }
    }
    x
}

fn embed_bwd<F: Scalar>(demb: &mut Array2<F>, ids: &Array2<u32>, dx: &Array3<F>) {
    let (b, l) = ids.dim();
    let scale: F = sc((demb.ncols() as f64).sqrt());
    for bi in 0..b {
        for li in 0..l {
            let mut row = demb.row_mut(ids[[bi, li]] as usize);
            row.scaled_add(scale, &dx.slice(s![bi, li, ..]));
        }
    }
}

fn as2<F: Scalar>(x: &Array3<F>) -> ndarray::ArrayView2<'_, F> {
    let (b, l, d) = x.dim();
    x.view().into_shape_with_order((b * l, d)).expect("standard layout")
}

/// `x @ w + b` over the last axis of a (batch, len, features) tensor.
pub fn linear3<F: Scalar>(x: &Array3<F>, w: &Array2<F>, b: &Array1<F>) -> Array3<F> {
    let (bs, l, _) = x.dim();
    let mut y = as2(x).dot(w);
    y += &b.view().insert_axis(Axis(0));
    y.into_shape_with_order((bs, l, w.ncols())).expect("standard layout")
}

fn linear3_bwd<F: Scalar>(
    x: &Array3<F>,
    w: &Array2<F>,
    dy: &Array3<F>,
) -> (Array3<F>, Array2<F>, Array1<F>) {
    let (bs, l, d) = x.dim();
    let dy2 = as2(dy);
    let x2 = as2(x);
    let dx = dy2.dot(&w.t()).into_shape_with_order((bs, l, d)).expect("standard layout");
    let dw = x2.t().dot(&dy2);
    let db = dy2.sum_axis(Axis(0));
    (dx, dw, db)
}

pub struct LnCache<F> {
    xhat: Array3<F>,
    inv_std: Array2<F>,
}

pub fn layer_norm<F: Scalar>(x: &Array3<F>, p: &LayerNormP<F>) -> (Array3<F>, LnCache<F>) {
    let (b, l, d) = x.dim();
    let dn: F = sc(d as f64);
    let mut xhat = Array3::zeros((b, l, d));
    let mut inv_std = Array2::zeros((b, l));
    let mut y = Array3::zeros((b, l, d));
    for bi in 0..b {
        for li in 0..l {
            let row = x.slice(s![bi, li, ..]);
            let mu = row.sum() / dn;
            let mut var = F::zero();
            for &v in row {
                var = var + (v - mu) * (v - mu);
            }
            var = var / dn;
            let istd = F::one() / (var + sc(LN_EPS)).sqrt();
            inv_std[[bi, li]] = istd;
            for di in 0..d {
                let xh = (row[di] - mu) * istd;
                xhat[[bi, li, di]] = xh;
                y[[bi, li, di]] = xh * p.gamma[di] + p.beta[di];
            }
        }
    }
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_bwd<F: Scalar>(
    dy: &Array3<F>,
    p: &LayerNormP<F>,
    cache: &LnCache<F>,
) -> (Array3<F>, Array1<F>, Array1<F>) {
    let (b, l, d) = dy.dim();
    let dn: F = sc(d as f64);
    let mut dx = Array3::zeros((b, l, d));
    let mut dgamma = Array1::zeros(d);
    let mut dbeta = Array1::zeros(d);
    for bi in 0..b {
        for li in 0..l {
            let mut sum_dxhat = F::zero();
            let mut sum_dxhat_xhat = F::zero();
            for di in 0..d {
                let g = dy[[bi, li, di]];
                let xh = cache.xhat[[bi, li, di]];
                dgamma[di] = dgamma[di] + g * xh;
                dbeta[di] = dbeta[di] + g;
                let dxh = g * p.gamma[di];
                sum_dxhat = sum_dxhat + dxh;
                sum_dxhat_xhat = sum_dxhat_xhat + dxh * xh;
            }
            let istd = cache.inv_std[[bi, li]];
            for di in 0..d {
                let dxh = dy[[bi, li, di]] * p.gamma[di];
                let xh = cache.xhat[[bi, li, di]];
                dx[[bi, li, di]] =
                    istd * (dxh - sum_dxhat / dn - xh * sum_dxhat_xhat / dn);
            }
        }
    }
    (dx, dgamma, dbeta)
}

/// Inverted dropout multiplier: 0 with probability `rate`, else 1/(1-rate).
fn dropout_mask3<F: Scalar>(
    shape: (usize, usize, usize),
    rate: f64,
    rng: &mut ChaCha20Rng,
) -> Array3<F> {
    let keep = 1.0 - rate;
    let inv: F = sc(1.0 / keep);
    Array3::from_shape_simple_fn(shape, || if rng.gen_bool(keep) { inv } else { F::zero() })
}

fn dropout_mask4<F: Scalar>(
    shape: (usize, usize, usize, usize),
    rate: f64,
    rng: &mut ChaCha20Rng,
) -> Array4<F> {
    let keep = 1.0 - rate;
    let inv: F = sc(1.0 / keep);
    Array4::from_shape_simple_fn(shape, || if rng.gen_bool(keep) { inv } else { F::zero() })
}

/// Additive mask over keys: NEG wherever the key id is padding.
pub fn key_pad_mask<F: Scalar>(keys: &Array2<u32>, lq: usize) -> Array3<F> {
    let (b, lk) = keys.dim();
    let mut m = Array3::zeros((b, lq, lk));
    for bi in 0..b {
        for ki in 0..lk {
            if keys[[bi, ki]] == PAD {
                for qi in 0..lq {
                    m[[bi, qi, ki]] = sc(NEG);
                }
            }
        }
    }
    m
}

/// Additive causal mask combined with key padding.
pub fn causal_pad_mask<F: Scalar>(keys: &Array2<u32>) -> Array3<F> {
    let (b, l) = keys.dim();
    let mut m = key_pad_mask(keys, l);
    for bi in 0..b {
        for qi in 0..l {
            for ki in qi + 1..l {
                m[[bi, qi, ki]] = sc(NEG);
            }
        }
    }
    m
}

fn softmax_rows_inplace<F: Scalar>(x: &mut Array2<F>) {
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

pub struct AttnCache<F> {
    q_in: Array3<F>,
    kv_in: Array3<F>,
    q: Array3<F>,
    k: Array3<F>,
    v: Array3<F>,
    /// Post-softmax, pre-dropout weights, (batch, head, lq, lk).
    attn: Array4<F>,
    attn_drop: Option<Array4<F>>,
    /// Concatenated head outputs, the input to the output projection.
    ctx: Array3<F>,
}

/// Multi-head attention. `add_mask` is (batch, lq, lk) additive (0 or NEG).
/// `q_in` and `kv_in` may alias (self-attention); the caller then sums the
/// two input gradients.
#[allow(clippy::too_many_arguments)]
pub fn attention<F: Scalar>(
    p: &AttnP<F>,
    q_in: &Array3<F>,
    kv_in: &Array3<F>,
    add_mask: &Array3<F>,
    n_heads: usize,
    attn_dropout: f64,
    rng: Option<&mut ChaCha20Rng>,
) -> (Array3<F>, AttnCache<F>) {
    let (b, lq, d) = q_in.dim();
    let lk = kv_in.dim().1;
    let dh = d / n_heads;
    let scale: F = sc(1.0 / (dh as f64).sqrt());

    let q = linear3(q_in, &p.wq, &p.bq);
    let k = linear3(kv_in, &p.wk, &p.bk);
    let v = linear3(kv_in, &p.wv, &p.bv);

    let attn_drop = match rng {
        Some(r) if attn_dropout > 0.0 => Some(dropout_mask4((b, n_heads, lq, lk), attn_dropout, r)),
        _ => None,
    };

    let mut attn = Array4::zeros((b, n_heads, lq, lk));
    let mut ctx = Array3::zeros((b, lq, d));
    for bi in 0..b {
        for h in 0..n_heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = q.slice(s![bi, .., cols.clone()]);
            let kh = k.slice(s![bi, .., cols.clone()]);
            let vh = v.slice(s![bi, .., cols.clone()]);
            let mut sc_ = qh.dot(&kh.t());
            sc_.mapv_inplace(|x| x * scale);
            sc_ += &add_mask.slice(s![bi, .., ..]);
            softmax_rows_inplace(&mut sc_);
            attn.slice_mut(s![bi, h, .., ..]).assign(&sc_);
            if let Some(m) = &attn_drop {
                sc_ *= &m.slice(s![bi, h, .., ..]);
            }
            let ch = sc_.dot(&vh);
            ctx.slice_mut(s![bi, .., cols]).assign(&ch);
        }
    }

    let out = linear3(&ctx, &p.wo, &p.bo);
    let cache =
        AttnCache { q_in: q_in.clone(), kv_in: kv_in.clone(), q, k, v, attn, attn_drop, ctx };
    (out, cache)
}

pub struct AttnGrads<F> {
    pub dq_in: Array3<F>,
    pub dkv_in: Array3<F>,
    pub dp: AttnP<F>,
}

fn attention_bwd<F: Scalar>(
    p: &AttnP<F>,
    cache: &AttnCache<F>,
    d_out: &Array3<F>,
    n_heads: usize,
) -> AttnGrads<F> {
    let (b, lq, d) = cache.q_in.dim();
    let lk = cache.kv_in.dim().1;
    let dh = d / n_heads;
    let scale: F = sc(1.0 / (dh as f64).sqrt());

    let (dctx, dwo, dbo) = linear3_bwd(&cache.ctx, &p.wo, d_out);

    let mut dq = Array3::zeros((b, lq, d));
    let mut dk = Array3::zeros((b, lk, d));
    let mut dv = Array3::zeros((b, lk, d));
    for bi in 0..b {
        for h in 0..n_heads {
            let cols = h * dh..(h + 1) * dh;
            let a = cache.attn.slice(s![bi, h, .., ..]);
            let vh = cache.v.slice(s![bi, .., cols.clone()]);
            let dctx_h = dctx.slice(s![bi, .., cols.clone()]);

            // Weights actually applied to values (post-dropout).
            let a_used: Array2<F> = match &cache.attn_drop {
                Some(m) => &a * &m.slice(s![bi, h, .., ..]),
                None => a.to_owned(),
            };
            let mut da_used = dctx_h.dot(&vh.t());
            let dvh = a_used.t().dot(&dctx_h);
            if let Some(m) = &cache.attn_drop {
                da_used *= &m.slice(s![bi, h, .., ..]);
            }
            // Softmax backward per row over the pre-dropout weights.
            let mut ds = Array2::zeros((lq, lk));
            for qi in 0..lq {
                let mut dot = F::zero();
                for ki in 0..lk {
                    dot = dot + da_used[[qi, ki]] * a[[qi, ki]];
                }
                for ki in 0..lk {
                    ds[[qi, ki]] = a[[qi, ki]] * (da_used[[qi, ki]] - dot) * scale;
                }
            }
            let qh = cache.q.slice(s![bi, .., cols.clone()]);
            let kh = cache.k.slice(s![bi, .., cols.clone()]);
            dq.slice_mut(s![bi, .., cols.clone()]).assign(&ds.dot(&kh));
            dk.slice_mut(s![bi, .., cols.clone()]).assign(&ds.t().dot(&qh));
            dv.slice_mut(s![bi, .., cols]).assign(&dvh);
        }
    }

    let (dq_in, dwq, dbq) = linear3_bwd(&cache.q_in, &p.wq, &dq);
    let (dkv1, dwk, dbk) = linear3_bwd(&cache.kv_in, &p.wk, &dk);
    let (dkv2, dwv, dbv) = linear3_bwd(&cache.kv_in, &p.wv, &dv);
    let dkv_in = dkv1 + dkv2;

    AttnGrads { dq_in, dkv_in, dp: AttnP { wq: dwq, bq: dbq, wk: dwk, bk: dbk, wv: dwv, bv: dbv, wo: dwo, bo: dbo } }
}

pub struct FfnCache<F> {
    x: Array3<F>,
    h_pre: Array3<F>,
    act_drop: Option<Array3<F>>,
    h_act: Array3<F>,
}

pub fn ffn<F: Scalar>(
    p: &FfnP<F>,
    x: &Array3<F>,
    act_dropout: f64,
    rng: Option<&mut ChaCha20Rng>,
) -> (Array3<F>, FfnCache<F>) {
    let h_pre = linear3(x, &p.w1, &p.b1);
    let mut h_act = h_pre.mapv(|v| if v > F::zero() { v } else { F::zero() });
    let act_drop = match rng {
        Some(r) if act_dropout > 0.0 => {
            let m = dropout_mask3(h_act.dim(), act_dropout, r);
            h_act *= &m;
            Some(m)
        }
        _ => None,
    };
    let y = linear3(&h_act, &p.w2, &p.b2);
    (y, FfnCache { x: x.clone(), h_pre, act_drop, h_act })
}

pub struct FfnGrads<F> {
    pub dx: Array3<F>,
    pub dp: FfnP<F>,
}

fn ffn_bwd<F: Scalar>(p: &FfnP<F>, cache: &FfnCache<F>, dy: &Array3<F>) -> FfnGrads<F> {
    let (mut dh, dw2, db2) = linear3_bwd(&cache.h_act, &p.w2, dy);
    if let Some(m) = &cache.act_drop {
        dh *= m;
    }
    ndarray::Zip::from(&mut dh).and(&cache.h_pre).for_each(|g, &h| {
        if h <= F::zero() {
            *g = F::zero();
        }
    });
    let (dx, dw1, db1) = linear3_bwd(&cache.x, &p.w1, &dh);
    FfnGrads { dx, dp: FfnP { w1: dw1, b1: db1, w2: dw2, b2: db2 } }
}

struct EncLayerCache<F> {
    ln1: LnCache<F>,
    attn: AttnCache<F>,
    drop1: Option<Array3<F>>,
    ln2: LnCache<F>,
    ffn: FfnCache<F>,
    drop2: Option<Array3<F>>,
}

struct DecLayerCache<F> {
    ln1: LnCache<F>,
    self_attn: AttnCache<F>,
    drop1: Option<Array3<F>>,
    ln2: LnCache<F>,
    cross_attn: AttnCache<F>,
    drop2: Option<Array3<F>>,
    ln3: LnCache<F>,
    ffn: FfnCache<F>,
    drop3: Option<Array3<F>>,
}

/// Every intermediate the backward pass needs.
pub struct Cache<F> {
    src_ids: Array2<u32>,
    dec_ids: Array2<u32>,
    emb_drop_src: Option<Array3<F>>,
    emb_drop_dec: Option<Array3<F>>,
    enc_layers: Vec<EncLayerCache<F>>,
    enc_ln: LnCache<F>,
    enc_out: Array3<F>,
    dec_layers: Vec<DecLayerCache<F>>,
    dec_ln: LnCache<F>,
    dec_out: Array3<F>,
}

fn maybe_drop3<F: Scalar>(
    x: &mut Array3<F>,
    rate: f64,
    rng: &mut Option<&mut ChaCha20Rng>,
) -> Option<Array3<F>> {
    match rng {
        Some(r) if rate > 0.0 => {
            let m = dropout_mask3(x.dim(), rate, r);
            *x *= &m;
            Some(m)
        }
        _ => None,
    }
}

/// Teacher-forced training forward. `dropout_rng` enables the configured
/// dropout rates; pass `None` for a deterministic evaluation pass. Returns
/// logits (batch, tgt_len, vocab) and the cache for [`backward`].
pub fn forward_train<F: Scalar>(
    p: &Params<F>,
    cfg: &ModelConfig,
    src_ids: &Array2<u32>,
    dec_ids: &Array2<u32>,
    mut dropout_rng: Option<&mut ChaCha20Rng>,
) -> (Array3<F>, Cache<F>) {
    let h = cfg.n_heads;
    let src_mask = key_pad_mask::<F>(src_ids, src_ids.ncols());
    let cross_mask = key_pad_mask::<F>(src_ids, dec_ids.ncols());
    let dec_mask = causal_pad_mask::<F>(dec_ids);

    // Encoder.
    let mut x = embed(&p.embedding, src_ids, 0);
    let emb_drop_src = maybe_drop3(&mut x, cfg.dropout, &mut dropout_rng);
    let mut enc_layers = Vec::with_capacity(cfg.enc_layers);
    for l in &p.enc {
        let (ln1_out, ln1) = layer_norm(&x, &l.ln1);
        let (mut attn_out, attn) =
            attention(&l.attn, &ln1_out, &ln1_out, &src_mask, h, cfg.attn_dropout, dropout_rng.as_deref_mut());
        let drop1 = maybe_drop3(&mut attn_out, cfg.dropout, &mut dropout_rng);
        x += &attn_out;
        let (ln2_out, ln2) = layer_norm(&x, &l.ln2);
        let (mut ffn_out, ffn_c) = ffn(&l.ffn, &ln2_out, cfg.act_dropout, dropout_rng.as_deref_mut());
        let drop2 = maybe_drop3(&mut ffn_out, cfg.dropout, &mut dropout_rng);
        x += &ffn_out;
        enc_layers.push(EncLayerCache { ln1, attn, drop1, ln2, ffn: ffn_c, drop2 });
    }
    let (enc_out, enc_ln) = layer_norm(&x, &p.enc_ln);

    // Decoder.
    let mut y = embed(&p.embedding, dec_ids, 0);
    let emb_drop_dec = maybe_drop3(&mut y, cfg.dropout, &mut dropout_rng);
    let mut dec_layers = Vec::with_capacity(cfg.dec_layers);
    for l in &p.dec {
        let (ln1_out, ln1) = layer_norm(&y, &l.ln1);
        let (mut sa_out, self_attn) =
            attention(&l.self_attn, &ln1_out, &ln1_out, &dec_mask, h, cfg.attn_dropout, dropout_rng.as_deref_mut());
        let drop1 = maybe_drop3(&mut sa_out, cfg.dropout, &mut dropout_rng);
        y += &sa_out;
        let (ln2_out, ln2) = layer_norm(&y, &l.ln2);
        let (mut ca_out, cross_attn) =
            attention(&l.cross_attn, &ln2_out, &enc_out, &cross_mask, h, cfg.attn_dropout, dropout_rng.as_deref_mut());
        let drop2 = maybe_drop3(&mut ca_out, cfg.dropout, &mut dropout_rng);
        y += &ca_out;
        let (ln3_out, ln3) = layer_norm(&y, &l.ln3);
        let (mut ffn_out, ffn_c) = ffn(&l.ffn, &ln3_out, cfg.act_dropout, dropout_rng.as_deref_mut());
        let drop3 = maybe_drop3(&mut ffn_out, cfg.dropout, &mut dropout_rng);
        y += &ffn_out;
        dec_layers.push(DecLayerCache { ln1, self_attn, drop1, ln2, cross_attn, drop2, ln3, ffn: ffn_c, drop3 });
    }
    let (dec_out, dec_ln) = layer_norm(&y, &p.dec_ln);

    // Output projection through the shared embedding, no bias.
    let (b, t, _) = dec_out.dim();
    let logits = as2(&dec_out)
        .dot(&p.embedding.t())
        .into_shape_with_order((b, t, cfg.vocab_size))
        .expect("standard layout");

    let cache = Cache {
        src_ids: src_ids.clone(),
        dec_ids: dec_ids.clone(),
        emb_drop_src,
        emb_drop_dec,
        enc_layers,
        enc_ln,
        enc_out,
        dec_layers,
        dec_ln,
        dec_out,
    };
    (logits, cache)
}

/// Gradients of every parameter given the loss gradient at the logits.
pub fn backward<F: Scalar>(
    p: &Params<F>,
    cfg: &ModelConfig,
    cache: &Cache<F>,
    dlogits: &Array3<F>,
) -> Params<F> {
    let h = cfg.n_heads;
    let mut g = p.zeros_like();

    // Output projection: logits = dec_out @ E^T.
    let (b, t, v) = dlogits.dim();
    let d = p.embedding.ncols();
    let dl2 = dlogits.view().into_shape_with_order((b * t, v)).expect("standard layout");
    let ddec_out =
        dl2.dot(&p.embedding).into_shape_with_order((b, t, d)).expect("standard layout");
    g.embedding += &dl2.t().dot(&as2(&cache.dec_out));

    // Decoder stack, in reverse.
    let (mut dy, dg, db) = layer_norm_bwd(&ddec_out, &p.dec_ln, &cache.dec_ln);
    g.dec_ln.gamma += &dg;
    g.dec_ln.beta += &db;
    let mut denc_out: Array3<F> = Array3::zeros(cache.enc_out.dim());
    for (li, l) in p.dec.iter().enumerate().rev() {
        let c = &cache.dec_layers[li];
        let gl = &mut g.dec[li];

        // y3 = y2 + drop3(ffn(ln3(y2)))
        let mut dffn = dy.clone();
        if let Some(m) = &c.drop3 {
            dffn *= m;
        }
        let fg = ffn_bwd(&l.ffn, &c.ffn, &dffn);
        add_ffn(&mut gl.ffn, fg.dp);
        let (dy2, dg, db) = layer_norm_bwd(&fg.dx, &l.ln3, &c.ln3);
        gl.ln3.gamma += &dg;
        gl.ln3.beta += &db;
        dy += &dy2;

        // y2 = y1 + drop2(cross(ln2(y1), enc_out))
        let mut dca = dy.clone();
        if let Some(m) = &c.drop2 {
            dca *= m;
        }
        let ag = attention_bwd(&l.cross_attn, &c.cross_attn, &dca, h);
        add_attn(&mut gl.cross_attn, ag.dp);
        denc_out += &ag.dkv_in;
        let (dy1, dg, db) = layer_norm_bwd(&ag.dq_in, &l.ln2, &c.ln2);
        gl.ln2.gamma += &dg;
        gl.ln2.beta += &db;
        dy += &dy1;

        // y1 = y0 + drop1(self(ln1(y0)))
        let mut dsa = dy.clone();
        if let Some(m) = &c.drop1 {
            dsa *= m;
        }
        let ag = attention_bwd(&l.self_attn, &c.self_attn, &dsa, h);
        add_attn(&mut gl.self_attn, ag.dp);
        let din = ag.dq_in + ag.dkv_in;
        let (dy0, dg, db) = layer_norm_bwd(&din, &l.ln1, &c.ln1);
        gl.ln1.gamma += &dg;
        gl.ln1.beta += &db;
        dy += &dy0;
    }
    let mut dy_emb = dy;
    if let Some(m) = &cache.emb_drop_dec {
        dy_emb *= m;
    }
    embed_bwd(&mut g.embedding, &cache.dec_ids, &dy_emb);

    // Encoder stack, in reverse, seeded by the cross-attention gradient.
    let (mut dx, dg, db) = layer_norm_bwd(&denc_out, &p.enc_ln, &cache.enc_ln);
    g.enc_ln.gamma += &dg;
    g.enc_ln.beta += &db;
    for (li, l) in p.enc.iter().enumerate().rev() {
        let c = &cache.enc_layers[li];
        let gl = &mut g.enc[li];

        let mut dffn = dx.clone();
        if let Some(m) = &c.drop2 {
            dffn *= m;
        }
        let fg = ffn_bwd(&l.ffn, &c.ffn, &dffn);
        add_ffn(&mut gl.ffn, fg.dp);
        let (dx1, dg, db) = layer_norm_bwd(&fg.dx, &l.ln2, &c.ln2);
        gl.ln2.gamma += &dg;
        gl.ln2.beta += &db;
        dx += &dx1;

        let mut dattn = dx.clone();
        if let Some(m) = &c.drop1 {
            dattn *= m;
        }
        let ag = attention_bwd(&l.attn, &c.attn, &dattn, h);
        add_attn(&mut gl.attn, ag.dp);
        let din = ag.dq_in + ag.dkv_in;
        let (dx0, dg, db) = layer_norm_bwd(&din, &l.ln1, &c.ln1);
        gl.ln1.gamma += &dg;
        gl.ln1.beta += &db;
        dx += &dx0;
    }
    let mut dx_emb = dx;
    if let Some(m) = &cache.emb_drop_src {
        dx_emb *= m;
    }
    embed_bwd(&mut g.embedding, &cache.src_ids, &dx_emb);

    g
}

fn add_attn<F: Scalar>(dst: &mut AttnP<F>, src: AttnP<F>) {
    dst.wq += &src.wq;
    dst.bq += &src.bq;
    dst.wk += &src.wk;
    dst.bk += &src.bk;
    dst.wv += &src.wv;
    dst.bv += &src.bv;
    dst.wo += &src.wo;
    dst.bo += &src.bo;
}

fn add_ffn<F: Scalar>(dst: &mut FfnP<F>, src: FfnP<F>) {
    dst.w1 += &src.w1;
    dst.b1 += &src.b1;
    dst.w2 += &src.w2;
    dst.b2 += &src.b2;
}

/// Evaluation-mode encoder pass (no dropout, no cache).
pub fn encode<F: Scalar>(p: &Params<F>, cfg: &ModelConfig, src_ids: &Array2<u32>) -> Array3<F> {
    let h = cfg.n_heads;
    let src_mask = key_pad_mask::<F>(src_ids, src_ids.ncols());
    let mut x = embed(&p.embedding, src_ids, 0);
    for l in &p.enc {
        let (ln1_out, _) = layer_norm(&x, &l.ln1);
        let (attn_out, _) = attention(&l.attn, &ln1_out, &ln1_out, &src_mask, h, 0.0, None);
        x += &attn_out;
        let (ln2_out, _) = layer_norm(&x, &l.ln2);
        let (ffn_out, _) = ffn(&l.ffn, &ln2_out, 0.0, None);
        x += &ffn_out;
    }
    let (enc_out, _) = layer_norm(&x, &p.enc_ln);
    enc_out
}
