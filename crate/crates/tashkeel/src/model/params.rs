//! Parameter storage, initialization, and uniform tensor traversal.
//!
//! Every tensor is standard-layout, and [`Params::flat_mut`] exposes them in
//! one fixed visit order. The optimizer, the checkpoint writer, and gradient
//! accumulation all walk that order, which is what makes a checkpoint
//! loadable: the byte stream has no per-tensor framing beyond the manifest.

use ndarray::{Array1, Array2, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;

/// Element type of the network: `f32` for real runs, `f64` for the
/// finite-difference gradient oracle.
pub trait Scalar: NdFloat + FromPrimitive {}
impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand conversion from f64 constants into the element type.
pub(crate) fn s<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("f64 converts into the scalar type")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormP<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnP<F> {
    pub wq: Array2<F>,
    pub bq: Array1<F>,
    pub wk: Array2<F>,
    pub bk: Array1<F>,
    pub wv: Array2<F>,
    pub bv: Array1<F>,
    pub wo: Array2<F>,
    pub bo: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnP<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncLayerP<F> {
    pub ln1: LayerNormP<F>,
    pub attn: AttnP<F>,
    pub ln2: LayerNormP<F>,
    pub ffn: FfnP<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecLayerP<F> {
    pub ln1: LayerNormP<F>,
    pub self_attn: AttnP<F>,
    pub ln2: LayerNormP<F>,
    pub cross_attn: AttnP<F>,
    pub ln3: LayerNormP<F>,
    pub ffn: FfnP<F>,
}

/// All trainable tensors. The embedding table is shared three ways: encoder
/// input, decoder input, and (transposed) output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    /// (vocab, d_model).
    pub embedding: Array2<F>,
    pub enc: Vec<EncLayerP<F>>,
    pub enc_ln: LayerNormP<F>,
    pub dec: Vec<DecLayerP<F>>,
    pub dec_ln: LayerNormP<F>,
}

fn xavier<F: Scalar>(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<F> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || s(rng.gen_range(-limit..limit)))
}

fn ln_init<F: Scalar>(d: usize) -> LayerNormP<F> {
    LayerNormP { gamma: Array1::from_elem(d, F::one()), beta: Array1::zeros(d) }
}

fn attn_init<F: Scalar>(rng: &mut ChaCha20Rng, d: usize) -> AttnP<F> {
    AttnP {
        wq: xavier(rng, d, d),
        bq: Array1::zeros(d),
        wk: xavier(rng, d, d),
        bk: Array1::zeros(d),
        wv: xavier(rng, d, d),
        bv: Array1::zeros(d),
        wo: xavier(rng, d, d),
        bo: Array1::zeros(d),
    }
}

fn ffn_init<F: Scalar>(rng: &mut ChaCha20Rng, d: usize, f: usize) -> FfnP<F> {
    FfnP { w1: xavier(rng, d, f), b1: Array1::zeros(f), w2: xavier(rng, f, d), b2: Array1::zeros(d) }
}

impl<F: Scalar> Params<F> {
    /// Fresh parameters: embeddings from N(0, d_model^-1/2), weight matrices
    /// Xavier-uniform, biases zero, layer-norm gains one. Deterministic for
    /// a given seed.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Params<F> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = cfg.d_model;
        let std = (d as f64).powf(-0.5);
        let normal = Normal::new(0.0, std).expect("positive std");
        let embedding =
            Array2::from_shape_simple_fn((cfg.vocab_size, d), || s(normal.sample(&mut rng)));
        let enc = (0..cfg.enc_layers)
            .map(|_| EncLayerP {
                ln1: ln_init(d),
                attn: attn_init(&mut rng, d),
                ln2: ln_init(d),
                ffn: ffn_init(&mut rng, d, cfg.ffn_dim),
            })
            .collect();
        let dec = (0..cfg.dec_layers)
            .map(|_| DecLayerP {
                ln1: ln_init(d),
                self_attn: attn_init(&mut rng, d),
                ln2: ln_init(d),
                cross_attn: attn_init(&mut rng, d),
                ln3: ln_init(d),
                ffn: ffn_init(&mut rng, d, cfg.ffn_dim),
            })
            .collect();
        Params { embedding, enc, enc_ln: ln_init(d), dec, dec_ln: ln_init(d) }
    }

    /// Same shapes, all zeros. The gradient container.
    pub fn zeros_like(&self) -> Params<F> {
        let mut out = self.clone();
        for t in out.flat_mut() {
            for x in t {
                *x = F::zero();
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, data: &[F]| n += data.len());
        n
    }

    /// Walk every tensor as (name, shape, data) in the fixed visit order.
    pub fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[F])) {
        fn ln<F: Scalar>(p: &LayerNormP<F>, pre: &str, f: &mut dyn FnMut(&str, &[usize], &[F])) {
            f(&format!("{pre}.gamma"), p.gamma.shape(), p.gamma.as_slice().unwrap());
            f(&format!("{pre}.beta"), p.beta.shape(), p.beta.as_slice().unwrap());
        }
        fn attn<F: Scalar>(p: &AttnP<F>, pre: &str, f: &mut dyn FnMut(&str, &[usize], &[F])) {
            for (n, w, b) in [
                ("q", &p.wq, &p.bq),
                ("k", &p.wk, &p.bk),
                ("v", &p.wv, &p.bv),
                ("o", &p.wo, &p.bo),
            ] {
                f(&format!("{pre}.w{n}"), w.shape(), w.as_slice().unwrap());
                f(&format!("{pre}.b{n}"), b.shape(), b.as_slice().unwrap());
            }
        }
        fn ffn<F: Scalar>(p: &FfnP<F>, pre: &str, f: &mut dyn FnMut(&str, &[usize], &[F])) {
            f(&format!("{pre}.w1"), p.w1.shape(), p.w1.as_slice().unwrap());
            f(&format!("{pre}.b1"), p.b1.shape(), p.b1.as_slice().unwrap());
            f(&format!("{pre}.w2"), p.w2.shape(), p.w2.as_slice().unwrap());
            f(&format!("{pre}.b2"), p.b2.shape(), p.b2.as_slice().unwrap());
        }

        f("embedding", self.embedding.shape(), self.embedding.as_slice().unwrap());
        for (i, l) in self.enc.iter().enumerate() {
            ln(&l.ln1, &format!("enc.{i}.ln1"), f);
            attn(&l.attn, &format!("enc.{i}.attn"), f);
            ln(&l.ln2, &format!("enc.{i}.ln2"), f);
            ffn(&l.ffn, &format!("enc.{i}.ffn"), f);
        }
        ln(&self.enc_ln, "enc_ln", f);
        for (i, l) in self.dec.iter().enumerate() {
            ln(&l.ln1, &format!("dec.{i}.ln1"), f);
            attn(&l.self_attn, &format!("dec.{i}.self_attn"), f);
            ln(&l.ln2, &format!("dec.{i}.ln2"), f);
            attn(&l.cross_attn, &format!("dec.{i}.cross_attn"), f);
            ln(&l.ln3, &format!("dec.{i}.ln3"), f);
            ffn(&l.ffn, &format!("dec.{i}.ffn"), f);
        }
        ln(&self.dec_ln, "dec_ln", f);
    }

    /// Flat views of every tensor, in the same order as [`visit`].
    ///
    /// [`visit`]: Params::visit
    pub fn flat(&self) -> Vec<&[F]> {
        fn ln<'a, F: Scalar>(p: &'a LayerNormP<F>, out: &mut Vec<&'a [F]>) {
            out.push(p.gamma.as_slice().unwrap());
            out.push(p.beta.as_slice().unwrap());
        }
        fn attn<'a, F: Scalar>(p: &'a AttnP<F>, out: &mut Vec<&'a [F]>) {
            out.push(p.wq.as_slice().unwrap());
            out.push(p.bq.as_slice().unwrap());
            out.push(p.wk.as_slice().unwrap());
            out.push(p.bk.as_slice().unwrap());
            out.push(p.wv.as_slice().unwrap());
            out.push(p.bv.as_slice().unwrap());
            out.push(p.wo.as_slice().unwrap());
            out.push(p.bo.as_slice().unwrap());
        }
        fn ffn<'a, F: Scalar>(p: &'a FfnP<F>, out: &mut Vec<&'a [F]>) {
            out.push(p.w1.as_slice().unwrap());
            out.push(p.b1.as_slice().unwrap());
            out.push(p.w2.as_slice().unwrap());
            out.push(p.b2.as_slice().unwrap());
        }

        let mut out = Vec::new();
        out.push(self.embedding.as_slice().unwrap());
        for l in &self.enc {
            ln(&l.ln1, &mut out);
            attn(&l.attn, &mut out);
            ln(&l.ln2, &mut out);
            ffn(&l.ffn, &mut out);
        }
        ln(&self.enc_ln, &mut out);
        for l in &self.dec {
            ln(&l.ln1, &mut out);
            attn(&l.self_attn, &mut out);
            ln(&l.ln2, &mut out);
            attn(&l.cross_attn, &mut out);
            ln(&l.ln3, &mut out);
            ffn(&l.ffn, &mut out);
        }
        ln(&self.dec_ln, &mut out);
        out
    }

    /// Mutable flat views of every tensor, in the same order as [`visit`].
    ///
    /// [`visit`]: Params::visit
    pub fn flat_mut(&mut self) -> Vec<&mut [F]> {
        fn ln<'a, F: Scalar>(p: &'a mut LayerNormP<F>, out: &mut Vec<&'a mut [F]>) {
            out.push(p.gamma.as_slice_mut().unwrap());
            out.push(p.beta.as_slice_mut().unwrap());
        }
        fn attn<'a, F: Scalar>(p: &'a mut AttnP<F>, out: &mut Vec<&'a mut [F]>) {
            out.push(p.wq.as_slice_mut().unwrap());
            out.push(p.bq.as_slice_mut().unwrap());
            out.push(p.wk.as_slice_mut().unwrap());
            out.push(p.bk.as_slice_mut().unwrap());
            out.push(p.wv.as_slice_mut().unwrap());
            out.push(p.bv.as_slice_mut().unwrap());
            out.push(p.wo.as_slice_mut().unwrap());
            out.push(p.bo.as_slice_mut().unwrap());
        }
        fn ffn<'a, F: Scalar>(p: &'a mut FfnP<F>, out: &mut Vec<&'a mut [F]>) {
            out.push(p.w1.as_slice_mut().unwrap());
            out.push(p.b1.as_slice_mut().unwrap());
            out.push(p.w2.as_slice_mut().unwrap());
            out.push(p.b2.as_slice_mut().unwrap());
        }

        let mut out = Vec::new();
        out.push(self.embedding.as_slice_mut().unwrap());
        for l in &mut self.enc {
            ln(&mut l.ln1, &mut out);
            attn(&mut l.attn, &mut out);
            ln(&mut l.ln2, &mut out);
            ffn(&mut l.ffn, &mut out);
        }
        ln(&mut self.enc_ln, &mut out);
        for l in &mut self.dec {
            ln(&mut l.ln1, &mut out);
            attn(&mut l.self_attn, &mut out);
            ln(&mut l.ln2, &mut out);
            attn(&mut l.cross_attn, &mut out);
            ln(&mut l.ln3, &mut out);
            ffn(&mut l.ffn, &mut out);
        }
        ln(&mut self.dec_ln, &mut out);
        out
    }

    /// Elementwise in-place accumulate: `self += other`. Shapes must match.
    pub fn add_assign(&mut self, other: &Params<F>) {
        for (dst, src) in self.flat_mut().into_iter().zip(other.flat()) {
            assert_eq!(dst.len(), src.len(), "parameter shapes must match");
            for (d, s) in dst.iter_mut().zip(src) {
                *d = *d + *s;
            }
        }
    }
}
