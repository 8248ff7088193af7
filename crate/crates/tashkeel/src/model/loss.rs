//! Label-smoothed cross entropy, averaged over non-padding target positions.
//!
//! The smoothed target distribution is `(1-eps) * one_hot + (eps/V) *
//! uniform`, with the uniform component spread over the whole vocabulary.
//! Under uniform logits the loss is exactly `ln V` for every smoothing
//! strength, which the tests pin as a closed-form oracle.

use ndarray::{Array2, Array3};

use super::params::{s as sc, Scalar};
use crate::data::PAD;

/// Loss and its gradient at the logits. Positions whose label is [`PAD`]
/// contribute nothing to either. Panics if every label is padding.
pub fn label_smoothed_ce<F: Scalar>(
    logits: &Array3<F>,
    labels: &Array2<u32>,
    eps: f64,
) -> (F, Array3<F>) {
    let (b, t, v) = logits.dim();
    assert_eq!(labels.dim(), (b, t), "labels must match logits positions");
    assert!((0.0..1.0).contains(&eps), "smoothing must be in [0, 1)");

    let n_real = labels.iter().filter(|&&l| l != PAD).count();
    assert!(n_real > 0, "a batch needs at least one non-padding label");
    let inv_n: F = sc(1.0 / n_real as f64);
    let on_target: F = sc(1.0 - eps);
    let uniform: F = sc(eps / v as f64);

    let mut loss = F::zero();
    let mut dlogits = Array3::zeros((b, t, v));
    for bi in 0..b {
        for ti in 0..t {
            let label = labels[[bi, ti]];
            if label == PAD {
                continue;
            }
            let row = logits.slice(ndarray::s![bi, ti, ..]);
            let mut max = row[0];
            for &x in row.iter() {
                if x > max {
                    max = x;
                }
            }
            let mut sum_exp = F::zero();
            for &x in row.iter() {
                sum_exp = sum_exp + (x - max).exp();
            }
            let lse = max + sum_exp.ln();

            let mut sum_logp = F::zero();
            for &x in row.iter() {
                sum_logp = sum_logp + (x - lse);
            }
            let logp_y = row[label as usize] - lse;
            loss = loss + (-(on_target * logp_y) - uniform * sum_logp) * inv_n;

            for vi in 0..v {
                let p = (row[vi] - lse).exp();
                let q = if vi as u32 == label { on_target + uniform } else { uniform };
                dlogits[[bi, ti, vi]] = (p - q) * inv_n;
            }
        }
    }
    (loss, dlogits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn uniform_logits_cost_ln_v() {
        let v = 17;
        let logits = Array3::<f64>::zeros((2, 3, v));
        let labels = arr2(&[[4, 5, 6], [7, 8, PAD]]);
        for eps in [0.0, 0.1, 0.5] {
            let (loss, _) = label_smoothed_ce(&logits, &labels, eps);
            assert!(
                (loss - (v as f64).ln()).abs() < 1e-12,
                "eps {eps}: {loss} vs {}",
                (v as f64).ln()
            );
        }
    }

    #[test]
    fn matches_independent_summation() {
        // Oracle: per-position softmax and dot with the smoothed target,
        // computed along a different summation path.
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (b, t, v) = (2, 4, 9);
        let logits = Array3::<f64>::from_shape_simple_fn((b, t, v), || rng.gen_range(-4.0..4.0));
        let labels = arr2(&[[4, 5, 6, PAD], [7, 8, PAD, PAD]]);
        let eps = 0.1;
        let (loss, _) = label_smoothed_ce(&logits, &labels, eps);

        let mut expect = 0.0f64;
        let mut n = 0usize;
        for bi in 0..b {
            for ti in 0..t {
                let y = labels[[bi, ti]];
                if y == PAD {
                    continue;
                }
                n += 1;
                let row: Vec<f64> = (0..v).map(|vi| logits[[bi, ti, vi]]).collect();
                let z: f64 = row.iter().map(|x| x.exp()).sum();
                for (vi, x) in row.iter().enumerate() {
                    let p = x.exp() / z;
                    let q = if vi as u32 == y { 1.0 - eps + eps / v as f64 } else { eps / v as f64 };
                    expect -= q * p.ln();
                }
            }
        }
        expect /= n as f64;
        assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (b, t, v) = (1, 3, 7);
        let mut logits = Array3::<f64>::from_shape_simple_fn((b, t, v), || rng.gen_range(-2.0..2.0));
        let labels = arr2(&[[4, 5, PAD]]);
        let (_, d) = label_smoothed_ce(&logits, &labels, 0.1);
        let eps = 1e-6;
        for bi in 0..b {
            for ti in 0..t {
                for vi in 0..v {
                    let orig = logits[[bi, ti, vi]];
                    logits[[bi, ti, vi]] = orig + eps;
                    let (up, _) = label_smoothed_ce(&logits, &labels, 0.1);
                    logits[[bi, ti, vi]] = orig - eps;
                    let (down, _) = label_smoothed_ce(&logits, &labels, 0.1);
                    logits[[bi, ti, vi]] = orig;
                    let numeric = (up - down) / (2.0 * eps);
                    assert!(
                        (d[[bi, ti, vi]] - numeric).abs() < 1e-8,
                        "at [{bi},{ti},{vi}]: {} vs {numeric}",
                        d[[bi, ti, vi]]
                    );
                }
            }
        }
        // Padded positions carry exactly zero gradient.
        for vi in 0..v {
            assert_eq!(d[[0, 2, vi]], 0.0);
        }
    }

    #[test]
    fn zero_smoothing_is_plain_cross_entropy() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (b, t, v) = (2, 2, 6);
        let logits = Array3::<f64>::from_shape_simple_fn((b, t, v), || rng.gen_range(-3.0..3.0));
        let labels = arr2(&[[4, 5], [3, PAD]]);
        let (loss, _) = label_smoothed_ce(&logits, &labels, 0.0);
        let mut expect = 0.0f64;
        for (bi, ti, y) in [(0, 0, 4usize), (0, 1, 5), (1, 0, 3)] {
            let z: f64 = (0..v).map(|vi| logits[[bi, ti, vi]].exp()).sum();
            expect -= (logits[[bi, ti, y]].exp() / z).ln();
        }
        expect /= 3.0;
        assert!((loss - expect).abs() < 1e-12);
    }
}
