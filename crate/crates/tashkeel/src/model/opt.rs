//! Adam and the warmup-then-inverse-square-root learning-rate schedule.

use super::params::{s as sc, Params, Scalar};

/// Adam with bias correction, no weight decay. Betas default to (0.9, 0.98).
/// Moment state follows the parameter visit order.
pub struct Adam<F> {
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(params: &Params<F>) -> Adam<F> {
        let shapes: Vec<usize> = params.flat().iter().map(|s| s.len()).collect();
        Adam {
            m: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Params<F>, grads: &Params<F>, lr: f64) {
        self.t += 1;
        let b1: F = sc(self.beta1);
        let b2: F = sc(self.beta2);
        let one = F::one();
        let corr1: F = sc(1.0 - self.beta1.powi(self.t as i32));
        let corr2: F = sc(1.0 - self.beta2.powi(self.t as i32));
        let lr: F = sc(lr);
        let eps: F = sc(self.eps);
        for (((p, g), m), v) in params
            .flat_mut()
            .into_iter()
            .zip(grads.flat())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            assert_eq!(p.len(), g.len(), "gradient shapes must match parameters");
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let mhat = m[i] / corr1;
                let vhat = v[i] / corr2;
                p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Learning rate at a 1-based step: linear warmup to `peak_lr` over
/// `warmup_steps`, then inverse-square-root decay.
pub fn lr_at(step: u64, peak_lr: f64, warmup_steps: u64) -> f64 {
    assert!(step >= 1, "steps are 1-based");
    assert!(warmup_steps >= 1, "warmup must cover at least one step");
    let s = step as f64;
    let w = warmup_steps as f64;
    peak_lr * (s / w).min((w / s).sqrt())
}
