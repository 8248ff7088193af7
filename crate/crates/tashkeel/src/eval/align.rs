//! Minimum-edit-distance alignment between two token sequences.
//!
//! Tokens are compared as whole strings (callers pass stripped forms, so two
//! tokens match when their undiacritized text is identical). The alignment
//! decides which prediction token is scored against which reference token
//! when the two sides disagree about token boundaries.

/// One aligned step: `(prediction index, reference index)`. `None` on the
/// prediction side is a deletion (reference token with no counterpart), `None`
/// on the reference side an insertion.
pub type AlignedPair = (Option<usize>, Option<usize>);

/// Result of aligning a prediction token sequence against a reference one.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// Steps in left-to-right order over both sequences.
    pub pairs: Vec<AlignedPair>,
    /// Edit cost: substitutions + insertions + deletions.
    pub cost: u64,
}

impl Alignment {
    /// For each reference index, the prediction index it was paired with.
    pub fn pred_of_ref(&self, n_ref: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_ref];
        for &(p, r) in &self.pairs {
            if let (Some(p), Some(r)) = (p, r) {
                out[r] = Some(p);
            }
        }
        out
    }
}

/// Align `pred` against `reference` with unit costs (substitution 1 unless
/// equal, insertion 1, deletion 1). Ties in the traceback prefer pairing over
/// deletion over insertion, which keeps the output deterministic.
pub fn align_tokens(pred: &[String], reference: &[String]) -> Alignment {
    let np = pred.len();
    let nr = reference.len();
    // dp[i][j]: cost of aligning pred[..i] with reference[..j].
    let mut dp = vec![vec![0u64; nr + 1]; np + 1];
    for i in 0..=np {
        dp[i][0] = i as u64;
    }
    for j in 0..=nr {
        dp[0][j] = j as u64;
    }
    for i in 1..=np {
        for j in 1..=nr {
            let sub = dp[i - 1][j - 1] + u64::from(pred[i - 1] != reference[j - 1]);
            let del = dp[i][j - 1] + 1;
            let ins = dp[i - 1][j] + 1;
            dp[i][j] = sub.min(del).min(ins);
        }
    }
    let mut pairs = Vec::with_capacity(np.max(nr));
    let (mut i, mut j) = (np, nr);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub = dp[i - 1][j - 1] + u64::from(pred[i - 1] != reference[j - 1]);
            if dp[i][j] == sub {
                pairs.push((Some(i - 1), Some(j - 1)));
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dp[i][j] == dp[i][j - 1] + 1 {
            pairs.push((None, Some(j - 1)));
            j -= 1;
            continue;
        }
        pairs.push((Some(i - 1), None));
        i -= 1;
    }
    pairs.reverse();
    Alignment {
        pairs,
        cost: dp[np][nr],
    }
}
