use std::collections::HashMap;
use std::hash::Hash;

use super::SimilarityError;

/// Highest n-gram order.
pub const MAX_ORDER: usize = 4;

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU-4 without smoothing.
///
/// Orders above the candidate length are dropped (uniform weights over the
/// remaining orders). Any zero clipped precision makes the score 0.
pub fn bleu<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Result<f64, SimilarityError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(SimilarityError::EmptyInput);
    }
    let orders = MAX_ORDER.min(candidate.len());
    let mut log_precision = 0.0;
    for n in 1..=orders {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let clipped: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return Ok(0.0);
        }
        let total = candidate.len() + 1 - n;
        log_precision += (clipped as f64 / total as f64).ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(brevity * (log_precision / orders as f64).exp())
}

/// Mean of BLEU in both directions.
pub fn bi_bleu<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, SimilarityError> {
    Ok(mean_of_directions(bleu(a, b)?, bleu(b, a)?))
}

/// `(forward + backward) / 2`, written so that swapping the arguments gives
/// the bit-identical value.
pub fn mean_of_directions(forward: f64, backward: f64) -> f64 {
    (forward + backward) / 2.0
}
