//! Loss functions with hand-derived gradients.

use super::TrainError;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity and its gradients with respect to both inputs.
pub fn cosine_with_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), TrainError> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(TrainError::ZeroVector);
    }
    let c = dot(a, b) / (na * nb);
    let ga = a
        .iter()
        .zip(b)
        .map(|(x, y)| y / (na * nb) - c * x / (na * na))
        .collect();
    let gb = a
        .iter()
        .zip(b)
        .map(|(x, y)| x / (na * nb) - c * y / (nb * nb))
        .collect();
    Ok((c, ga, gb))
}

/// `-log softmax(logits)[label]` and its gradient `softmax - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceGrad {
    pub loss: f64,
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

/// In-batch InfoNCE. For anchor `i` the denominator runs over the
/// positives and negatives of every triplet in the batch.
pub fn info_nce_loss(
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    tau: f64,
) -> Result<f64, TrainError> {
    Ok(info_nce_with_grad(anchors, positives, negatives, tau)?.loss)
}

pub fn info_nce_with_grad(
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    tau: f64,
) -> Result<InfoNceGrad, TrainError> {
    let n = anchors.len();
    if n == 0 || positives.len() != n || negatives.len() != n {
        return Err(TrainError::InvalidConfig(
            "batch needs equally many anchors, positives and negatives".into(),
        ));
    }
    let zeros = |v: &[Vec<f64>]| v.iter().map(|x| vec![0.0; x.len()]).collect::<Vec<_>>();
    let mut out = InfoNceGrad {
        loss: 0.0,
        anchors: zeros(anchors),
        positives: zeros(positives),
        negatives: zeros(negatives),
    };
    let scale = 1.0 / n as f64;
    for (i, anchor) in anchors.iter().enumerate() {
        // logits: positives 0..n, negatives n..2n
        let mut logits = Vec::with_capacity(2 * n);
        let mut grads = Vec::with_capacity(2 * n);
        for others in [positives, negatives] {
            for o in others {
                let (c, ga, go) = cosine_with_grad(anchor, o)?;
                logits.push(c / tau);
                grads.push((ga, go));
            }
        }
        let (l, dlogits) = softmax_cross_entropy(&logits, i);
        out.loss += l * scale;
        for (k, (ga, go)) in grads.into_iter().enumerate() {
            let w = dlogits[k] * scale / tau;
            for (acc, g) in out.anchors[i].iter_mut().zip(&ga) {
                *acc += w * g;
            }
            let target = if k < n {
                &mut out.positives[k]
            } else {
                &mut out.negatives[k - n]
            };
            for (acc, g) in target.iter_mut().zip(&go) {
                *acc += w * g;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_similarities_give_ln_two() {
        let x = vec![vec![1.0, 0.0]];
        let p = vec![vec![0.0, 1.0]];
        let n = vec![vec![0.0, -1.0]];
        let l = info_nce_loss(&x, &p, &n, 0.1).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn separated_pair() {
        let x = vec![vec![1.0, 0.0]];
        let p = vec![vec![2.0, 0.0]];
        let n = vec![vec![-1.0, 0.0]];
        let l = info_nce_loss(&x, &p, &n, 0.1).unwrap();
        let expected = (-20f64).exp().ln_1p();
        assert!((l - expected).abs() < 1e-15);
        assert!(l > 0.0);
    }

    #[test]
    fn zero_vector_rejected() {
        let x = vec![vec![0.0, 0.0]];
        assert_eq!(
            info_nce_loss(&x, &x, &x, 0.1),
            Err(TrainError::ZeroVector)
        );
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let (l, g) = softmax_cross_entropy(&[0.3; 5], 2);
        assert!((l - 5f64.ln()).abs() < 1e-12);
        assert!((g.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn cosine_gradient_is_orthogonal_to_input() {
        let a = [0.3, -1.2, 2.0];
        let b = [1.0, 0.5, -0.25];
        let (_, ga, gb) = cosine_with_grad(&a, &b).unwrap();
        assert!(dot(&ga, &a).abs() < 1e-12);
        assert!(dot(&gb, &b).abs() < 1e-12);
    }
}
