use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::ProblemRecord;
use crate::retrieval::TripletPair;
use crate::similarity::EmbeddingTable;

use super::loss::{cosine_with_grad, info_nce_with_grad, softmax_cross_entropy};
use super::{EncoderParams, TrainConfig, TrainError};

/// A triplet as token indices, with the anchor's class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTriplet {
    pub anchor: Vec<usize>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub solver: f64,
    pub contrastive: f64,
    /// Mean anchor-positive minus mean anchor-negative cosine in the batch.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embed: Vec<f64>,
    pub classifier: Vec<f64>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.embed.iter().chain(&self.classifier).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    #[serde(rename = "L")]
    pub loss: f64,
    #[serde(rename = "L_solver")]
    pub solver: f64,
    #[serde(rename = "L_cl")]
    pub contrastive: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_pos_cos: f64,
    pub mean_neg_cos: f64,
    pub gap: f64,
    pub retrieval_at_1: f64,
}

fn record_map(records: &[ProblemRecord]) -> HashMap<&str, &ProblemRecord> {
    records.iter().map(|r| (r.id.as_str(), r)).collect()
}

/// Resolves triplet ids against `records`. Triplets whose anchor is an
/// augment are dropped unless `include_augments` is set.
pub fn encode_triplets(
    records: &[ProblemRecord],
    triplets: &[TripletPair],
    params: &EncoderParams,
    include_augments: bool,
) -> Result<Vec<EncodedTriplet>, TrainError> {
    let by_id = record_map(records);
    let lookup = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| TrainError::UnknownRecord(id.to_string()))
    };
    let mut out = Vec::with_capacity(triplets.len());
    for t in triplets {
        let anchor = lookup(&t.anchor_id)?;
        if anchor.origin.is_augmented() && !include_augments {
            continue;
        }
        let label = params.class_of(&anchor.template_key()).ok_or_else(|| {
            TrainError::InvalidConfig(format!("template of `{}` has no class", anchor.id))
        })?;
        out.push(EncodedTriplet {
            anchor: params.token_ids(anchor)?,
            positive: params.token_ids(lookup(&t.positive_id)?)?,
            negative: params.token_ids(lookup(&t.negative_id)?)?,
            label,
        });
    }
    Ok(out)
}

/// Anchor, positive and negative representations of a batch.
type Encoded = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn forward(params: &EncoderParams, batch: &[EncodedTriplet]) -> Encoded {
    let enc = |pick: fn(&EncodedTriplet) -> &Vec<usize>| {
        batch.iter().map(|t| params.encode_ids(pick(t))).collect::<Vec<_>>()
    };
    (enc(|t| &t.anchor), enc(|t| &t.positive), enc(|t| &t.negative))
}

fn batch_gap(anchors: &[Vec<f64>], pos: &[Vec<f64>], neg: &[Vec<f64>]) -> Result<f64, TrainError> {
    let mut gap = 0.0;
    for i in 0..anchors.len() {
        gap += cosine_with_grad(&anchors[i], &pos[i])?.0 - cosine_with_grad(&anchors[i], &neg[i])?.0;
    }
    Ok(gap / anchors.len() as f64)
}

/// `L = L_solver + alpha * L_cl` for one batch; the solver term is averaged
/// over anchors.
pub fn batch_loss(
    params: &EncoderParams,
    batch: &[EncodedTriplet],
    config: &TrainConfig,
) -> Result<LossParts, TrainError> {
    Ok(batch_loss_and_grad(params, batch, config)?.0)
}

pub fn batch_loss_and_grad(
    params: &EncoderParams,
    batch: &[EncodedTriplet],
    config: &TrainConfig,
) -> Result<(LossParts, Gradients), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::NoTriplets);
    }
    let d = params.dim();
    let k = params.num_classes();
    let n = batch.len() as f64;
    let (xa, xp, xn) = forward(params, batch);

    let mut grad = Gradients {
        embed: vec![0.0; params.embed.len()],
        classifier: vec![0.0; params.classifier.len()],
    };
    let mut dxa = vec![vec![0.0; d]; batch.len()];

    let mut solver = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let (l, dz) = softmax_cross_entropy(&params.logits(&xa[i]), t.label);
        solver += l / n;
        for r in 0..d {
            let w = &params.classifier[r * k..(r + 1) * k];
            let gw = &mut grad.classifier[r * k..(r + 1) * k];
            for c in 0..k {
                gw[c] += xa[i][r] * dz[c] / n;
                dxa[i][r] += w[c] * dz[c] / n;
            }
        }
    }

    let nce = info_nce_with_grad(&xa, &xp, &xn, config.tau)?;
    let gap = batch_gap(&xa, &xp, &xn)?;

    // mean pooling: each token row receives dx / len per occurrence
    let mut scatter = |ids: &[usize], dx: &[f64], weight: f64| {
        let s = weight / ids.len() as f64;
        for &tok in ids {
            for (g, v) in grad.embed[tok * d..(tok + 1) * d].iter_mut().zip(dx) {
                *g += s * v;
            }
        }
    };
    for (i, t) in batch.iter().enumerate() {
        scatter(&t.anchor, &dxa[i], 1.0);
        scatter(&t.anchor, &nce.anchors[i], config.alpha);
        scatter(&t.positive, &nce.positives[i], config.alpha);
        scatter(&t.negative, &nce.negatives[i], config.alpha);
    }

    let parts = LossParts {
        total: solver + config.alpha * nce.loss,
        solver,
        contrastive: nce.loss,
        gap,
    };
    Ok((parts, grad))
}

/// One plain SGD step in place.
pub fn train_step(
    params: &mut EncoderParams,
    batch: &[EncodedTriplet],
    config: &TrainConfig,
    step: usize,
) -> Result<LossParts, TrainError> {
    let (parts, grad) = batch_loss_and_grad(params, batch, config)?;
    if !grad.is_finite() || !parts.total.is_finite() {
        return Err(TrainError::NonFiniteGradient(step));
    }
    let lr = config.learning_rate;
    for (w, g) in params.embed.iter_mut().zip(&grad.embed) {
        *w -= lr * g;
    }
    for (w, g) in params.classifier.iter_mut().zip(&grad.classifier) {
        *w -= lr * g;
    }
    Ok(parts)
}

/// Runs `config.steps` SGD steps. Triplets keep their input order and are
/// reshuffled with the seeded generator at the start of every epoch.
pub fn train(
    params: &mut EncoderParams,
    triplets: &[EncodedTriplet],
    config: &TrainConfig,
) -> Result<Vec<StepMetrics>, TrainError> {
    config.validate()?;
    if triplets.is_empty() {
        return Err(TrainError::NoTriplets);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut cursor = 0;
    let mut metrics = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        if cursor == 0 {
            order.shuffle(&mut rng);
        }
        let end = (cursor + config.batch_size).min(order.len());
        let batch: Vec<EncodedTriplet> = order[cursor..end].iter().map(|&i| triplets[i].clone()).collect();
        cursor = if end == order.len() { 0 } else { end };
        let parts = train_step(params, &batch, config, step)?;
        log::debug!("step {step}: L={:.6} gap={:.4}", parts.total, parts.gap);
        metrics.push(StepMetrics {
            step,
            loss: parts.total,
            solver: parts.solver,
            contrastive: parts.contrastive,
            gap: parts.gap,
        });
    }
    Ok(metrics)
}

fn normalized(v: Vec<f64>) -> Result<Vec<f64>, TrainError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(TrainError::ZeroVector);
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Representation diagnostics: cosine gap over `triplets` and the share of
/// `records` whose nearest other record (by cosine) shares its template.
pub fn eval_representation(
    records: &[ProblemRecord],
    triplets: &[TripletPair],
    params: &EncoderParams,
) -> Result<EvalMetrics, TrainError> {
    if triplets.is_empty() {
        return Err(TrainError::NoTriplets);
    }
    let by_id = record_map(records);
    let unit: HashMap<&str, Vec<f64>> = records
        .iter()
        .map(|r| Ok((r.id.as_str(), normalized(params.encode(r)?)?)))
        .collect::<Result<_, TrainError>>()?;
    let vec_of = |id: &str| {
        unit.get(id)
            .ok_or_else(|| TrainError::UnknownRecord(id.to_string()))
    };

    let (mut pos, mut neg) = (0.0, 0.0);
    for t in triplets {
        let a = vec_of(&t.anchor_id)?;
        pos += dot(a, vec_of(&t.positive_id)?);
        neg += dot(a, vec_of(&t.negative_id)?);
    }
    let m = triplets.len() as f64;
    let (mean_pos_cos, mean_neg_cos) = (pos / m, neg / m);

    let ordered: Vec<(&Vec<f64>, String)> = records
        .iter()
        .map(|r| (&unit[r.id.as_str()], by_id[r.id.as_str()].template_key()))
        .collect();
    let hits: usize = (0..ordered.len())
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(usize, f64)> = None;
            for (j, (v, _)) in ordered.iter().enumerate() {
                if j == i {
                    continue;
                }
                let s = dot(ordered[i].0, v);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
            best.is_some_and(|(j, _)| ordered[j].1 == ordered[i].1) as usize
        })
        .sum();
    let retrieval_at_1 = if ordered.len() < 2 {
        0.0
    } else {
        hits as f64 / ordered.len() as f64
    };
    Ok(EvalMetrics {
        mean_pos_cos,
        mean_neg_cos,
        gap: mean_pos_cos - mean_neg_cos,
        retrieval_at_1,
    })
}

pub fn embedding_table(records: &[ProblemRecord], params: &EncoderParams) -> Result<EmbeddingTable, TrainError> {
    let mut table = EmbeddingTable::new(params.dim());
    for r in records {
        table
            .insert(r.id.clone(), params.encode(r)?)
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    }
    Ok(table)
}

/// Writes one embedding line per record after an optional header line.
pub fn dump_embeddings(
    records: &[ProblemRecord],
    params: &EncoderParams,
    path: impl AsRef<Path>,
    header: Option<&str>,
) -> Result<(), TrainError> {
    let mut text = String::new();
    if let Some(h) = header {
        text.push_str(h);
        text.push('\n');
    }
    text.push_str(&embedding_table(records, params)?.to_text());
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, vocab: usize, k: usize, seed: u64) -> EncoderParams {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EncoderParams::from_parts(
            (0..vocab).map(|i| format!("t{i}")).collect(),
            (0..k).map(|i| format!("c{i}")).collect(),
            d,
            (0..vocab * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..d * k).map(|_| rng.random_range(-1.0..1.0)).collect(),
            seed,
        )
    }

    fn batch() -> Vec<EncodedTriplet> {
        vec![
            EncodedTriplet { anchor: vec![1, 2, 3], positive: vec![2, 4], negative: vec![1, 5], label: 0 },
            EncodedTriplet { anchor: vec![4, 4, 6], positive: vec![0, 6], negative: vec![7], label: 1 },
            EncodedTriplet { anchor: vec![5], positive: vec![3, 2, 1], negative: vec![6, 7], label: 2 },
        ]
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut p = params(8, 8, 3, 1);
        let before = p.clone();
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        let parts = train_step(&mut p, &batch(), &cfg, 0).unwrap();
        assert_eq!(p, before);
        assert!(parts.total > 0.0 && parts.solver > 0.0 && parts.contrastive > 0.0);
    }

    #[test]
    fn alpha_zero_is_solver_only() {
        let p = params(8, 8, 3, 2);
        let cfg = TrainConfig { alpha: 0.0, ..TrainConfig::default() };
        let (parts, grad) = batch_loss_and_grad(&p, &batch(), &cfg).unwrap();
        assert_eq!(parts.total, parts.solver);
        // the negatives' tokens 7 only appear in negatives: no gradient
        assert!(grad.embed[7 * 8..8 * 8].iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_difference_spot_check() {
        let p = params(8, 8, 3, 3);
        let cfg = TrainConfig::default();
        let (_, grad) = batch_loss_and_grad(&p, &batch(), &cfg).unwrap();
        let eps = 1e-5;
        for idx in [0, 13, 33, 60] {
            let mut hi = p.clone();
            hi.embed[idx] += eps;
            let mut lo = p.clone();
            lo.embed[idx] -= eps;
            let fd = (batch_loss(&hi, &batch(), &cfg).unwrap().total
                - batch_loss(&lo, &batch(), &cfg).unwrap().total)
                / (2.0 * eps);
            assert!((fd - grad.embed[idx]).abs() <= 1e-6 * fd.abs().max(1.0), "{idx}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig { steps: 10, batch_size: 2, ..TrainConfig::default() };
        let mut a = params(8, 8, 3, 4);
        let mut b = a.clone();
        let ma = train(&mut a, &batch(), &cfg).unwrap();
        let mb = train(&mut b, &batch(), &cfg).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(a, b);
        assert!(ma.last().unwrap().loss < ma[0].loss);
    }
}
