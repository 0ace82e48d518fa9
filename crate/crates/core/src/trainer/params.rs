use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::ProblemRecord;

use super::{TrainConfig, TrainError};

/// Vocabulary entry shared by every out-of-vocabulary token (index 0).
pub const UNK_TOKEN: &str = "<unk>";
/// Class label for templates outside the top K.
pub const OTHER_CLASS: &str = "<other>";

/// Token embeddings plus a linear template classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    classes: Vec<String>,
    class_index: HashMap<String, usize>,
    dim: usize,
    /// Row-major `vocab x dim`.
    pub embed: Vec<f64>,
    /// Row-major `dim x classes`.
    pub classifier: Vec<f64>,
    pub rng_seed: u64,
}

impl EncoderParams {
    /// Builds the vocabulary and class list from `records` and draws
    /// Gaussian weights from `config.seed`.
    pub fn init(records: &[ProblemRecord], config: &TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let tokens: BTreeSet<&str> = records
            .iter()
            .flat_map(|r| r.tokens().map(String::as_str))
            .collect();
        let vocab: Vec<String> = std::iter::once(UNK_TOKEN.to_string())
            .chain(tokens.into_iter().filter(|t| *t != UNK_TOKEN).map(str::to_string))
            .collect();

        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for r in records {
            *freq.entry(r.template_key()).or_default() += 1;
        }
        let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let overflow = ranked.len() > config.top_k;
        let mut classes: Vec<String> = ranked.into_iter().take(config.top_k).map(|(k, _)| k).collect();
        if overflow {
            classes.push(OTHER_CLASS.to_string());
        }
        if classes.len() < 2 {
            return Err(TrainError::InvalidConfig(format!(
                "need at least 2 template classes, found {}",
                classes.len()
            )));
        }

        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let embed = (0..vocab.len() * d).map(|_| unit.sample(&mut rng)).collect();
        let scale = 1.0 / (d as f64).sqrt();
        let classifier = (0..d * classes.len())
            .map(|_| unit.sample(&mut rng) * scale)
            .collect();
        Ok(Self::from_parts(vocab, classes, d, embed, classifier, config.seed))
    }

    pub(crate) fn from_parts(
        vocab: Vec<String>,
        classes: Vec<String>,
        dim: usize,
        embed: Vec<f64>,
        classifier: Vec<f64>,
        rng_seed: u64,
    ) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let class_index = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        EncoderParams {
            vocab,
            index,
            classes,
            class_index,
            dim,
            embed,
            classifier,
            rng_seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn token_index(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// Class of a template key; unknown templates map to the catch-all class
    /// when there is one.
    pub fn class_of(&self, template_key: &str) -> Option<usize> {
        self.class_index
            .get(template_key)
            .or_else(|| self.class_index.get(OTHER_CLASS))
            .copied()
    }

    pub fn embed_row(&self, token: usize) -> &[f64] {
        &self.embed[token * self.dim..(token + 1) * self.dim]
    }

    pub fn token_ids(&self, record: &ProblemRecord) -> Result<Vec<usize>, TrainError> {
        let ids: Vec<usize> = record.tokens().map(|t| self.token_index(t)).collect();
        if ids.is_empty() {
            return Err(TrainError::EmptyText(record.id.clone()));
        }
        Ok(ids)
    }

    /// Mean of the token embeddings.
    pub fn encode_ids(&self, ids: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &t in ids {
            for (o, e) in out.iter_mut().zip(self.embed_row(t)) {
                *o += e;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    pub fn encode(&self, record: &ProblemRecord) -> Result<Vec<f64>, TrainError> {
        Ok(self.encode_ids(&self.token_ids(record)?))
    }

    /// `classifier^T x`.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let k = self.classes.len();
        let mut z = vec![0.0; k];
        for (i, xi) in x.iter().enumerate() {
            for (zc, w) in z.iter_mut().zip(&self.classifier[i * k..(i + 1) * k]) {
                *zc += xi * w;
            }
        }
        z
    }

    /// Template-classification loss for one record.
    pub fn solver_standin_loss(&self, record: &ProblemRecord) -> Result<f64, TrainError> {
        let label = self.class_of(&record.template_key()).ok_or_else(|| {
            TrainError::InvalidConfig(format!("template of `{}` has no class", record.id))
        })?;
        let x = self.encode(record)?;
        Ok(super::softmax_cross_entropy(&self.logits(&x), label).0)
    }

    pub fn is_finite(&self) -> bool {
        self.embed.iter().chain(&self.classifier).all(|v| v.is_finite())
    }
}
