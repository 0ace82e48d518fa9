//! Two-step hard triplet retrieval.
//!
//! Step one works on templates: the similarity matrix over the pool's
//! distinct equations yields a positive and a negative candidate set per
//! anchor. Step two picks, by text similarity, the least similar positive
//! and the most similar negative. Every argmin/argmax tie is broken by the
//! lexicographically smallest record id, so results do not depend on pool
//! input order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProblemRecord;
use crate::similarity::{bi_bleu, cosine_similarity, EmbeddingTable, SimilarityError, SimilarityMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("duplicate record id `{0}` in pool")]
    DuplicateId(String),
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("template `{0}` missing from similarity matrix")]
    UnresolvedTemplate(String),
    #[error("no positive candidate for `{0}`")]
    NoPositive(String),
    #[error("no negative candidate for `{0}`")]
    NoNegative(String),
    #[error("no embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("embedding metric requested but no embedding table attached")]
    NoEmbeddingTable,
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EqStrategy {
    /// Exact match.
    #[serde(rename = "EM")]
    Em,
    /// Nearest neighbour.
    #[serde(rename = "NN")]
    Nn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TextMetric {
    Random,
    #[serde(rename = "EmbeddingCos")]
    EmbeddingCos,
    #[serde(rename = "BiBLEU")]
    BiBleu,
}

impl EqStrategy {
    pub const ALL: [EqStrategy; 2] = [EqStrategy::Em, EqStrategy::Nn];
}

impl TextMetric {
    pub const ALL: [TextMetric; 3] = [TextMetric::Random, TextMetric::EmbeddingCos, TextMetric::BiBleu];
}

impl fmt::Display for EqStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EqStrategy::Em => "EM",
            EqStrategy::Nn => "NN",
        })
    }
}

impl fmt::Display for TextMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextMetric::Random => "Random",
            TextMetric::EmbeddingCos => "EmbeddingCos",
            TextMetric::BiBleu => "BiBLEU",
        })
    }
}

impl std::str::FromStr for EqStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "em" => Ok(EqStrategy::Em),
            "nn" => Ok(EqStrategy::Nn),
            other => Err(format!("unknown equation strategy `{other}` (expected em|nn)")),
        }
    }
}

impl std::str::FromStr for TextMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "random" => Ok(TextMetric::Random),
            "embeddingcos" | "bertsim" | "cos" => Ok(TextMetric::EmbeddingCos),
            "bibleu" | "bleu" => Ok(TextMetric::BiBleu),
            other => Err(format!(
                "unknown text metric `{other}` (expected random|embedding-cos|bi-bleu)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletPair {
    pub anchor_id: String,
    pub positive_id: String,
    pub negative_id: String,
    pub eq_sim_pos: f64,
    pub eq_sim_neg: f64,
    pub text_sim_pos: f64,
    pub text_sim_neg: f64,
    pub eq_strategy: EqStrategy,
    /// Metric actually used; an embedding request may fall back to Bi-BLEU.
    pub text_metric: TextMetric,
}

impl TripletPair {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("triplet serialization is infallible")
    }
}

pub fn triplets_to_string(triplets: &[TripletPair]) -> String {
    let mut out = String::new();
    for t in triplets {
        out.push_str(&t.to_line());
        out.push('\n');
    }
    out
}

pub fn parse_triplets(text: &str) -> Result<Vec<TripletPair>, SimilarityError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SimilarityError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Training records plus augments, with the template similarity matrix.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    entries: Vec<ProblemRecord>,
    tokens: Vec<Vec<String>>,
    text_hash: Vec<u64>,
    template_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    matrix_index: Vec<usize>,
    matrix: SimilarityMatrix,
    embeddings: Option<EmbeddingTable>,
}

impl CandidatePool {
    /// Builds the pool and a matrix over its distinct templates.
    pub fn new(
        records: Vec<ProblemRecord>,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self, RetrievalError> {
        let mut templates: BTreeMap<String, crate::equation::EquationTree> = BTreeMap::new();
        for r in &records {
            templates
                .entry(r.template_key())
                .or_insert_with(|| r.equation.clone());
        }
        let trees: Vec<_> = templates.into_values().collect();
        let matrix = SimilarityMatrix::build(&trees)?;
        Self::with_matrix(records, matrix, embeddings)
    }

    /// Uses a precomputed matrix; every pool template must be in it.
    pub fn with_matrix(
        mut records: Vec<ProblemRecord>,
        matrix: SimilarityMatrix,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self, RetrievalError> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(RetrievalError::DuplicateId(w[0].id.clone()));
        }
        let mut key_to_template: BTreeMap<String, usize> = BTreeMap::new();
        let mut template_of = Vec::with_capacity(records.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut matrix_index = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let key = r.template_key();
            let t = match key_to_template.get(&key) {
                Some(&t) => t,
                None => {
                    let m = matrix
                        .index_of(&key)
                        .ok_or_else(|| RetrievalError::UnresolvedTemplate(key.clone()))?;
                    let t = members.len();
                    key_to_template.insert(key, t);
                    members.push(Vec::new());
                    matrix_index.push(m);
                    t
                }
            };
            template_of.push(t);
            members[t].push(i);
        }
        let tokens: Vec<Vec<String>> = records.iter().map(ProblemRecord::flat_tokens).collect();
        let text_hash = tokens
            .iter()
            .map(|t| {
                let mut h = std::collections::hash_map::DefaultHasher::new();
                t.hash(&mut h);
                h.finish()
            })
            .collect();
        Ok(CandidatePool {
            entries: records,
            tokens,
            text_hash,
            template_of,
            members,
            matrix_index,
            matrix,
            embeddings,
        })
    }

    pub fn entries(&self) -> &[ProblemRecord] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn matrix(&self) -> &SimilarityMatrix {
        &self.matrix
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entries.binary_search_by(|r| r.id.as_str().cmp(id)).ok()
    }

    pub fn tokens(&self, i: usize) -> &[String] {
        &self.tokens[i]
    }

    pub fn template_count(&self) -> usize {
        self.members.len()
    }

    /// Equation similarity between two entries.
    pub fn eq_sim(&self, a: usize, b: usize) -> f64 {
        self.template_sim(self.template_of[a], self.template_of[b])
    }

    fn template_sim(&self, ta: usize, tb: usize) -> f64 {
        self.matrix.get(self.matrix_index[ta], self.matrix_index[tb])
    }

    fn same_text(&self, a: usize, b: usize) -> bool {
        self.text_hash[a] == self.text_hash[b] && self.tokens[a] == self.tokens[b]
    }

    /// Templates (other than `excluded`) with the highest similarity to
    /// `anchor_template`, restricted to templates having a member that passes
    /// `keep`.
    fn argmax_templates(
        &self,
        anchor_template: usize,
        excluded: &HashSet<usize>,
        keep: impl Fn(usize) -> bool,
    ) -> Vec<usize> {
        let mut best = f64::NEG_INFINITY;
        let mut chosen = Vec::new();
        for t in 0..self.members.len() {
            if excluded.contains(&t) || !self.members[t].iter().any(|&m| keep(m)) {
                continue;
            }
            let s = self.template_sim(anchor_template, t);
            if s > best {
                best = s;
                chosen.clear();
                chosen.push(t);
            } else if s == best {
                chosen.push(t);
            }
        }
        chosen
    }

    /// Positive candidate set (entry indices, ascending id).
    pub fn positive_candidates(&self, anchor: usize, strategy: EqStrategy) -> Vec<usize> {
        let t = self.template_of[anchor];
        match strategy {
            EqStrategy::Em => self.members[t].clone(),
            EqStrategy::Nn => {
                let differs = |m: usize| !self.same_text(m, anchor);
                let templates = self.argmax_templates(t, &HashSet::new(), differs);
                let mut out: Vec<usize> = templates
                    .iter()
                    .flat_map(|&tt| self.members[tt].iter().copied())
                    .filter(|&m| differs(m))
                    .collect();
                out.sort_unstable();
                out
            }
        }
    }

    /// Negative candidate set (entry indices, ascending id).
    pub fn negative_candidates(
        &self,
        anchor: usize,
        strategy: EqStrategy,
        positives: &[usize],
    ) -> Result<Vec<usize>, RetrievalError> {
        let t = self.template_of[anchor];
        let mut excluded: HashSet<usize> = HashSet::from([t]);
        if strategy == EqStrategy::Nn {
            excluded.extend(positives.iter().map(|&p| self.template_of[p]));
        }
        let templates = self.argmax_templates(t, &excluded, |_| true);
        if templates.is_empty() {
            return Err(RetrievalError::NoNegative(self.entries[anchor].id.clone()));
        }
        let mut out: Vec<usize> = templates
            .iter()
            .flat_map(|&tt| self.members[tt].iter().copied())
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Text similarity under `metric` (Random is scored with Bi-BLEU).
    pub fn text_sim(&self, a: usize, b: usize, metric: TextMetric) -> Result<f64, RetrievalError> {
        match metric {
            TextMetric::Random | TextMetric::BiBleu => Ok(bi_bleu(&self.tokens[a], &self.tokens[b])?),
            TextMetric::EmbeddingCos => {
                let table = self.embeddings.as_ref().ok_or(RetrievalError::NoEmbeddingTable)?;
                let lookup = |i: usize| {
                    table
                        .get(&self.entries[i].id)
                        .ok_or_else(|| RetrievalError::MissingEmbedding(self.entries[i].id.clone()))
                };
                Ok(cosine_similarity(lookup(a)?, lookup(b)?)?)
            }
        }
    }

    fn has_embeddings(&self, ids: impl IntoIterator<Item = usize>) -> bool {
        match &self.embeddings {
            None => false,
            Some(table) => ids.into_iter().all(|i| table.contains(&self.entries[i].id)),
        }
    }

    /// Picks the hardest positive (lowest text similarity, anchor excluded
    /// unless alone) and hardest negative (highest text similarity).
    pub fn select_triplet(
        &self,
        anchor: usize,
        positives: &[usize],
        negatives: &[usize],
        strategy: EqStrategy,
        metric: TextMetric,
        seed: u64,
    ) -> Result<TripletPair, RetrievalError> {
        let anchor_id = &self.entries[anchor].id;
        let pos_pool: Vec<usize> = {
            let others: Vec<usize> = positives.iter().copied().filter(|&p| p != anchor).collect();
            if others.is_empty() {
                if positives.contains(&anchor) {
                    vec![anchor]
                } else {
                    return Err(RetrievalError::NoPositive(anchor_id.clone()));
                }
            } else {
                others
            }
        };
        if negatives.is_empty() {
            return Err(RetrievalError::NoNegative(anchor_id.clone()));
        }

        let (pos, text_sim_pos, neg, text_sim_neg) = if metric == TextMetric::Random {
            let mut rng = ChaCha8Rng::seed_from_u64(anchor_seed(seed, anchor_id));
            let p = *pos_pool.choose(&mut rng).expect("non-empty");
            let n = *negatives.choose(&mut rng).expect("non-empty");
            (
                p,
                self.text_sim(anchor, p, TextMetric::BiBleu)?,
                n,
                self.text_sim(anchor, n, TextMetric::BiBleu)?,
            )
        } else {
            // candidates are in ascending id order, strict comparison keeps
            // the smallest id on ties
            let mut best_pos = (pos_pool[0], self.text_sim(anchor, pos_pool[0], metric)?);
            for &p in &pos_pool[1..] {
                let s = self.text_sim(anchor, p, metric)?;
                if s < best_pos.1 {
                    best_pos = (p, s);
                }
            }
            let mut best_neg = (negatives[0], self.text_sim(anchor, negatives[0], metric)?);
            for &n in &negatives[1..] {
                let s = self.text_sim(anchor, n, metric)?;
                if s > best_neg.1 {
                    best_neg = (n, s);
                }
            }
            (best_pos.0, best_pos.1, best_neg.0, best_neg.1)
        };

        Ok(TripletPair {
            anchor_id: anchor_id.clone(),
            positive_id: self.entries[pos].id.clone(),
            negative_id: self.entries[neg].id.clone(),
            eq_sim_pos: self.eq_sim(anchor, pos),
            eq_sim_neg: self.eq_sim(anchor, neg),
            text_sim_pos,
            text_sim_neg,
            eq_strategy: strategy,
            text_metric: metric,
        })
    }

    /// Full two-step retrieval for one anchor, falling back to Bi-BLEU when
    /// an embedding is missing for any record involved.
    pub fn retrieve_one(
        &self,
        anchor: usize,
        config: &RetrievalConfig,
    ) -> Result<(TripletPair, bool), RetrievalError> {
        let positives = self.positive_candidates(anchor, config.eq_strategy);
        if positives.is_empty() {
            return Err(RetrievalError::NoPositive(self.entries[anchor].id.clone()));
        }
        let negatives = self.negative_candidates(anchor, config.eq_strategy, &positives)?;
        let mut metric = config.text_metric;
        let mut fell_back = false;
        if metric == TextMetric::EmbeddingCos {
            if self.embeddings.is_none() {
                return Err(RetrievalError::NoEmbeddingTable);
            }
            let involved = std::iter::once(anchor)
                .chain(positives.iter().copied())
                .chain(negatives.iter().copied());
            if !self.has_embeddings(involved) {
                log::debug!(
                    "anchor `{}`: missing embeddings, using Bi-BLEU",
                    self.entries[anchor].id
                );
                metric = TextMetric::BiBleu;
                fell_back = true;
            }
        }
        let triplet = self.select_triplet(
            anchor,
            &positives,
            &negatives,
            config.eq_strategy,
            metric,
            config.seed,
        )?;
        Ok((triplet, fell_back))
    }
}

fn anchor_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalConfig {
    pub eq_strategy: EqStrategy,
    pub text_metric: TextMetric,
    pub seed: u64,
    /// Also use augmented records as anchors.
    pub augments_as_anchors: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            eq_strategy: EqStrategy::Em,
            text_metric: TextMetric::BiBleu,
            seed: 0,
            augments_as_anchors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOutput {
    /// One triplet per successful anchor, ordered by anchor id.
    pub triplets: Vec<TripletPair>,
    pub failures: Vec<(String, RetrievalError)>,
    /// Anchors that fell back from embeddings to Bi-BLEU.
    pub fallbacks: Vec<String>,
}

/// Retrieves a triplet for every anchor; per-anchor errors are collected.
pub fn retrieve_all(pool: &CandidatePool, config: &RetrievalConfig) -> RetrievalOutput {
    let anchors: Vec<usize> = (0..pool.len())
        .filter(|&i| config.augments_as_anchors || !pool.entries[i].origin.is_augmented())
        .collect();
    let results: Vec<_> = anchors
        .par_iter()
        .map(|&a| (a, pool.retrieve_one(a, config)))
        .collect();
    let mut out = RetrievalOutput {
        triplets: Vec::new(),
        failures: Vec::new(),
        fallbacks: Vec::new(),
    };
    for (a, res) in results {
        match res {
            Ok((t, fell_back)) => {
                if fell_back {
                    out.fallbacks.push(t.anchor_id.clone());
                }
                out.triplets.push(t);
            }
            Err(e) => out.failures.push((pool.entries[a].id.clone(), e)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Origin};
    use crate::equation::{parse_equation, SlotId, Slots};

    fn rec(id: &str, text: &str, eq: &str) -> ProblemRecord {
        let equation = parse_equation(eq).unwrap();
        let n = equation.slots().len() as u32;
        let slots: Slots = (1..=n).map(|i| (SlotId(i), i as f64 + 1.0)).collect();
        let answer = equation.evaluate(&slots).unwrap();
        let mut sentence = tokenize(text);
        for i in 1..=n {
            sentence.push(format!("n{i}"));
        }
        sentence.push("?".into());
        ProblemRecord {
            id: id.into(),
            sentences: vec![sentence],
            question_index: 0,
            slots,
            equation,
            answer,
            origin: Origin::Train,
        }
    }

    fn pool() -> CandidatePool {
        CandidatePool::new(
            vec![
                rec("a", "apples and pears", "n1+n2"),
                rec("b", "fresh apples and pears", "n1+n2"),
                rec("c", "completely different words here", "n1+n2"),
                rec("d", "apples and pears", "n1*n2"),
                rec("e", "apples or pears", "n1*n2"),
                rec("f", "apples and pears too", "(n1+n2)+n3"),
            ],
            None,
        )
        .unwrap()
    }

    fn ids(pool: &CandidatePool, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| pool.entries()[i].id.clone()).collect()
    }

    #[test]
    fn exact_match_positives() {
        let p = pool();
        let a = p.index_of("a").unwrap();
        assert_eq!(ids(&p, &p.positive_candidates(a, EqStrategy::Em)), ["a", "b", "c"]);
    }

    #[test]
    fn exact_match_negatives_take_closest_template() {
        let p = pool();
        let a = p.index_of("a").unwrap();
        let pos = p.positive_candidates(a, EqStrategy::Em);
        let neg = p.negative_candidates(a, EqStrategy::Em, &pos).unwrap();
        // Sim(+,*) = 5/6 beats Sim(+, nested +) = 3/4
        assert_eq!(ids(&p, &neg), ["d", "e"]);
    }

    #[test]
    fn unique_template_anchor() {
        let p = pool();
        let f = p.index_of("f").unwrap();
        assert_eq!(ids(&p, &p.positive_candidates(f, EqStrategy::Em)), ["f"]);
        // nearest other template to (n1+n2)+n3 is n1+n2 (0.75) over n1*n2 (5/8)
        let nn = p.positive_candidates(f, EqStrategy::Nn);
        assert_eq!(ids(&p, &nn), ["a", "b", "c"]);
        let neg = p.negative_candidates(f, EqStrategy::Nn, &nn).unwrap();
        assert_eq!(ids(&p, &neg), ["d", "e"]);
        let t = p
            .select_triplet(f, &p.positive_candidates(f, EqStrategy::Em), &neg, EqStrategy::Em, TextMetric::BiBleu, 0)
            .unwrap();
        assert_eq!(t.positive_id, "f");
    }

    #[test]
    fn nn_excludes_identical_text() {
        let p = CandidatePool::new(
            vec![
                rec("a", "same words", "n1+n2"),
                rec("b", "same words", "n1+n2"),
                rec("c", "other words", "n1*n2"),
                rec("d", "more words", "n1-n2"),
            ],
            None,
        )
        .unwrap();
        let a = p.index_of("a").unwrap();
        // b shares text, so NN falls past the exact template
        let nn = p.positive_candidates(a, EqStrategy::Nn);
        assert_eq!(ids(&p, &nn), ["c", "d"]);
    }

    #[test]
    fn single_template_has_no_negative() {
        let p = CandidatePool::new(vec![rec("a", "x y", "n1+n2"), rec("b", "x z", "n1+n2")], None)
            .unwrap();
        let a = p.index_of("a").unwrap();
        let pos = p.positive_candidates(a, EqStrategy::Em);
        assert_eq!(
            p.negative_candidates(a, EqStrategy::Em, &pos),
            Err(RetrievalError::NoNegative("a".into()))
        );
    }

    #[test]
    fn hard_example_selection() {
        let p = pool();
        let a = p.index_of("a").unwrap();
        let out = p
            .retrieve_one(a, &RetrievalConfig::default())
            .unwrap()
            .0;
        assert_eq!(out.positive_id, "c");
        assert_eq!(out.negative_id, "d");
        assert_eq!(out.eq_sim_pos, 1.0);
        assert!(out.eq_sim_neg < 1.0);
        assert_eq!(out.text_sim_neg, 1.0);
    }

    #[test]
    fn embedding_selection_and_fallback() {
        let mut table = EmbeddingTable::new(2);
        // positives a, b, c with cos to a: b 0.9-ish, c 0.0
        for (id, v) in [
            ("a", [1.0, 0.0]),
            ("b", [0.9, 0.1]),
            ("c", [0.4, 0.6]),
            ("d", [0.0, 1.0]),
            ("e", [1.0, 0.05]),
            ("f", [1.0, 1.0]),
        ] {
            table.insert(id, v.to_vec()).unwrap();
        }
        let records = pool().entries().to_vec();
        let p = CandidatePool::new(records.clone(), Some(table.clone())).unwrap();
        let cfg = RetrievalConfig {
            text_metric: TextMetric::EmbeddingCos,
            ..RetrievalConfig::default()
        };
        let (t, fell_back) = p.retrieve_one(p.index_of("a").unwrap(), &cfg).unwrap();
        assert!(!fell_back);
        assert_eq!((t.positive_id.as_str(), t.negative_id.as_str()), ("c", "e"));

        let mut partial = EmbeddingTable::new(2);
        partial.insert("a", vec![1.0, 0.0]).unwrap();
        let p = CandidatePool::new(records, Some(partial)).unwrap();
        let (t, fell_back) = p.retrieve_one(p.index_of("a").unwrap(), &cfg).unwrap();
        assert!(fell_back);
        assert_eq!(t.text_metric, TextMetric::BiBleu);
    }

    #[test]
    fn random_metric_is_seeded() {
        let p = pool();
        let cfg = RetrievalConfig {
            text_metric: TextMetric::Random,
            seed: 11,
            ..RetrievalConfig::default()
        };
        let a = retrieve_all(&p, &cfg);
        let b = retrieve_all(&p, &cfg);
        assert_eq!(a, b);
        assert_eq!(a.triplets.len(), 6);
    }

    #[test]
    fn triplet_lines_round_trip() {
        let out = retrieve_all(&pool(), &RetrievalConfig::default());
        let text = triplets_to_string(&out.triplets);
        assert_eq!(parse_triplets(&text).unwrap(), out.triplets);
        assert!(text.contains(r#""eq_strategy":"EM","text_metric":"BiBLEU""#));
    }
}
