//! Self-supervised augmentation with synchronized text and equation edits.
//!
//! * Question reordering (QR) moves the question sentence to the front and
//!   renumbers slots by their new order of appearance.
//! * Reversed-operation augmentation (RODA) turns a given quantity into the
//!   unknown: its sentence becomes the question, the old question becomes a
//!   statement of the old answer, and the equation is solved for the chosen
//!   slot.
//!
//! Text rewriting is rule based (marker lexicon plus sentence swap); only the
//! equation side is guaranteed to be semantically exact.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::text::{contains_cjk, is_sentence_end};
use crate::corpus::{CorpusError, Lexicon, Origin, ProblemRecord};
use crate::equation::{parse_slot_token, EquationTree, Leaf, Operator, SlotId, Slots};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("record has a single sentence")]
    SingleSentence,
    #[error("target {0} does not occur")]
    TargetAbsent(SlotId),
    #[error("target {0} occurs more than once in the equation")]
    TargetRepeated(SlotId),
    #[error("path to target {0} crosses `^`")]
    NonInvertible(SlotId),
    #[error("target {0} occurs more than once in the text")]
    AmbiguousSentence(SlotId),
    #[error("target {0} only occurs in the question sentence")]
    TargetInQuestion(SlotId),
    #[error("inverse for target {0} is undefined at the record's values")]
    Undefined(SlotId),
    #[error("augmented record is invalid: {0}")]
    Invalid(String),
    #[error("requested {requested} augments, only {available} available")]
    InsufficientAugments { requested: usize, available: usize },
}

impl From<CorpusError> for AugmentError {
    fn from(e: CorpusError) -> Self {
        AugmentError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AugmentMethod {
    #[serde(rename = "QR")]
    Qr,
    #[serde(rename = "RODA")]
    Roda,
}

impl fmt::Display for AugmentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AugmentMethod::Qr => "QR",
            AugmentMethod::Roda => "RODA",
        })
    }
}

impl std::str::FromStr for AugmentMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qr" => Ok(AugmentMethod::Qr),
            "roda" => Ok(AugmentMethod::Roda),
            other => Err(format!("unknown augment method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AugmentedWire", into = "AugmentedWire")]
pub struct AugmentedRecord {
    pub base_id: String,
    pub method: AugmentMethod,
    pub record: ProblemRecord,
    /// Old slot → new slot for every slot that survives in the new text.
    pub slot_permutation: BTreeMap<SlotId, SlotId>,
    /// RODA only: the slot that became the unknown.
    pub target_var: Option<SlotId>,
    /// RODA only: the new slot holding the original answer.
    pub answer_slot: Option<SlotId>,
}

#[derive(Serialize, Deserialize)]
struct AugmentedWire {
    #[serde(flatten)]
    record: ProblemRecord,
    base_id: String,
    method: AugmentMethod,
    slot_permutation: Vec<(SlotId, SlotId)>,
    target_var: Option<SlotId>,
    #[serde(default)]
    answer_slot: Option<SlotId>,
}

impl TryFrom<AugmentedWire> for AugmentedRecord {
    type Error = String;

    fn try_from(w: AugmentedWire) -> Result<Self, Self::Error> {
        let n = w.slot_permutation.len();
        let slot_permutation: BTreeMap<_, _> = w.slot_permutation.into_iter().collect();
        if slot_permutation.len() != n {
            return Err("duplicate keys in slot_permutation".into());
        }
        Ok(AugmentedRecord {
            base_id: w.base_id,
            method: w.method,
            record: w.record,
            slot_permutation,
            target_var: w.target_var,
            answer_slot: w.answer_slot,
        })
    }
}

impl From<AugmentedRecord> for AugmentedWire {
    fn from(a: AugmentedRecord) -> Self {
        AugmentedWire {
            record: a.record,
            base_id: a.base_id,
            method: a.method,
            slot_permutation: a.slot_permutation.into_iter().collect(),
            target_var: a.target_var,
            answer_slot: a.answer_slot,
        }
    }
}

impl AugmentedRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("augment serialization is infallible")
    }
}

/// Placeholder for the answer slot before renumbering.
const ANSWER_PLACEHOLDER: SlotId = SlotId(0);

/// Renumbers slot tokens by first appearance. Returns old → new.
fn renumber(sentences: &mut [Vec<String>]) -> BTreeMap<SlotId, SlotId> {
    let mut mapping = BTreeMap::new();
    let mut next = 1;
    for tok in sentences.iter_mut().flatten() {
        if let Some(old) = parse_slot_token(tok) {
            let new = *mapping.entry(old).or_insert_with(|| {
                let s = SlotId(next);
                next += 1;
                s
            });
            *tok = new.to_string();
        }
    }
    mapping
}

fn remap_slots(slots: &Slots, mapping: &BTreeMap<SlotId, SlotId>) -> Slots {
    slots
        .iter()
        .filter_map(|(old, v)| mapping.get(old).map(|new| (*new, *v)))
        .collect()
}

/// Moves the question to the front: `{Q, S1, ..., S(k-1)}`.
pub fn question_reorder(r: &ProblemRecord) -> Result<AugmentedRecord, AugmentError> {
    if r.sentences.len() < 2 {
        return Err(AugmentError::SingleSentence);
    }
    let mut sentences = Vec::with_capacity(r.sentences.len());
    sentences.push(r.sentences[r.question_index].clone());
    sentences.extend(
        r.sentences
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != r.question_index)
            .map(|(_, s)| s.clone()),
    );
    let mapping = renumber(&mut sentences);
    let record = ProblemRecord {
        id: format!("{}#qr", r.id),
        sentences,
        question_index: 0,
        slots: remap_slots(&r.slots, &mapping),
        equation: r.equation.rename_slots(&mapping),
        answer: r.answer,
        origin: Origin::AugQr,
    };
    record.validate()?;
    Ok(AugmentedRecord {
        base_id: r.id.clone(),
        method: AugmentMethod::Qr,
        record,
        slot_permutation: mapping,
        target_var: None,
        answer_slot: None,
    })
}

/// Solves `ans = tree` for `target`, which must occur exactly once, by
/// inverting each operator on the root-to-target path.
pub fn invert_equation(tree: &EquationTree, target: SlotId) -> Result<EquationTree, AugmentError> {
    match tree.count_slot(target) {
        0 => return Err(AugmentError::TargetAbsent(target)),
        1 => {}
        _ => return Err(AugmentError::TargetRepeated(target)),
    }
    let mut rhs = EquationTree::ans();
    let mut node = tree;
    loop {
        match node {
            EquationTree::Leaf(_) => return Ok(rhs),
            EquationTree::Node { op, left, right } => {
                let in_left = left.count_slot(target) == 1;
                let (l, r) = (left.as_ref().clone(), right.as_ref().clone());
                use Operator::*;
                rhs = match (op, in_left) {
                    // x = a + b  →  a = x - b,  b = x - a
                    (Add, true) => EquationTree::node(Sub, rhs, r),
                    (Add, false) => EquationTree::node(Sub, rhs, l),
                    // x = a - b  →  a = x + b,  b = a - x
                    (Sub, true) => EquationTree::node(Add, rhs, r),
                    (Sub, false) => EquationTree::node(Sub, l, rhs),
                    // x = a * b  →  a = x / b,  b = x / a
                    (Mul, true) => EquationTree::node(Div, rhs, r),
                    (Mul, false) => EquationTree::node(Div, rhs, l),
                    // x = a / b  →  a = x * b,  b = a / x
                    (Div, true) => EquationTree::node(Mul, rhs, r),
                    (Div, false) => EquationTree::node(Div, l, rhs),
                    (Pow, _) => return Err(AugmentError::NonInvertible(target)),
                };
                node = if in_left { left } else { right };
            }
        }
    }
}

fn terminal(cjk: bool, question: bool) -> String {
    match (cjk, question) {
        (true, true) => "？",
        (true, false) => "。",
        (false, true) => "?",
        (false, false) => ".",
    }
    .to_string()
}

fn strip_terminal(sentence: &mut Vec<String>) {
    if sentence.last().is_some_and(|t| is_sentence_end(t)) {
        sentence.pop();
    }
}

/// Asks about `target` instead of the original unknown.
pub fn roda_augment(
    r: &ProblemRecord,
    target: SlotId,
    lexicon: &Lexicon,
) -> Result<AugmentedRecord, AugmentError> {
    let inverted = invert_equation(&r.equation, target)?;

    let target_token = target.to_string();
    let hits: Vec<(usize, usize)> = r
        .sentences
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            s.iter()
                .enumerate()
                .filter(|(_, t)| **t == target_token)
                .map(move |(ti, _)| (si, ti))
        })
        .collect();
    let (si, ti) = match hits.as_slice() {
        [] => return Err(AugmentError::TargetAbsent(target)),
        [one] => *one,
        _ => return Err(AugmentError::AmbiguousSentence(target)),
    };
    if si == r.question_index {
        return Err(AugmentError::TargetInQuestion(target));
    }

    let cjk = contains_cjk(&r.flat_tokens());
    let (phrase, _) = lexicon.question_phrase(cjk);

    // S_i → question about the target
    let mut new_question = r.sentences[si].clone();
    new_question.splice(ti..=ti, phrase);
    strip_terminal(&mut new_question);
    new_question.push(terminal(cjk, true));

    // Q → statement of the old answer
    let mut statement = r.sentences[r.question_index].clone();
    strip_terminal(&mut statement);
    let answer_token = ANSWER_PLACEHOLDER.to_string();
    match lexicon.find_marker(&statement) {
        Some((start, len)) => {
            statement.splice(start..start + len, [answer_token]);
        }
        None => statement.push(answer_token),
    }
    statement.push(terminal(cjk, false));

    let mut sentences: Vec<Vec<String>> = Vec::with_capacity(r.sentences.len());
    for (i, s) in r.sentences.iter().enumerate() {
        if i == r.question_index {
            continue;
        }
        sentences.push(if i == si { statement.clone() } else { s.clone() });
    }
    sentences.push(new_question);
    let question_index = sentences.len() - 1;

    let mapping = renumber(&mut sentences);
    let answer_slot = mapping[&ANSWER_PLACEHOLDER];
    let mut slots = remap_slots(&r.slots, &mapping);
    slots.insert(answer_slot, r.answer);

    let equation = inverted
        .map_leaves(|leaf| match leaf {
            Leaf::Ans => EquationTree::Leaf(Leaf::Slot(ANSWER_PLACEHOLDER)),
            other => EquationTree::Leaf(*other),
        })
        .rename_slots(&mapping);

    let record = ProblemRecord {
        id: format!("{}#roda-{}", r.id, target),
        sentences,
        question_index,
        slots,
        equation,
        answer: r.slots[&target],
        origin: Origin::AugRoda,
    };
    if record.equation.evaluate(&record.slots).is_err() {
        return Err(AugmentError::Undefined(target));
    }
    record.validate()?;

    let mut slot_permutation = mapping;
    slot_permutation.remove(&ANSWER_PLACEHOLDER);
    Ok(AugmentedRecord {
        base_id: r.id.clone(),
        method: AugmentMethod::Roda,
        record,
        slot_permutation,
        target_var: Some(target),
        answer_slot: Some(answer_slot),
    })
}

/// Every successful RODA augment of `r`, in slot order.
pub fn roda_all_targets(r: &ProblemRecord, lexicon: &Lexicon) -> Vec<AugmentedRecord> {
    r.slots
        .keys()
        .filter_map(|s| roda_augment(r, *s, lexicon).ok())
        .collect()
}

/// Which RODA targets to emit per record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RodaTargets {
    All,
    /// One eligible target per record, chosen with the seeded RNG.
    RandomOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSettings {
    pub methods: Vec<AugmentMethod>,
    pub roda_targets: RodaTargets,
    pub seed: u64,
    pub lexicon: Lexicon,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        AugmentSettings {
            methods: vec![AugmentMethod::Qr, AugmentMethod::Roda],
            roda_targets: RodaTargets::All,
            seed: 0,
            lexicon: Lexicon::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentReport {
    pub augments: Vec<AugmentedRecord>,
    pub records: usize,
    pub qr_success: usize,
    /// Records with at least one eligible RODA target.
    pub roda_covered: usize,
}

impl AugmentReport {
    pub fn roda_coverage(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.roda_covered as f64 / self.records as f64
        }
    }
}

fn record_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a over the id, mixed with the run seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h ^ seed.rotate_left(17)
}

/// Augments every record. Output order follows the input order, QR before
/// RODA, RODA targets ascending.
pub fn augment_records(records: &[ProblemRecord], settings: &AugmentSettings) -> AugmentReport {
    let want_qr = settings.methods.contains(&AugmentMethod::Qr);
    let want_roda = settings.methods.contains(&AugmentMethod::Roda);
    let per_record: Vec<(Option<AugmentedRecord>, Vec<AugmentedRecord>)> = records
        .par_iter()
        .map(|r| {
            let qr = if want_qr { question_reorder(r).ok() } else { None };
            let mut roda = if want_roda {
                roda_all_targets(r, &settings.lexicon)
            } else {
                Vec::new()
            };
            if settings.roda_targets == RodaTargets::RandomOne && roda.len() > 1 {
                let mut rng = ChaCha8Rng::seed_from_u64(record_seed(settings.seed, &r.id));
                let pick = sample(&mut rng, roda.len(), 1).index(0);
                roda = vec![roda.swap_remove(pick)];
            }
            (qr, roda)
        })
        .collect();

    let mut report = AugmentReport {
        augments: Vec::new(),
        records: records.len(),
        qr_success: 0,
        roda_covered: 0,
    };
    for (qr, roda) in per_record {
        if let Some(q) = qr {
            report.qr_success += 1;
            report.augments.push(q);
        }
        if !roda.is_empty() {
            report.roda_covered += 1;
        }
        report.augments.extend(roda);
    }
    report
}

/// Seeded sample of `size` successful augments.
pub fn generate_challenge_set(
    records: &[ProblemRecord],
    seed: u64,
    size: usize,
    settings: &AugmentSettings,
) -> Result<Vec<AugmentedRecord>, AugmentError> {
    if size == 0 {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<&ProblemRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let owned: Vec<ProblemRecord> = sorted.into_iter().cloned().collect();
    let pool = augment_records(&owned, settings).augments;
    if pool.len() < size {
        return Err(AugmentError::InsufficientAugments {
            requested: size,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, pool.len(), size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}
