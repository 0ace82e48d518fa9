//! Problem records, raw ingestion and the canonical line-delimited format.
//!
//! One record per line, JSON, with keys in the fixed order
//! `id, sentences, question_index, slots, equation, answer, origin`.
//! `slots` is a list of `[slot, value]` pairs and `equation` the prefix token
//! list. Lines that are blank or start with `#` are skipped on load.

mod normalize;
pub mod text;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::equation::{parse_slot_token, EquationError, EquationTree, Leaf, SlotId, Slots};
use crate::numeric::{approx_eq, RECORD_TOLERANCE};

pub use normalize::{normalize_numbers, parse_numeral, NormalizeOptions, Normalized};
pub use text::{segment_sentences, tokenize, Lexicon, Segmented};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("empty text")]
    EmptyText,
    #[error("no interrogative sentence found")]
    NoQuestion,
    #[error("equation numeral `{0}` does not occur in the text")]
    UnmatchedNumeral(String),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("record `{id}` violates invariant: {which}")]
    InvariantViolation { id: String, which: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CorpusError {
    fn from(e: std::io::Error) -> Self {
        CorpusError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Train,
    Dev,
    Test,
    AugQr,
    AugRoda,
}

impl Origin {
    pub fn is_augmented(self) -> bool {
        matches!(self, Origin::AugQr | Origin::AugRoda)
    }

    pub fn name(self) -> &'static str {
        match self {
            Origin::Train => "train",
            Origin::Dev => "dev",
            Origin::Test => "test",
            Origin::AugQr => "aug_qr",
            Origin::AugRoda => "aug_roda",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "train" => Origin::Train,
            "dev" => Origin::Dev,
            "test" => Origin::Test,
            "aug_qr" => Origin::AugQr,
            "aug_roda" => Origin::AugRoda,
            other => return Err(format!("unknown origin `{other}`")),
        })
    }
}

/// One math word problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordWire", into = "RecordWire")]
pub struct ProblemRecord {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub question_index: usize,
    pub slots: Slots,
    pub equation: EquationTree,
    pub answer: f64,
    pub origin: Origin,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RecordWire {
    id: String,
    sentences: Vec<Vec<String>>,
    question_index: usize,
    slots: Vec<(SlotId, f64)>,
    equation: Vec<String>,
    answer: f64,
    origin: Origin,
}

impl TryFrom<RecordWire> for ProblemRecord {
    type Error = String;

    fn try_from(w: RecordWire) -> Result<Self, Self::Error> {
        let n = w.slots.len();
        let slots: Slots = w.slots.into_iter().collect();
        if slots.len() != n {
            return Err(format!("record `{}`: duplicate slot keys", w.id));
        }
        let equation = EquationTree::from_prefix(&w.equation)
            .map_err(|e| format!("record `{}`: equation: {e}", w.id))?;
        Ok(ProblemRecord {
            id: w.id,
            sentences: w.sentences,
            question_index: w.question_index,
            slots,
            equation,
            answer: w.answer,
            origin: w.origin,
        })
    }
}

impl From<ProblemRecord> for RecordWire {
    fn from(r: ProblemRecord) -> Self {
        RecordWire {
            equation: r.equation.to_prefix(),
            id: r.id,
            sentences: r.sentences,
            question_index: r.question_index,
            slots: r.slots.into_iter().collect(),
            answer: r.answer,
            origin: r.origin,
        }
    }
}

impl ProblemRecord {
    pub fn template_key(&self) -> String {
        self.equation.template_key()
    }

    /// All tokens, sentence by sentence.
    pub fn tokens(&self) -> impl Iterator<Item = &String> {
        self.sentences.iter().flatten()
    }

    pub fn flat_tokens(&self) -> Vec<String> {
        self.tokens().cloned().collect()
    }

    pub fn question(&self) -> &[String] {
        &self.sentences[self.question_index]
    }

    /// Slot tokens in order of first appearance in the text.
    pub fn slot_order(&self) -> Vec<SlotId> {
        let mut seen = HashSet::new();
        self.tokens()
            .filter_map(|t| parse_slot_token(t))
            .filter(|s| seen.insert(*s))
            .collect()
    }

    /// Checks every record invariant; the error names the violated one.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let violation = |which: &str| CorpusError::InvariantViolation {
            id: self.id.clone(),
            which: which.to_string(),
        };
        if self.sentences.is_empty() || self.sentences.iter().any(Vec::is_empty) {
            return Err(violation("empty sentence list or empty sentence"));
        }
        if self.question_index >= self.sentences.len() {
            return Err(violation("question_index out of range"));
        }
        let order = self.slot_order();
        let expected: Vec<SlotId> = (1..=order.len() as u32).map(SlotId).collect();
        if order != expected {
            return Err(violation("slots not numbered by first appearance"));
        }
        if !self.slots.keys().copied().eq(expected.iter().copied()) {
            return Err(violation("slot table does not match slots in text"));
        }
        let mut has_ans = false;
        self.equation.visit_leaves(&mut |l| has_ans |= *l == Leaf::Ans);
        if has_ans {
            return Err(violation("equation contains unresolved `ans`"));
        }
        if let Some(missing) = self.equation.slots().into_iter().find(|s| !self.slots.contains_key(s)) {
            return Err(violation(&format!("equation references unknown slot {missing}")));
        }
        match self.equation.evaluate(&self.slots) {
            Ok(v) if approx_eq(v, self.answer, RECORD_TOLERANCE) => Ok(()),
            Ok(v) => Err(violation(&format!(
                "equation evaluates to {v}, answer is {}",
                self.answer
            ))),
            Err(e) => Err(violation(&format!("equation does not evaluate: {e}"))),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }
}

/// Raw-ingest record: infix equation over literal numerals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub equation: String,
    #[serde(deserialize_with = "number_or_numeral")]
    pub answer: f64,
}

fn number_or_numeral<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    match NumOrStr::deserialize(d)? {
        NumOrStr::Num(v) => Ok(v),
        NumOrStr::Str(s) => parse_numeral(s.trim())
            .ok_or_else(|| serde::de::Error::custom(format!("not a numeral: `{s}`"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub normalize: NormalizeOptions,
    pub lexicon: Lexicon,
    pub strict_question: bool,
    pub origin: Origin,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            normalize: NormalizeOptions::default(),
            lexicon: Lexicon::default(),
            strict_question: false,
            origin: Origin::Train,
        }
    }
}

/// Normalizes, segments and validates one raw record.
pub fn ingest_raw(raw: &RawRecord, options: &IngestOptions) -> Result<ProblemRecord, CorpusError> {
    let normalized = normalize_numbers(&raw.text, &raw.equation, &options.normalize)?;
    if !normalized.inexact_fractions.is_empty() {
        log::warn!(
            "record `{}`: fractions {:?} slotted as inexact decimals",
            raw.id,
            normalized.inexact_fractions
        );
    }
    let seg = segment_sentences(&normalized.tokens, &options.lexicon, options.strict_question)?;
    let record = ProblemRecord {
        id: raw.id.clone(),
        sentences: seg.sentences,
        question_index: seg.question_index,
        slots: normalized.slots,
        equation: normalized.tree,
        answer: raw.answer,
        origin: options.origin,
    };
    record.validate()?;
    Ok(record)
}

/// Validated record collection indexed by template key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<ProblemRecord>,
    template_index: BTreeMap<String, Vec<String>>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, validating every record and id uniqueness.
    pub fn new(records: Vec<ProblemRecord>) -> Result<Self, CorpusError> {
        for r in &records {
            r.validate()?;
        }
        Self::new_unchecked_records(records)
    }

    fn new_unchecked_records(records: Vec<ProblemRecord>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(records.len());
        let mut template_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
            template_index
                .entry(r.template_key())
                .or_default()
                .push(r.id.clone());
        }
        Ok(Corpus {
            records,
            template_index,
            by_id,
        })
    }

    pub fn records(&self) -> &[ProblemRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ProblemRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ProblemRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn template_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.template_index
    }

    /// Distinct template trees, ordered by key.
    pub fn templates(&self) -> Vec<EquationTree> {
        self.template_index
            .values()
            .map(|ids| self.get(&ids[0]).expect("indexed id").equation.clone())
            .collect()
    }

    /// Canonical text: one JSON line per record.
    pub fn to_canonical_string(&self) -> String {
        records_to_string(&self.records)
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
            .collect();
        let records = lines
            .par_iter()
            .map(|&(line, l)| {
                let r: ProblemRecord = serde_json::from_str(l).map_err(|e| CorpusError::Parse {
                    line,
                    reason: e.to_string(),
                })?;
                r.validate()?;
                Ok(r)
            })
            .collect::<Result<Vec<_>, CorpusError>>()?;
        Self::new_unchecked_records(records)
    }
}

pub fn records_to_string(records: &[ProblemRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    Corpus::parse(&text)
}

/// Reads raw-ingest lines, skipping blanks and `#` comments.
pub fn parse_raw_records(text: &str) -> Result<Vec<RawRecord>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
