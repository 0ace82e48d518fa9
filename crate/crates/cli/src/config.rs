//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! malformed values are configuration errors. Command-line overrides are
//! applied on top of the file in the order given.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use mwpcl_core::augment::{AugmentMethod, RodaTargets};
use mwpcl_core::corpus::Origin;
use mwpcl_core::retrieval::{EqStrategy, RetrievalConfig, TextMetric};
use mwpcl_core::TrainConfig;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Every recognised key with its help text.
pub const KEYS: &[(&str, &str)] = &[
    ("raw", "raw problems (JSON lines: id, text, equation, answer)"),
    ("corpus", "canonical training corpus"),
    ("augments", "augmented records added to the candidate pool"),
    ("dev", "held-out corpus (challenge set source, grid evaluation)"),
    ("matrix", "precomputed template similarity matrix"),
    ("embeddings", "external sentence embeddings (`id v1 ... vd` lines)"),
    ("triplets", "retrieved triplets"),
    ("checkpoint", "encoder checkpoint"),
    ("output_dir", "directory for artifacts (default `.`)"),
    ("ingest.origin", "origin tag for ingested records: train|dev|test"),
    ("ingest.strict_question", "reject problems without an interrogative marker"),
    ("ingest.constants", "comma-separated numerals allowed in equations without a text slot"),
    ("augment.methods", "comma-separated subset of qr,roda"),
    ("augment.roda_targets", "all|random-one"),
    ("augment.seed", "seed for random-one target choice"),
    ("challenge.size", "number of augments in the challenge set"),
    ("challenge.seed", "sampling seed for the challenge set"),
    ("retrieval.eq_strategy", "em|nn"),
    ("retrieval.text_metric", "random|embedding-cos|bi-bleu"),
    ("retrieval.seed", "seed for the random text metric"),
    ("retrieval.augments_as_anchors", "also retrieve triplets for augmented records"),
    ("train.tau", "InfoNCE temperature"),
    ("train.alpha", "contrastive loss weight in [0, 1]"),
    ("train.batch_size", "triplets per step"),
    ("train.learning_rate", "SGD step size"),
    ("train.steps", "number of SGD steps"),
    ("train.dim", "embedding width"),
    ("train.top_k", "template classes for the solver stand-in"),
    ("train.seed", "initialisation and shuffling seed"),
    ("train.include_augments_as_anchors", "train on triplets anchored at augments"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub raw: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub augments: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub triplets: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub origin: Origin,
    pub strict_question: bool,
    pub constants: Vec<f64>,
    pub methods: Vec<AugmentMethod>,
    pub roda_targets: RodaTargets,
    pub augment_seed: u64,
    pub challenge_size: usize,
    pub challenge_seed: u64,
    pub retrieval: RetrievalConfig,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            raw: None,
            corpus: None,
            augments: None,
            dev: None,
            matrix: None,
            embeddings: None,
            triplets: None,
            checkpoint: None,
            output_dir: PathBuf::from("."),
            origin: Origin::Train,
            strict_question: false,
            constants: vec![1.0],
            methods: vec![AugmentMethod::Qr, AugmentMethod::Roda],
            roda_targets: RodaTargets::All,
            augment_seed: 0,
            challenge_size: 100,
            challenge_seed: 0,
            retrieval: RetrievalConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_enum<T: FromStr<Err = String>>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|e| CliError::Config(format!("`{key}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("`{key}`: empty list")));
    }
    Ok(items)
}

fn origin_from(value: &str) -> Result<Origin, CliError> {
    match value {
        "train" => Ok(Origin::Train),
        "dev" => Ok(Origin::Dev),
        "test" => Ok(Origin::Test),
        _ => Err(CliError::Config(format!("`ingest.origin`: expected train|dev|test, got `{value}`"))),
    }
}

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let path = || Some(PathBuf::from(value));
        match key {
            "raw" => self.raw = path(),
            "corpus" => self.corpus = path(),
            "augments" => self.augments = path(),
            "dev" => self.dev = path(),
            "matrix" => self.matrix = path(),
            "embeddings" => self.embeddings = path(),
            "triplets" => self.triplets = path(),
            "checkpoint" => self.checkpoint = path(),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "ingest.origin" => self.origin = origin_from(value)?,
            "ingest.strict_question" => self.strict_question = parse_bool(key, value)?,
            "ingest.constants" => {
                self.constants = parse_list(key, value, |v| parse_value(key, v))?;
            }
            "augment.methods" => self.methods = parse_list(key, value, |v| parse_enum(key, v))?,
            "augment.roda_targets" => {
                self.roda_targets = match value {
                    "all" => RodaTargets::All,
                    "random-one" => RodaTargets::RandomOne,
                    _ => return Err(CliError::Config(format!("`{key}`: expected all|random-one"))),
                }
            }
            "augment.seed" => self.augment_seed = parse_value(key, value)?,
            "challenge.size" => self.challenge_size = parse_value(key, value)?,
            "challenge.seed" => self.challenge_seed = parse_value(key, value)?,
            "retrieval.eq_strategy" => self.retrieval.eq_strategy = parse_enum::<EqStrategy>(key, value)?,
            "retrieval.text_metric" => self.retrieval.text_metric = parse_enum::<TextMetric>(key, value)?,
            "retrieval.seed" => self.retrieval.seed = parse_value(key, value)?,
            "retrieval.augments_as_anchors" => self.retrieval.augments_as_anchors = parse_bool(key, value)?,
            "train.tau" => self.train.tau = parse_value(key, value)?,
            "train.alpha" => self.train.alpha = parse_value(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_value(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse_value(key, value)?,
            "train.steps" => self.train.steps = parse_value(key, value)?,
            "train.dim" => self.train.dim = parse_value(key, value)?,
            "train.top_k" => self.train.top_k = parse_value(key, value)?,
            "train.seed" => self.train.seed = parse_value(key, value)?,
            "train.include_augments_as_anchors" => {
                self.train.include_augments_as_anchors = parse_bool(key, value)?
            }
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = PipelineConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(config)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not `key=value`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for (key, path) in self.paths() {
            if let Some(p) = path {
                if !p.exists() && key != "checkpoint" && key != "triplets" {
                    return Err(CliError::Config(format!("`{key}`: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    fn paths(&self) -> [(&'static str, &Option<PathBuf>); 8] {
        [
            ("raw", &self.raw),
            ("corpus", &self.corpus),
            ("augments", &self.augments),
            ("dev", &self.dev),
            ("matrix", &self.matrix),
            ("embeddings", &self.embeddings),
            ("triplets", &self.triplets),
            ("checkpoint", &self.checkpoint),
        ]
    }

    /// Every setting as sorted `key=value` pairs.
    pub fn canonical(&self) -> BTreeMap<&'static str, String> {
        let mut out = BTreeMap::new();
        for (key, path) in self.paths() {
            out.insert(key, path.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        }
        let t = &self.train;
        let r = &self.retrieval;
        let join = |v: Vec<String>| v.join(",");
        let entries: [(&'static str, String); 22] = [
            ("output_dir", self.output_dir.display().to_string()),
            ("ingest.origin", self.origin.to_string()),
            ("ingest.strict_question", self.strict_question.to_string()),
            ("ingest.constants", join(self.constants.iter().map(f64::to_string).collect())),
            ("augment.methods", join(self.methods.iter().map(ToString::to_string).collect())),
            (
                "augment.roda_targets",
                match self.roda_targets {
                    RodaTargets::All => "all".into(),
                    RodaTargets::RandomOne => "random-one".into(),
                },
            ),
            ("augment.seed", self.augment_seed.to_string()),
            ("challenge.size", self.challenge_size.to_string()),
            ("challenge.seed", self.challenge_seed.to_string()),
            ("retrieval.eq_strategy", r.eq_strategy.to_string()),
            ("retrieval.text_metric", r.text_metric.to_string()),
            ("retrieval.seed", r.seed.to_string()),
            ("retrieval.augments_as_anchors", r.augments_as_anchors.to_string()),
            ("train.tau", t.tau.to_string()),
            ("train.alpha", t.alpha.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.steps", t.steps.to_string()),
            ("train.dim", t.dim.to_string()),
            ("train.top_k", t.top_k.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.include_augments_as_anchors", t.include_augments_as_anchors.to_string()),
        ];
        out.extend(entries);
        out
    }

    /// SHA-256 over the canonical settings. `output_dir` only decides where
    /// artifacts land, so it is left out.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical().into_iter().filter(|(k, _)| *k != "output_dir") {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}
