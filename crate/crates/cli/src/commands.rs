use std::path::{Path, PathBuf};

use mwpcl_core::augment::{augment_records, generate_challenge_set, AugmentSettings};
use mwpcl_core::corpus::{ingest_raw, parse_raw_records, IngestOptions, NormalizeOptions};
use mwpcl_core::retrieval::{parse_triplets, retrieve_all, triplets_to_string, RetrievalConfig};
use mwpcl_core::trainer::{self, encode_triplets, eval_representation, EvalMetrics};
use mwpcl_core::{
    AugmentedRecord, CandidatePool, Corpus, EmbeddingTable, EncoderParams, EqStrategy, ProblemRecord,
    SimilarityMatrix, TextMetric, TripletPair,
};

use crate::config::PipelineConfig;
use crate::error::CliError;

/// Provenance line that starts every artifact.
pub fn provenance(config: &PipelineConfig, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "# mwpcl {} config={} seed={}",
        env!("CARGO_PKG_VERSION"),
        config.hash(),
        seed
    )
}

fn write_artifact(path: &Path, header: &[String], body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = String::with_capacity(body.len() + 128);
    for h in header {
        text.push_str(h);
        text.push('\n');
    }
    text.push_str(body);
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn output_path(config: &PipelineConfig, explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| config.output_dir.join(default_name))
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("`{key}` is required for this command")))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    Corpus::parse(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_augments(path: &Path) -> Result<Vec<AugmentedRecord>, CliError> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Corpus records followed by augmented records, if configured.
fn pool_records(config: &PipelineConfig) -> Result<Vec<ProblemRecord>, CliError> {
    let mut records = load_corpus(required(&config.corpus, "corpus")?)?.into_records();
    if let Some(path) = &config.augments {
        records.extend(load_augments(path)?.into_iter().map(|a| a.record));
    }
    Ok(records)
}

fn load_embeddings(config: &PipelineConfig) -> Result<Option<EmbeddingTable>, CliError> {
    config
        .embeddings
        .as_deref()
        .map(|p| EmbeddingTable::load(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
        .transpose()
}

fn load_triplets(config: &PipelineConfig) -> Result<Vec<TripletPair>, CliError> {
    let path = required(&config.triplets, "triplets")?;
    parse_triplets(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_checkpoint(config: &PipelineConfig) -> Result<EncoderParams, CliError> {
    let path = required(&config.checkpoint, "checkpoint")?;
    EncoderParams::from_checkpoint(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn augment_settings(config: &PipelineConfig) -> AugmentSettings {
    AugmentSettings {
        methods: config.methods.clone(),
        roda_targets: config.roda_targets,
        seed: config.augment_seed,
        ..AugmentSettings::default()
    }
}

pub fn ingest(config: &PipelineConfig, skip_invalid: bool, output: Option<PathBuf>) -> Result<(), CliError> {
    let path = required(&config.raw, "raw")?;
    let raw = parse_raw_records(&read(path)?)?;
    let options = IngestOptions {
        normalize: NormalizeOptions {
            constants: config.constants.clone(),
        },
        strict_question: config.strict_question,
        origin: config.origin,
        ..IngestOptions::default()
    };
    let mut records = Vec::with_capacity(raw.len());
    let mut rejected = 0usize;
    for r in &raw {
        match ingest_raw(r, &options) {
            Ok(rec) => records.push(rec),
            Err(e) if skip_invalid => {
                log::warn!("record `{}` rejected: {e}", r.id);
                rejected += 1;
            }
            Err(e) => return Err(CliError::Data(format!("record `{}`: {e}", r.id))),
        }
    }
    let corpus = Corpus::new(records)?;
    log::info!(
        "ingested {} records ({} rejected, {} templates)",
        corpus.len(),
        rejected,
        corpus.template_index().len()
    );
    let mut header = vec![provenance(config, None)];
    if rejected > 0 {
        header.push(format!("# partial: rejected={rejected} of {}", raw.len()));
    }
    write_artifact(
        &output_path(config, output, "corpus.jsonl"),
        &header,
        &corpus.to_canonical_string(),
    )
}

pub fn simmatrix(config: &PipelineConfig, output: Option<PathBuf>) -> Result<(), CliError> {
    let records = pool_records(config)?;
    let mut templates = std::collections::BTreeMap::new();
    for r in &records {
        templates.entry(r.template_key()).or_insert_with(|| r.equation.clone());
    }
    let trees: Vec<_> = templates.into_values().collect();
    let matrix = SimilarityMatrix::build(&trees)?;
    log::info!("{} templates", matrix.len());
    write_artifact(
        &output_path(config, output, "matrix.tsv"),
        &[provenance(config, None)],
        &matrix.to_text(),
    )
}

pub fn augment(config: &PipelineConfig, output: Option<PathBuf>) -> Result<(), CliError> {
    let corpus = load_corpus(required(&config.corpus, "corpus")?)?;
    let report = augment_records(corpus.records(), &augment_settings(config));
    let summary = format!(
        "# records={} qr_success={} roda_covered={} roda_coverage={:.4} augments={}",
        report.records,
        report.qr_success,
        report.roda_covered,
        report.roda_coverage(),
        report.augments.len()
    );
    log::info!("{}", &summary[2..]);
    let body: String = report.augments.iter().map(|a| a.to_line() + "\n").collect();
    write_artifact(
        &output_path(config, output, "augments.jsonl"),
        &[provenance(config, Some(config.augment_seed)), summary],
        &body,
    )
}

pub fn challenge_set(config: &PipelineConfig, output: Option<PathBuf>) -> Result<(), CliError> {
    let dev = load_corpus(required(&config.dev, "dev")?)?;
    let set = generate_challenge_set(
        dev.records(),
        config.challenge_seed,
        config.challenge_size,
        &augment_settings(config),
    )?;
    let body: String = set.iter().map(|a| a.to_line() + "\n").collect();
    write_artifact(
        &output_path(config, output, "challenge.jsonl"),
        &[provenance(config, Some(config.challenge_seed))],
        &body,
    )
}

fn build_pool(config: &PipelineConfig, records: Vec<ProblemRecord>) -> Result<CandidatePool, CliError> {
    let embeddings = load_embeddings(config)?;
    let pool = match &config.matrix {
        Some(path) => {
            let matrix = SimilarityMatrix::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            CandidatePool::with_matrix(records, matrix, embeddings)?
        }
        None => CandidatePool::new(records, embeddings)?,
    };
    Ok(pool)
}

fn check_metric(config: &PipelineConfig, metric: TextMetric) -> Result<(), CliError> {
    if metric == TextMetric::EmbeddingCos && config.embeddings.is_none() {
        return Err(CliError::Config("the embedding-cos metric needs `embeddings`".into()));
    }
    Ok(())
}

fn run_retrieval(pool: &CandidatePool, cfg: &RetrievalConfig) -> Result<(Vec<TripletPair>, usize), CliError> {
    let out = retrieve_all(pool, cfg);
    for (id, e) in &out.failures {
        log::warn!("anchor `{id}` skipped: {e}");
    }
    if !out.fallbacks.is_empty() {
        log::info!("{} anchors fell back to Bi-BLEU", out.fallbacks.len());
    }
    if out.triplets.is_empty() {
        return Err(CliError::Data(format!(
            "no anchor produced a triplet ({} failures)",
            out.failures.len()
        )));
    }
    Ok((out.triplets, out.failures.len()))
}

pub fn retrieve(config: &PipelineConfig, output: Option<PathBuf>) -> Result<(), CliError> {
    check_metric(config, config.retrieval.text_metric)?;
    let pool = build_pool(config, pool_records(config)?)?;
    let (triplets, failed) = run_retrieval(&pool, &config.retrieval)?;
    let summary = format!(
        "# eq_strategy={} text_metric={} triplets={} skipped_anchors={}",
        config.retrieval.eq_strategy,
        config.retrieval.text_metric,
        triplets.len(),
        failed
    );
    log::info!("{}", &summary[2..]);
    write_artifact(
        &output_path(config, output, "triplets.jsonl"),
        &[provenance(config, Some(config.retrieval.seed)), summary],
        &triplets_to_string(&triplets),
    )
}

/// Initialises and trains a fresh encoder.
fn fit(
    config: &PipelineConfig,
    records: &[ProblemRecord],
    triplets: &[TripletPair],
) -> Result<(EncoderParams, Vec<trainer::StepMetrics>), CliError> {
    let mut params = EncoderParams::init(records, &config.train)?;
    let encoded = encode_triplets(records, triplets, &params, config.train.include_augments_as_anchors)?;
    let metrics = trainer::train(&mut params, &encoded, &config.train)?;
    Ok((params, metrics))
}

pub fn train(config: &PipelineConfig) -> Result<(), CliError> {
    let records = pool_records(config)?;
    let triplets = load_triplets(config)?;
    let (params, metrics) = fit(config, &records, &triplets)?;
    if let Some(last) = metrics.last() {
        log::info!("step {}: L={:.6} gap={:.4}", last.step, last.loss, last.gap);
    }
    let header = [provenance(config, Some(config.train.seed))];
    let body: String = metrics
        .iter()
        .map(|m| serde_json::to_string(m).expect("metrics serialize") + "\n")
        .collect();
    write_artifact(&config.output_dir.join("metrics.jsonl"), &header, &body)?;
    write_artifact(&config.output_dir.join("checkpoint.txt"), &header, &params.to_checkpoint())
}

fn metrics_json(metrics: &EvalMetrics) -> String {
    serde_json::to_string(metrics).expect("metrics serialize")
}

pub fn eval(config: &PipelineConfig, output: Option<PathBuf>) -> Result<(), CliError> {
    let records = pool_records(config)?;
    let triplets = load_triplets(config)?;
    let params = load_checkpoint(config)?;
    let metrics = eval_representation(&records, &triplets, &params)?;
    let line = metrics_json(&metrics);
    println!("{line}");
    write_artifact(
        &output_path(config, output, "eval.json"),
        &[provenance(config, None)],
        &(line + "\n"),
    )
}

pub fn dump_embeddings(config: &PipelineConfig, output: Option<PathBuf>) -> Result<(), CliError> {
    let records = pool_records(config)?;
    let params = load_checkpoint(config)?;
    let path = output_path(config, output, "embeddings.txt");
    let header = provenance(config, None);
    trainer::dump_embeddings(&records, &params, &path, Some(&header))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Trains one encoder per strategy combination and scores each on a shared
/// reference set: EM / Bi-BLEU triplets over the evaluation corpus.
pub fn strategy_grid(config: &PipelineConfig, output: Option<PathBuf>) -> Result<(), CliError> {
    check_metric(config, TextMetric::EmbeddingCos)?;
    let records = pool_records(config)?;
    let eval_records = match &config.dev {
        Some(path) => load_corpus(path)?.into_records(),
        None => load_corpus(required(&config.corpus, "corpus")?)?.into_records(),
    };
    let reference_cfg = RetrievalConfig {
        eq_strategy: EqStrategy::Em,
        text_metric: TextMetric::BiBleu,
        seed: config.retrieval.seed,
        augments_as_anchors: false,
    };
    let eval_pool = CandidatePool::new(eval_records.clone(), None)?;
    let (reference, _) = run_retrieval(&eval_pool, &reference_cfg)?;

    let pool = build_pool(config, records.clone())?;
    let mut rows = vec!["eq_strategy\ttext_metric\ttriplets\tmean_pos_cos\tmean_neg_cos\tgap\tretrieval_at_1".to_string()];
    for strategy in EqStrategy::ALL {
        for metric in TextMetric::ALL {
            let cfg = RetrievalConfig {
                eq_strategy: strategy,
                text_metric: metric,
                ..config.retrieval
            };
            let (triplets, _) = run_retrieval(&pool, &cfg)?;
            let (params, _) = fit(config, &records, &triplets)?;
            let m = eval_representation(&eval_records, &reference, &params)?;
            log::info!("{strategy}/{metric}: gap={:.4} r@1={:.4}", m.gap, m.retrieval_at_1);
            rows.push(format!(
                "{strategy}\t{metric}\t{}\t{}\t{}\t{}\t{}",
                triplets.len(),
                m.mean_pos_cos,
                m.mean_neg_cos,
                m.gap,
                m.retrieval_at_1
            ));
        }
    }
    let body = rows.join("\n") + "\n";
    print!("{body}");
    write_artifact(
        &output_path(config, output, "grid.tsv"),
        &[provenance(config, Some(config.train.seed))],
        &body,
    )
}
