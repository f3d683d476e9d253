//! Batch execution: load everything the config names, fan examples out
//! to a bounded worker pool, and persist one trace record per example as
//! JSON Lines through a single appender thread.
//!
//! Runs are resumable: dataset digests are computed and written to the
//! manifest before any backend call, completed (dialect, example) pairs
//! are skipped on resume, and failed pairs are retried. The trace file is
//! append-only; on duplicate keys the last record wins.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{
    BackendConfig, CachingBackend, CannedBackend, ChatBackend, CompletionRequest, HttpBackend,
    RecordingBackend, ReplayBackend,
};
use crate::config::{BackendKind, EvalConfig};
use crate::datasets::{attach_dialect_variants, load_policyqa, load_privacyqa, QAExample};
use crate::error::{Error, Result};
use crate::metrics;
use crate::orchestrator::{run_example, ProfileMode, PromptMode, RefinementTrace, RunConfig};
use crate::profiles::{load_profiles, ProfileRegistry};
use crate::prompt::{build_translation_prompt, load_fewshot, ShotKind, TaskKind};

/// One line of the trace file: a finished example or a recorded failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TraceRecord {
    Completed { trace: RefinementTrace },
    Failed {
        example_id: String,
        dialect_id: String,
        error: String,
    },
}

impl TraceRecord {
    fn key(&self) -> (String, String) {
        match self {
            TraceRecord::Completed { trace } => {
                (trace.dialect_id.clone(), trace.example_id.clone())
            }
            TraceRecord::Failed {
                example_id,
                dialect_id,
                ..
            } => (dialect_id.clone(), example_id.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunCounts {
    /// Number of (dialect, example) pairs the run covers.
    pub total: usize,
    pub completed: usize,
    pub failed: usize,
    /// Total fallback events across completed traces.
    pub parse_failures: usize,
}

/// Reproducibility envelope written next to the trace file. Input digests
/// are recorded before execution so a resumed run can refuse changed data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: String,
    pub config: EvalConfig,
    /// Hex SHA-256 of every input file, keyed by resolved path.
    pub dataset_digests: BTreeMap<String, String>,
    pub model: String,
    pub counts: RunCounts,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub run_dir: PathBuf,
    pub trace_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Constructs the backend stack the config asks for. A recording wrapper
/// goes outermost so replay logs also capture cache hits; the cache wraps
/// the live client. The live API key comes from the environment variable
/// named in the config and exists only in memory.
pub fn build_backend(config: &EvalConfig) -> Result<Box<dyn ChatBackend>> {
    let settings = &config.backend;
    let mut backend: Box<dyn ChatBackend> = match settings.kind {
        BackendKind::Canned => Box::new(CannedBackend::new()),
        BackendKind::Replay => {
            let path = settings
                .replay_path
                .as_ref()
                .ok_or_else(|| Error::Config("replay backend requires backend.replay_path".into()))?;
            Box::new(ReplayBackend::load(path)?)
        }
        BackendKind::Live => {
            let base_url = settings
                .base_url
                .clone()
                .ok_or_else(|| Error::Config("live backend requires backend.base_url".into()))?;
            let key_env = settings
                .api_key_env
                .as_ref()
                .ok_or_else(|| Error::Config("live backend requires backend.api_key_env".into()))?;
            let api_key = std::env::var(key_env).map_err(|_| {
                Error::Config(format!(
                    "environment variable '{key_env}' named by backend.api_key_env is not set"
                ))
            })?;
            let backend_config = BackendConfig {
                base_url,
                api_key,
                timeout: std::time::Duration::from_secs(settings.timeout_secs),
                max_retries: settings.max_retries,
                retry_backoff: settings
                    .retry_backoff_ms
                    .iter()
                    .map(|ms| std::time::Duration::from_millis(*ms))
                    .collect(),
                max_in_flight: settings.max_in_flight,
            };
            Box::new(HttpBackend::new(backend_config).map_err(|e| Error::Config(e.to_string()))?)
        }
    };
    if let Some(dir) = &settings.cache_dir {
        backend = Box::new(CachingBackend::new(backend, dir)?);
    }
    if let Some(path) = &settings.record_path {
        backend = Box::new(RecordingBackend::new(backend, path)?);
    }
    Ok(backend)
}

fn load_task_examples(config: &EvalConfig) -> Result<Vec<QAExample>> {
    let path = config.dataset_path()?;
    match config.task {
        TaskKind::PrivacyClassification => load_privacyqa(path),
        TaskKind::PolicyExtraction => load_policyqa(path),
    }
}

struct PreparedRun {
    registry: ProfileRegistry,
    run_config: RunConfig,
    /// Jobs in deterministic order: dialects in config order, examples in
    /// dataset order.
    jobs: Vec<QAExample>,
    digests: BTreeMap<String, String>,
}

fn prepare(config: &EvalConfig) -> Result<PreparedRun> {
    let examples = load_task_examples(config)?;
    if examples.is_empty() {
        return Err(Error::Run("dataset has no examples".into()));
    }
    let registry = load_profiles(&config.datasets.profiles)?;
    if config.profile_mode == ProfileMode::Full {
        for dialect in &config.dialects {
            if !registry.contains(&dialect.id) {
                return Err(Error::Run(format!(
                    "dialect '{}' has no profile in {}",
                    dialect.id,
                    config.datasets.profiles.display()
                )));
            }
        }
    }
    let shots = match (config.mode, &config.datasets.fewshot) {
        (PromptMode::FewShot, Some(path)) => load_fewshot(path)?,
        (PromptMode::FewShot, None) => {
            return Err(Error::Config("few_shot mode requires datasets.fewshot".into()))
        }
        (PromptMode::ZeroShot, _) => Vec::new(),
    };

    let mut digests = BTreeMap::new();
    let mut record = |path: &Path| -> Result<()> {
        digests.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    };
    record(config.dataset_path()?)?;
    record(&config.datasets.profiles)?;
    if let (PromptMode::FewShot, Some(path)) = (config.mode, &config.datasets.fewshot) {
        record(path)?;
    }

    let mut jobs = Vec::with_capacity(config.dialects.len() * examples.len());
    for dialect in &config.dialects {
        record(&dialect.variants)?;
        jobs.extend(attach_dialect_variants(&examples, &dialect.variants, &dialect.id)?);
    }

    Ok(PreparedRun {
        registry,
        run_config: config.run_config(shots),
        jobs,
        digests,
    })
}

/// Reads every record of one trace file, in file order.
pub fn load_trace_records(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), index + 1), e))?;
        records.push(record);
    }
    Ok(records)
}

/// Collects the effective traces from one or more trace files: the last
/// record per (dialect, example) wins. Any pair whose last record is a
/// failure makes the whole load refuse, listing the offenders.
pub fn load_completed_traces(paths: &[PathBuf]) -> Result<Vec<RefinementTrace>> {
    let mut last: BTreeMap<(String, String), TraceRecord> = BTreeMap::new();
    for path in paths {
        for record in load_trace_records(path)? {
            last.insert(record.key(), record);
        }
    }
    let mut unresolved: Vec<String> = Vec::new();
    let mut traces = Vec::new();
    for record in last.into_values() {
        match record {
            TraceRecord::Completed { trace } => traces.push(trace),
            TraceRecord::Failed {
                example_id,
                dialect_id,
                error,
            } => unresolved.push(format!("{dialect_id}/{example_id}: {error}")),
        }
    }
    if !unresolved.is_empty() {
        return Err(Error::Run(format!(
            "{} example(s) ended in failure; rerun with --resume before scoring: {}",
            unresolved.len(),
            unresolved.join("; ")
        )));
    }
    if traces.is_empty() {
        return Err(Error::Run("no completed traces found".into()));
    }
    Ok(traces)
}

fn counts_from_file(path: &Path, total: usize) -> Result<RunCounts> {
    if !path.exists() {
        return Ok(RunCounts {
            total,
            ..RunCounts::default()
        });
    }
    let mut last: BTreeMap<(String, String), TraceRecord> = BTreeMap::new();
    for record in load_trace_records(path)? {
        last.insert(record.key(), record);
    }
    let mut counts = RunCounts {
        total,
        ..RunCounts::default()
    };
    for record in last.values() {
        match record {
            TraceRecord::Completed { trace } => {
                counts.completed += 1;
                counts.parse_failures += trace.parse_failures.len();
            }
            TraceRecord::Failed { .. } => counts.failed += 1,
        }
    }
    Ok(counts)
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_manifest(path: &Path) -> Result<RunManifest> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))
}

fn generate_run_id() -> String {
    let now = chrono::Utc::now();
    format!("run-{}", now.format("%Y%m%d-%H%M%S%3f"))
}

/// Executes a full run (or resumes one), returning the final manifest.
///
/// All inputs are loaded and digested before the first backend call, so
/// configuration and data errors abort with no traces written. Failures
/// of individual examples become `Failed` records and never abort the
/// batch. A resumed run verifies that every input digest still matches,
/// skips completed pairs, and retries failed ones.
pub fn run_eval(
    config: &EvalConfig,
    backend: &dyn ChatBackend,
    resume: Option<&str>,
) -> Result<RunOutcome> {
    let prepared = prepare(config)?;
    let total = prepared.jobs.len();

    let run_id = match resume {
        Some(id) => id.to_string(),
        None => generate_run_id(),
    };
    let run_dir = config.output_dir.join(&run_id);
    let trace_path = run_dir.join("traces.jsonl");
    let manifest_path = run_dir.join("manifest.json");

    let created_at = match resume {
        Some(id) => {
            if !manifest_path.exists() {
                return Err(Error::Run(format!(
                    "cannot resume '{id}': no manifest at {}",
                    manifest_path.display()
                )));
            }
            let previous = read_manifest(&manifest_path)?;
            if previous.dataset_digests != prepared.digests {
                let changed: Vec<&String> = prepared
                    .digests
                    .iter()
                    .filter(|(path, digest)| previous.dataset_digests.get(*path) != Some(digest))
                    .map(|(path, _)| path)
                    .collect();
                return Err(Error::Run(format!(
                    "input files changed since run '{id}' started: {}",
                    changed
                        .iter()
                        .map(|s| s.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )));
            }
            previous.created_at
        }
        None => {
            if run_dir.exists() {
                return Err(Error::Run(format!(
                    "output directory {} already exists; use resume to continue it",
                    run_dir.display()
                )));
            }
            fs::create_dir_all(&run_dir).map_err(|e| Error::io(run_dir.display().to_string(), e))?;
            chrono::Utc::now().to_rfc3339()
        }
    };

    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        created_at,
        config: config.clone(),
        dataset_digests: prepared.digests.clone(),
        model: config.backend.model.clone(),
        counts: counts_from_file(&trace_path, total)?,
    };
    write_manifest(&manifest_path, &manifest)?;

    let done: HashSet<(String, String)> = if trace_path.exists() {
        load_trace_records(&trace_path)?
            .into_iter()
            .filter(|r| matches!(r, TraceRecord::Completed { .. }))
            .map(|r| r.key())
            .collect()
    } else {
        HashSet::new()
    };
    let pending: VecDeque<QAExample> = prepared
        .jobs
        .into_iter()
        .filter(|job| !done.contains(&(job.dialect_id.clone(), job.example_id.clone())))
        .collect();

    if !pending.is_empty() {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&trace_path)
            .map_err(|e| Error::io(trace_path.display().to_string(), e))?;
        run_jobs(
            pending,
            &prepared.run_config,
            &prepared.registry,
            backend,
            config.backend.max_in_flight,
            file,
            &trace_path,
        )?;
    }

    manifest.counts = counts_from_file(&trace_path, total)?;
    write_manifest(&manifest_path, &manifest)?;
    log::info!(
        "run {} finished: {}/{} completed, {} failed, {} parse fallbacks",
        manifest.run_id,
        manifest.counts.completed,
        manifest.counts.total,
        manifest.counts.failed,
        manifest.counts.parse_failures
    );
    Ok(RunOutcome {
        manifest,
        run_dir,
        trace_path,
        manifest_path,
    })
}

fn run_jobs(
    pending: VecDeque<QAExample>,
    run_config: &RunConfig,
    registry: &ProfileRegistry,
    backend: &dyn ChatBackend,
    workers: usize,
    mut file: fs::File,
    trace_path: &Path,
) -> Result<()> {
    let queue = Mutex::new(pending);
    let workers = workers.max(1);
    let mut append_error: Option<Error> = None;
    std::thread::scope(|scope| {
        let (sender, receiver) = mpsc::channel::<TraceRecord>();
        for _ in 0..workers {
            let sender = sender.clone();
            let queue = &queue;
            scope.spawn(move || loop {
                let job = queue.lock().expect("job queue lock").pop_front();
                let Some(example) = job else { break };
                let record = match run_example(&example, run_config, registry, backend) {
                    Ok(trace) => TraceRecord::Completed { trace },
                    Err(error) => {
                        log::warn!(
                            "example {}/{} failed: {error}",
                            example.dialect_id,
                            example.example_id
                        );
                        TraceRecord::Failed {
                            example_id: example.example_id,
                            dialect_id: example.dialect_id,
                            error: error.to_string(),
                        }
                    }
                };
                if sender.send(record).is_err() {
                    break;
                }
            });
        }
        drop(sender);
        for record in receiver {
            let line = match serde_json::to_string(&record) {
                Ok(line) => line,
                Err(e) => {
                    append_error = Some(Error::json(trace_path.display().to_string(), e));
                    break;
                }
            };
            if let Err(e) = writeln!(file, "{line}") {
                append_error = Some(Error::io(trace_path.display().to_string(), e));
                break;
            }
        }
    });
    match append_error {
        Some(error) => Err(error),
        None => Ok(()),
    }
}

/// One Step-1-only result: the dialectal question and its translation,
/// with the SAE reference kept for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub example_id: String,
    pub dialect_id: String,
    pub question: String,
    pub translated_question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationScore {
    pub dialect_id: String,
    pub n: usize,
    pub bleu: f64,
    pub rouge_l: f64,
}

#[derive(Debug)]
pub struct TranslateOutcome {
    pub path: PathBuf,
    pub records: Vec<TranslationRecord>,
    pub per_dialect: Vec<TranslationScore>,
    pub overall: TranslationScore,
}

/// Runs only Step 1 (translation) for every (dialect, example) pair and
/// scores the translations against their SAE references.
pub fn run_translate(config: &EvalConfig, backend: &dyn ChatBackend) -> Result<TranslateOutcome> {
    let prepared = prepare(config)?;
    let shots: Vec<_> = prepared
        .run_config
        .shots
        .iter()
        .filter(|shot| shot.task_kind == ShotKind::Translation)
        .take(prepared.run_config.shot_count)
        .cloned()
        .collect();

    let mut records = Vec::with_capacity(prepared.jobs.len());
    for example in &prepared.jobs {
        let profile = match prepared.run_config.profile_mode {
            ProfileMode::Generic => prepared.registry.get(crate::profiles::GENERIC_PROFILE_ID)?,
            ProfileMode::Full => prepared.registry.get(&example.dialect_id)?,
        };
        let profile_text = crate::profiles::render_profile(profile);
        let prompt = build_translation_prompt(&profile_text, &example.question, &shots)?
            .with_decoding(prepared.run_config.decoding);
        let request = CompletionRequest {
            model: prepared.run_config.model.clone(),
            prompt,
            request_tag: format!("{}/translate", example.example_id),
        };
        let completion = backend.complete(&request)?;
        let translated = completion.content.trim();
        records.push(TranslationRecord {
            example_id: example.example_id.clone(),
            dialect_id: example.dialect_id.clone(),
            question: example.question.clone(),
            translated_question: if translated.is_empty() {
                example.question.clone()
            } else {
                translated.to_string()
            },
            reference: example.sae_reference_question.clone(),
        });
    }

    fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(config.output_dir.display().to_string(), e))?;
    let path = config.output_dir.join("translations.jsonl");
    let mut out = String::new();
    for record in &records {
        out.push_str(
            &serde_json::to_string(record)
                .map_err(|e| Error::json(path.display().to_string(), e))?,
        );
        out.push('\n');
    }
    fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))?;

    let per_dialect = score_translation_records(&records)?;
    let overall = aggregate_translation_scores(&records, "all")?;
    Ok(TranslateOutcome {
        path,
        records,
        per_dialect,
        overall,
    })
}

fn aggregate_translation_scores(
    records: &[TranslationRecord],
    dialect_id: &str,
) -> Result<TranslationScore> {
    let mut bleu_sum = 0.0;
    let mut rouge_sum = 0.0;
    let mut n = 0usize;
    for record in records {
        let Some(reference) = &record.reference else {
            continue;
        };
        bleu_sum += metrics::bleu(&record.translated_question, std::slice::from_ref(reference))?;
        rouge_sum += metrics::rouge_l(&record.translated_question, reference)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Scoring(
            "no translation records carry an SAE reference".into(),
        ));
    }
    Ok(TranslationScore {
        dialect_id: dialect_id.to_string(),
        n,
        bleu: bleu_sum / n as f64,
        rouge_l: rouge_sum / n as f64,
    })
}

fn score_translation_records(records: &[TranslationRecord]) -> Result<Vec<TranslationScore>> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<TranslationRecord>> = HashMap::new();
    for record in records {
        if !grouped.contains_key(&record.dialect_id) {
            order.push(record.dialect_id.clone());
        }
        grouped
            .entry(record.dialect_id.clone())
            .or_default()
            .push(record.clone());
    }
    order
        .iter()
        .map(|dialect_id| aggregate_translation_scores(&grouped[dialect_id], dialect_id))
        .collect()
}
