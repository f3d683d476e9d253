//! Run configuration file: one TOML document describing the task, the
//! datasets, the dialects under test, the backend, and the decoding
//! parameters. Relative paths are resolved against the config file's own
//! directory, so a config can travel with its data. Validation happens at
//! load time; nothing network-facing is touched here.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orchestrator::{ProfileMode, PromptMode, RunConfig};
use crate::prompt::{DecodingParams, FewShotExample, TaskKind};

/// Which backend implementation a run uses. `canned` needs no
/// credentials and no network; `live` talks HTTP; `replay` serves a
/// previously recorded response log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Canned,
    Live,
    Replay,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// Name of the environment variable holding the API key. The key
    /// itself never appears in configs, manifests, or traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_retry_backoff_ms")]
    pub retry_backoff_ms: Vec<u64>,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_path: Option<PathBuf>,
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_max_retries() -> u32 {
    3
}

fn default_retry_backoff_ms() -> Vec<u64> {
    vec![500, 1000, 2000]
}

fn default_max_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacyqa: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policyqa: Option<PathBuf>,
    pub profiles: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fewshot: Option<PathBuf>,
}

/// One dialect under test: its profile id and the file of pre-translated
/// question variants for the active dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialectEntry {
    pub id: String,
    pub variants: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub task: TaskKind,
    pub output_dir: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: PromptMode,
    #[serde(default = "default_shot_count")]
    pub shot_count: usize,
    #[serde(default = "default_max_refinements")]
    pub max_refinements: u32,
    #[serde(default = "default_profile_mode")]
    pub profile_mode: ProfileMode,
    pub datasets: DatasetPaths,
    pub dialects: Vec<DialectEntry>,
    pub backend: BackendSettings,
    #[serde(default)]
    pub decoding: DecodingParams,
}

fn default_mode() -> PromptMode {
    PromptMode::ZeroShot
}

fn default_shot_count() -> usize {
    8
}

fn default_max_refinements() -> u32 {
    2
}

fn default_profile_mode() -> ProfileMode {
    ProfileMode::Full
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl EvalConfig {
    /// Parses, resolves relative paths against the config's directory,
    /// and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<EvalConfig> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config: EvalConfig = toml::from_str(&raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = match path.parent() {
            Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
            _ => PathBuf::from("."),
        };
        config.resolve_paths(&base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        if let Some(p) = self.datasets.privacyqa.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = self.datasets.policyqa.as_mut() {
            resolve(base, p);
        }
        resolve(base, &mut self.datasets.profiles);
        if let Some(p) = self.datasets.fewshot.as_mut() {
            resolve(base, p);
        }
        for dialect in &mut self.dialects {
            resolve(base, &mut dialect.variants);
        }
        if let Some(p) = self.backend.cache_dir.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = self.backend.record_path.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = self.backend.replay_path.as_mut() {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_path()?;
        if self.dialects.is_empty() {
            return Err(Error::Config("at least one dialect is required".into()));
        }
        let mut seen = HashSet::new();
        for dialect in &self.dialects {
            if dialect.id.trim().is_empty() {
                return Err(Error::Config("dialect id must be non-empty".into()));
            }
            if !seen.insert(dialect.id.as_str()) {
                return Err(Error::Config(format!(
                    "dialect '{}' listed more than once",
                    dialect.id
                )));
            }
        }
        if self.mode == PromptMode::FewShot && self.datasets.fewshot.is_none() {
            return Err(Error::Config(
                "few_shot mode requires datasets.fewshot".into(),
            ));
        }
        if self.backend.max_in_flight == 0 {
            return Err(Error::Config("backend.max_in_flight must be at least 1".into()));
        }
        match self.backend.kind {
            BackendKind::Live => {
                if self.backend.base_url.is_none() {
                    return Err(Error::Config("live backend requires backend.base_url".into()));
                }
                if self.backend.api_key_env.is_none() {
                    return Err(Error::Config(
                        "live backend requires backend.api_key_env".into(),
                    ));
                }
            }
            BackendKind::Replay => {
                if self.backend.replay_path.is_none() {
                    return Err(Error::Config(
                        "replay backend requires backend.replay_path".into(),
                    ));
                }
            }
            BackendKind::Canned => {}
        }
        Ok(())
    }

    /// The dataset file for the configured task.
    pub fn dataset_path(&self) -> Result<&Path> {
        match self.task {
            TaskKind::PrivacyClassification => self
                .datasets
                .privacyqa
                .as_deref()
                .ok_or_else(|| Error::Config("task privacy_classification requires datasets.privacyqa".into())),
            TaskKind::PolicyExtraction => self
                .datasets
                .policyqa
                .as_deref()
                .ok_or_else(|| Error::Config("task policy_extraction requires datasets.policyqa".into())),
        }
    }

    /// Orchestrator settings derived from this config plus loaded shots.
    pub fn run_config(&self, shots: Vec<FewShotExample>) -> RunConfig {
        RunConfig {
            task: self.task,
            profile_mode: self.profile_mode,
            mode: self.mode,
            shot_count: self.shot_count,
            max_refinements: self.max_refinements,
            model: self.backend.model.clone(),
            decoding: self.decoding,
            shots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
task = "privacy_classification"
output_dir = "runs"

[datasets]
privacyqa = "data/privacyqa.tsv"
profiles = "data/profiles.jsonl"

[[dialects]]
id = "sae"
variants = "data/variants/sae.jsonl"

[[dialects]]
id = "raave"
variants = "data/variants/raave.jsonl"

[backend]
kind = "canned"
model = "demo"
"#;

    fn write_config(body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("dialectqa-config-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("cfg-{}.toml", rand_suffix()));
        fs::write(&path, body).unwrap();
        path
    }

    fn rand_suffix() -> u128 {
        use std::time::{SystemTime, UNIX_EPOCH};
        SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_nanos()
    }

    #[test]
    fn minimal_config_gets_defaults_and_resolved_paths() {
        let path = write_config(MINIMAL);
        let config = EvalConfig::load(&path).unwrap();
        assert_eq!(config.mode, PromptMode::ZeroShot);
        assert_eq!(config.shot_count, 8);
        assert_eq!(config.max_refinements, 2);
        assert_eq!(config.profile_mode, ProfileMode::Full);
        assert_eq!(config.decoding, DecodingParams::default());
        assert_eq!(config.backend.timeout_secs, 60);
        assert_eq!(config.backend.retry_backoff_ms, vec![500, 1000, 2000]);
        let base = path.parent().unwrap();
        assert_eq!(config.output_dir, base.join("runs"));
        assert_eq!(
            config.datasets.privacyqa.as_deref().unwrap(),
            base.join("data/privacyqa.tsv")
        );
        assert_eq!(config.dialects[1].variants, base.join("data/variants/raave.jsonl"));
        assert_eq!(config.dataset_path().unwrap(), base.join("data/privacyqa.tsv"));
    }

    #[test]
    fn absolute_paths_stay_put() {
        let body = MINIMAL.replace("data/profiles.jsonl", "/etc/profiles.jsonl");
        let config = EvalConfig::load(write_config(&body)).unwrap();
        assert_eq!(config.datasets.profiles, PathBuf::from("/etc/profiles.jsonl"));
    }

    #[test]
    fn task_dataset_mismatch_is_rejected() {
        let body = MINIMAL.replace("privacy_classification", "policy_extraction");
        let err = EvalConfig::load(write_config(&body)).unwrap_err().to_string();
        assert!(err.contains("datasets.policyqa"));
    }

    #[test]
    fn duplicate_dialects_are_rejected() {
        let body = MINIMAL.replace("id = \"raave\"", "id = \"sae\"");
        let err = EvalConfig::load(write_config(&body)).unwrap_err().to_string();
        assert!(err.contains("more than once"));
    }

    #[test]
    fn few_shot_requires_exemplars() {
        let body = MINIMAL.replace(
            "output_dir = \"runs\"",
            "output_dir = \"runs\"\nmode = \"few_shot\"",
        );
        let err = EvalConfig::load(write_config(&body)).unwrap_err().to_string();
        assert!(err.contains("fewshot"));
    }

    #[test]
    fn live_backend_requires_url_and_key_env() {
        let body = MINIMAL.replace("kind = \"canned\"", "kind = \"live\"");
        let err = EvalConfig::load(write_config(&body)).unwrap_err().to_string();
        assert!(err.contains("base_url"));

        let body = MINIMAL.replace(
            "kind = \"canned\"",
            "kind = \"live\"\nbase_url = \"http://localhost:9/v1\"",
        );
        let err = EvalConfig::load(write_config(&body)).unwrap_err().to_string();
        assert!(err.contains("api_key_env"));
    }

    #[test]
    fn replay_backend_requires_log_path() {
        let body = MINIMAL.replace("kind = \"canned\"", "kind = \"replay\"");
        let err = EvalConfig::load(write_config(&body)).unwrap_err().to_string();
        assert!(err.contains("replay_path"));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let body = format!("{MINIMAL}\nnot_a_key = 3\n");
        assert!(EvalConfig::load(write_config(&body)).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = EvalConfig::load(write_config(MINIMAL)).unwrap();
        let rendered = toml::to_string_pretty(&config).unwrap();
        let back: EvalConfig = toml::from_str(&rendered).unwrap();
        assert_eq!(back.task, config.task);
        assert_eq!(back.dialects.len(), config.dialects.len());
        assert_eq!(back.backend.model, config.backend.model);
    }
}
