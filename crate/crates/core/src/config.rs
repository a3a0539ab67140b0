//! `run.toml`: paths, backends, the role each backend plays and the
//! per-stage settings. Relative paths resolve against the config file's
//! directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendDescriptor, BackendKind, Provider};
use crate::comet::CometConfig;
use crate::identify::IdentifyConfig;
use crate::ingest::AlignConfig;
use crate::prompt::Strategy;
use crate::retrieval::RetrievalConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub entries: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub recipes: Option<PathBuf>,
    /// Segmenter dictionary, `word<TAB>frequency`.
    pub dictionary: Option<PathBuf>,
    /// Optional `word<TAB>count` table for the rarity and generic-term
    /// checks; counted from the entries when absent.
    pub word_counts: Option<PathBuf>,
    /// Per-entry scores (`scores.jsonl`) to aggregate into score tables.
    pub scores: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

/// Which configured backend plays which part.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Roles {
    pub rtt_forward: Option<String>,
    pub rtt_reverse: Option<String>,
    /// Wikipedia editions in lookup order.
    pub wiki: Vec<String>,
    pub chat: Option<String>,
    /// MT backend for the OCR alignment similarity; geometry only if unset.
    pub ingest_mt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateConfig {
    pub strategies: Vec<Strategy>,
    pub top_k: usize,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        TranslateConfig {
            strategies: vec![Strategy::Baseline],
            top_k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// `token` or `exact-span`.
    #[serde(rename = "match")]
    pub match_mode: String,
    /// Row label the score deltas are taken against.
    pub baseline: String,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            match_mode: "token".into(),
            baseline: Strategy::Baseline.label().into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeFlags {
    pub cache_only: bool,
    pub offline: bool,
    pub fix_typos: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub backends: Vec<BackendDescriptor>,
    pub roles: Roles,
    pub identify: IdentifyConfig,
    pub retrieval: RetrievalConfig,
    pub ingest: AlignConfig,
    pub translate: TranslateConfig,
    pub evaluate: EvaluateConfig,
    pub comet: CometConfig,
    pub mode: ModeFlags,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.display().to_string(),
            source,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.resolve_paths();
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: "<inline>".into(),
            source,
        })?;
        config.base_dir = base_dir.to_path_buf();
        config.resolve_paths();
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self) {
        let base = self.base_dir.clone();
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.entries,
            &mut p.annotations,
            &mut p.recipes,
            &mut p.dictionary,
            &mut p.word_counts,
            &mut p.scores,
            &mut p.cache_dir,
            &mut p.output_dir,
        ] {
            fix(slot);
        }
        for b in &mut self.backends {
            if let Some(table) = b.mock_table.as_mut() {
                let path = Path::new(table.as_str());
                if path.is_relative() {
                    *table = base.join(path).display().to_string();
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut ids = HashSet::new();
        for b in &self.backends {
            b.validate().map_err(ConfigError::Invalid)?;
            if !ids.insert(b.backend_id.as_str()) {
                return Err(ConfigError::Invalid(format!("backend_id `{}` is declared twice", b.backend_id)));
            }
            if b.provider == Provider::Mock && b.mock_table.is_none() {
                return Err(ConfigError::Invalid(format!("mock backend `{}` needs a mock_table", b.backend_id)));
            }
        }
        let check_role = |role: &str, id: &str, kind: BackendKind| -> Result<(), ConfigError> {
            match self.backends.iter().find(|b| b.backend_id == id) {
                None => Err(ConfigError::Invalid(format!("roles.{role}: unknown backend `{id}`"))),
                Some(b) if b.kind != kind => Err(ConfigError::Invalid(format!("roles.{role}: backend `{id}` is {} but {kind} is needed", b.kind))),
                Some(_) => Ok(()),
            }
        };
        let r = &self.roles;
        for (role, id, kind) in [
            ("rtt_forward", &r.rtt_forward, BackendKind::Mt),
            ("rtt_reverse", &r.rtt_reverse, BackendKind::Mt),
            ("chat", &r.chat, BackendKind::Chat),
            ("ingest_mt", &r.ingest_mt, BackendKind::Mt),
        ] {
            if let Some(id) = id {
                check_role(role, id, kind)?;
            }
        }
        for id in &r.wiki {
            check_role("wiki", id, BackendKind::Wiki)?;
        }
        if let (Some(f), Some(v)) = (&r.rtt_forward, &r.rtt_reverse) {
            if f == v {
                log::warn!("round trip uses the same backend `{f}` both ways");
            }
        }
        self.retrieval.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.identify.percentile) {
            return Err(ConfigError::Invalid("identify.percentile must lie in [0, 1]".into()));
        }
        if self.translate.top_k == 0 {
            return Err(ConfigError::Invalid("translate.top_k must be at least 1".into()));
        }
        if self.evaluate.match_mode.parse::<crate::eval::MatchMode>().is_err() {
            return Err(ConfigError::Invalid(format!("evaluate.match: unknown mode `{}`", self.evaluate.match_mode)));
        }
        Ok(())
    }

    pub fn descriptor(&self, backend_id: &str) -> Option<&BackendDescriptor> {
        self.backends.iter().find(|b| b.backend_id == backend_id)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output_dir.clone().unwrap_or_else(|| self.base_dir.join("out"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.paths.cache_dir.clone().unwrap_or_else(|| self.base_dir.join("cache"))
    }
}
