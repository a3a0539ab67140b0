//! Stage functions behind the CLI. Each stage reads its inputs from the
//! run config, writes its outputs into the output directory and returns a
//! short summary.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::backends::mock::{load_table, MockTransport};
use crate::backends::{
    cache_path, Backend, BackendError, CacheError, Clock, FixedClock, Mode, Provider, ResponseCache, SystemClock, Transport, TransportError,
    TransportErrorKind, WikiClient,
};
use crate::comet::{self, CometError};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::{
    load_corpus, save_corpus, validate_annotations, write_corpus, CorpusError, CsiAnnotation, MenuEntry, Recipe, TranslationRecord,
    TranslationStatus,
};
use crate::eval::{self, EvalError, MatchMode, ScoreRecord, ScoreTable, SpanEvalResult, SpanSource};
use crate::exec::Exec;
use crate::identify::{build_freq_table, Check, CsiPrediction, FreqTable, IdentifyError, Identifier};
use crate::ingest::{self, IngestError, MtCosineSimilarity, SimilarityFn, UniformSimilarity};
use crate::prompt::{parse_response, PromptError, PromptRecord, PromptSpec, Strategy, Templates};
use crate::retrieval::{build_index, retrieve_top, retrievals_for, DishQuery, Retrieval, RetrievalError};
use crate::segment::{DictSegmenter, SegDictionary, SegmentError, Segmenter};

pub const ENTRIES_FILE: &str = "entries.jsonl";
pub const ALIGNMENT_FILE: &str = "alignment_report.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const RETRIEVALS_FILE: &str = "retrievals.jsonl";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const TRANSLATIONS_FILE: &str = "translations.jsonl";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";
pub const KAPPA_FILE: &str = "kappa.txt";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Identify(#[from] IdentifyError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Comet(#[from] CometError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("`paths.{0}` is not set in the run config")]
    MissingPath(&'static str),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("offline run: backend `{backend_id}` has no cache at {path}")]
    OfflineWithoutCache { backend_id: String, path: String },
    #[error("backend `{0}` is not available: {1}")]
    Unavailable(String, String),
    #[error("{count} entries had check failures (first: {first}); rerun with --keep-going to accept them")]
    CheckFailures { count: usize, first: String },
}

impl PipelineError {
    /// 1 for bad input or configuration, 2 for backend failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Backend(_)
            | PipelineError::Cache(_)
            | PipelineError::OfflineWithoutCache { .. }
            | PipelineError::Unavailable(..)
            | PipelineError::CheckFailures { .. }
            | PipelineError::Ingest(IngestError::Similarity(_))
            | PipelineError::Comet(CometError::Spawn { .. } | CometError::Failed { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub exec: Exec,
    /// Accept recorded check or backend failures instead of failing.
    pub keep_going: bool,
}

/// Stands in for a transport when a run must not touch the network.
struct Refuse(&'static str);

impl Transport for Refuse {
    fn call(&self, _request: &crate::backends::Request) -> Result<String, TransportError> {
        Err(TransportError::new(TransportErrorKind::Network, self.0))
    }
}

pub struct Pipeline {
    pub config: RunConfig,
    pub options: RunOptions,
    backends: Mutex<BTreeMap<String, Arc<Backend>>>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let input_err = |message: String| PipelineError::Input {
        path: path.display().to_string(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| input_err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| input_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| input_err(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let io_err = |e: std::io::Error| PipelineError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut buf = Vec::new();
    write_corpus(records, &mut buf).map_err(io_err)?;
    std::fs::write(path, buf).map_err(io_err)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| PipelineError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// `word<TAB>count` lines.
pub fn parse_word_counts(text: &str) -> std::result::Result<HashMap<String, u64>, String> {
    let mut counts = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (w, c) = line.split_once('\t').ok_or_else(|| format!("line {}: expected word<TAB>count", i + 1))?;
        let c: u64 = c.trim().parse().map_err(|_| format!("line {}: bad count `{}`", i + 1, c.trim()))?;
        *counts.entry(crate::corpus::nfc(w.trim())).or_insert(0) += c;
    }
    Ok(counts)
}

/// Non-empty lines of whitespace- or comma-separated counts.
pub fn parse_count_matrix(text: &str) -> std::result::Result<Vec<Vec<u32>>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<u32>().map_err(|_| format!("line {}: bad count `{s}`", i + 1)))
                .collect()
        })
        .collect()
}

/// Surfaces of the predicted spans, as the span placeholder value.
pub fn span_text(prediction: Option<&CsiPrediction>) -> Option<String> {
    let spans = &prediction?.spans;
    (!spans.is_empty()).then(|| spans.iter().map(|s| s.surface.as_str()).collect::<Vec<_>>().join("、"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub entries: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifySummary {
    pub entries: usize,
    pub csi_entries: usize,
    pub failed_entries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslateSummary {
    pub total: usize,
    pub new: usize,
    pub warnings: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSummary {
    pub spans: Vec<(String, SpanEvalResult)>,
    pub scores: Option<ScoreTable>,
    pub dropped_gold: Vec<String>,
    pub text: String,
}

/// Where the evaluate stage takes per-entry scores from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreSource {
    /// `paths.scores`, when configured.
    #[default]
    File,
    /// Run the external COMET scorer over the translations.
    Comet,
}

impl Pipeline {
    pub fn new(config: RunConfig, options: RunOptions) -> Self {
        Pipeline {
            config,
            options,
            backends: Mutex::new(BTreeMap::new()),
        }
    }

    fn offline(&self) -> bool {
        self.config.mode.offline
    }

    fn mode(&self) -> Mode {
        if self.config.mode.offline || self.config.mode.cache_only {
            Mode::CacheOnly
        } else {
            Mode::Online
        }
    }

    fn path(&self, name: &'static str, value: &Option<PathBuf>) -> Result<PathBuf> {
        let p = value.clone().ok_or(PipelineError::MissingPath(name))?;
        if !p.exists() {
            return Err(PipelineError::Input {
                path: p.display().to_string(),
                message: format!("`paths.{name}` does not exist"),
            });
        }
        Ok(p)
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        let dir = self.config.output_dir();
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::Input {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(dir)
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        Ok(self.output_dir()?.join(name))
    }

    /// Builds (once) the backend with this id.
    pub fn backend(&self, backend_id: &str) -> Result<Arc<Backend>> {
        if let Some(b) = self.backends.lock().unwrap().get(backend_id) {
            return Ok(b.clone());
        }
        let desc = self
            .config
            .descriptor(backend_id)
            .ok_or_else(|| PipelineError::Config(ConfigError::Invalid(format!("unknown backend `{backend_id}`"))))?
            .clone();
        let dir = self.config.cache_dir();
        let mode = self.mode();
        if self.offline() && !cache_path(&dir, backend_id).exists() {
            return Err(PipelineError::OfflineWithoutCache {
                backend_id: backend_id.to_string(),
                path: cache_path(&dir, backend_id).display().to_string(),
            });
        }
        let cache = Arc::new(ResponseCache::open(&dir, backend_id, mode == Mode::Online)?);
        let (transport, clock): (Box<dyn Transport>, Arc<dyn Clock>) = if mode == Mode::CacheOnly {
            (Box::new(Refuse("cache-only run")), Arc::new(SystemClock::new()))
        } else if desc.provider == Provider::Mock {
            let table_path = desc.mock_table.clone().unwrap_or_default();
            let table = load_table(Path::new(&table_path)).map_err(|e| PipelineError::Input {
                path: table_path.clone(),
                message: e.to_string(),
            })?;
            (Box::new(MockTransport::for_kind(desc.kind, table)), Arc::new(FixedClock::default()))
        } else {
            (http_transport(&desc)?, Arc::new(SystemClock::new()))
        };
        let backend = Arc::new(Backend::builder(desc, transport).cache(cache).mode(mode).clock(clock).build());
        self.backends.lock().unwrap().insert(backend_id.to_string(), backend.clone());
        Ok(backend)
    }

    /// Transport attempts over every backend built so far.
    pub fn network_calls(&self) -> u64 {
        self.backends.lock().unwrap().values().map(|b| b.network_calls()).sum()
    }

    pub fn segmenter(&self) -> Result<DictSegmenter> {
        let path = self.path("dictionary", &self.config.paths.dictionary)?;
        Ok(DictSegmenter::new(SegDictionary::load(path)?))
    }

    pub fn entries(&self) -> Result<Vec<MenuEntry>> {
        Ok(load_corpus(self.path("entries", &self.config.paths.entries)?)?)
    }

    pub fn recipes(&self) -> Result<Vec<Recipe>> {
        Ok(load_corpus(self.path("recipes", &self.config.paths.recipes)?)?)
    }

    pub fn annotations(&self, entries: &[MenuEntry]) -> Result<Vec<CsiAnnotation>> {
        let annotations: Vec<CsiAnnotation> = load_corpus(self.path("annotations", &self.config.paths.annotations)?)?;
        validate_annotations(&annotations, entries)?;
        Ok(annotations)
    }

    pub fn freq_table(&self, entries: &[MenuEntry], segmenter: &dyn Segmenter) -> Result<FreqTable> {
        let q = self.config.identify.percentile;
        match &self.config.paths.word_counts {
            Some(p) => {
                let p = self.path("word_counts", &Some(p.clone()))?;
                let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::Input {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                let counts = parse_word_counts(&text).map_err(|message| PipelineError::Input {
                    path: p.display().to_string(),
                    message,
                })?;
                Ok(FreqTable::from_counts(counts, q)?)
            }
            None => Ok(build_freq_table(entries, segmenter, q)?),
        }
    }

    fn load_output<T: DeserializeOwned>(&self, name: &str, stage: &str) -> Result<Vec<T>> {
        let path = self.config.output_dir().join(name);
        if !path.exists() {
            return Err(PipelineError::Input {
                path: path.display().to_string(),
                message: format!("missing; run `{stage}` first"),
            });
        }
        read_jsonl(&path)
    }

    pub fn predictions(&self) -> Result<Vec<CsiPrediction>> {
        self.load_output(PREDICTIONS_FILE, "identify")
    }

    pub fn retrievals(&self) -> Result<Vec<Retrieval>> {
        self.load_output(RETRIEVALS_FILE, "retrieve")
    }

    /// OCR JSON → `entries.jsonl` + `alignment_report.jsonl`.
    pub fn ingest(&self, ocr: &Path) -> Result<IngestSummary> {
        let json = std::fs::read_to_string(ocr).map_err(|e| PipelineError::Input {
            path: ocr.display().to_string(),
            message: e.to_string(),
        })?;
        let mt;
        let similarity: &dyn SimilarityFn = match &self.config.roles.ingest_mt {
            Some(id) => {
                mt = self.backend(id)?;
                &MtCosineSimilarity { backend: &mt }
            }
            None => &UniformSimilarity,
        };
        let (entries, report) = ingest::ingest_page(&json, similarity, &self.config.ingest, self.options.exec)?;
        save_corpus(&entries, self.output(ENTRIES_FILE)?)?;
        write_jsonl(&report, &self.output(ALIGNMENT_FILE)?)?;
        Ok(IngestSummary {
            entries: entries.len(),
            candidates: report.len(),
        })
    }

    /// Runs the selected checks over every entry → `predictions.jsonl`.
    pub fn identify(&self) -> Result<IdentifySummary> {
        let entries = self.entries()?;
        let segmenter = self.segmenter()?;
        let table = self.freq_table(&entries, &segmenter)?;
        let checks = &self.config.identify.checks;
        let roles = &self.config.roles;
        let role = |name: &'static str, id: &Option<String>| -> Result<Arc<Backend>> {
            let id = id
                .as_deref()
                .ok_or_else(|| PipelineError::Config(ConfigError::Invalid(format!("roles.{name} is needed for the selected checks"))))?;
            self.backend(id)
        };
        let (forward, reverse) = if checks.contains(&Check::Rtt) {
            (Some(role("rtt_forward", &roles.rtt_forward)?), Some(role("rtt_reverse", &roles.rtt_reverse)?))
        } else {
            (None, None)
        };
        let wiki = if checks.contains(&Check::Hs) {
            if roles.wiki.is_empty() {
                return Err(ConfigError::Invalid("roles.wiki is needed for the hs check".into()).into());
            }
            let editions = roles.wiki.iter().map(|id| self.backend(id)).collect::<Result<Vec<_>>>()?;
            Some(WikiClient::new(editions))
        } else {
            None
        };
        let identifier = Identifier {
            segmenter: &segmenter,
            table: &table,
            forward: forward.as_deref(),
            reverse: reverse.as_deref(),
            wiki: wiki.as_ref(),
            config: self.config.identify.clone(),
        };
        identifier.validate()?;
        let predictions = identifier.identify_all(&entries, self.options.exec);
        write_jsonl(&predictions, &self.output(PREDICTIONS_FILE)?)?;
        let failed: Vec<&CsiPrediction> = predictions.iter().filter(|p| !p.errors.is_empty()).collect();
        if let Some(first) = failed.first() {
            if !self.options.keep_going {
                return Err(PipelineError::CheckFailures {
                    count: failed.len(),
                    first: format!("{}: {}", first.entry_id, first.errors[0]),
                });
            }
            log::warn!("{} entries had check failures; kept as \"no\" votes", failed.len());
        }
        Ok(IdentifySummary {
            entries: predictions.len(),
            csi_entries: predictions.iter().filter(|p| p.is_csi).count(),
            failed_entries: failed.len(),
        })
    }

    /// Top-k recipes per entry, queried with the dish name and its
    /// predicted spans → `retrievals.jsonl`.
    pub fn retrieve(&self) -> Result<usize> {
        let entries = self.entries()?;
        let segmenter = self.segmenter()?;
        let recipes = self.recipes()?;
        let predictions = self.predictions()?;
        let by_id: HashMap<&str, &CsiPrediction> = predictions.iter().map(|p| (p.entry_id.as_str(), p)).collect();
        let cfg = &self.config.retrieval;
        let index = build_index(&recipes, &segmenter, cfg)?;
        let k = self.config.translate.top_k;
        let rows = self.options.exec.map(&entries, |e| {
            let spans = by_id.get(e.id.as_str()).map(|p| p.spans.as_slice()).unwrap_or_default();
            let query = DishQuery::new(&e.zh_text, spans, &segmenter);
            let (hits, no_match) = retrieve_top(&index, &query, k, cfg, Exec::Sequential);
            retrievals_for(&e.id, &hits, no_match)
        });
        let rows: Vec<Retrieval> = rows.into_iter().flatten().collect();
        write_jsonl(&rows, &self.output(RETRIEVALS_FILE)?)?;
        Ok(rows.len())
    }

    fn templates(&self) -> Templates {
        Templates::new(self.config.mode.fix_typos)
    }

    /// Prompt specs for every (entry, strategy) pair, in entry order.
    fn plan(&self, entries: &[MenuEntry], strategies: &[Strategy]) -> Result<Vec<(String, PromptSpec)>> {
        let templates = self.templates();
        let needs_recipe = strategies.iter().any(|s| s.requires_recipe());
        let predictions = match self.predictions() {
            Ok(p) => p,
            Err(err) if !strategies.contains(&Strategy::RecipeEtt) && !needs_recipe => {
                log::debug!("no predictions: {err}");
                Vec::new()
            }
            Err(err) => return Err(err),
        };
        let by_pred: HashMap<&str, &CsiPrediction> = predictions.iter().map(|p| (p.entry_id.as_str(), p)).collect();
        let (recipes, retrievals) = if needs_recipe {
            (self.recipes()?, self.retrievals()?)
        } else {
            (Vec::new(), Vec::new())
        };
        let recipe_by_id: HashMap<&str, &Recipe> = recipes.iter().map(|r| (r.id.as_str(), r)).collect();
        let mut top: HashMap<&str, &Retrieval> = HashMap::new();
        for r in &retrievals {
            if r.rank == 1 {
                top.insert(r.entry_id.as_str(), r);
            }
        }
        let mut plan = Vec::with_capacity(entries.len() * strategies.len());
        for e in entries {
            let span = span_text(by_pred.get(e.id.as_str()).copied());
            for &strategy in strategies {
                let recipe = if strategy.requires_recipe() {
                    let r = top.get(e.id.as_str()).ok_or_else(|| PipelineError::Input {
                        path: RETRIEVALS_FILE.into(),
                        message: format!("no retrieved recipe for entry `{}`", e.id),
                    })?;
                    let recipe = recipe_by_id.get(r.recipe_id.as_str()).ok_or_else(|| PipelineError::Input {
                        path: RETRIEVALS_FILE.into(),
                        message: format!("recipe `{}` is not in the recipe corpus", r.recipe_id),
                    })?;
                    Some((*recipe).clone())
                } else {
                    None
                };
                plan.push((e.id.clone(), templates.spec(strategy, &e.zh_text, span.as_deref(), recipe)?));
            }
        }
        Ok(plan)
    }

    /// Rendered prompts → `prompts.jsonl`.
    pub fn prompt(&self) -> Result<usize> {
        let entries = self.entries()?;
        let templates = self.templates();
        let plan = self.plan(&entries, &self.config.translate.strategies)?;
        let records: Vec<PromptRecord> = plan
            .iter()
            .map(|(id, spec)| PromptRecord {
                entry_id: id.clone(),
                strategy: spec.strategy,
                prompt_text: templates.render(spec),
                template_version: spec.template_version.clone(),
            })
            .collect();
        write_jsonl(&records, &self.output(PROMPTS_FILE)?)?;
        Ok(records.len())
    }

    /// Sends every missing (entry, strategy) prompt to the chat backend →
    /// `translations.jsonl`. Existing successful records are kept.
    pub fn translate(&self) -> Result<TranslateSummary> {
        let chat_id = self
            .config
            .roles
            .chat
            .clone()
            .ok_or_else(|| ConfigError::Invalid("roles.chat is needed to translate".into()))?;
        let entries = self.entries()?;
        let strategies = &self.config.translate.strategies;
        let out_path = self.output(TRANSLATIONS_FILE)?;
        let existing: Vec<TranslationRecord> = if out_path.exists() { load_corpus(&out_path)? } else { Vec::new() };
        let done: HashSet<(String, Strategy)> = existing
            .iter()
            .filter(|r| r.status != TranslationStatus::Error && r.backend_id == chat_id)
            .map(|r| (r.entry_id.clone(), r.strategy))
            .collect();
        let plan = self.plan(&entries, strategies)?;
        let todo: Vec<&(String, PromptSpec)> = plan.iter().filter(|(id, spec)| !done.contains(&(id.clone(), spec.strategy))).collect();
        let chat = if todo.is_empty() { None } else { Some(self.backend(&chat_id)?) };
        let templates = self.templates();

        let results = self.options.exec.map(&todo, |(entry_id, spec)| {
            let prompt_text = templates.render(spec);
            let chat = chat.as_ref().expect("backend built when work remains");
            match chat.complete(&prompt_text) {
                Ok(resp) => {
                    let (final_translation, status) = match parse_response(spec.strategy, &resp.text) {
                        Ok(p) if p.warning.is_none() => (p.translation, TranslationStatus::Ok),
                        Ok(p) => {
                            log::warn!("entry {entry_id} ({}): {}", spec.strategy, p.warning.unwrap_or_default());
                            (p.translation, TranslationStatus::ParseWarning)
                        }
                        Err(err) => {
                            log::warn!("entry {entry_id} ({}): {err}", spec.strategy);
                            (String::new(), TranslationStatus::ParseWarning)
                        }
                    };
                    (
                        TranslationRecord {
                            entry_id: entry_id.clone(),
                            backend_id: chat_id.clone(),
                            strategy: spec.strategy,
                            prompt_text,
                            raw_response: resp.text,
                            final_translation,
                            status,
                            timestamp: resp.created_at,
                        },
                        None,
                    )
                }
                Err(err) => (
                    TranslationRecord {
                        entry_id: entry_id.clone(),
                        backend_id: chat_id.clone(),
                        strategy: spec.strategy,
                        prompt_text,
                        raw_response: String::new(),
                        final_translation: String::new(),
                        status: TranslationStatus::Error,
                        timestamp: 0,
                    },
                    Some(err),
                ),
            }
        });

        let mut fresh: HashMap<(String, Strategy), TranslationRecord> = HashMap::new();
        let mut first_error = None;
        let mut errors = 0;
        for (rec, failure) in results {
            let record = match failure {
                None => rec,
                Some(err) => {
                    errors += 1;
                    log::warn!("entry {} ({}): {err}", rec.entry_id, rec.strategy);
                    first_error.get_or_insert(err);
                    if !self.options.keep_going {
                        continue;
                    }
                    rec
                }
            };
            fresh.insert((record.entry_id.clone(), record.strategy), record);
        }
        let new = fresh.values().filter(|r| r.status != TranslationStatus::Error).count();

        // planned pairs first, in plan order; then unrelated old records
        let mut old: HashMap<(String, Strategy), TranslationRecord> = HashMap::new();
        let mut leftovers = Vec::new();
        for r in existing {
            let key = (r.entry_id.clone(), r.strategy);
            if done.contains(&key) {
                old.insert(key, r);
            } else if !plan.iter().any(|(id, s)| *id == key.0 && s.strategy == key.1) {
                leftovers.push(r);
            }
        }
        let mut records = Vec::with_capacity(plan.len() + leftovers.len());
        for (id, spec) in &plan {
            let key = (id.clone(), spec.strategy);
            if let Some(r) = old.remove(&key).or_else(|| fresh.remove(&key)) {
                records.push(r);
            }
        }
        records.extend(leftovers);
        save_corpus(&records, &out_path)?;

        if let (Some(err), false) = (first_error, self.options.keep_going) {
            return Err(err.into());
        }
        Ok(TranslateSummary {
            total: records.len(),
            new,
            warnings: records.iter().filter(|r| r.status == TranslationStatus::ParseWarning).count(),
            errors,
        })
    }

    fn comet_scores(&self, entries: &[MenuEntry], gold: &[CsiAnnotation]) -> Result<Vec<ScoreRecord>> {
        let translations: Vec<TranslationRecord> = {
            let path = self.config.output_dir().join(TRANSLATIONS_FILE);
            if !path.exists() {
                return Err(PipelineError::Input {
                    path: path.display().to_string(),
                    message: "missing; run `translate` first".into(),
                });
            }
            load_corpus(path)?
        };
        let categories: HashMap<String, u8> = gold
            .iter()
            .filter(|g| g.label.label() > 0)
            .map(|g| (g.entry_id.clone(), g.label.label()))
            .collect();
        let scored: Vec<TranslationRecord> = translations.into_iter().filter(|t| categories.contains_key(&t.entry_id)).collect();
        let (triplets, sources) = comet::build_triplets(&scored, entries);
        let scores = comet::score_triplets(&self.config.comet, &triplets, &self.output_dir()?)?;
        Ok(comet::to_score_records(&scores, &sources, &categories)?)
    }

    /// Span P/R/F1 for the combined vote and each check, plus a score
    /// table when scores are available → `report.txt`, `report.csv`.
    pub fn evaluate(&self, source: ScoreSource) -> Result<EvaluateSummary> {
        let entries = self.entries()?;
        let segmenter = self.segmenter()?;
        let annotations = self.annotations(&entries)?;
        let (gold, dropped) = eval::consensus_gold(&annotations, &entries);
        if !dropped.is_empty() {
            log::info!("{} entries have no consensus annotation and are not scored", dropped.len());
        }
        let mode: MatchMode = self
            .config
            .evaluate
            .match_mode
            .parse()
            .map_err(|m: String| PipelineError::Config(ConfigError::Invalid(m)))?;
        let predictions = self.predictions()?;
        let annotated: HashSet<&str> = annotations.iter().map(|a| a.entry_id.as_str()).collect();
        if let Some(p) = predictions.iter().find(|p| !annotated.contains(p.entry_id.as_str())) {
            return Err(EvalError::MissingGold(p.entry_id.clone()).into());
        }
        let dropped_set: HashSet<&str> = dropped.iter().map(String::as_str).collect();
        let scored: Vec<CsiPrediction> = predictions.into_iter().filter(|p| !dropped_set.contains(p.entry_id.as_str())).collect();

        let checks: BTreeSet<Check> = scored.iter().flat_map(|p| p.checks.iter().copied()).collect();
        let mut sources = vec![SpanSource::Combined];
        sources.extend(checks.into_iter().map(SpanSource::Check));
        let mut spans = Vec::new();
        for s in sources {
            spans.push((s.name(), eval::span_prf(&scored, &gold, &entries, &segmenter, mode, s)?));
        }

        let score_records: Option<Vec<ScoreRecord>> = match source {
            ScoreSource::Comet => Some(self.comet_scores(&entries, &gold)?),
            ScoreSource::File => match &self.config.paths.scores {
                Some(p) => Some(read_jsonl(&self.path("scores", &Some(p.clone()))?)?),
                None => None,
            },
        };
        let known: HashSet<&str> = entries.iter().map(|e| e.id.as_str()).collect();
        if let Some(bad) = score_records.iter().flatten().find(|s| !known.contains(s.entry_id.as_str())) {
            return Err(EvalError::UnknownEntry(bad.entry_id.clone()).into());
        }
        let scores = score_records
            .map(|s| eval::aggregate_scores(&s, &self.config.evaluate.baseline))
            .transpose()?;

        let mut text = String::new();
        let _ = writeln!(text, "Span identification ({} match, {} gold entries)\n", self.config.evaluate.match_mode, gold.len());
        text.push_str(&eval::render_span_text(&spans));
        if let Some(t) = &scores {
            let _ = writeln!(text, "\nScores (deltas against {})\n", t.baseline);
            text.push_str(&t.render_text());
        }
        write_text(&self.output(REPORT_TXT)?, &text)?;
        write_text(&self.output(REPORT_CSV)?, &eval::render_report_csv(&spans, scores.as_ref()))?;
        Ok(EvaluateSummary {
            spans,
            scores,
            dropped_gold: dropped,
            text,
        })
    }

    /// Agreement over an annotation file (Fleiss over all raters, Cohen
    /// for every annotator pair) or over a count matrix → `kappa.txt`.
    pub fn kappa(&self, annotations: Option<&Path>, matrix: Option<&Path>) -> Result<String> {
        let mut text = String::new();
        if let Some(path) = matrix {
            let raw = std::fs::read_to_string(path).map_err(|e| PipelineError::Input {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let m = parse_count_matrix(&raw).map_err(|message| PipelineError::Input {
                path: path.display().to_string(),
                message,
            })?;
            let r = eval::fleiss_kappa(&m)?;
            let _ = writeln!(text, "fleiss\t{:.6}\titems={}\traters={}", r.kappa, r.n_items, r.n_raters);
        } else {
            let path = match annotations {
                Some(p) => p.to_path_buf(),
                None => self.path("annotations", &self.config.paths.annotations)?,
            };
            let anns: Vec<CsiAnnotation> = load_corpus(&path)?;
            let items = eval::labels_by_entry(&anns);
            let labels: Vec<Vec<crate::corpus::Category>> = items.iter().map(|(_, v)| v.iter().map(|(_, l)| *l).collect()).collect();
            let fleiss = eval::fleiss_from_labels(&labels)?;
            let _ = writeln!(text, "fleiss\t{:.6}\titems={}\traters={}", fleiss.kappa, fleiss.n_items, fleiss.n_raters);
            let annotators: BTreeSet<&str> = anns.iter().map(|a| a.annotator_id.as_str()).collect();
            let annotators: Vec<&str> = annotators.into_iter().collect();
            for (i, a) in annotators.iter().enumerate() {
                for b in &annotators[i + 1..] {
                    let (mut xs, mut ys) = (Vec::new(), Vec::new());
                    for (_, v) in &items {
                        let la = v.iter().find(|(id, _)| id == a).map(|(_, l)| *l);
                        let lb = v.iter().find(|(id, _)| id == b).map(|(_, l)| *l);
                        if let (Some(x), Some(y)) = (la, lb) {
                            xs.push(x);
                            ys.push(y);
                        }
                    }
                    if let Ok(r) = eval::cohen_kappa(&xs, &ys) {
                        let _ = writeln!(text, "cohen\t{:.6}\t{a}~{b}\titems={}", r.kappa, r.n_items);
                    }
                }
            }
        }
        write_text(&self.output(KAPPA_FILE)?, &text)?;
        Ok(text)
    }
}

#[cfg(feature = "http")]
fn http_transport(desc: &crate::backends::BackendDescriptor) -> Result<Box<dyn Transport>> {
    crate::backends::http::HttpTransport::new(desc)
        .map(|t| Box::new(t) as Box<dyn Transport>)
        .map_err(|e| PipelineError::Unavailable(desc.backend_id.clone(), e.to_string()))
}

#[cfg(not(feature = "http"))]
fn http_transport(desc: &crate::backends::BackendDescriptor) -> Result<Box<dyn Transport>> {
    Err(PipelineError::Unavailable(desc.backend_id.clone(), "built without the `http` feature".into()))
}
