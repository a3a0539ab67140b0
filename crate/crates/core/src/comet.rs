//! File contract with the external COMET scorer: `(src, mt, ref)` triplets
//! go out as JSONL, one segment score per line comes back in the same
//! order. The scorer itself runs as a subprocess.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{MenuEntry, TranslationRecord, TranslationStatus};
use crate::eval::ScoreRecord;

pub const DEFAULT_MODEL: &str = "Unbabel/wmt22-comet-da";

#[derive(Debug, Error)]
pub enum CometError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path} line {line}: {message}")]
    Line { path: String, line: usize, message: String },
    #[error("scorer returned {got} scores for {expected} triplets")]
    CountMismatch { expected: usize, got: usize },
    #[error("score line {line}: entry `{got}` where `{expected}` was expected")]
    OrderMismatch { line: usize, expected: String, got: String },
    #[error("scorer `{program}` failed to start: {source}")]
    Spawn { program: String, source: io::Error },
    #[error("scorer exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("no category for entry `{0}`")]
    MissingCategory(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringTriplet {
    pub entry_id: String,
    pub src: String,
    pub mt: String,
    #[serde(rename = "ref")]
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub entry_id: String,
    /// Model scale (0–1 for wmt22-comet-da).
    pub score: f64,
    pub model_id: String,
}

/// Triplets for every successful translation whose entry has a reference,
/// in translation order.
pub fn build_triplets<'a>(
    translations: &'a [TranslationRecord],
    entries: &[MenuEntry],
) -> (Vec<ScoringTriplet>, Vec<&'a TranslationRecord>) {
    let by_id: HashMap<&str, &MenuEntry> = entries.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut triplets = Vec::new();
    let mut sources = Vec::new();
    for t in translations {
        let Some(entry) = by_id.get(t.entry_id.as_str()) else { continue };
        let Some(reference) = entry.en_ref.as_deref().filter(|r| !r.trim().is_empty()) else {
            continue;
        };
        if t.status == TranslationStatus::Error || t.final_translation.trim().is_empty() {
            continue;
        }
        triplets.push(ScoringTriplet {
            entry_id: t.entry_id.clone(),
            src: entry.zh_text.clone(),
            mt: t.final_translation.clone(),
            reference: reference.to_string(),
        });
        sources.push(t);
    }
    (triplets, sources)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CometError + '_ {
    move |source| CometError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), CometError> {
    let mut out = io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CometError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CometError::Line {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_triplets(triplets: &[ScoringTriplet], path: &Path) -> Result<(), CometError> {
    write_jsonl(triplets, path)
}

pub fn read_triplets(path: &Path) -> Result<Vec<ScoringTriplet>, CometError> {
    let triplets: Vec<ScoringTriplet> = read_jsonl(path)?;
    for (i, t) in triplets.iter().enumerate() {
        if t.src.trim().is_empty() || t.mt.trim().is_empty() || t.reference.trim().is_empty() {
            return Err(CometError::Line {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("entry `{}` has an empty text field", t.entry_id),
            });
        }
    }
    Ok(triplets)
}

pub fn write_scores(scores: &[SegmentScore], path: &Path) -> Result<(), CometError> {
    write_jsonl(scores, path)
}

pub fn read_scores(path: &Path) -> Result<Vec<SegmentScore>, CometError> {
    read_jsonl(path)
}

/// Checks that `scores` answers `triplets` line by line.
pub fn check_alignment(triplets: &[ScoringTriplet], scores: &[SegmentScore]) -> Result<(), CometError> {
    if triplets.len() != scores.len() {
        return Err(CometError::CountMismatch {
            expected: triplets.len(),
            got: scores.len(),
        });
    }
    for (i, (t, s)) in triplets.iter().zip(scores).enumerate() {
        if t.entry_id != s.entry_id {
            return Err(CometError::OrderMismatch {
                line: i + 1,
                expected: t.entry_id.clone(),
                got: s.entry_id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CometConfig {
    /// Program and leading arguments, e.g. `["python", "-m", "comet_bridge"]`.
    pub command: Vec<String>,
    pub model: String,
    pub batch_size: usize,
    pub gpu: bool,
}

impl Default for CometConfig {
    fn default() -> Self {
        CometConfig {
            command: vec!["comet-bridge".into()],
            model: DEFAULT_MODEL.into(),
            batch_size: 16,
            gpu: false,
        }
    }
}

impl CometConfig {
    /// `<command…> --model M --batch-size N --gpu|--cpu IN OUT`
    pub fn command_line(&self, input: &Path, output: &Path) -> Command {
        let mut cmd = Command::new(self.command.first().map(String::as_str).unwrap_or("comet-bridge"));
        cmd.args(self.command.iter().skip(1))
            .arg("--model")
            .arg(&self.model)
            .arg("--batch-size")
            .arg(self.batch_size.to_string())
            .arg(if self.gpu { "--gpu" } else { "--cpu" })
            .arg(input)
            .arg(output);
        cmd
    }
}

/// Writes the triplets under `work_dir`, runs the scorer and reads back
/// order-checked scores.
pub fn score_triplets(config: &CometConfig, triplets: &[ScoringTriplet], work_dir: &Path) -> Result<Vec<SegmentScore>, CometError> {
    let input: PathBuf = work_dir.join("comet_triplets.jsonl");
    let output: PathBuf = work_dir.join("comet_scores.jsonl");
    write_triplets(triplets, &input)?;
    let mut cmd = config.command_line(&input, &output);
    log::info!("scoring {} triplets with {:?}", triplets.len(), cmd);
    let result = cmd.output().map_err(|source| CometError::Spawn {
        program: config.command.join(" "),
        source,
    })?;
    if !result.status.success() {
        return Err(CometError::Failed {
            status: result.status.to_string(),
            stderr: String::from_utf8_lossy(&result.stderr).trim().to_string(),
        });
    }
    let scores = read_scores(&output)?;
    check_alignment(triplets, &scores)?;
    Ok(scores)
}

/// Per-entry score records on the ×100 scale, labelled with the strategy
/// that produced each translation.
pub fn to_score_records(
    scores: &[SegmentScore],
    sources: &[&TranslationRecord],
    categories: &HashMap<String, u8>,
) -> Result<Vec<ScoreRecord>, CometError> {
    if scores.len() != sources.len() {
        return Err(CometError::CountMismatch {
            expected: sources.len(),
            got: scores.len(),
        });
    }
    scores
        .iter()
        .zip(sources)
        .map(|(s, t)| {
            let category = *categories
                .get(&t.entry_id)
                .ok_or_else(|| CometError::MissingCategory(t.entry_id.clone()))?;
            Ok(ScoreRecord {
                entry_id: t.entry_id.clone(),
                strategy: t.strategy.label().to_string(),
                score: s.score * 100.0,
                category,
            })
        })
        .collect()
}
