//! Persistent record types and their JSONL encoding.
//!
//! Every corpus file holds one JSON object per line. Keys are written in
//! struct declaration order and optional fields are always present (as
//! `null`), so equal record lists serialize to identical bytes.
//!
//! Text offsets are Unicode scalar-value offsets into the NFC-normalized
//! Chinese text, never byte offsets.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::prompt::Strategy;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: malformed {kind} record: {message}")]
    Malformed {
        path: String,
        line: usize,
        kind: &'static str,
        message: String,
    },
    #[error("{kind} record `{id}`: invalid `{field}`: {message}")]
    Invalid {
        kind: &'static str,
        id: String,
        field: &'static str,
        message: String,
    },
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
}

impl CorpusError {
    fn invalid(kind: &'static str, id: &str, field: &'static str, message: impl Into<String>) -> Self {
        CorpusError::Invalid {
            kind,
            id: id.to_string(),
            field,
            message: message.into(),
        }
    }
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

pub(crate) fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring by scalar-value offsets. Returns `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let begin = indices.nth(start)?;
    if end == start {
        return Some(&text[begin..begin]);
    }
    let finish = indices.nth(end - start - 1)?;
    Some(&text[begin..finish])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Ocr,
    Manual,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuEntry {
    pub id: String,
    pub zh_text: String,
    pub en_ref: Option<String>,
    pub price: Option<f64>,
    pub restaurant_id: Option<String>,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CsiSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl CsiSpan {
    /// Builds a span over `text`, taking the surface from the offsets.
    pub fn over(text: &str, start: usize, end: usize) -> Option<Self> {
        if start >= end {
            return None;
        }
        char_slice(text, start, end).map(|surface| CsiSpan {
            start,
            end,
            surface: surface.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

/// CSI category label: 0 Non-CSI, 1 Concrete, 2 Creative, 3 Abstract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Category {
    NonCsi = 0,
    Concrete = 1,
    Creative = 2,
    Abstract = 3,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::NonCsi,
        Category::Concrete,
        Category::Creative,
        Category::Abstract,
    ];
    pub const CSI: [Category; 3] = [Category::Concrete, Category::Creative, Category::Abstract];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::NonCsi => "Non-CSI",
            Category::Concrete => "Concrete",
            Category::Creative => "Creative",
            Category::Abstract => "Abstract",
        }
    }

    /// Column heading used in score tables (`CSI-1` .. `CSI-3`).
    pub fn column(self) -> String {
        format!("CSI-{}", self.label())
    }
}

impl TryFrom<u8> for Category {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Category::NonCsi),
            1 => Ok(Category::Concrete),
            2 => Ok(Category::Creative),
            3 => Ok(Category::Abstract),
            other => Err(format!("category label must be 0..=3, got {other}")),
        }
    }
}

impl From<Category> for u8 {
    fn from(value: Category) -> Self {
        value.label()
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsiAnnotation {
    pub entry_id: String,
    pub label: Category,
    pub spans: Vec<CsiSpan>,
    pub annotator_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: String,
    pub name: String,
    pub instructions: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationStatus {
    Ok,
    ParseWarning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub entry_id: String,
    pub backend_id: String,
    pub strategy: Strategy,
    pub prompt_text: String,
    pub raw_response: String,
    pub final_translation: String,
    pub status: TranslationStatus,
    /// Unix seconds at which the serving response was first obtained.
    pub timestamp: u64,
}

/// A JSONL record kind with validation and an identity used for
/// duplicate detection.
pub trait Record: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn key(&self) -> String;

    /// Normalizes text fields in place and checks the record invariants.
    fn normalize_and_validate(&mut self) -> Result<(), CorpusError>;
}

impl Record for MenuEntry {
    const KIND: &'static str = "entry";

    fn key(&self) -> String {
        self.id.clone()
    }

    fn normalize_and_validate(&mut self) -> Result<(), CorpusError> {
        if self.id.trim().is_empty() {
            return Err(CorpusError::invalid(Self::KIND, &self.id, "id", "empty"));
        }
        self.zh_text = nfc(&self.zh_text);
        if self.zh_text.trim().is_empty() {
            return Err(CorpusError::invalid(Self::KIND, &self.id, "zh_text", "empty after trimming"));
        }
        if let Some(price) = self.price {
            if !price.is_finite() || price < 0.0 {
                return Err(CorpusError::invalid(
                    Self::KIND,
                    &self.id,
                    "price",
                    format!("must be a non-negative number, got {price}"),
                ));
            }
        }
        Ok(())
    }
}

impl Record for CsiAnnotation {
    const KIND: &'static str = "annotation";

    fn key(&self) -> String {
        format!("{}/{}", self.entry_id, self.annotator_id)
    }

    fn normalize_and_validate(&mut self) -> Result<(), CorpusError> {
        let id = self.key();
        if (self.label == Category::NonCsi) != self.spans.is_empty() {
            return Err(CorpusError::invalid(
                Self::KIND,
                &id,
                "spans",
                format!("label {} requires {} spans", self.label.label(), if self.label == Category::NonCsi { "no" } else { "at least one" }),
            ));
        }
        for span in &mut self.spans {
            span.surface = nfc(&span.surface);
            if span.start >= span.end {
                return Err(CorpusError::invalid(Self::KIND, &id, "spans", format!("empty span {}..{}", span.start, span.end)));
            }
            if char_len(&span.surface) != span.end - span.start {
                return Err(CorpusError::invalid(
                    Self::KIND,
                    &id,
                    "spans",
                    format!("surface `{}` does not fit offsets {}..{}", span.surface, span.start, span.end),
                ));
            }
        }
        let mut sorted: Vec<&CsiSpan> = self.spans.iter().collect();
        sorted.sort_by_key(|s| (s.start, s.end));
        if sorted.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(CorpusError::invalid(Self::KIND, &id, "spans", "overlapping spans"));
        }
        Ok(())
    }
}

impl Record for Recipe {
    const KIND: &'static str = "recipe";

    fn key(&self) -> String {
        self.id.clone()
    }

    fn normalize_and_validate(&mut self) -> Result<(), CorpusError> {
        self.name = nfc(&self.name);
        self.instructions = nfc(&self.instructions);
        if self.name.trim().is_empty() {
            return Err(CorpusError::invalid(Self::KIND, &self.id, "name", "empty"));
        }
        Ok(())
    }
}

impl Record for TranslationRecord {
    const KIND: &'static str = "translation";

    fn key(&self) -> String {
        format!("{}/{}/{}", self.entry_id, self.backend_id, self.strategy)
    }

    fn normalize_and_validate(&mut self) -> Result<(), CorpusError> {
        if self.status == TranslationStatus::Ok && self.final_translation.trim().is_empty() {
            return Err(CorpusError::invalid(Self::KIND, &self.key(), "final_translation", "empty with status ok"));
        }
        Ok(())
    }
}

/// Reads a JSONL corpus, normalizing and validating every record.
pub fn load_corpus<T: Record>(path: impl AsRef<Path>) -> Result<Vec<T>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file), &path.display().to_string())
}

pub fn read_corpus<T: Record, R: BufRead>(reader: R, origin: &str) -> Result<Vec<T>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: origin.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: T = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: origin.to_string(),
            line: index + 1,
            kind: T::KIND,
            message: e.to_string(),
        })?;
        record.normalize_and_validate()?;
        let key = record.key();
        if !seen.insert(key.clone()) {
            return Err(CorpusError::Duplicate { kind: T::KIND, id: key });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus<T: Record>(records: &[T], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_corpus(records, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_corpus<T: Serialize, W: Write>(records: &[T], out: &mut W) -> io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Checks annotation spans against the entries they point at: the entry
/// must exist and every span must index its surface inside `zh_text`.
pub fn validate_annotations(annotations: &[CsiAnnotation], entries: &[MenuEntry]) -> Result<(), CorpusError> {
    let by_id: std::collections::HashMap<&str, &MenuEntry> = entries.iter().map(|e| (e.id.as_str(), e)).collect();
    for ann in annotations {
        let entry = by_id.get(ann.entry_id.as_str()).ok_or_else(|| {
            CorpusError::invalid(CsiAnnotation::KIND, &ann.key(), "entry_id", "no such entry")
        })?;
        for span in &ann.spans {
            match char_slice(&entry.zh_text, span.start, span.end) {
                Some(s) if s == span.surface => {}
                Some(s) => {
                    return Err(CorpusError::invalid(
                        CsiAnnotation::KIND,
                        &ann.key(),
                        "spans",
                        format!("surface `{}` but text has `{s}` at {}..{}", span.surface, span.start, span.end),
                    ))
                }
                None => {
                    return Err(CorpusError::invalid(
                        CsiAnnotation::KIND,
                        &ann.key(),
                        "spans",
                        format!("offsets {}..{} outside `{}`", span.start, span.end, entry.zh_text),
                    ))
                }
            }
        }
    }
    Ok(())
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ocr" => Ok(Source::Ocr),
            "manual" => Ok(Source::Manual),
            "fixture" => Ok(Source::Fixture),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}
