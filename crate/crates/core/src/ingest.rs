//! Bilingual menu pages from OCR blocks: price tags anchor each dish, and
//! the best (Chinese, English) block pair near the anchor is kept.
//!
//! `score = similarity − λ · gap`, where `gap` is the centroid distance of
//! the two blocks over the page diagonal. Candidates sit within
//! `radius_factor ×` the median block height of the anchor, vertically,
//! anywhere horizontally.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{Backend, BackendError};
use crate::corpus::{nfc, MenuEntry, Source};
use crate::exec::Exec;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("ocr input is not a JSON array of blocks: {0}")]
    Json(#[from] serde_json::Error),
    #[error("block {index} (`{text}`): {message}")]
    BadBlock { index: usize, text: String, message: String },
    #[error("price pattern {0}: {1}")]
    BadPattern(String, regex::Error),
    #[error("similarity for block pair failed: {0}")]
    Similarity(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrBlock {
    pub text: String,
    /// `[x_min, y_min, x_max, y_max]` in pixels.
    pub bbox: [f64; 4],
    pub page_id: String,
}

impl OcrBlock {
    pub fn centroid(&self) -> (f64, f64) {
        ((self.bbox[0] + self.bbox[2]) / 2.0, (self.bbox[1] + self.bbox[3]) / 2.0)
    }

    pub fn height(&self) -> f64 {
        self.bbox[3] - self.bbox[1]
    }

    fn validate(&self, index: usize) -> Result<(), IngestError> {
        let bad = |message: &str| IngestError::BadBlock {
            index,
            text: self.text.clone(),
            message: message.to_string(),
        };
        let [x0, y0, x1, y1] = self.bbox;
        if self.bbox.iter().any(|v| !v.is_finite()) {
            return Err(bad("bbox has a non-finite coordinate"));
        }
        if x0 >= x1 {
            return Err(bad("bbox needs x_min < x_max"));
        }
        if y0 >= y1 {
            return Err(bad("bbox needs y_min < y_max"));
        }
        if self.text.trim().is_empty() {
            return Err(bad("empty text"));
        }
        Ok(())
    }
}

fn reading_cmp(a: &OcrBlock, b: &OcrBlock) -> Ordering {
    a.page_id
        .cmp(&b.page_id)
        .then(a.bbox[1].total_cmp(&b.bbox[1]))
        .then(a.bbox[0].total_cmp(&b.bbox[0]))
        .then(a.bbox[3].total_cmp(&b.bbox[3]))
        .then(a.bbox[2].total_cmp(&b.bbox[2]))
        .then(a.text.cmp(&b.text))
}

/// Parses and validates `ocr.json`. Text is NFC-normalized.
pub fn parse_ocr(json: &str) -> Result<Vec<OcrBlock>, IngestError> {
    #[derive(Deserialize)]
    struct Raw {
        text: String,
        bbox: Vec<f64>,
        page_id: String,
    }
    let raw: Vec<serde_json::Value> = serde_json::from_str(json)?;
    raw.into_iter()
        .enumerate()
        .map(|(index, value)| {
            let text_hint = value.get("text").and_then(|t| t.as_str()).unwrap_or("").to_string();
            let r: Raw = serde_json::from_value(value).map_err(|e| IngestError::BadBlock {
                index,
                text: text_hint.clone(),
                message: e.to_string(),
            })?;
            let bbox: [f64; 4] = r.bbox.try_into().map_err(|v: Vec<f64>| IngestError::BadBlock {
                index,
                text: text_hint,
                message: format!("bbox needs 4 numbers, got {}", v.len()),
            })?;
            let block = OcrBlock {
                text: nfc(r.text.trim()),
                bbox,
                page_id: r.page_id,
            };
            block.validate(index)?;
            Ok(block)
        })
        .collect()
}

pub const DEFAULT_PRICE_PATTERN: &str = r"^[£$¥]?\s*(\d{1,3}\.\d{2})$";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceAnchor {
    /// Index into the block list given to [`detect_prices`].
    pub block: usize,
    pub value: f64,
    pub pattern_id: usize,
}

pub fn price_patterns(patterns: &[String]) -> Result<Vec<Regex>, IngestError> {
    patterns
        .iter()
        .map(|p| Regex::new(p).map_err(|e| IngestError::BadPattern(p.clone(), e)))
        .collect()
}

pub fn default_price_patterns() -> Vec<Regex> {
    vec![Regex::new(DEFAULT_PRICE_PATTERN).expect("valid default pattern")]
}

/// One anchor per block whose trimmed text matches a pattern (first
/// matching pattern wins). The value is capture group 1.
pub fn detect_prices(blocks: &[OcrBlock], patterns: &[Regex]) -> Vec<PriceAnchor> {
    blocks
        .iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let text = b.text.trim();
            patterns.iter().enumerate().find_map(|(pid, re)| {
                let caps = re.captures(text)?;
                let value: f64 = caps.get(1).map(|m| m.as_str()).unwrap_or(text).parse().ok()?;
                (value >= 0.0).then_some(PriceAnchor {
                    block: i,
                    value,
                    pattern_id: pid,
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Script {
    Chinese,
    English,
    Mixed,
    Other,
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF | 0x2A700..=0x2EBEF | 0x30000..=0x3134F)
}

fn is_latin(c: char) -> bool {
    c.is_ascii_alphabetic() || (c.is_alphabetic() && matches!(c as u32, 0xC0..=0x24F | 0x1E00..=0x1EFF))
}

/// Majority script among the letters of `text`.
pub fn classify_script(text: &str) -> Script {
    let (mut letters, mut cjk, mut latin) = (0usize, 0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if is_cjk(c) {
            cjk += 1;
        } else if is_latin(c) {
            latin += 1;
        }
    }
    if letters == 0 {
        Script::Other
    } else if 2 * cjk > letters {
        Script::Chinese
    } else if 2 * latin > letters {
        Script::English
    } else {
        Script::Mixed
    }
}

/// Cross-lingual similarity in `[0, 1]` between a Chinese and an English
/// block.
pub trait SimilarityFn: Sync {
    fn similarity(&self, zh: &str, en: &str) -> Result<f64, BackendError>;
}

/// Geometry-only fallback: every pair is equally similar.
pub struct UniformSimilarity;

impl SimilarityFn for UniformSimilarity {
    fn similarity(&self, _zh: &str, _en: &str) -> Result<f64, BackendError> {
        Ok(1.0)
    }
}

/// Translates the Chinese block and compares word multisets by cosine.
pub struct MtCosineSimilarity<'a> {
    pub backend: &'a Backend,
}

impl SimilarityFn for MtCosineSimilarity<'_> {
    fn similarity(&self, zh: &str, en: &str) -> Result<f64, BackendError> {
        let translated = self.backend.translate(zh, "zh", "en")?;
        Ok(cosine_bow(&translated, en))
    }
}

fn bag(text: &str) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for w in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        *out.entry(w.to_lowercase()).or_insert(0.0) += 1.0;
    }
    out
}

/// Cosine similarity of lowercase word-count vectors; 0 if either is empty.
pub fn cosine_bow(a: &str, b: &str) -> f64 {
    let (a, b) = (bag(a), bag(b));
    let dot: f64 = a.iter().map(|(w, x)| x * b.get(w).copied().unwrap_or(0.0)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub lambda: f64,
    pub radius_factor: f64,
    pub price_patterns: Vec<String>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            lambda: 0.5,
            radius_factor: 1.5,
            price_patterns: vec![DEFAULT_PRICE_PATTERN.to_string()],
        }
    }
}

/// One scored (Chinese, English) pair for an anchor; every candidate is
/// reported for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCandidate {
    pub entry_id: String,
    pub page_id: String,
    pub anchor_text: String,
    pub zh_text: String,
    pub zh_bbox: [f64; 4],
    pub en_text: String,
    pub en_bbox: [f64; 4],
    pub similarity: f64,
    /// Centroid distance in pixels.
    pub gap_distance: f64,
    pub normalized_gap: f64,
    pub score: f64,
    pub selected: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Picks the best pair per anchor. The result does not depend on the
/// order of `blocks`; `anchors` index into `blocks`.
pub fn align(
    blocks: &[OcrBlock],
    anchors: &[PriceAnchor],
    similarity: &dyn SimilarityFn,
    config: &AlignConfig,
    exec: Exec,
) -> Result<(Vec<MenuEntry>, Vec<AlignmentCandidate>), IngestError> {
    let anchor_blocks: std::collections::HashSet<usize> = anchors.iter().map(|a| a.block).collect();
    // page geometry
    let mut heights: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut extent: HashMap<&str, (f64, f64)> = HashMap::new();
    for b in blocks {
        heights.entry(&b.page_id).or_default().push(b.height());
        let e = extent.entry(&b.page_id).or_insert((0.0, 0.0));
        e.0 = e.0.max(b.bbox[2]);
        e.1 = e.1.max(b.bbox[3]);
    }
    let median_height: HashMap<&str, f64> = heights.into_iter().map(|(p, mut h)| (p, median(&mut h))).collect();
    let diagonal: HashMap<&str, f64> = extent.into_iter().map(|(p, (w, h))| (p, (w * w + h * h).sqrt())).collect();

    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by(|&a, &b| reading_cmp(&blocks[a], &blocks[b]));
    let scripts: Vec<Script> = blocks.iter().map(|b| classify_script(&b.text)).collect();

    // anchors in reading order, numbered per page
    let mut sorted_anchors: Vec<&PriceAnchor> = anchors.iter().collect();
    sorted_anchors.sort_by(|a, b| reading_cmp(&blocks[a.block], &blocks[b.block]));
    let mut per_page: HashMap<&str, usize> = HashMap::new();
    let numbered: Vec<(String, &PriceAnchor)> = sorted_anchors
        .into_iter()
        .map(|a| {
            let page = blocks[a.block].page_id.as_str();
            let n = per_page.entry(page).or_insert(0);
            *n += 1;
            (format!("{page}-{n:04}"), a)
        })
        .collect();

    let results = exec.try_map(&numbered, |(entry_id, anchor)| {
        let ab = &blocks[anchor.block];
        let page = ab.page_id.as_str();
        let radius = config.radius_factor * median_height[page];
        let diag = diagonal[page].max(f64::MIN_POSITIVE);
        let (_, ay) = ab.centroid();
        let near = |script: Script| -> Vec<usize> {
            order
                .iter()
                .copied()
                .filter(|&i| {
                    let b = &blocks[i];
                    b.page_id == ab.page_id
                        && !anchor_blocks.contains(&i)
                        && scripts[i] == script
                        && (b.centroid().1 - ay).abs() <= radius
                })
                .collect()
        };
        let (zh, en) = (near(Script::Chinese), near(Script::English));
        let mut cands = Vec::with_capacity(zh.len() * en.len());
        for &z in &zh {
            for &e in &en {
                let (zb, eb) = (&blocks[z], &blocks[e]);
                let sim = similarity.similarity(&zb.text, &eb.text)?;
                let gap = distance(zb.centroid(), eb.centroid());
                let norm = gap / diag;
                cands.push(AlignmentCandidate {
                    entry_id: entry_id.clone(),
                    page_id: ab.page_id.clone(),
                    anchor_text: ab.text.clone(),
                    zh_text: zb.text.clone(),
                    zh_bbox: zb.bbox,
                    en_text: eb.text.clone(),
                    en_bbox: eb.bbox,
                    similarity: sim,
                    gap_distance: gap,
                    normalized_gap: norm,
                    score: sim - config.lambda * norm,
                    selected: false,
                });
            }
        }
        // candidates are generated in reading order, so the first of equal
        // (score, gap) pairs is the earliest one
        let best = cands
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| {
                a.score
                    .total_cmp(&b.score)
                    .then(b.normalized_gap.total_cmp(&a.normalized_gap))
                    .then(j.cmp(i))
            })
            .map(|(i, _)| i);
        let entry = match best {
            Some(i) => {
                cands[i].selected = true;
                let c = &cands[i];
                Some(MenuEntry {
                    id: entry_id.clone(),
                    zh_text: c.zh_text.clone(),
                    en_ref: Some(c.en_text.clone()),
                    price: Some(anchor.value),
                    restaurant_id: None,
                    source: Source::Ocr,
                })
            }
            None => {
                log::warn!("price `{}` on page {page}: no Chinese/English block pair within radius; skipped", ab.text);
                None
            }
        };
        Ok::<_, IngestError>((entry, cands))
    })?;

    let mut entries = Vec::new();
    let mut report = Vec::new();
    for (entry, cands) in results {
        entries.extend(entry);
        report.extend(cands);
    }
    Ok((entries, report))
}

/// Parse → detect → align, with the configured patterns.
pub fn ingest_page(
    json: &str,
    similarity: &dyn SimilarityFn,
    config: &AlignConfig,
    exec: Exec,
) -> Result<(Vec<MenuEntry>, Vec<AlignmentCandidate>), IngestError> {
    let blocks = parse_ocr(json)?;
    let patterns = price_patterns(&config.price_patterns)?;
    let anchors = detect_prices(&blocks, &patterns);
    align(&blocks, &anchors, similarity, config, exec)
}
