//! CSI identification: round-trip translation (RTT), cultural uniqueness
//! (CU) and historical significance (HS) checks, combined by majority vote
//! per segmented word.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{Backend, BackendError, HistoryStatus, WikiClient};
use crate::corpus::{nfc, CsiSpan, MenuEntry};
use crate::exec::Exec;
use crate::segment::{Segmenter, Token};

pub const DEFAULT_PERCENTILE: f64 = 0.95;
pub const DEFAULT_GENERIC_THRESHOLD: u64 = 30;

#[derive(Debug, Error)]
pub enum IdentifyError {
    #[error("cannot build a frequency table from an empty corpus")]
    EmptyCorpus,
    #[error("percentile must lie in [0, 1], got {0}")]
    BadPercentile(f64),
    #[error("unknown check `{0}` (expected rtt, cu or hs)")]
    UnknownCheck(String),
    #[error("no checks selected")]
    NoChecks,
    #[error("check {0} is selected but its backend is not configured")]
    MissingBackend(Check),
    #[error("entry {entry_id}: {source}")]
    Backend {
        entry_id: String,
        #[source]
        source: BackendError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Rtt,
    Cu,
    Hs,
}

impl Check {
    pub const ALL: [Check; 3] = [Check::Rtt, Check::Cu, Check::Hs];

    pub fn as_str(self) -> &'static str {
        match self {
            Check::Rtt => "rtt",
            Check::Cu => "cu",
            Check::Hs => "hs",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Check {
    type Err = IdentifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rtt" => Ok(Check::Rtt),
            "cu" => Ok(Check::Cu),
            "hs" => Ok(Check::Hs),
            _ => Err(IdentifyError::UnknownCheck(s.to_string())),
        }
    }
}

/// Parses a comma-separated check list such as `rtt,cu`; the result is
/// sorted and deduplicated.
pub fn parse_checks(list: &str) -> Result<Vec<Check>, IdentifyError> {
    let mut checks = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Check::from_str)
        .collect::<Result<Vec<_>, _>>()?;
    checks.sort();
    checks.dedup();
    if checks.is_empty() {
        return Err(IdentifyError::NoChecks);
    }
    Ok(checks)
}

/// Strict majority of the votes: 2 of 3, 2 of 2, 1 of 1.
pub fn majority(votes: &[bool]) -> bool {
    let yes = votes.iter().filter(|v| **v).count();
    2 * yes > votes.len()
}

/// Linear-interpolation percentile at rank `q·(n−1)` of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Word counts over a menu corpus with the inverse-frequency cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqTable {
    counts: HashMap<String, u64>,
    cutoff: f64,
    percentile: f64,
}

impl FreqTable {
    /// `counts` must hold at least one word with a positive count.
    pub fn from_counts(counts: HashMap<String, u64>, percentile_q: f64) -> Result<Self, IdentifyError> {
        if !(0.0..=1.0).contains(&percentile_q) {
            return Err(IdentifyError::BadPercentile(percentile_q));
        }
        let counts: HashMap<String, u64> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        if counts.is_empty() {
            return Err(IdentifyError::EmptyCorpus);
        }
        let mut inv: Vec<f64> = counts.values().map(|&c| 1.0 / c as f64).collect();
        inv.sort_by(f64::total_cmp);
        Ok(FreqTable {
            cutoff: percentile(&inv, percentile_q),
            counts,
            percentile: percentile_q,
        })
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// `1 / count`, or 1 for unseen words.
    pub fn inv_freq(&self, word: &str) -> f64 {
        match self.count(word) {
            0 => 1.0,
            c => 1.0 / c as f64,
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn percentile(&self) -> f64 {
        self.percentile
    }

    pub fn counts(&self) -> &HashMap<String, u64> {
        &self.counts
    }

    /// Number of word types.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn is_rare(&self, word: &str) -> bool {
        self.inv_freq(word) > self.cutoff
    }
}

/// True for tokens that carry letters or ideographs; punctuation, digits
/// and whitespace never vote.
pub fn is_word(surface: &str) -> bool {
    surface.chars().any(char::is_alphabetic)
}

/// Counts precise-cut words over every dish name.
pub fn build_freq_table(entries: &[MenuEntry], segmenter: &dyn Segmenter, percentile_q: f64) -> Result<FreqTable, IdentifyError> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for entry in entries {
        for token in segmenter.precise_cut(&entry.zh_text) {
            if is_word(&token.surface) {
                *counts.entry(token.surface).or_default() += 1;
            }
        }
    }
    FreqTable::from_counts(counts, percentile_q)
}

pub fn cu_check<S: AsRef<str>>(words: &[S], table: &FreqTable) -> Vec<bool> {
    words.iter().map(|w| table.is_rare(w.as_ref())).collect()
}

/// Search-cut tokens of the original that survive subtraction of the RTT
/// words. A token survives only when neither it, nor any token nested in
/// its span, nor any token enclosing it occurs in the RTT output: a phrase
/// counts as omitted only if all of its words are, and a word carried by a
/// phrase that came back is not omitted.
pub fn rtt_survivors(search: &[Token], rtt_words: &HashSet<String>) -> Vec<Token> {
    search
        .iter()
        .filter(|t| {
            search
                .iter()
                .filter(|u| t.contains(u) || u.contains(t))
                .all(|u| !rtt_words.contains(&u.surface))
        })
        .cloned()
        .collect()
}

/// A precise word is flagged when some surviving token lies inside it.
pub fn rtt_flags(precise: &[Token], survivors: &[Token]) -> Vec<bool> {
    precise
        .iter()
        .map(|w| is_word(&w.surface) && survivors.iter().any(|s| w.contains(s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RttOutcome {
    pub forward: String,
    pub round_trip: String,
    pub survivors: Vec<Token>,
    pub flags: Vec<bool>,
}

/// Translates `text` forward and back, then subtracts the round-trip words.
pub fn rtt_check(
    text: &str,
    forward: &Backend,
    reverse: &Backend,
    segmenter: &dyn Segmenter,
    langs: (&str, &str),
) -> Result<RttOutcome, BackendError> {
    let (src, pivot) = langs;
    let en = forward.translate(text, src, pivot)?;
    let back = nfc(&reverse.translate(&en, pivot, src)?);
    let precise = segmenter.precise_cut(text);
    let rtt_words: HashSet<String> = segmenter
        .precise_cut(&back)
        .into_iter()
        .filter(|t| !t.surface.trim().is_empty())
        .map(|t| t.surface)
        .collect();
    if rtt_words.is_empty() {
        log::warn!("round trip of `{text}` came back empty; every word counts as omitted");
    }
    let survivors = rtt_survivors(&segmenter.search_cut(text), &rtt_words);
    let flags = rtt_flags(&precise, &survivors);
    Ok(RttOutcome {
        forward: en,
        round_trip: back,
        survivors,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HsResult {
    pub flags: Vec<bool>,
    /// Per word; `None` for words excluded as generic (or non-words).
    pub statuses: Vec<Option<HistoryStatus>>,
    /// Lookup of the full dish name, when one was needed.
    pub dish_status: Option<HistoryStatus>,
}

/// Words seen at least `threshold` times are generic and never flagged.
/// Any other word is flagged when its own page or the dish's page has a
/// history section.
pub fn hs_check(words: &[Token], dish_name: &str, wiki: &WikiClient, table: &FreqTable, threshold: u64) -> HsResult {
    let candidate: Vec<bool> = words
        .iter()
        .map(|w| is_word(&w.surface) && table.count(&w.surface) < threshold)
        .collect();
    let dish = candidate
        .iter()
        .any(|c| *c)
        .then(|| wiki.has_history_section(dish_name));
    let dish_hit = dish.map(|d| d.has_history).unwrap_or(false);
    let mut flags = Vec::with_capacity(words.len());
    let mut statuses = Vec::with_capacity(words.len());
    for (word, candidate) in words.iter().zip(candidate) {
        if !candidate {
            flags.push(false);
            statuses.push(None);
            continue;
        }
        // a word spelling the whole dish name shares the dish lookup
        let lookup = match dish {
            Some(d) if word.surface == dish_name.trim() => d,
            _ => wiki.has_history_section(&word.surface),
        };
        flags.push(lookup.has_history || dish_hit);
        statuses.push(Some(lookup.status));
    }
    HsResult {
        flags,
        statuses,
        dish_status: dish.map(|d| d.status),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyConfig {
    #[serde(default = "default_checks")]
    pub checks: Vec<Check>,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default = "default_generic")]
    pub generic_threshold: u64,
    #[serde(default = "default_src")]
    pub source_lang: String,
    #[serde(default = "default_pivot")]
    pub pivot_lang: String,
}

fn default_checks() -> Vec<Check> {
    Check::ALL.to_vec()
}
fn default_percentile() -> f64 {
    DEFAULT_PERCENTILE
}
fn default_generic() -> u64 {
    DEFAULT_GENERIC_THRESHOLD
}
fn default_src() -> String {
    "zh".into()
}
fn default_pivot() -> String {
    "en".into()
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            checks: default_checks(),
            percentile: default_percentile(),
            generic_threshold: default_generic(),
            source_lang: default_src(),
            pivot_lang: default_pivot(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordFlags {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub rtt: bool,
    pub cu: bool,
    pub hs: bool,
    pub hs_status: Option<HistoryStatus>,
    pub combined: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsiPrediction {
    pub entry_id: String,
    pub checks: Vec<Check>,
    pub words: Vec<WordFlags>,
    pub spans: Vec<CsiSpan>,
    pub is_csi: bool,
    /// Check failures that were counted as "no" votes.
    pub errors: Vec<String>,
}

impl CsiPrediction {
    /// Flags of one check for every word (false when it did not run).
    pub fn flags(&self, check: Check) -> Vec<bool> {
        self.words
            .iter()
            .map(|w| match check {
                Check::Rtt => w.rtt,
                Check::Cu => w.cu,
                Check::Hs => w.hs,
            })
            .collect()
    }
}

/// Maximal runs of consecutive flagged words as spans over `text`.
pub fn assemble_spans(text: &str, words: &[Token], flags: &[bool]) -> Vec<CsiSpan> {
    let mut spans = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for (word, &flag) in words.iter().zip(flags) {
        match (flag, run) {
            (true, Some((s, _))) => run = Some((s, word.end())),
            (true, None) => run = Some((word.start, word.end())),
            (false, Some((s, e))) => {
                spans.extend(CsiSpan::over(text, s, e));
                run = None;
            }
            (false, None) => {}
        }
    }
    if let Some((s, e)) = run {
        spans.extend(CsiSpan::over(text, s, e));
    }
    spans
}

/// Everything the combined classifier needs. Backends are only required
/// for the checks that are selected.
pub struct Identifier<'a> {
    pub segmenter: &'a dyn Segmenter,
    pub table: &'a FreqTable,
    pub forward: Option<&'a Backend>,
    pub reverse: Option<&'a Backend>,
    pub wiki: Option<&'a WikiClient>,
    pub config: IdentifyConfig,
}

impl<'a> Identifier<'a> {
    pub fn validate(&self) -> Result<(), IdentifyError> {
        if self.config.checks.is_empty() {
            return Err(IdentifyError::NoChecks);
        }
        for check in &self.config.checks {
            let ok = match check {
                Check::Rtt => self.forward.is_some() && self.reverse.is_some(),
                Check::Cu => true,
                Check::Hs => self.wiki.is_some(),
            };
            if !ok {
                return Err(IdentifyError::MissingBackend(*check));
            }
        }
        Ok(())
    }

    fn runs(&self, check: Check) -> bool {
        self.config.checks.contains(&check)
    }

    pub fn identify(&self, entry: &MenuEntry) -> CsiPrediction {
        let text = entry.zh_text.as_str();
        let words = self.segmenter.precise_cut(text);
        let n = words.len();
        let mut errors = Vec::new();

        let rtt = match (self.runs(Check::Rtt), self.forward, self.reverse) {
            (true, Some(fwd), Some(rev)) => {
                match rtt_check(text, fwd, rev, self.segmenter, (&self.config.source_lang, &self.config.pivot_lang)) {
                    Ok(outcome) => outcome.flags,
                    Err(err) => {
                        log::warn!("entry {}: rtt check failed: {err}", entry.id);
                        errors.push(format!("rtt: {err}"));
                        vec![false; n]
                    }
                }
            }
            _ => vec![false; n],
        };
        let cu = if self.runs(Check::Cu) {
            let surfaces: Vec<&str> = words.iter().map(|w| w.surface.as_str()).collect();
            cu_check(&surfaces, self.table)
                .into_iter()
                .zip(&surfaces)
                .map(|(f, w)| f && is_word(w))
                .collect()
        } else {
            vec![false; n]
        };
        let hs = match (self.runs(Check::Hs), self.wiki) {
            (true, Some(wiki)) => {
                let result = hs_check(&words, text, wiki, self.table, self.config.generic_threshold);
                let unknown = result
                    .statuses
                    .iter()
                    .flatten()
                    .chain(result.dish_status.iter())
                    .any(|s| *s == HistoryStatus::Unknown);
                if unknown {
                    errors.push("hs: wiki lookup status unknown".to_string());
                }
                result
            }
            _ => HsResult {
                flags: vec![false; n],
                statuses: vec![None; n],
                dish_status: None,
            },
        };

        let combined: Vec<bool> = (0..n)
            .map(|i| {
                let votes: Vec<bool> = self
                    .config
                    .checks
                    .iter()
                    .map(|c| match c {
                        Check::Rtt => rtt[i],
                        Check::Cu => cu[i],
                        Check::Hs => hs.flags[i],
                    })
                    .collect();
                majority(&votes)
            })
            .collect();
        let spans = assemble_spans(text, &words, &combined);
        let words = words
            .iter()
            .enumerate()
            .map(|(i, w)| WordFlags {
                surface: w.surface.clone(),
                start: w.start,
                end: w.end(),
                rtt: rtt[i],
                cu: cu[i],
                hs: hs.flags[i],
                hs_status: hs.statuses[i],
                combined: combined[i],
            })
            .collect();
        let mut checks = self.config.checks.clone();
        checks.sort();
        CsiPrediction {
            entry_id: entry.id.clone(),
            checks,
            words,
            is_csi: !spans.is_empty(),
            spans,
            errors,
        }
    }

    pub fn identify_all(&self, entries: &[MenuEntry], exec: Exec) -> Vec<CsiPrediction> {
        exec.map(entries, |e| self.identify(e))
    }
}
