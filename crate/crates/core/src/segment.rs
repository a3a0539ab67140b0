//! Dictionary-driven Chinese word segmentation.
//!
//! [`DictSegmenter`] picks the maximum log-probability path through the
//! lattice of dictionary words (`ln(freq / total)` per token); characters
//! absent from the dictionary fall back to single-character tokens with
//! frequency 1. Score ties go to fewer tokens, then to the longest token at
//! the leftmost differing position.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two path scores closer than this are treated as tied.
pub const SCORE_TIE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dictionary line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Offset in Unicode scalar values.
    pub start: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, start: usize) -> Self {
        Token {
            surface: surface.into(),
            start,
        }
    }

    pub fn char_len(&self) -> usize {
        self.surface.chars().count()
    }

    pub fn end(&self) -> usize {
        self.start + self.char_len()
    }

    /// True when `other` lies inside this token's span.
    pub fn contains(&self, other: &Token) -> bool {
        self.start <= other.start && other.end() <= self.end()
    }
}

/// A segmentation backend exposing the two cut modes used downstream.
pub trait Segmenter: Send + Sync {
    /// Non-overlapping tokens that tile `text` exactly.
    fn precise_cut(&self, text: &str) -> Vec<Token>;

    /// Precise tokens plus every dictionary word nested inside a
    /// multi-character precise token, ordered by start then length.
    fn search_cut(&self, text: &str) -> Vec<Token>;
}

#[derive(Debug, Clone, Default)]
pub struct SegDictionary {
    entries: HashMap<String, u64>,
    total_tokens: u64,
    max_word_chars: usize,
}

impl SegDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `word<TAB>frequency` lines. Blank lines and `#` comments are
    /// skipped; a repeated word keeps its last frequency.
    pub fn from_tsv(text: &str) -> Result<Self, SegmentError> {
        let mut dict = SegDictionary::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SegmentError::Parse { line: index + 1, message };
            let (word, freq) = line
                .split_once('\t')
                .ok_or_else(|| err(format!("expected word<TAB>frequency, got `{line}`")))?;
            let freq: u64 = freq
                .trim()
                .parse()
                .map_err(|_| err(format!("bad frequency `{freq}`")))?;
            if freq == 0 {
                return Err(err(format!("frequency of `{word}` must be at least 1")));
            }
            if word.is_empty() {
                return Err(err("empty word".into()));
            }
            dict.insert(&crate::corpus::nfc(word), freq);
        }
        Ok(dict)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| SegmentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_tsv(&text)
    }

    pub fn insert(&mut self, word: &str, freq: u64) {
        assert!(freq >= 1, "dictionary frequencies are positive");
        if let Some(old) = self.entries.insert(word.to_string(), freq) {
            self.total_tokens -= old;
        }
        self.total_tokens += freq;
        self.max_word_chars = self.max_word_chars.max(word.chars().count());
    }

    pub fn freq(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    /// `ln(freq / total)`, with frequency 1 for unknown words.
    pub fn log_prob(&self, word: &str) -> f64 {
        let freq = self.freq(word).unwrap_or(1) as f64;
        freq.ln() - (self.total_tokens.max(1) as f64).ln()
    }
}

impl<S: AsRef<str>> FromIterator<(S, u64)> for SegDictionary {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut dict = SegDictionary::new();
        for (word, freq) in iter {
            dict.insert(word.as_ref(), freq);
        }
        dict
    }
}

#[derive(Debug, Clone, Copy)]
struct PathScore {
    score: f64,
    tokens: usize,
    first_len: usize,
}

impl PathScore {
    fn beats(&self, other: &PathScore) -> bool {
        let diff = self.score - other.score;
        if diff > SCORE_TIE_EPS {
            return true;
        }
        if diff < -SCORE_TIE_EPS {
            return false;
        }
        if self.tokens != other.tokens {
            return self.tokens < other.tokens;
        }
        self.first_len > other.first_len
    }
}

#[derive(Debug, Clone)]
pub struct DictSegmenter {
    dict: SegDictionary,
}

impl DictSegmenter {
    pub fn new(dict: SegDictionary) -> Self {
        DictSegmenter { dict }
    }

    pub fn dictionary(&self) -> &SegDictionary {
        &self.dict
    }

    /// Candidate end positions for a token starting at `i`, single
    /// character first.
    fn edges(&self, chars: &[char], i: usize) -> Vec<usize> {
        let limit = chars.len().min(i + self.dict.max_word_chars.max(1));
        let mut ends = vec![i + 1];
        let mut word: String = chars[i].to_string();
        for j in (i + 2)..=limit {
            word.push(chars[j - 1]);
            if self.dict.contains(&word) {
                ends.push(j);
            }
        }
        ends
    }
}

impl Segmenter for DictSegmenter {
    fn precise_cut(&self, text: &str) -> Vec<Token> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        if n == 0 {
            return Vec::new();
        }
        // best[i]: best path over chars[i..], next[i]: end of its first token
        let mut best = vec![
            PathScore {
                score: 0.0,
                tokens: 0,
                first_len: 0,
            };
            n + 1
        ];
        let mut next = vec![n; n + 1];
        for i in (0..n).rev() {
            let mut chosen: Option<(PathScore, usize)> = None;
            for j in self.edges(&chars, i) {
                let word: String = chars[i..j].iter().collect();
                let cand = PathScore {
                    score: self.dict.log_prob(&word) + best[j].score,
                    tokens: 1 + best[j].tokens,
                    first_len: j - i,
                };
                if chosen.as_ref().is_none_or(|(cur, _)| cand.beats(cur)) {
                    chosen = Some((cand, j));
                }
            }
            let (score, j) = chosen.expect("single-character edge always exists");
            best[i] = score;
            next[i] = j;
        }
        let mut tokens = Vec::with_capacity(best[0].tokens);
        let mut i = 0;
        while i < n {
            let j = next[i];
            tokens.push(Token::new(chars[i..j].iter().collect::<String>(), i));
            i = j;
        }
        tokens
    }

    fn search_cut(&self, text: &str) -> Vec<Token> {
        let precise = self.precise_cut(text);
        let mut out = Vec::with_capacity(precise.len() * 2);
        for token in precise {
            let chars: Vec<char> = token.surface.chars().collect();
            let len = chars.len();
            if len > 1 {
                for a in 0..len {
                    for b in (a + 1)..=len {
                        if b - a == len {
                            continue;
                        }
                        let word: String = chars[a..b].iter().collect();
                        if self.dict.contains(&word) {
                            out.push(Token::new(word, token.start + a));
                        }
                    }
                }
            }
            out.push(token);
        }
        out.sort_by_key(|t| (t.start, t.char_len()));
        out
    }
}

pub fn surfaces(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.surface.as_str()).collect()
}
