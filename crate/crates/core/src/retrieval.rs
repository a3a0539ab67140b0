//! Weighted BM25 over recipe documents (name + instructions).
//!
//! Scoring walks the distinct words of a document. When the document holds
//! at least one dish-name token, dish tokens count `w_dish · dish_multiplier`
//! and span-only tokens `w_span`; otherwise only span tokens count, at
//! `w_span`. Words outside the query contribute nothing. The sum is scaled
//! by `1 / (1 + alpha · |len − avg_len| / avg_len)`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CsiSpan, Recipe};
use crate::exec::Exec;
use crate::identify::is_word;
use crate::segment::Segmenter;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("recipe corpus is empty")]
    EmptyCorpus,
    #[error("retrieval config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    pub w_dish: f64,
    pub w_span: f64,
    pub dish_multiplier: f64,
    pub alpha: f64,
    pub k1: f64,
    pub b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            w_dish: 5.0,
            w_span: 3.0,
            dish_multiplier: 3.0,
            alpha: 0.1,
            k1: 1.5,
            b: 0.75,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        let positive = [("w_dish", self.w_dish), ("w_span", self.w_span), ("dish_multiplier", self.dish_multiplier)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RetrievalError::BadConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.alpha >= 0.0 && self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b)) {
            return Err(RetrievalError::BadConfig("need alpha >= 0, k1 >= 0 and b in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecipeDoc {
    pub recipe_id: String,
    pub tokens: Vec<String>,
    pub length: usize,
    /// Term frequencies, keyed in sorted order for deterministic sums.
    tf: BTreeMap<String, u32>,
}

impl RecipeDoc {
    pub fn new(recipe_id: impl Into<String>, tokens: Vec<String>) -> Self {
        let mut tf = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_insert(0) += 1;
        }
        RecipeDoc {
            recipe_id: recipe_id.into(),
            length: tokens.len(),
            tokens,
            tf,
        }
    }

    pub fn tf(&self, word: &str) -> u32 {
        self.tf.get(word).copied().unwrap_or(0)
    }

    /// Distinct words with their frequencies, in sorted order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, u32)> {
        self.tf.iter().map(|(w, c)| (w.as_str(), *c))
    }
}

/// Tokens of `name` followed by those of `instructions`; whitespace-only
/// tokens are dropped.
pub fn recipe_tokens(recipe: &Recipe, segmenter: &dyn Segmenter) -> Vec<String> {
    segmenter
        .precise_cut(&recipe.name)
        .into_iter()
        .chain(segmenter.precise_cut(&recipe.instructions))
        .map(|t| t.surface)
        .filter(|s| !s.trim().is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub doc_count: usize,
    pub avg_len: f64,
    pub df: HashMap<String, usize>,
    pub k1: f64,
    pub b: f64,
}

impl IndexStats {
    pub fn df(&self, word: &str) -> usize {
        self.df.get(word).copied().unwrap_or(0)
    }

    /// Non-negative BM25 idf: `ln(1 + (N − df + 0.5) / (df + 0.5))`.
    pub fn idf(&self, word: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.df(word) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

#[derive(Debug, Clone)]
pub struct RecipeIndex {
    pub docs: Vec<RecipeDoc>,
    pub stats: IndexStats,
}

pub fn build_index(recipes: &[Recipe], segmenter: &dyn Segmenter, config: &RetrievalConfig) -> Result<RecipeIndex, RetrievalError> {
    let docs: Vec<RecipeDoc> = recipes
        .iter()
        .map(|r| RecipeDoc::new(r.id.clone(), recipe_tokens(r, segmenter)))
        .collect();
    index_docs(docs, config)
}

/// Computes the collection statistics for already tokenized documents.
pub fn index_docs(docs: Vec<RecipeDoc>, config: &RetrievalConfig) -> Result<RecipeIndex, RetrievalError> {
    if docs.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in &docs {
        for (word, _) in doc.terms() {
            *df.entry(word.to_string()).or_default() += 1;
        }
    }
    let total: usize = docs.iter().map(|d| d.length).sum();
    let stats = IndexStats {
        doc_count: docs.len(),
        avg_len: total as f64 / docs.len() as f64,
        df,
        k1: config.k1,
        b: config.b,
    };
    Ok(RecipeIndex { docs, stats })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DishQuery {
    pub dish_tokens: Vec<String>,
    pub span_tokens: Vec<String>,
}

impl DishQuery {
    /// Dish tokens are the precise cut of the name; span tokens the precise
    /// cut of each span surface.
    pub fn new(dish_name: &str, spans: &[CsiSpan], segmenter: &dyn Segmenter) -> Self {
        let words = |text: &str| -> Vec<String> {
            segmenter
                .precise_cut(text)
                .into_iter()
                .map(|t| t.surface)
                .filter(|s| is_word(s))
                .collect()
        };
        DishQuery {
            dish_tokens: words(dish_name),
            span_tokens: spans.iter().flat_map(|s| words(&s.surface)).collect(),
        }
    }
}

/// `1 / (1 + alpha · |length − avg_len| / avg_len)`.
pub fn length_penalty(length: usize, avg_len: f64, alpha: f64) -> f64 {
    if avg_len <= 0.0 {
        return 1.0;
    }
    1.0 / (1.0 + alpha * (length as f64 - avg_len).abs() / avg_len)
}

pub fn score_doc(query: &DishQuery, doc: &RecipeDoc, stats: &IndexStats, config: &RetrievalConfig) -> f64 {
    let dish: HashSet<&str> = query.dish_tokens.iter().map(String::as_str).collect();
    let span: HashSet<&str> = query.span_tokens.iter().map(String::as_str).collect();
    let has_dish = doc.terms().any(|(w, _)| dish.contains(w));
    let norm = stats.k1 * (1.0 - stats.b + stats.b * doc.length as f64 / stats.avg_len);
    let mut score = 0.0;
    for (word, tf) in doc.terms() {
        let weight = if has_dish && dish.contains(word) {
            config.w_dish * config.dish_multiplier
        } else if span.contains(word) {
            config.w_span
        } else {
            continue;
        };
        let tf = tf as f64;
        score += weight * stats.idf(word) * tf * (stats.k1 + 1.0) / (tf + norm);
    }
    score * length_penalty(doc.length, stats.avg_len, config.alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub recipe_id: String,
    pub score: f64,
}

/// Ranks every document; ties (including all-zero) go to the smaller id.
pub fn rank_all(index: &RecipeIndex, query: &DishQuery, config: &RetrievalConfig, exec: Exec) -> Vec<Hit> {
    let mut hits = exec.map(&index.docs, |doc| Hit {
        recipe_id: doc.recipe_id.clone(),
        score: score_doc(query, doc, &index.stats, config),
    });
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.recipe_id.cmp(&b.recipe_id)));
    hits
}

/// Top `k` hits and whether nothing matched at all.
pub fn retrieve_top(index: &RecipeIndex, query: &DishQuery, k: usize, config: &RetrievalConfig, exec: Exec) -> (Vec<Hit>, bool) {
    let mut hits = rank_all(index, query, config, exec);
    let no_match = hits.iter().all(|h| h.score == 0.0);
    hits.truncate(k);
    (hits, no_match)
}

/// One line of `retrievals.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub entry_id: String,
    pub recipe_id: String,
    pub score: f64,
    pub rank: usize,
    pub no_match: bool,
}

pub fn retrievals_for(entry_id: &str, hits: &[Hit], no_match: bool) -> Vec<Retrieval> {
    hits.iter()
        .enumerate()
        .map(|(i, h)| Retrieval {
            entry_id: entry_id.to_string(),
            recipe_id: h.recipe_id.clone(),
            score: h.score,
            rank: i + 1,
            no_match,
        })
        .collect()
}
