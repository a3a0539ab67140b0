//! Span P/R/F1, inter-annotator agreement and score-table aggregation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, CsiAnnotation, CsiSpan, MenuEntry};
use crate::identify::{is_word, Check, CsiPrediction};
use crate::segment::Segmenter;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction for entry {0} has no gold annotation")]
    MissingGold(String),
    #[error("entry {0} is not in the corpus")]
    UnknownEntry(String),
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("nothing to compare")]
    Empty,
    #[error("ratings matrix: {0}")]
    BadMatrix(String),
    #[error("score for entry {entry_id} has category {category}; expected 1..=3")]
    BadCategory { entry_id: String, category: u8 },
    #[error("baseline strategy `{0}` has no scores")]
    MissingBaseline(String),
    #[error("strategy `{strategy}` has no scores in {column}")]
    CategoryAbsent { strategy: String, column: String },
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// Percentages; an empty denominator gives 0.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn set_counts<T: Eq + Hash>(pred: &HashSet<T>, gold: &HashSet<T>) -> Counts {
    let tp = pred.intersection(gold).count();
    Counts {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Spans are projected onto segmented words.
    #[default]
    Token,
    /// A span counts only when both offsets match.
    ExactSpan,
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token" => Ok(MatchMode::Token),
            "exact-span" | "exact" => Ok(MatchMode::ExactSpan),
            other => Err(format!("unknown match mode `{other}` (expected token or exact-span)")),
        }
    }
}

/// Which predicted spans to score: the combined vote or a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanSource {
    Combined,
    Check(Check),
}

impl SpanSource {
    pub fn name(self) -> String {
        match self {
            SpanSource::Combined => "combined".into(),
            SpanSource::Check(c) => c.to_string(),
        }
    }
}

/// Spans predicted by `source`, rebuilt from the per-word flags.
pub fn predicted_spans(pred: &CsiPrediction, text: &str, source: SpanSource) -> Vec<CsiSpan> {
    let check = match source {
        SpanSource::Combined => return pred.spans.clone(),
        SpanSource::Check(c) => c,
    };
    let flags = pred.flags(check);
    let mut spans = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for (w, f) in pred.words.iter().zip(flags) {
        match (f, run) {
            (true, Some((s, _))) => run = Some((s, w.end)),
            (true, None) => run = Some((w.start, w.end)),
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

/// Word offsets (start, end) of the precise cut that overlap any span.
fn covered_words(words: &[(usize, usize)], spans: &[CsiSpan]) -> HashSet<(usize, usize)> {
    words
        .iter()
        .filter(|(s, e)| spans.iter().any(|sp| sp.overlaps(*s, *e)))
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanEvalResult {
    pub mode: MatchMode,
    /// Keyed by gold category label; label 0 collects non-CSI entries.
    pub per_category: BTreeMap<u8, Counts>,
}

impl SpanEvalResult {
    pub fn counts(&self, category: Category) -> Counts {
        self.per_category.get(&category.label()).copied().unwrap_or_default()
    }

    /// Micro-average over the three CSI categories.
    pub fn csi_total(&self) -> Counts {
        let mut total = Counts::default();
        for c in Category::CSI {
            total.add(self.counts(c));
        }
        total
    }
}

/// Token-level (or exact-span) micro P/R/F1 per gold category. `gold`
/// holds one (consensus) annotation per entry.
pub fn span_prf(
    predictions: &[CsiPrediction],
    gold: &[CsiAnnotation],
    entries: &[MenuEntry],
    segmenter: &dyn Segmenter,
    mode: MatchMode,
    source: SpanSource,
) -> Result<SpanEvalResult, EvalError> {
    let gold: HashMap<&str, &CsiAnnotation> = gold.iter().map(|g| (g.entry_id.as_str(), g)).collect();
    let texts: HashMap<&str, &str> = entries.iter().map(|e| (e.id.as_str(), e.zh_text.as_str())).collect();
    let mut per_category: BTreeMap<u8, Counts> = BTreeMap::new();
    for pred in predictions {
        let g = gold
            .get(pred.entry_id.as_str())
            .ok_or_else(|| EvalError::MissingGold(pred.entry_id.clone()))?;
        let text = texts
            .get(pred.entry_id.as_str())
            .ok_or_else(|| EvalError::UnknownEntry(pred.entry_id.clone()))?;
        let spans = predicted_spans(pred, text, source);
        let counts = match mode {
            MatchMode::Token => {
                let words: Vec<(usize, usize)> = segmenter
                    .precise_cut(text)
                    .iter()
                    .filter(|t| is_word(&t.surface))
                    .map(|t| (t.start, t.end()))
                    .collect();
                set_counts(&covered_words(&words, &spans), &covered_words(&words, &g.spans))
            }
            MatchMode::ExactSpan => {
                let p: HashSet<(usize, usize)> = spans.iter().map(|s| (s.start, s.end)).collect();
                let q: HashSet<(usize, usize)> = g.spans.iter().map(|s| (s.start, s.end)).collect();
                set_counts(&p, &q)
            }
        };
        per_category.entry(g.label.label()).or_default().add(counts);
    }
    Ok(SpanEvalResult { mode, per_category })
}

/// Collapses several annotators' judgements into one annotation per entry.
/// The label needs a strict majority; span characters need the same
/// majority of all annotators. Entries without consensus are dropped and
/// returned by id.
pub fn consensus_gold(annotations: &[CsiAnnotation], entries: &[MenuEntry]) -> (Vec<CsiAnnotation>, Vec<String>) {
    let texts: HashMap<&str, &str> = entries.iter().map(|e| (e.id.as_str(), e.zh_text.as_str())).collect();
    let mut by_entry: BTreeMap<&str, Vec<&CsiAnnotation>> = BTreeMap::new();
    for a in annotations {
        by_entry.entry(a.entry_id.as_str()).or_default().push(a);
    }
    let order: HashMap<&str, usize> = entries.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    let mut ids: Vec<&str> = by_entry.keys().copied().collect();
    ids.sort_by_key(|id| (order.get(id).copied().unwrap_or(usize::MAX), *id));

    let mut gold = Vec::new();
    let mut dropped = Vec::new();
    for id in ids {
        let group = &by_entry[id];
        let need = group.len() / 2 + 1;
        let mut votes: BTreeMap<Category, usize> = BTreeMap::new();
        for a in group {
            *votes.entry(a.label).or_default() += 1;
        }
        let label = votes.iter().find(|(_, n)| **n >= need).map(|(c, _)| *c);
        let (Some(label), Some(text)) = (label, texts.get(id)) else {
            dropped.push(id.to_string());
            continue;
        };
        let spans = if label == Category::NonCsi {
            Vec::new()
        } else {
            let len = text.chars().count();
            let mut cover = vec![0usize; len];
            for a in group {
                for s in &a.spans {
                    for c in cover.iter_mut().take(s.end.min(len)).skip(s.start) {
                        *c += 1;
                    }
                }
            }
            let mut spans = Vec::new();
            let mut i = 0;
            while i < len {
                if cover[i] >= need {
                    let start = i;
                    while i < len && cover[i] >= need {
                        i += 1;
                    }
                    spans.extend(CsiSpan::over(text, start, i));
                } else {
                    i += 1;
                }
            }
            spans
        };
        if label != Category::NonCsi && spans.is_empty() {
            dropped.push(id.to_string());
            continue;
        }
        gold.push(CsiAnnotation {
            entry_id: id.to_string(),
            label,
            spans,
            annotator_id: "consensus".into(),
        });
    }
    (gold, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementKind {
    Cohen,
    Fleiss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub kappa: f64,
    pub kind: AgreementKind,
    pub n_items: usize,
    pub n_raters: usize,
}

/// `(p_o − p_e) / (1 − p_e)` with marginal-product chance agreement. When
/// `p_e = 1` the result is 1 for identical sequences and 0 otherwise.
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<AgreementResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = a.len() as f64;
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut ma: HashMap<&T, usize> = HashMap::new();
    let mut mb: HashMap<&T, usize> = HashMap::new();
    for x in a {
        *ma.entry(x).or_default() += 1;
    }
    for y in b {
        *mb.entry(y).or_default() += 1;
    }
    let p_e: f64 = ma
        .iter()
        .map(|(k, ca)| *ca as f64 * mb.get(k).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (n * n);
    let kappa = if (1.0 - p_e).abs() < 1e-12 {
        if p_o == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(AgreementResult {
        kappa,
        kind: AgreementKind::Cohen,
        n_items: a.len(),
        n_raters: 2,
    })
}

/// Fleiss' kappa over an items × categories count matrix in which every
/// row sums to the same number of raters (at least 2).
pub fn fleiss_kappa(matrix: &[Vec<u32>]) -> Result<AgreementResult, EvalError> {
    let Some(first) = matrix.first() else {
        return Err(EvalError::Empty);
    };
    let width = first.len();
    let raters: u32 = first.iter().sum();
    if raters < 2 {
        return Err(EvalError::BadMatrix("need at least 2 ratings per item".into()));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != width {
            return Err(EvalError::BadMatrix(format!("row {} has {} columns, expected {width}", i + 1, row.len())));
        }
        let sum: u32 = row.iter().sum();
        if sum != raters {
            return Err(EvalError::BadMatrix(format!("row {} sums to {sum}, expected {raters}", i + 1)));
        }
    }
    let n_items = matrix.len() as f64;
    let n = raters as f64;
    let p_bar = matrix
        .iter()
        .map(|row| (row.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / n_items;
    let p_e: f64 = (0..width)
        .map(|j| {
            let pj = matrix.iter().map(|row| row[j] as f64).sum::<f64>() / (n_items * n);
            pj * pj
        })
        .sum();
    let kappa = if (1.0 - p_e).abs() < 1e-12 { 1.0 } else { (p_bar - p_e) / (1.0 - p_e) };
    Ok(AgreementResult {
        kappa,
        kind: AgreementKind::Fleiss,
        n_items: matrix.len(),
        n_raters: raters as usize,
    })
}

/// Builds the count matrix from per-item label lists (one label per rater).
pub fn fleiss_from_labels(items: &[Vec<Category>]) -> Result<AgreementResult, EvalError> {
    let matrix: Vec<Vec<u32>> = items
        .iter()
        .map(|labels| {
            let mut row = vec![0u32; 4];
            for l in labels {
                row[l.label() as usize] += 1;
            }
            row
        })
        .collect();
    fleiss_kappa(&matrix)
}

/// Per-item label lists in entry order, for agreement over annotations.
pub fn labels_by_entry(annotations: &[CsiAnnotation]) -> Vec<(String, Vec<(String, Category)>)> {
    let mut map: BTreeMap<&str, Vec<(String, Category)>> = BTreeMap::new();
    for a in annotations {
        map.entry(a.entry_id.as_str()).or_default().push((a.annotator_id.clone(), a.label));
    }
    map.into_iter()
        .map(|(k, mut v)| {
            v.sort();
            (k.to_string(), v)
        })
        .collect()
}

/// One line of `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub entry_id: String,
    pub strategy: String,
    pub score: f64,
    pub category: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub strategy: String,
    /// CSI-1, CSI-2, CSI-3, Overall.
    pub means: [f64; 4],
    pub deltas: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub baseline: String,
    pub rows: Vec<ScoreRow>,
}

pub const SCORE_COLUMNS: [&str; 4] = ["CSI-1", "CSI-2", "CSI-3", "Overall"];

/// Mean of the three category cells.
pub fn overall(cells: [f64; 3]) -> f64 {
    (cells[0] + cells[1] + cells[2]) / 3.0
}

/// Per-strategy category means, the Overall column and deltas against the
/// baseline row. Rows keep first-appearance order with the baseline first.
pub fn aggregate_scores(scores: &[ScoreRecord], baseline: &str) -> Result<ScoreTable, EvalError> {
    let mut order: Vec<&str> = Vec::new();
    let mut sums: HashMap<&str, [(f64, usize); 3]> = HashMap::new();
    for s in scores {
        if !(1..=3).contains(&s.category) {
            return Err(EvalError::BadCategory {
                entry_id: s.entry_id.clone(),
                category: s.category,
            });
        }
        let cell = sums.entry(s.strategy.as_str()).or_insert_with(|| {
            order.push(s.strategy.as_str());
            [(0.0, 0); 3]
        });
        let slot = &mut cell[s.category as usize - 1];
        slot.0 += s.score;
        slot.1 += 1;
    }
    if !sums.contains_key(baseline) {
        return Err(EvalError::MissingBaseline(baseline.to_string()));
    }
    order.retain(|s| *s != baseline);
    order.insert(0, baseline);

    let mut means: Vec<(&str, [f64; 4])> = Vec::new();
    for strategy in order {
        let cells = sums[strategy];
        let mut m = [0.0; 3];
        for (i, (sum, n)) in cells.iter().enumerate() {
            if *n == 0 {
                return Err(EvalError::CategoryAbsent {
                    strategy: strategy.to_string(),
                    column: SCORE_COLUMNS[i].to_string(),
                });
            }
            m[i] = sum / *n as f64;
        }
        means.push((strategy, [m[0], m[1], m[2], overall(m)]));
    }
    let base = means[0].1;
    let rows = means
        .into_iter()
        .map(|(strategy, m)| ScoreRow {
            strategy: strategy.to_string(),
            means: m,
            deltas: [m[0] - base[0], m[1] - base[1], m[2] - base[2], m[3] - base[3]],
        })
        .collect();
    Ok(ScoreTable {
        baseline: baseline.to_string(),
        rows,
    })
}

fn signed(x: f64) -> String {
    // avoid printing "-0.00"
    let x = if x.abs() < 0.005 { 0.0 } else { x };
    format!("{x:+.2}")
}

impl ScoreTable {
    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.strategy.chars().count()).max().unwrap_or(8).max(8);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "Strategy");
        for c in SCORE_COLUMNS {
            let _ = write!(out, "  {c:>16}");
        }
        out.push('\n');
        for row in &self.rows {
            let pad = width - row.strategy.chars().count();
            let _ = write!(out, "{}{}", row.strategy, " ".repeat(pad));
            for i in 0..4 {
                let cell = if row.strategy == self.baseline {
                    format!("{:.2}", row.means[i])
                } else {
                    format!("{:.2} ({})", row.means[i], signed(row.deltas[i]))
                };
                let _ = write!(out, "  {cell:>16}");
            }
            out.push('\n');
        }
        out
    }
}

/// Span results of several methods as an aligned text table (percentages).
pub fn render_span_text(results: &[(String, SpanEvalResult)]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "Method");
    for c in Category::CSI {
        let _ = write!(out, "  {:>20}", format!("{} P/R/F1", c.name()));
    }
    let _ = writeln!(out, "  {:>20}", "All P/R/F1");
    for (name, r) in results {
        let _ = write!(out, "{name:<10}");
        let cells = Category::CSI.iter().map(|c| r.counts(*c)).chain(std::iter::once(r.csi_total()));
        for c in cells {
            let _ = write!(out, "  {:>20}", format!("{:.1}/{:.1}/{:.1}", c.precision(), c.recall(), c.f1()));
        }
        out.push('\n');
    }
    out
}

/// Long-format CSV holding span results and (optionally) a score table:
/// `section,row,measure,CSI-1,CSI-2,CSI-3,Overall`.
pub fn render_report_csv(spans: &[(String, SpanEvalResult)], scores: Option<&ScoreTable>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let num = |x: f64| format!("{x:.4}");
    w.write_record(["section", "row", "measure", "CSI-1", "CSI-2", "CSI-3", "Overall"])
        .expect("in-memory write");
    for (name, r) in spans {
        let cells: Vec<Counts> = Category::CSI
            .iter()
            .map(|c| r.counts(*c))
            .chain(std::iter::once(r.csi_total()))
            .collect();
        for (measure, f) in [
            ("precision", Counts::precision as fn(&Counts) -> f64),
            ("recall", Counts::recall),
            ("f1", Counts::f1),
        ] {
            let mut rec = vec!["span".to_string(), name.clone(), measure.to_string()];
            rec.extend(cells.iter().map(|c| num(f(c))));
            w.write_record(&rec).expect("in-memory write");
        }
    }
    if let Some(t) = scores {
        for row in &t.rows {
            for (measure, vals) in [("mean", row.means), ("delta", row.deltas)] {
                let mut rec = vec!["score".to_string(), row.strategy.clone(), measure.to_string()];
                rec.extend(vals.iter().map(|v| num(*v)));
                w.write_record(&rec).expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_values() {
        assert_eq!(f1(50.0, 50.0), 50.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
        assert!((f1(81.7, 73.6) - 77.4).abs() < 0.05);
    }

    #[test]
    fn cohen_hand_cases() {
        assert_eq!(cohen_kappa(&[1, 2, 3], &[1, 2, 3]).unwrap().kappa, 1.0);
        assert!(cohen_kappa(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap().kappa.abs() < 1e-12);
        assert!((cohen_kappa(&[1, 1, 1, 0], &[1, 1, 0, 0]).unwrap().kappa - 0.5).abs() < 1e-12);
        assert_eq!(cohen_kappa(&[2, 2], &[2, 2]).unwrap().kappa, 1.0);
        assert_eq!(cohen_kappa(&[1], &[1, 2]), Err(EvalError::LengthMismatch(1, 2)));
    }

    #[test]
    fn fleiss_edges() {
        assert_eq!(fleiss_kappa(&[vec![5, 0], vec![0, 5]]).unwrap().kappa, 1.0);
        // every item split 3/2 over two categories
        let split = vec![vec![3, 2]; 6];
        assert!(fleiss_kappa(&split).unwrap().kappa <= 0.0);
        assert!(fleiss_kappa(&[vec![2, 1], vec![3]]).is_err());
        assert!(fleiss_kappa(&[vec![2, 1], vec![1, 1]]).is_err());
    }

    fn rec(id: &str, strategy: &str, score: f64, category: u8) -> ScoreRecord {
        ScoreRecord {
            entry_id: id.into(),
            strategy: strategy.into(),
            score,
            category,
        }
    }

    #[test]
    fn aggregation_and_deltas() {
        let scores = vec![
            rec("a", "base", 60.0, 1),
            rec("b", "base", 50.0, 2),
            rec("c", "base", 40.0, 3),
            rec("d", "base", 44.0, 3),
            rec("a", "new", 61.0, 1),
            rec("b", "new", 52.0, 2),
            rec("c", "new", 45.0, 3),
        ];
        let t = aggregate_scores(&scores, "base").unwrap();
        assert_eq!(t.rows[0].means, [60.0, 50.0, 42.0, 152.0 / 3.0]);
        assert_eq!(t.rows[0].deltas, [0.0; 4]);
        assert_eq!(t.rows[1].deltas[..3], [1.0, 2.0, 3.0]);
        assert!((t.rows[1].deltas[3] - 2.0).abs() < 1e-12);
        assert!(t.render_text().contains("(+3.00)"));
        assert!(matches!(aggregate_scores(&scores, "zzz"), Err(EvalError::MissingBaseline(_))));
        let partial = vec![rec("a", "base", 1.0, 1), rec("b", "base", 1.0, 2)];
        assert!(matches!(aggregate_scores(&partial, "base"), Err(EvalError::CategoryAbsent { .. })));
    }

    #[test]
    fn consensus_needs_a_majority() {
        let entry = MenuEntry {
            id: "e".into(),
            zh_text: "蚂蚁上树".into(),
            en_ref: None,
            price: None,
            restaurant_id: None,
            source: crate::corpus::Source::Fixture,
        };
        let ann = |who: &str, label: Category, span: Option<(usize, usize)>| CsiAnnotation {
            entry_id: "e".into(),
            label,
            spans: span.map(|(s, e)| CsiSpan::over("蚂蚁上树", s, e).unwrap()).into_iter().collect(),
            annotator_id: who.into(),
        };
        let anns = vec![
            ann("a", Category::Abstract, Some((0, 4))),
            ann("b", Category::Abstract, Some((0, 4))),
            ann("c", Category::Abstract, Some((0, 2))),
            ann("d", Category::Creative, Some((0, 2))),
            ann("e", Category::NonCsi, None),
        ];
        let (gold, dropped) = consensus_gold(&anns, std::slice::from_ref(&entry));
        assert!(dropped.is_empty());
        assert_eq!(gold[0].label, Category::Abstract);
        assert_eq!(gold[0].spans, vec![CsiSpan::over("蚂蚁上树", 0, 2).unwrap()]);
        let (gold, dropped) = consensus_gold(&anns[2..], &[entry]);
        assert!(gold.is_empty());
        assert_eq!(dropped, ["e"]);
    }
}
