//! Rank-quality metrics over a ranked list and its judgments.
//!
//! All metrics are computed from the grade sequence of the top of a list
//! (`None` for unjudged documents), so the same arithmetic is shared by
//! the direct evaluation and the incremental re-ranking sweep.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{QrelsSet, RankedList};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("cut-off must be >= 1")]
    ZeroCutoff,
    #[error("cut-off {k} exceeds list length {len}")]
    CutoffExceedsList { k: usize, len: usize },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Precision,
    Recall,
    F1,
    /// DCG with gain +1 for relevant and -1 for non-relevant items.
    DcgPenalized,
    /// nDCG with linear gain (gain = grade).
    Ndcg,
    /// nDCG with exponential gain (2^grade - 1).
    NdcgExp,
    Judged,
}

impl MetricKind {
    fn stem(self) -> &'static str {
        match self {
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::F1 => "f1",
            MetricKind::DcgPenalized => "dcg_penalized",
            MetricKind::Ndcg => "ndcg",
            MetricKind::NdcgExp => "ndcg_exp",
            MetricKind::Judged => "judged",
        }
    }

    /// Whether `k` may exceed the list length.
    fn allows_short_lists(self) -> bool {
        matches!(self, MetricKind::Ndcg | MetricKind::NdcgExp)
    }
}

/// A metric and its rank cut-off, e.g. `ndcg_at_10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricId {
    pub kind: MetricKind,
    pub k: usize,
}

impl MetricId {
    pub fn new(kind: MetricKind, k: usize) -> Result<Self, MetricError> {
        if k == 0 {
            return Err(MetricError::ZeroCutoff);
        }
        Ok(Self { kind, k })
    }

    pub fn ndcg(k: usize) -> Self {
        Self::new(MetricKind::Ndcg, k).expect("k >= 1")
    }

    /// Number of leading positions the metric reads for a list of `len` items.
    pub fn depth_needed(&self, len: usize) -> usize {
        self.k.min(len)
    }
}

impl Default for MetricId {
    fn default() -> Self {
        Self::ndcg(10)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_at_{}", self.kind.stem(), self.k)
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    /// Accepts `ndcg_at_10` and `ndcg@10` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || MetricError::UnknownMetric(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let (stem, k) = lower
            .rsplit_once("_at_")
            .or_else(|| lower.rsplit_once('@'))
            .ok_or_else(unknown)?;
        let k: usize = k.parse().map_err(|_| unknown())?;
        let kind = match stem {
            "precision" | "p" => MetricKind::Precision,
            "recall" | "r" => MetricKind::Recall,
            "f1" => MetricKind::F1,
            "dcg_penalized" | "dcg" => MetricKind::DcgPenalized,
            "ndcg" => MetricKind::Ndcg,
            "ndcg_exp" => MetricKind::NdcgExp,
            "judged" => MetricKind::Judged,
            _ => return Err(unknown()),
        };
        MetricId::new(kind, k)
    }
}

/// Conditions under which a metric returns its defined fallback value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFlag {
    /// No relevant item in the list; recall/F1 are defined as 0.
    NoRelevantInList,
    /// No judged document with positive gain; nDCG is defined as 0.
    NoJudgedRelevant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub flag: Option<ScoreFlag>,
}

impl Score {
    fn plain(value: f64) -> Self {
        Self { value, flag: None }
    }
}

/// `log2(i + 1)` for 1-based rank `i`.
#[inline]
fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

fn gain(kind: MetricKind, grade: u32) -> f64 {
    match kind {
        MetricKind::NdcgExp => 2f64.powi(grade as i32) - 1.0,
        _ => grade as f64,
    }
}

/// Query-level quantities a metric needs beyond the top-k grades.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricContext {
    metric: MetricId,
    relevance_threshold: u32,
    list_len: usize,
    /// Relevant items anywhere in the retrieved list (N_L).
    relevant_in_list: usize,
    ideal_dcg: f64,
}

impl MetricContext {
    pub fn new(metric: MetricId, qrels: &QrelsSet, list: &RankedList) -> Self {
        let qid = list.query_id();
        let relevant_in_list = list
            .doc_ids()
            .filter(|d| qrels.is_relevant(qid, d))
            .count();
        let ideal_dcg = match metric.kind {
            MetricKind::Ndcg | MetricKind::NdcgExp => {
                let mut grades: Vec<u32> = qrels
                    .judged(qid)
                    .map(|j| j.values().copied().collect())
                    .unwrap_or_default();
                grades.sort_unstable_by(|a, b| b.cmp(a));
                grades
                    .iter()
                    .take(metric.k)
                    .enumerate()
                    .map(|(i, &g)| gain(metric.kind, g) / discount(i + 1))
                    .sum()
            }
            _ => 0.0,
        };
        Self {
            metric,
            relevance_threshold: qrels.relevance_threshold(),
            list_len: list.len(),
            relevant_in_list,
            ideal_dcg,
        }
    }

    pub fn metric(&self) -> MetricId {
        self.metric
    }

    pub fn list_len(&self) -> usize {
        self.list_len
    }

    fn is_relevant(&self, grade: Option<u32>) -> bool {
        grade.is_some_and(|g| g >= self.relevance_threshold)
    }

    /// Scores a list given the grades of its first
    /// `metric.depth_needed(list_len)` positions.
    pub fn score_top(&self, top: &[Option<u32>]) -> Result<Score, MetricError> {
        let k = self.metric.k;
        if k > self.list_len && !self.metric.kind.allows_short_lists() {
            return Err(MetricError::CutoffExceedsList {
                k,
                len: self.list_len,
            });
        }
        debug_assert_eq!(top.len(), self.metric.depth_needed(self.list_len));
        let hits = || top.iter().filter(|g| self.is_relevant(**g)).count() as f64;

        let score = match self.metric.kind {
            MetricKind::Precision => Score::plain(hits() / k as f64),
            MetricKind::Recall => {
                if self.relevant_in_list == 0 {
                    Score {
                        value: 0.0,
                        flag: Some(ScoreFlag::NoRelevantInList),
                    }
                } else {
                    Score::plain(hits() / self.relevant_in_list as f64)
                }
            }
            MetricKind::F1 => {
                if self.relevant_in_list == 0 {
                    Score {
                        value: 0.0,
                        flag: Some(ScoreFlag::NoRelevantInList),
                    }
                } else {
                    // 2PR / (P + R) with P = h/k and R = h/|Rel|
                    Score::plain(2.0 * hits() / (k + self.relevant_in_list) as f64)
                }
            }
            MetricKind::DcgPenalized => Score::plain(
                top.iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let y = if self.is_relevant(*g) { 1.0 } else { -1.0 };
                        y / discount(i + 1)
                    })
                    .sum(),
            ),
            MetricKind::Ndcg | MetricKind::NdcgExp => {
                if self.ideal_dcg == 0.0 {
                    Score {
                        value: 0.0,
                        flag: Some(ScoreFlag::NoJudgedRelevant),
                    }
                } else {
                    let dcg: f64 = top
                        .iter()
                        .enumerate()
                        .map(|(i, g)| gain(self.metric.kind, g.unwrap_or(0)) / discount(i + 1))
                        .sum();
                    Score::plain(dcg / self.ideal_dcg)
                }
            }
            MetricKind::Judged => {
                Score::plain(top.iter().filter(|g| g.is_some()).count() as f64 / k as f64)
            }
        };
        Ok(score)
    }
}

/// Grades of the first `depth` items of a list.
pub fn top_grades(list: &RankedList, qrels: &QrelsSet, depth: usize) -> Vec<Option<u32>> {
    list.items()
        .iter()
        .take(depth)
        .map(|it| qrels.grade(list.query_id(), &it.doc_id))
        .collect()
}

/// Evaluates any metric on a ranked list.
pub fn evaluate(metric: MetricId, list: &RankedList, qrels: &QrelsSet) -> Result<Score, MetricError> {
    let ctx = MetricContext::new(metric, qrels, list);
    ctx.score_top(&top_grades(list, qrels, metric.depth_needed(list.len())))
}

fn eval_kind(kind: MetricKind, list: &RankedList, qrels: &QrelsSet, k: usize) -> Result<Score, MetricError> {
    evaluate(MetricId::new(kind, k)?, list, qrels)
}

pub fn precision_at_k(list: &RankedList, qrels: &QrelsSet, k: usize) -> Result<Score, MetricError> {
    eval_kind(MetricKind::Precision, list, qrels, k)
}

pub fn recall_at_k(list: &RankedList, qrels: &QrelsSet, k: usize) -> Result<Score, MetricError> {
    eval_kind(MetricKind::Recall, list, qrels, k)
}

/// F1@k; 0 with a flag when the list holds no relevant item.
pub fn f1_at_k(list: &RankedList, qrels: &QrelsSet, k: usize) -> Result<Score, MetricError> {
    eval_kind(MetricKind::F1, list, qrels, k)
}

pub fn dcg_penalized_at_k(list: &RankedList, qrels: &QrelsSet, k: usize) -> Result<Score, MetricError> {
    eval_kind(MetricKind::DcgPenalized, list, qrels, k)
}

/// nDCG@k with linear gain; the ideal ranking uses every judged document
/// of the query, retrieved or not.
pub fn ndcg_at_k(list: &RankedList, qrels: &QrelsSet, k: usize) -> Result<Score, MetricError> {
    eval_kind(MetricKind::Ndcg, list, qrels, k)
}

pub fn judged_at_k(list: &RankedList, qrels: &QrelsSet, k: usize) -> Result<Score, MetricError> {
    eval_kind(MetricKind::Judged, list, qrels, k)
}
