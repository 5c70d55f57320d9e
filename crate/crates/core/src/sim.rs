//! Re-ranking simulation at every candidate cut-off.
//!
//! Re-ranking at cut-off `k` sends the top `k` retrieved documents to the
//! re-ranker and appends the untouched remainder of the retrieved list. A
//! sweep evaluates that composite list for every `k` in `0..=|L|`; `k = 0`
//! means the re-ranker is skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{QrelsSet, RankedItem, RankedList, RerankPair};
use crate::metrics::{self, MetricContext, MetricError, MetricId, ScoreFlag};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("query {query_id}: cut-off {k} outside 0..={len}")]
    CutoffOutOfRange { query_id: String, k: usize, len: usize },
    #[error("lists for query {0} do not hold the same documents")]
    DocSetMismatch(String),
    #[error("prediction {method:?} has no cut-off for query {query_id}")]
    MissingQuery { method: String, query_id: String },
    #[error("query {query_id}: {source}")]
    Metric {
        query_id: String,
        #[source]
        source: MetricError,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("nothing to evaluate: no query in common")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Position of each retrieved document in the re-ranked list. The
/// re-ranked list is in canonical order (score descending, doc id
/// ascending), so sorting by this position is the re-ranker's order.
fn rerank_positions(retrieved: &RankedList, reranked: &RankedList) -> Result<Vec<usize>, SimError> {
    let mismatch = || SimError::DocSetMismatch(retrieved.query_id().to_string());
    if retrieved.len() != reranked.len() {
        return Err(mismatch());
    }
    let pos: HashMap<&str, usize> = reranked.doc_ids().enumerate().map(|(i, d)| (d, i)).collect();
    retrieved
        .doc_ids()
        .map(|d| pos.get(d).copied().ok_or_else(mismatch))
        .collect()
}

/// The composite list for cut-off `k`: the top `k` retrieved documents in
/// re-ranker order followed by the rest in retrieved order. Scores of the
/// output are positional (`|L| - i`), ranks are `1..=|L|`.
pub fn compose_at_k(
    retrieved: &RankedList,
    reranked: &RankedList,
    k: usize,
) -> Result<RankedList, SimError> {
    let n = retrieved.len();
    if k > n {
        return Err(SimError::CutoffOutOfRange {
            query_id: retrieved.query_id().to_string(),
            k,
            len: n,
        });
    }
    let positions = rerank_positions(retrieved, reranked)?;
    let mut head: Vec<usize> = (0..k).collect();
    head.sort_by_key(|&i| positions[i]);
    let order = head.into_iter().chain(k..n);
    let items = order
        .enumerate()
        .map(|(rank0, i)| RankedItem::new(retrieved.items()[i].doc_id.clone(), (n - rank0) as f64))
        .collect();
    Ok(RankedList::new(retrieved.query_id(), items).expect("permutation of a valid list"))
}

/// Per-query metric values of the composite list at every cut-off.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMatrix {
    metric: MetricId,
    rows: BTreeMap<String, Vec<f64>>,
    flags: BTreeMap<String, ScoreFlag>,
    errors: BTreeMap<String, MetricError>,
}

impl SweepMatrix {
    pub fn new(metric: MetricId) -> Self {
        Self {
            metric,
            rows: BTreeMap::new(),
            flags: BTreeMap::new(),
            errors: BTreeMap::new(),
        }
    }

    pub fn metric(&self) -> MetricId {
        self.metric
    }

    /// Inserts a row of length `|L| + 1`.
    pub fn insert(&mut self, query_id: impl Into<String>, row: Vec<f64>) {
        assert!(!row.is_empty(), "sweep rows hold at least the k = 0 entry");
        self.rows.insert(query_id.into(), row);
    }

    pub fn get(&self, query_id: &str) -> Option<&[f64]> {
        self.rows.get(query_id).map(Vec::as_slice)
    }

    /// Rows in query id order.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// List depth `|L|` per query.
    pub fn depths(&self) -> BTreeMap<String, usize> {
        self.rows.iter().map(|(q, r)| (q.clone(), r.len() - 1)).collect()
    }

    /// Queries whose metric fell back to a defined value (e.g. no relevant documents).
    pub fn flags(&self) -> &BTreeMap<String, ScoreFlag> {
        &self.flags
    }

    /// Queries left out of the sweep because the metric failed.
    pub fn errors(&self) -> &BTreeMap<String, MetricError> {
        &self.errors
    }
}

struct QueryInput<'a> {
    retrieved: &'a RankedList,
    reranked: &'a RankedList,
}

fn sweep_query(
    q: &QueryInput<'_>,
    qrels: &QrelsSet,
    metric: MetricId,
) -> Result<(Vec<f64>, Option<ScoreFlag>), SimError> {
    let qid = q.retrieved.query_id();
    let n = q.retrieved.len();
    let positions = rerank_positions(q.retrieved, q.reranked)?;
    let grades = metrics::top_grades(q.retrieved, qrels, n);
    let ctx = MetricContext::new(metric, qrels, q.retrieved);
    let m = metric.depth_needed(n);
    let wrap = |source| SimError::Metric {
        query_id: qid.to_string(),
        source,
    };

    // head holds (re-ranker position, retrieved index) sorted by position
    let mut head: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut top: Vec<Option<u32>> = Vec::with_capacity(m);
    let mut row = Vec::with_capacity(n + 1);

    top.extend_from_slice(&grades[..m]);
    let first = ctx.score_top(&top).map_err(wrap)?;
    row.push(first.value);

    for k in 1..=n {
        let idx = k - 1;
        let key = (positions[idx], idx);
        let at = head.partition_point(|e| *e < key);
        head.insert(at, key);
        // with m documents already in the head, an insertion below the
        // first m places leaves the scored prefix untouched
        if idx >= m && at >= m {
            let last = *row.last().unwrap();
            row.push(last);
            continue;
        }
        top.clear();
        top.extend(head.iter().take(m).map(|&(_, i)| grades[i]));
        let missing = m - top.len();
        top.extend_from_slice(&grades[k..k + missing]);
        row.push(ctx.score_top(&top).map_err(wrap)?.value);
    }
    Ok((row, first.flag))
}

type QueryResult = (String, Result<(Vec<f64>, Option<ScoreFlag>), SimError>);

fn collect_sweep(metric: MetricId, results: Vec<QueryResult>) -> Result<SweepMatrix, SimError> {
    let mut out = SweepMatrix::new(metric);
    for (qid, res) in results {
        match res {
            Ok((row, flag)) => {
                if let Some(f) = flag {
                    out.flags.insert(qid.clone(), f);
                }
                out.rows.insert(qid, row);
            }
            Err(SimError::Metric { source, .. }) => {
                log::warn!("query {qid} left out of the sweep: {source}");
                out.errors.insert(qid, source);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Metric value of the composite list at every cut-off, per query.
///
/// Each step inserts one more document into the re-ranked head, so the
/// sweep is incremental; it is exactly equal to [`sweep_naive`]. Metric
/// failures are recorded per query and do not abort the sweep.
pub fn sweep(pair: &RerankPair, qrels: &QrelsSet, metric: MetricId) -> Result<SweepMatrix, SimError> {
    let inputs: Vec<QueryInput<'_>> = pair
        .queries()
        .map(|(retrieved, reranked)| QueryInput { retrieved, reranked })
        .collect();
    let results = inputs
        .par_iter()
        .map(|q| (q.retrieved.query_id().to_string(), sweep_query(q, qrels, metric)))
        .collect();
    collect_sweep(metric, results)
}

/// Reference sweep: builds and scores every composite list from scratch.
pub fn sweep_naive(pair: &RerankPair, qrels: &QrelsSet, metric: MetricId) -> Result<SweepMatrix, SimError> {
    let results = pair
        .queries()
        .map(|(retrieved, reranked)| {
            let qid = retrieved.query_id().to_string();
            let res = (|| {
                let mut row = Vec::with_capacity(retrieved.len() + 1);
                let mut flag = None;
                for k in 0..=retrieved.len() {
                    let composite = compose_at_k(retrieved, reranked, k)?;
                    let s = metrics::evaluate(metric, &composite, qrels).map_err(|source| {
                        SimError::Metric {
                            query_id: qid.clone(),
                            source,
                        }
                    })?;
                    if k == 0 {
                        flag = s.flag;
                    }
                    row.push(s.value);
                }
                Ok((row, flag))
            })();
            (qid, res)
        })
        .collect();
    collect_sweep(metric, results)
}

/// Smallest cut-off attaining the maximum of a sweep row.
///
/// # Panics
/// On an empty row.
pub fn oracle_cutoff(row: &[f64]) -> usize {
    assert!(!row.is_empty(), "oracle_cutoff needs a non-empty row");
    let mut best = 0;
    for (k, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = k;
        }
    }
    best
}

/// Linear re-ranking latency model: `fixed_overhead + k * per_item_latency`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostModel {
    /// Seconds per re-ranker inference.
    pub per_item_latency: f64,
    /// Seconds per query regardless of `k`.
    #[serde(default)]
    pub fixed_overhead: f64,
}

impl CostModel {
    /// Point-wise LLM re-ranker (29.77 s at depth 1000, 2.98 s at depth 100).
    pub const LLM: CostModel = CostModel {
        per_item_latency: 0.02977,
        fixed_overhead: 0.0,
    };
    /// Point-wise pre-trained LM re-ranker.
    pub const PLM: CostModel = CostModel {
        per_item_latency: 0.01366,
        fixed_overhead: 0.0,
    };

    pub fn preset(name: &str) -> Option<CostModel> {
        match name {
            "llm" => Some(Self::LLM),
            "plm" => Some(Self::PLM),
            _ => None,
        }
    }

    pub fn latency(&self, k: usize) -> f64 {
        self.fixed_overhead + k as f64 * self.per_item_latency
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self::LLM
    }
}

/// Per-query cut-offs chosen by one truncation method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationPrediction {
    pub method: String,
    pub cutoffs: BTreeMap<String, usize>,
}

impl TruncationPrediction {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            cutoffs: BTreeMap::new(),
        }
    }

    pub fn get(&self, query_id: &str) -> Option<usize> {
        self.cutoffs.get(query_id).copied()
    }

    /// TSV with a `# method=NAME` header and `query_id<TAB>k` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# method={}\n", self.method);
        for (q, k) in &self.cutoffs {
            let _ = writeln!(out, "{q}\t{k}");
        }
        out
    }

    /// Parses the TSV format; `fallback_method` names the prediction when
    /// the file has no `# method=` header (typically the file stem).
    pub fn parse_tsv<R: BufRead>(source: R, fallback_method: &str) -> Result<Self, SimError> {
        let mut pred = Self::new(fallback_method);
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(name) = comment.trim().strip_prefix("method=") {
                    pred.method = name.trim().to_string();
                }
                continue;
            }
            let malformed = |reason: String| SimError::Malformed {
                line: idx + 1,
                reason,
            };
            let mut cols = trimmed.split('\t');
            let (Some(q), Some(k), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(malformed("expected query_id<TAB>k".into()));
            };
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| malformed(format!("cut-off {k:?} is not a non-negative integer")))?;
            if pred.cutoffs.insert(q.trim().to_string(), k).is_some() {
                return Err(malformed(format!("query {q} listed twice")));
            }
        }
        Ok(pred)
    }
}

/// The cut-off per query that attains the sweep maximum.
pub fn oracle_prediction(sweep: &SweepMatrix) -> TruncationPrediction {
    TruncationPrediction {
        method: "oracle".into(),
        cutoffs: sweep
            .rows()
            .map(|(q, r)| (q.to_string(), oracle_cutoff(r)))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub query_id: String,
    pub k: usize,
    pub metric: f64,
}

/// Averages of one prediction over the evaluated queries, plus the
/// per-query values used for significance tests.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub method: String,
    pub avg_k: f64,
    pub mean_metric: f64,
    pub mean_latency: f64,
    pub per_query: Vec<QueryOutcome>,
}

impl EvalRow {
    pub fn metric_values(&self) -> Vec<f64> {
        self.per_query.iter().map(|o| o.metric).collect()
    }
}

fn summarize(method: &str, per_query: Vec<QueryOutcome>, cost: &CostModel) -> Result<EvalRow, SimError> {
    if per_query.is_empty() {
        return Err(SimError::Empty);
    }
    let n = per_query.len() as f64;
    let (mut sum_k, mut sum_m, mut sum_l) = (0.0, 0.0, 0.0);
    for o in &per_query {
        sum_k += o.k as f64;
        sum_m += o.metric;
        sum_l += cost.latency(o.k);
    }
    Ok(EvalRow {
        method: method.to_string(),
        avg_k: sum_k / n,
        mean_metric: sum_m / n,
        mean_latency: sum_l / n,
        per_query,
    })
}

fn lookup(pred: &TruncationPrediction, qid: &str, len: usize) -> Result<usize, SimError> {
    let k = pred.get(qid).ok_or_else(|| SimError::MissingQuery {
        method: pred.method.clone(),
        query_id: qid.to_string(),
    })?;
    if k > len {
        return Err(SimError::CutoffOutOfRange {
            query_id: qid.to_string(),
            k,
            len,
        });
    }
    Ok(k)
}

/// Evaluates a prediction by building each composite list.
pub fn evaluate_prediction(
    pred: &TruncationPrediction,
    pair: &RerankPair,
    qrels: &QrelsSet,
    metric: MetricId,
    cost: &CostModel,
) -> Result<EvalRow, SimError> {
    let mut per_query = Vec::with_capacity(pair.len());
    for (retrieved, reranked) in pair.queries() {
        let qid = retrieved.query_id();
        let k = lookup(pred, qid, retrieved.len())?;
        let composite = compose_at_k(retrieved, reranked, k)?;
        let value = metrics::evaluate(metric, &composite, qrels)
            .map_err(|source| SimError::Metric {
                query_id: qid.to_string(),
                source,
            })?
            .value;
        per_query.push(QueryOutcome {
            query_id: qid.to_string(),
            k,
            metric: value,
        });
    }
    summarize(&pred.method, per_query, cost)
}

/// Evaluates a prediction against a precomputed sweep; identical to
/// [`evaluate_prediction`] on the sweep's queries.
pub fn evaluate_with_sweep(
    pred: &TruncationPrediction,
    sweep: &SweepMatrix,
    cost: &CostModel,
) -> Result<EvalRow, SimError> {
    let mut per_query = Vec::with_capacity(sweep.len());
    for (qid, row) in sweep.rows() {
        let k = lookup(pred, qid, row.len() - 1)?;
        per_query.push(QueryOutcome {
            query_id: qid.to_string(),
            k,
            metric: row[k],
        });
    }
    summarize(&pred.method, per_query, cost)
}

/// CSV cache of a sweep: `query_id,k,<metric>` with shortest round-trip floats.
pub fn write_sweep_csv(sweep: &SweepMatrix) -> String {
    let mut out = format!("query_id,k,{}\n", sweep.metric);
    for (q, row) in sweep.rows() {
        for (k, v) in row.iter().enumerate() {
            let _ = writeln!(out, "{q},{k},{v}");
        }
    }
    out
}

pub fn parse_sweep_csv<R: BufRead>(source: R) -> Result<SweepMatrix, SimError> {
    let mut lines = source.lines().enumerate();
    let malformed = |line: usize, reason: String| SimError::Malformed { line, reason };
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(malformed(1, "empty sweep cache".into())),
    };
    let metric: MetricId = header
        .trim()
        .strip_prefix("query_id,k,")
        .ok_or_else(|| malformed(1, "expected header query_id,k,<metric>".into()))?
        .parse()
        .map_err(|e: MetricError| malformed(1, e.to_string()))?;
    let mut out = SweepMatrix::new(metric);
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ln = idx + 1;
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 3 {
            return Err(malformed(ln, "expected 3 columns".into()));
        }
        let k: usize = cols[1]
            .parse()
            .map_err(|_| malformed(ln, format!("bad cut-off {:?}", cols[1])))?;
        let v: f64 = cols[2]
            .parse()
            .map_err(|_| malformed(ln, format!("bad value {:?}", cols[2])))?;
        let row = out.rows.entry(cols[0].to_string()).or_default();
        if row.len() != k {
            return Err(malformed(ln, format!("cut-offs for {} not contiguous from 0", cols[0])));
        }
        row.push(v);
    }
    Ok(out)
}
