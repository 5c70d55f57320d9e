//! Run files, relevance judgments and the plain-text document corpus.
//!
//! Run files use the 6-column TREC layout (`qid Q0 docid rank score tag`).
//! The incoming rank column is ignored: every list is re-sorted by score
//! descending with a doc id tie-break and ranks are rewritten `1..n`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

/// Default maximum list depth kept at load time.
pub const DEFAULT_MAX_DEPTH: usize = 1000;

/// Default grade at or above which a judged document counts as relevant.
pub const DEFAULT_RELEVANCE_THRESHOLD: u32 = 2;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed input: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: document {doc_id} appears twice for query {query_id}")]
    DuplicateDoc {
        line: usize,
        query_id: String,
        doc_id: String,
    },
    #[error("input contains no records")]
    EmptyInput,
    #[error("line {line}: negative grade {grade} for ({query_id}, {doc_id})")]
    NegativeGrade {
        line: usize,
        query_id: String,
        doc_id: String,
        grade: i64,
    },
    #[error("relevance threshold must be >= 1, got {0}")]
    InvalidThreshold(u32),
    #[error("ranked list for query {query_id} is invalid: {reason}")]
    InvalidList { query_id: String, reason: String },
    #[error("retrieved and re-ranked runs disagree on document sets: {}", format_mismatches(.0))]
    DocSetMismatch(Vec<DocSetMismatch>),
    #[error("retrieved and re-ranked runs share no query")]
    EmptyIntersection,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-query symmetric difference between a retrieved and a re-ranked list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocSetMismatch {
    pub query_id: String,
    pub only_retrieved: Vec<String>,
    pub only_reranked: Vec<String>,
}

fn format_mismatches(m: &[DocSetMismatch]) -> String {
    let mut out = String::new();
    for (i, mm) in m.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(
            out,
            "query {} (missing from re-ranked: [{}], missing from retrieved: [{}])",
            mm.query_id,
            mm.only_retrieved.join(", "),
            mm.only_reranked.join(", ")
        );
    }
    out
}

/// One entry of a ranked list. The rank is implied by the position.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedItem {
    pub doc_id: String,
    pub score: f64,
}

impl RankedItem {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Score descending, then doc id ascending.
pub fn canonical_order(a: &RankedItem, b: &RankedItem) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// One query's ranked result. Ranks are contiguous `1..=len`, scores are
/// non-increasing and doc ids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    query_id: String,
    items: Vec<RankedItem>,
}

impl RankedList {
    /// Builds a list from items already in rank order, checking invariants.
    pub fn new(query_id: impl Into<String>, items: Vec<RankedItem>) -> Result<Self, CorpusError> {
        let query_id = query_id.into();
        let mut seen = HashSet::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if !item.score.is_finite() {
                return Err(CorpusError::InvalidList {
                    query_id,
                    reason: format!("non-finite score at rank {}", i + 1),
                });
            }
            if !seen.insert(item.doc_id.as_str()) {
                return Err(CorpusError::InvalidList {
                    query_id,
                    reason: format!("duplicate document {}", item.doc_id),
                });
            }
            if i > 0 && items[i - 1].score < item.score {
                return Err(CorpusError::InvalidList {
                    query_id,
                    reason: format!("score increases at rank {}", i + 1),
                });
            }
        }
        Ok(Self { query_id, items })
    }

    /// Sorts items canonically (score descending, doc id ascending).
    pub fn from_unsorted(
        query_id: impl Into<String>,
        mut items: Vec<RankedItem>,
    ) -> Result<Self, CorpusError> {
        items.sort_by(canonical_order);
        Self::new(query_id, items)
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn items(&self) -> &[RankedItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Iterates `(rank, item)` with ranks starting at 1.
    pub fn ranked(&self) -> impl Iterator<Item = (usize, &RankedItem)> {
        self.items.iter().enumerate().map(|(i, it)| (i + 1, it))
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|it| it.doc_id.as_str())
    }

    pub fn truncate(&mut self, depth: usize) {
        self.items.truncate(depth);
    }
}

/// A run: ranked lists keyed by query id, plus the system tag.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub tag: String,
    lists: BTreeMap<String, RankedList>,
}

impl RunSet {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            lists: BTreeMap::new(),
        }
    }

    /// Inserts a list, replacing any list with the same query id.
    pub fn insert(&mut self, list: RankedList) {
        self.lists.insert(list.query_id.clone(), list);
    }

    pub fn get(&self, query_id: &str) -> Option<&RankedList> {
        self.lists.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Lists in query id order.
    pub fn lists(&self) -> impl Iterator<Item = &RankedList> {
        self.lists.values()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunParseOptions {
    pub max_depth: usize,
}

impl Default for RunParseOptions {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Parses a 6-column run file.
pub fn parse_run<R: BufRead>(source: R, opts: RunParseOptions) -> Result<RunSet, CorpusError> {
    let mut tag: Option<String> = None;
    let mut per_query: BTreeMap<String, (Vec<RankedItem>, HashSet<String>)> = BTreeMap::new();

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                reason: format!("expected 6 columns, found {}", cols.len()),
            });
        }
        let (qid, docid) = (cols[0], cols[2]);
        cols[3]
            .parse::<i64>()
            .map_err(|_| CorpusError::MalformedLine {
                line: line_no,
                reason: format!("rank {:?} is not an integer", cols[3]),
            })?;
        let score = cols[4]
            .parse::<f64>()
            .ok()
            .filter(|s| s.is_finite())
            .ok_or_else(|| CorpusError::MalformedLine {
                line: line_no,
                reason: format!("score {:?} is not a finite number", cols[4]),
            })?;
        if tag.is_none() {
            tag = Some(cols[5].to_string());
        }
        let entry = per_query.entry(qid.to_string()).or_default();
        if !entry.1.insert(docid.to_string()) {
            return Err(CorpusError::DuplicateDoc {
                line: line_no,
                query_id: qid.to_string(),
                doc_id: docid.to_string(),
            });
        }
        entry.0.push(RankedItem::new(docid, score));
    }

    let tag = tag.ok_or(CorpusError::EmptyInput)?;
    let mut run = RunSet::new(tag);
    for (qid, (items, _)) in per_query {
        let mut list = RankedList::from_unsorted(qid, items)?;
        if list.len() > opts.max_depth {
            log::warn!(
                "query {}: list of depth {} truncated to {}",
                list.query_id(),
                list.len(),
                opts.max_depth
            );
            list.truncate(opts.max_depth);
        }
        run.insert(list);
    }
    Ok(run)
}

/// Serializes a run in canonical order; scores use 6 decimal places.
pub fn write_run(run: &RunSet) -> String {
    let mut out = String::new();
    for list in run.lists() {
        for (rank, item) in list.ranked() {
            let _ = writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                list.query_id, item.doc_id, rank, item.score, run.tag
            );
        }
    }
    out
}

/// Relevance judgments. Unjudged pairs are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct QrelsSet {
    relevance_threshold: u32,
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl QrelsSet {
    pub fn new(relevance_threshold: u32) -> Result<Self, CorpusError> {
        if relevance_threshold < 1 {
            return Err(CorpusError::InvalidThreshold(relevance_threshold));
        }
        Ok(Self {
            relevance_threshold,
            judgments: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), grade);
    }

    pub fn relevance_threshold(&self) -> u32 {
        self.relevance_threshold
    }

    /// `None` when the pair is unjudged.
    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id)
            .is_some_and(|g| g >= self.relevance_threshold)
    }

    /// All judgments for one query, keyed by doc id.
    pub fn judged(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parses a 4-column qrels file (`qid iteration docid grade`).
pub fn parse_qrels<R: BufRead>(source: R, relevance_threshold: u32) -> Result<QrelsSet, CorpusError> {
    let mut qrels = QrelsSet::new(relevance_threshold)?;
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                reason: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let grade = cols[3]
            .parse::<i64>()
            .map_err(|_| CorpusError::MalformedLine {
                line: line_no,
                reason: format!("grade {:?} is not an integer", cols[3]),
            })?;
        if grade < 0 {
            return Err(CorpusError::NegativeGrade {
                line: line_no,
                query_id: cols[0].to_string(),
                doc_id: cols[2].to_string(),
                grade,
            });
        }
        let grade = u32::try_from(grade).map_err(|_| CorpusError::MalformedLine {
            line: line_no,
            reason: format!("grade {grade} out of range"),
        })?;
        qrels.insert(cols[0], cols[2], grade);
    }
    Ok(qrels)
}

/// Qrels in the 4-column format, iteration column `0`.
pub fn write_qrels(qrels: &QrelsSet) -> String {
    let mut out = String::new();
    for qid in qrels.query_ids() {
        for (doc, grade) in qrels.judged(qid).into_iter().flatten() {
            let _ = writeln!(out, "{qid} 0 {doc} {grade}");
        }
    }
    out
}

/// A retrieved run and a full-depth re-ranking of it over the same documents.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankPair {
    retrieved: RunSet,
    reranked: RunSet,
}

impl RerankPair {
    pub fn retrieved(&self) -> &RunSet {
        &self.retrieved
    }

    pub fn reranked(&self) -> &RunSet {
        &self.reranked
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.retrieved.query_ids()
    }

    /// `(retrieved, reranked)` lists for each query in query id order.
    pub fn queries(&self) -> impl Iterator<Item = (&RankedList, &RankedList)> {
        self.retrieved.lists().map(move |r| {
            let rr = self
                .reranked
                .get(r.query_id())
                .expect("pair invariant: reranked covers every retrieved query");
            (r, rr)
        })
    }

    pub fn get(&self, query_id: &str) -> Option<(&RankedList, &RankedList)> {
        Some((self.retrieved.get(query_id)?, self.reranked.get(query_id)?))
    }

    pub fn len(&self) -> usize {
        self.retrieved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retrieved.is_empty()
    }
}

/// Pairs two runs over the intersection of their query ids.
pub fn pair_runs(retrieved: RunSet, reranked: RunSet) -> Result<RerankPair, CorpusError> {
    let shared: BTreeSet<String> = retrieved
        .query_ids()
        .filter(|q| reranked.get(q).is_some())
        .map(str::to_string)
        .collect();
    if shared.is_empty() {
        return Err(CorpusError::EmptyIntersection);
    }

    let mut mismatches = Vec::new();
    for qid in &shared {
        let a: BTreeSet<&str> = retrieved.get(qid).unwrap().doc_ids().collect();
        let b: BTreeSet<&str> = reranked.get(qid).unwrap().doc_ids().collect();
        if a != b {
            mismatches.push(DocSetMismatch {
                query_id: qid.clone(),
                only_retrieved: a.difference(&b).map(|s| s.to_string()).collect(),
                only_reranked: b.difference(&a).map(|s| s.to_string()).collect(),
            });
        }
    }
    if !mismatches.is_empty() {
        return Err(CorpusError::DocSetMismatch(mismatches));
    }

    let dropped = retrieved.len() + reranked.len() - 2 * shared.len();
    if dropped > 0 {
        log::warn!("pairing dropped {dropped} queries present in only one run");
    }
    let keep = |run: RunSet| {
        let RunSet { tag, lists } = run;
        RunSet {
            tag,
            lists: lists
                .into_iter()
                .filter(|(q, _)| shared.contains(q))
                .collect(),
        }
    };
    Ok(RerankPair {
        retrieved: keep(retrieved),
        reranked: keep(reranked),
    })
}

/// Document texts keyed by doc id.
pub type Corpus = BTreeMap<String, String>;

/// Parses a `docid<TAB>text` corpus, one document per line.
pub fn parse_corpus<R: BufRead>(source: R) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (doc_id, text) = line.split_once('\t').ok_or_else(|| CorpusError::MalformedLine {
            line: idx + 1,
            reason: "expected docid<TAB>text".to_string(),
        })?;
        corpus.insert(doc_id.trim().to_string(), text.to_string());
    }
    Ok(corpus)
}
