//! Per-item features for supervised truncators and their JSONL export.

mod embeddings;
mod text;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use embeddings::{parse_embeddings, write_embeddings, EmbeddingPair, Embeddings};
pub use text::{build_tfidf, neighbor_similarity, tokenize, Cosine, SparseVector, TfIdf};

use crate::corpus::{Corpus, QrelsSet, RankedList, RerankPair};
use crate::eet::TargetVector;

pub const SCHEMA_VERSION: &str = "v1";
const SCORE_NORMALIZATION: &str = "per-list min-max; constant lists map to 0.5";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no text for document {doc_id} (query {query_id})")]
    MissingDocText { query_id: String, doc_id: String },
    #[error("no embedding for query {query_id}, document {doc_id}")]
    MissingEmbedding { query_id: String, doc_id: String },
    #[error("no target vector for query {0}")]
    MissingTargets(String),
    #[error("target vector for query {query_id} has {got} values, expected {expected}")]
    TargetLength { query_id: String, got: usize, expected: usize },
    #[error("embeddings line {line}: {reason}")]
    MalformedEmbeddings { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRecord {
    pub doc_id: String,
    pub retrieval_score: f64,
    pub length_tokens: usize,
    pub unique_tokens: usize,
    pub tfidf_sim_prev: f64,
    pub tfidf_sim_next: f64,
    pub embed_sim_prev: Option<f64>,
    pub embed_sim_next: Option<f64>,
    pub dense_embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureList {
    pub query_id: String,
    pub records: Vec<FeatureRecord>,
    pub labels: Vec<u8>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Header<'a> {
    schema_version: &'a str,
    score_normalization: &'a str,
    tfidf: &'a str,
    target: &'a crate::eet::EetConfig,
    embeddings: Option<usize>,
    queries: usize,
}

/// Min-max scaling to [0, 1]; constant input maps to 0.5.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|s| (s - lo) / (hi - lo)).collect()
}

/// Features, labels and targets of one retrieved list.
pub fn feature_list(
    list: &RankedList,
    corpus: &Corpus,
    qrels: &QrelsSet,
    targets: &TargetVector,
    tfidf: &TfIdf,
    embeddings: Option<&Embeddings>,
) -> Result<FeatureList, FeatureError> {
    let qid = list.query_id();
    let texts: Vec<&str> = list
        .doc_ids()
        .map(|d| {
            corpus.get(d).map(String::as_str).ok_or_else(|| FeatureError::MissingDocText {
                query_id: qid.to_string(),
                doc_id: d.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    let row = targets.get(qid).ok_or_else(|| FeatureError::MissingTargets(qid.to_string()))?;
    if row.len() != list.len() + 1 {
        return Err(FeatureError::TargetLength {
            query_id: qid.to_string(),
            got: row.len(),
            expected: list.len() + 1,
        });
    }

    let vectors: Vec<SparseVector> = texts.iter().map(|t| tfidf.vectorize(t)).collect();
    let (tfidf_sims, zero) = neighbor_similarity(&vectors);
    if zero > 0 {
        log::warn!("query {qid}: {zero} neighbour pairs involve an all-zero tf-idf vector");
    }

    let pairs: Option<Vec<&EmbeddingPair>> = embeddings
        .map(|e| {
            list.doc_ids()
                .map(|d| {
                    e.get(qid, d).ok_or_else(|| FeatureError::MissingEmbedding {
                        query_id: qid.to_string(),
                        doc_id: d.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    let embed_sims = pairs.as_ref().map(|ps| {
        let docs: Vec<Vec<f64>> = ps.iter().map(|p| p.doc_embedding.clone()).collect();
        neighbor_similarity(&docs).0
    });

    let scores: Vec<f64> = list.items().iter().map(|it| it.score).collect();
    let norm = min_max_normalize(&scores);
    let records = list
        .items()
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let mut tokens = tokenize(texts[i]);
            let length_tokens = tokens.len();
            tokens.sort_unstable();
            tokens.dedup();
            FeatureRecord {
                doc_id: item.doc_id.clone(),
                retrieval_score: norm[i],
                length_tokens,
                unique_tokens: tokens.len(),
                tfidf_sim_prev: tfidf_sims[i].0,
                tfidf_sim_next: tfidf_sims[i].1,
                embed_sim_prev: embed_sims.as_ref().map(|s| s[i].0),
                embed_sim_next: embed_sims.as_ref().map(|s| s[i].1),
                dense_embedding: pairs.as_ref().map(|ps| {
                    let p = ps[i];
                    p.query_embedding.iter().chain(&p.doc_embedding).copied().collect()
                }),
            }
        })
        .collect();
    let labels = list.doc_ids().map(|d| u8::from(qrels.is_relevant(qid, d))).collect();
    Ok(FeatureList {
        query_id: qid.to_string(),
        records,
        labels,
        targets: row.to_vec(),
    })
}

/// Feature lists for every query of the pair, in query id order.
pub fn extract_features(
    pair: &RerankPair,
    corpus: &Corpus,
    qrels: &QrelsSet,
    targets: &TargetVector,
    embeddings: Option<&Embeddings>,
) -> Result<Vec<FeatureList>, FeatureError> {
    let tfidf = build_tfidf(corpus)?;
    let lists: Vec<&RankedList> = pair.retrieved().lists().collect();
    lists
        .par_iter()
        .map(|l| feature_list(l, corpus, qrels, targets, &tfidf, embeddings))
        .collect()
}

/// Feature JSONL: a header object, then one object per query.
pub fn export_features(
    pair: &RerankPair,
    corpus: &Corpus,
    qrels: &QrelsSet,
    targets: &TargetVector,
    embeddings: Option<&Embeddings>,
) -> Result<String, FeatureError> {
    let lists = extract_features(pair, corpus, qrels, targets, embeddings)?;
    let header = Header {
        schema_version: SCHEMA_VERSION,
        score_normalization: SCORE_NORMALIZATION,
        tfidf: "idf = ln(N/df) + 1 over the corpus, raw tf, L2-normalized",
        target: &targets.config,
        embeddings: embeddings.map(|e| e.dimension),
        queries: lists.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for l in &lists {
        out.push_str(&serde_json::to_string(l).expect("feature list serializes"));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{pair_runs, RankedItem, RunSet};
    use crate::eet::EetConfig;
    use crate::metrics::MetricId;

    #[test]
    fn min_max_examples() {
        assert_eq!(min_max_normalize(&[5.0, 3.0, 1.0]), vec![1.0, 0.5, 0.0]);
        assert_eq!(min_max_normalize(&[2.0, 2.0]), vec![0.5, 0.5]);
    }

    fn fixture() -> (RerankPair, Corpus, QrelsSet, TargetVector) {
        let mut ret = RunSet::new("bm25");
        let mut rr = RunSet::new("rr");
        let items = vec![
            RankedItem::new("a", 5.0),
            RankedItem::new("b", 3.0),
            RankedItem::new("c", 1.0),
        ];
        ret.insert(RankedList::new("q1", items).unwrap());
        rr.insert(
            RankedList::new(
                "q1",
                vec![RankedItem::new("c", 9.0), RankedItem::new("a", 8.0), RankedItem::new("b", 7.0)],
            )
            .unwrap(),
        );
        let pair = pair_runs(ret, rr).unwrap();
        let corpus: Corpus = [("a", "the cat the"), ("b", "a dog"), ("c", "the cat sat")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut qrels = QrelsSet::new(1).unwrap();
        qrels.insert("q1", "c", 2);
        qrels.insert("q1", "b", 0);
        let mut targets = TargetVector::new(EetConfig::new(1.0, -0.001, MetricId::default()).unwrap());
        targets.insert("q1", vec![0.0, 0.1, 0.2, 0.3]);
        (pair, corpus, qrels, targets)
    }

    #[test]
    fn export_layout() {
        let (pair, corpus, qrels, targets) = fixture();
        let lists = extract_features(&pair, &corpus, &qrels, &targets, None).unwrap();
        let l = &lists[0];
        assert_eq!(l.labels, vec![0, 0, 1]);
        assert_eq!(l.records.len(), 3);
        let a = &l.records[0];
        assert_eq!((a.length_tokens, a.unique_tokens), (3, 2));
        assert_eq!(a.retrieval_score, 1.0);
        assert_eq!(a.tfidf_sim_prev, a.tfidf_sim_next);
        assert!(a.embed_sim_prev.is_none() && a.dense_embedding.is_none());
        assert_eq!(l.records[2].retrieval_score, 0.0);
        assert_eq!(l.targets, vec![0.0, 0.1, 0.2, 0.3]);

        let text = export_features(&pair, &corpus, &qrels, &targets, None).unwrap();
        assert_eq!(text, export_features(&pair, &corpus, &qrels, &targets, None).unwrap());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["schema_version"], "v1");
        assert!(lines[1].starts_with("{\"query_id\":\"q1\",\"records\":[{\"doc_id\":\"a\",\"retrieval_score\":1.0,"));
        let body: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        let keys: Vec<&String> = body.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 4);
    }

    #[test]
    fn missing_doc_text_names_doc() {
        let (pair, mut corpus, qrels, targets) = fixture();
        corpus.remove("b");
        match extract_features(&pair, &corpus, &qrels, &targets, None).unwrap_err() {
            FeatureError::MissingDocText { doc_id, .. } => assert_eq!(doc_id, "b"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn embeddings_fill_optional_slots() {
        let (pair, corpus, qrels, targets) = fixture();
        let mut emb = Embeddings::new(2);
        for (d, v) in [("a", [1.0, 0.0]), ("b", [1.0, 0.0]), ("c", [0.0, 1.0])] {
            emb.insert("q1", d, vec![0.5, 0.5], v.to_vec()).unwrap();
        }
        let l = &extract_features(&pair, &corpus, &qrels, &targets, Some(&emb)).unwrap()[0];
        assert_eq!(l.records[0].embed_sim_prev, Some(1.0));
        assert_eq!(l.records[1].embed_sim_next, Some(0.0));
        assert_eq!(l.records[2].dense_embedding.as_deref(), Some(&[0.5, 0.5, 0.0, 1.0][..]));

        let mut partial = Embeddings::new(2);
        partial.insert("q1", "a", vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            extract_features(&pair, &corpus, &qrels, &targets, Some(&partial)).unwrap_err(),
            FeatureError::MissingEmbedding { .. }
        ));
    }

    #[test]
    fn target_length_is_checked() {
        let (pair, corpus, qrels, mut targets) = fixture();
        targets.insert("q1", vec![0.0, 0.1]);
        assert!(matches!(
            extract_features(&pair, &corpus, &qrels, &targets, None).unwrap_err(),
            FeatureError::TargetLength { got: 2, expected: 4, .. }
        ));
    }
}
