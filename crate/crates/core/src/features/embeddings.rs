//! Dense query/document embeddings supplied as JSON lines.
//!
//! The first non-empty line is a header `{"dimension": N}`; every other
//! line is `{"query_id", "doc_id", "query_embedding", "doc_embedding"}`.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair {
    pub query_embedding: Vec<f64>,
    pub doc_embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dimension: usize,
    pairs: BTreeMap<(String, String), EmbeddingPair>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    query_id: String,
    doc_id: String,
    query_embedding: Vec<f64>,
    doc_embedding: Vec<f64>,
}

impl Embeddings {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            pairs: BTreeMap::new(),
        }
    }

    /// Fails with the offending length when a vector has the wrong dimension.
    pub fn insert(
        &mut self,
        query_id: impl Into<String>,
        doc_id: impl Into<String>,
        query_embedding: Vec<f64>,
        doc_embedding: Vec<f64>,
    ) -> Result<(), usize> {
        for v in [&query_embedding, &doc_embedding] {
            if v.len() != self.dimension {
                return Err(v.len());
            }
        }
        self.pairs.insert(
            (query_id.into(), doc_id.into()),
            EmbeddingPair {
                query_embedding,
                doc_embedding,
            },
        );
        Ok(())
    }

    pub fn get(&self, query_id: &str, doc_id: &str) -> Option<&EmbeddingPair> {
        self.pairs.get(&(query_id.to_string(), doc_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn parse_embeddings<R: BufRead>(source: R) -> Result<Embeddings, FeatureError> {
    let malformed = |line: usize, reason: String| FeatureError::MalformedEmbeddings { line, reason };
    let mut out: Option<Embeddings> = None;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some(emb) = out.as_mut() else {
            let h: HeaderLine = serde_json::from_str(&line)
                .map_err(|e| malformed(n, format!("expected a {{\"dimension\": N}} header: {e}")))?;
            if h.dimension == 0 {
                return Err(malformed(n, "dimension must be positive".into()));
            }
            out = Some(Embeddings::new(h.dimension));
            continue;
        };
        let r: RecordLine = serde_json::from_str(&line).map_err(|e| malformed(n, e.to_string()))?;
        if r.query_embedding.iter().chain(&r.doc_embedding).any(|x| !x.is_finite()) {
            return Err(malformed(n, "non-finite embedding value".into()));
        }
        let dim = emb.dimension;
        emb.insert(r.query_id, r.doc_id, r.query_embedding, r.doc_embedding)
            .map_err(|got| malformed(n, format!("vector of length {got}, header declares {dim}")))?;
    }
    out.ok_or_else(|| malformed(0, "empty embeddings file".into()))
}

pub fn write_embeddings(emb: &Embeddings) -> String {
    let mut out = serde_json::to_string(&HeaderLine { dimension: emb.dimension }).unwrap();
    out.push('\n');
    for ((q, d), p) in &emb.pairs {
        let rec = RecordLine {
            query_id: q.clone(),
            doc_id: d.clone(),
            query_embedding: p.query_embedding.clone(),
            doc_embedding: p.doc_embedding.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).unwrap());
        out.push('\n');
    }
    out
}
