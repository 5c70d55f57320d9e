//! Tokenization, tf-idf vectors and cosine similarity.

use std::collections::HashMap;

use super::FeatureError;
use crate::corpus::Corpus;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sparse vector as `(term id, weight)` pairs sorted by term id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector(pub Vec<(u32, f64)>);

impl SparseVector {
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }
}

/// Vectors with a cosine similarity; `None` when either side is all-zero.
pub trait Cosine {
    fn cosine(&self, other: &Self) -> Option<f64>;
}

impl Cosine for SparseVector {
    fn cosine(&self, other: &Self) -> Option<f64> {
        let sq = |v: &SparseVector| v.0.iter().map(|(_, w)| w * w).sum::<f64>();
        let denom = (sq(self) * sq(other)).sqrt();
        (denom > 0.0).then(|| (self.dot(other) / denom).clamp(-1.0, 1.0))
    }
}

impl Cosine for Vec<f64> {
    fn cosine(&self, other: &Self) -> Option<f64> {
        let dot: f64 = self.iter().zip(other).map(|(a, b)| a * b).sum();
        let na: f64 = self.iter().map(|a| a * a).sum();
        let nb: f64 = other.iter().map(|b| b * b).sum();
        let denom = (na * nb).sqrt();
        (denom > 0.0).then(|| (dot / denom).clamp(-1.0, 1.0))
    }
}

/// Corpus-wide tf-idf model: `idf(t) = ln(N / df(t)) + 1`, document
/// vectors are raw term counts times idf, L2-normalized.
#[derive(Debug, Clone)]
pub struct TfIdf {
    vocab: HashMap<String, u32>,
    idf: Vec<f64>,
    n_docs: usize,
}

/// Builds the vocabulary and document frequencies over the whole corpus.
pub fn build_tfidf(corpus: &Corpus) -> Result<TfIdf, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    // BTreeMap iteration keeps term ids deterministic
    for text in corpus.values() {
        let mut tokens = tokenize(text);
        tokens.sort_unstable();
        tokens.dedup();
        for t in tokens {
            let next = vocab.len() as u32;
            let id = *vocab.entry(t).or_insert(next);
            if id as usize == df.len() {
                df.push(0);
            }
            df[id as usize] += 1;
        }
    }
    let n = corpus.len() as f64;
    let idf = df.iter().map(|&d| (n / d as f64).ln() + 1.0).collect();
    Ok(TfIdf {
        vocab,
        idf,
        n_docs: corpus.len(),
    })
}

impl TfIdf {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn vocabulary_size(&self) -> usize {
        self.idf.len()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocab.get(term).map(|&id| self.idf[id as usize])
    }

    /// Unit-norm tf-idf vector of a text; terms outside the vocabulary are
    /// ignored, so the result may be all-zero.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for t in tokenize(text) {
            if let Some(&id) = self.vocab.get(&t) {
                *counts.entry(id).or_default() += 1.0;
            }
        }
        let mut v: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(id, tf)| (id, tf * self.idf[id as usize]))
            .collect();
        v.sort_unstable_by_key(|(id, _)| *id);
        let mut out = SparseVector(v);
        let norm = out.norm();
        if norm > 0.0 {
            for (_, w) in &mut out.0 {
                *w /= norm;
            }
        }
        out
    }
}

/// Cosine similarity of each item with its rank neighbours, as
/// `(sim_prev, sim_next)`. The first item copies `sim_next` into
/// `sim_prev`, the last copies `sim_prev` into `sim_next`, and a single
/// item gets `(0, 0)`. Pairs involving an all-zero vector score 0; the
/// second value counts such pairs.
pub fn neighbor_similarity<V: Cosine>(vectors: &[V]) -> (Vec<(f64, f64)>, usize) {
    let n = vectors.len();
    if n <= 1 {
        return (vec![(0.0, 0.0); n], 0);
    }
    let mut zero = 0;
    let adjacent: Vec<f64> = vectors
        .windows(2)
        .map(|w| {
            w[0].cosine(&w[1]).unwrap_or_else(|| {
                zero += 1;
                0.0
            })
        })
        .collect();
    let sims = (0..n)
        .map(|i| {
            let prev = (i > 0).then(|| adjacent[i - 1]);
            let next = (i + 1 < n).then(|| adjacent[i]);
            match (prev, next) {
                (Some(p), Some(nx)) => (p, nx),
                (None, Some(nx)) => (nx, nx),
                (Some(p), None) => (p, p),
                (None, None) => unreachable!(),
            }
        })
        .collect();
    (sims, zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat, the CAT."), ["the", "cat", "the", "cat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a1-b2"), ["a1", "b2"]);
    }

    fn corpus(docs: &[&str]) -> Corpus {
        docs.iter().enumerate().map(|(i, t)| (format!("d{i}"), t.to_string())).collect()
    }

    #[test]
    fn idf_values() {
        let one = build_tfidf(&corpus(&["alpha beta beta"])).unwrap();
        assert_eq!(one.idf("alpha"), Some(1.0));
        assert_eq!(one.idf("beta"), Some(1.0));
        let four = build_tfidf(&corpus(&["x common", "common", "common y", "common"])).unwrap();
        assert_eq!(four.idf("common"), Some(1.0));
        assert!((four.idf("x").unwrap() - 2.386294361).abs() < 1e-9);
        assert_eq!(four.vocabulary_size(), 3);
        assert!(matches!(build_tfidf(&Corpus::new()).unwrap_err(), FeatureError::EmptyCorpus));
    }

    #[test]
    fn single_term_is_unit_basis() {
        let m = build_tfidf(&corpus(&["cat cat", "dog"])).unwrap();
        let v = m.vectorize("cat cat cat");
        assert_eq!(v.0.len(), 1);
        assert!((v.0[0].1 - 1.0).abs() < 1e-15);
        assert!(m.vectorize("unknown words").0.is_empty());
    }

    #[test]
    fn vectors_are_unit_norm() {
        let m = build_tfidf(&corpus(&["a b c", "a a d", "e f a b", "zz"])).unwrap();
        for text in ["a b c", "a a d", "e f a b", "b b b e z"] {
            assert!((m.vectorize(text).norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn neighbor_examples() {
        let same = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        assert_eq!(neighbor_similarity(&same).0, vec![(1.0, 1.0), (1.0, 1.0)]);
        let orth = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(neighbor_similarity(&orth).0, vec![(0.0, 0.0), (0.0, 0.0)]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![vec![1.0, 0.0], vec![h, h], vec![0.0, 1.0]];
        let (s, _) = neighbor_similarity(&v);
        assert!((s[0].0 - h).abs() < 1e-12 && (s[0].1 - h).abs() < 1e-12);
        assert!((s[1].0 - h).abs() < 1e-12 && (s[1].1 - h).abs() < 1e-12);
        assert_eq!(s[2].0, s[2].1);
        assert_eq!(neighbor_similarity(&[vec![1.0]]).0, vec![(0.0, 0.0)]);
    }

    #[test]
    fn zero_vectors_are_flagged() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        let (s, zero) = neighbor_similarity(&v);
        assert_eq!(zero, 1);
        assert_eq!(s[0], (0.0, 0.0));
        assert_eq!(s[1], (0.0, 1.0));
    }

    #[test]
    fn sparse_matches_dense() {
        let a = SparseVector(vec![(0, 1.0), (3, 2.0)]);
        let b = SparseVector(vec![(1, 5.0), (3, 1.0)]);
        let da = vec![1.0, 0.0, 0.0, 2.0];
        let db = vec![0.0, 5.0, 0.0, 1.0];
        assert!((a.cosine(&b).unwrap() - da.cosine(&db).unwrap()).abs() < 1e-15);
    }
}
