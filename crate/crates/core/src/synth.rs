//! Seeded synthetic retrieve-then-re-rank dataset.
//!
//! Each document has a latent grade. The retriever scores it with a weak
//! grade signal under heavy noise; the re-ranker sees the grade much more
//! clearly. Texts and embeddings lean towards the query's topic words in
//! proportion to the grade, so every feature carries some signal.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Corpus, QrelsSet, RankedItem, RankedList, RunSet};
use crate::features::Embeddings;
use crate::sim::{oracle_cutoff, SweepMatrix, TruncationPrediction};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub queries: usize,
    pub depth: usize,
    pub vocabulary: usize,
    pub embedding_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 20240414,
            queries: 50,
            depth: 100,
            vocabulary: 400,
            embedding_dim: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub retrieved: RunSet,
    pub reranked: RunSet,
    pub qrels: QrelsSet,
    pub corpus: Corpus,
    pub embeddings: Embeddings,
}

/// Rounds to the 6 decimals a run file keeps, so written runs re-parse exactly.
fn run_precision(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn short(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn word(i: usize) -> String {
    const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pa", "do", "gu"];
    let mut w = String::new();
    let mut n = i;
    loop {
        w.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
        if n == 0 {
            break;
        }
    }
    w
}

pub fn generate(config: &SynthConfig) -> SynthDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let vocab: Vec<String> = (0..config.vocabulary).map(word).collect();

    let mut retrieved = RunSet::new("synth-bm25");
    let mut reranked = RunSet::new("synth-ce");
    let mut qrels = QrelsSet::new(2).expect("threshold 2 is valid");
    let mut corpus = Corpus::new();
    let mut embeddings = Embeddings::new(config.embedding_dim);

    for q in 0..config.queries {
        let qid = format!("q{:03}", q + 1);
        let topic: Vec<&String> = vocab.choose_multiple(&mut rng, 5).collect();
        // a third of the queries have almost nothing relevant
        let rel_rate = if rng.gen_bool(0.3) { 0.01 } else { rng.gen_range(0.03..0.25) };
        let query_vec: Vec<f64> = (0..config.embedding_dim).map(|_| noise.sample(&mut rng)).collect();

        let mut ret_items = Vec::with_capacity(config.depth);
        let mut rr_items = Vec::with_capacity(config.depth);
        for j in 0..config.depth {
            let doc_id = format!("D{:03}-{:03}", q + 1, j);
            let grade: u32 = if rng.gen_bool(rel_rate) { rng.gen_range(1..=3) } else { 0 };
            let g = grade as f64;

            let ret_score = 12.0 + 0.6 * g + 1.2 * noise.sample(&mut rng);
            let rr_score = 2.0 * g + 0.8 * noise.sample(&mut rng);
            ret_items.push(RankedItem::new(doc_id.clone(), run_precision(ret_score)));
            rr_items.push(RankedItem::new(doc_id.clone(), run_precision(rr_score)));

            let len = rng.gen_range(10..50);
            let p_topic = 0.04 + 0.08 * g;
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.gen_bool(p_topic) {
                        topic.choose(&mut rng).unwrap().as_str()
                    } else {
                        // skewed towards low word ids, roughly Zipf-like
                        let u: f64 = rng.gen();
                        vocab[((u * u) * vocab.len() as f64) as usize].as_str()
                    }
                })
                .collect();
            corpus.insert(doc_id.clone(), words.join(" "));

            let doc_vec: Vec<f64> = query_vec
                .iter()
                .map(|x| short(0.4 * g * x + noise.sample(&mut rng)))
                .collect();
            let qv: Vec<f64> = query_vec.iter().map(|x| short(*x)).collect();
            embeddings
                .insert(qid.clone(), doc_id.clone(), qv, doc_vec)
                .expect("dimension matches");

            if grade > 0 || j % 3 == 0 {
                qrels.insert(qid.clone(), doc_id, grade);
            }
        }
        // relevant documents the retriever missed
        for m in 0..rng.gen_range(0..3) {
            qrels.insert(qid.clone(), format!("D{:03}-X{m}", q + 1), 2);
        }

        retrieved.insert(RankedList::from_unsorted(qid.clone(), ret_items).expect("finite unique scores"));
        reranked.insert(RankedList::from_unsorted(qid, rr_items).expect("finite unique scores"));
    }

    SynthDataset {
        retrieved,
        reranked,
        qrels,
        corpus,
        embeddings,
    }
}

/// A stand-in for a trained truncator: the oracle cut-off blurred by
/// seeded noise, with occasional outright misses.
pub fn sample_prediction(sweep: &SweepMatrix, seed: u64, method: &str) -> TruncationPrediction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 6.0).expect("valid normal");
    let mut pred = TruncationPrediction::new(method);
    for (qid, row) in sweep.rows() {
        let depth = row.len() - 1;
        let k = if rng.gen_bool(0.2) {
            rng.gen_range(0..=depth)
        } else {
            let k = oracle_cutoff(row) as f64 + noise.sample(&mut rng);
            (k.round().max(0.0) as usize).min(depth)
        };
        pred.cutoffs.insert(qid.to_string(), k);
    }
    pred
}

/// Corpus in the `docid<TAB>text` format.
pub fn write_corpus(corpus: &Corpus) -> String {
    corpus.iter().map(|(d, t)| format!("{d}\t{t}\n")).collect()
}
