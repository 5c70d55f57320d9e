//! One function per subcommand. Each validates its inputs before computing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rltlab_core::corpus::{pair_runs, parse_corpus, parse_qrels, parse_run, write_qrels, write_run, RunParseOptions};
use rltlab_core::eet::{targets_from_sweep, EetConfig, TargetVector};
use rltlab_core::features::{export_features, parse_embeddings, write_embeddings};
use rltlab_core::sim::{
    evaluate_with_sweep, oracle_prediction, parse_sweep_csv, sweep as run_sweep, write_sweep_csv, EvalRow,
    SweepMatrix, TruncationPrediction,
};
use rltlab_core::synth::{self, SynthConfig};
use rltlab_core::truncate::{
    fixed_k, greedy_k, greedy_k_from_means, mean_target_curve, surprise_truncate, TruncateError,
};
use rltlab_core::{QrelsSet, RerankPair};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::ReportTable;
use crate::{open, runtime, write_atomic, HarnessError};

pub const NO_RERANK: &str = "w/o re-ranking";
pub const ORACLE: &str = "Oracle";

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}

/// Loads and pairs both runs, capped at the configured depth, plus qrels.
pub fn load_pair(cfg: &ExperimentConfig) -> Result<(RerankPair, QrelsSet), HarnessError> {
    let opts = RunParseOptions {
        max_depth: cfg.list_depth,
    };
    let p = &cfg.paths;
    let retrieved = parse_run(open(&p.retrieved_run)?, opts).map_err(|e| runtime(p.retrieved_run.display(), e))?;
    let reranked = parse_run(open(&p.reranked_run)?, opts).map_err(|e| runtime(p.reranked_run.display(), e))?;
    let qrels = parse_qrels(open(&p.qrels)?, cfg.relevance_threshold).map_err(|e| runtime(p.qrels.display(), e))?;
    let pair = pair_runs(retrieved, reranked).map_err(|e| runtime("pairing runs", e))?;
    Ok((pair, qrels))
}

/// Reads the sweep cache; it is never recomputed implicitly.
pub fn load_sweep(cfg: &ExperimentConfig) -> Result<SweepMatrix, HarnessError> {
    let path = cfg.sweep_path();
    if !path.is_file() {
        return Err(invalid(format!("sweep cache {} is missing; run `sweep` first", path.display())));
    }
    let sweep = parse_sweep_csv(open(&path)?).map_err(|e| runtime(path.display(), e))?;
    if sweep.metric() != cfg.metric {
        return Err(invalid(format!(
            "sweep cache holds {} but the config asks for {}; rerun `sweep`",
            sweep.metric(),
            cfg.metric
        )));
    }
    if sweep.is_empty() {
        return Err(runtime(path.display(), "no queries in sweep cache"));
    }
    Ok(sweep)
}

fn load_targets(path: &Path) -> Result<TargetVector, HarnessError> {
    if !path.is_file() {
        return Err(invalid(format!("target file {} is missing; run `targets` first", path.display())));
    }
    TargetVector::parse_text(open(path)?).map_err(|e| runtime(path.display(), e))
}

fn write_prediction(cfg: &ExperimentConfig, pred: &TruncationPrediction) -> Result<PathBuf, HarnessError> {
    let path = cfg.predictions_dir().join(format!("{}.tsv", pred.method));
    write_atomic(&path, &pred.to_tsv())?;
    Ok(path)
}

/// Shortest round-trip representation, as used in every CSV.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepMatrix, HarnessError> {
    let (pair, qrels) = load_pair(cfg)?;
    let sweep = run_sweep(&pair, &qrels, cfg.metric).map_err(|e| runtime("sweep", e))?;
    for (q, flag) in sweep.flags() {
        log::warn!("query {q}: {flag:?}");
    }
    write_atomic(&cfg.sweep_path(), &write_sweep_csv(&sweep))?;
    log::info!("swept {} queries", sweep.len());
    Ok(sweep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub queries: usize,
    pub fraction_k0: f64,
    pub mean_k: f64,
    pub mean_metric: f64,
}

/// Sorted distinct values with the cumulative fraction of queries at or below each.
pub fn cutoff_cdf(pred: &TruncationPrediction) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in pred.cutoffs.values() {
        *counts.entry(k).or_default() += 1;
    }
    let n = pred.cutoffs.len() as f64;
    let mut acc = 0;
    counts
        .into_iter()
        .map(|(k, c)| {
            acc += c;
            (k, acc as f64 / n)
        })
        .collect()
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<OracleSummary, HarnessError> {
    let sweep = load_sweep(cfg)?;
    let pred = oracle_prediction(&sweep);
    write_atomic(&cfg.oracle_path(), &pred.to_tsv())?;

    let mut cdf = String::from("k,cumulative_fraction\n");
    for (k, f) in cutoff_cdf(&pred) {
        cdf.push_str(&format!("{k},{}\n", num(f)));
    }
    write_atomic(&cfg.paths.work_dir.join("oracle_cdf.csv"), &cdf)?;

    let row = evaluate_with_sweep(&pred, &sweep, &cfg.cost_model).map_err(|e| runtime("oracle", e))?;
    let zero = pred.cutoffs.values().filter(|k| **k == 0).count();
    let summary = OracleSummary {
        queries: pred.cutoffs.len(),
        fraction_k0: zero as f64 / pred.cutoffs.len() as f64,
        mean_k: row.avg_k,
        mean_metric: row.mean_metric,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_atomic(&cfg.paths.work_dir.join("oracle_summary.json"), &json)?;
    log::info!(
        "oracle: {:.1}% of queries need no re-ranking, mean k {:.2}",
        100.0 * summary.fraction_k0,
        summary.mean_k
    );
    Ok(summary)
}

fn selected_presets(cfg: &ExperimentConfig, beta: Option<f64>) -> Result<Vec<EetConfig>, HarnessError> {
    match beta {
        Some(b) => Ok(vec![cfg.preset_for_beta(b)?]),
        None => Ok(cfg.eet_presets.clone()),
    }
}

pub fn targets(cfg: &ExperimentConfig, beta: Option<f64>) -> Result<Vec<PathBuf>, HarnessError> {
    let presets = selected_presets(cfg, beta)?;
    let sweep = load_sweep(cfg)?;
    let mut written = Vec::new();
    for preset in presets {
        let t = targets_from_sweep(&sweep, preset).map_err(|e| runtime("targets", e))?;
        let path = cfg.target_path(&preset);
        write_atomic(&path, &t.to_text())?;
        written.push(path);
    }
    Ok(written)
}

pub fn features(cfg: &ExperimentConfig, beta: Option<f64>) -> Result<Vec<PathBuf>, HarnessError> {
    let corpus_path = cfg
        .paths
        .corpus
        .as_ref()
        .ok_or_else(|| invalid("paths.corpus is required for `features`"))?;
    let presets = selected_presets(cfg, beta)?;
    for p in &presets {
        load_targets(&cfg.target_path(p)).map(|_| ())?;
    }
    let (pair, qrels) = load_pair(cfg)?;
    let corpus = parse_corpus(open(corpus_path)?).map_err(|e| runtime(corpus_path.display(), e))?;
    let embeddings = match &cfg.paths.embeddings {
        Some(p) => Some(parse_embeddings(open(p)?).map_err(|e| runtime(p.display(), e))?),
        None => None,
    };
    let mut written = Vec::new();
    for preset in presets {
        let targets = load_targets(&cfg.target_path(&preset))?;
        let text = export_features(&pair, &corpus, &qrels, &targets, embeddings.as_ref())
            .map_err(|e| runtime("features", e))?;
        let path = cfg.features_dir().join(format!("features_{}.jsonl", preset.tag()));
        write_atomic(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fixed,
    Greedy,
    Surprise,
}

#[derive(Debug, Clone, Default)]
pub struct TruncateArgs {
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub train_targets: Option<PathBuf>,
}

pub fn truncate(cfg: &ExperimentConfig, method: Method, args: &TruncateArgs) -> Result<Vec<PathBuf>, HarnessError> {
    match method {
        Method::Fixed => truncate_fixed(cfg, args.k),
        Method::Greedy => truncate_greedy(cfg, args.beta, args.train_targets.as_deref()),
        Method::Surprise => truncate_surprise(cfg),
    }
}

fn truncate_fixed(cfg: &ExperimentConfig, k: Option<usize>) -> Result<Vec<PathBuf>, HarnessError> {
    let sweep = load_sweep(cfg)?;
    let depths = sweep.depths();
    let ks = match k {
        Some(k) => vec![k],
        None => cfg.fixed_k_grid.clone(),
    };
    ks.into_iter().map(|k| write_prediction(cfg, &fixed_k(&depths, k))).collect()
}

/// Greedy-k per query. With explicit training targets one cut-off is fitted
/// on them; otherwise queries are split into folds by position in query id
/// order and each fold gets the cut-off fitted on the remaining folds.
pub fn greedy_prediction(
    targets: &TargetVector,
    depths: &BTreeMap<String, usize>,
    train: Option<&TargetVector>,
    folds: usize,
    method: &str,
) -> Result<TruncationPrediction, TruncateError> {
    let mut pred = TruncationPrediction::new(method);
    let qids: Vec<&str> = depths.keys().map(String::as_str).collect();
    if let Some(train) = train {
        let k = greedy_k(train)?;
        for q in qids {
            pred.cutoffs.insert(q.to_string(), k.min(depths[q]));
        }
        return Ok(pred);
    }
    for fold in 0..folds {
        let rest = qids.iter().enumerate().filter(|(i, _)| i % folds != fold).map(|(_, q)| *q);
        let k = greedy_k_from_means(&mean_target_curve(&targets.restrict(rest))?);
        for (_, q) in qids.iter().enumerate().filter(|(i, _)| i % folds == fold) {
            pred.cutoffs.insert(q.to_string(), k.min(depths[*q]));
        }
    }
    Ok(pred)
}

fn truncate_greedy(
    cfg: &ExperimentConfig,
    beta: Option<f64>,
    train_targets: Option<&Path>,
) -> Result<Vec<PathBuf>, HarnessError> {
    let presets = selected_presets(cfg, beta)?;
    let train = match train_targets {
        Some(p) => Some(load_targets(p)?),
        None => None,
    };
    let sweep = load_sweep(cfg)?;
    let depths = sweep.depths();
    let mut written = Vec::new();
    for preset in presets {
        let targets = load_targets(&cfg.target_path(&preset))?;
        let method = format!("greedy-k-beta{}", preset.beta);
        let pred = greedy_prediction(&targets, &depths, train.as_ref(), cfg.greedy_folds, &method)
            .map_err(|e| runtime(&method, e))?;
        written.push(write_prediction(cfg, &pred)?);
    }
    Ok(written)
}

#[derive(Serialize)]
struct SurpriseFailure<'a> {
    query_id: &'a str,
    k: usize,
    error: String,
}

fn truncate_surprise(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let (pair, _) = load_pair(cfg)?;
    let lists: Vec<_> = pair.retrieved().lists().collect();
    let lines: Vec<(String, usize, String)> = lists
        .par_iter()
        .map(|list| {
            let qid = list.query_id().to_string();
            match surprise_truncate(list, &cfg.surprise) {
                Ok(out) => {
                    let line = serde_json::to_string(&out).expect("outcome serializes");
                    (qid, out.k, line)
                }
                Err(e) => {
                    log::warn!("query {qid}: surprise failed ({e}); keeping all {}", list.len());
                    let fail = SurpriseFailure {
                        query_id: &qid,
                        k: list.len(),
                        error: e.to_string(),
                    };
                    let line = serde_json::to_string(&fail).expect("failure serializes");
                    (qid, list.len(), line)
                }
            }
        })
        .collect();
    let mut pred = TruncationPrediction::new("surprise");
    let mut diag = String::new();
    for (qid, k, line) in lines {
        pred.cutoffs.insert(qid, k);
        diag.push_str(&line);
        diag.push('\n');
    }
    write_atomic(&cfg.diagnostics_dir().join("surprise.jsonl"), &diag)?;
    Ok(vec![write_prediction(cfg, &pred)?])
}

fn read_prediction(path: &Path) -> Result<TruncationPrediction, HarnessError> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("prediction");
    TruncationPrediction::parse_tsv(open(path)?, stem).map_err(|e| runtime(path.display(), e))
}

/// Orders `fixed-20` before `fixed-100`: digit runs compare numerically.
fn natural_key(path: &Path) -> Vec<(String, u64)> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
    let mut key = Vec::new();
    let mut text = String::new();
    let mut chars = name.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_ascii_digit() {
            let mut n = c.to_digit(10).unwrap() as u64;
            while let Some(d) = chars.peek().and_then(|d| d.to_digit(10)) {
                n = n.saturating_mul(10).saturating_add(d as u64);
                chars.next();
            }
            key.push((std::mem::take(&mut text), n));
        } else {
            text.push(c);
        }
    }
    key.push((text, 0));
    key
}

/// Explicit files, or every `*.tsv` in the predictions directory followed
/// by the configured external files.
pub fn prediction_files(cfg: &ExperimentConfig, explicit: &[PathBuf]) -> Result<Vec<PathBuf>, HarnessError> {
    if !explicit.is_empty() {
        for p in explicit {
            if !p.is_file() {
                return Err(invalid(format!("prediction file {} does not exist", p.display())));
            }
        }
        return Ok(explicit.to_vec());
    }
    let mut files = Vec::new();
    let dir = cfg.predictions_dir();
    if dir.is_dir() {
        for entry in std::fs::read_dir(&dir).map_err(|e| runtime(dir.display(), e))? {
            let path = entry.map_err(|e| runtime(dir.display(), e))?.path();
            if path.extension().is_some_and(|e| e == "tsv") {
                files.push(path);
            }
        }
    }
    files.sort_by_key(|p| natural_key(p));
    files.extend(cfg.paths.external_predictions.iter().cloned());
    Ok(files)
}

pub fn evaluate(cfg: &ExperimentConfig, explicit: &[PathBuf]) -> Result<ReportTable, HarnessError> {
    let sweep = load_sweep(cfg)?;
    let files = prediction_files(cfg, explicit)?;
    let preds = files.iter().map(|p| read_prediction(p)).collect::<Result<Vec<_>, _>>()?;

    let mut none = TruncationPrediction::new(NO_RERANK);
    for (q, _) in sweep.rows() {
        none.cutoffs.insert(q.to_string(), 0);
    }
    let mut oracle = oracle_prediction(&sweep);
    oracle.method = ORACLE.into();

    let mut all = vec![none];
    all.extend(preds);
    all.push(oracle);
    for b in &cfg.baselines {
        if !all.iter().any(|p| &p.method == b) {
            return Err(invalid(format!("baseline {b:?} matches no evaluated method")));
        }
    }
    let rows: Vec<EvalRow> = all
        .iter()
        .zip(std::iter::once(None).chain(files.iter().map(Some)).chain(std::iter::once(None)))
        .map(|(p, file)| {
            evaluate_with_sweep(p, &sweep, &cfg.cost_model).map_err(|e| match file {
                Some(f) => runtime(f.display(), e),
                None => runtime(&p.method, e),
            })
        })
        .collect::<Result<_, _>>()?;

    let table = ReportTable::build(&cfg.dataset, cfg.metric, cfg.cost_model, &cfg.baselines, rows);
    let dir = cfg.reports_dir();
    write_atomic(&dir.join("evaluation.csv"), &table.to_csv())?;
    write_atomic(&dir.join("evaluation.txt"), &table.to_text())?;
    write_atomic(&dir.join("per_query.csv"), &table.per_query_csv())?;
    Ok(table)
}

pub fn plotdata(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    crate::plot::plotdata(cfg)
}

/// Writes a synthetic dataset with a ready-to-run config and a sample
/// prediction file standing in for a trained truncator.
pub fn synth(out_dir: &Path, config: &SynthConfig) -> Result<PathBuf, HarnessError> {
    let d = synth::generate(config);
    write_atomic(&out_dir.join("retrieved.run"), &write_run(&d.retrieved))?;
    write_atomic(&out_dir.join("reranked.run"), &write_run(&d.reranked))?;
    write_atomic(&out_dir.join("qrels.txt"), &write_qrels(&d.qrels))?;
    write_atomic(&out_dir.join("corpus.tsv"), &synth::write_corpus(&d.corpus))?;
    write_atomic(&out_dir.join("embeddings.jsonl"), &write_embeddings(&d.embeddings))?;

    let pair = pair_runs(d.retrieved, d.reranked).map_err(|e| runtime("synth", e))?;
    let sweep = run_sweep(&pair, &d.qrels, rltlab_core::MetricId::ndcg(10)).map_err(|e| runtime("synth", e))?;
    let sample = synth::sample_prediction(&sweep, config.seed, "supervised-sample");
    write_atomic(&out_dir.join("supervised-sample.tsv"), &sample.to_tsv())?;

    let mut grid: Vec<usize> = (0..=10).map(|i| i * config.depth / 10).collect();
    grid.dedup();
    let config_json = serde_json::json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "dataset": "synthetic",
        "paths": {
            "retrieved_run": "retrieved.run",
            "reranked_run": "reranked.run",
            "qrels": "qrels.txt",
            "corpus": "corpus.tsv",
            "embeddings": "embeddings.jsonl",
            "work_dir": "work",
            "external_predictions": ["supervised-sample.tsv"]
        },
        "metric": "ndcg_at_10",
        "relevance_threshold": 2,
        "list_depth": config.depth,
        "eet_presets": [
            {"beta": 0.0, "alpha": -0.001},
            {"beta": 1.0, "alpha": -0.001},
            {"beta": 2.0, "alpha": -0.001}
        ],
        "cost_model": {"preset": "llm"},
        "baselines": [format!("fixed-{}", config.depth)],
        "fixed_k_grid": grid
    });
    let mut text = serde_json::to_string_pretty(&config_json).expect("config serializes");
    text.push('\n');
    let path = out_dir.join("config.json");
    write_atomic(&path, &text)?;
    Ok(path)
}
