//! Acceptance checks, one line per criterion.
//!
//! Exits non-zero when a check fails unexpectedly, or when a check listed
//! in `KNOWN_FAILURES` starts passing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rltlab_core::corpus::{pair_runs, RankedItem, RankedList, RerankPair, RunSet};
use rltlab_core::eet::{eet, efficiency_decay, EetConfig, TargetVector};
use rltlab_core::metrics::{f1_at_k, ndcg_at_k};
use rltlab_core::sim::{oracle_cutoff, sweep, sweep_naive, CostModel, SweepMatrix};
use rltlab_core::stats::paired_t_test;
use rltlab_core::truncate::{cvm_statistic, fit_gpd, greedy_k};
use rltlab_core::{MetricId, QrelsSet};

/// Checks whose reference values cannot be met by a correct implementation.
const KNOWN_FAILURES: &[(&str, &str)] = &[(
    "paired-t-test-reference",
    "reference t = 1.8371 does not follow from the stated samples (diffs 1,0,1,0,1 give t = 2.4495, p = 0.0705)",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.pass = false;
    }
    o.detail = format!("{}; {:.2}s (limit {}s)", o.detail, took.as_secs_f64(), limit.as_secs());
    o
}

fn eet_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let sigma: f64 = rng.gen_range(0.0..1.0);
        let gamma: f64 = rng.gen_range(1e-6..=1.0);
        worst = worst.max((eet(sigma, gamma, 0.0) - sigma).abs());
    }
    outcome(worst < 1e-12, format!("max |eet(s, g, 0) - s| = {worst:e} over 1000 pairs"))
}

fn efficiency_decay_check() -> Outcome {
    let v = efficiency_decay(1000, -0.001);
    outcome((v - 0.3678794412).abs() < 1e-9, format!("efficiency_decay(1000, -0.001) = {v:.10}"))
}

fn random_instance(rng: &mut ChaCha8Rng) -> (RankedList, QrelsSet) {
    let n = rng.gen_range(1..=10);
    let items: Vec<RankedItem> = (0..n).map(|i| RankedItem::new(format!("d{i}"), rng.gen_range(0.0..10.0))).collect();
    let list = RankedList::from_unsorted("q", items).unwrap();
    let mut qrels = QrelsSet::new(rng.gen_range(1..=3)).unwrap();
    let mut judged = 0;
    for i in 0..n {
        if judged < 6 && rng.gen_bool(0.7) {
            qrels.insert("q", format!("d{i}"), rng.gen_range(0..=3));
            judged += 1;
        }
    }
    // judged documents outside the list
    if rng.gen_bool(0.3) {
        qrels.insert("q", "extra", rng.gen_range(0..=3));
    }
    (list, qrels)
}

fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn dcg(grades: &[u32], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

fn brute_ndcg(list: &RankedList, qrels: &QrelsSet, k: usize) -> f64 {
    let grades: Vec<u32> = list.doc_ids().map(|d| qrels.grade("q", d).unwrap_or(0)).collect();
    let judged: Vec<u32> = qrels.judged("q").map(|j| j.values().copied().collect()).unwrap_or_default();
    let ideal = permutations(&judged).iter().map(|p| dcg(p, k)).fold(0.0, f64::max);
    if ideal == 0.0 {
        0.0
    } else {
        dcg(&grades, k) / ideal
    }
}

fn brute_f1(list: &RankedList, qrels: &QrelsSet, k: usize) -> f64 {
    let y: Vec<f64> = list
        .doc_ids()
        .map(|d| if qrels.is_relevant("q", d) { 1.0 } else { 0.0 })
        .collect();
    let n_l: f64 = y.iter().sum();
    if n_l == 0.0 {
        return 0.0;
    }
    let hits: f64 = y[..k].iter().sum();
    let p = hits / k as f64;
    let r = hits / n_l;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (list, qrels) = random_instance(&mut rng);
        for k in 1..=list.len() + 2 {
            let ours = ndcg_at_k(&list, &qrels, k).unwrap().value;
            worst = worst.max((ours - brute_ndcg(&list, &qrels, k)).abs());
            if k <= list.len() {
                let ours = f1_at_k(&list, &qrels, k).unwrap().value;
                worst = worst.max((ours - brute_f1(&list, &qrels, k)).abs());
            }
        }
    }
    outcome(worst < 1e-12, format!("max deviation {worst:e} over 500 instances"))
}

fn random_pair(rng: &mut ChaCha8Rng, queries: usize, max_depth: usize) -> (RerankPair, QrelsSet) {
    let mut ret = RunSet::new("ret");
    let mut rr = RunSet::new("rr");
    let mut qrels = QrelsSet::new(rng.gen_range(1..=2)).unwrap();
    for q in 0..queries {
        let qid = format!("q{q}");
        let n = rng.gen_range(1..=max_depth);
        let docs: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        // coarse scores force doc-id tie-breaks
        let score = |rng: &mut ChaCha8Rng| rng.gen_range(0..6) as f64;
        ret.insert(RankedList::from_unsorted(&qid, docs.iter().map(|d| RankedItem::new(d.clone(), score(rng))).collect()).unwrap());
        rr.insert(RankedList::from_unsorted(&qid, docs.iter().map(|d| RankedItem::new(d.clone(), score(rng))).collect()).unwrap());
        for d in &docs {
            if rng.gen_bool(0.6) {
                qrels.insert(qid.clone(), d.clone(), rng.gen_range(0..=3));
            }
        }
    }
    (pair_runs(ret, rr).unwrap(), qrels)
}

fn exhaustive_oracle(row: &[f64]) -> usize {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter().position(|v| *v == best).unwrap()
}

fn sweeps_equal(a: &SweepMatrix, b: &SweepMatrix) -> bool {
    a.len() == b.len()
        && a.rows().zip(b.rows()).all(|((qa, ra), (qb, rb))| {
            qa == qb && ra.len() == rb.len() && ra.iter().zip(rb).all(|(x, y)| x.to_bits() == y.to_bits())
        })
        && a.errors().keys().eq(b.errors().keys())
}

fn sweep_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let metrics: Vec<MetricId> = ["ndcg_at_10", "ndcg_at_5", "f1_at_3", "dcg_penalized_at_4", "precision_at_2"]
        .iter()
        .map(|m| m.parse().unwrap())
        .collect();
    let mut rows = 0;
    for i in 0..100 {
        let (pair, qrels) = random_pair(&mut rng, 3, 32);
        let metric = metrics[i % metrics.len()];
        let fast = sweep(&pair, &qrels, metric).unwrap();
        let naive = sweep_naive(&pair, &qrels, metric).unwrap();
        if !sweeps_equal(&fast, &naive) {
            return outcome(false, format!("instance {i} ({metric}): incremental sweep differs from naive"));
        }
        for (q, row) in fast.rows() {
            if oracle_cutoff(row) != exhaustive_oracle(row) {
                return outcome(false, format!("instance {i} query {q}: oracle cut-off differs from scan"));
            }
            rows += 1;
        }
    }
    outcome(true, format!("100 pairs, {rows} query rows identical"))
}

fn dominance_on(sweep: &SweepMatrix) -> Result<(), String> {
    let oracle_mean: f64 = sweep.rows().map(|(_, r)| r[oracle_cutoff(r)]).sum::<f64>() / sweep.len() as f64;
    for k in [0usize, 10, 20, 100, 200, 1000] {
        let mut mean = 0.0;
        for (q, r) in sweep.rows() {
            let v = r[k.min(r.len() - 1)];
            if r[oracle_cutoff(r)] < v {
                return Err(format!("query {q}: oracle below fixed-{k}"));
            }
            mean += v;
        }
        mean /= sweep.len() as f64;
        if oracle_mean < mean {
            return Err(format!("mean oracle {oracle_mean} below fixed-{k} {mean}"));
        }
    }
    Ok(())
}

fn oracle_dominance(bundled: &SweepMatrix) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..100 {
        let (pair, qrels) = random_pair(&mut rng, 4, 32);
        let s = sweep(&pair, &qrels, MetricId::ndcg(10)).unwrap();
        if let Err(e) = dominance_on(&s) {
            return outcome(false, format!("random instance {i}: {e}"));
        }
    }
    if let Err(e) = dominance_on(bundled) {
        return outcome(false, format!("bundled dataset: {e}"));
    }
    outcome(true, "100 random instances and the bundled dataset, per query and in the mean")
}

fn greedy_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = EetConfig::new(1.0, -0.001, MetricId::ndcg(10)).unwrap();
    for i in 0..100 {
        let mut t = TargetVector::new(cfg);
        let nq = rng.gen_range(1..=12);
        for q in 0..nq {
            let len = rng.gen_range(1..=30);
            // few distinct values so ties occur
            let row: Vec<f64> = (0..=len).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            t.insert(format!("q{q:02}"), row);
        }
        let width = t.rows().map(|(_, r)| r.len()).max().unwrap();
        let mut best = (0, f64::NEG_INFINITY);
        for k in 0..width {
            let mut sum = 0.0;
            for (_, r) in t.rows() {
                sum += r[k.min(r.len() - 1)];
            }
            let mean = sum / nq as f64;
            if mean > best.1 {
                best = (k, mean);
            }
        }
        let got = greedy_k(&t).unwrap();
        if got != best.0 {
            return outcome(false, format!("target set {i}: greedy {got}, brute force {}", best.0));
        }
    }
    outcome(true, "100 random target sets")
}

fn gpd_sample(rng: &mut ChaCha8Rng, xi: f64, scale: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            if xi == 0.0 {
                -scale * (1.0 - u).ln()
            } else {
                scale / xi * ((1.0 - u).powf(-xi) - 1.0)
            }
        })
        .collect()
}

fn gpd_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = fit_gpd(&gpd_sample(&mut rng, 0.2, 1.0, 10_000), 10).unwrap();
    let b = fit_gpd(&gpd_sample(&mut rng, 0.0, 2.0, 10_000), 10).unwrap();
    let pass = (0.1..=0.3).contains(&a.shape_xi)
        && (0.8..=1.2).contains(&a.scale)
        && (-0.1..=0.1).contains(&b.shape_xi);
    outcome(
        pass,
        format!(
            "GPD(0.2, 1): xi {:.4} scale {:.4}; GPD(0, 2): xi {:.4} scale {:.4}",
            a.shape_xi, a.scale, b.shape_xi, b.scale
        ),
    )
}

fn cvm_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for n in [1usize, 10, 100] {
        let samples: Vec<f64> = (1..=n).map(|i| (2 * i - 1) as f64 / (2 * n) as f64).collect();
        let w2 = cvm_statistic(&samples, |x| x);
        worst = worst.max((w2 - 1.0 / (12.0 * n as f64)).abs());
    }
    outcome(worst < 1e-12, format!("max |W2 - 1/(12n)| = {worst:e}"))
}

fn t_test_reference() -> Outcome {
    let r = paired_t_test(&[1., 2., 3., 4., 5.], &[0., 2., 2., 4., 4.]).unwrap();
    let pass = (r.t_statistic - 1.8371).abs() < 5e-5 && (r.p_value - 0.1400).abs() <= 5e-4 && r.degrees_of_freedom == 4;
    outcome(
        pass,
        format!("t = {:.4}, df = {}, p = {:.4} (reference t = 1.8371, p = 0.1400)", r.t_statistic, r.degrees_of_freedom, r.p_value),
    )
}

fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")
}

fn copy_inputs(to: &Path) {
    for entry in std::fs::read_dir(bundled_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            std::fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
        }
    }
}

fn run_pipeline(dir: &Path, threads: &str) -> Result<(), String> {
    let config = dir.join("config.json");
    let steps: &[&[&str]] = &[
        &["sweep"],
        &["oracle"],
        &["targets"],
        &["truncate", "--method", "fixed"],
        &["truncate", "--method", "greedy"],
        &["truncate", "--method", "surprise"],
        &["evaluate"],
        &["plotdata"],
    ];
    for step in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_rltlab"))
            .args(*step)
            .arg("--config")
            .arg(&config)
            .env("RAYON_NUM_THREADS", threads)
            .env("RUST_LOG", "warn")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{step:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

struct EndToEnd {
    work: tempfile::TempDir,
    outcome: Outcome,
}

fn end_to_end() -> EndToEnd {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for d in [&a, &b, &c] {
        copy_inputs(d.path());
    }
    let start = Instant::now();
    let first = run_pipeline(a.path(), "1");
    let took = start.elapsed();
    let fail = |work, msg: String| EndToEnd {
        work,
        outcome: outcome(false, msg),
    };
    if let Err(e) = first {
        return fail(a, e);
    }
    if let Err(e) = run_pipeline(b.path(), "1") {
        return fail(a, e);
    }
    if let Err(e) = run_pipeline(c.path(), "4") {
        return fail(a, e);
    }
    let (ta, tb, tc) = (tree(&a.path().join("work")), tree(&b.path().join("work")), tree(&c.path().join("work")));
    if ta != tb {
        let diff: Vec<_> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
        return fail(a, format!("single-threaded runs differ in {diff:?}"));
    }
    if ta != tc {
        return fail(a, "outputs depend on the thread count".into());
    }

    let text = String::from_utf8(ta[Path::new("reports/evaluation.txt")].clone()).unwrap();
    let header = text.lines().find(|l| l.starts_with("Method")).unwrap_or_default();
    let columns = ["Method", "Avg. k", "nDCG@10", "Lat."].iter().all(|c| header.contains(c));
    let marks = text.contains("* significant difference from fixed-100");
    let csv = String::from_utf8(ta[Path::new("reports/evaluation.csv")].clone()).unwrap();
    let csv_ok = csv.starts_with("method,avg_k,ndcg_at_10,latency,sig_vs_fixed-100\n");
    let rows = ["w/o re-ranking", "fixed-10", "greedy-k-beta1", "surprise", "supervised-sample", "Oracle"]
        .iter()
        .all(|m| text.lines().any(|l| l.starts_with(m)));
    let pass = took < Duration::from_secs(60) && columns && marks && csv_ok && rows;
    EndToEnd {
        work: a,
        outcome: outcome(
            pass,
            format!(
                "{} output files byte-identical across 2 single-threaded runs and a 4-thread run; columns {columns}, marks {marks}, csv {csv_ok}, rows {rows}; {:.2}s (limit 60s)",
                ta.len(),
                took.as_secs_f64()
            ),
        ),
    }
}

fn latency_model(work: &Path) -> Outcome {
    let csv = std::fs::read_to_string(work.join("work/reports/evaluation.csv")).unwrap_or_default();
    let row = csv.lines().find(|l| l.starts_with("fixed-100,"));
    let Some(row) = row else {
        return outcome(false, "no fixed-100 row in evaluation.csv");
    };
    let cols: Vec<&str> = row.split(',').collect();
    let avg_k: f64 = cols[1].parse().unwrap();
    let lat: f64 = cols[3].parse().unwrap();
    let direct = CostModel::LLM.latency(100);
    let pass = (lat - 2.98).abs() <= 0.01 && (direct - 2.98).abs() <= 0.01 && avg_k == 100.0;
    outcome(pass, format!("fixed-100 row: avg k {avg_k}, latency {lat:.4} s; model at k=100: {direct:.4} s"))
}

fn bundled_sweep() -> SweepMatrix {
    let dir = bundled_dir();
    let read = |f: &str| std::io::BufReader::new(std::fs::File::open(dir.join(f)).unwrap());
    let opts = rltlab_core::corpus::RunParseOptions { max_depth: 100 };
    let ret = rltlab_core::corpus::parse_run(read("retrieved.run"), opts).unwrap();
    let rr = rltlab_core::corpus::parse_run(read("reranked.run"), opts).unwrap();
    let qrels = rltlab_core::corpus::parse_qrels(read("qrels.txt"), 2).unwrap();
    sweep(&pair_runs(ret, rr).unwrap(), &qrels, MetricId::ndcg(10)).unwrap()
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("eet-reduction", eet_reduction()),
        ("efficiency-decay", efficiency_decay_check()),
        ("metric-oracle-equivalence", timed(Duration::from_secs(5), metric_oracle)),
        ("sweep-correctness", timed(Duration::from_secs(10), sweep_correctness)),
        ("oracle-dominance", oracle_dominance(&bundled_sweep())),
        ("greedy-k-brute-force", greedy_brute_force()),
        ("gpd-recovery", timed(Duration::from_secs(30), gpd_recovery)),
        ("cvm-exactness", cvm_exactness()),
        ("paired-t-test-reference", t_test_reference()),
    ];
    let e2e = end_to_end();
    let latency = latency_model(e2e.work.path());
    results.push(("end-to-end", e2e.outcome));
    results.push(("latency-model", latency));

    let mut unexpected = 0;
    let mut passed = 0;
    for (name, o) in &results {
        let known = KNOWN_FAILURES.iter().find(|(n, _)| n == name);
        match (o.pass, known) {
            (true, None) => {
                passed += 1;
                println!("PASS {name}: {}", o.detail);
            }
            (true, Some(_)) => {
                unexpected += 1;
                println!("PASS {name}: {} [listed as a known failure; update KNOWN_FAILURES]", o.detail);
            }
            (false, Some((_, why))) => println!("FAIL {name}: {} [known: {why}]", o.detail),
            (false, None) => {
                unexpected += 1;
                println!("FAIL {name}: {}", o.detail);
            }
        }
    }
    println!(
        "acceptance: {passed} passed, {} failed ({} known)",
        results.len() - passed,
        KNOWN_FAILURES.len()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
