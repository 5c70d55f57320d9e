//! Effectiveness/efficiency trade-off (EET) targets over candidate cut-offs.
//!
//! Effectiveness is the re-ranking gain `sigma(k) = v[k] - v[0]` read off a
//! sweep row; efficiency decays exponentially, `gamma(k) = exp(alpha * k)`.
//! EET is their weighted harmonic mean with weight `beta`:
//! `(1 + beta^2) * gamma * sigma / (beta^2 * sigma + gamma)`.
//! Negative gains are clamped to zero before combining.

use std::collections::BTreeMap;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{QrelsSet, RerankPair};
use crate::metrics::{MetricError, MetricId};
use crate::sim::{self, SimError, SweepMatrix};

/// Decay rate used for every reported trade-off.
pub const DEFAULT_ALPHA: f64 = -0.001;
/// beta = 0 favours effectiveness, 1 balances, 2 favours efficiency.
pub const BETA_PRESETS: [f64; 3] = [0.0, 1.0, 2.0];

#[derive(Debug, Error)]
pub enum EetError {
    #[error("beta must be finite and >= 0, got {0}")]
    InvalidBeta(f64),
    #[error("alpha must be finite and <= 0, got {0}")]
    InvalidAlpha(f64),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EetConfig {
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, with = "metric_serde")]
    pub metric: MetricId,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

mod metric_serde {
    use super::MetricId;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &MetricId, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(m)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MetricId, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl EetConfig {
    pub fn new(beta: f64, alpha: f64, metric: MetricId) -> Result<Self, EetError> {
        let cfg = Self { beta, alpha, metric };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EetError> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(EetError::InvalidBeta(self.beta));
        }
        if !(self.alpha.is_finite() && self.alpha <= 0.0) {
            return Err(EetError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }

    /// File-name friendly label, e.g. `beta1_alpha-0.001`.
    pub fn tag(&self) -> String {
        format!("beta{}_alpha{}", self.beta, self.alpha)
    }
}

/// `exp(alpha * k)`.
pub fn efficiency_decay(k: usize, alpha: f64) -> f64 {
    (alpha * k as f64).exp()
}

/// `row[k] - row[0]`: metric gain from re-ranking the top `k`.
pub fn rerank_gain(sweep_row: &[f64], k: usize) -> f64 {
    sweep_row[k] - sweep_row[0]
}

/// Weighted harmonic mean of a (clamped) gain and an efficiency value.
pub fn eet(sigma: f64, gamma: f64, beta: f64) -> f64 {
    let sigma = sigma.max(0.0);
    if sigma == 0.0 {
        return 0.0;
    }
    if beta == 0.0 {
        return sigma;
    }
    let b2 = beta * beta;
    (1.0 + b2) * (gamma * sigma) / (b2 * sigma + gamma)
}

/// Per-query EET values for every cut-off `k = 0..=|L|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub config: EetConfig,
    rows: BTreeMap<String, Vec<f64>>,
}

impl TargetVector {
    pub fn new(config: EetConfig) -> Self {
        Self {
            config,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, query_id: impl Into<String>, row: Vec<f64>) {
        self.rows.insert(query_id.into(), row);
    }

    pub fn get(&self, query_id: &str) -> Option<&[f64]> {
        self.rows.get(query_id).map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Keeps only the given queries.
    pub fn restrict<'a>(&self, query_ids: impl IntoIterator<Item = &'a str>) -> Self {
        let mut out = Self::new(self.config);
        for q in query_ids {
            if let Some(r) = self.rows.get(q) {
                out.rows.insert(q.to_string(), r.clone());
            }
        }
        out
    }

    /// Text format: a `# beta=.. alpha=.. metric=..` header, then one line
    /// per query with `|L| + 1` values at 9 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# beta={} alpha={} metric={}\n",
            self.config.beta, self.config.alpha, self.config.metric
        );
        for (q, row) in &self.rows {
            out.push_str(q);
            for v in row {
                out.push(' ');
                out.push_str(&format_sig9(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_text<R: BufRead>(source: R) -> Result<Self, EetError> {
        let mut lines = source.lines().enumerate();
        let malformed = |line: usize, reason: String| EetError::Malformed { line, reason };
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => return Err(malformed(1, "empty target file".into())),
        };
        let body = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| malformed(1, "missing header".into()))?;
        let (mut beta, mut alpha, mut metric) = (None, None, None);
        for field in body.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| malformed(1, format!("bad header field {field:?}")))?;
            let bad = |_| malformed(1, format!("bad value for {key}"));
            match key {
                "beta" => beta = Some(value.parse::<f64>().map_err(bad)?),
                "alpha" => alpha = Some(value.parse::<f64>().map_err(bad)?),
                "metric" => {
                    metric = Some(
                        value
                            .parse::<MetricId>()
                            .map_err(|e: MetricError| malformed(1, e.to_string()))?,
                    )
                }
                _ => {}
            }
        }
        let config = EetConfig::new(
            beta.ok_or_else(|| malformed(1, "header lacks beta".into()))?,
            alpha.ok_or_else(|| malformed(1, "header lacks alpha".into()))?,
            metric.ok_or_else(|| malformed(1, "header lacks metric".into()))?,
        )?;
        let mut out = Self::new(config);
        for (idx, line) in lines {
            let line = line?;
            let mut cols = line.split_whitespace();
            let Some(q) = cols.next() else { continue };
            let row = cols
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| malformed(idx + 1, "non-numeric target".into()))?;
            if row.is_empty() {
                return Err(malformed(idx + 1, format!("query {q} has no targets")));
            }
            out.rows.insert(q.to_string(), row);
        }
        Ok(out)
    }
}

/// `%.9g`-style formatting.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{v:.8e}");
    // rounding may carry into the next decade; take the exponent from the rendering
    let (mantissa, e) = sci.split_once('e').expect("scientific rendering");
    let e: i32 = e.parse().unwrap_or(exp);
    if (-4..9).contains(&e) {
        let decimals = (8 - e).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// EET row for one sweep row.
pub fn target_row(sweep_row: &[f64], config: &EetConfig) -> Vec<f64> {
    (0..sweep_row.len())
        .map(|k| {
            eet(
                rerank_gain(sweep_row, k),
                efficiency_decay(k, config.alpha),
                config.beta,
            )
        })
        .collect()
}

/// Targets for every query of a sweep.
pub fn targets_from_sweep(sweep: &SweepMatrix, config: EetConfig) -> Result<TargetVector, EetError> {
    config.validate()?;
    let rows: Vec<(String, Vec<f64>)> = sweep
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(q, row)| (q.to_string(), target_row(row, &config)))
        .collect();
    let mut out = TargetVector::new(config);
    out.rows.extend(rows);
    Ok(out)
}

/// Sweeps the pair with `config.metric` and converts each row to EET targets.
pub fn build_targets(pair: &RerankPair, qrels: &QrelsSet, config: EetConfig) -> Result<TargetVector, EetError> {
    config.validate()?;
    let sweep = sim::sweep(pair, qrels, config.metric)?;
    targets_from_sweep(&sweep, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decay_examples() {
        assert_eq!(efficiency_decay(0, DEFAULT_ALPHA), 1.0);
        assert!((efficiency_decay(1000, -0.001) - 0.3678794412).abs() < 1e-9);
        assert_eq!(efficiency_decay(777, 0.0), 1.0);
    }

    #[test]
    fn gain_examples() {
        assert_eq!(rerank_gain(&[0.5, 0.7], 0), 0.0);
        assert!((rerank_gain(&[0.5, 0.7], 1) - 0.2).abs() < 1e-15);
        assert!(rerank_gain(&[0.5, 0.3], 1) < 0.0);
    }

    #[test]
    fn eet_examples() {
        assert_eq!(eet(0.37, 0.2, 0.0), 0.37);
        assert_eq!(eet(-0.1, 0.9, 1.0), 0.0);
        assert_eq!(eet(0.0, 0.9, 2.0), 0.0);
        assert!((eet(0.1, 0.9, 1.0) - 0.18).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(EetConfig::new(-1.0, -0.001, MetricId::ndcg(10)).is_err());
        assert!(EetConfig::new(1.0, 0.5, MetricId::ndcg(10)).is_err());
        let c = EetConfig::new(1.0, -0.001, MetricId::ndcg(10)).unwrap();
        assert_eq!(c.tag(), "beta1_alpha-0.001");
    }

    #[test]
    fn identical_reranker_gives_zero_targets() {
        let cfg = EetConfig::new(1.0, -0.001, MetricId::ndcg(10)).unwrap();
        assert!(target_row(&[0.4; 6], &cfg).iter().all(|v| *v == 0.0));
        let cfg0 = EetConfig::new(0.0, -0.001, MetricId::ndcg(10)).unwrap();
        let row = [0.4, 0.5, 0.3, 0.6];
        let t = target_row(&row, &cfg0);
        let clamped: Vec<f64> = row.iter().map(|v| (v - row[0]).max(0.0)).collect();
        assert_eq!(t, clamped);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(0.18), "0.18");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(0.3678794411714423), "0.367879441");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(9.9999999999e-6), "1e-5");
        assert_eq!(format_sig9(0.99999999999), "1");
    }

    #[test]
    fn target_file_round_trip() {
        let cfg = EetConfig::new(2.0, -0.001, MetricId::ndcg(10)).unwrap();
        let mut t = TargetVector::new(cfg);
        t.insert("q1", vec![0.0, 0.125, 0.5]);
        t.insert("q2", vec![0.0]);
        let text = t.to_text();
        assert!(text.starts_with("# beta=2 alpha=-0.001 metric=ndcg_at_10\n"));
        assert_eq!(TargetVector::parse_text(text.as_bytes()).unwrap(), t);
        assert!(TargetVector::parse_text("q1 0 1\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_sigma(s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, g in 0.01f64..1.0, b in 0.0f64..4.0) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(eet(lo, g, b) <= eet(hi, g, b) + 1e-15);
        }

        #[test]
        fn harmonic_mean_bound(s in 1e-6f64..=1.0, g in 1e-6f64..=1.0, b in 0.0f64..4.0) {
            prop_assert!(eet(s, g, b) <= s.max(g) * (1.0 + 1e-12));
        }

        #[test]
        fn non_increasing_in_k(s in 1e-3f64..1.0, b in 0.0f64..4.0, alpha in -0.01f64..-1e-6, k in 0usize..2000) {
            let a = eet(s, efficiency_decay(k, alpha), b);
            let c = eet(s, efficiency_decay(k + 1, alpha), b);
            prop_assert!(c <= a + 1e-15);
        }

        #[test]
        fn sig9_parses_back_close(v in -1e6f64..1e6) {
            let parsed: f64 = format_sig9(v).parse().unwrap();
            prop_assert!((parsed - v).abs() <= v.abs() * 1e-8 + 1e-300);
        }
    }
}
