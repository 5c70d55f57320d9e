//! Surprise: truncation by extreme-value calibration of retrieval scores.
//!
//! The upper tail of a list's scores is modelled with a generalized Pareto
//! distribution fitted to the exceedances over a threshold. Candidate
//! thresholds are score quantiles tried from the lowest up; the first one
//! whose fit passes the Cramér–von Mises check is accepted. Each item is
//! then scored by the fitted distribution function at its exceedance, and
//! the list is cut after the last leading item whose calibrated probability
//! reaches the cut probability.
//!
//! Worked example: scores 20, 19, ..., 1 with the 0.5 quantile gives
//! `u = 10.5` and exceedances 0.5..9.5. A fit close to uniform puts
//! `F(9.5)` near 1 and `F(0.5)` near 0, so with a cut probability of 0.5
//! the list is cut around the middle of the tail, at `k` of about 5.

use serde::{Deserialize, Serialize};

use super::gpd::{fit_gpd, GpdFit};
use super::TruncateError;
use crate::corpus::RankedList;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurpriseConfig {
    pub candidate_threshold_quantiles: Vec<f64>,
    /// Largest accepted W^2.
    pub cvm_acceptance_level: f64,
    pub calibrated_cut_probability: f64,
    pub min_exceedances: usize,
}

impl Default for SurpriseConfig {
    fn default() -> Self {
        Self {
            candidate_threshold_quantiles: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            cvm_acceptance_level: 0.461,
            calibrated_cut_probability: 0.5,
            min_exceedances: 10,
        }
    }
}

impl SurpriseConfig {
    pub fn validate(&self) -> Result<(), TruncateError> {
        let bad = |m: &str| Err(TruncateError::InvalidConfig(m.to_string()));
        let q = &self.candidate_threshold_quantiles;
        if q.is_empty() {
            return bad("no candidate threshold quantiles");
        }
        if q.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return bad("threshold quantiles must lie in (0, 1)");
        }
        if q.windows(2).any(|w| w[0] >= w[1]) {
            return bad("threshold quantiles must be strictly increasing");
        }
        if !(self.calibrated_cut_probability > 0.0 && self.calibrated_cut_probability < 1.0) {
            return bad("cut probability must lie in (0, 1)");
        }
        if !(self.cvm_acceptance_level > 0.0 && self.cvm_acceptance_level.is_finite()) {
            return bad("CvM acceptance level must be positive");
        }
        if self.min_exceedances < 2 {
            return bad("min_exceedances must be at least 2");
        }
        Ok(())
    }
}

/// One candidate threshold that was tried.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateThreshold {
    pub quantile: f64,
    pub threshold: f64,
    pub n_exceedances: usize,
    /// `None` when the exceedances could not be fitted.
    pub cvm_statistic: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurpriseOutcome {
    pub query_id: String,
    pub k: usize,
    /// The accepted fit, with `threshold_u` set.
    pub fit: Option<GpdFit>,
    /// Set when no candidate passed and the whole list is kept.
    pub no_acceptable_fit: bool,
    pub candidates: Vec<CandidateThreshold>,
}

/// Linear-interpolation quantile of an ascending sample.
fn quantile_sorted(ascending: &[f64], q: f64) -> f64 {
    let pos = (ascending.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(ascending.len() - 1);
    let frac = pos - lo as f64;
    ascending[lo] + (ascending[hi] - ascending[lo]) * frac
}

/// Tail probability of each score under a fit; 0 at or below the threshold.
pub fn calibrated_probabilities(scores: &[f64], fit: &GpdFit) -> Vec<f64> {
    let dist = fit.dist();
    scores
        .iter()
        .map(|&s| if s > fit.threshold_u { dist.cdf(s - fit.threshold_u) } else { 0.0 })
        .collect()
}

/// Largest `k` whose leading items all reach `cut`; the whole list when
/// every item does, and 1 when none does.
pub fn cut_from_probabilities(probs: &[f64], cut: f64) -> usize {
    probs.iter().take_while(|p| **p >= cut).count().max(1)
}

/// Number of leading items to re-rank (at least 1).
pub fn surprise_truncate(list: &RankedList, config: &SurpriseConfig) -> Result<SurpriseOutcome, TruncateError> {
    config.validate()?;
    let n = list.len();
    if n < config.min_exceedances {
        return Err(TruncateError::TooFewSamples {
            got: n,
            need: config.min_exceedances,
        });
    }
    let scores: Vec<f64> = list.items().iter().map(|it| it.score).collect();
    let mut ascending = scores.clone();
    ascending.sort_by(f64::total_cmp);

    let mut candidates = Vec::new();
    let mut accepted: Option<GpdFit> = None;
    for &q in &config.candidate_threshold_quantiles {
        let u = quantile_sorted(&ascending, q);
        let exceedances: Vec<f64> = scores.iter().filter(|s| **s > u).map(|s| s - u).collect();
        let fit = fit_gpd(&exceedances, config.min_exceedances).ok();
        let pass = fit.is_some_and(|f| f.cvm_statistic <= config.cvm_acceptance_level);
        candidates.push(CandidateThreshold {
            quantile: q,
            threshold: u,
            n_exceedances: exceedances.len(),
            cvm_statistic: fit.map(|f| f.cvm_statistic),
            accepted: pass,
        });
        if pass {
            let mut f = fit.unwrap();
            f.threshold_u = u;
            accepted = Some(f);
            break;
        }
    }

    let Some(fit) = accepted else {
        log::warn!("query {}: no threshold passed the CvM check; keeping all {n}", list.query_id());
        return Ok(SurpriseOutcome {
            query_id: list.query_id().to_string(),
            k: n,
            fit: None,
            no_acceptable_fit: true,
            candidates,
        });
    };

    let probs = calibrated_probabilities(&scores, &fit);
    Ok(SurpriseOutcome {
        query_id: list.query_id().to_string(),
        k: cut_from_probabilities(&probs, config.calibrated_cut_probability),
        fit: Some(fit),
        no_acceptable_fit: false,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RankedItem;
    use crate::truncate::gpd::Gpd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn list_from(scores: &[f64]) -> RankedList {
        RankedList::from_unsorted(
            "q",
            scores
                .iter()
                .enumerate()
                .map(|(i, s)| RankedItem::new(format!("d{i:04}"), *s))
                .collect(),
        )
        .unwrap()
    }

    /// Noise bulk plus a few high-scoring signal items.
    fn scores(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tail = Gpd { shape: 0.1, scale: 1.0 };
        (0..n)
            .map(|i| {
                let base = 5.0 + tail.quantile(rng.gen::<f64>());
                if i < 5 {
                    base + 4.0
                } else {
                    base
                }
            })
            .collect()
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_eq!(quantile_sorted(&xs, 0.1), 1.4);
    }

    #[test]
    fn cut_rule() {
        assert_eq!(cut_from_probabilities(&[0.9, 0.8, 0.2, 0.7], 0.5), 2);
        assert_eq!(cut_from_probabilities(&[0.9, 0.8, 0.6], 0.5), 3);
        assert_eq!(cut_from_probabilities(&[0.1, 0.8], 0.5), 1);
    }

    #[test]
    fn cut_follows_calibrated_probabilities() {
        let l = list_from(&scores(1, 100));
        let out = surprise_truncate(&l, &SurpriseConfig::default()).unwrap();
        let fit = out.fit.expect("a threshold should pass on GPD-like data");
        let probs: Vec<f64> = l
            .items()
            .iter()
            .map(|it| if it.score > fit.threshold_u { fit.dist().cdf(it.score - fit.threshold_u) } else { 0.0 })
            .collect();
        assert!(probs[..out.k].iter().all(|p| *p >= 0.5));
        assert!(out.k == l.len() || probs[out.k] < 0.5);
        assert!(out.k >= 1 && out.k < l.len());
    }

    #[test]
    fn all_pass_keeps_everything_and_none_pass_keeps_one() {
        let l = list_from(&scores(2, 60));
        let mut cfg = SurpriseConfig {
            calibrated_cut_probability: 1e-12,
            ..SurpriseConfig::default()
        };
        // items at or below the threshold never pass, so "all" means all above it
        let out = surprise_truncate(&l, &cfg).unwrap();
        let above = l.items().iter().filter(|it| it.score > out.fit.unwrap().threshold_u).count();
        assert_eq!(out.k, above);
        cfg.calibrated_cut_probability = 1.0 - 1e-15;
        assert_eq!(surprise_truncate(&l, &cfg).unwrap().k, 1);
    }

    #[test]
    fn no_acceptable_fit_keeps_full_list() {
        let l = list_from(&scores(3, 80));
        let cfg = SurpriseConfig {
            cvm_acceptance_level: 1e-9,
            ..SurpriseConfig::default()
        };
        let out = surprise_truncate(&l, &cfg).unwrap();
        assert!(out.no_acceptable_fit);
        assert_eq!(out.k, 80);
        assert_eq!(out.candidates.len(), 5);
    }

    #[test]
    fn scale_invariant() {
        for seed in 0..6 {
            let s = scores(seed, 120);
            let a = surprise_truncate(&list_from(&s), &SurpriseConfig::default()).unwrap();
            let scaled: Vec<f64> = s.iter().map(|x| x * 3.25).collect();
            let b = surprise_truncate(&list_from(&scaled), &SurpriseConfig::default()).unwrap();
            assert_eq!(a.k, b.k, "seed {seed}");
        }
    }

    #[test]
    fn config_and_size_errors() {
        let mut cfg = SurpriseConfig {
            candidate_threshold_quantiles: vec![0.7, 0.5],
            ..SurpriseConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.candidate_threshold_quantiles = vec![0.5, 1.0];
        assert!(cfg.validate().is_err());
        let l = list_from(&[3.0, 2.0, 1.0]);
        assert!(matches!(
            surprise_truncate(&l, &SurpriseConfig::default()).unwrap_err(),
            TruncateError::TooFewSamples { got: 3, need: 10 }
        ));
    }
}
