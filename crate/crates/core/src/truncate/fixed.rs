use std::collections::BTreeMap;

use super::TruncateError;
use crate::eet::TargetVector;
use crate::sim::TruncationPrediction;

/// Common fixed re-ranking depths.
pub const FIXED_K_PRESETS: [usize; 5] = [10, 20, 100, 200, 1000];

/// Re-rank the top `k` of every list (capped at the list depth).
pub fn fixed_k(depths: &BTreeMap<String, usize>, k: usize) -> TruncationPrediction {
    TruncationPrediction {
        method: format!("fixed-{k}"),
        cutoffs: depths
            .iter()
            .map(|(q, &d)| (q.clone(), k.min(d)))
            .collect(),
    }
}

/// Mean target at every cut-off over the training queries. A query whose
/// list is shorter than `k` contributes its last entry, as a fixed cut-off
/// beyond its depth re-ranks the whole list. Sums run in query id order.
pub fn mean_target_curve(train: &TargetVector) -> Result<Vec<f64>, TruncateError> {
    if train.is_empty() {
        return Err(TruncateError::EmptyTraining);
    }
    let width = train.rows().map(|(_, r)| r.len()).max().unwrap_or(0);
    let mut sums = vec![0.0; width];
    for (_, row) in train.rows() {
        for (k, s) in sums.iter_mut().enumerate() {
            *s += row[k.min(row.len() - 1)];
        }
    }
    let n = train.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Smallest `k` maximizing a mean-target curve.
pub fn greedy_k_from_means(means: &[f64]) -> usize {
    crate::sim::oracle_cutoff(means)
}

/// The single cut-off maximizing the mean training target; ties go to the
/// smallest `k`.
pub fn greedy_k(train: &TargetVector) -> Result<usize, TruncateError> {
    Ok(greedy_k_from_means(&mean_target_curve(train)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eet::EetConfig;
    use crate::metrics::MetricId;

    fn targets(rows: &[&[f64]]) -> TargetVector {
        let mut t = TargetVector::new(EetConfig::new(1.0, -0.001, MetricId::ndcg(10)).unwrap());
        for (i, r) in rows.iter().enumerate() {
            t.insert(format!("q{i}"), r.to_vec());
        }
        t
    }

    #[test]
    fn fixed_examples() {
        let depths: BTreeMap<String, usize> =
            [("a".to_string(), 1000), ("b".to_string(), 600)].into();
        let p = fixed_k(&depths, 10);
        assert!(p.cutoffs.values().all(|&k| k == 10));
        assert_eq!(p.method, "fixed-10");
        let p = fixed_k(&depths, 1000);
        assert_eq!(p.get("b"), Some(600));
        assert_eq!(p.get("a"), Some(1000));
        assert!(fixed_k(&depths, 0).cutoffs.values().all(|&k| k == 0));
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_k(&targets(&[&[0., 1., 0.], &[0., 1., 0.]])).unwrap(), 1);
        assert_eq!(greedy_k(&targets(&[&[0.2; 4], &[0.2; 4]])).unwrap(), 0);
        assert_eq!(greedy_k(&targets(&[])).unwrap_err(), TruncateError::EmptyTraining);
    }

    #[test]
    fn short_lists_hold_their_last_value() {
        let t = targets(&[&[0.0, 0.9], &[0.0, 0.1, 0.2, 0.3]]);
        let m = mean_target_curve(&t).unwrap();
        assert_eq!(m.len(), 4);
        assert!((m[3] - 0.6).abs() < 1e-15);
        assert_eq!(greedy_k(&t).unwrap(), 3);
    }
}
