/// Cramér–von Mises statistic of a sample against a distribution function:
/// `W^2 = 1/(12n) + sum_i ((2i - 1)/(2n) - F(x_(i)))^2` over the sorted sample.
///
/// # Panics
/// On an empty sample.
pub fn cvm_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty(), "cvm_statistic needs at least one sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut w2 = 1.0 / (12.0 * n);
    for (i, x) in sorted.iter().enumerate() {
        let plotting = (2 * i + 1) as f64 / (2.0 * n);
        w2 += (plotting - cdf(*x)).powi(2);
    }
    w2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_fit() {
        for n in [1usize, 10, 100] {
            // uniform cdf evaluated exactly at the plotting positions
            let xs: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64 / (2 * n) as f64).collect();
            let w2 = cvm_statistic(&xs, |x| x);
            assert!((w2 - 1.0 / (12.0 * n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_values() {
        assert!((cvm_statistic(&[3.0], |_| 0.5) - 1.0 / 12.0).abs() < 1e-15);
        let w2 = cvm_statistic(&[2.0, 1.0], |x| if x < 1.5 { 0.25 } else { 0.75 });
        assert!((w2 - 1.0 / 24.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(xs in prop::collection::vec(0.01f64..10.0, 1..40)) {
            let cdf = |x: f64| 1.0 - (-x / 3.0).exp();
            let direct = cvm_statistic(&xs, cdf);
            // y = ln x, with the cdf composed with exp
            let ys: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let transformed = cvm_statistic(&ys, |y| cdf(y.exp()));
            prop_assert!((direct - transformed).abs() < 1e-12);
            prop_assert!(direct >= 0.0);
        }
    }
}
