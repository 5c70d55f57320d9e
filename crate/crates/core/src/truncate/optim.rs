//! Derivative-free maximizers used by the GPD fit.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Nelder-Mead simplex maximization in two dimensions. The best vertex
/// never gets worse, so the result is at least `f(start)`.
pub(crate) fn nelder_mead_max<F: FnMut([f64; 2]) -> f64>(
    mut f: F,
    start: [f64; 2],
    step: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(&mut f);
    let point = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    for _ in 0..max_iter {
        // order descending by value (best first); -inf sorts last
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        simplex = idx.map(|i| simplex[i]);
        values = idx.map(|i| values[i]);

        if values[0].is_finite() && values[2].is_finite() && (values[0] - values[2]).abs() <= tol {
            break;
        }

        let centroid = point(simplex[0], simplex[1], 0.5);
        let worst = simplex[2];
        let reflected = point(centroid, worst, -1.0);
        let fr = f(reflected);
        if fr > values[0] {
            let expanded = point(centroid, worst, -2.0);
            let fe = f(expanded);
            if fe > fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr > values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr > values[2] {
                point(centroid, reflected, 0.5)
            } else {
                point(centroid, worst, 0.5)
            };
            let fc = f(contracted);
            if fc > values[2].max(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = point(simplex[0], simplex[i], 0.5);
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    (simplex[best], values[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3).powi(2), -5.0, 5.0, 80);
        assert!((x - 1.3).abs() < 1e-8);
        assert!(fx > -1e-15);
    }

    #[test]
    fn simplex_finds_quadratic_peak() {
        let f = |p: [f64; 2]| -((p[0] - 0.4).powi(2) + 3.0 * (p[1] + 1.2).powi(2));
        let (p, _) = nelder_mead_max(f, [0.0, 0.0], [0.1, 0.1], 1e-14, 1000);
        assert!((p[0] - 0.4).abs() < 1e-5 && (p[1] + 1.2).abs() < 1e-5, "{p:?}");
    }

    #[test]
    fn simplex_never_loses_the_start() {
        let f = |p: [f64; 2]| if p == [0.0, 0.0] { 1.0 } else { f64::NEG_INFINITY };
        let (p, v) = nelder_mead_max(f, [0.0, 0.0], [0.1, 0.1], 1e-12, 50);
        assert_eq!((p, v), ([0.0, 0.0], 1.0));
    }
}
