//! Generalized Pareto distribution: density, distribution function and a
//! derivative-free maximum-likelihood fit.
//!
//! The fit works on samples divided by their mean, so it is equivariant
//! under rescaling. The shape is scanned on a fixed grid with the scale
//! profiled out by golden-section search in log space, and the best grid
//! point is refined with a Nelder-Mead simplex over `(shape, ln scale)`.

use serde::Serialize;

use super::cvm::cvm_statistic;
use super::optim::{golden_section_max, nelder_mead_max};
use super::TruncateError;

/// Shapes below this magnitude use the exponential limit.
const SHAPE_EPS: f64 = 1e-9;
const GOLDEN_ITERS: usize = 64;
const SIMPLEX_TOL: f64 = 1e-10;
const SIMPLEX_ITERS: usize = 400;

/// Shape grid: -0.9 to 2.0 in steps of 0.05.
pub const GPD_SHAPE_GRID: (f64, f64, f64) = (-0.9, 2.0, 0.05);

fn shape_grid() -> impl Iterator<Item = f64> {
    let (lo, hi, step) = GPD_SHAPE_GRID;
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(move |i| lo + step * i as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gpd {
    pub shape: f64,
    pub scale: f64,
}

impl Gpd {
    /// Upper end of the support (finite only for negative shape).
    pub fn upper_bound(&self) -> f64 {
        if self.shape < -SHAPE_EPS {
            -self.scale / self.shape
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.shape.abs() < SHAPE_EPS {
            return -(-x / self.scale).exp_m1();
        }
        let t = 1.0 + self.shape * x / self.scale;
        if t <= 0.0 {
            return 1.0;
        }
        -((-1.0 / self.shape) * t.ln()).exp_m1()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.shape.abs() < SHAPE_EPS {
            return -self.scale.ln() - x / self.scale;
        }
        let z = self.shape * x / self.scale;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -self.scale.ln() - (1.0 / self.shape + 1.0) * z.ln_1p()
    }

    /// Inverse distribution function, for sampling with a uniform `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.shape.abs() < SHAPE_EPS {
            -self.scale * (-u).ln_1p()
        } else {
            self.scale / self.shape * (((-u).ln_1p() * -self.shape).exp_m1())
        }
    }
}

/// Log-likelihood of exceedances under `GPD(shape, scale)`.
pub fn gpd_loglik(samples: &[f64], shape_xi: f64, scale: f64) -> Result<f64, TruncateError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(TruncateError::InvalidScale(scale));
    }
    let dist = Gpd {
        shape: shape_xi,
        scale,
    };
    let upper = dist.upper_bound();
    let mut total = 0.0;
    for &x in samples {
        if x < 0.0 || (upper.is_finite() && x >= upper) {
            return Err(TruncateError::SupportViolation {
                value: x,
                upper: if x < 0.0 { 0.0 } else { upper },
            });
        }
        total += dist.ln_pdf(x);
    }
    Ok(total)
}

/// Log-likelihood with `-inf` outside the parameter space or support.
fn loglik_or_neg_inf(samples: &[f64], shape: f64, ln_scale: f64) -> f64 {
    let scale = ln_scale.exp();
    if !(scale > 0.0 && scale.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let dist = Gpd { shape, scale };
    let mut total = 0.0;
    for &x in samples {
        total += dist.ln_pdf(x);
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Scale maximizing the likelihood at a fixed shape, as `(ln scale, loglik)`,
/// for samples already normalized to unit mean.
fn profile_scale(normalized: &[f64], max: f64, shape: f64) -> (f64, f64) {
    let lo = if shape < 0.0 {
        // support requires scale > -shape * max
        (-shape * max).ln() + 1e-12
    } else {
        (1e-4f64).ln()
    };
    let hi = (1e3f64).ln().max(lo + 1.0);
    golden_section_max(|ls| loglik_or_neg_inf(normalized, shape, ls), lo, hi, GOLDEN_ITERS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpdFit {
    pub threshold_u: f64,
    pub shape_xi: f64,
    pub scale: f64,
    pub n_exceedances: usize,
    pub cvm_statistic: f64,
    pub loglik: f64,
}

impl GpdFit {
    pub fn dist(&self) -> Gpd {
        Gpd {
            shape: self.shape_xi,
            scale: self.scale,
        }
    }
}

/// Maximum-likelihood GPD fit of non-negative exceedances. The returned
/// `threshold_u` is 0; callers fitting above a threshold set it.
pub fn fit_gpd(samples: &[f64], min_samples: usize) -> Result<GpdFit, TruncateError> {
    let n = samples.len();
    if n < min_samples.max(2) {
        return Err(TruncateError::TooFewSamples {
            got: n,
            need: min_samples.max(2),
        });
    }
    if let Some(&bad) = samples.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(TruncateError::SupportViolation {
            value: bad,
            upper: 0.0,
        });
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return Err(TruncateError::DegenerateSample(n));
    }

    let mean = samples.iter().sum::<f64>() / n as f64;
    let normalized: Vec<f64> = samples.iter().map(|x| x / mean).collect();
    let max = normalized.iter().copied().fold(0.0, f64::max);

    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for shape in shape_grid() {
        let (ls, ll) = profile_scale(&normalized, max, shape);
        if ll > best.2 {
            best = (shape, ls, ll);
        }
    }
    let (refined, ll) = nelder_mead_max(
        |p| loglik_or_neg_inf(&normalized, p[0], p[1]),
        [best.0, best.1],
        [0.05, 0.1],
        SIMPLEX_TOL,
        SIMPLEX_ITERS,
    );
    let (shape, ln_scale, ll_norm) = if ll >= best.2 {
        (refined[0], refined[1], ll)
    } else {
        best
    };

    let scale = ln_scale.exp() * mean;
    let dist = Gpd { shape, scale };
    Ok(GpdFit {
        threshold_u: 0.0,
        shape_xi: shape,
        scale,
        n_exceedances: n,
        cvm_statistic: cvm_statistic(samples, |x| dist.cdf(x)),
        // undo the unit-mean normalization: each density picks up 1/mean
        loglik: ll_norm - n as f64 * mean.ln(),
    })
}

#[cfg(test)]
pub(crate) fn profile_loglik_on_grid(samples: &[f64]) -> Vec<(f64, f64)> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let normalized: Vec<f64> = samples.iter().map(|x| x / mean).collect();
    let max = normalized.iter().copied().fold(0.0, f64::max);
    shape_grid()
        .map(|s| {
            let (_, ll) = profile_scale(&normalized, max, s);
            (s, ll - n * mean.ln())
        })
        .collect()
}
