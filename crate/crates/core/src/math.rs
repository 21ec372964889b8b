//! Numeric helpers shared across modules.

use alloc::vec::Vec;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Standard logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// `x ln(x / y)` with `0 ln(0 / y) = 0` and `+inf` when `x > 0 = y`.
#[inline]
pub fn xlog_ratio(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if y <= 0.0 {
        f64::INFINITY
    } else {
        x * ln(x / y)
    }
}

/// Pairwise (cascade) summation: result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `ln Σ exp(x_i)`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|x| exp(x - m)).sum();
    m + ln(s)
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Estimate {
                mean,
                std_error: 0.0,
                n,
            };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Estimate {
            mean,
            std_error: sqrt(var / n as f64),
            n,
        }
    }
}

/// Least-squares line fit returning `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
