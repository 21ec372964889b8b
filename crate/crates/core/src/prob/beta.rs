use alloc::format;

use rand_distr::{Distribution, Beta};

use crate::math::ln;
use crate::{Error, Result, RngStream};

/// Parameters of a Beta distribution; both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidDistribution(format!("Beta({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    /// Beta(1, 1).
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Conjugate update with Bernoulli counts.
    pub fn update(&self, successes: u64, failures: u64) -> BetaParams {
        BetaParams {
            alpha: self.alpha + successes as f64,
            beta: self.beta + failures as f64,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        // Parameters were validated on construction.
        Beta::new(self.alpha, self.beta)
            .expect("validated Beta parameters")
            .sample(rng)
    }

    /// Log-probability of one particular binary sequence containing
    /// `ones` ones and `zeros` zeros under the Beta-Bernoulli predictive.
    pub fn ln_sequence_prob(&self, ones: u64, zeros: u64) -> f64 {
        let n = ones + zeros;
        if n <= 256 {
            let mut acc = 0.0;
            for i in 0..ones {
                acc += ln(self.alpha + i as f64);
            }
            for j in 0..zeros {
                acc += ln(self.beta + j as f64);
            }
            for m in 0..n {
                acc -= ln(self.alpha + self.beta + m as f64);
            }
            acc
        } else {
            ln_beta_fn(self.alpha + ones as f64, self.beta + zeros as f64)
                - ln_beta_fn(self.alpha, self.beta)
        }
    }
}

fn ln_beta_fn(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;

    #[test]
    fn rejects_nonpositive() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -2.0).is_err());
        assert!(BetaParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn conjugate_updates() {
        let u = BetaParams::uniform();
        assert_eq!(u.update(3, 2), BetaParams::new(4.0, 3.0).unwrap());
        let b = BetaParams::new(2.5, 0.5).unwrap();
        assert_eq!(b.update(0, 0), b);
        assert_eq!(u.update(0, 10), BetaParams::new(1.0, 11.0).unwrap());
    }

    #[test]
    fn sample_mean_matches_beta_mean() {
        let b = BetaParams::new(4.0, 3.0).unwrap();
        let mut rng = RngStream::new(5, 1);
        let n = 100_000;
        let mean = (0..n).map(|_| b.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 4.0 / 7.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn sequence_prob_small_cases() {
        let u = BetaParams::uniform();
        // Under Beta(1,1), a specific sequence with s ones in n has prob s!(n-s)!/(n+1)!.
        assert!((exp(u.ln_sequence_prob(1, 0)) - 0.5).abs() < 1e-15);
        assert!((exp(u.ln_sequence_prob(1, 1)) - 1.0 / 6.0).abs() < 1e-15);
        assert!((exp(u.ln_sequence_prob(2, 1)) - 2.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn sequence_prob_product_and_lgamma_agree() {
        let b = BetaParams::new(1.5, 2.5).unwrap();
        let small = b.ln_sequence_prob(100, 156);
        let big = ln_beta_fn(101.5, 158.5) - ln_beta_fn(1.5, 2.5);
        assert!((small - big).abs() < 1e-9 * big.abs());
    }
}
