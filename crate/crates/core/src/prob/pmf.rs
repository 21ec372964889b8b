use alloc::format;
use alloc::vec::Vec;

use crate::math::{ln, xlog_ratio};
use crate::{Error, Result, RngStream};

/// Allowed deviation of the total mass from 1 before construction fails.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A probability mass function over an explicitly listed, ordered outcome set.
///
/// Outcome identifiers are unique; probabilities are non-negative and sum to
/// one. Two pmfs are comparable (KL, total variation) only when their outcome
/// lists are identical, order included.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf<O> {
    outcomes: Vec<O>,
    probs: Vec<f64>,
}

impl<O: Ord + Clone> FinitePmf<O> {
    /// Validates the pmf; a total mass within [`NORMALIZATION_TOLERANCE`] of
    /// one is renormalized, anything further off is an error.
    pub fn new(outcomes: Vec<O>, probs: Vec<f64>) -> Result<Self> {
        if outcomes.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} outcomes but {} probabilities",
                outcomes.len(),
                probs.len()
            )));
        }
        if outcomes.is_empty() {
            return Err(Error::InvalidDistribution("empty outcome set".into()));
        }
        if let Some(bad) = probs.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "probability #{bad} is {}",
                probs[bad]
            )));
        }
        let mut order: Vec<&O> = outcomes.iter().collect();
        order.sort();
        if order.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDistribution("duplicate outcome identifier".into()));
        }
        let total = crate::math::pairwise_sum(&probs);
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let probs = if total == 1.0 {
            probs
        } else {
            probs.into_iter().map(|p| p / total).collect()
        };
        Ok(Self { outcomes, probs })
    }

    pub fn point_mass(outcome: O) -> Self {
        Self {
            outcomes: alloc::vec![outcome],
            probs: alloc::vec![1.0],
        }
    }

    pub fn uniform(outcomes: Vec<O>) -> Result<Self> {
        let n = outcomes.len();
        Self::new(outcomes, alloc::vec![1.0 / n as f64; n])
    }

    /// Probability of `outcome`, zero if it is not in the support list.
    pub fn prob_of(&self, outcome: &O) -> f64 {
        self.outcomes
            .iter()
            .position(|o| o == outcome)
            .map_or(0.0, |i| self.probs[i])
    }

    /// Draws an outcome by inverse-CDF over the listed order.
    pub fn sample(&self, rng: &mut RngStream) -> &O {
        &self.outcomes[self.sample_index(rng)]
    }

    pub fn sample_index(&self, rng: &mut RngStream) -> usize {
        sample_weighted(&self.probs, rng)
    }
}

impl<O> FinitePmf<O> {
    pub fn outcomes(&self) -> &[O] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&O, f64)> {
        self.outcomes.iter().zip(self.probs.iter().copied())
    }
}

/// Inverse-CDF draw from non-negative weights summing to (about) one.
pub(crate) fn sample_weighted(weights: &[f64], rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // Rounding left u above the accumulated mass.
    last_positive
}

/// `Ber(p)` over outcomes `{0, 1}`.
pub fn bernoulli(p: f64) -> Result<FinitePmf<u8>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidDistribution(format!("Bernoulli parameter {p}")));
    }
    FinitePmf::new(alloc::vec![0, 1], alloc::vec![1.0 - p, p])
}

/// Pmf over binary sequences of length `len`, encoded as `u32` with element
/// `i` in bit `i`. Outcomes are listed in increasing code order.
pub fn binary_sequence_pmf(len: usize, prob: impl Fn(u32) -> f64) -> Result<FinitePmf<u32>> {
    if len > 31 {
        return Err(Error::EnumerationCutoff {
            required: 1u128 << len,
            cutoff: 1u128 << 31,
        });
    }
    let n = 1u32 << len;
    let outcomes: Vec<u32> = (0..n).collect();
    let probs = outcomes.iter().map(|&c| prob(c)).collect();
    FinitePmf::new(outcomes, probs)
}

fn check_same_support<O: PartialEq>(p: &FinitePmf<O>, q: &FinitePmf<O>) -> Result<()> {
    if p.outcomes != q.outcomes {
        return Err(Error::OutcomeMismatch);
    }
    Ok(())
}

/// `Σ p ln(p/q)` in nats; `+inf` iff some outcome has `p > 0 = q`.
pub fn kl_divergence<O: PartialEq>(p: &FinitePmf<O>, q: &FinitePmf<O>) -> Result<f64> {
    check_same_support(p, q)?;
    let terms: Vec<f64> = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| xlog_ratio(a, b))
        .collect();
    if terms.iter().any(|t| t.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    // Rounding can produce tiny negatives for p ≈ q.
    Ok(crate::math::pairwise_sum(&terms).max(0.0))
}

/// Shannon entropy in nats.
pub fn entropy<O>(p: &FinitePmf<O>) -> f64 {
    let terms: Vec<f64> = p
        .probs
        .iter()
        .map(|&x| if x > 0.0 { -x * ln(x) } else { 0.0 })
        .collect();
    crate::math::pairwise_sum(&terms).max(0.0)
}

/// Total-variation distance `½ Σ |p − q|`.
pub fn total_variation<O: PartialEq>(p: &FinitePmf<O>, q: &FinitePmf<O>) -> Result<f64> {
    check_same_support(p, q)?;
    Ok(0.5 * p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn coin_agent2_tau2() -> FinitePmf<u32> {
        FinitePmf::new(vec![0, 1, 2, 3], vec![1.0 / 3.0, 0.0, 0.0, 2.0 / 3.0]).unwrap()
    }

    fn coin_agent1_tau2() -> FinitePmf<u32> {
        FinitePmf::new(vec![0, 1, 2, 3], vec![1.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 4.0 / 9.0]).unwrap()
    }

    #[test]
    fn construction_errors() {
        assert!(FinitePmf::new(vec![0u8, 1], vec![0.5]).is_err());
        assert!(FinitePmf::new(vec![0u8, 0], vec![0.5, 0.5]).is_err());
        assert!(FinitePmf::new(vec![0u8, 1], vec![-0.1, 1.1]).is_err());
        assert!(FinitePmf::new(vec![0u8, 1], vec![0.5, 0.6]).is_err());
        assert!(FinitePmf::<u8>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn near_normalized_input_is_renormalized() {
        let p = FinitePmf::new(vec![0u8, 1], vec![0.5, 0.5 + 5e-13]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kl_identity_is_zero() {
        let p = coin_agent1_tau2();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_bernoulli_half_vs_quarter() {
        // 0.5 ln(0.5/0.75) + 0.5 ln(0.5/0.25) by hand.
        let expected = 0.5 * ln(2.0) + 0.5 * ln(2.0 / 3.0);
        let kl = kl_divergence(&bernoulli(0.5).unwrap(), &bernoulli(0.25).unwrap()).unwrap();
        assert!((kl - expected).abs() < 1e-15);
        assert!((kl - 0.143_841_036_225_890_1).abs() < 1e-12);
    }

    #[test]
    fn kl_coin_joints_tau2() {
        // {00: 1/3, 11: 2/3} against the product of Ber(2/3):
        // (1/3) ln((1/3)/(1/9)) + (2/3) ln((2/3)/(4/9)).
        let expected = ln(3.0) / 3.0 + 2.0 / 3.0 * ln(1.5);
        let kl = kl_divergence(&coin_agent2_tau2(), &coin_agent1_tau2()).unwrap();
        assert!((kl - expected).abs() < 1e-14);
        assert!((kl - 0.636_514_168_294_813_4).abs() < 1e-12);
    }

    #[test]
    fn kl_infinite_on_support_mismatch() {
        let kl = kl_divergence(&coin_agent1_tau2(), &coin_agent2_tau2()).unwrap();
        assert_eq!(kl, f64::INFINITY);
    }

    #[test]
    fn kl_rejects_mismatched_outcomes() {
        let p = FinitePmf::new(vec![0u32, 1], vec![0.5, 0.5]).unwrap();
        let q = FinitePmf::new(vec![1u32, 0], vec![0.5, 0.5]).unwrap();
        assert_eq!(kl_divergence(&p, &q), Err(Error::OutcomeMismatch));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&FinitePmf::point_mass(3u8)), 0.0);
        let u = FinitePmf::uniform(vec![0u8, 1, 2, 3]).unwrap();
        assert!((entropy(&u) - ln(4.0)).abs() < 1e-15);
        let b = bernoulli(2.0 / 3.0).unwrap();
        assert!((entropy(&b) - (ln(3.0) / 3.0 + 2.0 / 3.0 * ln(1.5))).abs() < 1e-15);
    }

    #[test]
    fn sampling_point_mass_and_bernoulli() {
        let mut rng = RngStream::new(11, 0);
        let pm = FinitePmf::point_mass(9u8);
        assert!((0..100).all(|_| *pm.sample(&mut rng) == 9));
        let b = bernoulli(0.5).unwrap();
        let n = 100_000;
        let ones = (0..n).filter(|_| *b.sample(&mut rng) == 1).count();
        let mean = ones as f64 / n as f64;
        // 6σ of a fair-coin mean at n = 1e5 is 0.0095.
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    fn random_pmf(n: usize) -> impl Strategy<Value = FinitePmf<usize>> {
        proptest::collection::vec(0.0f64..1.0, n).prop_filter_map("positive mass", |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-6).then(|| {
                FinitePmf::new((0..w.len()).collect(), w.iter().map(|x| x / total).collect()).unwrap()
            })
        })
    }

    fn pmf_pair() -> impl Strategy<Value = (FinitePmf<usize>, FinitePmf<usize>)> {
        (1usize..8).prop_flat_map(|n| (random_pmf(n), random_pmf(n)))
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative((p, q) in pmf_pair()) {
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            if kl < 1e-12 {
                prop_assert!(total_variation(&p, &q).unwrap() < 1e-5);
            }
            prop_assert!(kl_divergence(&p, &p).unwrap() < 1e-12);
        }

        #[test]
        fn pinsker((p, q) in pmf_pair()) {
            let kl = kl_divergence(&p, &q).unwrap();
            let tv = total_variation(&p, &q).unwrap();
            prop_assert!(tv <= (0.5 * kl).sqrt() + 1e-12);
        }

        #[test]
        fn entropy_at_most_log_cardinality(p in (1usize..10).prop_flat_map(random_pmf)) {
            let h = entropy(&p);
            prop_assert!(h >= 0.0 && h <= ln(p.len() as f64) + 1e-12);
        }
    }
}
