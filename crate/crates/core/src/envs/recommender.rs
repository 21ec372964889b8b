//! Logistic movie recommender with a finite set of user types.
//!
//! A user of type `φ` enjoys movie `X_i` with probability `σ(φᵀX_i)`,
//! independently across movies given the type. The recommender proposes a
//! set of `k_select` movies and succeeds if at least one is enjoyed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::logistic;
use crate::metrics::DecisionProblem;
use crate::prob::{binary_sequence_pmf, FinitePmf, NORMALIZATION_TOLERANCE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct UserType {
    pub weight: f64,
    pub preference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommenderInstance {
    movies: Vec<Vec<f64>>,
    user_types: Vec<UserType>,
    k_select: usize,
}

/// The two selections compared by the recommender example (0-indexed movies).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// Top movies by individual enjoyment probability.
    pub marginal: Vec<usize>,
    /// The set maximizing the probability that at least one is enjoyed.
    pub joint: Vec<usize>,
}

impl RecommenderInstance {
    pub fn new(movies: Vec<Vec<f64>>, user_types: Vec<UserType>, k_select: usize) -> Result<Self> {
        let d = match movies.first() {
            Some(m) => m.len(),
            None => return Err(Error::InvalidArgument("no movies".into())),
        };
        if let Some(i) = movies.iter().position(|m| m.len() != d) {
            return Err(Error::InvalidArgument(format!("movie {} has dimension {}, expected {d}", i + 1, movies[i].len())));
        }
        if user_types.is_empty() {
            return Err(Error::InvalidArgument("no user types".into()));
        }
        if let Some(i) = user_types.iter().position(|u| u.preference.len() != d) {
            return Err(Error::InvalidArgument(format!("user type {} has wrong dimension", i + 1)));
        }
        if user_types.iter().any(|u| !(u.weight.is_finite() && u.weight >= 0.0)) {
            return Err(Error::InvalidDistribution("negative user-type weight".into()));
        }
        let total: f64 = user_types.iter().map(|u| u.weight).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("user-type weights sum to {total}")));
        }
        if k_select == 0 || k_select > movies.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot select {k_select} of {} movies",
                movies.len()
            )));
        }
        Ok(Self {
            movies,
            user_types,
            k_select,
        })
    }

    /// Four movies `(10,-10), (-10,10), (1,0), (0,1)`, two equally likely
    /// user types `(1,0)` and `(0,1)`, pairs recommended.
    pub fn two_user_types() -> Self {
        Self::new(
            vec![vec![10.0, -10.0], vec![-10.0, 10.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![
                UserType {
                    weight: 0.5,
                    preference: vec![1.0, 0.0],
                },
                UserType {
                    weight: 0.5,
                    preference: vec![0.0, 1.0],
                },
            ],
            2,
        )
        .expect("valid instance")
    }

    pub fn movies(&self) -> &[Vec<f64>] {
        &self.movies
    }

    pub fn user_types(&self) -> &[UserType] {
        &self.user_types
    }

    pub fn k_select(&self) -> usize {
        self.k_select
    }

    /// `σ(φᵀX)` for one user type and movie.
    pub fn enjoy_prob(&self, user_type: usize, movie: usize) -> f64 {
        let phi = &self.user_types[user_type].preference;
        logistic(phi.iter().zip(&self.movies[movie]).map(|(a, b)| a * b).sum())
    }

    /// Enjoyment probability averaged over user types.
    pub fn marginal_enjoy_prob(&self, movie: usize) -> f64 {
        (0..self.user_types.len())
            .map(|u| self.user_types[u].weight * self.enjoy_prob(u, movie))
            .sum()
    }

    /// Probability that at least one movie of `selection` is enjoyed.
    pub fn success_prob(&self, selection: &[usize]) -> Result<f64> {
        self.check_selection(selection)?;
        Ok((0..self.user_types.len())
            .map(|u| {
                let miss: f64 = selection.iter().map(|&i| 1.0 - self.enjoy_prob(u, i)).product();
                self.user_types[u].weight * (1.0 - miss)
            })
            .sum())
    }

    fn check_selection(&self, selection: &[usize]) -> Result<()> {
        for (j, &i) in selection.iter().enumerate() {
            if i >= self.movies.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.movies.len(),
                });
            }
            if selection[..j].contains(&i) {
                return Err(Error::InvalidArgument(format!("movie {} selected twice", i + 1)));
            }
        }
        Ok(())
    }

    /// All `k_select`-subsets in lexicographic order.
    pub fn selections(&self) -> Vec<Vec<usize>> {
        let n = self.movies.len();
        let k = self.k_select;
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..k).collect();
        loop {
            out.push(cur.clone());
            let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
                return out;
            };
            cur[i] += 1;
            for j in i + 1..k {
                cur[j] = cur[j - 1] + 1;
            }
        }
    }

    /// Marginal selector (top movies individually, ties to the smaller index)
    /// against the joint selector (best set, ties to the lexicographically
    /// smallest).
    pub fn marginal_vs_joint(&self) -> Selection {
        let mut order: Vec<usize> = (0..self.movies.len()).collect();
        let m: Vec<f64> = order.iter().map(|&i| self.marginal_enjoy_prob(i)).collect();
        // Stable sort keeps index order among equal probabilities.
        order.sort_by(|&a, &b| m[b].partial_cmp(&m[a]).unwrap_or(core::cmp::Ordering::Equal));
        let mut marginal: Vec<usize> = order[..self.k_select].to_vec();
        marginal.sort_unstable();

        let mut joint = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for s in self.selections() {
            let v = self.success_prob(&s).expect("valid selection");
            if v > best {
                best = v;
                joint = s;
            }
        }
        Selection { marginal, joint }
    }

    fn outcome_space_len(&self) -> Result<usize> {
        let n = self.movies.len();
        if n > 20 {
            return Err(Error::EnumerationCutoff {
                required: 1u128 << n,
                cutoff: 1 << 20,
            });
        }
        Ok(n)
    }

    /// Exact joint pmf of the enjoyment vector `(Y_1..Y_N)`, movie `i` in bit `i`.
    pub fn outcome_joint(&self) -> Result<FinitePmf<u32>> {
        let n = self.outcome_space_len()?;
        binary_sequence_pmf(n, |code| {
            (0..self.user_types.len())
                .map(|u| self.user_types[u].weight * self.product_prob(code, |i| self.enjoy_prob(u, i)))
                .sum()
        })
    }

    /// Product of the per-movie marginals: right marginals, no coupling.
    pub fn marginal_product_joint(&self) -> Result<FinitePmf<u32>> {
        let n = self.outcome_space_len()?;
        let m: Vec<f64> = (0..n).map(|i| self.marginal_enjoy_prob(i)).collect();
        binary_sequence_pmf(n, |code| self.product_prob(code, |i| m[i]))
    }

    fn product_prob(&self, code: u32, p: impl Fn(usize) -> f64) -> f64 {
        (0..self.movies.len())
            .map(|i| if code >> i & 1 == 1 { p(i) } else { 1.0 - p(i) })
            .product()
    }

    /// Actions are the selections; reward 1 iff some selected movie is enjoyed.
    pub fn decision_problem(&self) -> Result<DecisionProblem<u32>> {
        let n = self.outcome_space_len()?;
        let selections = self.selections();
        let outcomes: Vec<u32> = (0..1u32 << n).collect();
        DecisionProblem::new(selections.len(), outcomes, |a, &y| {
            let hit = selections[a].iter().any(|&i| y >> i & 1 == 1);
            if hit {
                1.0
            } else {
                0.0
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::universality_gap;

    fn round2(x: f64) -> f64 {
        libm::round(x * 100.0) / 100.0
    }

    #[test]
    fn table_entries_to_two_decimals() {
        let inst = RecommenderInstance::two_user_types();
        let table = [[1.0, 0.0, 0.73, 0.5], [0.0, 1.0, 0.5, 0.73]];
        for (u, row) in table.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                assert_eq!(round2(inst.enjoy_prob(u, i)), *v, "type {u} movie {i}");
            }
        }
        let avg = [0.5, 0.5, 0.62, 0.62];
        for (i, v) in avg.iter().enumerate() {
            assert_eq!(round2(inst.marginal_enjoy_prob(i)), *v);
        }
    }

    #[test]
    fn selections() {
        let inst = RecommenderInstance::two_user_types();
        let sel = inst.marginal_vs_joint();
        assert_eq!(sel.marginal, vec![2, 3]);
        assert_eq!(sel.joint, vec![0, 1]);
        assert!(inst.success_prob(&[0, 1]).unwrap() > 0.9999);
        // Miss probability per type: (1 − σ(1))(1 − σ(0)).
        let miss = 1.0 - inst.success_prob(&[2, 3]).unwrap();
        let expected = (1.0 - logistic(1.0)) * 0.5;
        assert!((miss - expected).abs() < 1e-15);
        assert!((miss - 0.1345).abs() < 5e-4 && miss > 0.10);
        assert!(inst.success_prob(&[1, 1]).is_err());
        assert!(inst.success_prob(&[4, 1]).is_err());
    }

    #[test]
    fn single_type_selectors_agree_on_dominant_movie() {
        let mut inst = RecommenderInstance::two_user_types();
        inst.user_types = vec![UserType {
            weight: 1.0,
            preference: vec![1.0, 0.0],
        }];
        let sel = inst.marginal_vs_joint();
        assert!(sel.marginal.contains(&0) && sel.joint.contains(&0));
        // Exhaustive: the joint choice is never worse.
        let best = inst
            .selections()
            .iter()
            .map(|s| inst.success_prob(s).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(inst.success_prob(&sel.joint).unwrap(), best);
        assert!(best >= inst.success_prob(&sel.marginal).unwrap());
    }

    #[test]
    fn swapping_types_and_movies_is_a_symmetry() {
        let inst = RecommenderInstance::two_user_types();
        let perm = [1, 0, 3, 2];
        for u in 0..2 {
            for (i, &j) in perm.iter().enumerate() {
                let a = inst.enjoy_prob(u, i);
                let b = inst.enjoy_prob(1 - u, j);
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lexicographic_subsets() {
        let inst = RecommenderInstance::two_user_types();
        let s = inst.selections();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], vec![0, 1]);
        assert_eq!(s[5], vec![2, 3]);
    }

    #[test]
    fn universality_gap_on_recast_problem() {
        // Exhaustive expectation over 2 types × 16 outcomes.
        let inst = RecommenderInstance::two_user_types();
        let dp = inst.decision_problem().unwrap();
        let post = inst.outcome_joint().unwrap();
        let agent = inst.marginal_product_joint().unwrap();
        let g = universality_gap(&dp, &post, &agent).unwrap();
        let pair_34 = inst.selections().iter().position(|s| s == &vec![2, 3]).unwrap();
        assert_eq!(g.agent_action, pair_34);
        let expected_gap = inst.success_prob(&[0, 1]).unwrap() - inst.success_prob(&[2, 3]).unwrap();
        assert!((g.gap - expected_gap).abs() < 1e-12);
        assert!((g.gap - 0.1345).abs() < 1e-3);
        assert!(g.bound > g.gap && g.holds);
    }
}
