use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ln, pairwise_sum, xlog_ratio};
use crate::prob::FinitePmf;
use crate::prob::NORMALIZATION_TOLERANCE;
use crate::{Error, Result};

/// A named discrete variable with outcomes `0..cardinality`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub name: String,
    pub cardinality: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Self {
            name: name.into(),
            cardinality,
        }
    }
}

/// Mutual information in nats. `empty_operand` is set when one side of the
/// query named no axes, in which case `nats` is 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInformation {
    pub nats: f64,
    pub empty_operand: bool,
}

/// Dense joint pmf over the Cartesian product of several named axes.
///
/// Entries are stored row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    axes: Vec<Axis>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(axes: Vec<Axis>, probs: Vec<f64>) -> Result<Self> {
        let size = table_size(&axes)?;
        if size != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "axes describe {size} entries, table has {}",
                probs.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.cardinality == 0 {
                return Err(Error::InvalidDistribution(format!("axis `{}` is empty", a.name)));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidDistribution(format!("axis `{}` repeated", a.name)));
            }
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution("negative or non-finite entry".into()));
        }
        let total = pairwise_sum(&probs);
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("table sums to {total}")));
        }
        let probs = if total == 1.0 {
            probs
        } else {
            probs.into_iter().map(|p| p / total).collect()
        };
        Ok(Self { axes, probs })
    }

    /// Builds the table by evaluating `f` at every joint index.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let size = table_size(&axes)?;
        let cards: Vec<usize> = axes.iter().map(|a| a.cardinality).collect();
        let mut idx = vec![0usize; axes.len()];
        let mut probs = Vec::with_capacity(size);
        for _ in 0..size {
            probs.push(f(&idx));
            increment(&mut idx, &cards);
        }
        Self::new(axes, probs)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
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

    pub fn axis_position(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.into()))
    }

    /// Probability at a full joint index.
    pub fn prob(&self, index: &[usize]) -> f64 {
        let mut flat = 0;
        for (a, i) in self.axes.iter().zip(index) {
            flat = flat * a.cardinality + i;
        }
        self.probs[flat]
    }

    /// The table viewed as a flat pmf; outcome `i` is the row-major index.
    pub fn to_finite_pmf(&self) -> FinitePmf<usize> {
        FinitePmf::new((0..self.probs.len()).collect(), self.probs.clone())
            .expect("joint table is a valid pmf")
    }

    /// Marginal over `names`, with axes in the order given.
    pub fn marginal(&self, names: &[&str]) -> Result<JointPmf> {
        let positions = self.positions(names)?;
        check_disjoint(&[&positions], &self.axes)?;
        let probs = self.marginal_table(&positions);
        let axes = positions.iter().map(|&i| self.axes[i].clone()).collect();
        Ok(JointPmf { axes, probs })
    }

    /// Joint entropy of the named axes.
    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        let positions = self.positions(names)?;
        check_disjoint(&[&positions], &self.axes)?;
        let terms: Vec<f64> = self
            .marginal_table(&positions)
            .iter()
            .map(|&p| if p > 0.0 { -p * ln(p) } else { 0.0 })
            .collect();
        Ok(pairwise_sum(&terms).max(0.0))
    }

    /// `H(A | B)` by direct enumeration of `−Σ p(a,b) ln p(a|b)`.
    pub fn conditional_entropy(&self, a: &[&str], given: &[&str]) -> Result<f64> {
        let pa = self.positions(a)?;
        let pb = self.positions(given)?;
        check_disjoint(&[&pa, &pb], &self.axes)?;
        let nb: usize = pb.iter().map(|&i| self.axes[i].cardinality).product();
        let mut all = pa.clone();
        all.extend_from_slice(&pb);
        let pab = self.marginal_table(&all);
        let pbm = self.marginal_table(&pb);
        let terms: Vec<f64> = pab
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let b = i % nb;
                if p > 0.0 {
                    -p * ln(p / pbm[b])
                } else {
                    0.0
                }
            })
            .collect();
        Ok(pairwise_sum(&terms).max(0.0))
    }

    /// Exact conditional mutual information `I(A; B | C)` in nats.
    ///
    /// Computed as `Σ p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))]`, which is
    /// the `P(C)`-weighted KL between `P(A,B|C)` and `P(A|C) ⊗ P(B|C)`.
    pub fn mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        cond: &[&str],
    ) -> Result<MutualInformation> {
        let pa = self.positions(a)?;
        let pb = self.positions(b)?;
        let pc = self.positions(cond)?;
        check_disjoint(&[&pa, &pb, &pc], &self.axes)?;
        if pa.is_empty() || pb.is_empty() {
            return Ok(MutualInformation {
                nats: 0.0,
                empty_operand: true,
            });
        }
        let card = |ps: &[usize]| ps.iter().map(|&i| self.axes[i].cardinality).product::<usize>();
        let (na, nb, nc) = (card(&pa), card(&pb), card(&pc));
        let mut all = pa.clone();
        all.extend_from_slice(&pb);
        all.extend_from_slice(&pc);
        let pabc = self.marginal_table(&all);

        let mut pac = vec![0.0; na * nc];
        let mut pbc = vec![0.0; nb * nc];
        let mut pcm = vec![0.0; nc];
        for ia in 0..na {
            for ib in 0..nb {
                for ic in 0..nc {
                    let p = pabc[(ia * nb + ib) * nc + ic];
                    pac[ia * nc + ic] += p;
                    pbc[ib * nc + ic] += p;
                    pcm[ic] += p;
                }
            }
        }
        let mut terms = Vec::with_capacity(pabc.len());
        for ia in 0..na {
            for ib in 0..nb {
                for ic in 0..nc {
                    let p = pabc[(ia * nb + ib) * nc + ic];
                    if p > 0.0 {
                        terms.push(p * ln(p * pcm[ic] / (pac[ia * nc + ic] * pbc[ib * nc + ic])));
                    }
                }
            }
        }
        Ok(MutualInformation {
            nats: pairwise_sum(&terms).max(0.0),
            empty_operand: false,
        })
    }

    /// `E[ KL( P(A | B) ‖ P(A | C) ) ]` with both conditionals induced by this
    /// table and the expectation over the joint law of `B ∪ C`.
    ///
    /// `B` and `C` may share axes; `A` must be disjoint from both. Returns
    /// `+inf` when `P(A|C)` misses mass that `P(A|B)` puts somewhere reachable.
    pub fn expected_conditional_kl(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let pa = self.positions(a)?;
        let pb = self.positions(b)?;
        let pc = self.positions(c)?;
        check_disjoint(&[&pa, &pb], &self.axes)?;
        check_disjoint(&[&pa, &pc], &self.axes)?;
        check_disjoint(&[&pb], &self.axes)?;
        check_disjoint(&[&pc], &self.axes)?;

        let mut union = pb.clone();
        for &i in &pc {
            if !union.contains(&i) {
                union.push(i);
            }
        }
        let card = |ps: &[usize]| ps.iter().map(|&i| self.axes[i].cardinality).product::<usize>();
        let na = card(&pa);
        let (nb, nc) = (card(&pb), card(&pc));

        let cond_table = |given: &[usize], n: usize| {
            let mut all = pa.clone();
            all.extend_from_slice(given);
            let joint = self.marginal_table(&all);
            let mut marg = vec![0.0; n];
            for (i, p) in joint.iter().enumerate() {
                marg[i % n] += p;
            }
            (joint, marg)
        };
        let (pab, pbm) = cond_table(&pb, nb);
        let (pac, pcm) = cond_table(&pc, nc);
        let pu = self.marginal_table(&union);

        let ucards: Vec<usize> = union.iter().map(|&i| self.axes[i].cardinality).collect();
        let mut uidx = vec![0usize; union.len()];
        let flat_of = |ps: &[usize], uidx: &[usize]| {
            let mut f = 0;
            for &axis in ps {
                let slot = union.iter().position(|&u| u == axis).unwrap();
                f = f * self.axes[axis].cardinality + uidx[slot];
            }
            f
        };
        let mut terms = Vec::new();
        for &w in &pu {
            if w > 0.0 {
                let ib = flat_of(&pb, &uidx);
                let ic = flat_of(&pc, &uidx);
                let mut kl = 0.0;
                for ia in 0..na {
                    let p = pab[ia * nb + ib] / pbm[ib];
                    let q = pac[ia * nc + ic] / pcm[ic];
                    kl += xlog_ratio(p, q);
                }
                if kl.is_infinite() {
                    return Ok(f64::INFINITY);
                }
                terms.push(w * kl);
            }
            increment(&mut uidx, &ucards);
        }
        Ok(pairwise_sum(&terms).max(0.0))
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.axis_position(n)).collect()
    }

    /// Marginal table over axis positions (in that order), row-major.
    fn marginal_table(&self, positions: &[usize]) -> Vec<f64> {
        let n = self.axes.len();
        let cards: Vec<usize> = self.axes.iter().map(|a| a.cardinality).collect();
        let mut target_stride = vec![0usize; n];
        let mut size = 1usize;
        for &p in positions.iter().rev() {
            target_stride[p] = size;
            size *= cards[p];
        }
        let mut out = vec![0.0; size];
        let mut counter = vec![0usize; n];
        let mut t = 0usize;
        for &p in &self.probs {
            out[t] += p;
            let mut axis = n;
            while axis > 0 {
                axis -= 1;
                counter[axis] += 1;
                t += target_stride[axis];
                if counter[axis] < cards[axis] {
                    break;
                }
                t -= target_stride[axis] * cards[axis];
                counter[axis] = 0;
            }
        }
        out
    }
}

fn table_size(axes: &[Axis]) -> Result<usize> {
    let mut size: u128 = 1;
    for a in axes {
        size = size.saturating_mul(a.cardinality as u128);
    }
    usize::try_from(size).map_err(|_| Error::EnumerationCutoff {
        required: size,
        cutoff: usize::MAX as u128,
    })
}

fn increment(idx: &mut [usize], cards: &[usize]) {
    for axis in (0..idx.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < cards[axis] {
            return;
        }
        idx[axis] = 0;
    }
}

fn check_disjoint(groups: &[&[usize]], axes: &[Axis]) -> Result<()> {
    let mut seen: Vec<usize> = Vec::new();
    for g in groups {
        for &i in g.iter() {
            if seen.contains(&i) {
                return Err(Error::OverlappingAxes(axes[i].name.clone()));
            }
            seen.push(i);
        }
    }
    Ok(())
}
