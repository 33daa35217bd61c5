//! Finitely supported real sequences and the norms of l1, lp and c0.
//!
//! A [`SparseSeq`] stores `(index, value)` pairs sorted by index with no
//! stored zeros. Indices are 0-based. Every element of l1, lp, c0 handled by
//! this crate is finitely supported, so no truncation of tails ever happens.
//!
//! Cancellation in [`SparseSeq::combine`] compares the computed float against
//! `0.0` exactly; values that cancel only up to rounding stay stored.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finitely supported real sequence in canonical form.
#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, f64)>", into = "Vec<(usize, f64)>")]
pub struct SparseSeq {
    entries: Vec<(usize, f64)>,
}

impl fmt::Debug for SparseSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

impl TryFrom<Vec<(usize, f64)>> for SparseSeq {
    type Error = Error;

    fn try_from(pairs: Vec<(usize, f64)>) -> Result<Self> {
        SparseSeq::from_pairs(pairs)
    }
}

impl From<SparseSeq> for Vec<(usize, f64)> {
    fn from(x: SparseSeq) -> Self {
        x.entries
    }
}

/// Which sequence norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    L1,
    Lp(f64),
    Linf,
}

/// The Banach space a problem lives in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceTag {
    /// l2, or any Hilbert space entered through its Gram matrix.
    Hilbert,
    /// lp with `1 < p < inf`.
    Lp(f64),
    /// l1 with pre-dual c0.
    L1,
}

impl SpaceTag {
    pub fn validate(&self) -> Result<()> {
        if let SpaceTag::Lp(p) = *self {
            check_exponent(p)?;
        }
        Ok(())
    }

    /// Norm of the space itself.
    pub fn norm(&self) -> Norm {
        match *self {
            SpaceTag::Hilbert => Norm::Lp(2.0),
            SpaceTag::Lp(p) => Norm::Lp(p),
            SpaceTag::L1 => Norm::L1,
        }
    }

    /// Norm of the space holding the functionals (dual or pre-dual).
    pub fn dual_norm(&self) -> Norm {
        match *self {
            SpaceTag::Hilbert => Norm::Lp(2.0),
            SpaceTag::Lp(p) => Norm::Lp(conjugate_exponent(p)),
            SpaceTag::L1 => Norm::Linf,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpaceTag::Hilbert => "hilbert",
            SpaceTag::Lp(_) => "lp",
            SpaceTag::L1 => "l1",
        }
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "exponent p must satisfy 1 < p < inf, got {p}"
        )))
    }
}

/// `q = p / (p - 1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

impl SparseSeq {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a sequence from arbitrary-order pairs. Zeros are dropped;
    /// duplicate indices and non-finite values are rejected.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        if let Some(&(i, v)) = pairs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value {v} at index {i}")));
        }
        pairs.sort_by_key(|&(i, _)| i);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(format!("duplicate index {}", w[0].0)));
        }
        pairs.retain(|&(_, v)| v != 0.0);
        Ok(SparseSeq { entries: pairs })
    }

    /// Sequence with `values[k]` placed at `indices[k]`; `indices` must be
    /// strictly increasing.
    pub fn from_dense_at(indices: &[usize], values: &[f64]) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let entries = indices
            .iter()
            .zip(values)
            .filter(|(_, &v)| v != 0.0)
            .map(|(&i, &v)| (i, v))
            .collect();
        SparseSeq { entries }
    }

    /// Sequence whose first `values.len()` terms are `values`.
    pub fn from_dense(values: &[f64]) -> Self {
        let idx: Vec<usize> = (0..values.len()).collect();
        Self::from_dense_at(&idx, values)
    }

    /// The unit vector `e_i`.
    pub fn unit(i: usize) -> Self {
        SparseSeq {
            entries: vec![(i, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    /// Values at `indices` (zeros where not stored).
    pub fn gather(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.get(i)).collect()
    }

    pub fn norm(&self, which: Norm) -> Result<f64> {
        Ok(match which {
            Norm::L1 => self.norm_l1(),
            Norm::Linf => self.norm_linf(),
            Norm::Lp(p) => {
                check_exponent(p)?;
                self.norm_lp(p)
            }
        })
    }

    pub fn norm_l1(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn norm_linf(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    /// `||x||_p`, scaled by the largest magnitude to avoid overflow.
    pub fn norm_lp(&self, p: f64) -> f64 {
        lp_norm_of(self.entries.iter().map(|&(_, v)| v), p)
    }

    pub fn inner(&self, other: &SparseSeq) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// `alpha * x + beta * y` in canonical form.
    pub fn combine(alpha: f64, x: &SparseSeq, beta: f64, y: &SparseSeq) -> SparseSeq {
        let (a, b) = (&x.entries, &y.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        let mut push = |idx: usize, v: f64| {
            if v != 0.0 {
                out.push((idx, v));
            }
        };
        while i < a.len() || j < b.len() {
            let next_a = a.get(i).map(|e| e.0).unwrap_or(usize::MAX);
            let next_b = b.get(j).map(|e| e.0).unwrap_or(usize::MAX);
            if next_a < next_b {
                push(next_a, alpha * a[i].1);
                i += 1;
            } else if next_b < next_a {
                push(next_b, beta * b[j].1);
                j += 1;
            } else {
                push(next_a, alpha * a[i].1 + beta * b[j].1);
                i += 1;
                j += 1;
            }
        }
        SparseSeq { entries: out }
    }

    pub fn scale(&self, alpha: f64) -> SparseSeq {
        self.map_values(|v| alpha * v)
    }

    /// Applies `f` to every stored value, dropping results equal to zero.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> SparseSeq {
        SparseSeq {
            entries: self
                .entries
                .iter()
                .map(|&(i, v)| (i, f(v)))
                .filter(|&(_, v)| v != 0.0)
                .collect(),
        }
    }

    /// Keeps entries for which `keep(index, value)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, f64) -> bool) -> SparseSeq {
        SparseSeq {
            entries: self.entries.iter().copied().filter(|&(i, v)| keep(i, v)).collect(),
        }
    }
}

pub(crate) fn lp_norm_of(values: impl Iterator<Item = f64> + Clone, p: f64) -> f64 {
    let scale = values.clone().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = values.map(|v| (v.abs() / scale).powf(p)).sum();
    scale * sum.powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(pairs: &[(usize, f64)]) -> SparseSeq {
        SparseSeq::from_pairs(pairs.to_vec()).unwrap()
    }

    #[test]
    fn norms() {
        let x = seq(&[(0, 3.0), (2, -4.0)]);
        assert_eq!(x.norm(Norm::L1).unwrap(), 7.0);
        assert_eq!(x.norm(Norm::Linf).unwrap(), 4.0);
        let empty = SparseSeq::new();
        for n in [Norm::L1, Norm::Linf, Norm::Lp(1.5), Norm::Lp(2.0)] {
            assert_eq!(empty.norm(n).unwrap(), 0.0);
        }
        let y = seq(&[(0, 3.0), (1, 4.0)]);
        assert!((y.norm(Norm::Lp(2.0)).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_exponent() {
        let x = seq(&[(0, 1.0)]);
        assert!(matches!(x.norm(Norm::Lp(1.0)), Err(Error::InvalidParameter(_))));
        assert!(x.norm(Norm::Lp(0.5)).is_err());
        assert!(SpaceTag::Lp(1.0).validate().is_err());
    }

    #[test]
    fn inner_products() {
        assert_eq!(seq(&[(0, 1.0), (1, 0.5)]).inner(&seq(&[(0, 1.0)])), 1.0);
        assert_eq!(seq(&[(0, 2.0)]).inner(&seq(&[(1, 3.0)])), 0.0);
        assert_eq!(seq(&[(0, 1.0), (1, 1.0)]).inner(&seq(&[(0, 0.5), (1, 0.5)])), 1.0);
    }

    #[test]
    fn combine_examples() {
        let e0 = seq(&[(0, 1.0)]);
        assert!(SparseSeq::combine(1.0, &e0, -1.0, &e0).is_empty());
        assert_eq!(SparseSeq::combine(2.0, &e0, 0.0, &SparseSeq::new()), seq(&[(0, 2.0)]));
        assert_eq!(
            SparseSeq::combine(1.0, &e0, 1.0, &seq(&[(1, 1.0)])),
            seq(&[(0, 1.0), (1, 1.0)])
        );
    }

    #[test]
    fn from_pairs_canonicalizes() {
        let x = seq(&[(3, 1.0), (0, 0.0), (1, -2.0)]);
        assert_eq!(x.entries(), &[(1, -2.0), (3, 1.0)]);
        assert!(SparseSeq::from_pairs(vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseSeq::from_pairs(vec![(1, f64::NAN)]).is_err());
    }

    #[test]
    fn json_is_array_of_pairs() {
        let x = seq(&[(0, 3.0), (2, -4.5)]);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "[[0,3.0],[2,-4.5]]");
        let back: SparseSeq = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<SparseSeq>("[[0,1.0],[0,2.0]]").is_err());
    }
}
