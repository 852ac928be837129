//! Similarity of ranked result lists.
//!
//! Lists are compared on their registrable domains. Two measures are
//! provided: the Jaccard index, which ignores order, and extrapolated
//! rank-biased overlap, which weights agreement at the top of the page more
//! heavily through a geometric persistence parameter.

mod calibration;
mod domain;
mod pairwise;

use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::Scalar;

pub use calibration::{fit_persistence, prefix_weight, CalibrationMode, MAX_BISECTION_STEPS};
pub use domain::{normalize_domain, SuffixRules};
pub use pairwise::{pairwise_similarity, read_similarity_csv, write_similarity_csv, ListKind, SimilarityRow};

/// Ordered, duplicate-free list of lowercase domains.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RankedList {
    items: Vec<String>,
}

impl RankedList {
    /// Lowercases, drops blank entries and keeps only the first occurrence of
    /// each domain.
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let items = items
            .into_iter()
            .map(|s| s.as_ref().trim().to_ascii_lowercase())
            .filter(|s| !s.is_empty())
            .filter(|s| seen.insert(s.clone()))
            .collect();
        RankedList { items }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for RankedList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        RankedList::new(iter)
    }
}

/// Geometric persistence `p`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Persistence<T = f64>(T);

impl<T: Scalar> Persistence<T> {
    pub fn new(p: T) -> Result<Self> {
        if p > T::zero() && p < T::one() {
            Ok(Persistence(p))
        } else {
            Err(invalid(format!("persistence must lie in (0,1), got {p:?}")))
        }
    }

    pub fn value(self) -> T {
        self.0
    }
}

impl Default for Persistence<f64> {
    fn default() -> Self {
        Persistence(crate::DEFAULT_PERSISTENCE)
    }
}

/// `|A ∩ B| / |A ∪ B|` over the domain sets; two empty lists score 1.
pub fn jaccard<T: Scalar>(a: &RankedList, b: &RankedList) -> T {
    let sa: HashSet<&str> = a.items.iter().map(String::as_str).collect();
    let sb: HashSet<&str> = b.items.iter().map(String::as_str).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return T::one();
    }
    let inter = sa.intersection(&sb).count();
    T::from_count(inter) / T::from_count(union)
}

/// Weight of rank `d` (1-based): `(1 - p) p^(d-1)`.
pub fn rank_weight<T: Scalar>(d: usize, p: Persistence<T>) -> Result<T> {
    if d < 1 {
        return Err(invalid("rank must be >= 1"));
    }
    let p = p.value();
    Ok((T::one() - p) * p.powi_exact(exponent(d - 1)?))
}

/// Extrapolated rank-biased overlap.
///
/// Both lists are truncated to the shorter length `k`, and
/// `X_k/k · p^k + (1-p)/p · Σ_{d=1..k} X_d/d · p^d` is returned, where `X_d`
/// is the overlap of the two depth-`d` prefixes.
pub fn rbo_ext<T: Scalar>(s: &RankedList, t: &RankedList, p: Persistence<T>) -> Result<T> {
    let k = s.len().min(t.len());
    if k == 0 {
        return Err(Error::EmptyList);
    }
    let p = p.value();
    let mut seen_s: HashSet<&str> = HashSet::with_capacity(k);
    let mut seen_t: HashSet<&str> = HashSet::with_capacity(k);
    let mut overlap = 0usize;
    let mut p_pow = T::one();
    let mut sum = T::zero();
    for (d, (a, b)) in s.items[..k].iter().zip(&t.items[..k]).enumerate() {
        let depth = d + 1;
        if a == b {
            overlap += 1;
        } else {
            overlap += usize::from(seen_t.contains(a.as_str()));
            overlap += usize::from(seen_s.contains(b.as_str()));
        }
        seen_s.insert(a);
        seen_t.insert(b);
        p_pow = p_pow * p;
        sum = sum + T::from_count(overlap) / T::from_count(depth) * p_pow;
    }
    let tail = T::from_count(overlap) / T::from_count(k) * p_pow;
    Ok(tail + (T::one() - p) / p * sum)
}

fn exponent(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| invalid("rank too large"))
}
