//! Enumerable hypothesis classes and their combinatorial statistics
//! (VC dimension, combinatorial diameter, growth function), all computed
//! by exhaustive search.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{population_risk, FiniteDistribution, Hypothesis};
use crate::error::{Error, Result};

/// Upper bound on `(#subsets examined) * |F|` for shattering and growth
/// function searches.
pub const PROJECTION_BUDGET: u128 = 2_000_000_000;

/// A nonempty, duplicate-free, lexicographically sorted list of hypotheses
/// over a common domain.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "ClassDoc", into = "ClassDoc")]
pub struct HypothesisClass {
    m: usize,
    members: Vec<Hypothesis>,
    vc_dim: OnceLock<usize>,
    diameter: OnceLock<usize>,
}

impl Clone for HypothesisClass {
    fn clone(&self) -> Self {
        HypothesisClass {
            m: self.m,
            members: self.members.clone(),
            vc_dim: self.vc_dim.clone(),
            diameter: self.diameter.clone(),
        }
    }
}

impl PartialEq for HypothesisClass {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.members == other.members
    }
}

#[derive(Serialize, Deserialize)]
struct ClassDoc {
    m: usize,
    members: Vec<String>,
}

impl TryFrom<ClassDoc> for HypothesisClass {
    type Error = Error;

    fn try_from(doc: ClassDoc) -> Result<Self> {
        let members = doc
            .members
            .iter()
            .map(|s| {
                let h = Hypothesis::parse(s)?;
                if h.domain_size() != doc.m {
                    return Err(Error::DomainMismatch {
                        expected: doc.m,
                        found: h.domain_size(),
                    });
                }
                Ok(h)
            })
            .collect::<Result<Vec<_>>>()?;
        if members.is_empty() {
            return Err(Error::InvalidClass("class has no members".into()));
        }
        HypothesisClass::new(members)
    }
}

impl From<HypothesisClass> for ClassDoc {
    fn from(c: HypothesisClass) -> Self {
        ClassDoc {
            m: c.m,
            members: c.members.iter().map(|h| h.to_bit_string()).collect(),
        }
    }
}

impl HypothesisClass {
    /// Sorts and deduplicates `members`; rejects empty or mixed-domain input.
    pub fn new(mut members: Vec<Hypothesis>) -> Result<Self> {
        let m = match members.first() {
            Some(h) => h.domain_size(),
            None => return Err(Error::InvalidClass("class has no members".into())),
        };
        if let Some(h) = members.iter().find(|h| h.domain_size() != m) {
            return Err(Error::DomainMismatch {
                expected: m,
                found: h.domain_size(),
            });
        }
        members.sort_unstable();
        members.dedup();
        Ok(HypothesisClass {
            m,
            members,
            vc_dim: OnceLock::new(),
            diameter: OnceLock::new(),
        })
    }

    pub fn from_strings(members: &[&str]) -> Result<Self> {
        Self::new(
            members
                .iter()
                .map(|s| Hypothesis::parse(s))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// All `2^m` hypotheses on `m` atoms.
    pub fn full_cube(m: usize) -> Result<Self> {
        if m > 20 {
            return Err(Error::Budget(format!("full cube on {m} atoms")));
        }
        Self::new(
            (0u64..1 << m)
                .map(|mask| Hypothesis::from_fn(m, |x| mask >> x & 1 == 1))
                .collect(),
        )
    }

    pub fn domain_size(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &Hypothesis {
        &self.members[i]
    }

    pub fn index_of(&self, f: &Hypothesis) -> Option<usize> {
        self.members.binary_search(f).ok()
    }

    /// Exact VC dimension, cached after the first successful computation.
    pub fn vc_dim(&self) -> Result<usize> {
        if let Some(d) = self.vc_dim.get() {
            return Ok(*d);
        }
        let d = vc_dimension(self)?;
        let _ = self.vc_dim.set(d);
        Ok(d)
    }

    /// Combinatorial diameter, cached.
    pub fn diameter(&self) -> usize {
        *self.diameter.get_or_init(|| combinatorial_diameter(self))
    }

    /// Seeds the VC-dimension cache with a value known by construction.
    /// Debug builds verify it.
    pub fn with_known_vc_dim(self, d: usize) -> Self {
        debug_assert_eq!(vc_dimension(&self).ok(), Some(d));
        let _ = self.vc_dim.set(d);
        self
    }

    /// Index of the population risk minimizer (lowest index among ties),
    /// its risk, and how many members attain it.
    pub fn population_minimizer(&self, dist: &FiniteDistribution) -> Result<Minimizer> {
        let risks = self
            .members
            .iter()
            .map(|f| population_risk(f, dist))
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (i, r) in risks.iter().enumerate() {
            if *r < risks[best] {
                best = i;
            }
        }
        let ties = risks.iter().filter(|r| **r == risks[best]).count();
        Ok(Minimizer {
            index: best,
            risk: risks[best],
            ties,
        })
    }
}

/// Population risk minimizer of a class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub index: usize,
    pub risk: f64,
    /// Number of members with exactly the minimal risk (1 when unique).
    pub ties: usize,
}

// ---------------------------------------------------------------------------
// Subset enumeration helpers
// ---------------------------------------------------------------------------

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `visit` with every k-subset of `0..m` in lexicographic order;
/// stops early when `visit` returns `true`.
fn for_each_subset(m: usize, k: usize, mut visit: impl FnMut(&[usize]) -> bool) -> bool {
    if k > m {
        return false;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if visit(&idx) {
            return true;
        }
        // rightmost position that can still move
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn projection(f: &Hypothesis, atoms: &[usize]) -> u64 {
    atoms
        .iter()
        .enumerate()
        .fold(0u64, |acc, (j, &x)| acc | (f.get(x) as u64) << j)
}

fn check_budget(what: &str, m: usize, k: usize, members: usize) -> Result<()> {
    let work = binomial(m, k).saturating_mul(members as u128);
    if work > PROJECTION_BUDGET {
        return Err(Error::Budget(format!(
            "{what}: C({m},{k}) * {members} projections exceeds {PROJECTION_BUDGET}"
        )));
    }
    Ok(())
}

/// Whether `class` realizes all `2^|atoms|` labelings of `atoms`.
pub fn shatters(class: &HypothesisClass, atoms: &[usize]) -> bool {
    let k = atoms.len();
    if k >= 64 || class.len() < (1usize << k) {
        return false;
    }
    let mut seen = vec![false; 1 << k];
    let mut distinct = 0usize;
    for f in class.members() {
        let p = projection(f, atoms) as usize;
        if !seen[p] {
            seen[p] = true;
            distinct += 1;
            if distinct == 1 << k {
                return true;
            }
        }
    }
    false
}

/// Exact VC dimension by exhaustive shattering search: set sizes are tried
/// upward and the search stops at the first size with no shattered set.
pub fn vc_dimension(class: &HypothesisClass) -> Result<usize> {
    let m = class.domain_size();
    let mut d = 0;
    for k in 1..=m {
        if class.len() < (1usize << k.min(63)) {
            break;
        }
        check_budget("vc dimension", m, k, class.len())?;
        if !for_each_subset(m, k, |atoms| shatters(class, atoms)) {
            break;
        }
        d = k;
    }
    Ok(d)
}

/// Largest Hamming distance between two members; 0 for a singleton.
pub fn combinatorial_diameter(class: &HypothesisClass) -> usize {
    let ms = class.members();
    (0..ms.len())
        .into_par_iter()
        .map(|i| {
            ms[i + 1..]
                .iter()
                .map(|g| ms[i].hamming_unchecked(g))
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

/// Number of distinct labelings the class induces on `atoms`.
pub fn projection_count(class: &HypothesisClass, atoms: &[usize]) -> usize {
    let mut pats: Vec<Vec<bool>> = class
        .members()
        .iter()
        .map(|f| atoms.iter().map(|&x| f.get(x)).collect())
        .collect();
    pats.sort_unstable();
    pats.dedup();
    pats.len()
}

/// Growth function `S_F(n)`: the maximum number of distinct projections on
/// `n` points. Repeated points never add labelings, so the maximum is taken
/// over `min(n, m)`-subsets of distinct atoms.
pub fn growth_function(class: &HypothesisClass, n: usize) -> Result<u64> {
    let m = class.domain_size();
    let k = n.min(m);
    if k == 0 {
        return Ok(1);
    }
    check_budget("growth function", m, k, class.len())?;
    let mut best = 0usize;
    let cap = if k >= 63 { usize::MAX } else { class.len().min(1 << k) };
    for_each_subset(m, k, |atoms| {
        best = best.max(projection_count(class, atoms));
        best == cap
    });
    Ok(best as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_sorts_and_dedups() {
        let c = HypothesisClass::from_strings(&["11", "00", "11", "01"]).unwrap();
        let s: Vec<_> = c.members().iter().map(|h| h.to_bit_string()).collect();
        assert_eq!(s, ["00", "01", "11"]);
        assert!(HypothesisClass::new(vec![]).is_err());
        assert!(HypothesisClass::from_strings(&["00", "000"]).is_err());
    }

    #[test]
    fn subset_enumeration_counts() {
        for (m, k) in [(5, 0), (5, 2), (6, 3), (4, 4), (3, 5)] {
            let mut n = 0u128;
            for_each_subset(m, k, |_| {
                n += 1;
                false
            });
            assert_eq!(n, binomial(m, k), "C({m},{k})");
        }
    }

    #[test]
    fn vc_examples() {
        let single = HypothesisClass::from_strings(&["0101"]).unwrap();
        assert_eq!(vc_dimension(&single).unwrap(), 0);
        let two = HypothesisClass::from_strings(&["0000", "1111"]).unwrap();
        assert_eq!(vc_dimension(&two).unwrap(), 1);
        assert_eq!(vc_dimension(&HypothesisClass::full_cube(4).unwrap()).unwrap(), 4);
    }

    #[test]
    fn diameter_examples() {
        let single = HypothesisClass::from_strings(&["0101"]).unwrap();
        assert_eq!(single.diameter(), 0);
        let two = HypothesisClass::from_strings(&["0000", "1111"]).unwrap();
        assert_eq!(two.diameter(), 4);
    }

    #[test]
    fn growth_examples() {
        let single = HypothesisClass::from_strings(&["0110"]).unwrap();
        assert_eq!(growth_function(&single, 3).unwrap(), 1);
        let cube = HypothesisClass::full_cube(5).unwrap();
        for n in 0..=5 {
            assert_eq!(growth_function(&cube, n).unwrap(), 1 << n);
        }
        assert_eq!(growth_function(&cube, 9).unwrap(), 32);
    }

    #[test]
    fn budget_errors_are_explicit() {
        let big = HypothesisClass::new(
            (0..2000)
                .map(|i| Hypothesis::from_fn(40, |x| (i * 7919 + x * 31) % 13 < 6))
                .collect(),
        )
        .unwrap();
        let err = growth_function(&big, 20).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn population_minimizer_breaks_ties_low() {
        let c = HypothesisClass::from_strings(&["10", "01", "00"]).unwrap();
        let d = FiniteDistribution::uniform(vec![0.5, 0.5]).unwrap();
        let m = c.population_minimizer(&d).unwrap();
        assert_eq!(m.index, 0);
        assert_eq!(m.ties, 3);
    }
}
