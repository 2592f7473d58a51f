//! Empirical risk minimization over an enumerated class and the set of
//! almost empirical risk minimizers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class::HypothesisClass;
use crate::domain::{AtomCounts, Hypothesis, LabeledSample};
use crate::error::{Error, Result};

/// Natural log clamped below at 1 (`log x` means `max(log x, 1)`).
pub fn clamped_ln(x: f64) -> f64 {
    x.ln().max(1.0)
}

/// `alpha(n, d, delta) = sqrt((d log(n/d) + log(1/delta)) / n)` with clamped logs.
pub fn alpha(n: usize, d: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", 0.0, "must be at least 1"));
    }
    if d == 0 {
        return Err(Error::param("d", 0.0, "must be at least 1"));
    }
    check_delta(delta)?;
    let (n, d) = (n as f64, d as f64);
    Ok(((d * clamped_ln(n / d) + clamped_ln(1.0 / delta)) / n).sqrt())
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0, 1)"));
    }
    Ok(())
}

/// Index of the empirical risk minimizer; ties go to the lowest index.
pub fn erm_index(class: &HypothesisClass, s: &LabeledSample) -> Result<usize> {
    check_sample(class, s)?;
    Ok(erm_index_from_counts(class, &s.counts()))
}

pub(crate) fn erm_index_from_counts(class: &HypothesisClass, counts: &AtomCounts) -> usize {
    let mut best = 0;
    let mut best_err = u64::MAX;
    for (i, f) in class.members().iter().enumerate() {
        let e = counts.errors(f);
        if e < best_err {
            best = i;
            best_err = e;
        }
    }
    best
}

/// The empirical risk minimizer itself.
pub fn erm(class: &HypothesisClass, s: &LabeledSample) -> Result<Hypothesis> {
    Ok(class.member(erm_index(class, s)?).clone())
}

fn check_sample(class: &HypothesisClass, s: &LabeledSample) -> Result<()> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if s.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: s.domain_size(),
        });
    }
    Ok(())
}

/// `{f : R_n(f) - R_n(g) <= c (alpha^2 + alpha sqrt(P_n|g - f|))}` where `g`
/// is the empirical risk minimizer. Members are class indices, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostErmSet {
    #[serde(rename = "erm")]
    pub erm_index: usize,
    pub members: Vec<usize>,
    pub alpha: f64,
    pub c: f64,
}

impl AlmostErmSet {
    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Almost-ERM set on sample `s`. `d` is the class's exact VC dimension
/// (clamped to at least 1 so that `alpha` is defined for singleton classes).
pub fn almost_erm_set(class: &HypothesisClass, s: &LabeledSample, delta: f64, c: f64) -> Result<AlmostErmSet> {
    check_sample(class, s)?;
    almost_erm_set_from_counts(class, &s.counts(), delta, c)
}

pub(crate) fn almost_erm_set_from_counts(
    class: &HypothesisClass,
    counts: &AtomCounts,
    delta: f64,
    c: f64,
) -> Result<AlmostErmSet> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::param("c", c, "must be finite and nonnegative"));
    }
    let d = class.vc_dim()?.max(1);
    let n = counts.n as usize;
    let a = alpha(n, d, delta)?;
    let g_idx = erm_index_from_counts(class, counts);
    let g = class.member(g_idx);
    let g_err = counts.errors(g);
    let nf = n as f64;
    let admits = |f: &Hypothesis| {
        let gap = (counts.errors(f) - g_err) as f64 / nf;
        let dist = counts.disagreements(g, f) as f64 / nf;
        gap <= c * (a * a + a * dist.sqrt())
    };
    let members: Vec<usize> = if class.len() > 2048 {
        (0..class.len())
            .into_par_iter()
            .filter(|&i| admits(class.member(i)))
            .collect()
    } else {
        (0..class.len()).filter(|&i| admits(class.member(i))).collect()
    };
    debug_assert!(members.binary_search(&g_idx).is_ok());
    Ok(AlmostErmSet {
        erm_index: g_idx,
        members,
        alpha: a,
        c,
    })
}
