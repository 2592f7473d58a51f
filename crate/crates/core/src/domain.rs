//! Finite-domain model: hypotheses, abstaining hypotheses, distributions,
//! labeled samples and the exact risk functionals built on them.
//!
//! The instance space is `{0, .., m-1}`. Every population quantity is a
//! finite sum over atoms, so identities between risks can be checked to
//! machine precision instead of statistically.

use std::cmp::Ordering;
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(weights) - 1` accepted by [`FiniteDistribution::new`].
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// An atom of the instance space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DomainPoint(pub usize);

// ---------------------------------------------------------------------------
// Hypothesis
// ---------------------------------------------------------------------------

/// A binary predictor over `{0, .., m-1}`, stored as packed bits.
///
/// Atom `x` lives in word `x / 64` at bit `63 - x % 64`, so comparing the word
/// vectors orders hypotheses exactly like their `"0110"` string forms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hypothesis {
    words: Vec<u64>,
    m: usize,
}

#[inline]
fn word_bit(x: usize) -> (usize, u64) {
    (x / 64, 1u64 << (63 - (x % 64)))
}

impl Hypothesis {
    pub fn zeros(m: usize) -> Self {
        Hypothesis {
            words: vec![0; m.div_ceil(64)],
            m,
        }
    }

    pub fn from_fn(m: usize, mut label: impl FnMut(usize) -> bool) -> Self {
        let mut h = Self::zeros(m);
        for x in 0..m {
            if label(x) {
                h.set(x, true);
            }
        }
        h
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self::from_fn(bits.len(), |x| bits[x])
    }

    /// Hypothesis labelling exactly `ones` with 1.
    pub fn indicator(m: usize, ones: &[usize]) -> Result<Self> {
        let mut h = Self::zeros(m);
        for &x in ones {
            if x >= m {
                return Err(Error::Invalid(format!("atom {x} outside domain of size {m}")));
            }
            h.set(x, true);
        }
        Ok(h)
    }

    /// Parses a `0`/`1` string whose length is the domain size.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::Invalid(format!(
                        "hypothesis string contains `{other}`, expected 0/1"
                    )))
                }
            }
        }
        Ok(Self::from_bits(&bits))
    }

    pub fn domain_size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, x: usize) -> bool {
        debug_assert!(x < self.m);
        let (w, b) = word_bit(x);
        self.words[w] & b != 0
    }

    pub fn set(&mut self, x: usize, value: bool) {
        assert!(x < self.m, "atom {x} outside domain of size {}", self.m);
        let (w, b) = word_bit(x);
        if value {
            self.words[w] |= b;
        } else {
            self.words[w] &= !b;
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).filter(move |&x| self.get(x))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub(crate) fn check_same_domain(&self, other: &Hypothesis) -> Result<()> {
        if self.m != other.m {
            return Err(Error::DomainMismatch {
                expected: self.m,
                found: other.m,
            });
        }
        Ok(())
    }

    /// Number of atoms where the two hypotheses disagree.
    pub fn hamming(&self, other: &Hypothesis) -> Result<usize> {
        self.check_same_domain(other)?;
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &Hypothesis) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Atoms (ascending) where the two hypotheses disagree.
    pub fn disagreement(&self, other: &Hypothesis) -> Result<Vec<usize>> {
        self.check_same_domain(other)?;
        Ok((0..self.m).filter(|&x| self.get(x) != other.get(x)).collect())
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.m).map(|x| if self.get(x) { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hypothesis({})", self.to_bit_string())
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

// ---------------------------------------------------------------------------
// Abstaining hypothesis
// ---------------------------------------------------------------------------

/// Value of a `{0, 1, *}`-valued predictor at one atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prediction {
    Zero,
    One,
    Abstain,
}

impl Prediction {
    pub fn from_bit(b: bool) -> Self {
        if b {
            Prediction::One
        } else {
            Prediction::Zero
        }
    }

    /// Real value with `*` read as 1/2.
    pub fn as_real(self) -> f64 {
        match self {
            Prediction::Zero => 0.0,
            Prediction::One => 1.0,
            Prediction::Abstain => 0.5,
        }
    }

    fn as_char(self) -> char {
        match self {
            Prediction::Zero => '0',
            Prediction::One => '1',
            Prediction::Abstain => '*',
        }
    }
}

/// A predictor taking values in `{0, 1, *}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AbstainingHypothesis {
    values: Vec<Prediction>,
}

impl AbstainingHypothesis {
    pub fn new(values: Vec<Prediction>) -> Self {
        AbstainingHypothesis { values }
    }

    /// Abstains everywhere.
    pub fn abstain_all(m: usize) -> Self {
        AbstainingHypothesis {
            values: vec![Prediction::Abstain; m],
        }
    }

    /// Parses strings like `"11*0"`.
    pub fn parse(s: &str) -> Result<Self> {
        let values = s
            .chars()
            .map(|c| match c {
                '0' => Ok(Prediction::Zero),
                '1' => Ok(Prediction::One),
                '*' => Ok(Prediction::Abstain),
                other => Err(Error::Invalid(format!(
                    "abstaining hypothesis contains `{other}`, expected 0/1/*"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AbstainingHypothesis { values })
    }

    pub fn domain_size(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn get(&self, x: usize) -> Prediction {
        self.values[x]
    }

    pub fn values(&self) -> &[Prediction] {
        &self.values
    }

    pub fn abstain_atoms(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&x| self.values[x] == Prediction::Abstain)
            .collect()
    }

    pub fn abstain_count(&self) -> usize {
        self.values
            .iter()
            .filter(|v| **v == Prediction::Abstain)
            .count()
    }

    pub fn is_binary(&self) -> bool {
        self.abstain_count() == 0
    }

    /// The binary hypothesis, if no atom abstains.
    pub fn to_hypothesis(&self) -> Option<Hypothesis> {
        if !self.is_binary() {
            return None;
        }
        Some(Hypothesis::from_fn(self.values.len(), |x| {
            self.values[x] == Prediction::One
        }))
    }

    /// Probability mass of the abstention region.
    pub fn abstention_mass(&self, dist: &FiniteDistribution) -> Result<f64> {
        check_dist_domain(dist, self.domain_size())?;
        Ok(self
            .abstain_atoms()
            .into_iter()
            .map(|x| dist.weights[x])
            .fold(0.0, |acc, w| acc + w))
    }
}

impl From<&Hypothesis> for AbstainingHypothesis {
    fn from(f: &Hypothesis) -> Self {
        AbstainingHypothesis {
            values: (0..f.domain_size())
                .map(|x| Prediction::from_bit(f.get(x)))
                .collect(),
        }
    }
}

impl fmt::Debug for AbstainingHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AbstainingHypothesis({self})")
    }
}

impl fmt::Display for AbstainingHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.values.iter().map(|v| v.as_char()).collect();
        f.write_str(&s)
    }
}

// ---------------------------------------------------------------------------
// Distribution
// ---------------------------------------------------------------------------

/// Joint law of `(X, Y)` on a finite domain: marginal weights plus
/// `eta1[x] = Pr(Y = 1 | X = x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionDoc", into = "DistributionDoc")]
pub struct FiniteDistribution {
    weights: Vec<f64>,
    eta1: Vec<f64>,
    /// `sum(weights) - 1` as supplied; bounded by [`WEIGHT_TOLERANCE`].
    correction: f64,
}

#[derive(Serialize, Deserialize)]
struct DistributionDoc {
    m: usize,
    weights: Vec<f64>,
    eta1: Vec<f64>,
}

impl TryFrom<DistributionDoc> for FiniteDistribution {
    type Error = Error;

    fn try_from(doc: DistributionDoc) -> Result<Self> {
        if doc.weights.len() != doc.m || doc.eta1.len() != doc.m {
            return Err(Error::InvalidDistribution(format!(
                "m = {} but weights has {} entries and eta1 has {}",
                doc.m,
                doc.weights.len(),
                doc.eta1.len()
            )));
        }
        FiniteDistribution::new(doc.weights, doc.eta1)
    }
}

impl From<FiniteDistribution> for DistributionDoc {
    fn from(d: FiniteDistribution) -> Self {
        DistributionDoc {
            m: d.weights.len(),
            weights: d.weights,
            eta1: d.eta1,
        }
    }
}

impl FiniteDistribution {
    /// Validates weights and conditional label probabilities.
    ///
    /// Weights are kept bit-for-bit as given (so JSON round trips are exact);
    /// the deviation of their sum from 1 is recorded in [`Self::correction`].
    pub fn new(weights: Vec<f64>, eta1: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        if weights.len() != eta1.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights but {} eta1 entries",
                weights.len(),
                eta1.len()
            )));
        }
        if let Some((x, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "weight of atom {x} is {w}, must be finite and nonnegative"
            )));
        }
        if let Some((x, e)) = eta1
            .iter()
            .enumerate()
            .find(|(_, e)| !(0.0..=1.0).contains(*e))
        {
            return Err(Error::InvalidDistribution(format!(
                "eta1 of atom {x} is {e}, must lie in [0, 1]"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, must sum to 1 within {WEIGHT_TOLERANCE:e}"
            )));
        }
        Ok(FiniteDistribution {
            weights,
            eta1,
            correction: sum - 1.0,
        })
    }

    /// Rescales nonnegative weights by their sum before validating.
    pub fn normalized(weights: Vec<f64>, eta1: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, cannot normalize"
            )));
        }
        let scaled = weights.iter().map(|w| w / sum).collect();
        Self::new(scaled, eta1)
    }

    /// Uniform marginal with the given conditional label probabilities.
    pub fn uniform(eta1: Vec<f64>) -> Result<Self> {
        let m = eta1.len();
        Self::normalized(vec![1.0; m], eta1)
    }

    pub fn domain_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eta1(&self) -> &[f64] {
        &self.eta1
    }

    pub fn correction(&self) -> f64 {
        self.correction
    }

    /// Mass of a set of atoms.
    pub fn mass(&self, atoms: &[usize]) -> f64 {
        atoms.iter().fold(0.0, |acc, &x| acc + self.weights[x])
    }
}

fn check_dist_domain(dist: &FiniteDistribution, m: usize) -> Result<()> {
    if dist.domain_size() != m {
        return Err(Error::DomainMismatch {
            expected: dist.domain_size(),
            found: m,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: usize,
    pub y: bool,
}

/// A finite labeled sample over a domain of size `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SampleDoc", into = "SampleDoc")]
pub struct LabeledSample {
    m: usize,
    items: Vec<LabeledPoint>,
}

#[derive(Serialize, Deserialize)]
struct SampleDoc {
    m: usize,
    items: Vec<(usize, u8)>,
}

impl TryFrom<SampleDoc> for LabeledSample {
    type Error = Error;

    fn try_from(doc: SampleDoc) -> Result<Self> {
        let items = doc
            .items
            .into_iter()
            .map(|(x, y)| match y {
                0 | 1 => Ok(LabeledPoint { x, y: y == 1 }),
                _ => Err(Error::Invalid(format!("label {y} is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledSample::new(doc.m, items)
    }
}

impl From<LabeledSample> for SampleDoc {
    fn from(s: LabeledSample) -> Self {
        SampleDoc {
            m: s.m,
            items: s.items.iter().map(|p| (p.x, p.y as u8)).collect(),
        }
    }
}

impl LabeledSample {
    pub fn new(m: usize, items: Vec<LabeledPoint>) -> Result<Self> {
        if let Some(p) = items.iter().find(|p| p.x >= m) {
            return Err(Error::Invalid(format!(
                "sample atom {} outside domain of size {m}",
                p.x
            )));
        }
        Ok(LabeledSample { m, items })
    }

    /// Builds a sample from `(x, y)` pairs with `y` in `{0, 1}`.
    pub fn from_pairs(m: usize, pairs: &[(usize, u8)]) -> Result<Self> {
        SampleDoc {
            m,
            items: pairs.to_vec(),
        }
        .try_into()
    }

    pub fn empty(m: usize) -> Self {
        LabeledSample {
            m,
            items: Vec::new(),
        }
    }

    pub fn domain_size(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[LabeledPoint] {
        &self.items
    }

    /// Contiguous sub-sample `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> LabeledSample {
        LabeledSample {
            m: self.m,
            items: self.items[start..end].to_vec(),
        }
    }

    /// Sample with item `i` removed.
    pub fn without(&self, i: usize) -> LabeledSample {
        let mut items = self.items.clone();
        items.remove(i);
        LabeledSample { m: self.m, items }
    }

    pub fn counts(&self) -> AtomCounts {
        AtomCounts::from_sample(self)
    }
}

/// Per-atom label counts of a sample; every empirical functional of a
/// hypothesis factors through these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomCounts {
    pub ones: Vec<u64>,
    pub zeros: Vec<u64>,
    pub n: u64,
}

impl AtomCounts {
    pub fn from_sample(s: &LabeledSample) -> Self {
        let mut ones = vec![0u64; s.m];
        let mut zeros = vec![0u64; s.m];
        for p in &s.items {
            if p.y {
                ones[p.x] += 1;
            } else {
                zeros[p.x] += 1;
            }
        }
        AtomCounts {
            ones,
            zeros,
            n: s.items.len() as u64,
        }
    }

    #[inline]
    pub fn visits(&self, x: usize) -> u64 {
        self.ones[x] + self.zeros[x]
    }

    /// Number of sample items misclassified by `f`.
    pub fn errors(&self, f: &Hypothesis) -> u64 {
        (0..f.domain_size())
            .map(|x| if f.get(x) { self.zeros[x] } else { self.ones[x] })
            .sum()
    }

    /// Number of sample items on which `f` and `g` disagree.
    pub fn disagreements(&self, f: &Hypothesis, g: &Hypothesis) -> u64 {
        (0..f.domain_size())
            .filter(|&x| f.get(x) != g.get(x))
            .map(|x| self.visits(x))
            .sum()
    }

    /// `(committed errors, abstentions)` of an abstaining predictor.
    pub fn reject_counts(&self, g: &AbstainingHypothesis) -> (u64, u64) {
        let mut err = 0;
        let mut abst = 0;
        for x in 0..g.domain_size() {
            match g.get(x) {
                Prediction::One => err += self.zeros[x],
                Prediction::Zero => err += self.ones[x],
                Prediction::Abstain => abst += self.visits(x),
            }
        }
        (err, abst)
    }
}

/// Deterministic RNG stream: `(seed, stream)` pairs never overlap.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` i.i.d. labeled points from `dist`.
pub fn sample<R: Rng + ?Sized>(dist: &FiniteDistribution, n: usize, rng: &mut R) -> LabeledSample {
    let index = WeightedIndex::new(&dist.weights)
        .expect("validated distribution has positive total weight");
    let items = (0..n)
        .map(|_| {
            let x = index.sample(rng);
            let y = rng.gen::<f64>() < dist.eta1[x];
            LabeledPoint { x, y }
        })
        .collect();
    LabeledSample {
        m: dist.domain_size(),
        items,
    }
}

/// [`sample`] driven by a fresh stream derived from `seed`.
pub fn sample_seeded(dist: &FiniteDistribution, n: usize, seed: u64) -> LabeledSample {
    sample(dist, n, &mut rng_stream(seed, 0))
}

// ---------------------------------------------------------------------------
// Risk functionals
// ---------------------------------------------------------------------------

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::param("p", p, "must lie in [0, 1/2]"));
    }
    Ok(())
}

/// `R(f) = Pr(f(X) != Y)`.
pub fn population_risk(f: &Hypothesis, dist: &FiniteDistribution) -> Result<f64> {
    check_dist_domain(dist, f.domain_size())?;
    Ok((0..f.domain_size())
        .map(|x| {
            let e = dist.eta1[x];
            dist.weights[x] * if f.get(x) { 1.0 - e } else { e }
        })
        .sum())
}

/// Fraction of sample items misclassified by `f`.
pub fn empirical_risk(f: &Hypothesis, s: &LabeledSample) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if s.m != f.domain_size() {
        return Err(Error::DomainMismatch {
            expected: s.m,
            found: f.domain_size(),
        });
    }
    let wrong = s.items.iter().filter(|p| f.get(p.x) != p.y).count();
    Ok(wrong as f64 / s.len() as f64)
}

/// Misclassification mass on committed atoms and the abstention mass.
fn reject_masses(g: &AbstainingHypothesis, dist: &FiniteDistribution) -> (f64, f64) {
    let mut err = 0.0;
    let mut abst = 0.0;
    for x in 0..g.domain_size() {
        let w = dist.weights[x];
        match g.get(x) {
            Prediction::One => err += w * (1.0 - dist.eta1[x]),
            Prediction::Zero => err += w * dist.eta1[x],
            Prediction::Abstain => abst += w,
        }
    }
    (err, abst)
}

/// Chow's risk `R^p`: unit cost for committed mistakes, `1/2 - p` per
/// abstention.
pub fn population_reject_risk(
    g: &AbstainingHypothesis,
    dist: &FiniteDistribution,
    p: f64,
) -> Result<f64> {
    check_p(p)?;
    check_dist_domain(dist, g.domain_size())?;
    let (err, abst) = reject_masses(g, dist);
    Ok(err + (0.5 - p) * abst)
}

/// Empirical `R^p_n` on a sample.
pub fn empirical_reject_risk(g: &AbstainingHypothesis, s: &LabeledSample, p: f64) -> Result<f64> {
    check_p(p)?;
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if s.m != g.domain_size() {
        return Err(Error::DomainMismatch {
            expected: s.m,
            found: g.domain_size(),
        });
    }
    let mut err = 0u64;
    let mut abst = 0u64;
    for pt in &s.items {
        match g.get(pt.x) {
            Prediction::Abstain => abst += 1,
            v => err += (v == Prediction::One) as u64 ^ pt.y as u64,
        }
    }
    Ok((err as f64 + (0.5 - p) * abst as f64) / s.len() as f64)
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", q, "must be finite and at least 1"));
    }
    Ok(())
}

/// `l_q(g) = E|g(X) - Y|^q` with `*` read as 1/2.
pub fn lq_risk(g: &AbstainingHypothesis, dist: &FiniteDistribution, q: f64) -> Result<f64> {
    check_q(q)?;
    check_dist_domain(dist, g.domain_size())?;
    Ok((0..g.domain_size())
        .map(|x| {
            let v = g.get(x).as_real();
            let e = dist.eta1[x];
            dist.weights[x] * (e * (v - 1.0).abs().powf(q) + (1.0 - e) * v.abs().powf(q))
        })
        .sum())
}

/// Empirical `l_q` risk, summed item by item.
pub fn empirical_lq_risk(g: &AbstainingHypothesis, s: &LabeledSample, q: f64) -> Result<f64> {
    check_q(q)?;
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if s.m != g.domain_size() {
        return Err(Error::DomainMismatch {
            expected: s.m,
            found: g.domain_size(),
        });
    }
    let total: f64 = s
        .items
        .iter()
        .map(|pt| {
            let y = if pt.y { 1.0 } else { 0.0 };
            (g.get(pt.x).as_real() - y).abs().powf(q)
        })
        .sum();
    Ok(total / s.len() as f64)
}

/// `P|f - g|`: disagreement mass.
pub fn population_l1_distance(f: &Hypothesis, g: &Hypothesis, dist: &FiniteDistribution) -> Result<f64> {
    f.check_same_domain(g)?;
    check_dist_domain(dist, f.domain_size())?;
    Ok((0..f.domain_size())
        .filter(|&x| f.get(x) != g.get(x))
        .fold(0.0, |acc, x| acc + dist.weights[x]))
}

/// `P_n|f - g|`: fraction of sample items where `f` and `g` disagree.
pub fn empirical_l1_distance(f: &Hypothesis, g: &Hypothesis, s: &LabeledSample) -> Result<f64> {
    f.check_same_domain(g)?;
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if s.m != f.domain_size() {
        return Err(Error::DomainMismatch {
            expected: s.m,
            found: f.domain_size(),
        });
    }
    let d = s.items.iter().filter(|p| f.get(p.x) != g.get(p.x)).count();
    Ok(d as f64 / s.len() as f64)
}

/// `1[Pr(Y = 1 | x) >= 1/2]`; ties go to label 1.
pub fn bayes_classifier(dist: &FiniteDistribution) -> Hypothesis {
    Hypothesis::from_fn(dist.domain_size(), |x| dist.eta1[x] >= 0.5)
}

pub fn bayes_risk(dist: &FiniteDistribution) -> f64 {
    dist.weights
        .iter()
        .zip(&dist.eta1)
        .map(|(w, e)| w * e.min(1.0 - e))
        .sum()
}

/// Massart margin: smallest `|2 eta1(x) - 1|` over atoms of positive mass.
pub fn margin_parameter(dist: &FiniteDistribution) -> f64 {
    dist.weights
        .iter()
        .zip(&dist.eta1)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, e)| (2.0 * e - 1.0).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Total order used for deterministic tie-breaking: lower index wins.
pub(crate) fn argmin_by_key<T: PartialOrd>(values: impl IntoIterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match &best {
            Some((_, b)) if v.partial_cmp(b) != Some(Ordering::Less) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_atom() -> FiniteDistribution {
        FiniteDistribution::uniform(vec![1.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn h(s: &str) -> Hypothesis {
        Hypothesis::parse(s).unwrap()
    }

    fn a(s: &str) -> AbstainingHypothesis {
        AbstainingHypothesis::parse(s).unwrap()
    }

    #[test]
    fn bit_order_matches_string_order() {
        let mut hs = [h("0110"), h("1000"), h("0001"), h("0111")];
        hs.sort();
        let strs: Vec<_> = hs.iter().map(|x| x.to_bit_string()).collect();
        assert_eq!(strs, ["0001", "0110", "0111", "1000"]);
        let wide = Hypothesis::from_fn(130, |x| x == 129);
        assert!(Hypothesis::zeros(130) < wide);
        assert_eq!(wide.to_bit_string().len(), 130);
    }

    #[test]
    fn sampling_degenerate_and_empty() {
        let d = FiniteDistribution::new(vec![1.0], vec![1.0]).unwrap();
        let s = sample_seeded(&d, 3, 7);
        assert_eq!(s, LabeledSample::from_pairs(1, &[(0, 1), (0, 1), (0, 1)]).unwrap());
        assert!(sample_seeded(&four_atom(), 0, 1).is_empty());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = four_atom();
        assert_eq!(sample_seeded(&d, 50, 3), sample_seeded(&d, 50, 3));
        assert_ne!(sample_seeded(&d, 50, 3), sample_seeded(&d, 50, 4));
    }

    #[test]
    fn sampling_frequencies_match_marginal() {
        let s = sample_seeded(&four_atom(), 10_000, 11);
        let c = s.counts();
        for x in 0..4 {
            let freq = c.visits(x) as f64 / 10_000.0;
            assert!((freq - 0.25).abs() <= 0.02, "atom {x}: {freq}");
        }
        // labels follow eta1 exactly for deterministic atoms
        assert_eq!(c.zeros[0] + c.zeros[1] + c.zeros[2], 0);
        assert_eq!(c.ones[3], 0);
    }

    #[test]
    fn population_risk_examples() {
        let d = four_atom();
        assert_eq!(population_risk(&h("1111"), &d).unwrap(), 0.25);
        assert_eq!(population_risk(&h("0000"), &d).unwrap(), 0.75);
        let noisy = FiniteDistribution::uniform(vec![0.3, 0.7, 0.5, 0.9]).unwrap();
        let bayes = bayes_classifier(&noisy);
        let r = population_risk(&bayes, &noisy).unwrap();
        assert!((r - bayes_risk(&noisy)).abs() < 1e-15);
        assert!(population_risk(&h("111"), &d).is_err());
    }

    #[test]
    fn empirical_risk_examples() {
        let s = LabeledSample::from_pairs(4, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(empirical_risk(&h("0000"), &s).unwrap(), 0.5);
        let f = h("1010");
        let consistent = LabeledSample::from_pairs(4, &[(0, 1), (1, 0), (2, 1), (3, 0)]).unwrap();
        assert_eq!(empirical_risk(&f, &consistent).unwrap(), 0.0);
        let wrong = LabeledSample::from_pairs(4, &[(1, 1); 4]).unwrap();
        assert_eq!(empirical_risk(&f, &wrong).unwrap(), 1.0);
        assert!(matches!(
            empirical_risk(&f, &LabeledSample::empty(4)),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn reject_risk_examples() {
        let d = four_atom();
        let all = AbstainingHypothesis::abstain_all(4);
        assert_eq!(population_reject_risk(&all, &d, 0.1).unwrap(), 0.4);
        assert_eq!(population_reject_risk(&a("111*"), &d, 0.25).unwrap(), 0.0625);
        let f = h("1101");
        assert_eq!(
            population_reject_risk(&(&f).into(), &d, 0.0).unwrap(),
            population_risk(&f, &d).unwrap()
        );
        assert!(population_reject_risk(&all, &d, 0.6).is_err());
        assert!(population_reject_risk(&all, &d, -0.1).is_err());
    }

    #[test]
    fn empirical_reject_risk_examples() {
        let s = LabeledSample::from_pairs(4, &[(0, 1), (1, 1), (2, 1), (3, 0)]).unwrap();
        assert_eq!(empirical_reject_risk(&a("111*"), &s, 0.25).unwrap(), 0.0625);
        let f = h("0110");
        for p in [0.0, 0.1, 0.5] {
            assert_eq!(
                empirical_reject_risk(&(&f).into(), &s, p).unwrap(),
                empirical_risk(&f, &s).unwrap()
            );
        }
        assert_eq!(
            empirical_reject_risk(&AbstainingHypothesis::abstain_all(4), &s, 0.0).unwrap(),
            0.5
        );
        assert!(empirical_reject_risk(&a("****"), &LabeledSample::empty(4), 0.0).is_err());
    }

    #[test]
    fn lq_risk_examples() {
        let d = FiniteDistribution::uniform(vec![0.2, 0.9, 0.5, 0.0]).unwrap();
        let all = AbstainingHypothesis::abstain_all(4);
        assert!((lq_risk(&all, &d, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((lq_risk(&all, &d, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let f = h("0110");
        for q in [1.0, 1.3, 2.0, 3.5] {
            let diff = lq_risk(&(&f).into(), &d, q).unwrap() - population_risk(&f, &d).unwrap();
            assert!(diff.abs() < 1e-15);
        }
        assert!(lq_risk(&all, &d, 0.5).is_err());
    }

    #[test]
    fn l1_distance_examples() {
        let d = four_atom();
        assert_eq!(population_l1_distance(&h("0000"), &h("1111"), &d).unwrap(), 1.0);
        assert_eq!(population_l1_distance(&h("1111"), &h("1110"), &d).unwrap(), 0.25);
        assert_eq!(population_l1_distance(&h("1011"), &h("1011"), &d).unwrap(), 0.0);
        let s = LabeledSample::from_pairs(4, &[(0, 1), (3, 1), (3, 0)]).unwrap();
        let e = empirical_l1_distance(&h("1111"), &h("1110"), &s).unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-15);
        assert!(population_l1_distance(&h("000"), &h("1111"), &d).is_err());
    }

    #[test]
    fn bayes_and_margin() {
        assert_eq!(bayes_classifier(&four_atom()), h("1110"));
        let half = FiniteDistribution::uniform(vec![0.5, 0.5]).unwrap();
        assert_eq!(bayes_classifier(&half), h("11"));
        let d = FiniteDistribution::uniform(vec![0.3, 0.7]).unwrap();
        assert_eq!(bayes_classifier(&d), h("01"));

        assert_eq!(margin_parameter(&four_atom()), 1.0);
        let flat = FiniteDistribution::uniform(vec![0.75; 3]).unwrap();
        assert_eq!(margin_parameter(&flat), 0.5);
        let tie = FiniteDistribution::uniform(vec![1.0, 0.5]).unwrap();
        assert_eq!(margin_parameter(&tie), 0.0);
        // zero-weight atoms are ignored
        let masked = FiniteDistribution::new(vec![1.0, 0.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(margin_parameter(&masked), 1.0);
    }

    #[test]
    fn distribution_validation() {
        let err = FiniteDistribution::new(vec![0.45, 0.45], vec![0.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("sum"));
        assert!(FiniteDistribution::new(vec![0.5, 0.5], vec![0.0, 1.2]).is_err());
        assert!(FiniteDistribution::new(vec![1.5, -0.5], vec![0.0, 1.0]).is_err());
        let ok = FiniteDistribution::new(vec![0.5, 0.5 + 1e-13], vec![0.0, 1.0]).unwrap();
        assert!(ok.correction() > 0.0);
    }

    #[test]
    fn distribution_json_round_trip_is_bit_exact() {
        let d = FiniteDistribution::normalized(vec![0.1, 0.7, 0.2, 1.0 / 3.0], vec![0.3, 1.0 / 7.0, 0.0, 1.0])
            .unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let back: FiniteDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        for (a, b) in d.weights().iter().zip(back.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(serde_json::from_str::<FiniteDistribution>(r#"{"m":2,"weights":[0.5,0.4],"eta1":[0,1]}"#).is_err());
        assert!(serde_json::from_str::<FiniteDistribution>(r#"{"m":3,"weights":[0.5,0.5],"eta1":[0,1]}"#).is_err());
    }

    #[test]
    fn atom_counts_agree_with_direct_sums() {
        let s = sample_seeded(&FiniteDistribution::uniform(vec![0.2, 0.6, 0.9, 0.4, 0.5]).unwrap(), 97, 5);
        let c = s.counts();
        for f in [h("00000"), h("10110"), h("11111")] {
            let direct = empirical_risk(&f, &s).unwrap();
            assert_eq!(direct, c.errors(&f) as f64 / 97.0);
        }
        let g = a("1*0*1");
        let (err, abst) = c.reject_counts(&g);
        let direct = empirical_reject_risk(&g, &s, 0.25).unwrap();
        assert!((direct - (err as f64 + 0.25 * abst as f64) / 97.0).abs() < 1e-15);
    }
}
