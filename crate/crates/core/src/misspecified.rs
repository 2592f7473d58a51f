//! Turning the abstaining learner into binary classifiers when the class is
//! misspecified: a majority-vote patch on the abstention region, a
//! covering-net patch driven by `D_PX(n)`, and the memorizing learner with
//! its exact leave-one-out error.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::class::HypothesisClass;
use crate::domain::{argmin_by_key, Hypothesis, LabeledSample, Prediction};
use crate::erm::{check_delta, clamped_ln};
use crate::error::{Error, Result};
use crate::reject::{abstaining_learner, AbstainerModel};

/// Largest support for which the cube `{0,1}^support` is enumerated.
pub const COVER_ATOM_BUDGET: usize = 20;

/// Supports up to this size get a provably minimal cover.
pub const EXACT_COVER_ATOMS: usize = 4;

/// Cap on distance evaluations spent building one greedy cover.
pub const COVER_WORK_BUDGET: u64 = 2_000_000_000;

/// Slack for comparing sums of marginal weights against a radius.
pub const COVER_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_C1: f64 = 1.0 / 128.0;
pub const DEFAULT_C2: f64 = 128.0;

// ---------------------------------------------------------------------------
// Majority vote
// ---------------------------------------------------------------------------

/// Per-atom label counts with the vote `1` iff ones outnumber zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MajorityTable {
    pub ones: Vec<u64>,
    pub zeros: Vec<u64>,
}

impl MajorityTable {
    /// Ties and unseen atoms vote 0.
    pub fn vote(&self, x: usize) -> bool {
        self.ones[x] > self.zeros[x]
    }

    pub fn to_hypothesis(&self) -> Hypothesis {
        Hypothesis::from_fn(self.ones.len(), |x| self.vote(x))
    }
}

pub fn majority_vote(s: &LabeledSample) -> MajorityTable {
    let counts = s.counts();
    MajorityTable {
        ones: counts.ones,
        zeros: counts.zeros,
    }
}

fn split_thirds(class: &HypothesisClass, s: &LabeledSample) -> Result<(LabeledSample, LabeledSample)> {
    if s.is_empty() || !s.len().is_multiple_of(3) {
        return Err(Error::Invalid(format!(
            "sample size {} must be a positive multiple of 3",
            s.len()
        )));
    }
    if s.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: s.domain_size(),
        });
    }
    let n = s.len() / 3;
    Ok((s.slice(0, 2 * n), s.slice(2 * n, 3 * n)))
}

fn patch(stage: &AbstainerModel, fill: impl Fn(usize) -> bool) -> Hypothesis {
    Hypothesis::from_fn(stage.values.domain_size(), |x| match stage.values.get(x) {
        Prediction::One => true,
        Prediction::Zero => false,
        Prediction::Abstain => fill(x),
    })
}

/// Abstaining learner with `p = h/2` on the first two thirds, majority vote of
/// the last third on its abstention atoms. `h` may be a lower bound on the
/// true margin.
pub fn finite_diameter_learner(
    class: &HypothesisClass,
    s: &LabeledSample,
    delta: f64,
    h: f64,
    c: f64,
) -> Result<Hypothesis> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::param("h", h, "must lie in (0, 1]"));
    }
    let (stage_sample, vote_sample) = split_thirds(class, s)?;
    let stage = abstaining_learner(class, &stage_sample, delta, h / 2.0, c)?;
    let table = majority_vote(&vote_sample);
    Ok(patch(&stage, |x| table.vote(x)))
}

// ---------------------------------------------------------------------------
// Covers of the disagreement cube
// ---------------------------------------------------------------------------

/// A radius-cover of `{0,1}^support` under `L1(P_X)`. Centers are zero off
/// the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverSpec {
    pub support: Vec<usize>,
    pub radius: f64,
    #[serde(serialize_with = "serialize_centers")]
    pub centers: Vec<Hypothesis>,
    /// True when no smaller cover exists.
    pub exact: bool,
}

fn serialize_centers<S: Serializer>(centers: &[Hypothesis], ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(centers.iter().map(|c| c.to_bit_string()))
}

impl CoverSpec {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Cube over `k` atoms with per-coordinate weights; element `mask` sets
/// coordinate `i` when bit `i` is set.
struct Cube {
    weights: Vec<f64>,
}

impl Cube {
    fn size(&self) -> usize {
        1usize << self.weights.len()
    }

    fn mass(&self, mask: usize) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .fold(0.0, |acc, (_, w)| acc + w)
    }

    /// Masks `e` with `mass(e) <= radius`; the ball around `c` is `{c ^ e}`.
    fn ball_offsets(&self, radius: f64) -> Vec<usize> {
        (0..self.size())
            .filter(|&e| self.mass(e) <= radius + COVER_TOLERANCE)
            .collect()
    }
}

fn cube_for(support: &[usize], weights: &[f64]) -> Result<Cube> {
    if support.len() > COVER_ATOM_BUDGET {
        return Err(Error::Budget(format!(
            "cover support of {} atoms exceeds {COVER_ATOM_BUDGET}",
            support.len()
        )));
    }
    let mut seen = vec![false; weights.len()];
    for &x in support {
        if x >= weights.len() {
            return Err(Error::DomainMismatch {
                expected: weights.len(),
                found: x + 1,
            });
        }
        if std::mem::replace(&mut seen[x], true) {
            return Err(Error::Invalid(format!("atom {x} repeated in cover support")));
        }
    }
    Ok(Cube {
        weights: support.iter().map(|&x| weights[x]).collect(),
    })
}

/// Minimal cover by increasing-size search over center subsets; the first
/// cover found in lexicographic order is returned.
fn exact_cover(cube: &Cube, offsets: &[usize]) -> Vec<usize> {
    let size = cube.size();
    let full: u32 = if size == 32 { u32::MAX } else { (1u32 << size) - 1 };
    let ball: Vec<u32> = (0..size)
        .map(|c| offsets.iter().fold(0u32, |acc, &e| acc | 1 << (c ^ e)))
        .collect();
    for k in 1..=size {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            if idx.iter().fold(0u32, |acc, &i| acc | ball[i]) == full {
                return idx;
            }
            let Some(i) = (0..k).rev().find(|&i| idx[i] != size - k + i) else {
                break;
            };
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    unreachable!("the whole cube is always a cover")
}

/// Lazy greedy max-coverage; ties go to the lowest mask.
fn greedy_cover(cube: &Cube, offsets: &[usize]) -> Result<Vec<usize>> {
    let size = cube.size();
    let mut covered = vec![false; size];
    let mut remaining = size;
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
        (0..size).map(|c| (offsets.len(), Reverse(c))).collect();
    let mut centers = Vec::new();
    let mut work: u64 = 0;
    while remaining > 0 {
        let (_, Reverse(c)) = heap.pop().expect("uncovered elements keep their own centers alive");
        work += offsets.len() as u64;
        if work > COVER_WORK_BUDGET {
            return Err(Error::Budget(format!(
                "greedy cover over {} atoms exceeded {COVER_WORK_BUDGET} steps",
                cube.weights.len()
            )));
        }
        let gain = offsets.iter().filter(|&&e| !covered[c ^ e]).count();
        if gain == 0 {
            continue;
        }
        let stays_best = match heap.peek() {
            None => true,
            Some(&top) => (gain, Reverse(c)) > top,
        };
        if stays_best {
            for &e in offsets {
                if !std::mem::replace(&mut covered[c ^ e], true) {
                    remaining -= 1;
                }
            }
            centers.push(c);
        } else {
            heap.push((gain, Reverse(c)));
        }
    }
    Ok(centers)
}

fn center_hypothesis(m: usize, support: &[usize], mask: usize) -> Hypothesis {
    let mut h = Hypothesis::zeros(m);
    for (i, &x) in support.iter().enumerate() {
        if mask >> i & 1 == 1 {
            h.set(x, true);
        }
    }
    h
}

/// Radius-cover of the cube on `support` under the marginal `weights`.
pub fn l1_cover(support: &[usize], weights: &[f64], radius: f64) -> Result<CoverSpec> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", radius, "must be finite and nonnegative"));
    }
    let cube = cube_for(support, weights)?;
    let masks = cover_masks(&cube, radius)?;
    Ok(CoverSpec {
        support: support.to_vec(),
        radius,
        centers: masks
            .iter()
            .map(|&mask| center_hypothesis(weights.len(), support, mask))
            .collect(),
        exact: support.len() <= EXACT_COVER_ATOMS,
    })
}

fn cover_masks(cube: &Cube, radius: f64) -> Result<Vec<usize>> {
    let offsets = cube.ball_offsets(radius);
    if cube.weights.len() <= EXACT_COVER_ATOMS {
        Ok(exact_cover(cube, &offsets))
    } else {
        greedy_cover(cube, &offsets)
    }
}

// ---------------------------------------------------------------------------
// Distribution-dependent diameter
// ---------------------------------------------------------------------------

/// `D_PX(n)` together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpxReport {
    pub value: f64,
    /// False when some pair used a greedy cover, making `value` an upper bound.
    pub exact: bool,
    /// Class indices of a pair attaining the supremum.
    pub pair: Option<(usize, usize)>,
    pub gamma: f64,
    pub n: usize,
    pub c1: f64,
}

/// Largest grid `gamma` with `c1 n gamma <= log2 N(gamma)` for one support.
fn dpx_support(cube: &Cube, n: usize, c1: f64) -> Result<f64> {
    let k = cube.weights.len();
    let mut grid: Vec<f64> = (0..cube.size()).map(|e| cube.mass(e)).collect();
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite masses"));
    grid.dedup();
    let scale = c1 * n as f64;
    for &gamma in &grid {
        // log2 N <= k, so larger gammas can never qualify
        if scale * gamma > k as f64 {
            continue;
        }
        let covering = cover_masks(cube, gamma)?.len() as f64;
        if scale * gamma <= covering.log2() {
            return Ok(gamma);
        }
    }
    Ok(0.0)
}

/// `n * sup_{f,g} max{gamma : c1 n gamma <= log2 N(C_{f,g}, gamma, L1(P_X))}`.
///
/// Atoms of zero marginal mass are dropped from each disagreement set; they
/// do not change any `L1(P_X)` distance.
pub fn dpx_diameter(class: &HypothesisClass, weights: &[f64], n: usize, c1: f64) -> Result<DpxReport> {
    if weights.len() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: weights.len(),
        });
    }
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::param("c1", c1, "must be finite and positive"));
    }
    if n == 0 {
        return Err(Error::param("n", 0.0, "must be at least 1"));
    }
    let mut supports: BTreeMap<Vec<usize>, (usize, usize)> = BTreeMap::new();
    let members = class.members();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let support: Vec<usize> = members[i]
                .disagreement(&members[j])?
                .into_iter()
                .filter(|&x| weights[x] > 0.0)
                .collect();
            if support.is_empty() {
                continue;
            }
            if support.len() > COVER_ATOM_BUDGET {
                return Err(Error::Budget(format!(
                    "pair ({i}, {j}) disagrees on {} atoms, above the cover budget of {COVER_ATOM_BUDGET}",
                    support.len()
                )));
            }
            supports.entry(support).or_insert((i, j));
        }
    }
    let results: Vec<(f64, (usize, usize), bool)> = supports
        .par_iter()
        .map(|(support, &pair)| {
            let cube = cube_for(support, weights)?;
            let gamma = dpx_support(&cube, n, c1).map_err(|e| match e {
                Error::Budget(msg) => Error::Budget(format!("pair {pair:?}: {msg}")),
                other => other,
            })?;
            Ok((gamma, pair, support.len() <= EXACT_COVER_ATOMS))
        })
        .collect::<Result<_>>()?;
    let exact = results.iter().all(|r| r.2);
    let best = results
        .iter()
        .fold(None::<(f64, (usize, usize))>, |acc, &(g, pair, _)| match acc {
            Some((bg, _)) if bg >= g => acc,
            _ => Some((g, pair)),
        });
    let (gamma, pair) = match best {
        Some((g, pair)) => (g, Some(pair)),
        None => (0.0, None),
    };
    Ok(DpxReport {
        value: n as f64 * gamma,
        exact,
        pair,
        gamma,
        n,
        c1,
    })
}

// ---------------------------------------------------------------------------
// Covering-net learner
// ---------------------------------------------------------------------------

/// Output of the covering-net learner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetLearnerOutput {
    #[serde(serialize_with = "serialize_hypothesis")]
    pub hypothesis: Hypothesis,
    pub radius: f64,
    pub centers: usize,
    pub chosen_center: usize,
    /// Set when the radius exceeded 1 and the all-zero center was used.
    pub degenerate: bool,
    pub dpx: Option<DpxReport>,
}

fn serialize_hypothesis<S: Serializer>(h: &Hypothesis, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&h.to_bit_string())
}

/// Covering-net learner at an explicit radius: the abstaining stage with
/// `p = 1/2` on the first two thirds; on its abstention atoms, the cover center
/// with the fewest errors on the last third (ties to the lowest center).
pub fn cover_net_learner(
    class: &HypothesisClass,
    s: &LabeledSample,
    delta: f64,
    weights: &[f64],
    radius: f64,
    c: f64,
) -> Result<NetLearnerOutput> {
    if weights.len() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: weights.len(),
        });
    }
    let (stage_sample, net_sample) = split_thirds(class, s)?;
    let stage = abstaining_learner(class, &stage_sample, delta, 0.5, c)?;
    let support = stage.abstain_atoms();
    let m = class.domain_size();
    if radius > 1.0 {
        return Ok(NetLearnerOutput {
            hypothesis: patch(&stage, |_| false),
            radius,
            centers: 1,
            chosen_center: 0,
            degenerate: true,
            dpx: None,
        });
    }
    let cover = l1_cover(&support, weights, radius)?;
    let counts = net_sample.counts();
    let restricted_errors = |center: &Hypothesis| -> u64 {
        support
            .iter()
            .map(|&x| if center.get(x) { counts.zeros[x] } else { counts.ones[x] })
            .sum()
    };
    let chosen = argmin_by_key(cover.centers.iter().map(restricted_errors)).unwrap_or(0);
    let center = cover
        .centers
        .get(chosen)
        .cloned()
        .unwrap_or_else(|| Hypothesis::zeros(m));
    Ok(NetLearnerOutput {
        hypothesis: patch(&stage, |x| center.get(x)),
        radius,
        centers: cover.len(),
        chosen_center: chosen,
        degenerate: false,
        dpx: None,
    })
}

/// The covering-net learner with `r = c2 (D_PX(n) + log(1/delta)) / n`,
/// where `n = |s| / 3`. Intended for deterministic labels.
#[allow(clippy::too_many_arguments)]
pub fn distribution_dependent_learner(
    class: &HypothesisClass,
    s: &LabeledSample,
    delta: f64,
    weights: &[f64],
    c1: f64,
    c2: f64,
    c: f64,
) -> Result<NetLearnerOutput> {
    check_delta(delta)?;
    if !(c2 > 0.0) || !c2.is_finite() {
        return Err(Error::param("c2", c2, "must be finite and positive"));
    }
    split_thirds(class, s)?;
    let n = s.len() / 3;
    let dpx = dpx_diameter(class, weights, n, c1)?;
    let radius = c2 * (dpx.value + clamped_ln(1.0 / delta)) / n as f64;
    let mut out = cover_net_learner(class, s, delta, weights, radius, c)?;
    out.dpx = Some(dpx);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Memorization
// ---------------------------------------------------------------------------

fn memorized_labels(s: &LabeledSample) -> Result<Vec<Option<bool>>> {
    let mut labels: Vec<Option<bool>> = vec![None; s.domain_size()];
    for p in s.items() {
        match labels[p.x] {
            Some(y) if y != p.y => return Err(Error::LabelConflict { atom: p.x }),
            _ => labels[p.x] = Some(p.y),
        }
    }
    Ok(labels)
}

/// Predicts the label seen at each sampled atom and `baseline` elsewhere.
/// Fails when one atom appears with both labels.
pub fn memorizing_learner(s: &LabeledSample, baseline: &Hypothesis) -> Result<Hypothesis> {
    if baseline.domain_size() != s.domain_size() {
        return Err(Error::DomainMismatch {
            expected: s.domain_size(),
            found: baseline.domain_size(),
        });
    }
    let labels = memorized_labels(s)?;
    Ok(Hypothesis::from_fn(s.domain_size(), |x| {
        labels[x].unwrap_or_else(|| baseline.get(x))
    }))
}

/// Exact leave-one-out error of [`memorizing_learner`].
pub fn loo_error(s: &LabeledSample, baseline: &Hypothesis) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    if baseline.domain_size() != s.domain_size() {
        return Err(Error::DomainMismatch {
            expected: s.domain_size(),
            found: baseline.domain_size(),
        });
    }
    memorized_labels(s)?;
    let counts = s.counts();
    // a repeated atom is still memorized, with the same label, after removal
    let errors = s
        .items()
        .iter()
        .filter(|p| counts.visits(p.x) < 2 && baseline.get(p.x) != p.y)
        .count();
    Ok(errors as f64 / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample_seeded, FiniteDistribution};

    fn h(s: &str) -> Hypothesis {
        Hypothesis::parse(s).unwrap()
    }

    #[test]
    fn majority_examples() {
        let t = majority_vote(&LabeledSample::from_pairs(3, &[(1, 1), (1, 1), (1, 0)]).unwrap());
        assert!(t.vote(1));
        let t = majority_vote(&LabeledSample::from_pairs(3, &[(1, 1), (1, 0)]).unwrap());
        assert!(!t.vote(1));
        assert!(!t.vote(0));
        assert_eq!(majority_vote(&LabeledSample::empty(4)).to_hypothesis(), h("0000"));
        let five = LabeledSample::from_pairs(2, &[(0, 1), (0, 1), (0, 1), (0, 1), (0, 0)]).unwrap();
        assert!(majority_vote(&five).vote(0));
    }

    fn brute_cover_size(weights: &[f64], radius: f64) -> usize {
        let k = weights.len();
        let size = 1usize << k;
        let dist = |a: usize, b: usize| -> f64 {
            (0..k).filter(|i| (a ^ b) >> i & 1 == 1).map(|i| weights[i]).sum()
        };
        let balls: Vec<u64> = (0..size)
            .map(|c| (0..size).filter(|&e| dist(c, e) <= radius + 1e-12).fold(0u64, |a, e| a | 1 << e))
            .collect();
        let full = if size == 64 { u64::MAX } else { (1u64 << size) - 1 };
        // breadth-first over subsets of centers, by bitmask
        (1..=size)
            .find(|&kk| {
                (0u64..1 << size)
                    .filter(|s| s.count_ones() as usize == kk)
                    .any(|s| {
                        (0..size)
                            .filter(|i| s >> i & 1 == 1)
                            .fold(0u64, |a, i| a | balls[i])
                            == full
                    })
            })
            .unwrap()
    }

    #[test]
    fn uniform_cube_cover_sizes() {
        let w = [0.25; 4];
        let support = [0, 1, 2, 3];
        for (radius, size) in [(0.25, 4), (0.5, 2), (0.75, 2), (1.0, 1), (0.0, 16)] {
            let cover = l1_cover(&support, &w, radius).unwrap();
            assert!(cover.exact);
            assert_eq!(cover.len(), size, "radius {radius}");
            assert_eq!(brute_cover_size(&w, radius), size);
        }
    }

    #[test]
    fn exact_cover_matches_brute_force_on_skewed_weights() {
        let w = [0.4, 0.3, 0.2, 0.1];
        for radius in [0.0, 0.1, 0.2, 0.3, 0.35, 0.5, 0.6, 0.9, 1.0] {
            let cover = l1_cover(&[0, 1, 2, 3], &w, radius).unwrap();
            assert_eq!(cover.len(), brute_cover_size(&w, radius), "radius {radius}");
        }
    }

    fn assert_valid_cover(cover: &CoverSpec, weights: &[f64]) {
        let k = cover.support.len();
        for mask in 0..1usize << k {
            let elem = center_hypothesis(weights.len(), &cover.support, mask);
            let ok = cover.centers.iter().any(|c| {
                let d: f64 = cover
                    .support
                    .iter()
                    .filter(|&&x| c.get(x) != elem.get(x))
                    .map(|&x| weights[x])
                    .sum();
                d <= cover.radius + 1e-12
            });
            assert!(ok, "element {mask} uncovered");
        }
        let mut distinct = cover.centers.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), cover.len());
    }

    #[test]
    fn greedy_covers_are_valid() {
        for k in [5usize, 8, 10, 12] {
            let m = k + 2;
            let weights: Vec<f64> = (0..m).map(|i| (i + 1) as f64).collect();
            let total: f64 = weights.iter().sum();
            let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let support: Vec<usize> = (1..=k).collect();
            for radius in [0.0, 0.05, 0.2, 0.5, 2.0] {
                let cover = l1_cover(&support, &weights, radius).unwrap();
                assert!(!cover.exact);
                assert_valid_cover(&cover, &weights);
                if radius >= 1.0 {
                    assert_eq!(cover.len(), 1);
                }
                if radius == 0.0 {
                    assert_eq!(cover.len(), 1 << k);
                }
            }
        }
    }

    #[test]
    fn cover_budget_and_validation() {
        let w = vec![1.0 / 21.0; 21];
        let support: Vec<usize> = (0..21).collect();
        assert!(l1_cover(&support, &w, 0.1).unwrap_err().is_budget());
        assert!(l1_cover(&[0, 0], &w, 0.1).is_err());
        assert!(l1_cover(&[0], &w, -1.0).is_err());
    }

    #[test]
    fn dpx_examples() {
        let class = HypothesisClass::from_strings(&["0000", "1111"]).unwrap();
        let r = dpx_diameter(&class, &[0.25; 4], 4, DEFAULT_C1).unwrap();
        assert_eq!(r.value, 3.0);
        assert!(r.exact);
        assert_eq!(r.pair, Some((0, 1)));

        let agree = HypothesisClass::from_strings(&["0010", "0011"]).unwrap();
        let r = dpx_diameter(&agree, &[0.5, 0.5, 0.0, 0.0], 100, DEFAULT_C1).unwrap();
        assert_eq!(r.value, 0.0);
        let single = HypothesisClass::from_strings(&["0110"]).unwrap();
        assert_eq!(dpx_diameter(&single, &[0.25; 4], 10, 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn dpx_at_most_diameter_over_c1() {
        let class = HypothesisClass::full_cube(4).unwrap();
        let weights = [0.1, 0.2, 0.3, 0.4];
        for n in [1usize, 4, 16, 64, 256, 1024, 4096] {
            for c1 in [DEFAULT_C1, 0.1, 1.0] {
                let r = dpx_diameter(&class, &weights, n, c1).unwrap();
                assert!(r.value <= class.diameter() as f64 / c1 + 1e-9);
            }
        }
        let sparse = HypothesisClass::from_strings(&["00000000", "11110000", "00001111"]).unwrap();
        let w = [0.125; 8];
        let r = dpx_diameter(&sparse, &w, 64, DEFAULT_C1).unwrap();
        assert!(!r.exact);
        assert!(r.value <= 8.0 / DEFAULT_C1);
    }

    #[test]
    fn fdl_validation_and_no_abstention_case() {
        let class = HypothesisClass::from_strings(&["0110"]).unwrap();
        let dist = FiniteDistribution::uniform(vec![0.5, 0.2, 0.9, 0.4]).unwrap();
        let s = sample_seeded(&dist, 30, 1);
        assert_eq!(finite_diameter_learner(&class, &s, 0.05, 0.5, 1.0).unwrap(), h("0110"));
        assert!(finite_diameter_learner(&class, &s.slice(0, 29), 0.05, 0.5, 1.0).is_err());
        assert!(finite_diameter_learner(&class, &s, 0.05, 0.0, 1.0).is_err());
    }

    #[test]
    fn fdl_differs_from_stage_only_on_abstentions() {
        let class = HypothesisClass::full_cube(4).unwrap();
        let dist = FiniteDistribution::uniform(vec![0.55, 0.5, 0.45, 0.3]).unwrap();
        for seed in 0..20 {
            let s = sample_seeded(&dist, 30, seed);
            let out = finite_diameter_learner(&class, &s, 0.05, 0.4, 1.0).unwrap();
            let stage = abstaining_learner(&class, &s.slice(0, 20), 0.05, 0.2, 1.0).unwrap();
            let table = majority_vote(&s.slice(20, 30));
            for x in 0..4 {
                match stage.values.get(x) {
                    Prediction::Abstain => assert_eq!(out.get(x), table.vote(x)),
                    v => assert_eq!(Prediction::from_bit(out.get(x)), v),
                }
            }
        }
    }

    #[test]
    fn radius_zero_net_matches_majority_on_sampled_atoms() {
        let class = HypothesisClass::from_strings(&["000000", "111000", "000111", "110011"]).unwrap();
        let weights = [1.0 / 6.0; 6];
        let dist = FiniteDistribution::new(weights.to_vec(), vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let mut checked = 0;
        for seed in 0..200 {
            let s = sample_seeded(&dist, 24, seed);
            let net = cover_net_learner(&class, &s, 0.05, &weights, 0.0, 1.0).unwrap();
            let fdl = finite_diameter_learner(&class, &s, 0.05, 1.0, 1.0).unwrap();
            let stage = abstaining_learner(&class, &s.slice(0, 16), 0.05, 0.5, 1.0).unwrap();
            let counts = s.slice(16, 24).counts();
            if stage.abstain_atoms().iter().all(|&x| counts.visits(x) > 0) {
                assert_eq!(net.hypothesis, fdl);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn net_with_large_radius_uses_one_center() {
        let class = HypothesisClass::from_strings(&["0000", "1111"]).unwrap();
        let weights = [0.25; 4];
        let dist = FiniteDistribution::new(weights.to_vec(), vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        for seed in 0..20 {
            let s = sample_seeded(&dist, 12, seed);
            let out = cover_net_learner(&class, &s, 0.05, &weights, 1.0, 1.0).unwrap();
            assert_eq!(out.centers, 1);
            let stage = abstaining_learner(&class, &s.slice(0, 8), 0.05, 0.5, 1.0).unwrap();
            for x in stage.abstain_atoms() {
                assert!(!out.hypothesis.get(x));
            }
            let big = cover_net_learner(&class, &s, 0.05, &weights, 5.0, 1.0).unwrap();
            assert!(big.degenerate);
        }
        let s = sample_seeded(&dist, 12, 0);
        let ddl = distribution_dependent_learner(&class, &s, 0.05, &weights, DEFAULT_C1, DEFAULT_C2, 1.0).unwrap();
        assert!(ddl.degenerate);
        assert!(ddl.dpx.is_some());
    }

    #[test]
    fn memorizing_examples() {
        let s = LabeledSample::from_pairs(4, &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(memorizing_learner(&s, &h("0000")).unwrap(), h("1010"));
        assert_eq!(memorizing_learner(&LabeledSample::empty(4), &h("0110")).unwrap(), h("0110"));
        let full = LabeledSample::from_pairs(3, &[(0, 1), (1, 0), (2, 1)]).unwrap();
        assert_eq!(memorizing_learner(&full, &h("000")).unwrap(), h("101"));
        let conflict = LabeledSample::from_pairs(3, &[(0, 1), (0, 0)]).unwrap();
        assert!(matches!(
            memorizing_learner(&conflict, &h("000")),
            Err(Error::LabelConflict { atom: 0 })
        ));
        assert!(loo_error(&conflict, &h("000")).is_err());
    }

    fn loo_by_retraining(s: &LabeledSample, baseline: &Hypothesis) -> f64 {
        let errs = (0..s.len())
            .filter(|&i| {
                let f = memorizing_learner(&s.without(i), baseline).unwrap();
                f.get(s.items()[i].x) != s.items()[i].y
            })
            .count();
        errs as f64 / s.len() as f64
    }

    #[test]
    fn loo_examples() {
        let s = LabeledSample::from_pairs(4, &[(0, 1), (1, 1), (2, 1), (3, 0)]).unwrap();
        assert_eq!(loo_error(&s, &h("0000")).unwrap(), 0.75);
        let dup = LabeledSample::from_pairs(4, &[(0, 1), (0, 1)]).unwrap();
        assert_eq!(loo_error(&dup, &h("0000")).unwrap(), 0.0);
        assert!(loo_error(&LabeledSample::empty(4), &h("0000")).is_err());
    }

    #[test]
    fn loo_matches_retraining() {
        let dist = FiniteDistribution::new(vec![0.4, 0.3, 0.2, 0.1, 0.0], vec![1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let baseline = h("00000");
        for seed in 0..100 {
            let s = sample_seeded(&dist, 1 + (seed as usize % 9), seed);
            assert_eq!(loo_error(&s, &baseline).unwrap(), loo_by_retraining(&s, &baseline));
        }
    }
}
