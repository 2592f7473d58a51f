//! Monte Carlo and exact checks of the deviation inequalities, the membership
//! of the best-in-class function in the almost-ERM set, Bernstein constants
//! and the Chow/`l_q` risk identity.
//!
//! Hidden constants are reported, not asserted; callers pick thresholds.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::class::HypothesisClass;
use crate::domain::{
    lq_risk, population_l1_distance, population_reject_risk, rng_stream, sample, AtomCounts,
    FiniteDistribution, Hypothesis, LabeledSample,
};
use crate::erm::{almost_erm_set_from_counts, alpha};
use crate::error::{Error, Result};
use crate::reject::{abstaining_learner, q_from_p, AbstainerModel, MAX_EFFECTIVE_P};

/// Per-trial worst-case normalized deviations and their order statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationStatistic {
    pub trials: usize,
    pub alpha: f64,
    pub values: Vec<f64>,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
}

/// Empirical quantile as an order statistic: the `ceil(level * k)`-th
/// smallest of `k` values.
pub fn order_quantile(sorted: &[f64], level: f64) -> f64 {
    let k = sorted.len();
    let rank = ((level * k as f64).ceil() as usize).clamp(1, k);
    sorted[rank - 1]
}

impl DeviationStatistic {
    fn new(values: Vec<f64>, alpha: f64, delta: f64) -> Self {
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("deviations are finite"));
        let mut levels = vec![0.5, 0.9, 1.0 - delta, 0.99, 1.0];
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        let quantiles = levels.iter().map(|&l| order_quantile(&sorted, l)).collect();
        DeviationStatistic {
            trials: values.len(),
            alpha,
            values,
            levels,
            quantiles,
        }
    }

    pub fn quantile(&self, level: f64) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        order_quantile(&sorted, level)
    }
}

/// JSON report shared by all checks.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub params: serde_json::Value,
    pub trials: usize,
    pub quantiles: Vec<(f64, f64)>,
    pub pass_criteria_if_any: Option<String>,
}

impl CheckReport {
    pub fn from_statistic(check: &str, params: serde_json::Value, stat: &DeviationStatistic) -> Self {
        CheckReport {
            check: check.into(),
            params,
            trials: stat.trials,
            quantiles: stat.levels.iter().copied().zip(stat.quantiles.iter().copied()).collect(),
            pass_criteria_if_any: None,
        }
    }
}

fn validate(class: &HypothesisClass, dist: &FiniteDistribution, n: usize, trials: usize) -> Result<()> {
    if dist.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: dist.domain_size(),
        });
    }
    if n == 0 {
        return Err(Error::param("n", 0.0, "must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::param("trials", 0.0, "must be at least 1"));
    }
    Ok(())
}

fn trial_counts(dist: &FiniteDistribution, n: usize, seed: u64, trial: usize) -> AtomCounts {
    let mut rng = rng_stream(seed, trial as u64);
    sample(dist, n, &mut rng).counts()
}

/// Worst pairwise `|P_n|f-g| - P|f-g|| / (alpha sqrt(P_n|f-g|) + alpha^2)`
/// per trial.
pub fn ratio_bound_check(
    class: &HypothesisClass,
    dist: &FiniteDistribution,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<DeviationStatistic> {
    validate(class, dist, n, trials)?;
    let a = alpha(n, class.vc_dim()?.max(1), delta)?;
    let members = class.members();
    let mut pairs = Vec::new();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            pairs.push((i, j, population_l1_distance(&members[i], &members[j], dist)?));
        }
    }
    let nf = n as f64;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let counts = trial_counts(dist, n, seed, t);
            pairs
                .iter()
                .map(|&(i, j, pop)| {
                    let emp = counts.disagreements(&members[i], &members[j]) as f64 / nf;
                    (emp - pop).abs() / (a * emp.sqrt() + a * a)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(DeviationStatistic::new(values, a, delta))
}

/// Per-atom losses `(|f(x) - 1|^q, |f(x)|^q)` of a binary predictor.
fn binary_losses(bit: bool, q: f64) -> (f64, f64) {
    let v = if bit { 1.0 } else { 0.0 };
    ((v - 1.0f64).abs().powf(q), v.abs().powf(q))
}

/// Worst `|P h - P_n h| / (alpha sqrt(P_n|f - f*|) + alpha^2)` over the
/// excess losses `h = |f - Y|^q - |f* - Y|^q`, per trial.
#[allow(clippy::too_many_arguments)]
pub fn excess_loss_deviation_check(
    class: &HypothesisClass,
    dist: &FiniteDistribution,
    n: usize,
    delta: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<DeviationStatistic> {
    validate(class, dist, n, trials)?;
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", q, "must be finite and at least 1"));
    }
    let a = alpha(n, class.vc_dim()?.max(1), delta)?;
    let members = class.members();
    let fstar = &members[class.population_minimizer(dist)?.index];
    let star_risk = lq_risk(&fstar.into(), dist, q)?;
    let pop: Vec<f64> = members
        .iter()
        .map(|f| Ok(lq_risk(&f.into(), dist, q)? - star_risk))
        .collect::<Result<_>>()?;
    let m = class.domain_size();
    let nf = n as f64;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let counts = trial_counts(dist, n, seed, t);
            members
                .iter()
                .zip(&pop)
                .map(|(f, &ph)| {
                    let mut pnh = 0.0;
                    for x in 0..m {
                        let (f1, f0) = binary_losses(f.get(x), q);
                        let (s1, s0) = binary_losses(fstar.get(x), q);
                        pnh += counts.ones[x] as f64 * (f1 - s1) + counts.zeros[x] as f64 * (f0 - s0);
                    }
                    let pnh = pnh / nf;
                    let dist_n = counts.disagreements(f, fstar) as f64 / nf;
                    (ph - pnh).abs() / (a * dist_n.sqrt() + a * a)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(DeviationStatistic::new(values, a, delta))
}

/// Frequency with which the population minimizer lands in the almost-ERM set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub frequency: f64,
    pub hits: usize,
    pub trials: usize,
    pub fstar_index: usize,
    /// Members sharing the minimal population risk.
    pub fstar_ties: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn target_membership_check(
    class: &HypothesisClass,
    dist: &FiniteDistribution,
    n: usize,
    delta: f64,
    c: f64,
    trials: usize,
    seed: u64,
) -> Result<MembershipReport> {
    validate(class, dist, n, trials)?;
    let fstar = class.population_minimizer(dist)?;
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let counts = trial_counts(dist, n, seed, t);
            Ok(almost_erm_set_from_counts(class, &counts, delta, c)?.contains(fstar.index))
        })
        .collect::<Result<_>>()?;
    let hits = hits.iter().filter(|h| **h).count();
    Ok(MembershipReport {
        frequency: hits as f64 / trials as f64,
        hits,
        trials,
        fstar_index: fstar.index,
        fstar_ties: fstar.ties,
    })
}

/// Membership frequency for a fixed list of samples.
pub fn membership_on_samples(
    class: &HypothesisClass,
    dist: &FiniteDistribution,
    samples: &[LabeledSample],
    delta: f64,
    c: f64,
) -> Result<f64> {
    let fstar = class.population_minimizer(dist)?.index;
    let mut hits = 0;
    for s in samples {
        if almost_erm_set_from_counts(class, &s.counts(), delta, c)?.contains(fstar) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len().max(1) as f64)
}

/// Smallest `B` with `Pr(f != f*) <= B (R(f) - R(f*))^beta` for all members;
/// infinite when some member at positive distance has zero excess risk.
pub fn bernstein_estimate(class: &HypothesisClass, dist: &FiniteDistribution, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::param("beta", beta, "must lie in [0, 1]"));
    }
    if dist.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: dist.domain_size(),
        });
    }
    let fstar = class.member(class.population_minimizer(dist)?.index);
    let (w, eta) = (dist.weights(), dist.eta1());
    let mut b: f64 = 0.0;
    for f in class.members() {
        let mut distance = 0.0;
        let mut excess = 0.0;
        for x in 0..class.domain_size() {
            if f.get(x) != fstar.get(x) {
                distance += w[x];
                // f predicts 1 where f* predicts 0, or the reverse
                let margin = 2.0 * eta[x] - 1.0;
                excess += w[x] * if f.get(x) { -margin } else { margin };
            }
        }
        if distance == 0.0 {
            continue;
        }
        if excess <= 0.0 {
            return Ok(f64::INFINITY);
        }
        b = b.max(distance / excess.powf(beta));
    }
    Ok(b)
}

/// `|(R^p(g) - R(f*)) - (l_q(g') - l_q(f*))|` with `1/2 - p = 2^-q` and `g'`
/// reading `*` as 1/2.
pub fn identity_check_rp_lq(
    model: &AbstainerModel,
    dist: &FiniteDistribution,
    fstar_risk: f64,
    p: f64,
) -> Result<f64> {
    if p > MAX_EFFECTIVE_P {
        return Err(Error::param("p", p, "must be at most 1/4"));
    }
    let q = q_from_p(p)?;
    let lhs = population_reject_risk(&model.values, dist, p)? - fstar_risk;
    // l_q of a binary f* is its misclassification risk
    let rhs = lq_risk(&model.values, dist, q)? - fstar_risk;
    Ok((lhs - rhs).abs())
}

/// Random class and distribution on at most `max_m` atoms with at most
/// `max_members` distinct members.
pub fn random_fixture<R: Rng + ?Sized>(
    rng: &mut R,
    max_m: usize,
    max_members: usize,
) -> Result<(HypothesisClass, FiniteDistribution)> {
    let m = rng.gen_range(1..=max_m);
    let size = rng.gen_range(1..=max_members);
    let members: Vec<Hypothesis> = (0..size)
        .map(|_| Hypothesis::from_fn(m, |_| rng.gen::<bool>()))
        .collect();
    let weights: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let eta1: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    Ok((HypothesisClass::new(members)?, FiniteDistribution::normalized(weights, eta1)?))
}

/// Largest [`identity_check_rp_lq`] discrepancy over `trials` random
/// fixtures, each trained by the abstaining learner on a fresh sample and
/// checked at `p` in `{0, 0.1, 0.25}`.
pub fn identity_sweep(trials: usize, n: usize, seed: u64) -> Result<f64> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::param("n", n as f64, "must be even and at least 2"));
    }
    let worst: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_stream(seed, t as u64);
            let (class, dist) = random_fixture(&mut rng, 8, 20)?;
            let fstar = class.population_minimizer(&dist)?;
            let s = sample(&dist, n, &mut rng);
            let mut worst: f64 = 0.0;
            for p in [0.0, 0.1, 0.25] {
                let model = abstaining_learner(&class, &s, 0.05, p, 1.0)?;
                worst = worst.max(identity_check_rp_lq(&model, &dist, fstar.risk, p)?);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}
