//! Abstaining aggregation over almost empirical risk minimizers.
//!
//! The learner splits a sample of size `2n` in half. On the first half it
//! finds an ERM `g` and the almost-ERM set; every member `f` of that set
//! yields the midpoint `(f + g) / 2`, which predicts where `f` and `g` agree
//! and abstains (`*`) where they disagree. The second half selects the
//! midpoint with the smallest empirical Chow risk `R^p_n`.
//!
//! Reading `*` as 1/2 turns Chow's risk into an `l_q` risk with
//! `1/2 - p = 2^-q`, so the same selection can be phrased with `l_q`; see
//! [`aggregate_lq`].

use serde::{Deserialize, Serialize};

use crate::class::HypothesisClass;
use crate::domain::{
    population_reject_risk, AbstainingHypothesis, AtomCounts, FiniteDistribution, Hypothesis,
    LabeledSample, Prediction,
};
use crate::erm::{almost_erm_set_from_counts, AlmostErmSet};
use crate::error::{Error, Result};

/// Objective values closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest abstention level used by the learner; larger requests are clamped.
pub const MAX_EFFECTIVE_P: f64 = 0.25;

/// `q = log2(1 / (1/2 - p))`, the exponent with `1/2 - p = 2^-q`.
pub fn q_from_p(p: f64) -> Result<f64> {
    if !(0.0..=MAX_EFFECTIVE_P).contains(&p) {
        return Err(Error::param("p", p, "must lie in [0, 1/4]; clamp first"));
    }
    Ok(-(0.5 - p).log2())
}

/// Predicts `f(x)` where `f` and `g` agree, abstains where they differ.
pub fn midpoint(f: &Hypothesis, g: &Hypothesis) -> Result<AbstainingHypothesis> {
    f.check_same_domain(g)?;
    Ok(AbstainingHypothesis::new(
        (0..f.domain_size())
            .map(|x| {
                if f.get(x) == g.get(x) {
                    Prediction::from_bit(f.get(x))
                } else {
                    Prediction::Abstain
                }
            })
            .collect(),
    ))
}

/// Parameters the model was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub c: f64,
    pub delta: f64,
    /// Abstention level as requested, before clamping.
    pub p_requested: f64,
    pub split: String,
}

/// Output of the abstaining learner: the midpoint of `base` (the first-half
/// ERM) and `partner` (a member of the almost-ERM set).
#[derive(Debug, Clone, PartialEq)]
pub struct AbstainerModel {
    pub base_index: usize,
    pub partner_index: usize,
    pub base: Hypothesis,
    pub partner: Hypothesis,
    pub values: AbstainingHypothesis,
    /// Effective abstention level, in `[0, 1/4]`.
    pub p: f64,
    pub almost_erm: AlmostErmSet,
    pub provenance: Provenance,
}

/// Serialized form of an [`AbstainerModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub base: usize,
    pub partner: usize,
    pub p: f64,
    pub abstain_atoms: Vec<usize>,
}

impl AbstainerModel {
    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            base: self.base_index,
            partner: self.partner_index,
            p: self.p,
            abstain_atoms: self.values.abstain_atoms(),
        }
    }

    /// Rebuilds a model from its serialized form against the training class.
    pub fn from_doc(class: &HypothesisClass, doc: &ModelDoc) -> Result<Self> {
        if doc.base >= class.len() || doc.partner >= class.len() {
            return Err(Error::Invalid(format!(
                "model references member {} but class has {}",
                doc.base.max(doc.partner),
                class.len()
            )));
        }
        if !(0.0..=0.5).contains(&doc.p) {
            return Err(Error::param("p", doc.p, "must lie in [0, 1/2]"));
        }
        let base = class.member(doc.base).clone();
        let partner = class.member(doc.partner).clone();
        let values = midpoint(&partner, &base)?;
        if values.abstain_atoms() != doc.abstain_atoms {
            return Err(Error::Invalid(
                "abstain_atoms differ from the disagreement set of base and partner".into(),
            ));
        }
        Ok(AbstainerModel {
            base_index: doc.base,
            partner_index: doc.partner,
            base,
            partner,
            values,
            p: doc.p,
            almost_erm: AlmostErmSet {
                erm_index: doc.base,
                members: vec![doc.base.min(doc.partner), doc.base.max(doc.partner)],
                alpha: f64::NAN,
                c: f64::NAN,
            },
            provenance: Provenance {
                c: f64::NAN,
                delta: f64::NAN,
                p_requested: doc.p,
                split: "deserialized".into(),
            },
        })
    }

    pub fn abstain_atoms(&self) -> Vec<usize> {
        self.values.abstain_atoms()
    }

    pub fn abstention_mass(&self, dist: &FiniteDistribution) -> Result<f64> {
        self.values.abstention_mass(dist)
    }
}

fn split_halves(class: &HypothesisClass, s: &LabeledSample) -> Result<(LabeledSample, LabeledSample)> {
    if s.len() < 2 || !s.len().is_multiple_of(2) {
        return Err(Error::Invalid(format!(
            "sample size {} must be even and at least 2",
            s.len()
        )));
    }
    if s.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: s.domain_size(),
        });
    }
    let n = s.len() / 2;
    Ok((s.slice(0, n), s.slice(n, 2 * n)))
}

struct Candidate {
    partner: usize,
    values: AbstainingHypothesis,
    objective: f64,
    abstentions: usize,
}

/// Shared pipeline: ERM and almost-ERM set on the first half, then the
/// midpoint minimizing `objective` on the second half. Ties within
/// [`TIE_TOLERANCE`] prefer fewer abstention atoms, then the lower partner
/// index.
fn select_midpoint(
    class: &HypothesisClass,
    s: &LabeledSample,
    delta: f64,
    c: f64,
    objective: impl Fn(&AbstainingHypothesis, &AtomCounts) -> f64,
) -> Result<(AlmostErmSet, Candidate)> {
    let (first, second) = split_halves(class, s)?;
    let fhat = almost_erm_set_from_counts(class, &first.counts(), delta, c)?;
    let g = class.member(fhat.erm_index);
    let counts = second.counts();
    let mut best: Option<Candidate> = None;
    for &i in &fhat.members {
        let values = midpoint(class.member(i), g)?;
        let cand = Candidate {
            partner: i,
            objective: objective(&values, &counts),
            abstentions: values.abstain_count(),
            values,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                if cand.objective < b.objective - TIE_TOLERANCE {
                    true
                } else if cand.objective <= b.objective + TIE_TOLERANCE {
                    // members are visited in ascending index order
                    cand.abstentions < b.abstentions
                } else {
                    false
                }
            }
        };
        if better {
            best = Some(cand);
        }
    }
    let best = best.expect("almost-ERM set always contains the ERM");
    Ok((fhat, best))
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("c", c, "must be finite and positive"));
    }
    Ok(())
}

fn build_model(
    class: &HypothesisClass,
    fhat: AlmostErmSet,
    best: Candidate,
    p: f64,
    provenance: Provenance,
) -> AbstainerModel {
    AbstainerModel {
        base_index: fhat.erm_index,
        partner_index: best.partner,
        base: class.member(fhat.erm_index).clone(),
        partner: class.member(best.partner).clone(),
        values: best.values,
        p,
        almost_erm: fhat,
        provenance,
    }
}

/// The abstaining learner on a sample of size `2n`. Abstention levels above
/// 1/4 are clamped to 1/4.
pub fn abstaining_learner(
    class: &HypothesisClass,
    s: &LabeledSample,
    delta: f64,
    p: f64,
    c: f64,
) -> Result<AbstainerModel> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::param("p", p, "must lie in [0, 1/2]"));
    }
    check_c(c)?;
    let p_eff = p.min(MAX_EFFECTIVE_P);
    let cost = 0.5 - p_eff;
    let (fhat, best) = select_midpoint(class, s, delta, c, |g, counts| {
        let (err, abst) = counts.reject_counts(g);
        (err as f64 + cost * abst as f64) / counts.n as f64
    })?;
    Ok(build_model(
        class,
        fhat,
        best,
        p_eff,
        Provenance {
            c,
            delta,
            p_requested: p,
            split: format!("first {0} / last {0}", s.len() / 2),
        },
    ))
}

/// Empirical `l_q` risk of a `{0, 1/2, 1}`-valued predictor from per-atom
/// label counts.
pub(crate) fn lq_objective(g: &AbstainingHypothesis, counts: &AtomCounts, q: f64) -> f64 {
    let total: f64 = (0..g.domain_size())
        .map(|x| {
            let v = g.get(x).as_real();
            counts.ones[x] as f64 * (1.0 - v).abs().powf(q) + counts.zeros[x] as f64 * v.abs().powf(q)
        })
        .sum();
    total / counts.n as f64
}

/// The same pipeline selecting by empirical `l_q` risk, `q` in `(1, 2]`.
pub fn aggregate_lq(
    class: &HypothesisClass,
    s: &LabeledSample,
    delta: f64,
    q: f64,
    c: f64,
) -> Result<AbstainerModel> {
    if !(q > 1.0 && q <= 2.0) {
        return Err(Error::param("q", q, "must lie in (1, 2]"));
    }
    check_c(c)?;
    let (fhat, best) = select_midpoint(class, s, delta, c, |g, counts| lq_objective(g, counts, q))?;
    let p = 0.5 - (-q).exp2();
    Ok(build_model(
        class,
        fhat,
        best,
        p,
        Provenance {
            c,
            delta,
            p_requested: p,
            split: format!("first {0} / last {0}", s.len() / 2),
        },
    ))
}

/// `R^p(model) - R(f*)`; negative when abstaining beats `f*`.
pub fn reject_excess_risk(
    model: &AbstainerModel,
    dist: &FiniteDistribution,
    p: f64,
    fstar_risk: f64,
) -> Result<f64> {
    Ok(population_reject_risk(&model.values, dist, p)? - fstar_risk)
}
