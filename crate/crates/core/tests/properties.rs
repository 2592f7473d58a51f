use proptest::prelude::*;
use rejectlab::domain::{
    empirical_reject_risk, population_reject_risk, population_risk, rng_stream, sample, AbstainingHypothesis,
    FiniteDistribution, Hypothesis, LabeledSample, Prediction,
};
use rejectlab::experiments::{
    make_sparse_class, make_two_function_construction, make_wellspecified_massart, mean_stderr,
    monte_carlo_curve, Family, Learner, LearnerConfig, RiskTag, Scaling,
};
use rejectlab::misspecified::{loo_error, memorizing_learner, DEFAULT_C1};
use rejectlab::theory::{excess_loss_deviation_check, ratio_bound_check};
use rejectlab::HypothesisClass;

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// `P(#B <= #C)` for a trinomial sample of size `n` with cell
/// probabilities `(pb, pc, 1 - pb - pc)`.
fn prob_b_not_more_than_c(n: usize, pb: f64, pc: f64) -> f64 {
    let lf = ln_factorials(n);
    let pa = 1.0 - pb - pc;
    let mut total = 0.0;
    for b in 0..=n {
        for c in b..=n - b {
            let a = n - b - c;
            let ln = lf[n] - lf[a] - lf[b] - lf[c]
                + b as f64 * pb.ln()
                + c as f64 * pc.ln()
                + if a > 0 { a as f64 * pa.ln() } else { 0.0 };
            total += ln.exp();
        }
    }
    total
}

fn hard_family() -> Family {
    Family::TwoFunction {
        tau: Scaling::Const(0.2),
        eps: Scaling::SqrtOver(0.2),
        atoms_b: 4,
        atoms_c: 4,
        m: 10,
        h: 1.0,
    }
}

#[test]
fn erm_excess_matches_trinomial_oracle() {
    let grid = [64usize, 256, 1024];
    let curve = monte_carlo_curve(&hard_family(), &LearnerConfig::new(Learner::Erm), &grid, 4000, RiskTag::R, 11)
        .unwrap();
    for row in &curve.rows {
        let eps = (0.2 / row.n as f64).sqrt();
        // ERM keeps f1 (index 0) exactly when f1 makes no more errors, i.e. #B <= #C
        let exact = eps * prob_b_not_more_than_c(row.n, 0.2 + eps, 0.2);
        assert!(
            (row.mean_excess - exact).abs() <= 4.0 * row.stderr + 1e-12,
            "n = {}: Monte Carlo {} vs exact {exact} (stderr {})",
            row.n,
            row.mean_excess,
            row.stderr
        );
    }
}

#[test]
fn trinomial_oracle_sanity() {
    // pb = pc makes ties symmetric: P(B <= C) = (1 + P(B = C)) / 2 > 1/2
    let p = prob_b_not_more_than_c(10, 0.3, 0.3);
    assert!(p > 0.5 && p < 1.0);
    assert!((prob_b_not_more_than_c(5, 0.0 + 1e-300, 0.5) - 1.0).abs() < 1e-9);
}

#[test]
fn distribution_dependent_tracks_finite_diameter() {
    let n = [1023usize];
    let fdl = monte_carlo_curve(
        &hard_family(),
        &LearnerConfig::new(Learner::FiniteDiameter { h: 1.0 }),
        &n,
        500,
        RiskTag::R,
        5,
    )
    .unwrap();
    let ddl = monte_carlo_curve(
        &hard_family(),
        &LearnerConfig::new(Learner::DistDependent { c1: DEFAULT_C1, c2: 0.01 }),
        &n,
        500,
        RiskTag::R,
        5,
    )
    .unwrap();
    let (a, b) = (&fdl.rows[0], &ddl.rows[0]);
    assert!(
        (a.mean_excess - b.mean_excess).abs() <= 3.0 * (a.stderr + b.stderr) + 0.01,
        "finite-diameter {} vs distribution-dependent {}",
        a.mean_excess,
        b.mean_excess
    );
}

#[test]
fn loo_is_unbiased_for_risk_at_n_minus_one() {
    let m = 6;
    let class = HypothesisClass::new(vec![Hypothesis::zeros(m), Hypothesis::from_fn(m, |_| true)]).unwrap();
    let c = make_wellspecified_massart(&class, 1, 1.0, &[0.3, 0.25, 0.2, 0.1, 0.1, 0.05]).unwrap();
    let baseline = Hypothesis::zeros(m);
    let n = 10;
    let reps = 20_000u64;
    let loo: Vec<f64> = (0..reps)
        .map(|r| loo_error(&sample(&c.dist, n, &mut rng_stream(1, r)), &baseline).unwrap())
        .collect();
    let risk: Vec<f64> = (0..reps)
        .map(|r| {
            let s = sample(&c.dist, n - 1, &mut rng_stream(2, r));
            population_risk(&memorizing_learner(&s, &baseline).unwrap(), &c.dist).unwrap()
        })
        .collect();
    let (ml, sl) = mean_stderr(&loo);
    let (mr, sr) = mean_stderr(&risk);
    assert!((ml - mr).abs() <= 3.0 * (sl * sl + sr * sr).sqrt(), "LOO {ml} vs risk {mr}");
}

fn four_atom() -> (HypothesisClass, FiniteDistribution) {
    (
        HypothesisClass::full_cube(4).unwrap(),
        FiniteDistribution::new(vec![0.4, 0.3, 0.2, 0.1], vec![0.8, 0.3, 0.6, 0.45]).unwrap(),
    )
}

#[test]
fn ratio_statistic_stable_across_seeds() {
    let (class, dist) = four_atom();
    let q: Vec<f64> = (0..5)
        .map(|seed| ratio_bound_check(&class, &dist, 200, 0.05, 1000, 40 + seed).unwrap().quantile(0.95))
        .collect();
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    for v in &q {
        assert!((v - mean).abs() <= 0.2 * mean, "{q:?}");
    }
}

#[test]
fn excess_loss_quantile_stable_under_doubling() {
    let (class, dist) = four_atom();
    let a = excess_loss_deviation_check(&class, &dist, 200, 0.05, 1.5, 1000, 7).unwrap().quantile(0.95);
    let b = excess_loss_deviation_check(&class, &dist, 400, 0.05, 1.5, 1000, 8).unwrap().quantile(0.95);
    assert!(a > 0.0 && b > 0.0);
    assert!(a.max(b) / a.min(b) <= 1.5, "{a} vs {b}");
}

#[test]
fn abstention_mass_shrinks_with_n() {
    let m = 12;
    let class = make_sparse_class(1, m).unwrap();
    let raw: Vec<f64> = (0..m).map(|x| 0.7f64.powi(x as i32)).collect();
    let total: f64 = raw.iter().sum();
    let marginal: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let family = Family::fixed(make_wellspecified_massart(&class, 0, 0.5, &marginal).unwrap());
    let curve = monte_carlo_curve(
        &family,
        &LearnerConfig::new(Learner::Abstain { p: 0.1 }),
        &[32, 64, 128, 256, 512],
        500,
        RiskTag::Rp(0.1),
        3,
    )
    .unwrap();
    for w in curve.rows.windows(2) {
        assert!(
            w[1].abstain_mass <= w[0].abstain_mass + 2.0 * (w[0].abstain_stderr + w[1].abstain_stderr),
            "{} -> {}",
            w[0].abstain_mass,
            w[1].abstain_mass
        );
    }
}

#[test]
fn proper_learners_never_beat_fstar() {
    let c = make_two_function_construction(0.2, 0.05, 4, 4, 10, 0.6).unwrap();
    let family = Family::fixed(c);
    for learner in [Learner::Erm, Learner::Oracle] {
        let curve =
            monte_carlo_curve(&family, &LearnerConfig::new(learner), &[16, 64], 200, RiskTag::R, 1).unwrap();
        assert!(curve.rows.iter().all(|r| r.mean_excess >= -1e-12));
    }
}

fn prediction() -> impl Strategy<Value = Prediction> {
    prop_oneof![Just(Prediction::Zero), Just(Prediction::One), Just(Prediction::Abstain)]
}

fn fixture() -> impl Strategy<Value = (AbstainingHypothesis, FiniteDistribution, Vec<(usize, u8)>)> {
    (1usize..8).prop_flat_map(|m| {
        (
            prop::collection::vec(prediction(), m),
            prop::collection::vec(0.01f64..1.0, m),
            prop::collection::vec(0.0f64..=1.0, m),
            prop::collection::vec((0..m, 0u8..2), 1..30),
        )
            .prop_map(|(g, w, eta, pairs)| {
                (AbstainingHypothesis::new(g), FiniteDistribution::normalized(w, eta).unwrap(), pairs)
            })
    })
}

proptest! {
    #[test]
    fn reject_risk_monotone_in_p((g, dist, pairs) in fixture(), a in 0.0f64..=0.5, b in 0.0f64..=0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s = LabeledSample::from_pairs(dist.domain_size(), &pairs).unwrap();
        prop_assert!(population_reject_risk(&g, &dist, hi).unwrap() <= population_reject_risk(&g, &dist, lo).unwrap());
        prop_assert!(empirical_reject_risk(&g, &s, hi).unwrap() <= empirical_reject_risk(&g, &s, lo).unwrap());
    }

    #[test]
    fn loo_inequality_for_constant_pair(
        m in 1usize..10,
        labels in prop::collection::vec(any::<bool>(), 10),
        xs in prop::collection::vec(0usize..10, 1..40),
    ) {
        let pairs: Vec<(usize, u8)> = xs.iter().map(|&x| x % m).map(|x| (x, labels[x] as u8)).collect();
        let s = LabeledSample::from_pairs(m, &pairs).unwrap();
        let class = HypothesisClass::new(vec![Hypothesis::zeros(m), Hypothesis::from_fn(m, |_| true)]).unwrap();
        let min_errors = class
            .members()
            .iter()
            .map(|f| s.items().iter().filter(|p| f.get(p.x) != p.y).count())
            .min()
            .unwrap();
        let loo = loo_error(&s, &Hypothesis::zeros(m)).unwrap();
        prop_assert!(loo * s.len() as f64 <= (class.diameter() + min_errors) as f64 + 1e-9);
    }

    #[test]
    fn memorizer_fits_conflict_free_samples(
        m in 1usize..10,
        labels in prop::collection::vec(any::<bool>(), 10),
        xs in prop::collection::vec(0usize..10, 0..40),
    ) {
        let pairs: Vec<(usize, u8)> = xs.iter().map(|&x| x % m).map(|x| (x, labels[x] as u8)).collect();
        let s = LabeledSample::from_pairs(m, &pairs).unwrap();
        let f = memorizing_learner(&s, &Hypothesis::zeros(m)).unwrap();
        prop_assert!(s.items().iter().all(|p| f.get(p.x) == p.y));
    }
}
