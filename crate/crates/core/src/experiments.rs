//! Synthetic constructions and the Monte Carlo learning-curve engine.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class::{combinatorial_diameter, HypothesisClass};
use crate::domain::{
    bayes_risk, margin_parameter, population_reject_risk, population_risk, rng_stream, sample,
    AbstainingHypothesis, FiniteDistribution, Hypothesis, LabeledSample,
};
use crate::erm::{check_delta, clamped_ln, erm};
use crate::error::{Error, Result};
use crate::misspecified::{distribution_dependent_learner, finite_diameter_learner, memorizing_learner};
use crate::reject::abstaining_learner;

/// Largest class `make_sparse_class` will enumerate.
pub const SPARSE_CLASS_BUDGET: u128 = 1 << 22;

/// Slack when comparing recomputed risks against stored metadata.
const META_TOLERANCE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionMeta {
    pub h: f64,
    #[serde(rename = "D")]
    pub diameter: usize,
    pub d: usize,
    pub fstar_index: usize,
    pub fstar_risk: f64,
    /// `R(f*) - R(Bayes)`, never negative.
    pub approx_error: f64,
    pub family: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub class: HypothesisClass,
    pub dist: FiniteDistribution,
    pub meta: ConstructionMeta,
}

impl Construction {
    /// Computes the metadata from the class and distribution.
    pub fn new(
        class: HypothesisClass,
        dist: FiniteDistribution,
        family: &str,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if class.domain_size() != dist.domain_size() {
            return Err(Error::DomainMismatch {
                expected: class.domain_size(),
                found: dist.domain_size(),
            });
        }
        let fstar = class.population_minimizer(&dist)?;
        let approx_error = (fstar.risk - bayes_risk(&dist)).max(0.0);
        let meta = ConstructionMeta {
            h: margin_parameter(&dist),
            diameter: class.diameter(),
            d: class.vc_dim()?,
            fstar_index: fstar.index,
            fstar_risk: fstar.risk,
            approx_error,
            family: family.into(),
            params,
        };
        let c = Construction { class, dist, meta };
        c.verify()?;
        Ok(c)
    }

    /// Recomputes every metadata field and compares.
    pub fn verify(&self) -> Result<()> {
        let fstar = self.class.population_minimizer(&self.dist)?;
        let ok = self.meta.h == margin_parameter(&self.dist)
            && self.meta.diameter == combinatorial_diameter(&self.class)
            && self.meta.d == self.class.vc_dim()?
            && self.meta.fstar_index == fstar.index
            && (self.meta.fstar_risk - fstar.risk).abs() <= META_TOLERANCE
            && self.meta.approx_error >= 0.0
            && (self.meta.approx_error - (fstar.risk - bayes_risk(&self.dist))).abs() <= META_TOLERANCE;
        if !ok {
            return Err(Error::Invalid("construction metadata out of sync".into()));
        }
        Ok(())
    }

    pub fn fstar(&self) -> &Hypothesis {
        self.class.member(self.meta.fstar_index)
    }
}

/// All hypotheses with at most `d` ones on `m` atoms, in lexicographic order.
pub fn make_sparse_class(d: usize, m: usize) -> Result<HypothesisClass> {
    if m == 0 || m < 2 * d {
        return Err(Error::Invalid(format!("need m >= max(1, 2d), got d={d}, m={m}")));
    }
    let size: u128 = (0..=d).map(|k| binomial(m, k)).sum();
    if size > SPARSE_CLASS_BUDGET {
        return Err(Error::Budget(format!("sparse class with {size} members")));
    }
    let mut members = vec![Hypothesis::zeros(m)];
    for k in 1..=d {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            members.push(Hypothesis::indicator(m, &idx)?);
            let Some(i) = (0..k).rev().find(|&i| idx[i] != m - k + i) else {
                break;
            };
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    HypothesisClass::new(members)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::param("h", h, "must lie in (0, 1]"));
    }
    Ok(())
}

/// Two hypotheses `f1 < f2` on `m` atoms laid out as `[A | B | C]`:
/// on A (mass `1 - 2tau - eps`) both predict the Bayes label 0; on B (mass
/// `tau + eps`) only `f2` predicts the Bayes label 1; on C (mass `tau`) only
/// `f1` does. Every atom has margin `h`.
pub fn make_two_function_construction(
    tau: f64,
    eps: f64,
    atoms_b: usize,
    atoms_c: usize,
    m: usize,
    h: f64,
) -> Result<Construction> {
    check_h(h)?;
    if !(tau >= 0.0) || !(eps >= 0.0) || !(2.0 * tau + eps <= 1.0) {
        return Err(Error::Invalid(format!(
            "infeasible masses tau={tau}, eps={eps}: need tau, eps >= 0 and 2 tau + eps <= 1"
        )));
    }
    if atoms_b + atoms_c > m {
        return Err(Error::Invalid(format!(
            "atoms_b + atoms_c = {} exceeds m = {m}",
            atoms_b + atoms_c
        )));
    }
    let atoms_a = m - atoms_b - atoms_c;
    let masses = [(1.0 - 2.0 * tau - eps, atoms_a, "A"), (tau + eps, atoms_b, "B"), (tau, atoms_c, "C")];
    let mut weights = Vec::with_capacity(m);
    for (mass, atoms, name) in masses {
        if mass > 0.0 && atoms == 0 {
            return Err(Error::Invalid(format!("region {name} has mass {mass} but no atoms")));
        }
        weights.extend(std::iter::repeat_n(mass / atoms.max(1) as f64, atoms));
    }
    let hi = (1.0 + h) / 2.0;
    let lo = (1.0 - h) / 2.0;
    let eta1: Vec<f64> = (0..m).map(|x| if x < atoms_a { lo } else { hi }).collect();
    let dist = FiniteDistribution::normalized(weights, eta1)?;
    let f1 = Hypothesis::from_fn(m, |x| x >= atoms_a + atoms_b);
    let f2 = Hypothesis::from_fn(m, |x| x >= atoms_a && x < atoms_a + atoms_b);
    let class = HypothesisClass::new(vec![f1, f2])?;
    let params = BTreeMap::from([
        ("tau".to_string(), tau),
        ("eps".to_string(), eps),
        ("atoms_b".to_string(), atoms_b as f64),
        ("atoms_c".to_string(), atoms_c as f64),
        ("m".to_string(), m as f64),
        ("h".to_string(), h),
    ]);
    Construction::new(class, dist, "two_function", params)
}

/// Labels drawn with `Pr(Y = f*(x)) = (1 + h)/2` at every atom, so the
/// chosen member is the Bayes classifier and the margin is exactly `h`.
pub fn make_wellspecified_massart(
    class: &HypothesisClass,
    fstar_index: usize,
    h: f64,
    marginal: &[f64],
) -> Result<Construction> {
    check_h(h)?;
    if fstar_index >= class.len() {
        return Err(Error::Invalid(format!(
            "fstar_index {fstar_index} out of range for {} members",
            class.len()
        )));
    }
    let f = class.member(fstar_index);
    let eta1: Vec<f64> = (0..class.domain_size())
        .map(|x| if f.get(x) { (1.0 + h) / 2.0 } else { (1.0 - h) / 2.0 })
        .collect();
    let dist = FiniteDistribution::new(marginal.to_vec(), eta1)?;
    let params = BTreeMap::from([("h".to_string(), h), ("fstar_index".to_string(), fstar_index as f64)]);
    Construction::new(class.clone(), dist, "wellspecified_massart", params)
}

// ---------------------------------------------------------------------------
// Families varying with n
// ---------------------------------------------------------------------------

/// How a parameter depends on the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Const(f64),
    /// `sqrt(a / n)`
    SqrtOver(f64),
    /// `a / n`
    Over(f64),
}

impl Scaling {
    pub fn at(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            Scaling::Const(a) => a,
            Scaling::SqrtOver(a) => (a / n).sqrt(),
            Scaling::Over(a) => a / n,
        }
    }
}

/// A construction, possibly re-parameterized at every sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(skip)]
    Fixed(Box<Construction>),
    TwoFunction {
        tau: Scaling,
        eps: Scaling,
        atoms_b: usize,
        atoms_c: usize,
        m: usize,
        h: f64,
    },
}

impl Family {
    pub fn fixed(c: Construction) -> Self {
        Family::Fixed(Box::new(c))
    }

    pub fn at(&self, n: usize) -> Result<Construction> {
        match self {
            Family::Fixed(c) => Ok((**c).clone()),
            Family::TwoFunction {
                tau,
                eps,
                atoms_b,
                atoms_c,
                m,
                h,
            } => make_two_function_construction(tau.at(n), eps.at(n), *atoms_b, *atoms_c, *m, *h),
        }
    }
}

// ---------------------------------------------------------------------------
// Learners and risks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Learner {
    Erm,
    Abstain { p: f64 },
    FiniteDiameter { h: f64 },
    DistDependent { c1: f64, c2: f64 },
    Memorize,
    /// Returns the population minimizer; a zero-excess reference.
    Oracle,
}

impl Learner {
    pub fn tag(&self) -> String {
        match self {
            Learner::Erm => "erm".into(),
            Learner::Abstain { p } => format!("abstain(p={p})"),
            Learner::FiniteDiameter { h } => format!("finite_diameter(h={h})"),
            Learner::DistDependent { c1, c2 } => format!("dist_dependent(c1={c1},c2={c2})"),
            Learner::Memorize => "memorize".into(),
            Learner::Oracle => "oracle".into(),
        }
    }

    /// Number of draws actually used from a budget of `n`.
    pub fn usable(&self, n: usize) -> usize {
        match self {
            Learner::Abstain { .. } => n / 2 * 2,
            Learner::FiniteDiameter { .. } | Learner::DistDependent { .. } => n / 3 * 3,
            _ => n,
        }
    }
}

/// Learner plus the constants shared by every learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub learner: Learner,
    pub delta: f64,
    pub c: f64,
}

impl LearnerConfig {
    pub fn new(learner: Learner) -> Self {
        LearnerConfig {
            learner,
            delta: 0.05,
            c: 1.0,
        }
    }
}

/// Which population risk the excess is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskTag {
    /// Misclassification risk; binary outputs only.
    R,
    /// Chow's risk at the given level.
    Rp(f64),
    /// Chow's risk at level 0.
    R0,
}

impl RiskTag {
    pub fn tag(&self) -> String {
        match self {
            RiskTag::R => "R".into(),
            RiskTag::Rp(p) => format!("R^{p}"),
            RiskTag::R0 => "R^0".into(),
        }
    }
}

/// Output of one training run.
#[derive(Debug, Clone, PartialEq)]
pub enum Trained {
    Binary(Hypothesis),
    Abstaining(AbstainingHypothesis),
}

impl Trained {
    pub fn as_abstaining(&self) -> AbstainingHypothesis {
        match self {
            Trained::Binary(f) => f.into(),
            Trained::Abstaining(g) => g.clone(),
        }
    }
}

/// Trains `cfg.learner` on `s`, using the prefix the learner needs.
pub fn train(construction: &Construction, cfg: &LearnerConfig, s: &LabeledSample) -> Result<Trained> {
    let class = &construction.class;
    let used = s.slice(0, cfg.learner.usable(s.len()));
    Ok(match cfg.learner {
        Learner::Erm => Trained::Binary(erm(class, &used)?),
        Learner::Abstain { p } => {
            Trained::Abstaining(abstaining_learner(class, &used, cfg.delta, p, cfg.c)?.values)
        }
        Learner::FiniteDiameter { h } => {
            Trained::Binary(finite_diameter_learner(class, &used, cfg.delta, h, cfg.c)?)
        }
        Learner::DistDependent { c1, c2 } => Trained::Binary(
            distribution_dependent_learner(
                class,
                &used,
                cfg.delta,
                construction.dist.weights(),
                c1,
                c2,
                cfg.c,
            )?
            .hypothesis,
        ),
        Learner::Memorize => {
            Trained::Binary(memorizing_learner(&used, &Hypothesis::zeros(class.domain_size()))?)
        }
        Learner::Oracle => Trained::Binary(construction.fstar().clone()),
    })
}

/// `(excess risk, abstention mass)` of a trained output.
pub fn evaluate(construction: &Construction, out: &Trained, risk: RiskTag) -> Result<(f64, f64)> {
    let dist = &construction.dist;
    let fstar = construction.meta.fstar_risk;
    let g = out.as_abstaining();
    let abst = g.abstention_mass(dist)?;
    let excess = match (risk, out) {
        (RiskTag::R, Trained::Binary(f)) => population_risk(f, dist)? - fstar,
        (RiskTag::R, Trained::Abstaining(g)) => match g.to_hypothesis() {
            Some(f) => population_risk(&f, dist)? - fstar,
            None => {
                return Err(Error::Invalid(
                    "misclassification risk is undefined for abstaining outputs; use R^p".into(),
                ))
            }
        },
        (RiskTag::Rp(p), _) => population_reject_risk(&g, dist, p)? - fstar,
        (RiskTag::R0, _) => population_reject_risk(&g, dist, 0.0)? - fstar,
    };
    Ok((excess, abst))
}

fn check_compatible(construction: &Construction, cfg: &LearnerConfig, n: usize) -> Result<()> {
    check_delta(cfg.delta)?;
    let min = match cfg.learner {
        Learner::Abstain { .. } => 2,
        Learner::FiniteDiameter { .. } | Learner::DistDependent { .. } => 3,
        Learner::Erm => 1,
        _ => 0,
    };
    if n < min {
        return Err(Error::Invalid(format!(
            "learner {} needs at least {min} draws, grid has {n}",
            cfg.learner.tag()
        )));
    }
    if matches!(cfg.learner, Learner::Memorize | Learner::DistDependent { .. }) && construction.meta.h < 1.0 {
        return Err(Error::Invalid(format!(
            "learner {} requires deterministic labels (h = 1), construction has h = {}",
            cfg.learner.tag(),
            construction.meta.h
        )));
    }
    Ok(())
}

/// RNG stream of replication `rep` at sample size `n`; inserting grid points
/// leaves existing rows untouched.
pub fn replication_stream(n: usize, rep: usize) -> u64 {
    ((n as u64) << 32) | rep as u64
}

/// Per-replication `(excess, abstention mass)` at one sample size.
pub fn replicate(
    construction: &Construction,
    cfg: &LearnerConfig,
    n: usize,
    reps: usize,
    risk: RiskTag,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    check_compatible(construction, cfg, n)?;
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_stream(seed, replication_stream(n, rep));
            let s = sample(&construction.dist, n, &mut rng);
            let out = train(construction, cfg, &s)?;
            evaluate(construction, &out, risk)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Learning curves
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub n: usize,
    pub mean_excess: f64,
    pub stderr: f64,
    pub abstain_mass: f64,
    pub abstain_stderr: f64,
    pub reps: usize,
    /// Family parameters in force at this `n`.
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    pub learner: String,
    pub risk: String,
    pub seed: u64,
    pub rows: Vec<CurveRow>,
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

pub fn monte_carlo_curve(
    family: &Family,
    cfg: &LearnerConfig,
    n_grid: &[usize],
    reps: usize,
    risk: RiskTag,
    seed: u64,
) -> Result<LearningCurve> {
    if reps < 2 {
        return Err(Error::param("reps", reps as f64, "must be at least 2"));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("n grid must be nonempty and strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let construction = family.at(n)?;
        let results = replicate(&construction, cfg, n, reps, risk, seed)?;
        let excess: Vec<f64> = results.iter().map(|r| r.0).collect();
        let abst: Vec<f64> = results.iter().map(|r| r.1).collect();
        let (mean_excess, stderr) = mean_stderr(&excess);
        let (abstain_mass, abstain_stderr) = mean_stderr(&abst);
        rows.push(CurveRow {
            n,
            mean_excess,
            stderr,
            abstain_mass,
            abstain_stderr,
            reps,
            params: construction.meta.params.clone(),
        });
    }
    Ok(LearningCurve {
        learner: cfg.learner.tag(),
        risk: risk.tag(),
        seed,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

/// Least-squares slope of `log y` against `log n`, optionally weighted.
fn log_log_slope(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Invalid(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, y)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::DegenerateRate(format!("mean {y} at n = {n}")));
    }
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; points.len()],
    };
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxy: f64 = (0..xs.len()).map(|i| w[i] * (xs[i] - mx) * (ys[i] - my)).sum();
    let sxx: f64 = (0..xs.len()).map(|i| w[i] * (xs[i] - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Unweighted log-log slope of mean excess against `n`.
pub fn fit_rate_slope(curve: &LearningCurve) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.n as f64, r.mean_excess)).collect();
    log_log_slope(&pts, None)
}

/// Log-log slope weighted by `(mean / stderr)^2`, the inverse variance of
/// `log mean` to first order. Rows with zero stderr get weight 1.
pub fn fit_rate_slope_weighted(curve: &LearningCurve) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.n as f64, r.mean_excess)).collect();
    let w: Vec<f64> = curve
        .rows
        .iter()
        .map(|r| if r.stderr > 0.0 { (r.mean_excess / r.stderr).powi(2) } else { 1.0 })
        .collect();
    log_log_slope(&pts, Some(&w))
}

/// Unweighted log-log slope of mean abstention mass against `n`.
pub fn fit_abstention_slope(curve: &LearningCurve) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.n as f64, r.abstain_mass)).collect();
    log_log_slope(&pts, None)
}

/// Per row, `n p mean_excess / (d log(n/d) + log(1/delta))`.
pub fn scaled_theorem_statistic(curve: &LearningCurve, d: usize, delta: f64, p: f64) -> Result<Vec<f64>> {
    if !(p > 0.0) {
        return Err(Error::param("p", p, "must be positive"));
    }
    if d == 0 {
        return Err(Error::param("d", 0.0, "must be at least 1"));
    }
    check_delta(delta)?;
    let df = d as f64;
    Ok(curve
        .rows
        .iter()
        .map(|r| {
            let n = r.n as f64;
            n * p * r.mean_excess / (df * clamped_ln(n / df) + clamped_ln(1.0 / delta))
        })
        .collect())
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

pub const CURVE_CSV_HEADER: [&str; 5] = ["n", "mean_excess", "stderr", "abstain_mass", "reps"];

pub fn write_curve_csv<W: Write>(curve: &LearningCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_CSV_HEADER)?;
    for r in &curve.rows {
        w.write_record([
            r.n.to_string(),
            r.mean_excess.to_string(),
            r.stderr.to_string(),
            r.abstain_mass.to_string(),
            r.reps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn curve_csv_string(curve: &LearningCurve) -> Result<String> {
    let mut buf = Vec::new();
    write_curve_csv(curve, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
