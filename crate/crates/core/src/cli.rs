//! Command-line front end: configuration merging, dispatch and report files.
//!
//! Exit codes: 0 success, 1 a `verify` check failed its contract, 2 invalid
//! input, 3 exact computation over budget.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::class::HypothesisClass;
use crate::domain::{rng_stream, sample, FiniteDistribution, Hypothesis, LabeledSample};
use crate::error::{Error, Result};
use crate::experiments::{
    curve_csv_string, fit_abstention_slope, fit_rate_slope, monte_carlo_curve, train, Construction,
    Family, Learner, LearnerConfig, RiskTag, Trained,
};
use crate::misspecified::{dpx_diameter, DEFAULT_C1, DEFAULT_C2};
use crate::reject::{abstaining_learner, aggregate_lq};
use crate::theory::{
    bernstein_estimate, excess_loss_deviation_check, identity_sweep, ratio_bound_check,
    target_membership_check, CheckReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_C: f64 = 1.0;

/// Environment variable capping the worker threads.
pub const WORKERS_ENV: &str = "REJECTLAB_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "rejectlab", version, about = "Classification with a reject option on finite domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Learn,
    Experiment,
    Diameter,
    Verify,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Learn => "learn",
            CommandKind::Experiment => "experiment",
            CommandKind::Diameter => "diameter",
            CommandKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one learner on a sample and write the model.
    Learn(RunConfig),
    /// Monte Carlo learning curve: CSV plus JSON sidecar.
    Experiment(RunConfig),
    /// Print VC dimension, combinatorial diameter and optionally D_PX(n).
    Diameter(RunConfig),
    /// Run one of the theory checks and write its report.
    Verify(RunConfig),
}

/// Every tunable of every command. A JSON config file supplies defaults and
/// flags override it; relative paths in the file resolve against its folder.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON config file.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Hypothesis class JSON: {"m": .., "members": ["0110", ..]}.
    #[arg(long)]
    pub class: Option<PathBuf>,
    /// Distribution JSON: {"m": .., "weights": [..], "eta1": [..]}.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    /// Labeled sample JSON: {"m": .., "items": [[x, y], ..]}; drawn from
    /// the distribution when absent.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// erm, abstain, aggregate_lq, finite_diameter, dist_dependent, memorize or oracle.
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// r, r0 or rp (Chow's risk at level --p).
    #[arg(long)]
    pub risk: Option<String>,
    /// identity, ratio, excess, membership or bernstein.
    #[arg(long)]
    pub check: Option<String>,
    /// Construction family; config file only.
    #[arg(skip)]
    pub family: Option<Family>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

macro_rules! prefer {
    ($flags:ident, $file:ident, $($field:ident),*) => {
        RunConfig { $($field: $flags.$field.or($file.$field),)* }
    };
}

impl RunConfig {
    /// Flags win over the file.
    pub fn merged_over(self, file: RunConfig) -> RunConfig {
        let flags = self;
        prefer!(
            flags, file, config, class, dist, sample, learner, p, h, q, c, c1, c2, delta, beta, n,
            n_grid, reps, trials, seed, risk, check, family, out, workers
        )
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.class, &mut cfg.dist, &mut cfg.sample, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn delta(&self) -> f64 {
        self.delta.unwrap_or(DEFAULT_DELTA)
    }

    fn c(&self) -> f64 {
        self.c.unwrap_or(DEFAULT_C)
    }

    fn c1(&self) -> f64 {
        self.c1.unwrap_or(DEFAULT_C1)
    }

    fn c2(&self) -> f64 {
        self.c2.unwrap_or(DEFAULT_C2)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Content hash used in output file names; excludes where output goes.
    pub fn digest(&self, command: CommandKind) -> Result<String> {
        let mut canon = self.clone();
        canon.out = None;
        canon.workers = None;
        canon.config = None;
        let json = serde_json::to_string(&(command, canon))?;
        let hash = Sha256::digest(json.as_bytes());
        Ok(hash.iter().take(6).map(|b| format!("{b:02x}")).collect())
    }

    fn constants(&self) -> serde_json::Value {
        serde_json::json!({
            "c": self.c(),
            "c1": self.c1(),
            "c2": self.c2(),
            "delta": self.delta(),
        })
    }
}

fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::Invalid(format!("missing required --{flag}")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {what} file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{what} file {}: {e}", path.display())))
}

fn load_class(cfg: &RunConfig) -> Result<HypothesisClass> {
    read_json(&require(&cfg.class, "class")?, "class")
}

fn load_dist(cfg: &RunConfig) -> Result<FiniteDistribution> {
    read_json(&require(&cfg.dist, "dist")?, "distribution")
}

fn parse_learner(cfg: &RunConfig) -> Result<Learner> {
    let name = require(&cfg.learner, "learner")?;
    Ok(match name.as_str() {
        "erm" => Learner::Erm,
        "abstain" => Learner::Abstain { p: require(&cfg.p, "p")? },
        "finite_diameter" => Learner::FiniteDiameter { h: require(&cfg.h, "h")? },
        "dist_dependent" => Learner::DistDependent {
            c1: cfg.c1(),
            c2: cfg.c2(),
        },
        "memorize" => Learner::Memorize,
        "oracle" => Learner::Oracle,
        other => return Err(Error::Invalid(format!("unknown learner `{other}`"))),
    })
}

fn parse_risk(cfg: &RunConfig) -> Result<RiskTag> {
    match cfg.risk.as_deref().unwrap_or("r").to_ascii_lowercase().as_str() {
        "r" => Ok(RiskTag::R),
        "r0" => Ok(RiskTag::R0),
        "rp" => Ok(RiskTag::Rp(require(&cfg.p, "p")?)),
        other => Err(Error::Invalid(format!("unknown risk `{other}`; use r, r0 or rp"))),
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename, so
/// readers never observe partial output.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn version() -> String {
    format!("rejectlab {}", env!("CARGO_PKG_VERSION"))
}

fn pretty(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn learn(cfg: &RunConfig) -> Result<String> {
    let class = load_class(cfg)?;
    let sample_data: LabeledSample = match &cfg.sample {
        Some(path) => read_json(path, "sample")?,
        None => {
            let dist = load_dist(cfg)?;
            let n = require(&cfg.n, "n")?;
            sample(&dist, n, &mut rng_stream(cfg.seed(), 0))
        }
    };
    let name = require(&cfg.learner, "learner")?;
    let model = match name.as_str() {
        "abstain" => {
            let m = abstaining_learner(&class, &sample_data, cfg.delta(), require(&cfg.p, "p")?, cfg.c())?;
            serde_json::json!({ "learner": "abstain", "model": m.to_doc() })
        }
        "aggregate_lq" => {
            let m = aggregate_lq(&class, &sample_data, cfg.delta(), require(&cfg.q, "q")?, cfg.c())?;
            serde_json::json!({ "learner": "aggregate_lq", "model": m.to_doc() })
        }
        _ => {
            let learner = parse_learner(cfg)?;
            let dist = match (&cfg.dist, learner) {
                (Some(_), _) => load_dist(cfg)?,
                (None, Learner::Erm | Learner::Memorize | Learner::FiniteDiameter { .. }) => {
                    FiniteDistribution::uniform(vec![0.5; class.domain_size()])?
                }
                (None, _) => return Err(Error::Invalid(format!("learner `{name}` needs --dist"))),
            };
            let construction = Construction::new(class, dist, "files", Default::default())?;
            let lc = LearnerConfig {
                learner,
                delta: cfg.delta(),
                c: cfg.c(),
            };
            let hypothesis = match train(&construction, &lc, &sample_data)? {
                Trained::Binary(f) => f,
                Trained::Abstaining(g) => g
                    .to_hypothesis()
                    .unwrap_or_else(|| Hypothesis::zeros(g.domain_size())),
            };
            serde_json::json!({ "learner": name, "model": { "hypothesis": hypothesis.to_bit_string() } })
        }
    };
    let doc = serde_json::json!({
        "model": model["model"],
        "learner": model["learner"],
        "constants": cfg.constants(),
        "sample_size": sample_data.len(),
    });
    let name = format!("learn-{}.json", cfg.digest(CommandKind::Learn)?);
    let path = write_atomic(&out_dir(cfg), &name, &pretty(&doc)?)?;
    Ok(path.display().to_string())
}

fn experiment(cfg: &RunConfig) -> Result<String> {
    let family = match &cfg.family {
        Some(f) => f.clone(),
        None => {
            let class = load_class(cfg)?;
            let dist = load_dist(cfg)?;
            Family::fixed(Construction::new(class, dist, "files", Default::default())?)
        }
    };
    let learner = parse_learner(cfg)?;
    let lc = LearnerConfig {
        learner,
        delta: cfg.delta(),
        c: cfg.c(),
    };
    let grid = require(&cfg.n_grid, "n-grid")?;
    let reps = cfg.reps.unwrap_or(100);
    let risk = parse_risk(cfg)?;
    let curve = monte_carlo_curve(&family, &lc, &grid, reps, risk, cfg.seed())?;
    let stem = format!("experiment-{}", cfg.digest(CommandKind::Experiment)?);
    let dir = out_dir(cfg);
    let csv_path = write_atomic(&dir, &format!("{stem}.csv"), curve_csv_string(&curve)?.as_bytes())?;
    let family_doc = match &family {
        Family::Fixed(c) => serde_json::to_value(&c.meta)?,
        other => serde_json::to_value(other)?,
    };
    let sidecar = serde_json::json!({
        "provenance": {
            "version": version(),
            "timestamp": timestamp(),
            "seed": cfg.seed(),
            "family": family_doc,
            "learner": lc,
            "risk": risk,
            "reps": reps,
        },
        "constants": cfg.constants(),
        "slope": fit_rate_slope(&curve).ok(),
        "abstention_slope": fit_abstention_slope(&curve).ok(),
        "curve": curve,
    });
    let json_path = write_atomic(&dir, &format!("{stem}.json"), &pretty(&sidecar)?)?;
    Ok(format!("{}\n{}", csv_path.display(), json_path.display()))
}

#[derive(Serialize)]
struct DiameterReport {
    d: usize,
    #[serde(rename = "D")]
    diameter: usize,
    #[serde(rename = "D_PX", skip_serializing_if = "Option::is_none")]
    dpx: Option<f64>,
    #[serde(rename = "D_PX_exact", skip_serializing_if = "Option::is_none")]
    dpx_exact: Option<bool>,
}

fn diameter(cfg: &RunConfig) -> Result<String> {
    let class = load_class(cfg)?;
    let mut report = DiameterReport {
        d: class.vc_dim()?,
        diameter: class.diameter(),
        dpx: None,
        dpx_exact: None,
    };
    if cfg.dist.is_some() {
        let dist = load_dist(cfg)?;
        let n = require(&cfg.n, "n")?;
        let r = dpx_diameter(&class, dist.weights(), n, cfg.c1())?;
        report.dpx = Some(r.value);
        report.dpx_exact = Some(r.exact);
    }
    Ok(serde_json::to_string(&report)?)
}

fn verify(cfg: &RunConfig) -> Result<(String, bool)> {
    let check = require(&cfg.check, "check")?;
    let trials = cfg.trials.unwrap_or(100);
    let seed = cfg.seed();
    let delta = cfg.delta();
    let mut params = serde_json::json!({ "seed": seed, "constants": cfg.constants() });
    let (report, passed) = match check.as_str() {
        "identity" => {
            let n = cfg.n.unwrap_or(20);
            let worst = identity_sweep(trials, n, seed)?;
            params["n"] = n.into();
            let report = CheckReport {
                check: check.clone(),
                params,
                trials,
                quantiles: vec![(1.0, worst)],
                pass_criteria_if_any: Some("max discrepancy <= 1e-12".into()),
            };
            (report, worst <= 1e-12)
        }
        "ratio" | "excess" => {
            let class = load_class(cfg)?;
            let dist = load_dist(cfg)?;
            let n = require(&cfg.n, "n")?;
            params["n"] = n.into();
            let stat = if check == "ratio" {
                ratio_bound_check(&class, &dist, n, delta, trials, seed)?
            } else {
                let q = cfg.q.unwrap_or(1.0);
                params["q"] = q.into();
                excess_loss_deviation_check(&class, &dist, n, delta, q, trials, seed)?
            };
            (CheckReport::from_statistic(&check, params, &stat), true)
        }
        "membership" => {
            let class = load_class(cfg)?;
            let dist = load_dist(cfg)?;
            let n = require(&cfg.n, "n")?;
            let r = target_membership_check(&class, &dist, n, delta, cfg.c(), trials, seed)?;
            params["n"] = n.into();
            params["frequency"] = r.frequency.into();
            params["fstar_index"] = r.fstar_index.into();
            params["fstar_ties"] = r.fstar_ties.into();
            let floor = 1.0 - delta - 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
            let report = CheckReport {
                check: check.clone(),
                params,
                trials,
                quantiles: vec![],
                pass_criteria_if_any: Some(format!("frequency >= {floor}")),
            };
            (report, r.frequency >= floor)
        }
        "bernstein" => {
            let class = load_class(cfg)?;
            let dist = load_dist(cfg)?;
            let beta = cfg.beta.unwrap_or(1.0);
            let b = bernstein_estimate(&class, &dist, beta)?;
            params["beta"] = beta.into();
            params["B"] = if b.is_finite() { b.into() } else { "infinite".into() };
            let report = CheckReport {
                check: check.clone(),
                params,
                trials: 1,
                quantiles: vec![],
                pass_criteria_if_any: None,
            };
            (report, true)
        }
        other => return Err(Error::Invalid(format!("unknown check `{other}`"))),
    };
    let mut doc = serde_json::to_value(&report)?;
    doc["version"] = version().into();
    doc["passed"] = passed.into();
    let name = format!("verify-{}.json", cfg.digest(CommandKind::Verify)?);
    let path = write_atomic(&out_dir(cfg), &name, &pretty(&doc)?)?;
    Ok((path.display().to_string(), passed))
}

fn configure_workers(cfg: &RunConfig) {
    let env = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    let workers = match (cfg.workers, env) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if let Some(k) = workers.filter(|k| *k > 0) {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_budget() {
        EXIT_BUDGET
    } else {
        EXIT_INVALID
    }
}

/// Runs the CLI on `args` (including the program name), printing results to
/// `stdout` and diagnostics to `stderr`. Returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let (kind, flags) = match cli.command {
        Command::Learn(c) => (CommandKind::Learn, c),
        Command::Experiment(c) => (CommandKind::Experiment, c),
        Command::Diameter(c) => (CommandKind::Diameter, c),
        Command::Verify(c) => (CommandKind::Verify, c),
    };
    let outcome = (|| -> Result<(String, bool)> {
        let cfg = match &flags.config {
            Some(path) => flags.clone().merged_over(RunConfig::load(path)?),
            None => flags.clone(),
        };
        configure_workers(&cfg);
        match kind {
            CommandKind::Learn => learn(&cfg).map(|s| (s, true)),
            CommandKind::Experiment => experiment(&cfg).map(|s| (s, true)),
            CommandKind::Diameter => diameter(&cfg).map(|s| (s, true)),
            CommandKind::Verify => verify(&cfg),
        }
    })();
    match outcome {
        Ok((text, passed)) => {
            let _ = writeln!(stdout, "{text}");
            if passed {
                EXIT_OK
            } else {
                let _ = writeln!(stderr, "error: {} check failed its pass criterion", kind.name());
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            p: Some(0.1),
            n: Some(10),
            ..Default::default()
        };
        let flags = RunConfig {
            p: Some(0.3),
            ..Default::default()
        };
        let merged = flags.merged_over(file);
        assert_eq!(merged.p, Some(0.3));
        assert_eq!(merged.n, Some(10));
    }

    #[test]
    fn digest_ignores_output_location() {
        let a = RunConfig {
            p: Some(0.1),
            out: Some("a".into()),
            ..Default::default()
        };
        let b = RunConfig {
            out: Some("b".into()),
            ..a.clone()
        };
        assert_eq!(a.digest(CommandKind::Learn).unwrap(), b.digest(CommandKind::Learn).unwrap());
        assert_ne!(
            a.digest(CommandKind::Learn).unwrap(),
            a.digest(CommandKind::Verify).unwrap()
        );
        assert_eq!(a.digest(CommandKind::Learn).unwrap().len(), 12);
    }

    #[test]
    fn unknown_config_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"pp": 1}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"p": 0.2, "n_grid": [8, 16]}"#).unwrap();
        assert_eq!(cfg.n_grid, Some(vec![8, 16]));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Budget("x".into())), EXIT_BUDGET);
        assert_eq!(exit_code(&Error::EmptySample), EXIT_INVALID);
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run_with(["rejectlab", "bogus"], &mut out, &mut err), EXIT_INVALID);
        assert_eq!(run_with(["rejectlab", "verify"], &mut out, &mut err), EXIT_INVALID);
    }
}
