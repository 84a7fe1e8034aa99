//! Seeded experiment runner: trials, cross-trial summaries, sensitivity
//! sweeps and CSV/JSON output.
//!
//! Trial `i` of an experiment with master seed `s` draws its problem
//! (threshold and safe seeds) from `RngStream::derive(s, i, PROBLEM_STREAM)`
//! and its optimizer randomness from `RngStream::derive(s, i, OPTIMIZER_STREAM)`,
//! so results do not depend on thread scheduling and different algorithms
//! see identical problem instances.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{avoidance_ask, AvoidanceConfig};
use crate::cmaes::{self, should_terminate, DistributionState, Member, StrategyParams, Termination};
use crate::error::{Error, Result};
use crate::mathkit::{RngStream, SymMatrix, RNG_VERSION};
use crate::problems::{Benchmark, ProblemInstance, SafetyKind, DEFAULT_SEEDS};
use crate::safe::{EvaluatedSolution, Proposal, SafeCmaes, SafeParams};

pub const PROBLEM_STREAM: u64 = 0;
pub const OPTIMIZER_STREAM: u64 = 1;

/// Version of the CSV layouts written by this module.
pub const LOG_SCHEMA_VERSION: u32 = 1;

pub const ALPHA_SWEEP: [f64; 7] = [1.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0];
pub const ZETA_SWEEP: [f64; 5] = [1.0, 5.0, 10.0, 20.0, 40.0];
pub const T_DATA_SWEEP: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 9.0];
pub const W_SAFE_SWEEP: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SafeCmaes,
    Cmaes,
    Avoidance,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SafeCmaes => "safe-cmaes",
            Algorithm::Cmaes => "cmaes",
            Algorithm::Avoidance => "avoidance",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "safe-cmaes" => Ok(Algorithm::SafeCmaes),
            "cmaes" => Ok(Algorithm::Cmaes),
            "avoidance" => Ok(Algorithm::Avoidance),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Everything needed to reproduce a batch of trials. Missing JSON fields
/// take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Benchmark,
    pub dim: usize,
    pub safety: SafetyKind,
    pub algorithm: Algorithm,
    /// Total evaluations per trial, safe seeds excluded.
    pub budget: usize,
    pub trials: usize,
    pub seed: u64,
    pub n_seeds: usize,
    pub sigma0: f64,
    /// Population size; `None` means 4 + ⌊3 ln d⌋.
    pub lambda: Option<usize>,
    pub alpha: f64,
    pub zeta_init: f64,
    pub t_data: usize,
    pub l_min: f64,
    pub gamma: f64,
    pub w_safe: f64,
    pub w_unsafe: f64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let safe = SafeParams::default();
        let avoid = AvoidanceConfig::default();
        Self {
            problem: Benchmark::Sphere,
            dim: 5,
            safety: SafetyKind::ObjectiveMedian,
            algorithm: Algorithm::SafeCmaes,
            budget: 1000,
            trials: 10,
            seed: 0,
            n_seeds: DEFAULT_SEEDS,
            sigma0: 2.0,
            lambda: None,
            alpha: safe.alpha,
            zeta_init: safe.zeta_init,
            t_data: safe.t_data,
            l_min: safe.l_min,
            gamma: safe.gamma,
            w_safe: avoid.w_safe,
            w_unsafe: avoid.w_unsafe,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn strategy(&self) -> Result<StrategyParams> {
        match self.lambda {
            Some(l) => StrategyParams::with_lambda(self.dim, l),
            None => StrategyParams::new(self.dim),
        }
    }

    pub fn safe_params(&self) -> SafeParams {
        SafeParams {
            t_data: self.t_data,
            zeta_init: self.zeta_init,
            alpha: self.alpha,
            l_min: self.l_min,
            gamma: self.gamma,
            ..SafeParams::default()
        }
    }

    pub fn avoidance(&self) -> AvoidanceConfig {
        AvoidanceConfig {
            w_safe: self.w_safe,
            w_unsafe: self.w_unsafe,
            ..AvoidanceConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let strategy = self.strategy()?;
        if self.budget < strategy.lambda {
            return Err(Error::Config(format!(
                "budget {} is smaller than the population size {}",
                self.budget, strategy.lambda
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::MissingSeeds);
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Config("sigma0 must be positive".into()));
        }
        self.safe_params().validate()?;
        self.avoidance().validate()
    }

    /// Directory-friendly name of this configuration.
    pub fn label(&self) -> String {
        format!(
            "{}-d{}-{}-{}",
            self.problem, self.dim, self.safety, self.algorithm
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Why a trial stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialEnd {
    BudgetExhausted,
    TargetReached,
    Collapsed,
    AvoidanceExhausted,
    Failed(String),
}

impl From<Termination> for TrialEnd {
    fn from(t: Termination) -> Self {
        match t {
            Termination::TargetReached => TrialEnd::TargetReached,
            Termination::Collapsed => TrialEnd::Collapsed,
        }
    }
}

/// State of one trial after an iteration. Row 0 is the state before the
/// first evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iter: usize,
    pub evals: usize,
    pub best_safe_f: f64,
    pub unsafe_count: usize,
    pub sigma: f64,
    /// Extreme eigenvalues of σ²C.
    pub eig_min: f64,
    pub eig_max: f64,
    pub lipschitz: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: f64,
    /// Best objective over all evaluations, safe or not.
    pub best_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub f: f64,
    pub safe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub trial: usize,
    pub master_seed: u64,
    pub algorithm: Algorithm,
    /// Thresholds h_j of this trial's constraints.
    pub thresholds: Vec<f64>,
    pub best_seed_f: f64,
    pub termination: TrialEnd,
    pub rows: Vec<LogRow>,
    /// One entry per evaluation, in order.
    #[serde(skip)]
    pub records: Vec<EvalRecord>,
}

impl TrialLog {
    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn final_best_safe_f(&self) -> f64 {
        self.last().map_or(f64::INFINITY, |r| r.best_safe_f)
    }

    pub fn unsafe_count(&self) -> usize {
        self.last().map_or(0, |r| r.unsafe_count)
    }

    pub fn evaluations(&self) -> usize {
        self.last().map_or(0, |r| r.evals)
    }
}

#[allow(clippy::large_enum_variant)]
enum Driver {
    Safe(Box<SafeCmaes>),
    Plain {
        state: DistributionState,
        history: Option<Vec<EvaluatedSolution>>,
    },
}

impl Driver {
    fn state(&self) -> &DistributionState {
        match self {
            Driver::Safe(s) => s.state(),
            Driver::Plain { state, .. } => state,
        }
    }
}

struct Counters {
    evals: usize,
    unsafe_count: usize,
    best_safe_f: f64,
    best_f: f64,
}

fn make_row(iter: usize, c: &Counters, driver: &Driver, p: usize) -> LogRow {
    let st = driver.state();
    let s2 = st.sigma() * st.sigma();
    let (lipschitz, rho, tau) = match driver {
        Driver::Safe(s) => {
            let l = s.lipschitz();
            (l.estimates.clone(), l.rho.clone(), l.tau)
        }
        Driver::Plain { .. } => (vec![f64::NAN; p], vec![f64::NAN; p], f64::NAN),
    };
    LogRow {
        iter,
        evals: c.evals,
        best_safe_f: c.best_safe_f,
        unsafe_count: c.unsafe_count,
        sigma: st.sigma(),
        eig_min: s2 * st.eig_min(),
        eig_max: s2 * st.eig_max(),
        lipschitz,
        rho,
        tau,
        best_f: c.best_f,
    }
}

/// Runs one trial. Trial-fatal errors end the trial and are recorded in
/// [`TrialLog::termination`].
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> TrialLog {
    let mut log = TrialLog {
        trial,
        master_seed: config.seed,
        algorithm: config.algorithm,
        thresholds: Vec::new(),
        best_seed_f: f64::NAN,
        termination: TrialEnd::BudgetExhausted,
        rows: Vec::new(),
        records: Vec::new(),
    };
    if let Err(e) = trial_loop(config, trial, &mut log) {
        log.termination = match e {
            Error::AvoidanceExhausted { .. } => TrialEnd::AvoidanceExhausted,
            Error::Math(_) => TrialEnd::Collapsed,
            other => TrialEnd::Failed(other.to_string()),
        };
    }
    log
}

fn trial_loop(config: &ExperimentConfig, trial: usize, log: &mut TrialLog) -> Result<()> {
    config.validate()?;
    let mut problem_rng = RngStream::derive(config.seed, trial as u64, PROBLEM_STREAM);
    let mut rng = RngStream::derive(config.seed, trial as u64, OPTIMIZER_STREAM);
    let instance = ProblemInstance::generate(
        config.problem,
        config.dim,
        config.safety,
        config.n_seeds,
        &mut problem_rng,
    )?;
    log.thresholds = instance.thresholds();
    let p = instance.constraints.len();
    let strategy = config.strategy()?;

    let best_seed = crate::safe::init_mean(&instance.seeds)?;
    log.best_seed_f = best_seed.f;
    let initial = DistributionState::new(
        best_seed.x.clone(),
        config.sigma0,
        SymMatrix::identity(config.dim),
    )?;
    let mut driver = match config.algorithm {
        Algorithm::SafeCmaes => Driver::Safe(Box::new(SafeCmaes::new(
            instance.seeds.clone(),
            initial,
            strategy.clone(),
            config.safe_params(),
            &mut rng,
        )?)),
        Algorithm::Cmaes => Driver::Plain {
            state: initial,
            history: None,
        },
        Algorithm::Avoidance => Driver::Plain {
            state: initial,
            history: Some(instance.seeds.clone()),
        },
    };
    let avoidance = config.avoidance();

    let mut c = Counters {
        evals: 0,
        unsafe_count: 0,
        best_safe_f: best_seed.f,
        best_f: best_seed.f,
    };
    log.rows.push(make_row(0, &c, &driver, p));

    let mut iter = 0;
    while c.evals + strategy.lambda <= config.budget {
        iter += 1;
        let proposals: Vec<Proposal> = match &driver {
            Driver::Safe(s) => s.ask(&mut rng)?,
            Driver::Plain {
                state,
                history: Some(h),
            } => avoidance_ask(state, &strategy, h, &avoidance, &mut rng)?,
            Driver::Plain {
                state,
                history: None,
            } => cmaes::sample_raw(&strategy, &mut rng)
                .into_iter()
                .map(|z| {
                    let (y, x) = state.decode(&z);
                    Proposal {
                        z_raw: z.clone(),
                        z,
                        y,
                        x,
                        xi: 1.0,
                    }
                })
                .collect(),
        };
        let evaluated: Vec<EvaluatedSolution> = proposals
            .iter()
            .map(|p| instance.evaluate(p.x.clone()))
            .collect();

        for e in &evaluated {
            c.evals += 1;
            log.records.push(EvalRecord {
                f: e.f,
                safe: e.safe,
            });
            c.best_f = c.best_f.min(e.f);
            if e.safe {
                c.best_safe_f = c.best_safe_f.min(e.f);
            } else {
                c.unsafe_count += 1;
            }
        }

        match &mut driver {
            Driver::Safe(s) => s.tell(&proposals, &evaluated, &mut rng)?,
            Driver::Plain { state, history } => {
                let members: Vec<Member> = proposals
                    .iter()
                    .zip(&evaluated)
                    .map(|(p, e)| Member {
                        z: p.z.clone(),
                        y: p.y.clone(),
                        x: p.x.clone(),
                        f: e.f,
                    })
                    .collect();
                *state = cmaes::tell(state, &strategy, &members)?;
                if let Some(h) = history {
                    h.extend(evaluated);
                }
            }
        }
        log.rows.push(make_row(iter, &c, &driver, p));

        if let Some(t) = should_terminate(driver.state(), c.best_safe_f) {
            log.termination = t.into();
            return Ok(());
        }
    }
    log.termination = TrialEnd::BudgetExhausted;
    Ok(())
}

/// Q1, median and Q3 with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> [f64; 3] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        if lo == hi {
            v[lo]
        } else {
            v[lo] + frac * (v[hi] - v[lo])
        }
    };
    [q(0.25), q(0.5), q(0.75)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub evals: usize,
    /// Q1, median, Q3.
    pub best_safe_f: [f64; 3],
    pub unsafe_count: [f64; 3],
}

/// Per-evaluation-count quartiles across trials. Trials that stopped early
/// contribute their final row to every later evaluation count.
pub fn summarize(logs: &[TrialLog]) -> Vec<SummaryRow> {
    let len = logs.iter().map(|l| l.rows.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let rows: Vec<&LogRow> = logs
                .iter()
                .filter_map(|l| l.rows.get(k).or(l.rows.last()))
                .collect();
            let evals = logs
                .iter()
                .filter_map(|l| l.rows.get(k))
                .map(|r| r.evals)
                .max()
                .unwrap_or(0);
            let best: Vec<f64> = rows.iter().map(|r| r.best_safe_f).collect();
            let unsafe_counts: Vec<f64> = rows.iter().map(|r| r.unsafe_count as f64).collect();
            SummaryRow {
                evals,
                best_safe_f: quartiles(&best),
                unsafe_count: quartiles(&unsafe_counts),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub logs: Vec<TrialLog>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn unsafe_counts(&self) -> Vec<f64> {
        self.logs.iter().map(|l| l.unsafe_count() as f64).collect()
    }

    pub fn median_unsafe(&self) -> f64 {
        quartiles(&self.unsafe_counts())[1]
    }

    pub fn final_best(&self) -> Vec<f64> {
        self.logs.iter().map(TrialLog::final_best_safe_f).collect()
    }
}

/// Runs all trials of `config` in parallel; logs come back in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let logs: Vec<TrialLog> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect();
    let summary = summarize(&logs);
    Ok(ExperimentResult {
        config: config.clone(),
        logs,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Alpha,
    ZetaInit,
    TData,
    /// Safe-point weight of the violation-avoidance baseline.
    WSafe,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::ZetaInit => "zeta-init",
            SweepParam::TData => "t-data",
            SweepParam::WSafe => "w-safe",
        }
    }

    pub fn default_values(self) -> &'static [f64] {
        match self {
            SweepParam::Alpha => &ALPHA_SWEEP,
            SweepParam::ZetaInit => &ZETA_SWEEP,
            SweepParam::TData => &T_DATA_SWEEP,
            SweepParam::WSafe => &W_SAFE_SWEEP,
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Alpha => cfg.alpha = value,
            SweepParam::ZetaInit => cfg.zeta_init = value,
            SweepParam::WSafe => cfg.w_safe = value,
            SweepParam::TData => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("t-data must be a positive integer, got {value}")));
                }
                cfg.t_data = value as usize;
            }
        }
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "zeta-init" | "zeta_init" => Ok(SweepParam::ZetaInit),
            "t-data" | "t_data" => Ok(SweepParam::TData),
            "w-safe" | "w_safe" => Ok(SweepParam::WSafe),
            _ => Err(Error::UnknownParameter(s.to_string())),
        }
    }
}

/// One experiment per value, all sharing the base master seed so every
/// value sees the same problem instances.
pub fn sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<(f64, ExperimentResult)>> {
    values
        .iter()
        .map(|&v| Ok((v, run_experiment(&param.apply(base, v)?)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// output

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Header of the per-trial CSV for `p` constraints.
pub fn trial_header(p: usize) -> String {
    let mut cols: Vec<String> = ["iter", "evals", "best_safe_f", "unsafe_count", "sigma", "eig_min", "eig_max"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=p).map(|j| format!("L_{j}")));
    cols.extend((1..=p).map(|j| format!("rho_{j}")));
    cols.push("tau".into());
    cols.push("best_f".into());
    cols.join(",")
}

pub const SUMMARY_HEADER: &str = "evals,best_safe_f_q1,best_safe_f_median,best_safe_f_q3,unsafe_count_q1,unsafe_count_median,unsafe_count_q3";

pub fn write_trial_csv(path: &Path, log: &TrialLog) -> Result<()> {
    let p = log.thresholds.len();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", trial_header(p))?;
    for r in &log.rows {
        let mut fields = vec![
            r.iter.to_string(),
            r.evals.to_string(),
            fmt_f(r.best_safe_f),
            r.unsafe_count.to_string(),
            fmt_f(r.sigma),
            fmt_f(r.eig_min),
            fmt_f(r.eig_max),
        ];
        fields.extend(r.lipschitz.iter().map(|v| fmt_f(*v)));
        fields.extend(r.rho.iter().map(|v| fmt_f(*v)));
        fields.push(fmt_f(r.tau));
        fields.push(fmt_f(r.best_f));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in summary {
        let fields: Vec<String> = std::iter::once(r.evals.to_string())
            .chain(r.best_safe_f.iter().map(|v| fmt_f(*v)))
            .chain(r.unsafe_count.iter().map(|v| fmt_f(*v)))
            .collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrialMeta<'a> {
    schema_version: u32,
    rng: &'a str,
    trial: usize,
    master_seed: u64,
    algorithm: Algorithm,
    thresholds: &'a [f64],
    best_seed_f: f64,
    termination: &'a TrialEnd,
}

/// Writes `config.json`, `summary.csv` and per-trial `trial_NNN.csv` /
/// `trial_NNN.json` into `dir`.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&result.config)?,
    )?;
    write_summary_csv(&dir.join("summary.csv"), &result.summary)?;
    for log in &result.logs {
        write_trial_csv(&dir.join(format!("trial_{:03}.csv", log.trial)), log)?;
        let meta = TrialMeta {
            schema_version: LOG_SCHEMA_VERSION,
            rng: RNG_VERSION,
            trial: log.trial,
            master_seed: log.master_seed,
            algorithm: log.algorithm,
            thresholds: &log.thresholds,
            best_seed_f: log.best_seed_f,
            termination: &log.termination,
        };
        fs::write(
            dir.join(format!("trial_{:03}.json", log.trial)),
            serde_json::to_string_pretty(&meta)?,
        )?;
    }
    Ok(())
}
