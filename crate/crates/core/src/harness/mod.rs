//! Experiment driver: Monte-Carlo sweeps over `(n, seed)`, log-log rate
//! fits and invariant verification suites.

pub mod verify;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{run_algorithm, Algorithm, OfflineData, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::evaluation::{optimal_policy, suboptimality_against};
use crate::instances::{sample_bandit_with, sample_preference_with, ScenarioSpec};
use crate::io::{read_class, read_instance};
use crate::model::{BanditInstance, FunctionClass, Regularizer};
use crate::rng::RngSeed;
use crate::table::Policy;
use crate::uncertainty::{
    beta_radius, bonus_table, cached_covering_number, d2_concentrability, d2_tables, density_ratio_concentrability,
    Mode, Variant,
};

/// Exact CSV header of sweep output.
pub const CSV_HEADER: &str = "algo,eta,alpha,n,seed,subopt,event_e,c_pistar,d2_single,runtime_ms,status";

/// Default sample-size grid `2^7, …, 2^14`.
pub fn default_n_grid() -> Vec<usize> {
    (7..=14).map(|k| 1usize << k).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Scenario(ScenarioSpec),
    Files { instance: PathBuf, class: PathBuf },
}

impl InstanceSource {
    pub fn load(&self) -> Result<(BanditInstance, FunctionClass)> {
        match self {
            Self::Scenario(spec) => {
                let sc = spec.build()?;
                Ok((sc.instance, sc.class))
            }
            Self::Files { instance, class } => {
                let inst = read_instance(instance)?;
                let class = read_class(class)?;
                class.validate_against(&inst)?;
                Ok((inst, class))
            }
        }
    }
}

fn default_seeds() -> usize {
    100
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub source: InstanceSource,
    pub algo: Algorithm,
    pub eta: f64,
    /// χ² modulus for the f-divergence learners (default 1).
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; `None` uses every core, `Some(1)` runs sequentially.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Record wall-clock time per cell. Off by default so that output is
    /// byte-identical across runs.
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(source: InstanceSource, algo: Algorithm, eta: f64) -> Self {
        Self {
            source,
            algo,
            eta,
            alpha: None,
            n_grid: default_n_grid(),
            seeds: default_seeds(),
            delta: DEFAULT_DELTA,
            base_seed: 0,
            workers: None,
            record_runtime: false,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::InvalidParameter("seeds must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n_grid must be positive and strictly increasing".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} outside (0,1)", self.delta)));
        }
        self.regularizer().validate()
    }

    /// KL for the KL learners, `α(x−1)²/2` for the f learners.
    pub fn regularizer(&self) -> Regularizer {
        if self.algo.uses_f_divergence() {
            Regularizer::chi_squared(self.eta, self.alpha.unwrap_or(1.0))
        } else {
            Regularizer::kl(self.eta)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algo: Algorithm,
    pub eta: f64,
    pub alpha: Option<f64>,
    pub n: usize,
    pub seed: usize,
    pub subopt: f64,
    pub event_e: Option<bool>,
    pub c_pistar: f64,
    pub d2_single: f64,
    pub runtime_ms: u64,
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// How cells are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel { workers: Option<usize> },
}

impl Execution {
    /// Parallel when the feature is enabled and more than one worker is allowed.
    pub fn from_workers(workers: Option<usize>) -> Self {
        #[cfg(feature = "parallel")]
        if workers != Some(1) {
            return Self::Parallel { workers };
        }
        let _ = workers;
        Self::Sequential
    }
}

/// Everything a cell needs, shared read-only across workers.
pub struct SweepContext {
    pub instance: BanditInstance,
    pub class: FunctionClass,
    pub reg: Regularizer,
    pub best: Policy,
    pub algo: Algorithm,
    pub delta: f64,
    pub base_seed: RngSeed,
    pub c_pistar: f64,
    pub d2_single: f64,
    pub record_runtime: bool,
}

impl SweepContext {
    pub fn new(cfg: &SweepConfig) -> Result<Self> {
        cfg.validate()?;
        let (instance, class) = cfg.source.load()?;
        Self::from_parts(cfg, instance, class)
    }

    pub fn from_parts(cfg: &SweepConfig, instance: BanditInstance, class: FunctionClass) -> Result<Self> {
        class.validate_against(&instance)?;
        let reg = cfg.regularizer();
        let best = optimal_policy(&instance, &reg)?;
        let pi_ref = instance.reference_policy();
        let variant = if cfg.algo.is_dueling() { Variant::Dueling } else { Variant::Bandit };
        let c_pistar = density_ratio_concentrability(&best, &pi_ref);
        let d2_single = d2_concentrability(&class, &best, &pi_ref, &instance.context_dist, Mode::Single, variant);
        Ok(Self {
            instance,
            class,
            reg,
            best,
            algo: cfg.algo,
            delta: cfg.delta,
            base_seed: RngSeed(cfg.base_seed),
            c_pistar,
            d2_single,
            record_runtime: cfg.record_runtime,
        })
    }

    /// Runs one `(n, seed)` cell; failures become the row's status.
    pub fn run_cell(&self, n: usize, seed: usize) -> SweepRow {
        let start = Instant::now();
        let result = self.cell_result(n, seed);
        let runtime_ms = if self.record_runtime { start.elapsed().as_millis() as u64 } else { 0 };
        let (subopt, event_e, status) = match result {
            Ok((subopt, event_e)) => (subopt, event_e, "ok".to_string()),
            Err(e) => (f64::NAN, None, e.to_string()),
        };
        SweepRow {
            algo: self.algo,
            eta: self.reg.eta,
            alpha: self.reg.alpha(),
            n,
            seed,
            subopt,
            event_e,
            c_pistar: self.c_pistar,
            d2_single: self.d2_single,
            runtime_ms,
            status,
        }
    }

    fn cell_result(&self, n: usize, seed: usize) -> Result<(f64, Option<bool>)> {
        let mut rng = self.base_seed.stream(RngSeed::cell_stream(n as u64, seed as u64));
        let data = if self.algo.is_dueling() {
            OfflineData::Preferences(sample_preference_with(&self.instance, n, &mut rng)?)
        } else {
            OfflineData::Rewards(sample_bandit_with(&self.instance, n, &mut rng)?)
        };
        let pi_ref = self.instance.reference_policy();
        let out = run_algorithm(self.algo, &self.class, &data, &pi_ref, &self.instance.context_dist, &self.reg, self.delta)?;
        let subopt = suboptimality_against(&self.instance, &self.reg, &self.best, &out.policy)?;
        Ok((subopt, out.diagnostics.event_e))
    }

    fn run_n(&self, n: usize, seeds: usize, runner: &Runner) -> Vec<SweepRow> {
        match runner {
            Runner::Sequential => (0..seeds).map(|seed| self.run_cell(n, seed)).collect(),
            #[cfg(feature = "parallel")]
            Runner::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| (0..seeds).into_par_iter().map(|seed| self.run_cell(n, seed)).collect())
            }
        }
    }
}

enum Runner {
    Sequential,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

impl Runner {
    fn new(exec: Execution) -> Result<Self> {
        match exec {
            Execution::Sequential => Ok(Self::Sequential),
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => {
                let mut builder = rayon::ThreadPoolBuilder::new();
                if let Some(w) = workers {
                    builder = builder.num_threads(w);
                }
                let pool = builder.build().map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
                Ok(Self::Pool(pool))
            }
        }
    }
}

/// Runs the sweep, passing rows to `sink` in `(n, seed)` order as each
/// sample size completes.
pub fn run_sweep_with(cfg: &SweepConfig, exec: Execution, mut sink: impl FnMut(&SweepRow) -> Result<()>) -> Result<()> {
    let ctx = SweepContext::new(cfg)?;
    let runner = Runner::new(exec)?;
    for &n in &cfg.n_grid {
        for row in ctx.run_n(n, cfg.seeds, &runner) {
            sink(&row)?;
        }
    }
    Ok(())
}

/// Collects all rows of a sweep, scheduling by `cfg.workers`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(cfg.n_grid.len() * cfg.seeds);
    run_sweep_with(cfg, Execution::from_workers(cfg.workers), |row| {
        rows.push(row.clone());
        Ok(())
    })?;
    Ok(rows)
}

/// Streams a sweep as CSV, flushing after every sample size.
pub fn write_sweep_csv<W: Write>(cfg: &SweepConfig, writer: W) -> Result<Vec<SweepRow>> {
    let mut w = csv::Writer::from_writer(writer);
    let mut rows = Vec::new();
    let mut last_n = None;
    run_sweep_with(cfg, Execution::from_workers(cfg.workers), |row| {
        if last_n.is_some_and(|n| n != row.n) {
            w.flush()?;
        }
        last_n = Some(row.n);
        w.serialize(row)?;
        rows.push(row.clone());
        Ok(())
    })?;
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(rows)
}

pub fn read_sweep_csv<R: std::io::Read>(reader: R) -> Result<Vec<SweepRow>> {
    Ok(csv::Reader::from_reader(reader).deserialize().collect::<Result<_, _>>()?)
}

/// Header of the D² table written by [`write_d2_csv`].
pub const D2_CSV_HEADER: &str = "s,a,d2_bandit,d2_dueling,bonus";

/// Per-cell D² values under `π_ref` and the bonus `β·√D²` of `variant`,
/// with `β` sized for `n` samples at confidence `delta`.
pub fn write_d2_csv<W: Write>(
    writer: W,
    class: &FunctionClass,
    instance: &BanditInstance,
    n: usize,
    delta: f64,
    variant: Variant,
) -> Result<()> {
    if n == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter("need n >= 1 and delta in (0,1)".into()));
    }
    class.validate_against(instance)?;
    let pi_ref = instance.reference_policy();
    let rho = &instance.context_dist;
    let eps_c = 1.0 / n as f64;
    let beta = beta_radius(n, delta, eps_c, cached_covering_number(class, eps_c));
    let tables = d2_tables(class, &pi_ref, rho);
    let bonus = bonus_table(class, &pi_ref, rho, beta, variant).values;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(D2_CSV_HEADER.split(','))?;
    for s in 0..instance.num_states {
        for a in 0..instance.num_actions {
            w.write_record([
                s.to_string(),
                a.to_string(),
                tables.bandit.get(s, a).to_string(),
                tables.dueling.get(s, a).to_string(),
                bonus.get(s, a).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Median,
    Mean,
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Self::Median),
            "mean" => Ok(Self::Mean),
            _ => Err(Error::InvalidParameter(format!("unknown statistic `{s}`"))),
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// The chosen statistic of successful rows' suboptimality per `n`.
pub fn summarize(rows: &[SweepRow], statistic: Statistic) -> Vec<(usize, f64)> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.is_ok() && r.subopt.is_finite()) {
        by_n.entry(row.n).or_default().push(row.subopt);
    }
    by_n.into_iter()
        .map(|(n, mut v)| {
            let stat = match statistic {
                Statistic::Median => median(&mut v),
                Statistic::Mean => v.iter().sum::<f64>() / v.len() as f64,
            };
            (n, stat)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(log n, log statistic)`.
pub fn rate_fit(rows: &[SweepRow], statistic: Statistic) -> Result<RateFit> {
    fit_points(&summarize(rows, statistic))
}

/// [`rate_fit`] on precomputed `(n, statistic)` points.
pub fn fit_points(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewSampleSizes(points.len()));
    }
    if points.iter().any(|&(_, v)| !(v > 0.0)) {
        return Err(Error::DegenerateRateFit);
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(RateFit { slope, intercept, r2 })
}
