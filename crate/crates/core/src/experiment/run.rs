use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModulatorConfig, TimeChangeSpec};
use crate::calculus::{
    abel_identity_gap, cross_variation, function_of_z_integral, ito_formula_residual,
    quadratic_variation, stieltjes_integral, ItoField,
};
use crate::error::{Error, Result};
use crate::fbm::{brownian_path, FbmSampler, TimeChange, TimeChangedFbm};
use crate::market::price_path;
use crate::path::{Partition, SamplePath};
use crate::seeding::path_seed;
use crate::stats::{self, CompensatedSum};
use crate::strategy::{arbitrage_certificate, portfolio_value, CertificateStatus};
use crate::volatility::{simulate_volatility, PhiFunction};

/// Draws modulator paths on the finest grid of a run.
#[derive(Debug)]
pub enum ModulatorEngine {
    Uniform(FbmSampler),
    /// Deterministic clock: one factorization shared by all seeds.
    FixedClock(TimeChangedFbm),
    /// Random clock: the covariance is refactorized for every seed.
    RandomClock {
        grid: Partition,
        hurst: f64,
        params: crate::fbm::CirParams,
    },
}

impl ModulatorEngine {
    pub fn new(config: &ModulatorConfig, grid: &Partition) -> Result<Self> {
        match *config {
            ModulatorConfig::Fbm { hurst } => Ok(Self::Uniform(FbmSampler::new(
                hurst,
                grid.horizon(),
                grid.num_steps(),
            )?)),
            ModulatorConfig::TimeChanged { hurst, time_change } => {
                let tc = match time_change {
                    TimeChangeSpec::Identity => TimeChange::identity(grid),
                    TimeChangeSpec::Power { p } => TimeChange::power(grid, p)?,
                    TimeChangeSpec::IntegratedCir(params) => {
                        params.validate()?;
                        return Ok(Self::RandomClock {
                            grid: grid.clone(),
                            hurst,
                            params,
                        });
                    }
                };
                Ok(Self::FixedClock(TimeChangedFbm::new(&tc, hurst)?))
            }
        }
    }

    pub fn sample(&self, seed: u64) -> Result<SamplePath> {
        match self {
            Self::Uniform(s) => Ok(s.sample(seed)),
            Self::FixedClock(s) => Ok(s.sample(seed)),
            Self::RandomClock {
                grid,
                hurst,
                params,
            } => {
                let tc = TimeChange::integrated_cir(grid, *params, seed)?;
                Ok(TimeChangedFbm::new(&tc, *hurst)?.sample(seed))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub seed: usize,
    pub level: u32,
    pub p_t: f64,
    pub exponent: f64,
    pub cert_pass: bool,
    /// `None` when the path failed before a certificate could be issued.
    pub status: Option<CertificateStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: u32,
    pub mean_maxabs: f64,
    pub median_maxabs: f64,
    pub max_maxabs: f64,
    /// Ensemble mean of the quadratic variation of `int sigma dZ`.
    pub qv_of_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalculusRow {
    pub verifier: String,
    pub level: u32,
    pub mean_residual: f64,
    /// Log-log slope over this and all coarser levels; NaN for the first.
    pub slope_so_far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Consistency,
    Numeric,
    Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: usize,
    pub level: Option<u32>,
    pub kind: FailureKind,
    pub message: String,
}

impl SeedFailure {
    fn from_error(seed: usize, level: Option<u32>, e: &Error) -> Self {
        Self {
            seed,
            level,
            kind: if e.is_consistency() {
                FailureKind::Consistency
            } else {
                FailureKind::Numeric
            },
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// False when the check does not apply to this configuration.
    pub applicable: bool,
    pub passed: bool,
    pub detail: String,
    /// A failed consistency verdict signals broken algebra, not bad statistics.
    #[serde(default)]
    pub consistency: bool,
}

impl Verdict {
    fn check(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            applicable: true,
            passed,
            detail,
            consistency: false,
        }
    }

    fn not_applicable(name: &str, why: &str) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            passed: true,
            detail: why.into(),
            consistency: false,
        }
    }

    fn consistency(mut self) -> Self {
        self.consistency = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    StatisticalFailure,
    ConsistencyFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::StatisticalFailure => 2,
            Outcome::ConsistencyFailure => 3,
        }
    }
}

/// Exit code for an invalid configuration.
pub const CONFIG_ERROR_EXIT_CODE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Experiment,
    Calculus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: RunKind,
    pub config: ExperimentConfig,
    /// Sorted by `(seed, level)`.
    pub terminal: Vec<TerminalRecord>,
    /// One row per grid level, coarse to fine.
    pub levels: Vec<LevelStats>,
    /// Sorted by verifier name, then level.
    pub calculus: Vec<CalculusRow>,
    pub slopes: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub failures: Vec<SeedFailure>,
    pub version: String,
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn outcome(&self) -> Outcome {
        let consistency = self
            .failures
            .iter()
            .any(|f| f.kind == FailureKind::Consistency)
            || self.verdicts.iter().any(|v| v.consistency && !v.passed);
        if consistency {
            Outcome::ConsistencyFailure
        } else if !self.failures.is_empty() || self.verdicts.iter().any(|v| !v.passed) {
            Outcome::StatisticalFailure
        } else {
            Outcome::Pass
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.outcome().exit_code()
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Mean residual column of one calculus verifier, coarse to fine.
    pub fn calculus_series(&self, verifier: &str) -> Vec<f64> {
        self.calculus
            .iter()
            .filter(|r| r.verifier == verifier)
            .map(|r| r.mean_residual)
            .collect()
    }
}

pub fn dyadic_grids(horizon: f64, levels: &[u32]) -> Result<Vec<Partition>> {
    levels
        .iter()
        .map(|&k| Partition::dyadic(horizon, k))
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct LevelOutcome {
    p_t: f64,
    exponent: f64,
    status: CertificateStatus,
    max_abs: f64,
    qv: f64,
    repr_gap: f64,
}

struct SeedRun {
    levels: Vec<std::result::Result<LevelOutcome, SeedFailure>>,
}

fn strides(levels: &[u32]) -> Vec<usize> {
    let top = *levels.iter().max().expect("nonempty levels");
    levels.iter().map(|&k| 1usize << (top - k)).collect()
}

fn run_seed(
    config: &ExperimentConfig,
    engine: &ModulatorEngine,
    fine: &Partition,
    seed_index: usize,
) -> SeedRun {
    let seed = path_seed(config.master_seed, seed_index as u64);
    let strides = strides(&config.grid_levels);
    let fail_all = |e: &Error| SeedRun {
        levels: config
            .grid_levels
            .iter()
            .map(|&k| Err(SeedFailure::from_error(seed_index, Some(k), e)))
            .collect(),
    };
    let z_fine = match engine.sample(seed) {
        Ok(z) => z,
        Err(e) => return fail_all(&e),
    };
    let vol_fine = match simulate_volatility(&config.volatility, fine, seed, Some(&z_fine)) {
        Ok(v) => v,
        Err(e) => return fail_all(&e),
    };

    let levels = config
        .grid_levels
        .iter()
        .zip(&strides)
        .map(|(&level, &stride)| {
            let outcome = (|| -> Result<LevelOutcome> {
                let z = z_fine.coarsen(stride)?;
                let vol = vol_fine.coarsen(stride)?;
                let paths = price_path(&config.market, &vol, &z)?;
                let traj = portfolio_value(&paths, &config.strategy)?;
                let cert = arbitrage_certificate(&traj);
                Ok(LevelOutcome {
                    p_t: cert.terminal_value,
                    exponent: cert.terminal_exponent,
                    status: cert.status,
                    max_abs: traj.max_abs_residual(),
                    qv: quadratic_variation(&paths.log_integral)?,
                    repr_gap: traj.representation_gap,
                })
            })();
            outcome.map_err(|e| SeedFailure::from_error(seed_index, Some(level), &e))
        })
        .collect();
    SeedRun { levels }
}

/// Mean, median and max of per-seed values (NaN when empty).
fn summarize(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    (
        stats::mean(values),
        stats::median(values),
        stats::max(values),
    )
}

fn log_log(levels: &[u32], ys: &[f64]) -> f64 {
    let xs: Vec<f64> = levels.iter().map(|&k| (1u64 << k) as f64).collect();
    stats::log_log_slope(&xs, ys)
}

/// Modulator, volatility, prices, portfolio and certificate for every seed at
/// every level. A seed's modulator and volatility are drawn once on the finest
/// grid and observed on each coarser level, so levels share one path.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let fine = Partition::dyadic(config.market.horizon, config.finest_level())?;
    let engine = ModulatorEngine::new(&config.modulator, &fine)?;

    let runs: Vec<SeedRun> = (0..config.num_seeds)
        .into_par_iter()
        .map(|i| run_seed(config, &engine, &fine, i))
        .collect();

    let levels = &config.grid_levels;
    let mut terminal = Vec::with_capacity(runs.len() * levels.len());
    let mut failures = Vec::new();
    let mut per_level_max: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    let mut per_level_qv: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    let mut repr_gap: f64 = 0.0;
    let mut statuses_at_finest = Vec::new();

    let finest_idx = levels.len() - 1;
    for (seed, run) in runs.iter().enumerate() {
        for (j, res) in run.levels.iter().enumerate() {
            match res {
                Ok(o) => {
                    let pass = o.status != CertificateStatus::Failed;
                    terminal.push(TerminalRecord {
                        seed,
                        level: levels[j],
                        p_t: o.p_t,
                        exponent: o.exponent,
                        cert_pass: pass,
                        status: Some(o.status),
                    });
                    if !pass {
                        failures.push(SeedFailure {
                            seed,
                            level: Some(levels[j]),
                            kind: FailureKind::Certificate,
                            message: format!(
                                "certificate failed: P_T = {}, exponent = {}",
                                o.p_t, o.exponent
                            ),
                        });
                    }
                    per_level_max[j].push(o.max_abs);
                    per_level_qv[j].push(o.qv);
                    repr_gap = repr_gap.max(o.repr_gap);
                    if j == finest_idx {
                        statuses_at_finest.push(Some(o.status));
                    }
                }
                Err(f) => {
                    terminal.push(TerminalRecord {
                        seed,
                        level: levels[j],
                        p_t: f64::NAN,
                        exponent: f64::NAN,
                        cert_pass: false,
                        status: None,
                    });
                    failures.push(f.clone());
                    if j == finest_idx {
                        statuses_at_finest.push(None);
                    }
                }
            }
        }
    }

    let level_stats: Vec<LevelStats> = levels
        .iter()
        .enumerate()
        .map(|(j, &level)| {
            let (mean, median, max) = summarize(&per_level_max[j]);
            LevelStats {
                level,
                mean_maxabs: mean,
                median_maxabs: median,
                max_maxabs: max,
                qv_of_integral: if per_level_qv[j].is_empty() {
                    f64::NAN
                } else {
                    stats::mean(&per_level_qv[j])
                },
            }
        })
        .collect();

    let means: Vec<f64> = level_stats.iter().map(|s| s.mean_maxabs).collect();
    let qvs: Vec<f64> = level_stats.iter().map(|s| s.qv_of_integral).collect();
    let mut slopes = BTreeMap::new();
    slopes.insert("self_financing_maxabs".to_string(), log_log(levels, &means));
    slopes.insert("integral_qv".to_string(), log_log(levels, &qvs));

    let t = &config.thresholds;
    let mut verdicts = Vec::new();

    let cert_failures = failures
        .iter()
        .filter(|f| f.kind == FailureKind::Certificate)
        .count();
    verdicts.push(Verdict::check(
        "certificates",
        cert_failures == 0,
        format!("{cert_failures} failed certificates"),
    ));

    let all_null = statuses_at_finest
        .iter()
        .all(|s| *s == Some(CertificateStatus::NullArbitrage));
    if all_null {
        verdicts.push(Verdict::not_applicable(
            "terminal_positive",
            "exponent vanishes identically; no gain is possible",
        ));
    } else {
        let positive = statuses_at_finest
            .iter()
            .filter(|s| **s == Some(CertificateStatus::Arbitrage))
            .count();
        let rate = positive as f64 / statuses_at_finest.len() as f64;
        verdicts.push(Verdict::check(
            "terminal_positive",
            rate >= t.min_terminal_positive_rate,
            format!(
                "P_T > 0 on {positive} of {} seeds at level {}",
                statuses_at_finest.len(),
                levels[finest_idx]
            ),
        ));
    }

    verdicts.push(
        Verdict::check(
            "representation",
            repr_gap <= t.exact_tolerance,
            format!("largest relative holdings gap {repr_gap:e}"),
        )
        .consistency(),
    );

    let degenerate = means.iter().all(|&m| m <= t.exact_tolerance);
    if degenerate {
        verdicts.push(Verdict::check(
            "self_financing_monotone",
            true,
            "residuals vanish at every level".into(),
        ));
        verdicts.push(Verdict::not_applicable(
            "self_financing_slope",
            "residuals vanish at every level",
        ));
    } else {
        let steps = stats::non_decreasing_steps(&means);
        verdicts.push(Verdict::check(
            "self_financing_monotone",
            steps <= t.max_non_monotone_steps,
            format!(
                "{steps} of {} refinements did not decrease the mean residual",
                means.len().saturating_sub(1)
            ),
        ));
        let slope = slopes["self_financing_maxabs"];
        verdicts.push(Verdict::check(
            "self_financing_slope",
            slope <= t.sf_slope_max,
            format!("slope {slope}"),
        ));
    }

    let (coarse, finest) = (qvs[0], qvs[finest_idx]);
    if coarse.abs() <= t.exact_tolerance {
        verdicts.push(Verdict::not_applicable(
            "integral_qv_ratio",
            "integral has no variation",
        ));
    } else {
        let ratio = finest / coarse;
        verdicts.push(Verdict::check(
            "integral_qv_ratio",
            ratio < t.qv_ratio_max,
            format!("finest / coarsest = {ratio}"),
        ));
    }

    Ok(RunReport {
        kind: RunKind::Experiment,
        config: config.clone(),
        terminal,
        levels: level_stats,
        calculus: Vec::new(),
        slopes,
        verdicts,
        failures,
        version: crate::VERSION.to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Verifier names of the calculus suite, in report order.
pub const CALCULUS_VERIFIERS: [&str; 12] = [
    "abel_gap",
    "cross_variation",
    "integral_qv",
    "ito_expz",
    "ito_t",
    "ito_t2_sinz",
    "ito_tz",
    "ito_z",
    "ito_z2",
    "phi_cos",
    "phi_identity",
    "qv",
];

fn verifier_index(name: &str) -> usize {
    CALCULUS_VERIFIERS
        .iter()
        .position(|v| *v == name)
        .expect("known verifier")
}

/// Residual of every verifier at every level for one seed: `[level][verifier]`.
fn calculus_seed(
    config: &ExperimentConfig,
    engine: &ModulatorEngine,
    fine: &Partition,
    seed_index: usize,
) -> Result<Vec<[f64; 12]>> {
    let seed = path_seed(config.master_seed, seed_index as u64);
    let z_fine = engine.sample(seed)?;
    let w_fine = brownian_path(fine, seed);
    let vol_fine = simulate_volatility(&config.volatility, fine, seed, Some(&z_fine))?;
    let mut out = Vec::with_capacity(config.grid_levels.len());
    for stride in strides(&config.grid_levels) {
        let z = z_fine.coarsen(stride)?;
        let w = w_fine.coarsen(stride)?;
        let sigma = vol_fine.path.coarsen(stride)?;
        let mut row = [0.0; 12];
        row[verifier_index("qv")] = quadratic_variation(&z)?;
        for f in ItoField::ALL {
            row[verifier_index(f.name())] = ito_formula_residual(&f, &z)?;
        }
        row[verifier_index("abel_gap")] = abel_identity_gap(&w, &z)?;
        row[verifier_index("cross_variation")] = cross_variation(&w, &z)?.abs();
        for (name, phi) in [
            ("phi_identity", PhiFunction::Identity),
            ("phi_cos", PhiFunction::Cos),
        ] {
            row[verifier_index(name)] = function_of_z_integral(&phi, &z)?
                .terminal_residual()
                .expect("closed form exists");
        }
        row[verifier_index("integral_qv")] = quadratic_variation(&stieltjes_integral(&sigma, &z)?)?;
        out.push(row);
    }
    Ok(out)
}

/// Convergence tables for the pathwise calculus verifiers over the configured
/// levels and seeds.
pub fn run_calculus_suite(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let fine = Partition::dyadic(config.market.horizon, config.finest_level())?;
    let engine = ModulatorEngine::new(&config.modulator, &fine)?;
    let levels = &config.grid_levels;

    let runs: Vec<Result<Vec<[f64; 12]>>> = (0..config.num_seeds)
        .into_par_iter()
        .map(|i| calculus_seed(config, &engine, &fine, i))
        .collect();

    let mut failures = Vec::new();
    let mut sums = vec![[CompensatedSum::new(); 12]; levels.len()];
    let mut maxima = vec![[0.0f64; 12]; levels.len()];
    let mut ok = 0usize;
    for (seed, run) in runs.iter().enumerate() {
        match run {
            Ok(rows) => {
                ok += 1;
                for (j, row) in rows.iter().enumerate() {
                    for v in 0..12 {
                        sums[j][v].add(row[v]);
                        maxima[j][v] = maxima[j][v].max(row[v]);
                    }
                }
            }
            Err(e) => failures.push(SeedFailure::from_error(seed, None, e)),
        }
    }
    let mean = |j: usize, v: usize| {
        if ok == 0 {
            f64::NAN
        } else {
            sums[j][v].value() / ok as f64
        }
    };

    let mut rows = Vec::new();
    let mut series: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut slopes = BTreeMap::new();
    for (v, name) in CALCULUS_VERIFIERS.iter().enumerate() {
        let col: Vec<f64> = (0..levels.len()).map(|j| mean(j, v)).collect();
        for j in 0..levels.len() {
            let slope = if j == 0 {
                f64::NAN
            } else {
                log_log(&levels[..=j], &col[..=j])
            };
            rows.push(CalculusRow {
                verifier: name.to_string(),
                level: levels[j],
                mean_residual: col[j],
                slope_so_far: slope,
            });
        }
        slopes.insert(name.to_string(), log_log(levels, &col));
        series.insert(name, col);
    }

    let t = &config.thresholds;
    let hurst = config.modulator.hurst();
    let mut verdicts = Vec::new();

    let expected = 1.0 - 2.0 * hurst;
    let qv_slope = slopes["qv"];
    verdicts.push(Verdict::check(
        "qv_slope",
        (qv_slope - expected).abs() <= t.qv_slope_tolerance,
        format!("slope {qv_slope}, expected {expected}"),
    ));

    let max_over = |name: &str| {
        let v = verifier_index(name);
        maxima.iter().fold(0.0f64, |m, row| m.max(row[v]))
    };
    let exact_max = max_over("ito_z").max(max_over("ito_t"));
    verdicts.push(
        Verdict::check(
            "ito_exact",
            exact_max <= t.exact_tolerance,
            format!("largest residual for F = z and F = t: {exact_max:e}"),
        )
        .consistency(),
    );
    let abel = max_over("abel_gap");
    verdicts.push(
        Verdict::check(
            "abel_identity",
            abel <= t.exact_tolerance,
            format!("largest gap {abel:e}"),
        )
        .consistency(),
    );

    let zero_qv = [
        "ito_convergence",
        "cross_variation",
        "phi_closed_form",
        "integral_qv_ratio",
    ];
    if hurst <= 0.5 {
        for name in zero_qv {
            verdicts.push(Verdict::not_applicable(
                name,
                "requires zero quadratic variation (H > 1/2)",
            ));
        }
    } else {
        let allowance = t.max_non_monotone_steps;
        let worst = ItoField::ALL
            .iter()
            .filter(|f| !f.is_exact())
            .map(|f| (f.name(), stats::non_decreasing_steps(&series[f.name()])))
            .max_by_key(|&(_, s)| s)
            .expect("non-exact fields exist");
        verdicts.push(Verdict::check(
            "ito_convergence",
            worst.1 <= allowance,
            format!(
                "worst field {} with {} non-decreasing steps",
                worst.0, worst.1
            ),
        ));
        let cross = stats::non_decreasing_steps(&series["cross_variation"]);
        verdicts.push(Verdict::check(
            "cross_variation",
            cross <= allowance,
            format!("{cross} non-decreasing steps"),
        ));
        let phi = stats::non_decreasing_steps(&series["phi_identity"])
            .max(stats::non_decreasing_steps(&series["phi_cos"]));
        verdicts.push(Verdict::check(
            "phi_closed_form",
            phi <= allowance,
            format!("{phi} non-decreasing steps"),
        ));
        let iqv = &series["integral_qv"];
        let (coarse, finest) = (iqv[0], iqv[iqv.len() - 1]);
        if coarse.abs() <= t.exact_tolerance {
            verdicts.push(Verdict::not_applicable(
                "integral_qv_ratio",
                "integral has no variation",
            ));
        } else {
            let ratio = finest / coarse;
            verdicts.push(Verdict::check(
                "integral_qv_ratio",
                ratio < t.qv_ratio_max,
                format!("finest / coarsest = {ratio}"),
            ));
        }
    }

    Ok(RunReport {
        kind: RunKind::Calculus,
        config: config.clone(),
        terminal: Vec::new(),
        levels: Vec::new(),
        calculus: rows,
        slopes,
        verdicts,
        failures,
        version: crate::VERSION.to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}
