//! The acceptance criteria. Each check runs its own fixed experiment on the
//! seeds it is given and compares the measured statistic to a pinned tolerance.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::games::GameSpec;
use crate::learners::{trajectories_agree, Algorithm};
use crate::metrics::loglog_slope;
use crate::noise::NoiseSpec;
use crate::schedules::{adagrad_lemma_check, safe_constant_rates, ScheduleKind, ScheduleSpec, TheoremFamily};
use crate::types::{JointAction, RngStream};

use super::config::{CheckKind, ExperimentConfig, OpponentKind, OpponentSpec, PlayerConfig};
use super::output::{run_file_name, save_run_csv};
use super::run::Experiment;
use super::suite::{execute_seeds, SuiteReport};

/// Fraction of the log-time span used by every slope fit.
pub const SLOPE_WINDOW: f64 = 0.9;
pub const LONG_HORIZON: usize = 100_000;
pub const SHORT_HORIZON: usize = 1_000;
pub const BASELINE_HORIZON: usize = 10_000;
/// Round at which early distances are read.
pub const EARLY_ROUND: usize = 100;

pub const IDENTITY_TOL: f64 = 1e-9;
pub const PLATEAU_RATIO_MAX: f64 = 1.5;
pub const FLAT_SLOPE_MAX: f64 = 0.1;
pub const SQRT_SLOPE_RANGE: (f64, f64) = (0.35, 0.65);
pub const ADAPTIVE_DISTANCE_FACTOR: f64 = 0.5;
pub const SINGLE_RATE_SLOPE_MIN: f64 = 0.3;
pub const SEPARATION_FACTOR: f64 = 10.0;
pub const GRAD_ENERGY_SLOPE_MAX: f64 = 0.9;
pub const RATE_RETENTION_MIN: f64 = 0.5;
pub const DISTANCE_DECAY_FACTOR: f64 = 0.1;
pub const ADVERSARIAL_SLOPE_MAX: f64 = 0.85;
pub const ADAGRAD_INSTANCES: usize = 1_000;
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// Registered criteria, indexed by `id − 1`.
pub const CRITERIA: [&str; 10] = [
    "energy-identities",
    "constant-regret-multiplicative",
    "sqrtT-additive",
    "baseline-failure",
    "separation-10x",
    "grad-energy-exponent",
    "adaptive-multiplicative",
    "adversarial-fallback",
    "adagrad-lemma",
    "og-optda-coincidence",
];

/// Resolves a criterion given by number (`"3"`) or name (`"sqrtT-additive"`).
pub fn criterion_id(name: &str) -> Result<usize> {
    if let Ok(n) = name.parse::<usize>() {
        if (1..=CRITERIA.len()).contains(&n) {
            return Ok(n);
        }
    }
    CRITERIA
        .iter()
        .position(|c| c.eq_ignore_ascii_case(name))
        .map(|i| i + 1)
        .ok_or_else(|| Error::Usage(format!("unknown criterion {name:?}; known: {}", CRITERIA.join(", "))))
}

/// Inputs shared by all checks.
#[derive(Debug, Clone)]
pub struct CheckContext {
    pub seeds: Vec<u64>,
    pub threads: usize,
    /// When set, aggregate CSVs (and for the baseline check, per-run CSVs)
    /// are written below this directory.
    pub output_dir: Option<PathBuf>,
}

impl CheckContext {
    pub fn new(seeds: Vec<u64>, threads: usize) -> Self {
        CheckContext {
            seeds,
            threads,
            output_dir: None,
        }
    }
}

/// One measured quantity and whether it met its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub measurements: Vec<Measurement>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.measurements.iter().all(|m| m.passed)
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let parts: Vec<String> = self
            .measurements
            .iter()
            .map(|m| {
                let value = if m.value != 0.0 && m.value.abs() < 1e-3 {
                    format!("{:.3e}", m.value)
                } else {
                    format!("{:.6}", m.value)
                };
                format!(
                    "{} = {value} ({}{})",
                    m.label,
                    m.bound,
                    if m.passed { "" } else { ", violated" }
                )
            })
            .collect();
        write!(f, "[{verdict}] {:>2} {}: {}", self.id, self.name, parts.join("; "))
    }
}

struct Recorder {
    measurements: Vec<Measurement>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            measurements: Vec::new(),
        }
    }

    fn at_most(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.push(label, value, format!("≤ {bound}"), value <= bound);
    }

    fn at_least(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.push(label, value, format!("≥ {bound}"), value >= bound);
    }

    fn above(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.push(label, value, format!("> {bound}"), value > bound);
    }

    fn within(&mut self, label: impl Into<String>, value: f64, (lo, hi): (f64, f64)) {
        self.push(label, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi);
    }

    fn push(&mut self, label: impl Into<String>, value: f64, bound: String, passed: bool) {
        self.measurements.push(Measurement {
            label: label.into(),
            value,
            bound,
            passed,
        });
    }
}

/// Runs criterion `id` (1-based).
pub fn run_check(id: usize, ctx: &CheckContext) -> Result<CheckOutcome> {
    if ctx.seeds.is_empty() {
        return Err(Error::Config("checks need at least one seed".into()));
    }
    let name = *CRITERIA
        .get(id.wrapping_sub(1))
        .ok_or_else(|| Error::Usage(format!("criterion id {id} is not registered")))?;
    let mut rec = Recorder::new();
    match id {
        1 => energy_identities(ctx, &mut rec)?,
        2 => constant_regret_multiplicative(ctx, &mut rec)?,
        3 => sqrt_t_additive(ctx, &mut rec)?,
        4 => baseline_failure(ctx, &mut rec)?,
        5 => separation_10x(ctx, &mut rec)?,
        6 => grad_energy_exponent(ctx, &mut rec)?,
        7 => adaptive_multiplicative(ctx, &mut rec)?,
        8 => adversarial_fallback(ctx, &mut rec)?,
        9 => adagrad_lemma(ctx, &mut rec)?,
        10 => og_optda_coincidence(ctx, &mut rec)?,
        _ => unreachable!(),
    }
    Ok(CheckOutcome {
        id,
        name,
        measurements: rec.measurements,
    })
}

/// Seeds and output directory from a configuration file.
pub fn context_from_config(cfg: &ExperimentConfig, threads: usize) -> CheckContext {
    CheckContext {
        seeds: cfg.seeds.clone(),
        threads,
        output_dir: Some(cfg.output_dir.clone()),
    }
}

fn player(algorithm: Algorithm, schedule: ScheduleSpec) -> PlayerConfig {
    PlayerConfig { algorithm, schedule }
}

/// Symmetric two-player run on the scalar bilinear game from `(1, 1)`.
fn scalar_suite(
    ctx: &CheckContext,
    label: &str,
    p: PlayerConfig,
    noise: NoiseSpec,
    horizon: usize,
    checks: Vec<CheckKind>,
) -> Result<SuiteReport> {
    let mut cfg = ExperimentConfig::scalar_bilinear(vec![p, p], noise, horizon, ctx.seeds.clone());
    cfg.checks = checks;
    execute(ctx, label, &cfg, false)
}

fn execute(ctx: &CheckContext, label: &str, cfg: &ExperimentConfig, per_run: bool) -> Result<SuiteReport> {
    let exp = Experiment::from_config(cfg)?;
    let report = execute_seeds(&exp, &ctx.seeds, ctx.threads)?;
    if let Some((seed, err)) = report.failures.first() {
        return Err(Error::Runtime {
            round: 0,
            player: 0,
            message: format!("{label}: run with seed {seed} failed: {err}"),
        });
    }
    if let Some(dir) = &ctx.output_dir {
        write_outputs(dir, label, &report, per_run)?;
    }
    Ok(report)
}

fn write_outputs(dir: &Path, label: &str, report: &SuiteReport, per_run: bool) -> Result<()> {
    let dir = dir.join(label);
    std::fs::create_dir_all(&dir)?;
    if per_run {
        for tr in &report.runs {
            save_run_csv(tr, &dir.join(run_file_name(tr.run, tr.seed)))?;
        }
    }
    if let Some(agg) = &report.aggregate {
        agg.save(&super::output::aggregate_path(&dir))?;
    }
    Ok(())
}

fn aggregate(report: &SuiteReport) -> &super::output::Aggregate {
    report
        .aggregate
        .as_ref()
        .expect("a suite without failures has an aggregate")
}

/// Mean regret of player 1 at every round.
fn mean_regret_series(report: &SuiteReport) -> Vec<(f64, f64)> {
    let agg = aggregate(report);
    (1..=agg.rounds)
        .map(|t| (t as f64, agg.regret(t, 0).0.max(0.0)))
        .collect()
}

fn regret_slope(report: &SuiteReport) -> Result<f64> {
    loglog_slope(&mean_regret_series(report), SLOPE_WINDOW)
}

fn final_mean_regret(report: &SuiteReport) -> (f64, f64) {
    let agg = aggregate(report);
    let t = agg.rounds;
    (agg.regret(t, 0).0, agg.regret(t / 10, 0).0)
}

fn mean_distance(report: &SuiteReport, t: usize) -> f64 {
    aggregate(report).dist_eq(t).0
}

fn noise_regimes() -> [(&'static str, NoiseSpec); 3] {
    [
        ("noiseless", NoiseSpec::NONE),
        ("additive", NoiseSpec::additive(0.5)),
        ("multiplicative", NoiseSpec::multiplicative(1.0)),
    ]
}

fn energy_identities(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    for alg in [Algorithm::OgPlus, Algorithm::OptdaPlus] {
        let safe = safe_constant_rates(alg.theorem_family(), 2, 1.0, 1.0);
        let schedules = [
            ("adaptive", ScheduleSpec::adaptive(0.25)),
            ("constant", ScheduleSpec::constant(safe.gamma_hat, safe.gamma)),
        ];
        let mut worst: f64 = 0.0;
        for (noise_name, noise) in noise_regimes() {
            for (sched_name, sched) in schedules {
                let label = format!("{}_{sched_name}_{noise_name}", alg.name());
                let rep = scalar_suite(
                    ctx,
                    &label,
                    player(alg, sched),
                    noise,
                    SHORT_HORIZON,
                    vec![CheckKind::EnergyIdentity, CheckKind::DualAveraging],
                );
                match rep {
                    Ok(rep) => {
                        worst = rep.runs.iter().map(|r| r.max_identity_residual).fold(worst, f64::max);
                    }
                    Err(Error::Runtime { .. }) => worst = f64::INFINITY,
                    Err(e) => return Err(e),
                }
            }
        }
        rec.at_most(format!("{} max residual", alg.name()), worst, IDENTITY_TOL);
    }
    Ok(())
}

fn constant_regret_multiplicative(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let noise = NoiseSpec::multiplicative(1.0);
    for alg in [Algorithm::OgPlus, Algorithm::OptdaPlus] {
        let safe = safe_constant_rates(alg.theorem_family(), 2, 1.0, noise.sigma_mult);
        let sched = ScheduleSpec::constant(safe.gamma_hat, safe.gamma);
        let rep = scalar_suite(ctx, alg.name(), player(alg, sched), noise, LONG_HORIZON, vec![])?;
        let (end, tenth) = final_mean_regret(&rep);
        rec.at_most(
            format!("{} Reg(T)/max(Reg(T/10),1)", alg.name()),
            end / tenth.max(1.0),
            PLATEAU_RATIO_MAX,
        );
        rec.at_most(
            format!("{} regret slope", alg.name()),
            regret_slope(&rep)?,
            FLAT_SLOPE_MAX,
        );
    }
    Ok(())
}

fn sqrt_t_additive(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let sched = ScheduleSpec::new(ScheduleKind::OptdaPoly).theorem_capped();
    let rep = scalar_suite(
        ctx,
        "optda_plus_poly",
        player(Algorithm::OptdaPlus, sched),
        NoiseSpec::additive(0.5),
        LONG_HORIZON,
        vec![],
    )?;
    rec.within("regret slope", regret_slope(&rep)?, SQRT_SLOPE_RANGE);
    Ok(())
}

fn baseline_failure(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let noise = NoiseSpec::additive(0.5);
    for alg in [Algorithm::Gda, Algorithm::Og] {
        let mut cfg = ExperimentConfig::scalar_bilinear(
            vec![player(alg, ScheduleSpec::vanilla(0.1)); 2],
            noise,
            BASELINE_HORIZON,
            ctx.seeds.clone(),
        );
        cfg.checks.clear();
        let rep = execute(ctx, alg.name(), &cfg, true)?;
        let early = mean_distance(&rep, EARLY_ROUND);
        let end = mean_distance(&rep, BASELINE_HORIZON);
        rec.above(format!("{} dist(T) − dist(100)", alg.name()), end - early, 0.0);
    }
    let cfg = ExperimentConfig::scalar_bilinear(
        vec![player(Algorithm::OgPlus, ScheduleSpec::adaptive(0.25)); 2],
        noise,
        BASELINE_HORIZON,
        ctx.seeds.clone(),
    );
    let rep = execute(ctx, "og_plus_adaptive", &cfg, true)?;
    let ratio = mean_distance(&rep, BASELINE_HORIZON) / mean_distance(&rep, EARLY_ROUND);
    rec.at_most("og_plus dist(T)/dist(100)", ratio, ADAPTIVE_DISTANCE_FACTOR);
    Ok(())
}

fn separation_10x(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let noise = NoiseSpec::multiplicative(1.0);
    let gamma = safe_constant_rates(TheoremFamily::OgPlus, 2, 1.0, noise.sigma_mult).gamma;
    let og_plus = scalar_suite(
        ctx,
        "og_plus_10x",
        player(
            Algorithm::OgPlus,
            ScheduleSpec::constant(SEPARATION_FACTOR * gamma, gamma),
        ),
        noise,
        LONG_HORIZON,
        vec![],
    )?;
    rec.at_most("og_plus regret slope", regret_slope(&og_plus)?, FLAT_SLOPE_MAX);
    let og = scalar_suite(
        ctx,
        "og_single_rate",
        player(Algorithm::Og, ScheduleSpec::constant(gamma, gamma)),
        noise,
        LONG_HORIZON,
        vec![],
    )?;
    rec.at_least("og regret slope", regret_slope(&og)?, SINGLE_RATE_SLOPE_MIN);
    Ok(())
}

fn grad_energy_exponent(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let rep = scalar_suite(
        ctx,
        "optda_plus_adaptive",
        player(Algorithm::OptdaPlus, ScheduleSpec::adaptive(0.25)),
        NoiseSpec::additive(0.5),
        LONG_HORIZON,
        vec![],
    )?;
    let agg = aggregate(&rep);
    let series: Vec<(f64, f64)> = (1..=agg.rounds)
        .map(|t| {
            let total: f64 = (0..agg.players).map(|i| agg.grad_energy(t, i).0).sum();
            (t as f64, total)
        })
        .collect();
    rec.at_most(
        "grad energy slope",
        loglog_slope(&series, SLOPE_WINDOW)?,
        GRAD_ENERGY_SLOPE_MAX,
    );
    Ok(())
}

fn adaptive_multiplicative(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let rep = scalar_suite(
        ctx,
        "optda_plus_adaptive",
        player(Algorithm::OptdaPlus, ScheduleSpec::adaptive(0.25)),
        NoiseSpec::multiplicative(1.0),
        LONG_HORIZON,
        vec![],
    )?;
    let t = LONG_HORIZON;
    let retention = rep
        .runs
        .iter()
        .flat_map(|r| (0..r.players()).map(move |i| r.gamma_hat(t, i) / r.gamma_hat(t / 10, i)))
        .fold(f64::INFINITY, f64::min);
    rec.at_least("min over seeds of γ̂_T/γ̂_{T/10}", retention, RATE_RETENTION_MIN);
    let ratio = mean_distance(&rep, t) / mean_distance(&rep, EARLY_ROUND);
    rec.at_most("dist(T)/dist(100)", ratio, DISTANCE_DECAY_FACTOR);
    Ok(())
}

fn adversarial_fallback(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let sched = ScheduleSpec {
        epsilon: 0.25,
        ..ScheduleSpec::new(ScheduleKind::AdversarialPoly)
    };
    let mut cfg = ExperimentConfig::scalar_bilinear(
        vec![player(Algorithm::OptdaPlus, sched)],
        NoiseSpec::additive(0.5),
        LONG_HORIZON,
        ctx.seeds.clone(),
    );
    cfg.opponents = Some(OpponentSpec {
        kind: OpponentKind::Oscillator,
        amplitude: 1.0,
        players: vec![1],
    });
    let rep = execute(ctx, "optda_plus_vs_oscillator", &cfg, false)?;
    rec.at_most("regret slope", regret_slope(&rep)?, ADVERSARIAL_SLOPE_MAX);
    Ok(())
}

/// A random AdaGrad-lemma instance: length 1–200, terms spanning six orders
/// of magnitude with occasional zeros, `ε ∈ [1e−3, 1e3]`, `α ∈ [0, 0.99)`.
pub fn random_adagrad_instance(rng: &mut RngStream) -> (Vec<f64>, f64, f64) {
    let len = 1 + (rng.uniform() * 200.0) as usize;
    let a = (0..len)
        .map(|_| {
            if rng.uniform() < 0.1 {
                0.0
            } else {
                rng.uniform() * 10f64.powf(rng.uniform() * 6.0 - 3.0)
            }
        })
        .collect();
    let eps = 10f64.powf(rng.uniform() * 6.0 - 3.0);
    let alpha = rng.uniform() * 0.99;
    (a, eps, alpha)
}

fn adagrad_lemma(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let mut rng = RngStream::new(ctx.seeds[0], 0);
    let mut passed = 0usize;
    for _ in 0..ADAGRAD_INSTANCES {
        let (a, eps, alpha) = random_adagrad_instance(&mut rng);
        if adagrad_lemma_check(&a, eps, alpha)? {
            passed += 1;
        }
    }
    rec.at_least("fraction satisfied", passed as f64 / ADAGRAD_INSTANCES as f64, 1.0);
    Ok(())
}

fn og_optda_coincidence(ctx: &CheckContext, rec: &mut Recorder) -> Result<()> {
    let game = GameSpec::scalar_bilinear();
    let x1 = JointAction::from_nested(vec![vec![1.0], vec![1.0]]);
    let safe = safe_constant_rates(TheoremFamily::OgPlus, 2, 1.0, 1.0);
    let sched = ScheduleSpec::constant(safe.gamma_hat, safe.gamma);
    let mut agreed = 0usize;
    let mut total = 0usize;
    for (_, noise) in noise_regimes() {
        for &seed in &ctx.seeds {
            total += 1;
            if trajectories_agree(&game, &x1, &noise, sched, SHORT_HORIZON, seed, COINCIDENCE_TOL)? {
                agreed += 1;
            }
        }
    }
    rec.at_least("fraction of runs agreeing", agreed as f64 / total as f64, 1.0);
    Ok(())
}
