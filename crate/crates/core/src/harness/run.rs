use crate::error::{Error, Result};
use crate::games::GameSpec;
use crate::learners::{LearnerState, RoundTrace};
use crate::metrics::{default_benchmarks, energy_identity_residual, MetricAccumulator};
use crate::noise::{sample_feedback, NoiseSpec};
use crate::schedules::{RateCap, RoundRates};
use crate::types::{JointAction, PlayerVector, RngStream};

use super::config::{CheckKind, ExperimentConfig, OpponentSpec, PlayerConfig};
use super::opponents::adversarial_opponent_step;

/// Residual above which an enabled energy-identity check aborts the run.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Tolerance of the dual-averaging reconstruction check.
pub const RECONSTRUCTION_TOL: f64 = 1e-12;
/// Offset separating probe streams from noise streams.
const PROBE_STREAM_OFFSET: u64 = 1000;

/// A validated experiment, ready to be run for any seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub game: GameSpec,
    pub x_init: JointAction,
    pub noise: NoiseSpec,
    /// Per player: the learner configuration, or `None` for opponent-controlled players.
    pub roles: Vec<Option<PlayerConfig>>,
    pub opponents: Option<OpponentSpec>,
    pub horizon: usize,
    pub benchmark_radius: f64,
    pub checks: Vec<CheckKind>,
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let (game, x_init) = cfg.game.build()?;
        let n = game.players();
        let mut roles: Vec<Option<PlayerConfig>> = vec![None; n];
        let mut controlled = vec![false; n];
        if let Some(o) = &cfg.opponents {
            for &p in &o.players {
                if p >= n || controlled[p] {
                    return Err(Error::Config(format!(
                        "opponent player index {p} is out of range or repeated"
                    )));
                }
                controlled[p] = true;
            }
        }
        let learners = controlled.iter().filter(|c| !**c).count();
        if cfg.players.len() != learners {
            return Err(Error::Config(format!(
                "game has {n} players and {} opponent(s), so {learners} learner entries are needed, got {}",
                n - learners,
                cfg.players.len()
            )));
        }
        let mut it = cfg.players.iter();
        for (i, role) in roles.iter_mut().enumerate() {
            if !controlled[i] {
                *role = it.next().copied();
            }
        }
        Ok(Experiment {
            game,
            x_init,
            noise: cfg.noise,
            roles,
            opponents: cfg.opponents.clone(),
            horizon: cfg.horizon,
            benchmark_radius: cfg.benchmark_radius,
            checks: cfg.checks.clone(),
        })
    }

    pub fn players(&self) -> usize {
        self.game.players()
    }

    fn check_enabled(&self, kind: CheckKind) -> bool {
        self.checks.contains(&kind)
    }
}

/// Columnar record of one run. Rounds are 1-based in the accessors.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub run: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub horizon: usize,
    played: Vec<f64>,
    regret: Vec<f64>,
    grad_energy: Vec<f64>,
    gamma_hat: Vec<f64>,
    gamma: Vec<f64>,
    dist_eq: Vec<f64>,
    /// Largest energy-identity residual seen (0 when the check is disabled
    /// or no player is optimistic).
    pub max_identity_residual: f64,
    /// Base iterates `X_{T+1}` of learners (`None` for opponents).
    pub final_iterates: Vec<Option<PlayerVector>>,
}

impl RunTrace {
    fn new(run: usize, seed: u64, dims: Vec<usize>, horizon: usize) -> Self {
        let n = dims.len();
        let total: usize = dims.iter().sum();
        RunTrace {
            run,
            seed,
            horizon,
            played: Vec::with_capacity(horizon * total),
            regret: Vec::with_capacity(horizon * n),
            grad_energy: Vec::with_capacity(horizon * n),
            gamma_hat: Vec::with_capacity(horizon * n),
            gamma: Vec::with_capacity(horizon * n),
            dist_eq: Vec::with_capacity(horizon),
            max_identity_residual: 0.0,
            final_iterates: vec![None; n],
            dims,
        }
    }

    pub fn players(&self) -> usize {
        self.dims.len()
    }

    /// Number of rounds recorded.
    pub fn rounds(&self) -> usize {
        self.dist_eq.len()
    }

    fn idx(&self, t: usize, player: usize) -> usize {
        assert!(t >= 1 && t <= self.rounds(), "round {t} outside 1..={}", self.rounds());
        (t - 1) * self.players() + player
    }

    /// Coordinates played by `player` at round `t`.
    pub fn played(&self, t: usize, player: usize) -> &[f64] {
        let total: usize = self.dims.iter().sum();
        let offset: usize = self.dims[..player].iter().sum();
        let start = (t - 1) * total + offset;
        &self.played[start..start + self.dims[player]]
    }

    pub fn played_profile(&self, t: usize) -> JointAction {
        JointAction::new((0..self.players()).map(|i| self.played(t, i).to_vec().into()).collect())
    }

    /// Linearized regret through round `t`, maximized over the benchmark set.
    pub fn regret(&self, t: usize, player: usize) -> f64 {
        self.regret[self.idx(t, player)]
    }

    /// `Σ_{s≤t} ‖V_i(x_s)‖²`.
    pub fn grad_energy(&self, t: usize, player: usize) -> f64 {
        self.grad_energy[self.idx(t, player)]
    }

    /// `Σ_{s≤t} Σ_i ‖V_i(x_s)‖²`.
    pub fn grad_energy_total(&self, t: usize) -> f64 {
        (0..self.players()).map(|i| self.grad_energy(t, i)).sum()
    }

    pub fn gamma_hat(&self, t: usize, player: usize) -> f64 {
        self.gamma_hat[self.idx(t, player)]
    }

    pub fn gamma(&self, t: usize, player: usize) -> f64 {
        self.gamma[self.idx(t, player)]
    }

    /// Distance of the played profile at round `t` to the equilibrium set.
    pub fn dist_eq(&self, t: usize) -> f64 {
        self.dist_eq[t - 1]
    }
}

fn identity_probes(exp: &Experiment, player: usize, seed: u64) -> Vec<PlayerVector> {
    let eq = exp.game.equilibria().points()[0][player].clone();
    let mut bench = eq.clone();
    bench[0] += exp.benchmark_radius;
    let mut rng = RngStream::new(seed, PROBE_STREAM_OFFSET + player as u64);
    let radius = exp.benchmark_radius.max(1.0);
    let random = eq.add(&PlayerVector::new(rng.uniform_in_ball(eq.dim(), radius)));
    vec![bench, eq, random]
}

fn check_trace(
    exp: &Experiment,
    learner: &LearnerState,
    trace: &RoundTrace,
    probes: &[PlayerVector],
    player: usize,
    max_residual: &mut f64,
) -> Result<()> {
    if exp.check_enabled(CheckKind::EnergyIdentity) {
        for p in probes {
            if let Some(r) = energy_identity_residual(trace, p) {
                *max_residual = max_residual.max(r);
                if !(r <= IDENTITY_TOL) {
                    return Err(Error::Runtime {
                        round: trace.t,
                        player,
                        message: format!("energy identity residual {r:e} exceeds {IDENTITY_TOL:e}"),
                    });
                }
            }
        }
    }
    if exp.check_enabled(CheckKind::DualAveraging) && trace.algorithm == crate::learners::Algorithm::OptdaPlus {
        let rebuilt = learner.x_init().add_scaled(-trace.gamma_next, learner.g_sum());
        let err = rebuilt.dist_sq(learner.x()).sqrt();
        if !(err <= RECONSTRUCTION_TOL * (1.0 + learner.x().norm())) {
            return Err(Error::Runtime {
                round: trace.t,
                player,
                message: format!("dual-averaging reconstruction off by {err:e}"),
            });
        }
    }
    Ok(())
}

/// Executes one seeded run of `exp.horizon` rounds.
///
/// Each round: every learner computes its rates (from feedback through round
/// `t − 2` only), extrapolates to the point it plays, opponents act, the game
/// oracle is queried once at the joint played profile, every learner receives
/// its own noisy feedback (one random stream per player) and updates.
pub fn run_one(exp: &Experiment, seed: u64, run: usize) -> Result<RunTrace> {
    let n = exp.players();
    let mut learners: Vec<Option<LearnerState>> = Vec::with_capacity(n);
    for (i, role) in exp.roles.iter().enumerate() {
        learners.push(match role {
            Some(cfg) => {
                let cap = RateCap::new(
                    cfg.algorithm.theorem_family(),
                    n,
                    exp.game.lipschitz(),
                    exp.noise.sigma_mult,
                );
                Some(LearnerState::new(
                    cfg.algorithm,
                    i,
                    exp.x_init[i].clone(),
                    cfg.schedule,
                    Some(cap),
                )?)
            }
            None => None,
        });
    }
    let mut rngs: Vec<RngStream> = (0..n).map(|i| RngStream::new(seed, i as u64)).collect();
    let probes: Vec<Vec<PlayerVector>> = (0..n).map(|i| identity_probes(exp, i, seed)).collect();
    let eq = &exp.game.equilibria().points()[0];
    let mut metrics = MetricAccumulator::new(
        (0..n)
            .map(|i| default_benchmarks(&eq[i], exp.benchmark_radius))
            .collect(),
    );
    let mut trace = RunTrace::new(run, seed, exp.game.dims().to_vec(), exp.horizon);
    let mut previous_play = exp.x_init.clone();
    let mut previous_rates: Vec<Option<RoundRates>> = vec![None; n];
    let check_monotone = exp.check_enabled(CheckKind::RatesNonIncreasing);

    for t in 1..=exp.horizon {
        let mut rates: Vec<Option<RoundRates>> = Vec::with_capacity(n);
        for (i, l) in learners.iter().enumerate() {
            let r = match l {
                Some(l) => Some(l.round_rates().map_err(|e| match e {
                    Error::Contract(m) => Error::Contract(format!("round {t}, player {i}: {m}")),
                    other => other,
                })?),
                None => None,
            };
            if check_monotone {
                if let (Some(now), Some(before)) = (r, previous_rates[i]) {
                    if now.gamma_hat > before.gamma_hat || now.gamma_next > before.gamma_next {
                        return Err(Error::Runtime {
                            round: t,
                            player: i,
                            message: "learning rate increased".into(),
                        });
                    }
                }
            }
            rates.push(r);
        }

        let mut played = Vec::with_capacity(n);
        for i in 0..n {
            let x = match (&mut learners[i], &rates[i]) {
                (Some(l), Some(r)) => l.extrapolate(r).clone(),
                _ => {
                    let spec = exp.opponents.as_ref().expect("opponent roles come with a spec");
                    adversarial_opponent_step(spec, &exp.game, i, t, &previous_play)?
                }
            };
            played.push(x);
        }
        let played = JointAction::new(played);
        let v = exp.game.payoff_gradient(&played)?;
        metrics.observe(&played, &v)?;
        let dist = exp.game.distance_to_equilibrium(&played, None)?;

        for i in 0..n {
            let (Some(l), Some(r)) = (&mut learners[i], &rates[i]) else {
                continue;
            };
            let fb = sample_feedback(&v[i], &exp.noise, &mut rngs[i], i, t)?;
            let rt = l.update(&fb, r)?;
            check_trace(exp, l, &rt, &probes[i], i, &mut trace.max_identity_residual)?;
        }

        trace.played.extend(played.iter().flat_map(|p| p.iter().copied()));
        trace.dist_eq.push(dist);
        for (i, r) in rates.iter().enumerate() {
            trace.regret.push(metrics.regret_max(i));
            trace.grad_energy.push(metrics.grad_energy(i));
            let (gh, g) = r.map_or((0.0, 0.0), |r| (r.gamma_hat, r.gamma));
            trace.gamma_hat.push(gh);
            trace.gamma.push(g);
        }
        previous_rates = rates;
        previous_play = played;
    }
    trace.final_iterates = learners.iter().map(|l| l.as_ref().map(|l| l.x().clone())).collect();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::OpponentKind;
    use crate::learners::Algorithm;
    use crate::schedules::ScheduleSpec;

    fn cfg(alg: Algorithm, sched: ScheduleSpec, noise: NoiseSpec, horizon: usize) -> ExperimentConfig {
        let p = PlayerConfig {
            algorithm: alg,
            schedule: sched,
        };
        ExperimentConfig::scalar_bilinear(vec![p, p], noise, horizon, vec![1])
    }

    #[test]
    fn first_round_plays_initial_profile() {
        for alg in [Algorithm::Og, Algorithm::OgPlus, Algorithm::OptdaPlus] {
            let exp = Experiment::from_config(&cfg(alg, ScheduleSpec::adaptive(0.25), NoiseSpec::NONE, 1)).unwrap();
            let tr = run_one(&exp, 3, 0).unwrap();
            assert_eq!(tr.played_profile(1).flatten(), vec![1.0, 1.0]);
        }
    }

    #[test]
    fn two_round_og_plus_hand_simulation() {
        let exp = Experiment::from_config(&cfg(
            Algorithm::OgPlus,
            ScheduleSpec::constant(0.5, 0.1),
            NoiseSpec::NONE,
            2,
        ))
        .unwrap();
        let tr = run_one(&exp, 1, 0).unwrap();
        // X_2 = (0.9, 1.1); X_{5/2} = X_2 − 0.5 (1, −1) = (0.4, 1.6)
        let p2 = tr.played_profile(2).flatten();
        assert!((p2[0] - 0.4).abs() < 1e-15 && (p2[1] - 1.6).abs() < 1e-15);
        assert_eq!(tr.regret(1, 0), 3.0);
        assert_eq!(tr.grad_energy_total(1), 2.0);
        assert!((tr.dist_eq(1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_checks_pass_on_noisy_runs() {
        for alg in [Algorithm::Og, Algorithm::OgPlus, Algorithm::OptdaPlus] {
            for noise in [NoiseSpec::additive(0.5), NoiseSpec::multiplicative(1.0)] {
                let mut c = cfg(alg, ScheduleSpec::adaptive(0.25), noise, 300);
                c.checks = vec![
                    CheckKind::EnergyIdentity,
                    CheckKind::DualAveraging,
                    CheckKind::RatesNonIncreasing,
                ];
                let exp = Experiment::from_config(&c).unwrap();
                let tr = run_one(&exp, 5, 0).unwrap();
                assert!(tr.max_identity_residual <= IDENTITY_TOL);
                assert!(tr.max_identity_residual > 0.0 || alg == Algorithm::Gda);
            }
        }
    }

    #[test]
    fn opponent_roles_are_assigned() {
        let mut c = cfg(Algorithm::OptdaPlus, ScheduleSpec::adaptive(0.25), NoiseSpec::NONE, 4);
        c.players.truncate(1);
        c.opponents = Some(OpponentSpec {
            kind: OpponentKind::Oscillator,
            amplitude: 1.0,
            players: vec![1],
        });
        let exp = Experiment::from_config(&c).unwrap();
        let tr = run_one(&exp, 1, 0).unwrap();
        let ys: Vec<f64> = (1..=4).map(|t| tr.played(t, 1)[0]).collect();
        assert_eq!(ys, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(tr.gamma_hat(2, 1), 0.0);
        assert!(tr.final_iterates[1].is_none());

        c.players.push(c.players[0]);
        assert!(matches!(Experiment::from_config(&c), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let exp = Experiment::from_config(&cfg(
            Algorithm::OptdaPlus,
            ScheduleSpec::adaptive(0.25),
            NoiseSpec::additive(0.5),
            200,
        ))
        .unwrap();
        let a = run_one(&exp, 11, 0).unwrap();
        let b = run_one(&exp, 11, 0).unwrap();
        let c = run_one(&exp, 12, 0).unwrap();
        assert_eq!(a.played, b.played);
        assert_ne!(a.played, c.played);
    }
}
