//! Per-player learning dynamics sharing one round protocol:
//! rates → extrapolate (play) → feedback → update.
//!
//! * `gda`: plays `X_t`, then `X_{t+1} = X_t − γ_t g_t`.
//! * `og`: optimistic gradient with one rate sequence `η_t` used for both steps.
//! * `og_plus`: `X_{t+1/2} = X_t − γ̂_t g_{t−1}`, `X_{t+1} = X_t − γ_{t+1} g_t`.
//! * `optda_plus`: same extrapolation, `X_{t+1} = X_1 − γ_{t+1} Σ_{s≤t} g_s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::FeedbackSample;
use crate::schedules::{RateCap, RoundRates, ScheduleSpec, Scheduler, TheoremFamily};
use crate::types::PlayerVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gda,
    Og,
    OgPlus,
    OptdaPlus,
}

impl Algorithm {
    pub fn is_optimistic(self) -> bool {
        !matches!(self, Algorithm::Gda)
    }

    /// Step-size conditions used when a schedule is theorem-capped.
    pub fn theorem_family(self) -> TheoremFamily {
        match self {
            Algorithm::OptdaPlus => TheoremFamily::OptdaPlus,
            _ => TheoremFamily::OgPlus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gda => "gda",
            Algorithm::Og => "og",
            Algorithm::OgPlus => "og_plus",
            Algorithm::OptdaPlus => "optda_plus",
        }
    }
}

/// Everything needed to re-check one round's update algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub algorithm: Algorithm,
    pub t: usize,
    pub x: PlayerVector,
    pub x_half: PlayerVector,
    pub x_next: PlayerVector,
    pub x_init: PlayerVector,
    pub g: PlayerVector,
    pub g_prev: PlayerVector,
    /// Rate actually used in the extrapolation step.
    pub gamma_hat: f64,
    /// Rate that produced `x` (`γ_t`; `γ_1 = γ_2` by convention).
    pub gamma: f64,
    /// Rate actually used in the update step.
    pub gamma_next: f64,
}

#[derive(Debug, Clone)]
pub struct LearnerState {
    algorithm: Algorithm,
    player: usize,
    x: PlayerVector,
    x_half: PlayerVector,
    g_prev: PlayerVector,
    g_sum: PlayerVector,
    x_init: PlayerVector,
    t: usize,
    /// `γ_t`: the update rate that produced `x`; `None` before the first update.
    gamma_current: Option<f64>,
    scheduler: Scheduler,
}

impl LearnerState {
    pub fn new(
        algorithm: Algorithm,
        player: usize,
        x_init: PlayerVector,
        schedule: ScheduleSpec,
        cap: Option<RateCap>,
    ) -> Result<Self> {
        if x_init.dim() == 0 || !x_init.is_finite() {
            return Err(Error::Config(format!(
                "player {player}: initial point must be non-empty and finite"
            )));
        }
        let dim = x_init.dim();
        Ok(LearnerState {
            algorithm,
            player,
            x: x_init.clone(),
            x_half: x_init.clone(),
            g_prev: PlayerVector::zeros(dim),
            g_sum: PlayerVector::zeros(dim),
            x_init,
            t: 1,
            gamma_current: None,
            scheduler: Scheduler::new(schedule, cap)?,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// Current round (1-based): the round whose play is about to happen.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn x(&self) -> &PlayerVector {
        &self.x
    }

    pub fn x_half(&self) -> &PlayerVector {
        &self.x_half
    }

    pub fn x_init(&self) -> &PlayerVector {
        &self.x_init
    }

    pub fn g_prev(&self) -> &PlayerVector {
        &self.g_prev
    }

    pub fn g_sum(&self) -> &PlayerVector {
        &self.g_sum
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    /// Rates for the current round, computed under the one-round-lag discipline.
    /// For `og` the single sequence replaces both rates.
    pub fn round_rates(&self) -> Result<RoundRates> {
        let r = self.scheduler.rates(self.t)?;
        Ok(match self.algorithm {
            Algorithm::Og => RoundRates {
                gamma_hat: r.gamma,
                gamma: r.gamma,
                gamma_next: r.gamma,
            },
            _ => r,
        })
    }

    /// Computes and records the point played this round.
    pub fn extrapolate(&mut self, rates: &RoundRates) -> &PlayerVector {
        self.x_half = match self.algorithm {
            Algorithm::Gda => self.x.clone(),
            _ => self.x.add_scaled(-rates.gamma_hat, &self.g_prev),
        };
        &self.x_half
    }

    /// Consumes this round's feedback and advances to the next round.
    pub fn update(&mut self, feedback: &FeedbackSample, rates: &RoundRates) -> Result<RoundTrace> {
        let g = &feedback.g;
        if g.dim() != self.x.dim() {
            return Err(Error::Dimension {
                context: "learner feedback",
                expected: self.x.dim(),
                got: g.dim(),
            });
        }
        if !g.is_finite() {
            return Err(Error::Runtime {
                round: self.t,
                player: self.player,
                message: "non-finite feedback".into(),
            });
        }
        let step = match self.algorithm {
            Algorithm::Gda => rates.gamma,
            _ => rates.gamma_next,
        };
        let x_next = match self.algorithm {
            Algorithm::Gda | Algorithm::Og | Algorithm::OgPlus => self.x.add_scaled(-step, g),
            Algorithm::OptdaPlus => {
                self.g_sum.axpy(1.0, g);
                self.x_init.add_scaled(-step, &self.g_sum)
            }
        };
        if !x_next.is_finite() {
            return Err(Error::Runtime {
                round: self.t,
                player: self.player,
                message: "iterate diverged to a non-finite value".into(),
            });
        }
        let diff_sq = self.x.dist_sq(&x_next);
        self.scheduler.record(self.t, g.norm_sq(), diff_sq)?;

        let trace = RoundTrace {
            algorithm: self.algorithm,
            t: self.t,
            x: std::mem::replace(&mut self.x, x_next.clone()),
            x_half: self.x_half.clone(),
            x_next,
            x_init: self.x_init.clone(),
            g: g.clone(),
            g_prev: std::mem::replace(&mut self.g_prev, g.clone()),
            gamma_hat: rates.gamma_hat,
            gamma: self.gamma_current.unwrap_or(step),
            gamma_next: step,
        };
        self.gamma_current = Some(step);
        self.t += 1;
        Ok(trace)
    }
}

/// Runs OG+ and OptDA+ side by side with identical constant rates and
/// identical feedback on the given game and reports whether their base and
/// played iterates agree to `1e−9` at every round.
pub fn equal_rate_equivalence_check(
    game: &crate::games::GameSpec,
    x_init: &crate::types::JointAction,
    noise: &crate::noise::NoiseSpec,
    gamma_hat: f64,
    gamma: f64,
    horizon: usize,
    seed: u64,
) -> Result<bool> {
    trajectories_agree(
        game,
        x_init,
        noise,
        ScheduleSpec::constant(gamma_hat, gamma),
        horizon,
        seed,
        1e-9,
    )
}

/// Same as [`equal_rate_equivalence_check`] for an arbitrary schedule; only
/// constant schedules are expected to agree.
pub fn trajectories_agree(
    game: &crate::games::GameSpec,
    x_init: &crate::types::JointAction,
    noise: &crate::noise::NoiseSpec,
    schedule: ScheduleSpec,
    horizon: usize,
    seed: u64,
    tol: f64,
) -> Result<bool> {
    use crate::noise::sample_feedback;
    use crate::types::{JointAction, RngStream};

    game.check_profile(x_init)?;
    let n = game.players();
    let build = |alg| -> Result<Vec<LearnerState>> {
        (0..n)
            .map(|i| LearnerState::new(alg, i, x_init[i].clone(), schedule, None))
            .collect()
    };
    let mut og = build(Algorithm::OgPlus)?;
    let mut da = build(Algorithm::OptdaPlus)?;
    // One stream per player, replayed identically for both algorithms.
    let mut rng_og: Vec<RngStream> = (0..n).map(|i| RngStream::new(seed, i as u64)).collect();
    let mut rng_da = rng_og.clone();

    for t in 1..=horizon {
        let step = |learners: &mut Vec<LearnerState>, rngs: &mut Vec<RngStream>| -> Result<()> {
            let rates: Vec<RoundRates> = learners.iter().map(|l| l.round_rates()).collect::<Result<_>>()?;
            let played = JointAction::new(
                learners
                    .iter_mut()
                    .zip(&rates)
                    .map(|(l, r)| l.extrapolate(r).clone())
                    .collect(),
            );
            let v = game.payoff_gradient(&played)?;
            for (i, l) in learners.iter_mut().enumerate() {
                let fb = sample_feedback(&v[i], noise, &mut rngs[i], i, t)?;
                l.update(&fb, &rates[i])?;
            }
            Ok(())
        };
        step(&mut og, &mut rng_og)?;
        step(&mut da, &mut rng_da)?;
        for (a, b) in og.iter().zip(&da) {
            let dx = a.x().dist_sq(b.x()).sqrt();
            let dh = a.x_half().dist_sq(b.x_half()).sqrt();
            if !(dx <= tol && dh <= tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::GameSpec;
    use crate::noise::{zero_feedback, NoiseSpec};
    use crate::schedules::ScheduleKind;
    use crate::types::JointAction;

    fn pv(v: &[f64]) -> PlayerVector {
        PlayerVector::new(v.to_vec())
    }

    fn fb(g: &[f64], t: usize) -> FeedbackSample {
        let g = pv(g);
        FeedbackSample {
            clean_norm_sq: g.norm_sq(),
            g,
            player: 0,
            t,
        }
    }

    fn learner(alg: Algorithm, x: &[f64], sched: ScheduleSpec) -> LearnerState {
        LearnerState::new(alg, 0, pv(x), sched, None).unwrap()
    }

    #[test]
    fn first_round_plays_initial_point() {
        for alg in [Algorithm::Og, Algorithm::OgPlus, Algorithm::OptdaPlus, Algorithm::Gda] {
            let mut l = learner(alg, &[1.0], ScheduleSpec::constant(0.5, 0.1));
            assert_eq!(l.g_prev(), &zero_feedback(1, 0).g);
            let r = l.round_rates().unwrap();
            assert_eq!(l.extrapolate(&r), &pv(&[1.0]));
        }
    }

    #[test]
    fn og_plus_extrapolation_example() {
        let mut l = learner(Algorithm::OgPlus, &[0.9], ScheduleSpec::constant(0.5, 0.1));
        l.g_prev = pv(&[-1.0]);
        let r = l.round_rates().unwrap();
        let played = l.extrapolate(&r).clone();
        assert!((played[0] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn gda_plays_base_iterate() {
        let mut l = learner(Algorithm::Gda, &[0.3], ScheduleSpec::vanilla(0.1));
        l.g_prev = pv(&[5.0]);
        let r = l.round_rates().unwrap();
        assert_eq!(l.extrapolate(&r), &pv(&[0.3]));
    }

    fn run_bilinear(alg: Algorithm, rounds: usize) -> (Vec<LearnerState>, Vec<Vec<PlayerVector>>) {
        let game = GameSpec::scalar_bilinear();
        let mut ls: Vec<LearnerState> = (0..2)
            .map(|i| LearnerState::new(alg, i, pv(&[1.0]), ScheduleSpec::constant(0.5, 0.1), None).unwrap())
            .collect();
        let mut gs = Vec::new();
        for t in 1..=rounds {
            let rates: Vec<_> = ls.iter().map(|l| l.round_rates().unwrap()).collect();
            let played = JointAction::new(
                ls.iter_mut()
                    .zip(&rates)
                    .map(|(l, r)| l.extrapolate(r).clone())
                    .collect(),
            );
            let v = game.payoff_gradient(&played).unwrap();
            let mut round = Vec::new();
            for (i, l) in ls.iter_mut().enumerate() {
                l.update(&fb(v[i].as_slice(), t), &rates[i]).unwrap();
                round.push(v[i].clone());
            }
            gs.push(round);
        }
        (ls, gs)
    }

    #[test]
    fn og_plus_one_step_on_bilinear() {
        let (ls, gs) = run_bilinear(Algorithm::OgPlus, 1);
        assert_eq!(gs[0], vec![pv(&[1.0]), pv(&[-1.0])]);
        assert!((ls[0].x()[0] - 0.9).abs() < 1e-15);
        assert!((ls[1].x()[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn optda_plus_two_steps_match_raw_recursion() {
        let (ls, _) = run_bilinear(Algorithm::OptdaPlus, 1);
        assert!((ls[0].x()[0] - 0.9).abs() < 1e-15);
        assert!((ls[1].x()[0] - 1.1).abs() < 1e-15);

        // Independent recomputation of two rounds from the raw recursion.
        let (gh, g) = (0.5, 0.1);
        let x1 = [1.0f64, 1.0];
        let g1 = [x1[1], -x1[0]];
        let x2 = [x1[0] - g * g1[0], x1[1] - g * g1[1]];
        let half2 = [x2[0] - gh * g1[0], x2[1] - gh * g1[1]];
        let g2 = [half2[1], -half2[0]];
        let x3 = [x1[0] - g * (g1[0] + g2[0]), x1[1] - g * (g1[1] + g2[1])];

        let (ls, _) = run_bilinear(Algorithm::OptdaPlus, 2);
        assert!((ls[0].x()[0] - x3[0]).abs() < 1e-15);
        assert!((ls[1].x()[0] - x3[1]).abs() < 1e-15);
        assert!((ls[0].x_half()[0] - half2[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_feedback_is_a_fixed_point() {
        for alg in [Algorithm::Gda, Algorithm::Og, Algorithm::OgPlus, Algorithm::OptdaPlus] {
            let mut l = learner(alg, &[0.7, -0.2], ScheduleSpec::adaptive(0.25));
            for t in 1..50 {
                let r = l.round_rates().unwrap();
                assert_eq!(l.extrapolate(&r), &pv(&[0.7, -0.2]));
                l.update(&fb(&[0.0, 0.0], t), &r).unwrap();
                assert_eq!(l.x(), &pv(&[0.7, -0.2]));
            }
        }
    }

    #[test]
    fn non_finite_feedback_names_round_and_player() {
        let mut l =
            LearnerState::new(Algorithm::OgPlus, 3, pv(&[1.0]), ScheduleSpec::constant(0.5, 0.1), None).unwrap();
        let r = l.round_rates().unwrap();
        l.extrapolate(&r);
        match l.update(&fb(&[f64::NAN], 1), &r) {
            Err(Error::Runtime { round, player, .. }) => assert_eq!((round, player), (1, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dual_averaging_reconstruction() {
        let game = GameSpec::scalar_bilinear();
        let x0 = JointAction::from_nested(vec![vec![1.0], vec![1.0]]);
        let mut ls: Vec<LearnerState> = (0..2)
            .map(|i| {
                LearnerState::new(
                    Algorithm::OptdaPlus,
                    i,
                    x0[i].clone(),
                    ScheduleSpec::adaptive(0.25),
                    None,
                )
                .unwrap()
            })
            .collect();
        let mut rngs: Vec<_> = (0..2).map(|i| crate::types::RngStream::new(9, i)).collect();
        for t in 1..300 {
            let rates: Vec<_> = ls.iter().map(|l| l.round_rates().unwrap()).collect();
            let played = JointAction::new(
                ls.iter_mut()
                    .zip(&rates)
                    .map(|(l, r)| l.extrapolate(r).clone())
                    .collect(),
            );
            let v = game.payoff_gradient(&played).unwrap();
            for (i, l) in ls.iter_mut().enumerate() {
                let s = crate::noise::sample_feedback(&v[i], &NoiseSpec::additive(0.5), &mut rngs[i], i, t).unwrap();
                let tr = l.update(&s, &rates[i]).unwrap();
                let rebuilt = l.x_init().add_scaled(-tr.gamma_next, l.g_sum());
                assert!(rebuilt.dist_sq(l.x()).sqrt() <= 1e-12);
            }
        }
    }

    #[test]
    fn constant_rates_make_og_plus_and_optda_plus_coincide() {
        let game = GameSpec::scalar_bilinear();
        let x0 = JointAction::from_nested(vec![vec![1.0], vec![1.0]]);
        assert!(equal_rate_equivalence_check(&game, &x0, &NoiseSpec::NONE, 0.5, 0.1, 100, 1).unwrap());
        assert!(equal_rate_equivalence_check(&game, &x0, &NoiseSpec::multiplicative(0.5), 0.5, 0.1, 100, 1).unwrap());
        let decaying = ScheduleSpec::new(ScheduleKind::OptdaPoly);
        assert!(!trajectories_agree(&game, &x0, &NoiseSpec::NONE, decaying, 100, 1, 1e-9).unwrap());
    }
}
