//! Measurements: linearized regret against a finite benchmark set, the
//! cumulative squared payoff-gradient norm, log-log slope fitting and the
//! per-step energy identities used as pathwise correctness oracles.

use crate::error::{Error, Result};
use crate::games::GameSpec;
use crate::learners::{Algorithm, RoundTrace};
use crate::types::{JointAction, PlayerVector};

/// Values at or below this are floored before taking logarithms.
pub const SLOPE_FLOOR: f64 = 1e-9;
/// Minimum number of points inside the fitted window.
pub const SLOPE_MIN_POINTS: usize = 8;

/// `⟨V_i(x_t), x_{i,t} − p_i⟩` for the profile `x_t` actually played.
pub fn regret_increment(game: &GameSpec, x_t: &JointAction, player: usize, benchmark: &PlayerVector) -> Result<f64> {
    let v = game.payoff_gradient(x_t)?;
    linear_regret_term(&v[player], &x_t[player], benchmark)
}

fn linear_regret_term(v_i: &PlayerVector, x_i: &PlayerVector, p: &PlayerVector) -> Result<f64> {
    if p.dim() != x_i.dim() {
        return Err(Error::Dimension {
            context: "regret benchmark",
            expected: x_i.dim(),
            got: p.dim(),
        });
    }
    Ok(v_i
        .iter()
        .zip(x_i.iter())
        .zip(p.iter())
        .map(|((v, x), q)| v * (x - q))
        .sum())
}

/// `Σ_i ‖V_i(x_t)‖²`.
pub fn grad_energy_increment(game: &GameSpec, x_t: &JointAction) -> Result<f64> {
    Ok(game.payoff_gradient(x_t)?.norm_sq())
}

/// Default benchmark set for one player: its equilibrium coordinate and the
/// points `z*_i ± R e_j` along every axis.
pub fn default_benchmarks(equilibrium: &PlayerVector, radius: f64) -> Vec<PlayerVector> {
    let mut out = vec![equilibrium.clone()];
    for j in 0..equilibrium.dim() {
        for sign in [1.0, -1.0] {
            let mut p = equilibrium.clone();
            p[j] += sign * radius;
            out.push(p);
        }
    }
    out
}

/// Running per-player regret (one partial sum per benchmark) and cumulative
/// squared gradient norms.
#[derive(Debug, Clone)]
pub struct MetricAccumulator {
    benchmarks: Vec<Vec<PlayerVector>>,
    regret: Vec<Vec<f64>>,
    grad_energy: Vec<f64>,
    rounds: usize,
}

impl MetricAccumulator {
    pub fn new(benchmarks: Vec<Vec<PlayerVector>>) -> Self {
        let regret = benchmarks.iter().map(|b| vec![0.0; b.len()]).collect();
        let grad_energy = vec![0.0; benchmarks.len()];
        MetricAccumulator {
            benchmarks,
            regret,
            grad_energy,
            rounds: 0,
        }
    }

    pub fn players(&self) -> usize {
        self.benchmarks.len()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn benchmarks(&self, player: usize) -> &[PlayerVector] {
        &self.benchmarks[player]
    }

    /// Folds in one round given the played profile and `V` evaluated there.
    pub fn observe(&mut self, played: &JointAction, v: &JointAction) -> Result<()> {
        if played.players() != self.players() || v.players() != self.players() {
            return Err(Error::Dimension {
                context: "metric accumulator",
                expected: self.players(),
                got: played.players(),
            });
        }
        for i in 0..self.players() {
            for (acc, p) in self.regret[i].iter_mut().zip(&self.benchmarks[i]) {
                *acc += linear_regret_term(&v[i], &played[i], p)?;
            }
            self.grad_energy[i] += v[i].norm_sq();
        }
        self.rounds += 1;
        Ok(())
    }

    /// Linearized regret against each benchmark, in benchmark order.
    pub fn regret_per_benchmark(&self, player: usize) -> &[f64] {
        &self.regret[player]
    }

    /// Largest linearized regret over the benchmark set.
    pub fn regret_max(&self, player: usize) -> f64 {
        self.regret[player].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ_s ‖V_i(x_s)‖²` for one player.
    pub fn grad_energy(&self, player: usize) -> f64 {
        self.grad_energy[player]
    }

    /// `Σ_s Σ_i ‖V_i(x_s)‖²`.
    pub fn grad_energy_total(&self) -> f64 {
        self.grad_energy.iter().sum()
    }
}

/// Ordinary least-squares slope of `log(value)` against `log(t)` over the last
/// `window` fraction of the series' span in log-time. Values at or below
/// [`SLOPE_FLOOR`] are floored.
pub fn loglog_slope(series: &[(f64, f64)], window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Config(format!("slope window must lie in (0, 1], got {window}")));
    }
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t > 0.0).collect();
    if pts.len() < SLOPE_MIN_POINTS {
        return Err(Error::Runtime {
            round: 0,
            player: 0,
            message: format!("slope fit needs at least {SLOPE_MIN_POINTS} points, got {}", pts.len()),
        });
    }
    let log_lo = pts.iter().map(|p| p.0.ln()).fold(f64::INFINITY, f64::min);
    let log_hi = pts.iter().map(|p| p.0.ln()).fold(f64::NEG_INFINITY, f64::max);
    let cut = log_hi - window * (log_hi - log_lo);
    let fitted: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(t, _)| t.ln() >= cut - 1e-12)
        .map(|&(t, v)| (t.ln(), v.max(SLOPE_FLOOR).ln()))
        .collect();
    if fitted.len() < SLOPE_MIN_POINTS {
        return Err(Error::Runtime {
            round: 0,
            player: 0,
            message: format!(
                "slope window holds {} points, at least {SLOPE_MIN_POINTS} required",
                fitted.len()
            ),
        });
    }
    let n = fitted.len() as f64;
    let mx = fitted.iter().map(|p| p.0).sum::<f64>() / n;
    let my = fitted.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = fitted.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = fitted.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Runtime {
            round: 0,
            player: 0,
            message: "slope window spans a single time point".into(),
        });
    }
    Ok(sxy / sxx)
}

/// Roughly `count` distinct rounds in `1..=horizon`, geometrically spaced and
/// always including the last round.
pub fn log_spaced_rounds(horizon: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count.max(2))
        .map(|k| {
            let frac = k as f64 / (count.max(2) - 1) as f64;
            (horizon as f64).powf(frac).round() as usize
        })
        .map(|t| t.clamp(1, horizon.max(1)))
        .collect();
    out.push(horizon.max(1));
    out.sort_unstable();
    out.dedup();
    out
}

/// Normalized residual of the exact one-step energy identity for the
/// optimistic updates, at probe point `p`. `None` for GDA, which has no
/// such identity.
///
/// OG+/OG:
/// ```text
/// ‖X_{t+1}−p‖² = ‖X_t−p‖² − 2γ_{t+1}⟨g_t, X_{t+½}−p⟩ − 2γ̂_tγ_{t+1}⟨g_t, g_{t−1}⟩ + γ_{t+1}²‖g_t‖²
/// ```
///
/// OptDA+ (weighted by the inverse rates):
/// ```text
/// ‖X_{t+1}−p‖²/γ_{t+1} = ‖X_t−p‖²/γ_t − ‖X_t−X_{t+1}‖²/γ_t
///     + (1/γ_{t+1} − 1/γ_t)(‖X_1−p‖² − ‖X_1−X_{t+1}‖²)
///     − 2⟨g_t, X_{t+½}−p⟩ − 2γ̂_t⟨g_t, g_{t−1}⟩ + 2⟨g_t, X_t−X_{t+1}⟩
/// ```
///
/// The residual is `|lhs − rhs| / (1 + ‖X_t − p‖²)`.
pub fn energy_identity_residual(trace: &RoundTrace, probe: &PlayerVector) -> Option<f64> {
    let x = &trace.x;
    let x_next = &trace.x_next;
    let g = &trace.g;
    let d_now = x.dist_sq(probe);
    let half_gap = trace.x_half.sub(probe);
    let (lhs, rhs) = match trace.algorithm {
        Algorithm::Gda => return None,
        Algorithm::Og | Algorithm::OgPlus => {
            let gn = trace.gamma_next;
            let lhs = x_next.dist_sq(probe);
            let rhs = d_now - 2.0 * gn * g.dot(&half_gap) - 2.0 * trace.gamma_hat * gn * g.dot(&trace.g_prev)
                + gn * gn * g.norm_sq();
            (lhs, rhs)
        }
        Algorithm::OptdaPlus => {
            let inv_now = 1.0 / trace.gamma;
            let inv_next = 1.0 / trace.gamma_next;
            let lhs = x_next.dist_sq(probe) * inv_next;
            let step = x.sub(x_next);
            let rhs = d_now * inv_now - step.norm_sq() * inv_now
                + (inv_next - inv_now) * (trace.x_init.dist_sq(probe) - trace.x_init.dist_sq(x_next))
                - 2.0 * g.dot(&half_gap)
                - 2.0 * trace.gamma_hat * g.dot(&trace.g_prev)
                + 2.0 * g.dot(&step);
            (lhs, rhs)
        }
    };
    Some((lhs - rhs).abs() / (1.0 + d_now))
}
