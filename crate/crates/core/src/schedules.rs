//! Learning-rate laws: theorem-safe constants, polynomially decaying
//! families, and the AdaGrad-style adaptive rule.
//!
//! Every schedule emits, at round `t`, the extrapolation rate `γ̂_t`, the rate
//! `γ_t` that produced the current base iterate, and the update rate `γ_{t+1}`.
//! Adaptive rates at round `t` may only depend on feedback through round
//! `t − 2`; [`Scheduler`] enforces this ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which step-size condition applies when rates are derived from a theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremFamily {
    OgPlus,
    OptdaPlus,
}

impl TheoremFamily {
    /// Largest admissible `γ / γ̂` ratio.
    pub fn ratio(self, sigma_mult: f64) -> f64 {
        1.0 / self.ratio_divisor(sigma_mult)
    }

    /// `γ̂ / γ` at the largest admissible ratio.
    pub fn ratio_divisor(self, sigma_mult: f64) -> f64 {
        match self {
            TheoremFamily::OgPlus => 2.0 * (1.0 + sigma_mult),
            TheoremFamily::OptdaPlus => 4.0 * (1.0 + sigma_mult),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeRates {
    pub gamma_hat: f64,
    pub gamma: f64,
}

/// Largest constant rates satisfying the step-size conditions of the regret
/// theorems, taken at equality. A vanishing `σ_M` drops the `1/σ_M` branch.
pub fn safe_constant_rates(family: TheoremFamily, players: usize, lipschitz: f64, sigma_mult: f64) -> SafeRates {
    let n = players as f64;
    let l = lipschitz;
    let sm = sigma_mult;
    let mult_branch = |v: f64| if sm > 0.0 { v } else { f64::INFINITY };
    let gamma_hat = match family {
        TheoremFamily::OgPlus => {
            let a = 1.0 / (3.0 * l * (2.0 * n * (1.0 + sm)).sqrt());
            let b = mult_branch(1.0 / (2.0 * (4.0 * n + 1.0) * l * sm));
            a.min(b)
        }
        TheoremFamily::OptdaPlus => {
            let a = 1.0 / (3.0 * n * (1.0 + sm)).sqrt();
            let b = mult_branch(1.0 / ((4.0 * n + 1.0) * sm));
            a.min(b) / (2.0 * l)
        }
    };
    SafeRates {
        gamma_hat,
        gamma: gamma_hat / family.ratio_divisor(sm),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `(scale_hat, scale)` for every round.
    Constant,
    /// `(scale_hat / (t^{1/4} √log(t+1)), scale / (√t log(t+1)))`.
    OgPlusPoly,
    /// `(scale_hat / t^{1/4}, scale / √t)`.
    OptdaPoly,
    /// `(scale_hat / t^{1/2−ε}, scale / √t)`.
    AdversarialPoly,
    /// AdaGrad-style rule driven by the player's own feedback.
    Adaptive,
    /// Single sequence `scale / √(t+1)` used by the vanilla baselines.
    Vanilla,
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_scale")]
    pub scale_hat: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub derived_from_theorem: bool,
}

impl ScheduleSpec {
    pub fn new(kind: ScheduleKind) -> Self {
        ScheduleSpec {
            kind,
            epsilon: default_epsilon(),
            scale_hat: 1.0,
            scale: 1.0,
            derived_from_theorem: false,
        }
    }

    pub fn constant(gamma_hat: f64, gamma: f64) -> Self {
        ScheduleSpec {
            scale_hat: gamma_hat,
            scale: gamma,
            ..ScheduleSpec::new(ScheduleKind::Constant)
        }
    }

    pub fn adaptive(epsilon: f64) -> Self {
        ScheduleSpec {
            epsilon,
            ..ScheduleSpec::new(ScheduleKind::Adaptive)
        }
    }

    pub fn vanilla(scale: f64) -> Self {
        ScheduleSpec {
            scale_hat: scale,
            scale,
            ..ScheduleSpec::new(ScheduleKind::Vanilla)
        }
    }

    pub fn theorem_capped(mut self) -> Self {
        self.derived_from_theorem = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.25).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "schedule epsilon must lie in [0, 1/4], got {}",
                self.epsilon
            )));
        }
        if self.kind == ScheduleKind::Adaptive && self.epsilon <= 0.0 {
            return Err(Error::Config("adaptive schedule requires epsilon in (0, 1/4]".into()));
        }
        if !(self.scale_hat > 0.0 && self.scale_hat.is_finite() && self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "schedule scales must be positive and finite, got scale_hat={} scale={}",
                self.scale_hat, self.scale
            )));
        }
        if self.kind == ScheduleKind::Constant && !self.derived_from_theorem && self.scale > self.scale_hat {
            return Err(Error::Config(format!(
                "constant schedule needs gamma <= gamma_hat, got {} > {}",
                self.scale, self.scale_hat
            )));
        }
        Ok(())
    }
}

/// Uncapped `(γ̂_t, γ_t)` of a predetermined schedule.
fn raw_poly(spec: &ScheduleSpec, t: usize) -> (f64, f64) {
    let tf = t as f64;
    match spec.kind {
        ScheduleKind::Constant => (spec.scale_hat, spec.scale),
        ScheduleKind::OgPlusPoly => {
            let log = (tf + 1.0).ln();
            (
                spec.scale_hat / (tf.powf(0.25) * log.sqrt()),
                spec.scale / (tf.sqrt() * log),
            )
        }
        ScheduleKind::OptdaPoly => (spec.scale_hat / tf.powf(0.25), spec.scale / tf.sqrt()),
        ScheduleKind::AdversarialPoly => (spec.scale_hat / tf.powf(0.5 - spec.epsilon), spec.scale / tf.sqrt()),
        ScheduleKind::Vanilla => {
            let r = spec.scale / (tf + 1.0).sqrt();
            (r, r)
        }
        ScheduleKind::Adaptive => unreachable!("adaptive rates depend on state"),
    }
}

/// Theorem context used to cap predetermined schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCap {
    pub safe: SafeRates,
    pub ratio: f64,
}

impl RateCap {
    pub fn new(family: TheoremFamily, players: usize, lipschitz: f64, sigma_mult: f64) -> Self {
        RateCap {
            safe: safe_constant_rates(family, players, lipschitz, sigma_mult),
            ratio: family.ratio(sigma_mult),
        }
    }
}

/// `(γ̂_t, γ_t)` of a predetermined schedule at round `t ≥ 1`, capped by the
/// theorem conditions when `cap` is given.
pub fn poly_rates(spec: &ScheduleSpec, t: usize, cap: Option<&RateCap>) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(Error::Contract("rounds are numbered from 1".into()));
    }
    if spec.kind == ScheduleKind::Adaptive {
        return Err(Error::Contract(
            "adaptive schedules are evaluated from their state, not in closed form".into(),
        ));
    }
    let (hat, gamma) = raw_poly(spec, t);
    Ok(match cap {
        Some(c) => {
            let hat = hat.min(c.safe.gamma_hat);
            (hat, gamma.min(c.safe.gamma).min(hat * c.ratio))
        }
        None => (hat, gamma),
    })
}

/// Running sums driving the adaptive rule: `S = Σ‖g_s‖²` and
/// `S' = Σ‖X_s − X_{s+1}‖²` over the first `k` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScheduleState {
    pub s: f64,
    pub s_prime: f64,
    pub k: usize,
}

impl ScheduleState {
    /// Folds round `k + 1` into the sums.
    pub fn absorb(&self, g_norm_sq: f64, iterate_diff_norm_sq: f64) -> ScheduleState {
        ScheduleState {
            s: self.s + g_norm_sq,
            s_prime: self.s_prime + iterate_diff_norm_sq,
            k: self.k + 1,
        }
    }
}

/// `(γ̂_t, γ_t)` of the adaptive rule from sums running through round `t − 2`.
pub fn adaptive_rates(state: &ScheduleState, t: usize, epsilon: f64) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(Error::Contract("rounds are numbered from 1".into()));
    }
    let expected = t.saturating_sub(2);
    if state.k != expected {
        return Err(Error::Contract(format!(
            "adaptive rates for round {t} need feedback sums through round {expected}, state has {}",
            state.k
        )));
    }
    let hat = (1.0 + state.s).powf(-(0.5 - epsilon));
    let gamma = 1.0 / (1.0 + state.s + state.s_prime).sqrt();
    Ok((hat, gamma))
}

/// Rates used during one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRates {
    /// Extrapolation rate `γ̂_t`.
    pub gamma_hat: f64,
    /// `γ_t`, the rate that produced the current base iterate.
    pub gamma: f64,
    /// Update rate `γ_{t+1}`.
    pub gamma_next: f64,
}

/// Per-player schedule driver. Holds the adaptive sums one round behind the
/// latest feedback so rates for round `t` never see `g_{t−1}` in `γ̂_t`.
#[derive(Debug, Clone)]
pub struct Scheduler {
    spec: ScheduleSpec,
    cap: Option<RateCap>,
    state: ScheduleState,
    pending: Option<(f64, f64)>,
    last_round: usize,
}

impl Scheduler {
    pub fn new(spec: ScheduleSpec, cap: Option<RateCap>) -> Result<Self> {
        spec.validate()?;
        let cap = if spec.derived_from_theorem { cap } else { None };
        Ok(Scheduler {
            spec,
            cap,
            state: ScheduleState::default(),
            pending: None,
            last_round: 0,
        })
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn state(&self) -> &ScheduleState {
        &self.state
    }

    /// Rates for round `t`, which must be the round after the last recorded one.
    pub fn rates(&self, t: usize) -> Result<RoundRates> {
        if t != self.last_round + 1 {
            return Err(Error::Contract(format!(
                "rates requested for round {t} after round {} was recorded",
                self.last_round
            )));
        }
        if self.spec.kind != ScheduleKind::Adaptive {
            let (gamma_hat, gamma) = poly_rates(&self.spec, t, self.cap.as_ref())?;
            let (_, gamma_next) = poly_rates(&self.spec, t + 1, self.cap.as_ref())?;
            return Ok(RoundRates {
                gamma_hat,
                gamma,
                gamma_next,
            });
        }
        let eps = self.spec.epsilon;
        let (gamma_hat, gamma) = adaptive_rates(&self.state, t, eps)?;
        let ahead = self.lookahead();
        let (_, gamma_next) = adaptive_rates(&ahead, t + 1, eps)?;
        Ok(RoundRates {
            gamma_hat,
            gamma,
            gamma_next,
        })
    }

    fn lookahead(&self) -> ScheduleState {
        match self.pending {
            Some((g, d)) => self.state.absorb(g, d),
            None => self.state,
        }
    }

    /// Records round `t`'s feedback energy and iterate displacement.
    pub fn record(&mut self, t: usize, g_norm_sq: f64, iterate_diff_norm_sq: f64) -> Result<()> {
        if t != self.last_round + 1 {
            return Err(Error::Contract(format!(
                "round {t} recorded after round {}",
                self.last_round
            )));
        }
        self.state = self.lookahead();
        self.pending = Some((g_norm_sq, iterate_diff_norm_sq));
        self.last_round = t;
        Ok(())
    }
}

/// Checks `Σ_t a_t / (ε + Σ_{s≤t} a_s)^α ≤ (Σ_t a_t)^{1−α} / (1 − α)` for
/// non-negative `a`, `ε > 0`, `α ∈ [0, 1)`. A relative slack of `1e−12` absorbs
/// rounding in the equality case `α = 0`.
pub fn adagrad_lemma_check(a: &[f64], eps: f64, alpha: f64) -> Result<bool> {
    if !(eps > 0.0) || !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "adagrad lemma needs eps > 0 and alpha in [0, 1), got eps={eps} alpha={alpha}"
        )));
    }
    if a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Config("adagrad lemma needs finite non-negative terms".into()));
    }
    let (lhs, total) = adagrad_lemma_sides(a, eps, alpha);
    let rhs = total.powf(1.0 - alpha) / (1.0 - alpha);
    Ok(lhs <= rhs * (1.0 + 1e-12))
}

/// Left-hand side and total mass of the AdaGrad lemma.
pub fn adagrad_lemma_sides(a: &[f64], eps: f64, alpha: f64) -> (f64, f64) {
    let mut running = 0.0;
    let mut lhs = 0.0;
    for &x in a {
        running += x;
        lhs += x / (eps + running).powf(alpha);
    }
    (lhs, running)
}
