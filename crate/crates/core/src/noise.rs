//! Noisy first-order feedback: `g = V_i(x) + ξ` with
//! `E‖ξ‖² = σ² + σ_M ‖V_i(x)‖²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{gaussian_vector, PlayerVector, RngStream};

/// Maximum number of redraws when the noise is truncated to a ball.
pub const MAX_REDRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Additive standard deviation `σ`. Zero means the noise is purely multiplicative.
    #[serde(default)]
    pub sigma_add: f64,
    /// Multiplicative variance coefficient `σ_M`.
    #[serde(default)]
    pub sigma_mult: f64,
    /// Almost-sure bound on `‖ξ‖`, enforced by rejection.
    #[serde(default)]
    pub bound_abs: Option<f64>,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        sigma_add: 0.0,
        sigma_mult: 0.0,
        bound_abs: None,
    };

    pub fn additive(sigma: f64) -> Self {
        NoiseSpec {
            sigma_add: sigma,
            ..NoiseSpec::NONE
        }
    }

    pub fn multiplicative(sigma_mult: f64) -> Self {
        NoiseSpec {
            sigma_mult,
            ..NoiseSpec::NONE
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.sigma_add) || !ok(self.sigma_mult) || !self.bound_abs.is_none_or(ok) {
            return Err(Error::Config(format!(
                "noise parameters must be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn is_multiplicative(&self) -> bool {
        self.sigma_add == 0.0
    }

    /// `σ² + σ_M ‖v‖²`, the second moment of the noise at a clean vector `v`.
    pub fn second_moment(&self, clean_norm_sq: f64) -> f64 {
        self.sigma_add * self.sigma_add + self.sigma_mult * clean_norm_sq
    }
}

/// One round of feedback for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSample {
    pub g: PlayerVector,
    pub clean_norm_sq: f64,
    pub player: usize,
    pub t: usize,
}

/// Perturbs a clean gradient with zero-mean Gaussian noise whose per-coordinate
/// variance is `(σ² + σ_M‖clean‖²) / d`.
pub fn sample_feedback(
    clean: &PlayerVector,
    spec: &NoiseSpec,
    rng: &mut RngStream,
    player: usize,
    t: usize,
) -> Result<FeedbackSample> {
    let clean_norm_sq = clean.norm_sq();
    let dim = clean.dim();
    let std = (spec.second_moment(clean_norm_sq) / dim as f64).sqrt();
    let xi = match spec.bound_abs {
        None => gaussian_vector(rng, dim, std)?,
        Some(bound) => {
            let mut attempt = 0;
            loop {
                let xi = gaussian_vector(rng, dim, std)?;
                if xi.norm() <= bound {
                    break xi;
                }
                attempt += 1;
                if attempt >= MAX_REDRAWS {
                    return Err(Error::Runtime {
                        round: t,
                        player,
                        message: format!(
                            "noise truncation exhausted {MAX_REDRAWS} redraws for spec {spec:?} (per-coordinate std {std})"
                        ),
                    });
                }
            }
        }
    };
    Ok(FeedbackSample {
        g: clean.add(&xi),
        clean_norm_sq,
        player,
        t,
    })
}

/// The `g_0 = 0` feedback used before the first round.
pub fn zero_feedback(dim: usize, player: usize) -> FeedbackSample {
    FeedbackSample {
        g: PlayerVector::zeros(dim),
        clean_norm_sq: 0.0,
        player,
        t: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> PlayerVector {
        PlayerVector::new(values.to_vec())
    }

    fn noise_stats(clean: &PlayerVector, spec: NoiseSpec, draws: usize, seed: u64) -> (Vec<f64>, f64, f64) {
        let mut rng = RngStream::new(seed, 0);
        let mut mean = vec![0.0; clean.dim()];
        let mut second = 0.0;
        let mut max_norm: f64 = 0.0;
        for t in 0..draws {
            let s = sample_feedback(clean, &spec, &mut rng, 0, t).unwrap();
            let xi = s.g.sub(clean);
            for (m, x) in mean.iter_mut().zip(xi.iter()) {
                *m += x;
            }
            second += xi.norm_sq();
            max_norm = max_norm.max(xi.norm());
        }
        for m in &mut mean {
            *m /= draws as f64;
        }
        (mean, second / draws as f64, max_norm)
    }

    #[test]
    fn noiseless_returns_clean() {
        let mut rng = RngStream::new(1, 0);
        let s = sample_feedback(&v(&[1.0, -1.0]), &NoiseSpec::NONE, &mut rng, 0, 1).unwrap();
        assert_eq!(s.g, v(&[1.0, -1.0]));
        assert_eq!(s.clean_norm_sq, 2.0);
    }

    #[test]
    fn multiplicative_vanishes_at_zero() {
        let mut rng = RngStream::new(1, 0);
        let s = sample_feedback(&v(&[0.0, 0.0]), &NoiseSpec::multiplicative(3.0), &mut rng, 0, 1).unwrap();
        assert_eq!(s.g, v(&[0.0, 0.0]));
    }

    #[test]
    fn second_moment_and_unbiasedness() {
        let spec = NoiseSpec {
            sigma_add: 0.5,
            sigma_mult: 1.0,
            bound_abs: None,
        };
        let clean = v(&[1.0, -1.0]);
        let draws = 100_000;
        let (mean, second, _) = noise_stats(&clean, spec, draws, 11);
        assert!((0.95 * 2.25..=1.05 * 2.25).contains(&second), "{second}");
        let coord_std = (2.25f64 / 2.0).sqrt();
        for m in mean {
            assert!(m.abs() <= 4.0 * coord_std / (draws as f64).sqrt(), "{m}");
        }
    }

    #[test]
    fn multiplicative_regime_scales_quadratically() {
        let spec = NoiseSpec::multiplicative(0.7);
        let base = v(&[0.3, -0.4, 1.0]);
        let (_, s1, _) = noise_stats(&base, spec, 100_000, 21);
        let (_, s2, _) = noise_stats(&base.scaled(2.0), spec, 100_000, 22);
        let ratio = s2 / s1;
        assert!((4.0 * 0.93..=4.0 * 1.07).contains(&ratio), "{ratio}");
    }

    #[test]
    fn truncation_is_exact() {
        let spec = NoiseSpec {
            sigma_add: 1.0,
            sigma_mult: 0.0,
            bound_abs: Some(0.8),
        };
        let (_, _, max_norm) = noise_stats(&v(&[2.0, 0.0]), spec, 20_000, 3);
        assert!(max_norm <= 0.8);
    }

    #[test]
    fn exhausted_redraws_report_spec() {
        let spec = NoiseSpec {
            sigma_add: 1.0,
            sigma_mult: 0.0,
            bound_abs: Some(0.0),
        };
        let mut rng = RngStream::new(0, 0);
        let err = sample_feedback(&v(&[1.0]), &spec, &mut rng, 1, 9).unwrap_err();
        match err {
            Error::Runtime { round, player, message } => {
                assert_eq!((round, player), (9, 1));
                assert!(message.contains("bound_abs"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_feedback_shapes() {
        assert_eq!(zero_feedback(1, 0).g, v(&[0.0]));
        let z = zero_feedback(3, 2);
        assert_eq!(z.g, v(&[0.0, 0.0, 0.0]));
        assert_eq!((z.t, z.clean_norm_sq), (0, 0.0));
    }

    #[test]
    fn negative_parameters_rejected() {
        assert!(NoiseSpec::additive(-1.0).validate().is_err());
        assert!(NoiseSpec::multiplicative(f64::NAN).validate().is_err());
        assert!(NoiseSpec::additive(0.5).validate().is_ok());
    }
}
