//! Bounded non-learning opponents for the adversarial regime. These are simple
//! stress strategies, not a lower-bound construction.

use crate::error::Result;
use crate::games::GameSpec;
use crate::types::{JointAction, PlayerVector};

use super::config::{OpponentKind, OpponentSpec};

/// Action of opponent-controlled `player` at round `t`, given the profile
/// played in the previous round (or the initial profile at `t = 1`).
pub fn adversarial_opponent_step(
    spec: &OpponentSpec,
    game: &GameSpec,
    player: usize,
    t: usize,
    observed: &JointAction,
) -> Result<PlayerVector> {
    let dim = game.dims()[player];
    let a = spec.amplitude;
    match spec.kind {
        OpponentKind::Oscillator => {
            let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
            Ok(PlayerVector::new(vec![sign * a; dim]))
        }
        OpponentKind::BestResponse => {
            // Minimizes the linearized loss ⟨V_j(observed), y⟩ over ‖y‖ ≤ A.
            let v = game.payoff_gradient(observed)?;
            let vj = &v[player];
            let norm = vj.norm();
            if norm == 0.0 || a == 0.0 {
                return Ok(PlayerVector::zeros(dim));
            }
            Ok(vj.scaled(-a / norm))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: OpponentKind, amplitude: f64) -> OpponentSpec {
        OpponentSpec {
            kind,
            amplitude,
            players: vec![1],
        }
    }

    #[test]
    fn oscillator_alternates() {
        let g = GameSpec::scalar_bilinear();
        let obs = JointAction::from_nested(vec![vec![0.3], vec![0.0]]);
        let s = spec(OpponentKind::Oscillator, 1.0);
        let out: Vec<f64> = (1..=4)
            .map(|t| adversarial_opponent_step(&s, &g, 1, t, &obs).unwrap()[0])
            .collect();
        assert_eq!(out, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn best_response_is_clamped_sign() {
        // Player 2's loss is −x·y, so against x > 0 the best bounded reply is y = +A.
        let g = GameSpec::scalar_bilinear();
        let s = spec(OpponentKind::BestResponse, 0.7);
        for (x, want) in [(0.4, 0.7), (-2.0, -0.7), (0.0, 0.0)] {
            let obs = JointAction::from_nested(vec![vec![x], vec![5.0]]);
            assert_eq!(adversarial_opponent_step(&s, &g, 1, 3, &obs).unwrap()[0], want);
        }
    }

    #[test]
    fn zero_amplitude_pins_opponent() {
        let g = GameSpec::scalar_bilinear();
        let obs = JointAction::from_nested(vec![vec![1.0], vec![1.0]]);
        for kind in [OpponentKind::Oscillator, OpponentKind::BestResponse] {
            for t in 1..5 {
                assert_eq!(
                    adversarial_opponent_step(&spec(kind, 0.0), &g, 1, t, &obs).unwrap()[0].abs(),
                    0.0
                );
            }
        }
    }
}
