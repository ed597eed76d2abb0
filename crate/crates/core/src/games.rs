//! Game oracles: the joint payoff-gradient field `V = (V_1, …, V_N)` of the
//! built-in games together with their analytically known equilibria.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{weighted_norm_sq, JointAction, PlayerVector, RngStream, WeightVector};

/// Tolerance on `‖V(z*)‖` for every stored equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum GameKind {
    /// Two-player zero-sum game with loss `xᵀA y` for player 1 and `−xᵀA y` for
    /// player 2, so `V(x, y) = (A y, −Aᵀ x)`.
    Bilinear { matrix: DMatrix<f64> },
    /// `V(z) = B z − b` over the concatenated profile, with `B + Bᵀ` positive
    /// semidefinite.
    Quadratic { matrix: DMatrix<f64>, offset: DVector<f64> },
}

/// Representative zeros of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    points: Vec<JointAction>,
}

impl EquilibriumSet {
    pub fn new(points: Vec<JointAction>) -> Self {
        EquilibriumSet { points }
    }

    pub fn points(&self) -> &[JointAction] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    kind: GameKind,
    dims: Vec<usize>,
    lipschitz: f64,
    equilibria: EquilibriumSet,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

fn resolve_lipschitz(computed: f64, given: Option<f64>) -> Result<f64> {
    match given {
        None => Ok(computed.max(f64::MIN_POSITIVE)),
        Some(l) if !(l > 0.0) || !l.is_finite() => Err(Error::Config(format!(
            "lipschitz constant must be positive and finite, got {l}"
        ))),
        Some(l) if l < computed * (1.0 - 1e-12) => Err(Error::Config(format!(
            "lipschitz constant {l} is below the operator norm {computed} of the game"
        ))),
        Some(l) => Ok(l),
    }
}

impl GameSpec {
    /// Two-player bilinear game with an `n × m` payoff matrix; player 1 has
    /// dimension `n`, player 2 dimension `m`. The equilibrium stored is the origin.
    pub fn bilinear(matrix: DMatrix<f64>, lipschitz: Option<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::Config("bilinear matrix must be non-empty".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("bilinear matrix has non-finite entries".into()));
        }
        let dims = vec![matrix.nrows(), matrix.ncols()];
        let lipschitz = resolve_lipschitz(spectral_norm(&matrix), lipschitz)?;
        let equilibria = EquilibriumSet::new(vec![JointAction::zeros(&dims)]);
        let game = GameSpec {
            kind: GameKind::Bilinear { matrix },
            dims,
            lipschitz,
            equilibria,
        };
        game.validate_equilibria()?;
        Ok(game)
    }

    /// The scalar game `min_x max_y x·y`: `A = 1`, equilibrium at the origin, `L = 1`.
    pub fn scalar_bilinear() -> Self {
        GameSpec::bilinear(DMatrix::from_element(1, 1, 1.0), None).expect("scalar bilinear game is well-formed")
    }

    /// `V(z) = B z − b` split across players of the given dimensions. The stored
    /// equilibrium is `B⁻¹ b`.
    pub fn quadratic(
        dims: Vec<usize>,
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
        lipschitz: Option<f64>,
    ) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Config(
                "quadratic game needs at least one player and positive dimensions".into(),
            ));
        }
        let total: usize = dims.iter().sum();
        if matrix.nrows() != total || matrix.ncols() != total {
            return Err(Error::Config(format!(
                "quadratic matrix must be {total}x{total}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if offset.len() != total {
            return Err(Error::Config(format!(
                "quadratic offset must have length {total}, got {}",
                offset.len()
            )));
        }
        if matrix.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("quadratic game has non-finite parameters".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let min_eig = sym
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-12 {
            return Err(Error::Config(format!(
                "symmetric part of the quadratic matrix is not positive semidefinite (min eigenvalue {min_eig})"
            )));
        }
        let solution = matrix
            .clone()
            .lu()
            .solve(&offset)
            .ok_or_else(|| Error::Config("quadratic matrix is singular; equilibrium is not unique".into()))?;
        let lipschitz = resolve_lipschitz(spectral_norm(&matrix), lipschitz)?;
        let eq = JointAction::unflatten(solution.as_slice(), &dims)?;
        let game = GameSpec {
            kind: GameKind::Quadratic { matrix, offset },
            dims,
            lipschitz,
            equilibria: EquilibriumSet::new(vec![eq]),
        };
        game.validate_equilibria()?;
        Ok(game)
    }

    fn validate_equilibria(&self) -> Result<()> {
        if self.equilibria.is_empty() {
            return Err(Error::Config("equilibrium set is empty".into()));
        }
        for z in self.equilibria.points() {
            let v = self.payoff_gradient(z)?;
            let norm = v.norm_sq().sqrt();
            if norm > EQUILIBRIUM_TOL {
                return Err(Error::Config(format!(
                    "stored equilibrium has ‖V(z*)‖ = {norm:e}, above {EQUILIBRIUM_TOL:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &GameKind {
        &self.kind
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn players(&self) -> usize {
        self.dims.len()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn equilibria(&self) -> &EquilibriumSet {
        &self.equilibria
    }

    /// Checks that `x` has this game's player count and dimensions.
    pub fn check_profile(&self, x: &JointAction) -> Result<()> {
        if x.players() != self.players() {
            return Err(Error::Dimension {
                context: "game profile players",
                expected: self.players(),
                got: x.players(),
            });
        }
        for (xi, &d) in x.iter().zip(&self.dims) {
            if xi.dim() != d {
                return Err(Error::Dimension {
                    context: "game profile dimension",
                    expected: d,
                    got: xi.dim(),
                });
            }
        }
        Ok(())
    }

    /// The joint payoff-gradient field `V(x)`.
    pub fn payoff_gradient(&self, x: &JointAction) -> Result<JointAction> {
        self.check_profile(x)?;
        match &self.kind {
            GameKind::Bilinear { matrix } => {
                let (n, m) = (matrix.nrows(), matrix.ncols());
                let (p1, p2) = (x[0].as_slice(), x[1].as_slice());
                let mut v1 = vec![0.0; n];
                let mut v2 = vec![0.0; m];
                for i in 0..n {
                    for j in 0..m {
                        let a = matrix[(i, j)];
                        v1[i] += a * p2[j];
                        v2[j] -= a * p1[i];
                    }
                }
                Ok(JointAction::new(vec![v1.into(), v2.into()]))
            }
            GameKind::Quadratic { matrix, offset } => {
                let flat = x.flatten();
                let total = flat.len();
                let mut v = vec![0.0; total];
                for (r, vr) in v.iter_mut().enumerate() {
                    let mut acc = -offset[r];
                    for (c, xc) in flat.iter().enumerate() {
                        acc += matrix[(r, c)] * xc;
                    }
                    *vr = acc;
                }
                JointAction::unflatten(&v, &self.dims)
            }
        }
    }

    /// Smallest (optionally weighted) distance from `x` to a stored equilibrium.
    pub fn distance_to_equilibrium(&self, x: &JointAction, w: Option<&WeightVector>) -> Result<f64> {
        if self.equilibria.is_empty() {
            return Err(Error::Config("equilibrium set is empty".into()));
        }
        let unit;
        let w = match w {
            Some(w) => w,
            None => {
                unit = WeightVector::unit(self.players());
                &unit
            }
        };
        let mut best = f64::INFINITY;
        for z in self.equilibria.points() {
            let d = weighted_norm_sq(&x.sub(z)?, w)?;
            best = best.min(d);
        }
        Ok(best.sqrt())
    }

    /// `min_{z*} ⟨V(x), x − z*⟩` over the stored equilibria.
    pub fn stability_gap(&self, x: &JointAction) -> Result<f64> {
        let v = self.payoff_gradient(x)?;
        let mut best = f64::INFINITY;
        for z in self.equilibria.points() {
            best = best.min(v.dot(&x.sub(z)?)?);
        }
        Ok(best)
    }

    fn sample_around(&self, center: &JointAction, rng: &mut RngStream, radius: f64) -> JointAction {
        let flat = rng.uniform_in_ball(center.total_dim(), radius);
        let c = center.flatten();
        let shifted: Vec<f64> = flat.iter().zip(&c).map(|(a, b)| a + b).collect();
        JointAction::unflatten(&shifted, &self.dims).expect("dimensions come from the game")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// Minimum observed `⟨V(x), x − z*⟩`.
    pub min_gap: f64,
    pub samples: usize,
}

/// Samples uniformly in a ball around each stored equilibrium and reports the
/// smallest `⟨V(x), x − z*⟩` observed.
pub fn variational_stability_probe(
    game: &GameSpec,
    rng: &mut RngStream,
    samples: usize,
    radius: f64,
) -> Result<StabilityReport> {
    let mut min_gap = f64::INFINITY;
    let mut count = 0;
    for z in game.equilibria().points() {
        for _ in 0..samples {
            let x = game.sample_around(z, rng, radius);
            let v = game.payoff_gradient(&x)?;
            min_gap = min_gap.min(v.dot(&x.sub(z)?)?);
            count += 1;
        }
    }
    Ok(StabilityReport {
        min_gap,
        samples: count,
    })
}

/// Largest observed `‖V(x) − V(y)‖ / ‖x − y‖` over random pairs near the first
/// equilibrium. Coincident pairs are redrawn.
pub fn lipschitz_probe(game: &GameSpec, rng: &mut RngStream, pairs: usize, radius: f64) -> Result<f64> {
    let center = game
        .equilibria()
        .points()
        .first()
        .ok_or_else(|| Error::Config("equilibrium set is empty".into()))?
        .clone();
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let (x, y, dx) = loop {
            let x = game.sample_around(&center, rng, radius);
            let y = game.sample_around(&center, rng, radius);
            let dx = x.sub(&y)?.norm_sq().sqrt();
            if dx > 0.0 {
                break (x, y, dx);
            }
        };
        let dv = game
            .payoff_gradient(&x)?
            .sub(&game.payoff_gradient(&y)?)?
            .norm_sq()
            .sqrt();
        best = best.max(dv / dx);
    }
    Ok(best)
}

/// Convenience for tests and opponents: `V_i` at a profile.
pub fn player_gradient(game: &GameSpec, x: &JointAction, player: usize) -> Result<PlayerVector> {
    let v = game.payoff_gradient(x)?;
    Ok(v.into_inner().swap_remove(player))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_quadratic(d: usize) -> GameSpec {
        GameSpec::quadratic(vec![1; d], DMatrix::identity(d, d), DVector::zeros(d), None).unwrap()
    }

    #[test]
    fn scalar_bilinear_gradient() {
        let g = GameSpec::scalar_bilinear();
        let v = g
            .payoff_gradient(&JointAction::from_nested(vec![vec![1.0], vec![1.0]]))
            .unwrap();
        assert_eq!(v, JointAction::from_nested(vec![vec![1.0], vec![-1.0]]));
        assert_eq!(g.lipschitz(), 1.0);
    }

    #[test]
    fn quadratic_identity_gradient() {
        let g = identity_quadratic(2);
        let x = JointAction::from_nested(vec![vec![2.0], vec![-3.0]]);
        assert_eq!(g.payoff_gradient(&x).unwrap(), x);
    }

    #[test]
    fn equilibria_are_zeros() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let q = GameSpec::quadratic(vec![1, 1], b, DVector::from_vec(vec![1.0, -2.0]), None).unwrap();
        for game in [GameSpec::scalar_bilinear(), q] {
            for z in game.equilibria().points() {
                assert!(game.payoff_gradient(z).unwrap().norm_sq().sqrt() <= EQUILIBRIUM_TOL);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let g = GameSpec::scalar_bilinear();
        let x = JointAction::from_nested(vec![vec![1.0, 2.0], vec![1.0]]);
        assert!(matches!(g.payoff_gradient(&x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn distance_examples() {
        let g = GameSpec::scalar_bilinear();
        let d0 = g
            .distance_to_equilibrium(&JointAction::from_nested(vec![vec![0.0], vec![0.0]]), None)
            .unwrap();
        assert_eq!(d0, 0.0);
        let d = g
            .distance_to_equilibrium(&JointAction::from_nested(vec![vec![3.0], vec![4.0]]), None)
            .unwrap();
        assert!((d - 5.0).abs() < 1e-15);

        let q = identity_quadratic(2);
        let w = WeightVector::new(vec![4.0, 1.0]).unwrap();
        let d = q
            .distance_to_equilibrium(&JointAction::from_nested(vec![vec![1.0], vec![0.0]]), Some(&w))
            .unwrap();
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn stability_probe_bilinear_is_zero() {
        let g = GameSpec::scalar_bilinear();
        let mut rng = RngStream::new(5, 0);
        let r = variational_stability_probe(&g, &mut rng, 500, 3.0).unwrap();
        assert!(r.min_gap.abs() <= 1e-10, "{}", r.min_gap);
        assert_eq!(g.stability_gap(&JointAction::zeros(&[1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn stability_probe_quadratic_positive() {
        let g = identity_quadratic(2);
        let mut rng = RngStream::new(6, 0);
        let r = variational_stability_probe(&g, &mut rng, 500, 1.0).unwrap();
        assert!(r.min_gap >= 0.0);
        let x = JointAction::from_nested(vec![vec![0.5], vec![0.0]]);
        assert!(g.stability_gap(&x).unwrap() > 0.0);
    }

    #[test]
    fn lipschitz_probe_respects_stored_constant() {
        let mut rng = RngStream::new(7, 0);
        for game in [GameSpec::scalar_bilinear(), identity_quadratic(3)] {
            let est = lipschitz_probe(&game, &mut rng, 2000, 2.0).unwrap();
            assert!(est <= game.lipschitz() * (1.0 + 1e-9), "{est}");
            assert!(est.is_finite());
        }
    }

    #[test]
    fn lipschitz_below_operator_norm_is_rejected() {
        let a = DMatrix::from_element(1, 1, 2.0);
        assert!(GameSpec::bilinear(a.clone(), Some(1.0)).is_err());
        assert_eq!(GameSpec::bilinear(a, Some(3.0)).unwrap().lipschitz(), 3.0);
    }

    #[test]
    fn non_monotone_quadratic_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(GameSpec::quadratic(vec![1, 1], b, DVector::zeros(2), None).is_err());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0..10.0f64, 3),
            prop::collection::vec(-10.0..10.0f64, 3),
        )
    }

    fn rect_bilinear() -> GameSpec {
        GameSpec::bilinear(DMatrix::from_row_slice(1, 2, &[1.5, -0.5]), None).unwrap()
    }

    fn pd_quadratic() -> GameSpec {
        let b = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 1.0, 0.5, 0.0, -0.5, 1.0]);
        GameSpec::quadratic(vec![1, 2], b, DVector::from_vec(vec![0.3, -0.2, 1.0]), None).unwrap()
    }

    proptest! {
        #[test]
        fn bilinear_stability_holds_with_equality((z, _) in pair()) {
            let g = rect_bilinear();
            let x = JointAction::unflatten(&z, g.dims()).unwrap();
            let gap = g.stability_gap(&x).unwrap();
            prop_assert!(gap.abs() <= 1e-12 * (1.0 + x.norm_sq()));
        }

        #[test]
        fn quadratic_is_monotone((a, b) in pair()) {
            let g = pd_quadratic();
            let x = JointAction::unflatten(&a, g.dims()).unwrap();
            let y = JointAction::unflatten(&b, g.dims()).unwrap();
            let dv = g.payoff_gradient(&x).unwrap().sub(&g.payoff_gradient(&y).unwrap()).unwrap();
            prop_assert!(dv.dot(&x.sub(&y).unwrap()).unwrap() >= -1e-12);
        }

        #[test]
        fn fields_are_linear((a, b) in pair(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
            let bil = rect_bilinear();
            let x = JointAction::unflatten(&a, bil.dims()).unwrap();
            let y = JointAction::unflatten(&b, bil.dims()).unwrap();
            let combo: Vec<f64> = a.iter().zip(&b).map(|(p, q)| alpha * p + beta * q).collect();
            let lhs = bil.payoff_gradient(&JointAction::unflatten(&combo, bil.dims()).unwrap()).unwrap().flatten();
            let vx = bil.payoff_gradient(&x).unwrap().flatten();
            let vy = bil.payoff_gradient(&y).unwrap().flatten();
            for k in 0..lhs.len() {
                let rhs = alpha * vx[k] + beta * vy[k];
                prop_assert!((lhs[k] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs() + (alpha * vx[k]).abs() + (beta * vy[k]).abs()));
            }

            // affine field: V(αx+βy) − V(0) is linear
            let q = pd_quadratic();
            let v0 = q.payoff_gradient(&JointAction::zeros(q.dims())).unwrap().flatten();
            let x = JointAction::unflatten(&a, q.dims()).unwrap();
            let y = JointAction::unflatten(&b, q.dims()).unwrap();
            let lhs = q.payoff_gradient(&JointAction::unflatten(&combo, q.dims()).unwrap()).unwrap().flatten();
            let vx = q.payoff_gradient(&x).unwrap().flatten();
            let vy = q.payoff_gradient(&y).unwrap().flatten();
            for k in 0..lhs.len() {
                let rhs = alpha * (vx[k] - v0[k]) + beta * (vy[k] - v0[k]);
                let scale = 1.0 + (alpha * vx[k]).abs() + (beta * vy[k]).abs() + v0[k].abs() * (1.0 + alpha.abs() + beta.abs());
                prop_assert!(((lhs[k] - v0[k]) - rhs).abs() <= 1e-12 * scale);
            }
        }
    }
}
