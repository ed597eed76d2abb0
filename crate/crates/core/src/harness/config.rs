use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::GameSpec;
use crate::learners::Algorithm;
use crate::noise::NoiseSpec;
use crate::schedules::ScheduleSpec;
use crate::types::JointAction;

/// Game parameters as written in the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameConfig {
    Bilinear {
        /// Row-major payoff matrix `A`; player 1 has `rows` coordinates, player 2 `cols`.
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        lipschitz: Option<f64>,
        /// Initial profile `X_1`; all ones when omitted.
        #[serde(default)]
        initial: Option<Vec<Vec<f64>>>,
    },
    Quadratic {
        dims: Vec<usize>,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default)]
        initial: Option<Vec<Vec<f64>>>,
    },
}

impl Default for GameConfig {
    /// The scalar game `min_x max_y x·y` started from `(1, 1)`.
    fn default() -> Self {
        GameConfig::Bilinear {
            matrix: vec![vec![1.0]],
            lipschitz: None,
            initial: Some(vec![vec![1.0], vec![1.0]]),
        }
    }
}

fn dense(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

impl GameConfig {
    pub fn build(&self) -> Result<(GameSpec, JointAction)> {
        let (game, initial) = match self {
            GameConfig::Bilinear {
                matrix,
                lipschitz,
                initial,
            } => (
                GameSpec::bilinear(dense(matrix, "bilinear matrix")?, *lipschitz)?,
                initial,
            ),
            GameConfig::Quadratic {
                dims,
                matrix,
                offset,
                lipschitz,
                initial,
            } => (
                GameSpec::quadratic(
                    dims.clone(),
                    dense(matrix, "quadratic matrix")?,
                    DVector::from_vec(offset.clone()),
                    *lipschitz,
                )?,
                initial,
            ),
        };
        let x1 = match initial {
            Some(v) => JointAction::from_nested(v.clone()),
            None => JointAction::from_nested(game.dims().iter().map(|&d| vec![1.0; d]).collect()),
        };
        game.check_profile(&x1)
            .map_err(|e| Error::Config(format!("initial profile does not match the game: {e}")))?;
        if !x1.is_finite() {
            return Err(Error::Config("initial profile must be finite".into()));
        }
        Ok((game, x1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerConfig {
    pub algorithm: Algorithm,
    pub schedule: ScheduleSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentKind {
    /// Plays `+A, −A, +A, …` on every coordinate.
    Oscillator,
    /// Best response to the previous round's play within the ball of radius `A`,
    /// against the opponent's linearized loss.
    BestResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpponentSpec {
    pub kind: OpponentKind,
    pub amplitude: f64,
    /// Player indices controlled by the opponent; the `players` list of the
    /// configuration then describes the remaining learners in index order.
    pub players: Vec<usize>,
}

/// Run-time property assertions. A violation aborts the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Per-step energy identities at three probes, residual ≤ 1e−9.
    EnergyIdentity,
    /// OptDA+ iterate equals `X_1 − γ_{t+1} Σ g` recomputed from scratch.
    DualAveraging,
    /// Emitted rates never increase.
    RatesNonIncreasing,
}

fn default_radius() -> f64 {
    2.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    #[serde(default = "no_noise")]
    pub noise: NoiseSpec,
    pub players: Vec<PlayerConfig>,
    #[serde(default)]
    pub opponents: Option<OpponentSpec>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_radius")]
    pub benchmark_radius: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
}

fn no_noise() -> NoiseSpec {
    NoiseSpec::NONE
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Structural checks that do not need the game to be built.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.benchmark_radius >= 0.0 && self.benchmark_radius.is_finite()) {
            return Err(Error::Config("benchmark_radius must be finite and non-negative".into()));
        }
        self.noise.validate()?;
        for p in &self.players {
            p.schedule.validate()?;
        }
        if let Some(o) = &self.opponents {
            if !(o.amplitude >= 0.0 && o.amplitude.is_finite()) {
                return Err(Error::Config(
                    "opponent amplitude must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    /// A configuration for `players.len()` learners on the default scalar game.
    pub fn scalar_bilinear(players: Vec<PlayerConfig>, noise: NoiseSpec, horizon: usize, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            game: GameConfig::default(),
            noise,
            players,
            opponents: None,
            horizon,
            seeds,
            benchmark_radius: default_radius(),
            output_dir: default_output_dir(),
            checks: Vec::new(),
        }
    }
}
