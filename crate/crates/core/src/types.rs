//! Shared numeric vocabulary: per-player vectors, joint profiles, weighted
//! norms and the seeded random stream every stochastic component draws from.

use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real vector owned by one player (an action, a gradient, a noise draw).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerVector(Vec<f64>);

impl PlayerVector {
    pub fn new(values: Vec<f64>) -> Self {
        PlayerVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        PlayerVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Inner product; panics if the dimensions differ.
    pub fn dot(&self, other: &PlayerVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot of vectors with different dimensions");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `self - other`.
    pub fn sub(&self, other: &PlayerVector) -> PlayerVector {
        assert_eq!(
            self.dim(),
            other.dim(),
            "difference of vectors with different dimensions"
        );
        PlayerVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + other`.
    pub fn add(&self, other: &PlayerVector) -> PlayerVector {
        assert_eq!(self.dim(), other.dim(), "sum of vectors with different dimensions");
        PlayerVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, c: f64) -> PlayerVector {
        PlayerVector(self.0.iter().map(|v| c * v).collect())
    }

    /// `self + c * other`, the usual axpy.
    pub fn add_scaled(&self, c: f64, other: &PlayerVector) -> PlayerVector {
        assert_eq!(self.dim(), other.dim(), "axpy of vectors with different dimensions");
        PlayerVector(self.0.iter().zip(&other.0).map(|(a, b)| a + c * b).collect())
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &PlayerVector) {
        assert_eq!(self.dim(), other.dim(), "axpy of vectors with different dimensions");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn dist_sq(&self, other: &PlayerVector) -> f64 {
        assert_eq!(
            self.dim(),
            other.dim(),
            "distance between vectors with different dimensions"
        );
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

impl From<Vec<f64>> for PlayerVector {
    fn from(values: Vec<f64>) -> Self {
        PlayerVector(values)
    }
}

impl Index<usize> for PlayerVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for PlayerVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// An action profile: one [`PlayerVector`] per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAction(Vec<PlayerVector>);

impl JointAction {
    pub fn new(per_player: Vec<PlayerVector>) -> Self {
        JointAction(per_player)
    }

    pub fn from_nested(values: Vec<Vec<f64>>) -> Self {
        JointAction(values.into_iter().map(PlayerVector::new).collect())
    }

    pub fn zeros(dims: &[usize]) -> Self {
        JointAction(dims.iter().map(|&d| PlayerVector::zeros(d)).collect())
    }

    pub fn players(&self) -> usize {
        self.0.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.0.iter().map(PlayerVector::dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.0.iter().map(PlayerVector::dim).sum()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PlayerVector> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[PlayerVector] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<PlayerVector> {
        self.0
    }

    /// Concatenation of all players' coordinates.
    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flat_map(|v| v.iter().copied()).collect()
    }

    /// Inverse of [`flatten`](Self::flatten) for the given per-player dimensions.
    pub fn unflatten(flat: &[f64], dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if flat.len() != total {
            return Err(Error::Dimension {
                context: "unflatten",
                expected: total,
                got: flat.len(),
            });
        }
        let mut out = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &d in dims {
            out.push(PlayerVector::new(flat[offset..offset + d].to_vec()));
            offset += d;
        }
        Ok(JointAction(out))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(PlayerVector::is_finite)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(PlayerVector::norm_sq).sum()
    }

    /// Checks that `other` has the same player count and per-player dimensions.
    pub fn check_shape(&self, other: &JointAction, context: &'static str) -> Result<()> {
        if self.players() != other.players() {
            return Err(Error::Dimension {
                context,
                expected: self.players(),
                got: other.players(),
            });
        }
        for (a, b) in self.0.iter().zip(&other.0) {
            if a.dim() != b.dim() {
                return Err(Error::Dimension {
                    context,
                    expected: a.dim(),
                    got: b.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &JointAction) -> Result<JointAction> {
        self.check_shape(other, "joint difference")?;
        Ok(JointAction(
            self.0.iter().zip(&other.0).map(|(a, b)| a.sub(b)).collect(),
        ))
    }

    pub fn scaled(&self, c: f64) -> JointAction {
        JointAction(self.0.iter().map(|v| v.scaled(c)).collect())
    }

    /// Joint inner product `Σ_i ⟨x_i, y_i⟩`.
    pub fn dot(&self, other: &JointAction) -> Result<f64> {
        self.check_shape(other, "joint inner product")?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a.dot(b)).sum())
    }
}

impl Index<usize> for JointAction {
    type Output = PlayerVector;
    fn index(&self, i: usize) -> &PlayerVector {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointAction {
    fn index_mut(&mut self, i: usize) -> &mut PlayerVector {
        &mut self.0[i]
    }
}

/// Non-negative per-player weights defining `‖x‖_w² = Σ_i w_i ‖x_i‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        Ok(WeightVector(weights))
    }

    pub fn unit(players: usize) -> Self {
        WeightVector(vec![1.0; players])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `Σ_i w_i ‖x_i‖²`.
pub fn weighted_norm_sq(x: &JointAction, w: &WeightVector) -> Result<f64> {
    if x.players() != w.len() {
        return Err(Error::Dimension {
            context: "weighted norm",
            expected: w.len(),
            got: x.players(),
        });
    }
    Ok(x.iter().zip(w.as_slice()).map(|(xi, wi)| wi * xi.norm_sq()).sum())
}

/// `(‖w‖₁, ‖w‖_∞)`.
pub fn l1_and_linf(w: &WeightVector) -> (f64, f64) {
    let l1 = w.as_slice().iter().sum();
    let linf = w.as_slice().iter().copied().fold(0.0, f64::max);
    (l1, linf)
}

/// A seeded ChaCha8 stream. Identical `(seed, stream_id)` pairs yield identical
/// draw sequences on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform point in the closed ball of the given radius in `dim` dimensions.
    pub fn uniform_in_ball(&mut self, dim: usize, radius: f64) -> Vec<f64> {
        let mut dir: Vec<f64> = (0..dim).map(|_| self.standard_normal()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = radius * self.uniform().powf(1.0 / dim as f64);
        if norm > 0.0 {
            for v in &mut dir {
                *v *= r / norm;
            }
        }
        dir
    }
}

/// `dim` i.i.d. `N(0, std²)` coordinates. `std = 0` returns exact zeros without
/// consuming randomness.
pub fn gaussian_vector(rng: &mut RngStream, dim: usize, std: f64) -> Result<PlayerVector> {
    if dim == 0 {
        return Err(Error::Dimension {
            context: "gaussian vector",
            expected: 1,
            got: 0,
        });
    }
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::Config(format!(
            "standard deviation must be finite and >= 0, got {std}"
        )));
    }
    if std == 0.0 {
        return Ok(PlayerVector::zeros(dim));
    }
    Ok(PlayerVector::new(
        (0..dim).map(|_| std * rng.standard_normal()).collect(),
    ))
}
