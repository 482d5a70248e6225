//! Model parameters, chain states and index-cluster geometry.
//!
//! Index convention: all site indices in this crate are 0-based and circular,
//! so site `i` has neighbours `(i + n - 1) % n` and `(i + 1) % n`. (Written
//! material on this model usually numbers sites from 1; subtract one.)

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("beta must be strictly positive, got {0}")]
    InvalidBeta(f64),
    #[error("gamma must be nonnegative, got {0}")]
    InvalidGamma(f64),
    #[error("spacing out of (0, 1]: y[{index}] = {value}")]
    InvalidSpacing { index: usize, value: f64 },
    #[error("chain length must be at least 3, got {0}")]
    ChainTooShort(usize),
    #[error("cluster length {len} out of 1..={n}")]
    InvalidCluster { len: usize, n: usize },
    #[error("clusters overlap or live on different circles")]
    ClusterMismatch,
}

/// Interaction strengths: `beta` couples nearest-neighbour spacings,
/// `gamma` next-to-nearest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self, ModelError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(ModelError::InvalidBeta(beta));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(ModelError::InvalidGamma(gamma));
        }
        Ok(ModelParams { beta, gamma })
    }
}

/// One spacing configuration `y` in `(0, 1]^n`, `n >= 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    spacings: Vec<f64>,
}

impl ChainState {
    pub fn new(spacings: Vec<f64>) -> Result<Self, ModelError> {
        if spacings.len() < 3 {
            return Err(ModelError::ChainTooShort(spacings.len()));
        }
        for (index, &value) in spacings.iter().enumerate() {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ModelError::InvalidSpacing { index, value });
            }
        }
        Ok(ChainState { spacings })
    }

    pub fn n(&self) -> usize {
        self.spacings.len()
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Circular access: any `i` is reduced modulo `n`.
    pub fn get(&self, i: usize) -> f64 {
        self.spacings[i % self.spacings.len()]
    }

    pub(crate) fn spacings_mut(&mut self) -> &mut [f64] {
        &mut self.spacings
    }

    pub fn total(&self) -> f64 {
        self.spacings.iter().sum()
    }
}

/// A set of consecutive circular indices `{start, start+1, ..., start+len-1} mod n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexCluster {
    pub start: usize,
    pub len: usize,
    pub n: usize,
}

impl IndexCluster {
    pub fn new(start: usize, len: usize, n: usize) -> Result<Self, ModelError> {
        if len == 0 || len > n {
            return Err(ModelError::InvalidCluster { len, n });
        }
        Ok(IndexCluster {
            start: start % n,
            len,
            n,
        })
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).map(move |k| (self.start + k) % self.n)
    }

    pub fn contains(&self, i: usize) -> bool {
        let offset = (i % self.n + self.n - self.start) % self.n;
        offset < self.len
    }

    /// Forward circular gap from the end of `self` to the start of `other`.
    pub fn gap_to(&self, other: &IndexCluster) -> usize {
        (other.start + self.n - (self.start + self.len)) % self.n
    }

    pub fn is_disjoint_from(&self, other: &IndexCluster) -> bool {
        if self.n != other.n {
            return false;
        }
        let d_fwd = (other.start + self.n - self.start) % self.n;
        let d_bwd = (self.start + self.n - other.start) % self.n;
        d_fwd >= self.len && d_bwd >= other.len
    }
}

/// Two-point kernel factor `Q(x, y) = exp(-beta/(2x) - beta/(2y) - gamma/(x+y))`.
///
/// The circular product of `Q` over consecutive spacing pairs reproduces
/// `exp(-H)`: each spacing collects `beta/(2y)` from its two incident factors.
pub fn q_eval(params: ModelParams, x: f64, y: f64) -> Result<f64, ModelError> {
    if !(x > 0.0) {
        return Err(ModelError::InvalidSpacing { index: 0, value: x });
    }
    if !(y > 0.0) {
        return Err(ModelError::InvalidSpacing { index: 1, value: y });
    }
    Ok((-params.beta / (2.0 * x) - params.beta / (2.0 * y) - params.gamma / (x + y)).exp())
}

/// Circular interaction energy `H = sum_i beta/y_i + gamma/(y_i + y_{i+1})`.
pub fn circular_energy(params: ModelParams, state: &ChainState) -> f64 {
    let y = state.spacings();
    let n = y.len();
    let mut h = 0.0;
    for i in 0..n {
        h += params.beta / y[i] + params.gamma / (y[i] + y[(i + 1) % n]);
    }
    h
}

/// Single-site pieces of the energy that involve spacing `y`, given its two
/// circular neighbours. Unnormalized log conditional density of one spacing.
pub fn full_conditional_log_density(
    params: ModelParams,
    y_prev: f64,
    y_next: f64,
    y: f64,
) -> Result<f64, ModelError> {
    for (index, v) in [y_prev, y_next, y].into_iter().enumerate() {
        if !(v > 0.0) {
            return Err(ModelError::InvalidSpacing { index, value: v });
        }
    }
    Ok(-params.beta / y - params.gamma / (y_prev + y) - params.gamma / (y + y_next))
}

/// Cluster distance `r(I, J)`: the smaller of the two circular runs of
/// indices separating the disjoint clusters.
pub fn cluster_distance(i_cluster: &IndexCluster, j_cluster: &IndexCluster) -> Result<usize, ModelError> {
    if i_cluster.n != j_cluster.n || !i_cluster.is_disjoint_from(j_cluster) {
        return Err(ModelError::ClusterMismatch);
    }
    let gap_fwd = i_cluster.gap_to(j_cluster);
    let gap_bwd = j_cluster.gap_to(i_cluster);
    debug_assert_eq!(gap_fwd + gap_bwd, i_cluster.n - i_cluster.len - j_cluster.len);
    Ok(gap_fwd.min(gap_bwd))
}
