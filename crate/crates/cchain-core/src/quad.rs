//! Gauss-Legendre quadrature on `[0, 1]`.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

/// Grids coarser than this cannot support any of the downstream checks.
pub const MIN_GRID_SIZE: usize = 8;

/// Default node count used by the exact-computation layer.
pub const DEFAULT_GRID_SIZE: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("grid size {0} below minimum {MIN_GRID_SIZE}")]
    TooCoarse(usize),
}

/// Gauss-Legendre nodes and weights on the open interval `(0, 1)`.
///
/// Weights sum to one; polynomials of degree `2m - 1` integrate exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the
    /// Legendre recurrence, weights come from first eigenvector components.
    pub fn gauss_legendre(m: usize) -> Result<Self, QuadError> {
        if m < MIN_GRID_SIZE {
            return Err(QuadError::TooCoarse(m));
        }
        let mut jacobi = DMatrix::<f64>::zeros(m, m);
        for i in 1..m {
            let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
            jacobi[(i, i - 1)] = b;
            jacobi[(i - 1, i)] = b;
        }
        let eigen = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let v0 = eigen.eigenvectors[(0, k)];
                // on [-1,1] the weight is 2 v0^2; halve when mapping to [0,1]
                (0.5 * (eigen.eigenvalues[k] + 1.0), v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(QuadratureGrid {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
