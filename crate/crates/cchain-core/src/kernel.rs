//! Discretized transfer operator for the circular chain.
//!
//! The two-point factor `Q` is sampled on a Gauss-Legendre grid and
//! symmetrized with the quadrature weights, `S = W^{1/2} K W^{1/2}`. Every
//! exact finite-`n` quantity (partition function, cluster densities, moments)
//! is a function of the eigendecomposition `S = V diag(lambda) V^T`.
//!
//! Numerical backbone: `Q(x, y)` carries the boundary factors
//! `exp(-beta/(2x)) exp(-beta/(2y))`, which underflow to zero near the grid
//! edge. All density *ratios* therefore work with regularized quantities in
//! which those factors are cancelled analytically, namely
//! `R^s(x, y) = T^s(x, y) exp(+beta/(2x) + beta/(2y))` expanded over
//! regularized eigenvectors `u_c(x) = phi_c(x) exp(+beta/(2x))`. The `u_c`
//! come out of the eigen relation itself, so no large exponentials are ever
//! formed. Quantities that decay below machine epsilon relative to their
//! natural scale (lagged covariances, conditional-vs-marginal deviations)
//! are additionally computed in deviation form: the Perron contribution is
//! cancelled symbolically and only sub-leading eigenmode sums remain.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{IndexCluster, ModelError, ModelParams};
use crate::quad::{QuadError, QuadratureGrid};

/// Modes with `|lambda_c| <= lambda_1 * REG_CLAMP` are dropped from the
/// regularized expansions; their weight in any `R^s`, `s >= 1`, is below
/// `REG_CLAMP^2` and their regularized vectors are pure rounding noise.
const REG_CLAMP: f64 = 1e-14;

/// Largest cluster for which joint densities are stored on the tensor grid.
pub const MAX_CLUSTER_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("Perron eigenvalue not positive and simple (lambda1 = {lambda1}, |lambda2| = {lambda2_abs})")]
    NoSpectralGap { lambda1: f64, lambda2_abs: f64 },
    #[error("spectral gap below 1e-13: |lambda2|/lambda1 = {ratio}")]
    DegenerateGap { ratio: f64 },
    #[error("chain length {n} too short (need n >= {min})")]
    ChainTooShort { n: usize, min: usize },
    #[error("cluster length {len} exceeds tensor storage bound {MAX_CLUSTER_LEN}")]
    ClusterTooLarge { len: usize },
    #[error("clusters must be disjoint on a common circle")]
    ClusterMismatch,
    #[error("power {0} below the r = -1 convention")]
    InvalidPower(i64),
    #[error("sigma_n^2 = {value} not positive; grid resolution insufficient")]
    NonpositiveSigma { value: f64 },
    #[error("grid index {index} out of range for m = {m}")]
    IndexOutOfRange { index: usize, m: usize },
}

/// Weighted kernel matrix plus its spectral data.
pub struct TransferKernel {
    params: ModelParams,
    grid: QuadratureGrid,
    kernel: DMatrix<f64>,
    /// Descending eigenvalues of `S`; index 0 is the Perron root.
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors of `S`, columns matching `eigenvalues`.
    eigenvectors: DMatrix<f64>,
    /// Regularized eigenvectors `u_c[a] = v_c[a] e^{+beta/(2 x_a)} / sqrt(w_a)`,
    /// zero columns for clamped modes.
    reg_vectors: DMatrix<f64>,
    /// `exp(-gamma / (x_a + x_b))`, the regularized kernel `Q e^{+...}`.
    gamma_factor: DMatrix<f64>,
    /// Indices (into the value-sorted spectrum) of the modes above the
    /// clamp threshold. Negative eigenvalues sort to the tail, so the live
    /// set is not contiguous; index 0 (Perron) is always first.
    live: Vec<usize>,
}

impl TransferKernel {
    pub fn new(params: ModelParams, grid: QuadratureGrid) -> Result<Self, KernelError> {
        let m = grid.len();
        let nodes = grid.nodes();
        let weights = grid.weights();

        let mut kernel = DMatrix::<f64>::zeros(m, m);
        let mut gamma_factor = DMatrix::<f64>::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                gamma_factor[(a, b)] = (-params.gamma / (nodes[a] + nodes[b])).exp();
                kernel[(a, b)] = (-params.beta / (2.0 * nodes[a])
                    - params.beta / (2.0 * nodes[b])
                    - params.gamma / (nodes[a] + nodes[b]))
                    .exp();
            }
        }

        let mut symmetrized = kernel.clone();
        for a in 0..m {
            for b in 0..m {
                symmetrized[(a, b)] *= (weights[a] * weights[b]).sqrt();
            }
        }
        let eigen = SymmetricEigen::new(symmetrized);

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eigen.eigenvalues[j].total_cmp(&eigen.eigenvalues[i]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eigen.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::<f64>::zeros(m, m);
        for (c, &k) in order.iter().enumerate() {
            eigenvectors.set_column(c, &eigen.eigenvectors.column(k));
        }

        let lambda1 = eigenvalues[0];
        let lambda2_abs = eigenvalues[1..]
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()));
        if !(lambda1 > 0.0) || lambda1 <= lambda2_abs {
            return Err(KernelError::NoSpectralGap { lambda1, lambda2_abs });
        }

        // u_c = (1/lambda_c) G (base .* v_c), base[b] = sqrt(w_b) e^{-beta/(2 x_b)}
        let base = DVector::from_iterator(
            m,
            (0..m).map(|b| weights[b].sqrt() * (-params.beta / (2.0 * nodes[b])).exp()),
        );
        let mut reg_vectors = DMatrix::<f64>::zeros(m, m);
        let mut live = Vec::new();
        for c in 0..m {
            if eigenvalues[c].abs() > lambda1 * REG_CLAMP {
                let scaled = eigenvectors.column(c).component_mul(&base);
                let u = (&gamma_factor * scaled) / eigenvalues[c];
                reg_vectors.set_column(c, &u);
                live.push(c);
            }
        }
        live.sort_by(|&a, &b| eigenvalues[b].abs().total_cmp(&eigenvalues[a].abs()));

        Ok(TransferKernel {
            params,
            grid,
            kernel,
            eigenvalues,
            eigenvectors,
            reg_vectors,
            gamma_factor,
            live,
        })
    }

    pub fn with_default_grid(params: ModelParams) -> Result<Self, KernelError> {
        Self::new(params, QuadratureGrid::gauss_legendre(crate::quad::DEFAULT_GRID_SIZE)?)
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.grid.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn live_modes(&self) -> usize {
        self.live.len()
    }

    /// `|lambda_2| / lambda_1` with `lambda_2` the subleading eigenvalue by
    /// absolute value.
    pub fn spectral_ratio(&self) -> f64 {
        let l2 = self.eigenvalues[1..]
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()));
        l2 / self.eigenvalues[0]
    }

    fn rho(&self, c: usize) -> f64 {
        self.eigenvalues[c] / self.eigenvalues[0]
    }

    /// Tail of the normalized trace: `sum_{c >= 2} rho_c^n`.
    pub(crate) fn trace_tail(&self, n: usize) -> f64 {
        (1..self.m())
            .map(|c| self.rho(c).powi(n as i32))
            .sum()
    }

    fn boundary_factor(&self, a: usize) -> f64 {
        (-self.params.beta / (2.0 * self.grid.nodes()[a])).exp()
    }

    /// Regularized normalized transfer matrix
    /// `Rhat_s[a, b] = T^s(x_a, x_b) e^{+beta/(2x_a) + beta/(2x_b)} / lambda_1^{s+1}`.
    pub(crate) fn reg_t_hat(&self, s: usize) -> DMatrix<f64> {
        if s == 0 {
            return &self.gamma_factor / self.eigenvalues[0];
        }
        self.mode_sum(s, false)
    }

    /// Same as [`Self::reg_t_hat`] with the Perron mode removed:
    /// `E_s = sum_{c >= 2} rho_c^{s+1} u_c u_c^T`.
    pub(crate) fn reg_t_hat_tail(&self, s: usize) -> DMatrix<f64> {
        if s == 0 {
            let u1 = self.reg_vectors.column(0);
            let mut e = &self.gamma_factor / self.eigenvalues[0];
            let m = self.m();
            for a in 0..m {
                for b in 0..m {
                    e[(a, b)] -= u1[a] * u1[b];
                }
            }
            return e;
        }
        self.mode_sum(s, true)
    }

    fn mode_sum(&self, s: usize, skip_perron: bool) -> DMatrix<f64> {
        let m = self.m();
        let modes: Vec<usize> = self
            .live
            .iter()
            .copied()
            .filter(|&c| !(skip_perron && c == 0))
            .collect();
        let mut scaled = DMatrix::<f64>::zeros(m, modes.len());
        let mut u_live = DMatrix::<f64>::zeros(m, modes.len());
        for (k, &c) in modes.iter().enumerate() {
            let w = self.rho(c).powi(s as i32 + 1);
            scaled.set_column(k, &(self.reg_vectors.column(c) * w));
            u_live.set_column(k, &self.reg_vectors.column(c));
        }
        &scaled * u_live.transpose()
    }

    pub(crate) fn perron_reg_vector(&self) -> DVector<f64> {
        self.reg_vectors.column(0).into_owned()
    }

    /// Quadrature approximation of `T^r(x_a, x_b)`, the `r`-fold chained
    /// integral of `Q`. `r = 0` is `Q` itself, `r = -1` the identity
    /// element of the chaining convention (constant one).
    pub fn t_power(&self, r: i64, a: usize, b: usize) -> Result<f64, KernelError> {
        let m = self.m();
        if a >= m {
            return Err(KernelError::IndexOutOfRange { index: a, m });
        }
        if b >= m {
            return Err(KernelError::IndexOutOfRange { index: b, m });
        }
        match r {
            i64::MIN..=-2 => Err(KernelError::InvalidPower(r)),
            -1 => Ok(1.0),
            0 => Ok(self.kernel[(a, b)]),
            _ => {
                let mut sum = 0.0;
                for &c in &self.live {
                    let u = self.reg_vectors.column(c);
                    sum += self.rho(c).powi(r as i32 + 1) * u[a] * u[b];
                }
                Ok(sum
                    * self.eigenvalues[0].powi(r as i32 + 1)
                    * self.boundary_factor(a)
                    * self.boundary_factor(b))
            }
        }
    }

    /// `Z_n = trace(S^n) = sum_c lambda_c^n`. Underflows to zero around
    /// `n ln(1/lambda_1) > 708`; see [`Self::log_partition_function`].
    pub fn partition_function(&self, n: usize) -> Result<f64, KernelError> {
        if n < 3 {
            return Err(KernelError::ChainTooShort { n, min: 3 });
        }
        Ok(self.eigenvalues[0].powi(n as i32) * (1.0 + self.trace_tail(n)))
    }

    pub fn log_partition_function(&self, n: usize) -> Result<f64, KernelError> {
        if n < 3 {
            return Err(KernelError::ChainTooShort { n, min: 3 });
        }
        Ok(n as f64 * self.eigenvalues[0].ln() + self.trace_tail(n).ln_1p())
    }

    /// Joint density of the spacings in `cluster` on the grid tensor product.
    pub fn marginal_density(
        &self,
        n: usize,
        cluster: IndexCluster,
    ) -> Result<ClusterDensity, KernelError> {
        let p = cluster.len;
        if p > MAX_CLUSTER_LEN {
            return Err(KernelError::ClusterTooLarge { len: p });
        }
        if n < p + 2 || cluster.n != n {
            return Err(KernelError::ChainTooShort { n, min: p + 2 });
        }
        let m = self.m();
        let zs = 1.0 + self.trace_tail(n);
        let rhat = self.reg_t_hat(n - p);
        let lam_scale = self.eigenvalues[0].powi(p as i32 - 1);

        let mut values = vec![0.0; m.pow(p as u32)];
        let mut idx = vec![0usize; p];
        for (flat, v) in values.iter_mut().enumerate() {
            unflatten(flat, m, &mut idx);
            let mut q_chain = 1.0;
            for i in 0..p - 1 {
                q_chain *= self.kernel[(idx[i], idx[i + 1])];
            }
            *v = q_chain
                * self.boundary_factor(idx[p - 1])
                * rhat[(idx[p - 1], idx[0])]
                * self.boundary_factor(idx[0])
                / (lam_scale * zs);
        }
        Ok(ClusterDensity {
            cluster,
            shape: vec![m; p],
            values,
        })
    }

    /// Density of the spacings in `i_cluster` conditioned on the spacings in
    /// `j_cluster` being fixed at the grid nodes indexed by `y_j`.
    pub fn conditional_density(
        &self,
        n: usize,
        i_cluster: IndexCluster,
        j_cluster: IndexCluster,
        y_j: &[usize],
    ) -> Result<ClusterDensity, KernelError> {
        let p1 = i_cluster.len;
        let p2 = j_cluster.len;
        if p1 > MAX_CLUSTER_LEN || p2 > MAX_CLUSTER_LEN {
            return Err(KernelError::ClusterTooLarge { len: p1.max(p2) });
        }
        if i_cluster.n != n || j_cluster.n != n || !i_cluster.is_disjoint_from(&j_cluster) {
            return Err(KernelError::ClusterMismatch);
        }
        if y_j.len() != p2 {
            return Err(KernelError::ClusterMismatch);
        }
        let m = self.m();
        for &c in y_j {
            if c >= m {
                return Err(KernelError::IndexOutOfRange { index: c, m });
            }
        }
        let r = i_cluster.gap_to(&j_cluster);
        let r_back = j_cluster.gap_to(&i_cluster);
        debug_assert_eq!(r + r_back, n - p1 - p2);

        let rhat_r = self.reg_t_hat(r);
        let rhat_back = self.reg_t_hat(r_back);
        let rhat_denom = self.reg_t_hat(n - p2);
        let j_first = y_j[0];
        let j_last = y_j[p2 - 1];
        // Q factors along J cancel between joint and J-marginal.
        let denom = rhat_denom[(j_last, j_first)] * self.eigenvalues[0].powi(p1 as i32 - 1);

        let mut values = vec![0.0; m.pow(p1 as u32)];
        let mut idx = vec![0usize; p1];
        for (flat, v) in values.iter_mut().enumerate() {
            unflatten(flat, m, &mut idx);
            let mut q_chain = 1.0;
            for i in 0..p1 - 1 {
                q_chain *= self.kernel[(idx[i], idx[i + 1])];
            }
            *v = q_chain
                * self.boundary_factor(idx[p1 - 1])
                * self.boundary_factor(idx[0])
                * rhat_r[(idx[p1 - 1], j_first)]
                * rhat_back[(j_last, idx[0])]
                / denom;
        }
        Ok(ClusterDensity {
            cluster: i_cluster,
            shape: vec![m; p1],
            values,
        })
    }

    /// Mean, variance and circular lag covariances of a single spacing.
    pub fn exact_moments(&self, n: usize) -> Result<ExactMoments, KernelError> {
        if n < 3 {
            return Err(KernelError::ChainTooShort { n, min: 3 });
        }
        let m = self.m();
        let nodes = self.grid.nodes();

        // X[c, d] = <v_c, diag(x) v_d>
        let v = &self.eigenvectors;
        let mut weighted = v.clone();
        for a in 0..m {
            for c in 0..m {
                weighted[(a, c)] *= nodes[a];
            }
        }
        let x_mat = v.transpose() * weighted;

        let tail: Vec<f64> = (0..m).map(|c| self.rho(c).powi(n as i32)).collect();
        let eps_z: f64 = tail[1..].iter().sum();
        let zs = 1.0 + eps_z;
        let mean_tail: f64 = (1..m).map(|c| tail[c] * x_mat[(c, c)]).sum();
        let x11 = x_mat[(0, 0)];
        let mean = (x11 + mean_tail) / zs;

        let second: f64 = (0..m)
            .map(|c| {
                let s: f64 = (0..m)
                    .map(|a| nodes[a] * nodes[a] * v[(a, c)] * v[(a, c)])
                    .sum();
                tail[c] * s
            })
            .sum();
        let variance = second / zs - mean * mean;

        // cov(r) in deviation form: the Perron x Perron block cancels
        // against mean^2 symbolically, leaving sub-leading sums only.
        let mut covs = Vec::with_capacity(n.saturating_sub(1));
        let mut pow_r = vec![0.0; m];
        let mut pow_nr = vec![0.0; m];
        for r in 1..n {
            for c in 0..m {
                pow_r[c] = self.rho(c).powi(r as i32);
                pow_nr[c] = self.rho(c).powi((n - r) as i32);
            }
            let mut sub = 0.0;
            for c in 0..m {
                for d in c..m {
                    if c == 0 && d == 0 {
                        continue;
                    }
                    let x2 = x_mat[(c, d)] * x_mat[(c, d)];
                    let mut wgt = pow_r[c] * pow_nr[d];
                    if d > c {
                        wgt += pow_nr[c] * pow_r[d];
                    }
                    sub += wgt * x2;
                }
            }
            let cov = (x11 * x11 * eps_z + sub * zs
                - 2.0 * x11 * mean_tail
                - mean_tail * mean_tail)
                / (zs * zs);
            covs.push(cov);
        }

        Ok(ExactMoments {
            n,
            mean,
            variance,
            covs,
        })
    }

    /// `sigma_n^2 = Var(sum Y_i) / n = Var(Y_1) + sum_{r=1}^{n-1} cov(r)`.
    pub fn sigma_n_squared(&self, n: usize) -> Result<f64, KernelError> {
        let moments = self.exact_moments(n)?;
        let value = moments.sigma_n_squared();
        if !(value > 0.0) {
            return Err(KernelError::NonpositiveSigma { value });
        }
        Ok(value)
    }

    /// Asymptotic exponential decay rate of lag correlations,
    /// `log(lambda_1 / |lambda_2|)`. Separable kernels (`gamma = 0`) have no
    /// subleading mass and report `+inf`.
    pub fn spectral_decay_rate(&self) -> Result<f64, KernelError> {
        let ratio = self.spectral_ratio();
        if ratio < 1e-10 {
            return Ok(f64::INFINITY);
        }
        if 1.0 - ratio < 1e-13 {
            return Err(KernelError::DegenerateGap { ratio });
        }
        Ok(-ratio.ln())
    }

    /// Regularized eigenfunction values `u_c(y)` at an arbitrary point,
    /// via the Nystrom extension; one entry per live mode.
    pub fn reg_eigenfunctions_at(&self, y: f64) -> Vec<f64> {
        let m = self.m();
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        let gvec: Vec<f64> = (0..m)
            .map(|b| {
                weights[b].sqrt()
                    * (-self.params.beta / (2.0 * nodes[b]) - self.params.gamma / (y + nodes[b]))
                        .exp()
            })
            .collect();
        self.live
            .iter()
            .map(|&c| {
                let mut dot = 0.0;
                for b in 0..m {
                    dot += gvec[b] * self.eigenvectors[(b, c)];
                }
                dot / self.eigenvalues[c]
            })
            .collect()
    }

    /// `T^r` at arbitrary points in `(0, 1]^2` (Nystrom extension).
    pub fn t_power_at(&self, r: i64, x: f64, y: f64) -> f64 {
        match r {
            i64::MIN..=-2 => f64::NAN,
            -1 => 1.0,
            0 => (-self.params.beta / (2.0 * x)
                - self.params.beta / (2.0 * y)
                - self.params.gamma / (x + y))
                .exp(),
            _ => {
                let ux = self.reg_eigenfunctions_at(x);
                let uy = self.reg_eigenfunctions_at(y);
                let mut sum = 0.0;
                for (k, &c) in self.live.iter().enumerate() {
                    sum += self.rho(c).powi(r as i32 + 1) * ux[k] * uy[k];
                }
                sum * self.eigenvalues[0].powi(r as i32 + 1)
                    * (-self.params.beta / (2.0 * x) - self.params.beta / (2.0 * y)).exp()
            }
        }
    }

    /// Single-site marginal density at an arbitrary point `y` via the
    /// Nystrom extension of the regularized eigenvectors.
    pub fn site_density(&self, n: usize, y: f64) -> Result<f64, KernelError> {
        if n < 3 {
            return Err(KernelError::ChainTooShort { n, min: 3 });
        }
        if y <= 0.0 {
            return Ok(0.0);
        }
        let u = self.reg_eigenfunctions_at(y);
        let mut sum = 0.0;
        for (k, &c) in self.live.iter().enumerate() {
            sum += self.rho(c).powi(n as i32) * u[k] * u[k];
        }
        Ok((-self.params.beta / y).exp() * sum / (1.0 + self.trace_tail(n)))
    }

    /// Tabulated CDF of the single-site marginal (composite Simpson panels).
    pub fn site_marginal_cdf(&self, n: usize, panels: usize) -> Result<SiteMarginalCdf, KernelError> {
        let panels = panels.max(16);
        let h = 1.0 / panels as f64;
        let mut cum = Vec::with_capacity(panels + 1);
        cum.push(0.0);
        let mut left = self.site_density(n, 0.0)?;
        for k in 0..panels {
            let mid = self.site_density(n, (k as f64 + 0.5) * h)?;
            let right = self.site_density(n, (k as f64 + 1.0) * h)?;
            let inc = h / 6.0 * (left + 4.0 * mid + right);
            cum.push(cum[k] + inc);
            left = right;
        }
        let total = *cum.last().unwrap();
        for c in cum.iter_mut() {
            *c /= total;
        }
        Ok(SiteMarginalCdf { cum })
    }
}

/// Strictly increasing piecewise-linear CDF table on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SiteMarginalCdf {
    cum: Vec<f64>,
}

impl SiteMarginalCdf {
    pub fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        let panels = self.cum.len() - 1;
        let t = y * panels as f64;
        let k = (t as usize).min(panels - 1);
        let frac = t - k as f64;
        self.cum[k] + frac * (self.cum[k + 1] - self.cum[k])
    }
}

/// Joint density values of one cluster on the grid tensor product,
/// row-major with the first cluster coordinate slowest.
#[derive(Debug, Clone)]
pub struct ClusterDensity {
    pub cluster: IndexCluster,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ClusterDensity {
    pub fn value(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.shape.len());
        let m = self.shape[0];
        let mut flat = 0;
        for &i in idx {
            flat = flat * m + i;
        }
        self.values[flat]
    }

    /// Quadrature integral over all cluster coordinates.
    pub fn integral(&self, grid: &QuadratureGrid) -> f64 {
        let m = grid.len();
        let w = grid.weights();
        let p = self.shape.len();
        let mut idx = vec![0usize; p];
        let mut total = 0.0;
        for (flat, v) in self.values.iter().enumerate() {
            unflatten(flat, m, &mut idx);
            let mut wp = 1.0;
            for &i in idx.iter() {
                wp *= w[i];
            }
            total += wp * v;
        }
        total
    }
}

/// Exact single-spacing moments at chain length `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactMoments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// `covs[r - 1] = cov(Y_1, Y_{1+r})` for `r = 1 .. n-1`.
    pub covs: Vec<f64>,
}

impl ExactMoments {
    pub fn cov(&self, r: usize) -> f64 {
        if r % self.n == 0 {
            self.variance
        } else {
            self.covs[(r % self.n) - 1]
        }
    }

    pub fn sigma_n_squared(&self) -> f64 {
        self.variance + self.covs.iter().sum::<f64>()
    }
}

fn unflatten(mut flat: usize, m: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % m;
        flat /= m;
    }
}
