//! Conditional-to-marginal density deviations between index clusters.
//!
//! The measured quantity is `sup |f_{I|J} / f_I - 1|` over the grid tensor
//! product. The ratio collapses to a function of at most four spacing
//! coordinates (first/last member of each cluster); everything in between
//! cancels. The deviation itself is assembled from sub-Perron eigenmode
//! sums so that values far below machine epsilon relative to the densities
//! still carry full relative precision.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, TransferKernel};
use crate::model::ModelParams;
use crate::quad::QuadratureGrid;
use crate::stats::linear_fit;

/// Per-axis node count for the 8-dimensional contraction integral.
pub const REDUCED_GRID_SIZE: usize = 12;

/// Cost guard for the 8-dimensional integral.
pub const MAX_CONTRACTION_R: usize = 6;

#[derive(Debug, Error)]
pub enum DecayError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("cluster sizes {i_len}, {j_len} outside the supported range 1..=2")]
    ClusterSize { i_len: usize, j_len: usize },
    #[error("separation r = {r} does not fit: need i_len + j_len + r < n = {n}")]
    SeparationTooLarge { r: usize, n: usize },
    #[error("need at least 4 measurements, got {0}")]
    TooFewMeasurements(usize),
    #[error("measurements do not share (params, n, i_len, j_len) or r not increasing")]
    InconsistentMeasurements,
    #[error("sup_ratio {0} not positive: no exponential fit in the factorized regime")]
    NonpositiveRatio(f64),
    #[error("contraction power r = {0} outside 1..={MAX_CONTRACTION_R}")]
    ContractionRange(usize),
}

/// One measured deviation record.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayMeasurement {
    pub params: ModelParams,
    pub n: usize,
    pub i_len: usize,
    pub j_len: usize,
    pub r: usize,
    pub sup_ratio: f64,
}

/// Fitted exponential envelope `c_hat * exp(-alpha_hat * r)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub r_range: (usize, usize),
    pub r_squared: f64,
}

/// Sup over the grid of `|f_{I|J}/f_I - 1|` with `I` starting at site 0 and
/// `J` starting at site `i_len + r` (placement is immaterial on the circle).
pub fn measure_ratio(
    kernel: &TransferKernel,
    n: usize,
    i_len: usize,
    j_len: usize,
    r: usize,
) -> Result<DecayMeasurement, DecayError> {
    let (sup_ratio, _) = ratio_deviation_sup(kernel, n, i_len, j_len, r)?;
    Ok(DecayMeasurement {
        params: kernel.params(),
        n,
        i_len,
        j_len,
        r,
        sup_ratio,
    })
}

/// The deviation `f_{I|J}/f_I - 1` as a function of the four boundary
/// coordinates `(y_1, y_{p1}, y_{J first}, y_{J last})`, Perron part
/// cancelled symbolically.
pub struct RatioDeviation {
    i_len: usize,
    j_len: usize,
    eps_z: f64,
    u1: nalgebra::DVector<f64>,
    e_r: DMatrix<f64>,
    e_back: DMatrix<f64>,
    e_den_i: DMatrix<f64>,
    e_den_j: DMatrix<f64>,
}

impl RatioDeviation {
    pub fn new(
        kernel: &TransferKernel,
        n: usize,
        i_len: usize,
        j_len: usize,
        r: usize,
    ) -> Result<Self, DecayError> {
        if !(1..=2).contains(&i_len) || !(1..=2).contains(&j_len) {
            return Err(DecayError::ClusterSize { i_len, j_len });
        }
        if i_len + j_len + r >= n {
            return Err(DecayError::SeparationTooLarge { r, n });
        }
        let r_back = n - i_len - j_len - r;
        Ok(RatioDeviation {
            i_len,
            j_len,
            eps_z: kernel.trace_tail(n),
            u1: kernel.perron_reg_vector(),
            e_r: kernel.reg_t_hat_tail(r),
            e_back: kernel.reg_t_hat_tail(r_back),
            e_den_i: kernel.reg_t_hat_tail(n - i_len),
            e_den_j: kernel.reg_t_hat_tail(n - j_len),
        })
    }

    /// Deviation at grid indices `a = y_1`, `b = y_{p1}`, `c = y_{J first}`,
    /// `d = y_{J last}` (singleton clusters tie their pair).
    pub fn value(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let zs = 1.0 + self.eps_z;
        let (u1a, u1b, u1c, u1d) = (self.u1[a], self.u1[b], self.u1[c], self.u1[d]);
        let e_i = self.e_den_i[(b, a)];
        let e_j = self.e_den_j[(d, c)];
        let er_bc = self.e_r[(b, c)];
        let prod4 = (u1a * u1b) * (u1c * u1d);
        let num = self.eps_z * prod4
            + zs * (u1b * u1c * self.e_back[(d, a)] + u1d * u1a * er_bc
                + er_bc * self.e_back[(d, a)])
            - (u1b * u1a * e_j + u1d * u1c * e_i + e_i * e_j);
        let den = (u1b * u1a + e_i) * (u1d * u1c + e_j);
        num / den
    }

    /// Sup of `|value|` over the grid with its attaining indices.
    pub fn sup(&self) -> (f64, [usize; 4]) {
        let m = self.u1.len();
        let mut sup = 0.0f64;
        let mut arg = [0usize; 4];
        for b in 0..m {
            for a in 0..m {
                if self.i_len == 1 && a != b {
                    continue;
                }
                for c in 0..m {
                    for d in 0..m {
                        if self.j_len == 1 && d != c {
                            continue;
                        }
                        let g = self.value(a, b, c, d).abs();
                        if g > sup {
                            sup = g;
                            arg = [a, b, c, d];
                        }
                    }
                }
            }
        }
        (sup, arg)
    }
}

/// As [`measure_ratio`], also reporting the grid indices
/// `(y_1, y_{p1}, y_{J first}, y_{J last})` attaining the sup.
pub fn ratio_deviation_sup(
    kernel: &TransferKernel,
    n: usize,
    i_len: usize,
    j_len: usize,
    r: usize,
) -> Result<(f64, [usize; 4]), DecayError> {
    Ok(RatioDeviation::new(kernel, n, i_len, j_len, r)?.sup())
}

/// Least-squares exponential fit of `log sup_ratio` against `r`.
pub fn fit_decay(measurements: &[DecayMeasurement]) -> Result<DecayFit, DecayError> {
    if measurements.len() < 4 {
        return Err(DecayError::TooFewMeasurements(measurements.len()));
    }
    let head = &measurements[0];
    for pair in measurements.windows(2) {
        let consistent = pair[1].params == head.params
            && pair[1].n == head.n
            && pair[1].i_len == head.i_len
            && pair[1].j_len == head.j_len
            && pair[1].r > pair[0].r;
        if !consistent {
            return Err(DecayError::InconsistentMeasurements);
        }
    }
    let mut xs = Vec::with_capacity(measurements.len());
    let mut ys = Vec::with_capacity(measurements.len());
    for mm in measurements {
        if !(mm.sup_ratio > 0.0) {
            return Err(DecayError::NonpositiveRatio(mm.sup_ratio));
        }
        xs.push(mm.r as f64);
        ys.push(mm.sup_ratio.ln());
    }
    let fit = linear_fit(&xs, &ys);
    Ok(DecayFit {
        alpha_hat: -fit.slope,
        c_hat: fit.intercept.exp(),
        r_range: (measurements[0].r, measurements[measurements.len() - 1].r),
        r_squared: fit.r_squared,
    })
}

/// One point of the eight-dimensional contraction check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeltaContraction {
    pub r: usize,
    /// Quadrature value of the weighted absolute integral of the
    /// four-factor antisymmetrized product.
    pub lhs: f64,
    /// Eighth power of the weighted two-point integral at half the power.
    pub rhs_shape: f64,
}

impl DeltaContraction {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs_shape
    }
}

/// Tabulated integrand pieces on the reduced grid.
pub struct DeltaIntegrand {
    t_matrix: DMatrix<f64>,
    /// `w_a * exp(-beta / (2 x_a))` per axis.
    phi: Vec<f64>,
    reduced: TransferKernel,
    r: usize,
}

impl DeltaIntegrand {
    pub fn new(params: ModelParams, r: usize, m8: usize) -> Result<Self, DecayError> {
        let grid = QuadratureGrid::gauss_legendre(m8).map_err(KernelError::from)?;
        let reduced = TransferKernel::new(params, grid)?;
        let m = reduced.m();
        let mut t_matrix = DMatrix::<f64>::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                t_matrix[(a, b)] = reduced.t_power(r as i64, a, b)?;
            }
        }
        let phi = reduced
            .grid()
            .nodes()
            .iter()
            .zip(reduced.grid().weights())
            .map(|(&x, &w)| w * (-params.beta / (2.0 * x)).exp())
            .collect();
        Ok(DeltaIntegrand {
            t_matrix,
            phi,
            reduced,
            r,
        })
    }

    pub fn reduced_kernel(&self) -> &TransferKernel {
        &self.reduced
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `Delta^r` at the grid multi-index `z`.
    pub fn value(&self, z: [usize; 8]) -> f64 {
        let t = &self.t_matrix;
        t[(z[0], z[1])] * t[(z[2], z[3])] * t[(z[4], z[5])] * t[(z[6], z[7])]
            - t[(z[0], z[3])] * t[(z[2], z[1])] * t[(z[4], z[7])] * t[(z[6], z[5])]
    }

    /// `Delta^r` at arbitrary points, via the Nystrom extension.
    pub fn value_at(&self, z: [f64; 8]) -> f64 {
        let r = self.r as i64;
        let t = |x: f64, y: f64| self.reduced.t_power_at(r, x, y);
        t(z[0], z[1]) * t(z[2], z[3]) * t(z[4], z[5]) * t(z[6], z[7])
            - t(z[0], z[3]) * t(z[2], z[1]) * t(z[4], z[7]) * t(z[6], z[5])
    }

    /// `int e^{-sum beta/(2 z_i)} |Delta^r(z)| dz` over the unit 8-cube.
    ///
    /// Factorized as a double sum over two 4-index blocks: `Delta` splits as
    /// `A(z_1..z_4) B(z_5..z_8) - A'(z_1..z_4) B'(z_5..z_8)`.
    pub fn weighted_abs_integral(&self) -> f64 {
        let m = self.phi.len();
        let block = m * m * m * m;
        let t = &self.t_matrix;
        let mut a_prod = vec![0.0; block];
        let mut a_swap = vec![0.0; block];
        let mut weight = vec![0.0; block];
        let mut flat = 0;
        for i1 in 0..m {
            for i2 in 0..m {
                for i3 in 0..m {
                    for i4 in 0..m {
                        a_prod[flat] = t[(i1, i2)] * t[(i3, i4)];
                        a_swap[flat] = t[(i1, i4)] * t[(i3, i2)];
                        weight[flat] = self.phi[i1] * self.phi[i2] * self.phi[i3] * self.phi[i4];
                        flat += 1;
                    }
                }
            }
        }
        // ordered chunk reduction keeps the result independent of thread count
        let partials: Vec<f64> = (0..m * m)
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * m * m;
                let hi = lo + m * m;
                let mut acc = 0.0;
                for p in lo..hi {
                    let (ap, asw, wp) = (a_prod[p], a_swap[p], weight[p]);
                    let mut inner = 0.0;
                    for q in 0..block {
                        inner += weight[q] * (ap * a_prod[q] - asw * a_swap[q]).abs();
                    }
                    acc += wp * inner;
                }
                acc
            })
            .collect();
        partials.iter().sum()
    }

    /// `( int e^{-beta/(2u)} T^{floor(r/2)}(u, v) e^{-beta/(2v)} du dv )^8`.
    pub fn envelope_integral(&self) -> Result<f64, DecayError> {
        let m = self.phi.len();
        let half = (self.r / 2) as i64;
        let mut two_point = 0.0;
        for a in 0..m {
            for b in 0..m {
                two_point += self.phi[a] * self.reduced.t_power(half, a, b)? * self.phi[b];
            }
        }
        Ok(two_point.powi(8))
    }
}

/// Contraction check at a single power `r` on the reduced grid.
pub fn delta_contraction_check(
    kernel: &TransferKernel,
    r: usize,
) -> Result<DeltaContraction, DecayError> {
    if r == 0 || r > MAX_CONTRACTION_R {
        return Err(DecayError::ContractionRange(r));
    }
    let integrand = DeltaIntegrand::new(kernel.params(), r, REDUCED_GRID_SIZE)?;
    Ok(DeltaContraction {
        r,
        lhs: integrand.weighted_abs_integral(),
        rhs_shape: integrand.envelope_integral()?,
    })
}

/// Contraction check over several powers; the flag reports whether
/// `lhs / rhs_shape` decreases along the given sequence.
pub fn delta_contraction_sweep(
    kernel: &TransferKernel,
    rs: &[usize],
) -> Result<(Vec<DeltaContraction>, bool), DecayError> {
    let points: Vec<DeltaContraction> = rs
        .iter()
        .map(|&r| delta_contraction_check(kernel, r))
        .collect::<Result<_, _>>()?;
    let decreasing = points.windows(2).all(|p| p[1].ratio() < p[0].ratio());
    Ok((points, decreasing))
}
