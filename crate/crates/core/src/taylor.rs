//! Patient-specific intra-beat evolution prior.
//!
//! The per-sample increment of the clean signal is modelled as a truncated
//! Taylor series whose derivative coefficients depend on the intra-beat
//! index. Coefficients are fitted by weighted least squares over all warm-up
//! beats and a short window of neighbouring indices. Each neighbour's
//! increment is expanded around the anchor index, so offset `ℓ` uses the
//! basis row `φ_k(ℓ) = ((ℓ+1)^k − ℓ^k)·Δt^k / k!`, which is the plain
//! `(Δt, Δt²/2, …)` row at `ℓ = 0`.
//!
//! Indexing is zero-based throughout: `increments[t]` moves sample `t` to
//! sample `t + 1`, so the last grid index carries no increment.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::beat::HeartbeatTensor;
use crate::error::{HkfError, Result};

/// Relative ridge applied to the normal equations.
const RIDGE_SCALE: f64 = 1e-8;

/// Weighted window of intra-beat offsets `[-left, right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    left: usize,
    right: usize,
    weights: Vec<f64>,
}

impl WindowConfig {
    /// `weights[i]` belongs to offset `i as isize - left as isize`.
    pub fn new(left: usize, right: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != left + right + 1 {
            return Err(HkfError::InvalidParameter(format!(
                "window [-{left}, {right}] needs {} weights, got {}",
                left + right + 1,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HkfError::InvalidParameter("window weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(HkfError::InvalidParameter(format!(
                "window weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self {
            left,
            right,
            weights,
        })
    }

    pub fn uniform(left: usize, right: usize) -> Self {
        let n = left + right + 1;
        let mut weights = vec![1.0 / n as f64; n];
        // Push the rounding residue into the centre tap so the sum is exact.
        let residue = 1.0 - weights.iter().sum::<f64>();
        weights[left] += residue;
        Self {
            left,
            right,
            weights,
        }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Window length `left + right + 1`.
    pub fn span(&self) -> usize {
        self.left + self.right + 1
    }

    /// `(offset, weight)` pairs in increasing offset order.
    pub fn taps(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (i as isize - self.left as isize, w))
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self::uniform(0, 0)
    }
}

/// Expansion order `K` and grid step `Δt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorBasisConfig {
    order: usize,
    delta_t: f64,
}

impl TaylorBasisConfig {
    pub fn new(order: usize, delta_t: f64) -> Result<Self> {
        if order == 0 {
            return Err(HkfError::InvalidParameter("Taylor order must be at least 1".into()));
        }
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(HkfError::InvalidParameter(format!(
                "delta_t must be positive, got {delta_t}"
            )));
        }
        Ok(Self { order, delta_t })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }
}

/// Basis row for the increment at window offset `offset` from the anchor.
pub fn basis_row(offset: isize, basis: &TaylorBasisConfig) -> DVector<f64> {
    let l = offset as f64;
    let mut factorial = 1.0;
    DVector::from_iterator(
        basis.order,
        (1..=basis.order).map(|k| {
            factorial *= k as f64;
            let k = k as i32;
            ((l + 1.0).powi(k) - l.powi(k)) * basis.delta_t.powi(k) / factorial
        }),
    )
}

/// Fitted derivative coefficients per intra index and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPrior {
    /// `theta[t]` is `K × m`.
    theta: Vec<DMatrix<f64>>,
    basis: TaylorBasisConfig,
    /// `m × T`; column `t` is `φ(0)ᵀθ_t`.
    increments: DMatrix<f64>,
}

impl TaylorPrior {
    pub fn from_theta(theta: Vec<DMatrix<f64>>, basis: TaylorBasisConfig) -> Result<Self> {
        let first = theta
            .first()
            .ok_or_else(|| HkfError::Dimension("prior needs at least one intra index".into()))?;
        let m = first.ncols();
        if theta.iter().any(|th| th.shape() != (basis.order, m)) {
            return Err(HkfError::Dimension(format!(
                "every theta must be {}x{m}",
                basis.order
            )));
        }
        if theta.iter().any(|th| th.iter().any(|v| !v.is_finite())) {
            return Err(HkfError::Dimension("prior coefficients must be finite".into()));
        }
        let phi0 = basis_row(0, &basis);
        let mut increments = DMatrix::zeros(m, theta.len());
        for (t, th) in theta.iter().enumerate() {
            increments.set_column(t, &(th.transpose() * &phi0));
        }
        Ok(Self {
            theta,
            basis,
            increments,
        })
    }

    /// The prior with all coefficients zero: pure random-walk evolution.
    pub fn zeros(grid_len: usize, channels: usize, basis: TaylorBasisConfig) -> Self {
        Self::from_theta(vec![DMatrix::zeros(basis.order, channels); grid_len], basis)
            .expect("zero prior is valid")
    }

    pub fn theta(&self) -> &[DMatrix<f64>] {
        &self.theta
    }

    pub fn basis(&self) -> &TaylorBasisConfig {
        &self.basis
    }

    pub fn increments(&self) -> &DMatrix<f64> {
        &self.increments
    }

    pub fn grid_len(&self) -> usize {
        self.theta.len()
    }

    pub fn channels(&self) -> usize {
        self.increments.nrows()
    }

    /// Evolves the state at sample `t` to the prediction for sample `t + 1`.
    /// Valid for `t < T − 1`.
    pub fn evolution_apply(&self, x: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
        let transitions = self.grid_len().saturating_sub(1);
        if t >= transitions {
            return Err(HkfError::IndexOutOfRange {
                index: t,
                len: transitions,
            });
        }
        if x.len() != self.channels() {
            return Err(HkfError::Dimension(format!(
                "state has {} channels, prior has {}",
                x.len(),
                self.channels()
            )));
        }
        Ok(x + self.increments.column(t))
    }
}

/// Fits one coefficient vector per intra index and channel by windowed
/// least squares over all beats. Offsets that fall off the grid are dropped
/// and the remaining weights renormalized.
pub fn fit_taylor_prior(
    beats: &HeartbeatTensor,
    window: &WindowConfig,
    basis: &TaylorBasisConfig,
) -> Result<TaylorPrior> {
    let grid = beats.grid_len();
    let m = beats.channels();
    let k = basis.order;
    if grid < k + window.span() {
        return Err(HkfError::InvalidParameter(format!(
            "grid length {grid} too short for order {k} and window span {}",
            window.span()
        )));
    }
    let n = beats.len() as f64;
    // Per-index increments summed over beats: m × (T − 1).
    let mut diff_sum = DMatrix::zeros(m, grid - 1);
    for b in beats.beats() {
        for t in 0..grid - 1 {
            diff_sum.set_column(t, &(diff_sum.column(t) + b.column(t + 1) - b.column(t)));
        }
    }
    let rows: Vec<(isize, f64, DVector<f64>)> = window
        .taps()
        .map(|(l, w)| (l, w, basis_row(l, basis)))
        .collect();
    let transitions = grid - 1;

    let theta: Vec<Result<DMatrix<f64>>> = (0..grid)
        .into_par_iter()
        .map(|t| {
            if t >= transitions {
                return Ok(DMatrix::zeros(k, m));
            }
            let kept: Vec<&(isize, f64, DVector<f64>)> = rows
                .iter()
                .filter(|(l, _, _)| {
                    let s = t as isize + l;
                    s >= 0 && (s as usize) < transitions
                })
                .collect();
            let total: f64 = kept.iter().map(|(_, w, _)| w).sum();
            if total <= 0.0 {
                return Err(HkfError::DegenerateFit { t });
            }
            let mut gram = DMatrix::zeros(k, k);
            let mut rhs = DMatrix::zeros(k, m);
            for (l, w, phi) in kept {
                let w = w / total;
                gram += phi * phi.transpose() * (w * n);
                let s = (t as isize + l) as usize;
                rhs += phi * diff_sum.column(s).transpose() * w;
            }
            let ridge = RIDGE_SCALE * gram.trace() / k as f64;
            for i in 0..k {
                gram[(i, i)] += ridge;
            }
            let chol = gram.cholesky().ok_or(HkfError::DegenerateFit { t })?;
            Ok(chol.solve(&rhs))
        })
        .collect();
    let theta = theta.into_iter().collect::<Result<Vec<_>>>()?;
    TaylorPrior::from_theta(theta, *basis)
}
