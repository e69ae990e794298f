//! Small dense helpers shared by the filters: symmetrization, PSD checks and
//! spectral projection onto the positive semidefinite cone.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalue floor applied to covariances emitted by the M-step.
pub const EIGEN_FLOOR: f64 = 1e-9;

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// True when `a` is symmetric within `1e-10` (relative to its scale) and its
/// smallest eigenvalue is at least `-tol`.
pub fn is_psd(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() || a.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    asym <= 1e-10 * scale && min_eigenvalue(a) >= -tol
}

/// Projects a symmetric matrix onto `{A : A ⪰ floor·I}` by clamping its
/// eigenvalues from below and reassembling with the original eigenvectors.
/// With `floor = 0` this is the Frobenius-nearest PSD matrix.
pub fn clamp_eigenvalues(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].max(floor));
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return symmetrize(a);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clamped) * v.transpose()))
}

/// Diagonal-only variant: off-diagonals are dropped and each diagonal entry
/// is clamped elementwise.
pub fn clamp_diagonal(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&a.diagonal().map(|v| v.max(floor)))
}
