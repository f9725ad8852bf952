//! Small dense linear-algebra helpers shared across modules.
//!
//! Everything here is SVD-based: the moment systems, ridge-coefficient
//! systems and constrained quadratic programs in this crate are small
//! (tens to a few hundred unknowns) and frequently rank-deficient by
//! design, so minimum-norm pseudo-inverse solves with an explicit rank
//! cutoff are the right tool everywhere.

use nalgebra::{DMatrix, DVector};

use crate::error::{AtlasError, Result};

/// Relative singular-value cutoff used to decide rank.
pub const RANK_REL_TOL: f64 = 1e-12;

pub struct MinNormSolution {
    pub x: DVector<f64>,
    pub sigma_max: f64,
    /// Smallest of the `min(rows, cols)` singular values (no truncation).
    pub sigma_min: f64,
    /// `max_i |(A x - b)_i|`.
    pub max_residual: f64,
}

impl MinNormSolution {
    /// Ratio of extreme singular values; `inf` for numerically rank-deficient systems.
    pub fn condition(&self) -> f64 {
        if self.sigma_min > 0.0 {
            self.sigma_max / self.sigma_min
        } else {
            f64::INFINITY
        }
    }
}

/// Minimum-Euclidean-norm least-squares solution of `A x = b`.
///
/// Singular values below `rel_tol * sigma_max` are treated as zero, so for
/// inconsistent systems this returns the least-squares solution of smallest
/// norm together with the attained residual.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<MinNormSolution> {
    assert_eq!(a.nrows(), b.len(), "row count of A must match length of b");
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| svd_failure())?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| svd_failure())?;
    let s = &svd.singular_values;
    let sigma_max = s.iter().cloned().fold(0.0_f64, f64::max);
    let sigma_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = rel_tol * sigma_max;

    let mut x = DVector::zeros(a.ncols());
    for i in 0..s.len() {
        if s[i] > cutoff && s[i] > 0.0 {
            let coeff = u.column(i).dot(b) / s[i];
            x.axpy(coeff, &v_t.row(i).transpose(), 1.0);
        }
    }
    let max_residual = (a * &x - b).amax();
    if !max_residual.is_finite() {
        return Err(AtlasError::Numerical("non-finite residual in least-squares solve".into()));
    }
    Ok(MinNormSolution { x, sigma_max, sigma_min, max_residual })
}

/// Orthonormal basis of the null space of `A`, returned as matrix columns.
///
/// `A` is padded with zero rows up to square so the thin SVD carries the
/// full right singular basis.
pub fn nullspace_basis(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    let mut padded = DMatrix::zeros(a.nrows().max(n), n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| svd_failure())?;
    let s = &svd.singular_values;
    let sigma_max = s.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_tol * sigma_max;
    let null_rows: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= cutoff).collect();
    let mut basis = DMatrix::zeros(n, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    Ok(basis)
}

/// Smallest singular value of `A`.
pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn svd_failure() -> AtlasError {
    AtlasError::Numerical("singular value decomposition did not converge".into())
}
