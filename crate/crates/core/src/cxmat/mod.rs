//! Dense complex linear algebra used by every estimator.
//!
//! Matrices are plain [`nalgebra::DMatrix`] values over [`C64`]; the
//! decompositions here wrap nalgebra's Householder/QR-iteration routines with
//! the ordering, validation and failure reporting the estimators rely on.

mod random;
mod svd;

pub(crate) use random::sample_indices;
pub use random::{gaussian_matrix, uniform_sampling_matrix, RngSeed, SamplingMatrix};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix. Storage is nalgebra's; logical indexing is `(row, col)`.
pub type ComplexMatrix = DMatrix<C64>;

/// Dense complex column vector.
pub type ComplexVector = DVector<C64>;

/// Tolerance used when checking that a basis has orthonormal columns.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Returns an error naming the first non-finite entry, if any.
pub fn check_finite(a: &ComplexMatrix) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_nonempty(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(invalid(format!("{what}: matrix must be at least 1x1")));
    }
    Ok(())
}

/// Square complex matrix equal to its own conjugate transpose.
///
/// Construction symmetrizes the input as `(A + A^H) / 2`, so symmetry holds to
/// rounding regardless of how the input was accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        check_nonempty(&a, "hermitian matrix")?;
        if a.nrows() != a.ncols() {
            return Err(invalid(format!(
                "hermitian matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        check_finite(&a)?;
        let n = a.nrows();
        let mut inner = a;
        for i in 0..n {
            inner[(i, i)] = C64::new(inner[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (inner[(i, j)] + inner[(j, i)].conj()) * 0.5;
                inner[(i, j)] = avg;
                inner[(j, i)] = avg.conj();
            }
        }
        Ok(Self { inner })
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.inner[(i, i)].re).sum()
    }

    /// `S(:, I)`: the columns selected by `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> ComplexMatrix {
        self.inner.select_columns(indices)
    }

    /// `S(I, I)`: the principal submatrix on `indices`.
    pub fn principal_submatrix(&self, indices: &[usize]) -> HermitianMatrix {
        let p = indices.len();
        let sub = ComplexMatrix::from_fn(p, p, |a, b| self.inner[(indices[a], indices[b])]);
        HermitianMatrix { inner: sub }
    }
}

/// Full spectral decomposition `S = V diag(λ) V^H`, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*lambda);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// Leading `k` eigenvectors as an `M x k` basis.
    pub fn leading(&self, k: usize) -> ComplexMatrix {
        self.eigenvectors.columns(0, k).into_owned()
    }
}

/// Thin SVD `A = U diag(σ) V^H` with `r = min(m, n)` columns, σ descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

fn iteration_cap(n: usize) -> usize {
    // nalgebra counts implicit QR sweeps over the whole matrix.
    1000 + 100 * n
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
///
/// Fails with [`Error::NoConvergence`] when the QR iteration exceeds its cap or
/// when the reconstruction residual `‖S − VΛV^H‖_F / ‖S‖_F` exceeds `1e-10`.
pub fn hermitian_eig(s: &HermitianMatrix) -> Result<EigResult> {
    let a = s.as_matrix();
    let n = a.nrows();
    let norm = a.norm();
    let eig = nalgebra::SymmetricEigen::try_new(a.clone(), f64::EPSILON, iteration_cap(n))
        .ok_or(Error::NoConvergence {
            op: "hermitian_eig",
            residual: 1.0,
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = eig.eigenvectors.select_columns(&order);
    let result = EigResult {
        eigenvalues,
        eigenvectors,
    };

    if norm > 0.0 {
        let residual = (result.reconstruct() - a).norm() / norm;
        if !(residual <= 1e-10) {
            return Err(Error::NoConvergence {
                op: "hermitian_eig",
                residual,
            });
        }
    }
    Ok(result)
}

/// Thin singular value decomposition, singular values descending.
///
/// Computed by one-sided Jacobi rotations, which keep the reconstruction
/// residual at rounding level even for ill-conditioned inputs.
pub fn thin_svd(a: &ComplexMatrix) -> Result<SvdResult> {
    check_nonempty(a, "thin_svd")?;
    check_finite(a)?;
    let (m, n) = a.shape();
    let norm = a.norm();
    if norm == 0.0 {
        let r = m.min(n);
        return Ok(SvdResult {
            u: ComplexMatrix::identity(m, r),
            singular_values: vec![0.0; r],
            v: ComplexMatrix::identity(n, r),
        });
    }
    let result = svd::jacobi_svd(a)?;
    let residual = (result.reconstruct() - a).norm() / norm;
    if !(residual <= 1e-10) {
        return Err(Error::NoConvergence {
            op: "thin_svd",
            residual,
        });
    }
    Ok(result)
}

/// Singular values only, descending.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    check_nonempty(a, "singular_values")?;
    check_finite(a)?;
    svd::jacobi_singular_values(a)
}

/// Spectral norm `σ_1(A)`.
pub fn spectral_norm(a: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(a)?[0])
}

/// Orthonormal basis of `range(A)` via Householder QR.
///
/// A column whose `|r_jj|` falls below `max(m, n) · 10ε · max_i |r_ii|` is
/// reported as [`Error::RankDeficient`].
pub fn qr_orthonormal(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_nonempty(a, "qr_orthonormal")?;
    check_finite(a)?;
    let (m, n) = a.shape();
    if n > m {
        return Err(invalid(format!(
            "qr_orthonormal needs rows >= cols, got {m}x{n}"
        )));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..n).map(|j| r[(j, j)].norm()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    let tol = m.max(n) as f64 * 10.0 * f64::EPSILON * scale;
    if let Some(j) = diag.iter().position(|&d| !(d > tol)) {
        return Err(Error::RankDeficient {
            column: j,
            magnitude: diag[j],
        });
    }
    Ok(qr.q())
}

/// Moore-Penrose pseudo-inverse via the thin SVD.
///
/// Singular values at or below `rel_tol · σ_1` are treated as zero; the default
/// is `max(rows, cols) · ε`. An all-zero input maps to the zero matrix of
/// transposed shape.
pub fn pseudo_inverse(a: &ComplexMatrix, rel_tol: Option<f64>) -> Result<ComplexMatrix> {
    check_nonempty(a, "pseudo_inverse")?;
    let (m, n) = a.shape();
    let rel_tol = rel_tol.unwrap_or(m.max(n) as f64 * f64::EPSILON);
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    let svd = thin_svd(a)?;
    let sigma_max = svd.singular_values[0];
    if sigma_max == 0.0 {
        return Ok(ComplexMatrix::zeros(n, m));
    }
    let cutoff = rel_tol * sigma_max;
    let mut v_scaled = svd.v.clone();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    Ok(v_scaled * svd.u.adjoint())
}

/// Row coherence `μ(U) = (M/K) max_i ‖U_{i,:}‖²` of a basis with orthonormal
/// columns, where `(M, K)` is the shape of `u`.
pub fn coherence(u: &ComplexMatrix) -> Result<f64> {
    check_nonempty(u, "coherence")?;
    let (m, k) = u.shape();
    let defect = orthonormality_defect(u);
    if defect > ORTHONORMAL_TOL {
        return Err(Error::Precondition(format!(
            "coherence needs orthonormal columns (max |U^H U - I| = {defect:e})"
        )));
    }
    let max_row = u
        .row_iter()
        .map(|row| row.norm_squared())
        .fold(0.0, f64::max);
    Ok(m as f64 / k as f64 * max_row)
}

/// `max |(U^H U − I)_{ij}|`.
pub fn orthonormality_defect(u: &ComplexMatrix) -> f64 {
    let g = u.adjoint() * u;
    let k = g.nrows();
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Orthogonal projector `U U^H` onto the column span of an orthonormal basis.
pub fn projector(u: &ComplexMatrix) -> ComplexMatrix {
    u * u.adjoint()
}

/// Spectral-norm distance between the projectors of two orthonormal bases.
pub fn projector_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let diff = projector(a) - projector(b);
    let h = HermitianMatrix::new(diff)?;
    let eig = nalgebra::SymmetricEigen::try_new(
        h.into_matrix(),
        f64::EPSILON,
        iteration_cap(a.nrows()),
    )
    .ok_or(Error::NoConvergence {
        op: "projector_distance",
        residual: 1.0,
    })?;
    Ok(eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max))
}
