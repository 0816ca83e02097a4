//! One-sided (Hestenes) Jacobi SVD.
//!
//! Rotates pairs of columns until all are mutually orthogonal; the column
//! norms are then the singular values. Backward error stays at rounding level
//! regardless of conditioning, which the sketch matrices here need.

use super::{ComplexMatrix, SvdResult, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

type Columns = Vec<Vec<C64>>;

fn columns_of(a: &ComplexMatrix) -> Columns {
    a.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn dotc(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Applies `x' = c x − s y`, `y' = s x + c y` with `y` pre-multiplied by `phase`.
fn rotate(x: &mut [C64], y: &mut [C64], c: f64, s: f64, phase: C64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let a = *xi;
        let b = *yi * phase;
        *xi = a * c - b * s;
        *yi = a * s + b * c;
    }
}

fn two_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (lo, hi) = v.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

/// Thin SVD of a matrix with `rows >= cols`. Returns `(U, σ, V)` unsorted.
fn tall(a: &ComplexMatrix, want_vectors: bool) -> Result<(Columns, Vec<f64>, Columns)> {
    let n = a.ncols();
    let mut w = columns_of(a);
    let mut v: Columns = if want_vectors {
        (0..n)
            .map(|j| {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[j] = C64::new(1.0, 0.0);
                e
            })
            .collect()
    } else {
        Vec::new()
    };
    let tol = f64::EPSILON * (a.nrows() as f64).sqrt();
    let mut converged = false;
    let mut worst = 0.0;
    for _ in 0..MAX_SWEEPS {
        worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = norm_sqr(&w[i]);
                let beta = norm_sqr(&w[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dotc(&w[i], &w[j]);
                let g = gamma.norm();
                let off = g / (alpha * beta).sqrt();
                worst = worst.max(off);
                if off <= tol {
                    continue;
                }
                // Rotating column j by conj(phase) makes the inner product real.
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (x, y) = two_mut(&mut w, i, j);
                rotate(x, y, c, s, phase);
                if want_vectors {
                    let (x, y) = two_mut(&mut v, i, j);
                    rotate(x, y, c, s, phase);
                }
            }
        }
        if worst <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            op: "thin_svd",
            residual: worst,
        });
    }
    let sigma: Vec<f64> = w.iter().map(|c| norm_sqr(c).sqrt()).collect();
    Ok((w, sigma, v))
}

/// Orthonormal columns of `w / σ`, completing zero-σ columns so that the
/// result still has orthonormal columns.
fn normalize_left(w: Columns, sigma: &[f64], m: usize) -> ComplexMatrix {
    let scale = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = scale * f64::EPSILON * m as f64;
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(w.len());
    let mut pending = Vec::new();
    for (j, col) in w.into_iter().enumerate() {
        if sigma[j] > cutoff {
            let inv = 1.0 / sigma[j];
            out.push(col.into_iter().map(|z| z * inv).collect());
        } else {
            out.push(Vec::new());
            pending.push(j);
        }
    }
    let mut e = 0;
    for j in pending {
        // Gram-Schmidt a standard basis vector against the accepted columns.
        loop {
            let mut cand = vec![C64::new(0.0, 0.0); m];
            cand[e] = C64::new(1.0, 0.0);
            e += 1;
            for _ in 0..2 {
                for q in out.iter().filter(|q| !q.is_empty()) {
                    let c = dotc(q, &cand);
                    for (z, qi) in cand.iter_mut().zip(q) {
                        *z -= c * qi;
                    }
                }
            }
            let nrm = norm_sqr(&cand).sqrt();
            if nrm > 0.5 {
                out[j] = cand.into_iter().map(|z| z / nrm).collect();
                break;
            }
        }
    }
    let cols: Vec<_> = out.iter().map(|c| nalgebra::DVector::from_column_slice(c)).collect();
    ComplexMatrix::from_columns(&cols)
}

fn to_matrix(cols: &Columns) -> ComplexMatrix {
    let v: Vec<_> = cols.iter().map(|c| nalgebra::DVector::from_column_slice(c)).collect();
    ComplexMatrix::from_columns(&v)
}

/// Thin SVD with singular values sorted descending.
pub(super) fn jacobi_svd(a: &ComplexMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    if m < n {
        let t = jacobi_svd(&a.adjoint())?;
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (w, sigma, v) = tall(a, true)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let w: Columns = order.iter().map(|&j| w[j].clone()).collect();
    let v: Columns = order.iter().map(|&j| v[j].clone()).collect();
    let sigma: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    Ok(SvdResult {
        u: normalize_left(w, &sigma, m),
        singular_values: sigma,
        v: to_matrix(&v),
    })
}

/// Singular values only, descending.
pub(super) fn jacobi_singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let owned;
    let a = if a.nrows() < a.ncols() {
        owned = a.adjoint();
        &owned
    } else {
        a
    };
    let (_, mut sigma, _) = tall(a, false)?;
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxmat::{gaussian_matrix, RngSeed};

    fn orthonormality_defect(q: &ComplexMatrix) -> f64 {
        (q.adjoint() * q - ComplexMatrix::identity(q.ncols(), q.ncols())).norm()
    }

    #[test]
    fn reconstructs_random_wide_and_tall_matrices() {
        for (i, &(m, n)) in [(11, 11), (200, 22), (7, 30), (1, 5)].iter().enumerate() {
            let a = gaussian_matrix(m, n, RngSeed(90 + i as u64)).unwrap();
            let svd = jacobi_svd(&a).unwrap();
            let r = m.min(n);
            assert_eq!(svd.singular_values.len(), r);
            assert!((svd.reconstruct() - &a).norm() / a.norm() < 1e-13);
            assert!(orthonormality_defect(&svd.u) < 1e-12);
            assert!(orthonormality_defect(&svd.v) < 1e-12);
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let a = gaussian_matrix(40, 6, RngSeed(3)).unwrap();
        let gram = crate::cxmat::HermitianMatrix::new(a.adjoint() * &a).unwrap();
        let eig = crate::cxmat::hermitian_eig(&gram).unwrap();
        let sv = jacobi_singular_values(&a).unwrap();
        for (s, l) in sv.iter().zip(&eig.eigenvalues) {
            assert!((s * s - l).abs() <= 1e-10 * l.abs().max(1.0));
        }
    }

    #[test]
    fn rank_deficient_input_keeps_orthonormal_u() {
        // Rank 2: the third column is a combination of the first two.
        let b = gaussian_matrix(9, 2, RngSeed(5)).unwrap();
        let mut a = ComplexMatrix::zeros(9, 3);
        a.column_mut(0).copy_from(&b.column(0));
        a.column_mut(1).copy_from(&b.column(1));
        a.set_column(2, &(b.column(0) * C64::new(0.5, -1.0) + b.column(1) * C64::new(2.0, 0.0)));
        let svd = jacobi_svd(&a).unwrap();
        assert!(svd.singular_values[2] < 1e-13 * svd.singular_values[0]);
        assert!(orthonormality_defect(&svd.u) < 1e-12);
        assert!((svd.reconstruct() - &a).norm() / a.norm() < 1e-13);
    }

    #[test]
    fn tiny_dynamic_range_is_resolved() {
        let d = [1.0, 1e-6, 1e-12];
        let q = crate::cxmat::qr_orthonormal(&gaussian_matrix(3, 3, RngSeed(8)).unwrap()).unwrap();
        let a = &q * ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, d.iter().map(|&x| C64::new(x, 0.0))));
        let sv = jacobi_singular_values(&a).unwrap();
        for (s, want) in sv.iter().zip(d) {
            assert!((s - want).abs() <= 1e-15 + 1e-10 * want, "{s} vs {want}");
        }
    }
}
