//! Signal-subspace estimators: the exact eigendecomposition, the two
//! randomized Nyström estimators, and the comparison baselines.

mod baselines;

pub use baselines::{
    beamwidth, block_lanczos_subspace, fft_angle_spectrum, matrix_inverse_noise_projector, propagator_subspace,
    MatrixInverseEstimate,
};

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cxmat::{
    gaussian_matrix, hermitian_eig, pseudo_inverse, qr_orthonormal, thin_svd, ComplexMatrix,
    HermitianMatrix, RngSeed,
};
use crate::error::{invalid, Error, Result};

/// Most power iterations accepted by [`Fast2Params`].
pub const MAX_POWER_ITERATIONS: usize = 20;

/// Gaussian re-draws attempted after a rank-deficient range sketch.
pub const MAX_SKETCH_RETRIES: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Fast1,
    Fast2,
    Lanczos,
    MatrixInverse,
    Propagator,
    Fft,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Fast1 => "fast1",
            Method::Fast2 => "fast2",
            Method::Lanczos => "lanczos",
            Method::MatrixInverse => "matrix_inverse",
            Method::Propagator => "propagator",
            Method::Fft => "fft",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An `M x K` orthonormal signal-subspace basis with its spectrum.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    pub basis: ComplexMatrix,
    /// `K` values, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub method: Method,
    /// Wall-clock seconds spent inside the estimator.
    pub cost: f64,
}

impl SubspaceEstimate {
    /// The zero-dimensional subspace of `C^M`.
    pub fn empty(m: usize, method: Method) -> Self {
        Self {
            basis: ComplexMatrix::zeros(m, 0),
            eigenvalues: Vec::new(),
            method,
            cost: 0.0,
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.basis.nrows()
    }
}

fn clamp_eigenvalues(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    values.into_iter().map(|v| v.max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fast1Params {
    /// Number of sampled columns, `K <= p <= M`.
    pub p: usize,
    pub seed: RngSeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fast2Params {
    /// Sketch width, `K <= p <= M`.
    pub p: usize,
    /// Power iterations, `1..=20`.
    pub t: usize,
    pub seed: RngSeed,
}

fn check_rank(k: usize, m: usize) -> Result<()> {
    if k == 0 || k >= m {
        return Err(invalid(format!("K={k} must satisfy 1 <= K < M={m}")));
    }
    Ok(())
}

fn check_sketch(k: usize, p: usize, m: usize) -> Result<()> {
    if k == 0 || p < k || p > m {
        return Err(invalid(format!("sketch size p={p} must satisfy 1 <= K={k} <= p <= M={m}")));
    }
    Ok(())
}

/// Top-`K` eigenpairs of `S`.
pub fn exact_signal_subspace(s: &HermitianMatrix, k: usize) -> Result<SubspaceEstimate> {
    let start = Instant::now();
    check_rank(k, s.dim())?;
    let eig = hermitian_eig(s)?;
    Ok(SubspaceEstimate {
        basis: eig.leading(k),
        eigenvalues: clamp_eigenvalues(eig.eigenvalues[..k].iter().copied()),
        method: Method::Exact,
        cost: start.elapsed().as_secs_f64(),
    })
}

/// Rank-`K` basis of the Nyström approximation `C W C^H`.
///
/// With `C = U_c Σ_c V_c^H` and `B = Σ_c V_c^H W V_c Σ_c = U_B Σ_B V_B^H`,
/// `C W C^H = (U_c U_B) Σ_B (U_c U_B)^H`, so the leading `K` columns of
/// `U_c U_B` and values of `Σ_B` are its top-`K` eigenpairs.
fn nystrom_top_k(c: &ComplexMatrix, w: &ComplexMatrix, k: usize) -> Result<(ComplexMatrix, Vec<f64>)> {
    let svd_c = thin_svd(c)?;
    let mut vs = svd_c.v.clone();
    for (j, s) in svd_c.singular_values.iter().enumerate() {
        vs.column_mut(j).scale_mut(*s);
    }
    let b = vs.adjoint() * w * &vs;
    let svd_b = thin_svd(&b)?;
    let u = &svd_c.u * svd_b.u.columns(0, k);
    Ok((u, clamp_eigenvalues(svd_b.singular_values[..k].iter().copied())))
}

/// Column-sampling Nyström estimate of the top-`K` subspace.
///
/// Samples `p` columns `I` uniformly without replacement, then takes
/// `C = S(:, I)` and `W = S(I, I)^+`. A singular `S(I, I)` is handled by the
/// truncated pseudo-inverse.
pub fn fast_music_1(s: &HermitianMatrix, k: usize, params: Fast1Params) -> Result<SubspaceEstimate> {
    let start = Instant::now();
    let m = s.dim();
    check_sketch(k, params.p, m)?;
    let indices = crate::cxmat::sample_indices(m, params.p, params.seed)?;
    let c = s.select_columns(&indices);
    let w = pseudo_inverse(s.principal_submatrix(&indices).as_matrix(), None)?;
    let (basis, eigenvalues) = nystrom_top_k(&c, &w, k)?;
    Ok(SubspaceEstimate {
        basis,
        eigenvalues,
        method: Method::Fast1,
        cost: start.elapsed().as_secs_f64(),
    })
}

/// Gaussian range-finder Nyström estimate with `t` power iterations.
///
/// `C = SΠ`, then `t` times `V = orth(C)`, `C = SV`; finally
/// `W = (V^H S V)^+` and the same rank-`K` extraction as [`fast_music_1`].
/// A rank-deficient `orth` step re-draws `Π` from a derived seed, up to
/// [`MAX_SKETCH_RETRIES`] times.
pub fn fast_music_2(s: &HermitianMatrix, k: usize, params: Fast2Params) -> Result<SubspaceEstimate> {
    let start = Instant::now();
    let m = s.dim();
    check_sketch(k, params.p, m)?;
    if params.t == 0 || params.t > MAX_POWER_ITERATIONS {
        return Err(invalid(format!(
            "power iterations t={} must lie in 1..={MAX_POWER_ITERATIONS}",
            params.t
        )));
    }
    let a = s.as_matrix();
    let mut last_err = None;
    for attempt in 0..=MAX_SKETCH_RETRIES {
        let seed = if attempt == 0 { params.seed } else { params.seed.derive(attempt) };
        match range_sketch(a, params.p, params.t, seed) {
            Ok((v, c)) => {
                let w = pseudo_inverse(&(v.adjoint() * &c), None)?;
                let (basis, eigenvalues) = nystrom_top_k(&c, &w, k)?;
                return Ok(SubspaceEstimate {
                    basis,
                    eigenvalues,
                    method: Method::Fast2,
                    cost: start.elapsed().as_secs_f64(),
                });
            }
            Err(e @ Error::RankDeficient { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Returns `(V, S V)` after `t` orthonormalized power steps.
fn range_sketch(a: &ComplexMatrix, p: usize, t: usize, seed: RngSeed) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let pi = gaussian_matrix(a.nrows(), p, seed)?;
    let mut c = a * pi;
    let mut v = ComplexMatrix::zeros(0, 0);
    for _ in 0..t {
        v = qr_orthonormal(&c)?;
        c = a * &v;
    }
    Ok((v, c))
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::cxmat::{orthonormality_defect, projector_distance, ORTHONORMAL_TOL};
    use crate::scene::{spatial_covariance, synthesize_beat_signal, FmcwConfig, SceneRecipe, Target, TargetScene};
    use crate::spectrum::{extract_peaks, music_spectrum, AngleGrid};

    fn exact_basis(s: &HermitianMatrix, k: usize) -> ComplexMatrix {
        exact_signal_subspace(s, k).unwrap().basis
    }

    fn one_target(m: usize, theta: f64) -> (FmcwConfig, HermitianMatrix) {
        let cfg = FmcwConfig::automotive_77ghz(m, 2 * m).unwrap();
        let scene = TargetScene::new(vec![Target {
            theta,
            tau: cfg.delay_for_beat_phase(0.7),
            alpha: crate::cxmat::C64::new(1.0, 0.5),
        }])
        .unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 0.0, RngSeed(0)).unwrap();
        (cfg, spatial_covariance(&y))
    }

    #[test]
    fn exact_on_diagonal() {
        let s = HermitianMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap();
        let e = exact_signal_subspace(&s, 2).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-12 && (e.eigenvalues[1] - 2.0).abs() < 1e-12);
        assert!((e.basis[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((e.basis[(1, 1)].norm() - 1.0).abs() < 1e-12);
        assert_eq!(e.method, Method::Exact);
        assert!(exact_signal_subspace(&s, 3).is_err());
        assert!(exact_signal_subspace(&s, 0).is_err());
    }

    #[test]
    fn exact_rank_one_aligns_with_steering() {
        let theta = 0.4;
        let (cfg, s) = one_target(16, theta);
        let u = exact_basis(&s, 1);
        let a = crate::scene::steering_vector(theta, 16, cfg.spacing(), cfg.lambda()).unwrap();
        let overlap = u.column(0).dotc(&a).norm() / 4.0;
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exact_projector_matches_full_decomposition() {
        let s = with_spectrum(&[9.0, 7.0, 5.0, 1.0, 0.9, 0.7, 0.5, 0.3, 0.2, 0.1], 4);
        let e = exact_signal_subspace(&s, 3).unwrap();
        // Oracle: top-3 eigenvectors taken from the full decomposition.
        let full = hermitian_eig(&s).unwrap();
        let oracle = full.eigenvectors.columns(0, 3).into_owned();
        assert!(projector_distance(&e.basis, &oracle).unwrap() < 1e-9);
        assert!(orthonormality_defect(&e.basis) < ORTHONORMAL_TOL);
    }

    #[test]
    fn fast1_full_sampling_is_exact() {
        let s = with_spectrum(&[10.0, 8.0, 6.0, 1.0, 0.5, 0.25, 0.1, 0.05], 11);
        let f = fast_music_1(&s, 3, Fast1Params { p: 8, seed: RngSeed(1) }).unwrap();
        assert!(projector_distance(&f.basis, &exact_basis(&s, 3)).unwrap() < 1e-8);
        for (a, b) in f.eigenvalues.iter().zip([10.0, 8.0, 6.0]) {
            assert!((a - b).abs() < 1e-8 * b);
        }
        assert_eq!(f.method, Method::Fast1);
    }

    #[test]
    fn fast1_recovers_rank_one_from_two_columns() {
        let theta = 0.9;
        let (cfg, s) = one_target(24, theta);
        let f = fast_music_1(&s, 1, Fast1Params { p: 2, seed: RngSeed(5) }).unwrap();
        assert!(projector_distance(&f.basis, &exact_basis(&s, 1)).unwrap() < 1e-8);
        let grid = AngleGrid::field_of_view(901).unwrap();
        let peaks = extract_peaks(&music_spectrum(&f, &grid, cfg.spacing(), cfg.lambda()), 1, 3).unwrap();
        assert_eq!(peaks.peaks[0].index, grid.nearest_index(theta));
    }

    #[test]
    fn fast1_validates_p() {
        let s = with_spectrum(&geometric(6, 0.5), 2);
        assert!(fast_music_1(&s, 3, Fast1Params { p: 2, seed: RngSeed(0) }).is_err());
        assert!(fast_music_1(&s, 3, Fast1Params { p: 7, seed: RngSeed(0) }).is_err());
    }

    #[test]
    fn fast2_exact_rank_capture() {
        let mut values = vec![5.0, 4.0, 3.0];
        values.extend(std::iter::repeat_n(0.0, 17));
        let s = with_spectrum(&values, 21);
        let f = fast_music_2(&s, 3, Fast2Params { p: 3, t: 1, seed: RngSeed(2) }).unwrap();
        assert!(projector_distance(&f.basis, &exact_basis(&s, 3)).unwrap() < 1e-8);
        assert_eq!(f.method, Method::Fast2);
    }

    #[test]
    fn fast2_error_decays_with_iterations() {
        let mut values = vec![4.0, 3.5, 3.0];
        values.extend((0..47).map(|i| 0.6 * 0.97f64.powi(i)));
        let s = with_spectrum(&values, 8);
        let u = exact_basis(&s, 3);
        let err = |t| {
            let f = fast_music_2(&s, 3, Fast2Params { p: 6, t, seed: RngSeed(30) }).unwrap();
            projector_distance(&f.basis, &u).unwrap()
        };
        let e10 = err(10);
        assert!(e10 <= 1e-6, "t=10 error {e10}");
        // Decay-rate oracle: the error falls roughly like (σ_4/σ_3)^t per step.
        let gap: f64 = 0.2;
        let (e2, e4) = (err(2), err(4));
        assert!(e4 <= e2 * gap.powi(2) * 10.0, "e2={e2} e4={e4}");
    }

    #[test]
    fn randomized_estimators_are_deterministic() {
        let s = with_spectrum(&geometric(30, 0.7), 3);
        let a = fast_music_1(&s, 4, Fast1Params { p: 8, seed: RngSeed(9) }).unwrap();
        let b = fast_music_1(&s, 4, Fast1Params { p: 8, seed: RngSeed(9) }).unwrap();
        assert_eq!(a.basis, b.basis);
        let a = fast_music_2(&s, 4, Fast2Params { p: 6, t: 2, seed: RngSeed(9) }).unwrap();
        let b = fast_music_2(&s, 4, Fast2Params { p: 6, t: 2, seed: RngSeed(9) }).unwrap();
        assert_eq!(a.basis, b.basis);
        assert!(fast_music_2(&s, 4, Fast2Params { p: 6, t: 0, seed: RngSeed(9) }).is_err());
        assert!(fast_music_2(&s, 4, Fast2Params { p: 6, t: 21, seed: RngSeed(9) }).is_err());
    }

    #[test]
    fn fast2_gives_up_on_inherently_low_rank_sketch() {
        // Rank 2 matrix sketched with p = 4: every draw is rank deficient.
        let mut values = vec![2.0, 1.0];
        values.extend(std::iter::repeat_n(0.0, 8));
        let s = with_spectrum(&values, 1);
        let r = fast_music_2(&s, 2, Fast2Params { p: 4, t: 1, seed: RngSeed(0) });
        assert!(matches!(r, Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn estimates_on_radar_data_are_orthonormal() {
        let cfg = FmcwConfig::automotive_77ghz(40, 80).unwrap();
        let scene = SceneRecipe::new(4, 0.0).draw(&cfg, RngSeed(2)).unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 1.0, RngSeed(3)).unwrap();
        let s = spatial_covariance(&y);
        for est in [
            exact_signal_subspace(&s, 4).unwrap(),
            fast_music_1(&s, 4, Fast1Params { p: 6, seed: RngSeed(1) }).unwrap(),
            fast_music_2(&s, 4, Fast2Params { p: 4, t: 2, seed: RngSeed(1) }).unwrap(),
        ] {
            assert_eq!(est.basis.shape(), (40, 4));
            assert!(orthonormality_defect(&est.basis) < ORTHONORMAL_TOL, "{}", est.method);
            assert!(est.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            assert!(est.eigenvalues.iter().all(|v| *v >= 0.0));
            assert!(est.cost >= 0.0);
        }
    }
}
