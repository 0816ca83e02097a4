//! Comparison baselines: block Lanczos, matrix inverse, propagator and the
//! FFT beamformer.

use std::time::Instant;

use rustfft::FftPlanner;

use super::{check_rank, clamp_eigenvalues, Method, SubspaceEstimate};
use crate::cxmat::{
    gaussian_matrix, hermitian_eig, pseudo_inverse, qr_orthonormal, singular_values, ComplexMatrix,
    ComplexVector, HermitianMatrix, RngSeed, C64,
};
use crate::error::{invalid, Error, Result};
use crate::scene::SignalMatrix;
use crate::spectrum::{projector_spectrum, AngleGrid, PseudoSpectrum};

/// Relative change of the top-`K` Ritz values below which Lanczos may stop.
pub const LANCZOS_VALUE_TOL: f64 = 1e-10;

/// Largest Ritz residual `‖S x − θ x‖`, relative to `θ_1`, accepted at stop.
pub const LANCZOS_RESIDUAL_TOL: f64 = 1e-9;

/// Fixed start block so the baseline is deterministic.
const LANCZOS_START_SEED: RngSeed = RngSeed(0x4c41_4e43_5a4f_5331);

/// Gram-Schmidt drops a new direction whose norm falls below this fraction of
/// its norm before orthogonalization.
const DEFLATION_TOL: f64 = 1e-10;

struct Krylov {
    /// Orthonormal basis vectors.
    q: Vec<ComplexVector>,
    /// `S q_i` for each basis vector.
    sq: Vec<ComplexVector>,
    /// Rayleigh quotient `Q^H S Q`.
    t: ComplexMatrix,
}

struct Ritz {
    values: Vec<f64>,
    vectors: ComplexMatrix,
    residual: f64,
}

impl Krylov {
    fn new() -> Self {
        Self {
            q: Vec::new(),
            sq: Vec::new(),
            t: ComplexMatrix::zeros(0, 0),
        }
    }

    /// Orthonormalizes `block` against the basis (twice) and appends the
    /// surviving directions. Returns the number added.
    fn extend(&mut self, s: &ComplexMatrix, block: &ComplexMatrix) -> usize {
        let old = self.q.len();
        for col in block.column_iter() {
            let mut w: ComplexVector = col.into_owned();
            let before = w.norm();
            if before == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &self.q {
                    let c = q.dotc(&w);
                    w.axpy(-c, q, C64::new(1.0, 0.0));
                }
            }
            let after = w.norm();
            if after > DEFLATION_TOL * before {
                self.q.push(w / C64::new(after, 0.0));
            }
        }
        let n = self.q.len();
        if n == old {
            return 0;
        }
        for j in old..n {
            self.sq.push(s * &self.q[j]);
        }
        let mut t = ComplexMatrix::zeros(n, n);
        t.view_mut((0, 0), (old, old)).copy_from(&self.t);
        for j in old..n {
            for i in 0..n {
                let v = self.q[i].dotc(&self.sq[j]);
                t[(i, j)] = v;
                t[(j, i)] = v.conj();
            }
        }
        self.t = t;
        n - old
    }

    fn ritz(&self, k: usize) -> Result<Ritz> {
        let n = self.q.len();
        let k = k.min(n);
        let eig = hermitian_eig(&HermitianMatrix::new(self.t.clone())?)?;
        let y = eig.eigenvectors.columns(0, k);
        let q = ComplexMatrix::from_columns(&self.q);
        let sq = ComplexMatrix::from_columns(&self.sq);
        let vectors = &q * y;
        let svec = &sq * y;
        let values: Vec<f64> = eig.eigenvalues[..k].to_vec();
        let scale = values.first().map(|v| v.abs()).unwrap_or(0.0).max(f64::MIN_POSITIVE);
        let residual = (0..k)
            .map(|j| (svec.column(j) - vectors.column(j) * C64::new(values[j], 0.0)).norm())
            .fold(0.0, f64::max)
            / scale;
        Ok(Ritz {
            values,
            vectors,
            residual,
        })
    }
}

enum LanczosOutcome {
    Converged(Ritz),
    Exhausted(Option<Ritz>),
}

fn run_lanczos(s: &ComplexMatrix, k: usize, block: usize, iters: usize) -> Result<LanczosOutcome> {
    let m = s.nrows();
    let block = block.min(m);
    let mut krylov = Krylov::new();
    let mut next = gaussian_matrix(m, block, LANCZOS_START_SEED)?;
    let mut prev: Option<Vec<f64>> = None;
    let mut last = None;
    for _ in 0..iters {
        let old = krylov.q.len();
        let added = krylov.extend(s, &next);
        let n = krylov.q.len();
        if added == 0 || n == m {
            // Invariant subspace: the Ritz pairs are exact.
            return Ok(LanczosOutcome::Converged(krylov.ritz(k)?));
        }
        if n >= k {
            let ritz = krylov.ritz(k)?;
            if let Some(p) = &prev {
                let change = ritz
                    .values
                    .iter()
                    .zip(p)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                if change <= LANCZOS_VALUE_TOL && ritz.residual <= LANCZOS_RESIDUAL_TOL {
                    return Ok(LanczosOutcome::Converged(ritz));
                }
            }
            prev = Some(ritz.values.clone());
            last = Some(ritz);
        }
        next = ComplexMatrix::from_columns(&krylov.sq[old..n]);
    }
    Ok(LanczosOutcome::Exhausted(last))
}

/// Top-`K` eigenpairs by block Krylov iteration with full reorthogonalization.
///
/// Each step appends `S Q_j` to the basis and solves the Rayleigh-Ritz problem.
/// Converges once the top-`K` Ritz values change by at most
/// [`LANCZOS_VALUE_TOL`] (relative) between steps and every Ritz residual is
/// at most [`LANCZOS_RESIDUAL_TOL`]`· θ_1`. An invariant subspace stops the
/// iteration early with exact Ritz pairs.
pub fn block_lanczos_subspace(
    s: &HermitianMatrix,
    k: usize,
    block: usize,
    iters: usize,
) -> Result<SubspaceEstimate> {
    let start = Instant::now();
    check_rank(k, s.dim())?;
    if block < k || iters == 0 {
        return Err(invalid(format!(
            "block Lanczos needs block >= K and iters >= 1 (block={block}, K={k}, iters={iters})"
        )));
    }
    match run_lanczos(s.as_matrix(), k, block, iters)? {
        LanczosOutcome::Converged(r) => Ok(SubspaceEstimate {
            basis: r.vectors,
            eigenvalues: clamp_eigenvalues(r.values),
            method: Method::Lanczos,
            cost: start.elapsed().as_secs_f64(),
        }),
        LanczosOutcome::Exhausted(r) => Err(Error::NoConvergence {
            op: "block_lanczos",
            residual: r.map(|r| r.residual).unwrap_or(f64::INFINITY),
        }),
    }
}

/// Block Krylov steps used to estimate the noise power in
/// [`matrix_inverse_noise_projector`].
const NOISE_POWER_STEPS: usize = 8;

/// Noise-projector surrogate `ε̂² S⁻¹`.
#[derive(Debug, Clone)]
pub struct MatrixInverseEstimate {
    pub projector: ComplexMatrix,
    /// `ε̂²`.
    pub noise_power: f64,
    pub cost: f64,
}

impl MatrixInverseEstimate {
    /// `1 / (a^H ε̂² S⁻¹ a)` on `grid`.
    pub fn spectrum(&self, grid: &AngleGrid, d: f64, lambda: f64) -> PseudoSpectrum {
        projector_spectrum(&self.projector, grid, d, lambda, Method::MatrixInverse)
    }
}

/// Approximates the noise-subspace projector by `ε̂² S⁻¹`.
///
/// `ε̂² = (trace S − Σ top-K Ritz values) / (M − K)` from a short block
/// Krylov pass. The inverse comes from a Cholesky factorization; a pivot
/// `L_ii² ≤ 1e-12 · max_i S_ii` is reported as singular.
pub fn matrix_inverse_noise_projector(s: &HermitianMatrix, k: usize) -> Result<MatrixInverseEstimate> {
    let start = Instant::now();
    let m = s.dim();
    check_rank(k, m)?;
    let a = s.as_matrix();
    let scale = (0..m).map(|i| a[(i, i)].re).fold(0.0, f64::max);
    let chol = nalgebra::Cholesky::new(a.clone())
        .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?;
    let pivot = (0..m).map(|i| chol.l_dirty()[(i, i)].norm_sqr()).fold(f64::INFINITY, f64::min);
    if !(pivot > 1e-12 * scale) {
        return Err(Error::Singular(format!(
            "smallest Cholesky pivot {pivot:e} against diagonal scale {scale:e}"
        )));
    }
    let inverse = chol.inverse();

    let ritz = match run_lanczos(a, k, k, NOISE_POWER_STEPS)? {
        LanczosOutcome::Converged(r) => r.values,
        LanczosOutcome::Exhausted(r) => r.map(|r| r.values).unwrap_or_default(),
    };
    let top: f64 = ritz.iter().take(k).sum();
    let noise_power = ((s.trace() - top) / (m - k) as f64).max(0.0);
    let projector = inverse * C64::new(noise_power, 0.0);
    Ok(MatrixInverseEstimate {
        projector: HermitianMatrix::new(projector)?.into_matrix(),
        noise_power,
        cost: start.elapsed().as_secs_f64(),
    })
}

/// Propagator-method signal subspace.
///
/// Splits `Y` into its first `K` rows `Y₁` and the rest `Y₂`, fits
/// `Y₂ ≈ P^H Y₁` by least squares, `P^H = Y₂ Y₁^H (Y₁ Y₁^H)^+`, and
/// orthonormalizes `[I_K; P^H]`.
pub fn propagator_subspace(y: &SignalMatrix, k: usize) -> Result<SubspaceEstimate> {
    let start = Instant::now();
    let ym = y.as_matrix();
    let m = ym.nrows();
    check_rank(k, m)?;
    let y1 = ym.rows(0, k);
    let y2 = ym.rows(k, m - k);
    let gram = y1 * y1.adjoint();
    let sv = singular_values(&gram)?;
    let tol = k.max(ym.ncols()) as f64 * f64::EPSILON * sv[0];
    let rank = sv.iter().filter(|&&s| s > tol).count();
    if rank < k {
        return Err(Error::Singular(format!(
            "leading {k}-row block of the signal matrix has rank {rank}"
        )));
    }
    let ph = y2 * y1.adjoint() * pseudo_inverse(&gram, None)?;
    let mut stacked = ComplexMatrix::zeros(m, k);
    stacked.view_mut((0, 0), (k, k)).fill_with_identity();
    stacked.view_mut((k, 0), (m - k, k)).copy_from(&ph);
    let basis = qr_orthonormal(&stacked)?;
    Ok(SubspaceEstimate {
        basis,
        eigenvalues: vec![0.0; k],
        method: Method::Propagator,
        cost: start.elapsed().as_secs_f64(),
    })
}

/// Conventional beamformer spectrum via the FFT.
///
/// Each snapshot (column of `Y`) is zero-padded to `fft_len` and transformed;
/// `|X[f]|²` is averaged over snapshots. Bin `f` corresponds to
/// `sin θ = λ f / (d · fft_len)`, and each grid angle reads the averaged power
/// by linear interpolation between the two neighbouring bins (cyclically).
pub fn fft_angle_spectrum(
    y: &SignalMatrix,
    grid: &AngleGrid,
    fft_len: usize,
    d: f64,
    lambda: f64,
) -> Result<PseudoSpectrum> {
    let ym = y.as_matrix();
    let (m, n) = ym.shape();
    if fft_len < m {
        return Err(invalid(format!("FFT length {fft_len} is shorter than the array ({m})")));
    }
    if !(d > 0.0 && lambda > 0.0) {
        return Err(invalid(format!("need d > 0 and lambda > 0 (d={d}, lambda={lambda})")));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
    let mut power = vec![0.0; fft_len];
    let mut buf = vec![C64::new(0.0, 0.0); fft_len];
    for col in ym.column_iter() {
        buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (b, z) in buf.iter_mut().zip(col.iter()) {
            *b = *z;
        }
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
    }
    power.iter_mut().for_each(|p| *p /= n as f64);

    let bins = fft_len as f64;
    let values = grid
        .thetas()
        .into_iter()
        .map(|theta| {
            let f = (bins * d * theta.sin() / lambda).rem_euclid(bins);
            let lo = f.floor();
            let frac = f - lo;
            let i0 = lo as usize % fft_len;
            let i1 = (i0 + 1) % fft_len;
            ((1.0 - frac) * power[i0] + frac * power[i1]).max(0.0)
        })
        .collect();
    PseudoSpectrum::new(*grid, values, Method::Fft)
}

/// Beamwidth `λ / (M d)` of an `M`-element array, in units of `sin θ`.
pub fn beamwidth(m: usize, d: f64, lambda: f64) -> f64 {
    lambda / (m as f64 * d)
}
