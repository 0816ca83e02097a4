//! Monte-Carlo checks of the sketching lemmas behind the bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ETA;
use crate::cxmat::{
    gaussian_matrix, hermitian_eig, singular_values, spectral_norm, uniform_sampling_matrix, ComplexMatrix,
    HermitianMatrix, RngSeed, C64,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub statement: String,
    pub trials: usize,
    pub successes: usize,
    /// Fraction of trials that must succeed.
    pub required_fraction: f64,
    pub passed: bool,
    pub detail: String,
}

impl LemmaCheck {
    pub fn observed_fraction(&self) -> f64 {
        self.successes as f64 / self.trials.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub seed: RngSeed,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, statement: String, trials: usize, successes: usize, required: f64, detail: String) -> LemmaCheck {
    LemmaCheck {
        name: name.to_string(),
        statement,
        trials,
        successes,
        required_fraction: required,
        passed: successes as f64 >= required * trials as f64,
        detail,
    }
}

const SAMPLING_SWEEP: [(usize, usize); 10] = [
    (100, 10),
    (10, 3),
    (64, 64),
    (200, 12),
    (250, 7),
    (500, 50),
    (37, 5),
    (1000, 12),
    (128, 1),
    (300, 299),
];

/// `‖Π‖₂² = M/p` for uniform sampling matrices across a fixed `(M, p)` sweep.
fn sampling_norm(seed: RngSeed) -> Result<LemmaCheck> {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for (i, &(m, p)) in SAMPLING_SWEEP.iter().enumerate() {
        let pi = uniform_sampling_matrix(m, p, seed.derive(i as u64))?;
        let n2 = spectral_norm(&pi.matrix)?.powi(2);
        let want = m as f64 / p as f64;
        let rel = (n2 - want).abs() / want;
        worst = worst.max(rel);
        if rel <= 1e-12 {
            ok += 1;
        }
    }
    Ok(check(
        "sampling_norm",
        "spectral norm squared of a uniform sampling matrix equals M/p".into(),
        SAMPLING_SWEEP.len(),
        ok,
        1.0,
        format!("max relative deviation {worst:e}"),
    ))
}

/// First `k` columns of the unitary DFT of size `m`: coherence exactly 1.
fn dft_basis(m: usize, k: usize) -> ComplexMatrix {
    let scale = 1.0 / (m as f64).sqrt();
    ComplexMatrix::from_fn(m, k, |i, j| C64::from_polar(scale, 2.0 * PI * (i * j) as f64 / m as f64))
}

/// Smallest `p` satisfying the sampling lemma's threshold
/// `p ≥ (6 + 2η) μ K / (3η²) · ln(K/δ)`.
pub fn sampling_threshold(mu: f64, k: usize, delta: f64) -> usize {
    let kf = k as f64;
    ((6.0 + 2.0 * ETA) * mu * kf / (3.0 * ETA * ETA) * (kf / delta).ln()).ceil() as usize
}

/// Eigenvalues of `U^H Π Π^H U` stay above `1 − η` at the threshold `p`.
fn sampled_gram(seed: RngSeed) -> Result<LemmaCheck> {
    let (m, k, delta, trials) = (400, 5, 0.1, 200);
    let u = dft_basis(m, k);
    let mu = crate::cxmat::coherence(&u)?;
    let p = sampling_threshold(mu, k, delta);
    let mut ok = 0;
    let mut lowest = f64::INFINITY;
    for trial in 0..trials {
        let pi = uniform_sampling_matrix(m, p, seed.derive(1_000_000 + trial as u64))?;
        let g = u.adjoint() * &pi.matrix;
        let gram = HermitianMatrix::new(&g * g.adjoint())?;
        let smallest = *hermitian_eig(&gram)?.eigenvalues.last().expect("K >= 1");
        lowest = lowest.min(smallest);
        if smallest >= 1.0 - ETA {
            ok += 1;
        }
    }
    Ok(check(
        "sampled_gram",
        format!("M={m}, K={k}, mu={mu:.3}, p={p}: eigenvalues of U^H P P^H U >= {}", 1.0 - ETA),
        trials,
        ok,
        1.0 - delta,
        format!("smallest observed eigenvalue {lowest:.4}"),
    ))
}

/// `‖G‖₂ ≤ √M + √K + 10` for an `M x K` standard Gaussian `G`.
fn gaussian_norm(seed: RngSeed) -> Result<LemmaCheck> {
    let (m, k, trials) = (2000, 50, 200);
    let limit = (m as f64).sqrt() + (k as f64).sqrt() + 10.0;
    let mut ok = 0;
    let mut largest = 0.0f64;
    for trial in 0..trials {
        let g = gaussian_matrix(m, k, seed.derive(2_000_000 + trial as u64))?;
        // ‖G‖₂² is the top eigenvalue of the K x K Gram matrix.
        let gram = HermitianMatrix::new(g.adjoint() * &g)?;
        let norm = hermitian_eig(&gram)?.eigenvalues[0].max(0.0).sqrt();
        largest = largest.max(norm);
        if norm <= limit {
            ok += 1;
        }
    }
    Ok(check(
        "gaussian_norm",
        format!("M={m}, K={k}: spectral norm <= sqrt(M) + sqrt(K) + 10 = {limit:.3}"),
        trials,
        ok,
        0.99,
        format!("largest observed norm {largest:.3}"),
    ))
}

/// `σ_K(G) ≥ δ/√K` for a `K x K` standard Gaussian `G`.
fn gaussian_smallest_singular(seed: RngSeed) -> Result<LemmaCheck> {
    let (k, delta, trials) = (20, 0.2, 1000);
    let limit = delta / (k as f64).sqrt();
    let mut ok = 0;
    for trial in 0..trials {
        let g = gaussian_matrix(k, k, seed.derive(3_000_000 + trial as u64))?;
        let s = singular_values(&g)?;
        if s[k - 1] >= limit {
            ok += 1;
        }
    }
    Ok(check(
        "gaussian_smallest_singular",
        format!("K={k}, delta={delta}: smallest singular value >= delta/sqrt(K) = {limit:.4}"),
        trials,
        ok,
        1.0 - delta - 0.05,
        format!("{ok}/{trials} trials above the limit"),
    ))
}

/// Runs all four lemma checks with per-trial seeds derived from `seed`.
pub fn lemma_suite(seed: RngSeed) -> Result<LemmaReport> {
    Ok(LemmaReport {
        seed,
        checks: vec![
            sampling_norm(seed)?,
            sampled_gram(seed)?,
            gaussian_norm(seed)?,
            gaussian_smallest_singular(seed)?,
        ],
    })
}
