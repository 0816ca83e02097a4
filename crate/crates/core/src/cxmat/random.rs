use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, C64};
use crate::error::{invalid, Result};

/// Seed for every randomized routine in the crate.
///
/// A seed drives a ChaCha8 stream (`ChaCha8Rng::seed_from_u64`). Identical
/// seeds and call sequences give bit-identical results on every platform.
/// Independent sub-streams come from [`RngSeed::derive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Sub-seed for stream `stream`, mixed with a SplitMix64 finalizer so
    /// neighbouring seeds and streams do not produce correlated generators.
    pub fn derive(self, stream: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

/// Uniform column-sampling matrix together with the sampled row indices.
#[derive(Debug, Clone)]
pub struct SamplingMatrix {
    /// `M x p`; column `j` is `sqrt(M/p) · e_{indices[j]}`.
    pub matrix: ComplexMatrix,
    pub indices: Vec<usize>,
}

/// Index set of size `p` drawn uniformly without replacement from `0..m`.
pub(crate) fn sample_indices(m: usize, p: usize, seed: RngSeed) -> Result<Vec<usize>> {
    if p == 0 || p > m {
        return Err(invalid(format!("sample size p={p} must lie in 1..={m}")));
    }
    let mut rng = seed.rng();
    Ok(rand::seq::index::sample(&mut rng, m, p).into_vec())
}

/// Draws `p` distinct columns of `sqrt(M/p) · I_M` uniformly at random.
pub fn uniform_sampling_matrix(m: usize, p: usize, seed: RngSeed) -> Result<SamplingMatrix> {
    let indices = sample_indices(m, p, seed)?;
    let scale = C64::new((m as f64 / p as f64).sqrt(), 0.0);
    let mut matrix = ComplexMatrix::zeros(m, p);
    for (j, &i) in indices.iter().enumerate() {
        matrix[(i, j)] = scale;
    }
    Ok(SamplingMatrix { matrix, indices })
}

/// `M x p` matrix of i.i.d. real standard normal entries (zero imaginary part).
///
/// Entries are drawn column by column.
pub fn gaussian_matrix(m: usize, p: usize, seed: RngSeed) -> Result<ComplexMatrix> {
    if m == 0 || p == 0 {
        return Err(invalid(format!("gaussian matrix needs m, p >= 1, got {m}x{p}")));
    }
    let mut rng = seed.rng();
    let mut out = ComplexMatrix::zeros(m, p);
    for j in 0..p {
        for i in 0..m {
            let x: f64 = StandardNormal.sample(&mut rng);
            out[(i, j)] = C64::new(x, 0.0);
        }
    }
    Ok(out)
}
