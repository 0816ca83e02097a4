//! Pseudo-spectra on an angle grid, peak picking and AoA error metrics.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cxmat::{ComplexMatrix, C64};
use crate::error::{invalid, Error, Result};
use crate::estimators::{Method, SubspaceEstimate};

/// Default grid size over `[0, π]`: 0.1° cells.
pub const DEFAULT_GRID_SIZE: usize = 1801;

/// Default peak separation in grid cells.
pub const DEFAULT_MIN_SEPARATION_CELLS: usize = 3;

/// Relative floor on the MUSIC denominator, as a fraction of `M`.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Penalty charged by [`aoa_mse`] for each target without a matching peak.
pub const MISS_PENALTY: f64 = (PI / 2.0) * (PI / 2.0);

/// `len` equally spaced angles from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    start: f64,
    stop: f64,
    len: usize,
}

impl AngleGrid {
    /// Uniform grid over the full `[0, π]` range.
    pub fn new(len: usize) -> Result<Self> {
        Self::over(0.0, PI, len)
    }

    /// Uniform grid over `[0, π/2]`.
    ///
    /// With the `sin θ` steering convention `a(θ) = a(π − θ)`, so every
    /// spectrum over `[0, π]` mirrors about `π/2`; this half is the
    /// unambiguous field of view.
    pub fn field_of_view(len: usize) -> Result<Self> {
        Self::over(0.0, PI / 2.0, len)
    }

    pub fn over(start: f64, stop: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(invalid(format!("angle grid needs at least 2 points, got {len}")));
        }
        if !(start.is_finite() && stop.is_finite() && start < stop) {
            return Err(invalid(format!("angle grid bounds [{start}, {stop}] must be increasing")));
        }
        Ok(Self { start, stop, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn spacing(&self) -> f64 {
        (self.stop - self.start) / (self.len - 1) as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        if i + 1 == self.len {
            self.stop
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.theta(i)).collect()
    }

    /// Index of the grid point closest to `theta` (clamped to the grid).
    pub fn nearest_index(&self, theta: f64) -> usize {
        let x = ((theta - self.start) / self.spacing()).round();
        x.clamp(0.0, (self.len - 1) as f64) as usize
    }
}

/// Non-negative spectrum values sampled on an [`AngleGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSpectrum {
    pub grid: AngleGrid,
    pub values: Vec<f64>,
    pub method: Method,
}

impl PseudoSpectrum {
    pub fn new(grid: AngleGrid, values: Vec<f64>, method: Method) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "spectrum has {} values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!("spectrum value {} at index {i} is not finite and >= 0", values[i])));
        }
        Ok(Self { grid, values, method })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Writes `theta_deg,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let e = |e: csv::Error| Error::Format(e.to_string());
        wr.write_record(["theta_deg", "value"]).map_err(e)?;
        for (i, v) in self.values.iter().enumerate() {
            wr.write_record(&[self.grid.theta(i).to_degrees().to_string(), v.to_string()])
                .map_err(e)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `M x L` matrix whose column `l` is the steering vector at `grid.theta(l)`.
pub fn steering_matrix(grid: &AngleGrid, m: usize, d: f64, lambda: f64) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(m, grid.len());
    for l in 0..grid.len() {
        let phase = 2.0 * PI * d * grid.theta(l).sin() / lambda;
        for i in 0..m {
            a[(i, l)] = C64::from_polar(1.0, phase * i as f64);
        }
    }
    a
}

/// MUSIC pseudo-spectrum `1 / (M − ‖Ũ^H a(θ)‖²)` of an orthonormal basis.
///
/// The denominator is floored at `1e-12 · M`, which caps peaks where `a(θ)`
/// lies numerically inside the signal subspace without moving them.
pub fn music_spectrum(basis: &SubspaceEstimate, grid: &AngleGrid, d: f64, lambda: f64) -> PseudoSpectrum {
    music_spectrum_of_basis(&basis.basis, grid, d, lambda, basis.method)
}

/// As [`music_spectrum`] for a bare `M x K` basis (`K` may be zero).
pub fn music_spectrum_of_basis(
    u: &ComplexMatrix,
    grid: &AngleGrid,
    d: f64,
    lambda: f64,
    method: Method,
) -> PseudoSpectrum {
    let m = u.nrows();
    let mf = m as f64;
    let floor = DENOMINATOR_FLOOR * mf;
    let values = if u.ncols() == 0 {
        vec![1.0 / mf; grid.len()]
    } else {
        let a = steering_matrix(grid, m, d, lambda);
        let proj = u.adjoint() * a;
        proj.column_iter()
            .map(|c| 1.0 / (mf - c.norm_squared()).max(floor))
            .collect()
    };
    PseudoSpectrum::new(*grid, values, method).expect("positive finite values")
}

/// Spectrum `1 / (a^H Q a)` for a Hermitian noise-projector surrogate `Q`.
pub fn projector_spectrum(
    q: &ComplexMatrix,
    grid: &AngleGrid,
    d: f64,
    lambda: f64,
    method: Method,
) -> PseudoSpectrum {
    let m = q.nrows();
    let floor = DENOMINATOR_FLOOR * m as f64;
    let a = steering_matrix(grid, m, d, lambda);
    let qa = q * &a;
    let values = (0..grid.len())
        .map(|l| {
            let quad: C64 = a.column(l).dotc(&qa.column(l));
            1.0 / quad.re.max(floor)
        })
        .collect();
    PseudoSpectrum::new(*grid, values, method).expect("positive finite values")
}

/// Min-max normalized spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSpectrum {
    pub spectrum: PseudoSpectrum,
    /// Set when the input was constant and the output is all zeros.
    pub degenerate: bool,
}

/// `(P − min) / (max − min)`.
pub fn normalize_spectrum(p: &PseudoSpectrum) -> NormalizedSpectrum {
    let (lo, hi) = (p.min(), p.max());
    let range = hi - lo;
    if !(range > 0.0) {
        return NormalizedSpectrum {
            spectrum: PseudoSpectrum { values: vec![0.0; p.values.len()], ..p.clone() },
            degenerate: true,
        };
    }
    let values = p
        .values
        .iter()
        .map(|&v| if v == hi { 1.0 } else { (v - lo) / range })
        .collect();
    NormalizedSpectrum {
        spectrum: PseudoSpectrum { values, ..p.clone() },
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub theta: f64,
    pub height: f64,
}

/// Peaks selected from a spectrum, sorted by angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    /// `P₀`: the highest spectrum value farther than the separation window
    /// from every selected peak (0 when no such point exists).
    pub baseline: f64,
    pub requested: usize,
    pub min_separation: usize,
    /// Fewer than `requested` peaks could be found.
    pub shortfall: bool,
}

impl PeakSet {
    pub fn angles(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.theta).collect()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Selected peaks from highest to lowest.
    pub fn by_height(&self) -> Vec<Peak> {
        let mut p = self.peaks.clone();
        p.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
        p
    }
}

/// Interior local maxima: strictly above both neighbours, with a flat top
/// reported at its leftmost index.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Picks the `k` highest local maxima at least `min_separation` cells apart.
pub fn extract_peaks(p: &PseudoSpectrum, k: usize, min_separation: usize) -> Result<PeakSet> {
    if k == 0 {
        return Err(invalid("extract_peaks needs K >= 1"));
    }
    let mut candidates = local_maxima(&p.values);
    candidates.sort_by(|&a, &b| p.values[b].total_cmp(&p.values[a]).then(a.cmp(&b)));

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for idx in candidates {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(idx) > min_separation) {
            chosen.push(idx);
        }
    }

    let baseline = p
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| chosen.iter().all(|&c| c.abs_diff(*i) > min_separation))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);

    let shortfall = chosen.len() < k;
    chosen.sort_unstable();
    let peaks = chosen
        .into_iter()
        .map(|index| Peak {
            index,
            theta: p.grid.theta(index),
            height: p.values[index],
        })
        .collect();
    Ok(PeakSet {
        peaks,
        baseline,
        requested: k,
        min_separation,
        shortfall,
    })
}

/// Squared AoA error `Σ_k (θ_k − θ̂_k)²` between ground truth and a peak set.
pub fn aoa_mse(truth: &[f64], estimate: &PeakSet) -> f64 {
    aoa_squared_error(truth, &estimate.angles())
}

/// Squared AoA error with both lists sorted and paired in order.
///
/// When the lists differ in length, the order-preserving matching of
/// `min(K, K̂)` pairs with the least cost is used; each unmatched truth
/// costs [`MISS_PENALTY`] and surplus estimates cost nothing.
pub fn aoa_squared_error(truth: &[f64], estimate: &[f64]) -> f64 {
    let mut t = truth.to_vec();
    let mut e = estimate.to_vec();
    t.sort_by(f64::total_cmp);
    e.sort_by(f64::total_cmp);
    let (nt, ne) = (t.len(), e.len());
    if nt == ne {
        return t.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum();
    }
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; ne + 1]; nt + 1];
    dp[0][0] = 0.0;
    for i in 0..=nt {
        for j in 0..=ne {
            let cur = dp[i][j];
            if cur == inf {
                continue;
            }
            if i < nt && j < ne {
                let c = cur + (t[i] - e[j]).powi(2);
                if c < dp[i + 1][j + 1] {
                    dp[i + 1][j + 1] = c;
                }
            }
            if ne < nt && i < nt {
                let c = cur + MISS_PENALTY;
                if c < dp[i + 1][j] {
                    dp[i + 1][j] = c;
                }
            }
            if ne > nt && j < ne && cur < dp[i][j + 1] {
                dp[i][j + 1] = cur;
            }
        }
    }
    dp[nt][ne]
}

/// `Σ_l (P̃(θ_l) − P(θ_l))²`.
pub fn spectrum_sq_error(approx: &PseudoSpectrum, exact: &PseudoSpectrum) -> Result<f64> {
    if approx.grid != exact.grid {
        return Err(Error::GridMismatch);
    }
    Ok(approx
        .values
        .iter()
        .zip(&exact.values)
        .map(|(a, b)| (a - b).powi(2))
        .sum())
}
