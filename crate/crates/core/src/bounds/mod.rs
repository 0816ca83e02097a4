//! Pseudo-spectrum approximation bounds for the randomized estimators and
//! their empirical verification.
//!
//! Every bound compares the exact spectrum `P` with an approximation `P̃`
//! through the per-angle ratio `√(P/P̃)`:
//!
//! - column sampling: `√(P/P̃) ≤ 1 + 2√(M²/p) · gap`;
//! - Gaussian projection with `t` power steps, lower side:
//!   `√(P/P̃) ≤ 1 + (√(M²K)/δ) · gap^{t+1}`;
//! - the same estimator, upper side: `√(P/P̃) ≥ 1 − (√(M²K)/δ) · gap^{t+1}`;
//!
//! where `gap = σ_{K+1}(S)/σ_K(S)`.

mod lemmas;

pub use lemmas::{lemma_suite, LemmaCheck, LemmaReport};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cxmat::{hermitian_eig, HermitianMatrix};
use crate::error::{invalid, Error, Result};
use crate::spectrum::{local_maxima, PeakSet, PseudoSpectrum};

/// Internal constant of the sampling-lemma argument.
pub const ETA: f64 = 0.75;

/// `σ_{K+1}(S) / σ_K(S)`.
pub fn spectral_gap(s: &HermitianMatrix, k: usize) -> Result<f64> {
    let m = s.dim();
    if k == 0 || k + 1 > m {
        return Err(invalid(format!("spectral gap needs 1 <= K < M (K={k}, M={m})")));
    }
    let eig = hermitian_eig(s)?;
    let sigma: Vec<f64> = {
        let mut v: Vec<f64> = eig.eigenvalues.iter().map(|x| x.abs()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    if !(sigma[k - 1] > 1e-14 * sigma[0]) {
        return Err(Error::Precondition(format!(
            "σ_K = {:e} is negligible against σ_1 = {:e}; gap undefined",
            sigma[k - 1], sigma[0]
        )));
    }
    Ok(sigma[k] / sigma[k - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m: usize,
    pub k: usize,
    /// Sketch width.
    pub p: usize,
    /// Power iterations.
    pub t: usize,
    /// Failure probability, in `(0, 1)`.
    pub delta: f64,
    /// `σ_{K+1}/σ_K`, in `[0, 1]`.
    pub gap: f64,
    /// Coherence of the exact signal subspace, `>= 1`.
    pub mu: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.p == 0 {
            return Err(invalid("bound inputs need M, K, p >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta={} must lie in (0, 1)", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.gap) {
            return Err(invalid(format!("gap={} must lie in [0, 1]", self.gap)));
        }
        if !(self.mu >= 1.0 - 1e-12) {
            return Err(invalid(format!("coherence mu={} must be >= 1", self.mu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBound {
    pub kappa: f64,
    /// Whether `p ≥ 4.5 μ K ln(K/δ)`. Reported, never enforced.
    pub sampling_condition_met: bool,
    /// `4.5 μ K ln(K/δ)`.
    pub required_p: f64,
}

/// Column-sampling bound `κ = 1 + 2√(M²/p) · gap`.
pub fn sampling_bound(inputs: &BoundInputs) -> SamplingBound {
    let m = inputs.m as f64;
    let kappa = 1.0 + 2.0 * (m * m / inputs.p as f64).sqrt() * inputs.gap;
    let k = inputs.k as f64;
    let required_p = 4.5 * inputs.mu * k * (k / inputs.delta).ln();
    SamplingBound {
        kappa,
        sampling_condition_met: inputs.p as f64 >= required_p,
        required_p,
    }
}

/// `(√(M²K)/δ) · gap^{t+1}`, shared by both projection bounds.
fn projection_slack(inputs: &BoundInputs) -> f64 {
    let m = inputs.m as f64;
    (m * m * inputs.k as f64).sqrt() / inputs.delta * inputs.gap.powi(inputs.t as i32 + 1)
}

/// Gaussian-projection lower-side bound `κ_l = 1 + (√(M²K)/δ) · gap^{t+1}`.
pub fn sketch_lower_bound(inputs: &BoundInputs) -> f64 {
    1.0 + projection_slack(inputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperSideBound {
    /// `max(0, raw)`.
    pub constant: f64,
    pub raw: f64,
    /// The raw constant was negative, so the bound says nothing.
    pub vacuous: bool,
}

/// Gaussian-projection upper-side constant `1 − (√(M²K)/δ) · gap^{t+1}`.
pub fn sketch_upper_bound(inputs: &BoundInputs) -> UpperSideBound {
    let raw = 1.0 - projection_slack(inputs);
    UpperSideBound {
        constant: raw.max(0.0),
        raw,
        vacuous: raw < 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Column sampling: `√(P/P̃) ≤ κ`.
    SamplingLower,
    /// Gaussian projection: `√(P/P̃) ≤ κ_l`.
    SketchLower,
    /// Gaussian projection: `√(P/P̃) ≥ constant`.
    SketchUpper,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::SamplingLower => "sampling_lower",
            BoundKind::SketchLower => "sketch_lower",
            BoundKind::SketchUpper => "sketch_upper",
        }
    }

    fn is_lower(self) -> bool {
        !matches!(self, BoundKind::SketchUpper)
    }
}

/// One grid point of the ratio scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub theta: f64,
    pub exact: f64,
    pub approx: f64,
}

impl RatioPoint {
    /// `√(P/P̃)`.
    pub fn ratio(&self) -> f64 {
        (self.exact / self.approx).sqrt()
    }
}

/// Empirical check of one bound over one or more spectra pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub kappa: f64,
    pub points: Vec<RatioPoint>,
    pub n_violations: usize,
    /// Largest amount by which a ratio crossed the bound (0 without violations).
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub kind: BoundKind,
    pub kappa: f64,
    pub n_points: usize,
    pub n_violations: usize,
    pub max_excess: f64,
    pub ratio_histogram: Histogram,
}

impl BoundReport {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn violation_fraction(&self) -> f64 {
        if self.points.is_empty() {
            0.0
        } else {
            self.n_violations as f64 / self.points.len() as f64
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.points.iter().map(RatioPoint::ratio).collect()
    }

    /// Pools another report of the same kind and bound value.
    pub fn merge(&mut self, other: &BoundReport) -> Result<()> {
        if other.kind != self.kind || other.kappa != self.kappa {
            return Err(invalid("can only merge reports of the same kind and bound"));
        }
        self.points.extend_from_slice(&other.points);
        self.n_violations += other.n_violations;
        self.max_excess = self.max_excess.max(other.max_excess);
        Ok(())
    }

    /// Equal-width histogram of the ratios over their observed range.
    pub fn histogram(&self, bins: usize) -> Histogram {
        let ratios = self.ratios();
        let bins = bins.max(1);
        if ratios.is_empty() {
            return Histogram { edges: vec![], counts: vec![] };
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for r in ratios {
            let b = (((r - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn summary(&self, bins: usize) -> BoundSummary {
        BoundSummary {
            kind: self.kind,
            kappa: self.kappa,
            n_points: self.n_points(),
            n_violations: self.n_violations,
            max_excess: self.max_excess,
            ratio_histogram: self.histogram(bins),
        }
    }

    /// Scatter rows `theta_deg,sqrt_approx,sqrt_exact_over_kappa,ratio,violation`.
    pub fn write_scatter_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let e = |e: csv::Error| Error::Format(e.to_string());
        wr.write_record(["theta_deg", "sqrt_approx", "sqrt_exact_over_kappa", "ratio", "violation"])
            .map_err(e)?;
        for pt in &self.points {
            let r = pt.ratio();
            wr.write_record(&[
                pt.theta.to_degrees().to_string(),
                pt.approx.sqrt().to_string(),
                (pt.exact.sqrt() / self.kappa).to_string(),
                r.to_string(),
                u8::from(self.violates(r)).to_string(),
            ])
            .map_err(e)?;
        }
        wr.flush()?;
        Ok(())
    }

    fn violates(&self, ratio: f64) -> bool {
        if self.kind.is_lower() {
            ratio > self.kappa
        } else {
            ratio < self.kappa
        }
    }
}

/// Counts grid points where `√(P/P̃)` crosses `bound`.
///
/// Lower kinds violate where the ratio exceeds `bound`; the upper kind
/// violates where it falls below.
pub fn verify_bound(
    exact: &PseudoSpectrum,
    approx: &PseudoSpectrum,
    bound: f64,
    kind: BoundKind,
) -> Result<BoundReport> {
    if exact.grid != approx.grid {
        return Err(Error::GridMismatch);
    }
    let mut report = BoundReport {
        kind,
        kappa: bound,
        points: Vec::with_capacity(exact.values.len()),
        n_violations: 0,
        max_excess: 0.0,
    };
    for (i, (&p, &q)) in exact.values.iter().zip(&approx.values).enumerate() {
        if !(p > 0.0 && q > 0.0) {
            return Err(invalid(format!("spectra must be positive for ratio checks (index {i})")));
        }
        let pt = RatioPoint {
            theta: exact.grid.theta(i),
            exact: p,
            approx: q,
        };
        let r = pt.ratio();
        if report.violates(r) {
            report.n_violations += 1;
            report.max_excess = report.max_excess.max((r - bound).abs());
        }
        report.points.push(pt);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRetention {
    pub exact_index: usize,
    pub theta: f64,
    /// Local maximum of the approximate spectrum inside the window, if any.
    pub approx_index: Option<usize>,
}

impl PeakRetention {
    pub fn retained(&self) -> bool {
        self.approx_index.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// `min_k P(θ_k) / P₀` over the exact peaks.
    pub gamma_hat: f64,
    pub alpha_l: f64,
    /// `1 + α_l < √γ̂`: the bound alone rules out a miss.
    pub no_miss_condition: bool,
    pub peaks: Vec<PeakRetention>,
    /// Approximate-spectrum local maxima outside every peak window whose
    /// height exceeds `SPURIOUS_FACTOR · P₀`.
    pub spurious: Vec<usize>,
}

/// Tolerance on the exact off-peak level before an extra peak counts as spurious.
pub const SPURIOUS_FACTOR: f64 = 1.1;

impl DetectionReport {
    pub fn all_retained(&self) -> bool {
        self.peaks.iter().all(PeakRetention::retained)
    }

    pub fn passed(&self) -> bool {
        self.all_retained() && self.spurious.is_empty()
    }
}

/// Checks that an approximate spectrum keeps the exact spectrum's peaks.
///
/// `peaks` must come from `exact`. Each exact peak is retained when the
/// approximate spectrum has a local maximum within `±peaks.min_separation`
/// cells of it.
pub fn detection_consistency_check(
    exact: &PseudoSpectrum,
    approx: &PseudoSpectrum,
    peaks: &PeakSet,
    kappa_l: f64,
) -> Result<DetectionReport> {
    if exact.grid != approx.grid {
        return Err(Error::GridMismatch);
    }
    let window = peaks.min_separation;
    let p0 = peaks.baseline;
    let gamma_hat = if p0 > 0.0 {
        peaks.peaks.iter().map(|p| exact.values[p.index] / p0).fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    let alpha_l = kappa_l - 1.0;
    let maxima = local_maxima(&approx.values);
    let retained = peaks
        .peaks
        .iter()
        .map(|p| {
            let best = maxima
                .iter()
                .copied()
                .filter(|&i| i.abs_diff(p.index) <= window)
                .max_by(|&a, &b| approx.values[a].total_cmp(&approx.values[b]));
            PeakRetention {
                exact_index: p.index,
                theta: p.theta,
                approx_index: best,
            }
        })
        .collect();
    let spurious = maxima
        .into_iter()
        .filter(|&i| peaks.peaks.iter().all(|p| i.abs_diff(p.index) > window))
        .filter(|&i| approx.values[i] > SPURIOUS_FACTOR * p0)
        .collect();
    Ok(DetectionReport {
        gamma_hat,
        alpha_l,
        no_miss_condition: 1.0 + alpha_l < gamma_hat.sqrt(),
        peaks: retained,
        spurious,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Method;
    use crate::spectrum::{extract_peaks, AngleGrid};
    use proptest::prelude::*;

    fn inputs(gap: f64, t: usize) -> BoundInputs {
        BoundInputs { m: 200, k: 11, p: 12, t, delta: 0.2, gap, mu: 1.0 }
    }

    fn spectrum(values: Vec<f64>) -> PseudoSpectrum {
        PseudoSpectrum::new(AngleGrid::new(values.len()).unwrap(), values, Method::Exact).unwrap()
    }

    #[test]
    fn gap_examples() {
        let s = HermitianMatrix::from_diagonal(&[4.0, 2.0, 1.0]).unwrap();
        assert!((spectral_gap(&s, 2).unwrap() - 0.5).abs() < 1e-12);
        let r = HermitianMatrix::from_diagonal(&[4.0, 2.0, 0.0]).unwrap();
        assert_eq!(spectral_gap(&r, 2).unwrap(), 0.0);
        let z = HermitianMatrix::from_diagonal(&[4.0, 0.0, 0.0]).unwrap();
        assert!(spectral_gap(&z, 2).is_err());
        assert!(spectral_gap(&s, 3).is_err());
    }

    #[test]
    fn sampling_bound_formula() {
        assert_eq!(sampling_bound(&inputs(0.0, 0)).kappa, 1.0);
        let b = sampling_bound(&BoundInputs { gap: 0.01, ..inputs(0.0, 0) });
        // 1 + 2 · 200/√12 · 0.01
        assert!((b.kappa - (1.0 + 4.0 / 12f64.sqrt())).abs() < 1e-12);
        assert!((b.kappa - 2.1547).abs() < 1e-4);
        assert!(!b.sampling_condition_met);
        let easy = sampling_bound(&BoundInputs { p: 200, k: 2, delta: 0.5, ..inputs(0.1, 0) });
        assert!(easy.sampling_condition_met);
    }

    #[test]
    fn projection_bound_formulas() {
        assert_eq!(sketch_lower_bound(&inputs(0.0, 2)), 1.0);
        let want = 1.0 + (40000.0f64 * 11.0).sqrt() / 0.2 * 0.05f64.powi(3);
        assert!((sketch_lower_bound(&inputs(0.05, 2)) - want).abs() < 1e-12);
        assert!((sketch_lower_bound(&inputs(0.05, 2)) - 1.4146).abs() < 1e-4);
        let up = sketch_upper_bound(&inputs(0.05, 2));
        assert!((up.constant - (2.0 - want)).abs() < 1e-12);
        assert!(!up.vacuous);
        assert_eq!(sketch_upper_bound(&inputs(0.0, 2)).constant, 1.0);
        let v = sketch_upper_bound(&inputs(0.9, 0));
        assert!(v.vacuous && v.constant == 0.0 && v.raw < 0.0);
    }

    proptest! {
        #[test]
        fn bounds_are_ordered_and_monotone(gap in 0.0f64..1.0, t in 0usize..6, p in 1usize..200) {
            let b = BoundInputs { p, ..inputs(gap, t) };
            prop_assert!(sampling_bound(&b).kappa >= 1.0);
            prop_assert!(sketch_lower_bound(&b) >= 1.0);
            prop_assert!(sketch_upper_bound(&b).constant <= 1.0);
            let more_p = BoundInputs { p: p + 1, ..b };
            prop_assert!(sampling_bound(&more_p).kappa <= sampling_bound(&b).kappa);
            let more_t = BoundInputs { t: t + 1, ..b };
            prop_assert!(sketch_lower_bound(&more_t) <= sketch_lower_bound(&b));
            prop_assert!(sketch_upper_bound(&more_t).constant >= sketch_upper_bound(&b).constant);
            let smaller_gap = BoundInputs { gap: gap * 0.5, ..b };
            prop_assert!(sampling_bound(&smaller_gap).kappa <= sampling_bound(&b).kappa);
            prop_assert!(sketch_lower_bound(&smaller_gap) <= sketch_lower_bound(&b));
        }

        #[test]
        fn identical_spectra_never_violate(
            values in proptest::collection::vec(1e-3f64..1e3, 4..60),
            kappa in 1.0f64..10.0,
        ) {
            let p = spectrum(values);
            let r = verify_bound(&p, &p, kappa, BoundKind::SamplingLower).unwrap();
            prop_assert_eq!(r.n_violations, 0);
            let u = verify_bound(&p, &p, 1.0 / kappa, BoundKind::SketchUpper).unwrap();
            prop_assert_eq!(u.n_violations, 0);
        }
    }

    #[test]
    fn inverted_bound_flags_everything() {
        let p = spectrum(vec![1.0, 2.0, 3.0, 2.0]);
        let r = verify_bound(&p, &p, 0.5, BoundKind::SketchLower).unwrap();
        assert_eq!(r.n_violations, 4);
        assert!((r.max_excess - 0.5).abs() < 1e-12);
        assert_eq!(r.violation_fraction(), 1.0);
    }

    #[test]
    fn report_merge_histogram_and_csv() {
        let p = spectrum(vec![1.0, 4.0, 1.0, 1.0]);
        let q = spectrum(vec![1.0, 1.0, 1.0, 1.0]);
        let mut a = verify_bound(&p, &q, 1.5, BoundKind::SamplingLower).unwrap();
        assert_eq!(a.n_violations, 1);
        let b = verify_bound(&q, &q, 1.5, BoundKind::SamplingLower).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.n_points(), 8);
        assert_eq!(a.n_violations, 1);
        let h = a.histogram(2);
        assert_eq!(h.counts, vec![7, 1]);
        let json = serde_json::to_value(a.summary(2)).unwrap();
        assert_eq!(json["kind"], "sampling_lower");
        assert_eq!(json["n_points"], 8);
        let mut buf = Vec::new();
        a.write_scatter_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().nth(2).unwrap().ends_with(",1"));
        let other = verify_bound(&q, &q, 2.0, BoundKind::SamplingLower).unwrap();
        assert!(a.clone().merge(&other).is_err());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let p = spectrum(vec![1.0; 5]);
        let q = spectrum(vec![1.0; 6]);
        assert!(matches!(verify_bound(&p, &q, 1.0, BoundKind::SamplingLower), Err(Error::GridMismatch)));
    }

    fn two_peaks() -> PseudoSpectrum {
        let mut v = vec![0.1; 60];
        for (c, h) in [(15usize, 10.0), (40, 8.0)] {
            v[c - 1] = h / 2.0;
            v[c] = h;
            v[c + 1] = h / 2.0;
        }
        v[28] = 0.3;
        spectrum(v)
    }

    #[test]
    fn identical_spectra_are_consistent() {
        let p = two_peaks();
        let peaks = extract_peaks(&p, 2, 3).unwrap();
        let r = detection_consistency_check(&p, &p, &peaks, 1.0).unwrap();
        assert!(r.all_retained() && r.spurious.is_empty() && r.passed());
        assert!((r.gamma_hat - 8.0 / 0.3).abs() < 1e-12);
        assert!(r.no_miss_condition);
    }

    #[test]
    fn flattened_peak_is_a_miss() {
        let p = two_peaks();
        let peaks = extract_peaks(&p, 2, 3).unwrap();
        let mut v = p.values.clone();
        v[38..=42].fill(0.1);
        let q = spectrum(v);
        let r = detection_consistency_check(&p, &q, &peaks, 1.0).unwrap();
        assert!(!r.all_retained());
        assert!(r.peaks[0].retained() && !r.peaks[1].retained());
        assert!(!r.passed());
    }

    #[test]
    fn extra_tall_peak_is_spurious() {
        let p = two_peaks();
        let peaks = extract_peaks(&p, 2, 3).unwrap();
        let mut v = p.values.clone();
        v[52] = 5.0;
        let q = spectrum(v);
        let r = detection_consistency_check(&p, &q, &peaks, 1.0).unwrap();
        assert_eq!(r.spurious, vec![52]);
        // A bump below 1.1 · P₀ is tolerated.
        let mut v = p.values.clone();
        v[52] = 0.32;
        let r = detection_consistency_check(&p, &spectrum(v), &peaks, 1.0).unwrap();
        assert!(r.spurious.is_empty());
    }
}
