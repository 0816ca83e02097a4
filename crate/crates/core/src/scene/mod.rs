//! FMCW beat-signal synthesis for a uniform linear array.
//!
//! A scene of `K` far-field point targets, each with an angle of arrival, a
//! round-trip delay and a complex gain, is rendered into the `M x N` de-chirped
//! and sampled signal matrix `Y` (row `m` holds the samples of antenna `m`).
//! Sample covariances over space and time are formed from `Y`.

pub mod io;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cxmat::{check_finite, ComplexMatrix, ComplexVector, HermitianMatrix, RngSeed, C64};
use crate::error::{invalid, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Waveform and array parameters of an FMCW radar with a ULA receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmcwConfig {
    /// Initial angular frequency of the chirp (rad/s).
    w_s: f64,
    /// Swept angular bandwidth (rad/s).
    w_b: f64,
    /// Chirp duration (s).
    t_sym: f64,
    /// ADC sampling rate (Hz).
    f_s: f64,
    /// Carrier wavelength (m).
    lambda: f64,
    /// Element spacing (m).
    d: f64,
    m: usize,
    n: usize,
}

impl FmcwConfig {
    /// Validates the parameters. `d` defaults to half a wavelength and the
    /// number of samples per chirp is `round(t_sym · f_s)`.
    pub fn new(
        w_s: f64,
        w_b: f64,
        t_sym: f64,
        f_s: f64,
        lambda: f64,
        d: Option<f64>,
        m: usize,
    ) -> Result<Self> {
        let d = d.unwrap_or(lambda / 2.0);
        for (name, v) in [("w_s", w_s), ("w_b", w_b), ("t_sym", t_sym), ("f_s", f_s), ("lambda", lambda), ("d", d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if m == 0 {
            return Err(invalid("antenna count M must be at least 1"));
        }
        let n = (t_sym * f_s).round();
        if n < 1.0 {
            return Err(invalid(format!("t_sym * f_s = {} gives no samples", t_sym * f_s)));
        }
        Ok(Self {
            w_s,
            w_b,
            t_sym,
            f_s,
            lambda,
            d,
            m,
            n: n as usize,
        })
    }

    /// 77 GHz carrier, 1 GHz sweep over a 40 µs chirp, half-wavelength ULA,
    /// with the ADC rate chosen to give exactly `n` samples per chirp.
    pub fn automotive_77ghz(m: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("samples per chirp N must be at least 1"));
        }
        let carrier = 77e9;
        let t_sym = 40e-6;
        Self::new(
            2.0 * PI * carrier,
            2.0 * PI * 1e9,
            t_sym,
            n as f64 / t_sym,
            SPEED_OF_LIGHT / carrier,
            None,
            m,
        )
    }

    pub fn w_s(&self) -> f64 {
        self.w_s
    }
    pub fn w_b(&self) -> f64 {
        self.w_b
    }
    pub fn t_sym(&self) -> f64 {
        self.t_sym
    }
    pub fn f_s(&self) -> f64 {
        self.f_s
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn spacing(&self) -> f64 {
        self.d
    }
    pub fn antennas(&self) -> usize {
        self.m
    }
    pub fn samples(&self) -> usize {
        self.n
    }

    /// Chirp rate `μ = w_B / T_sym` (rad/s²).
    pub fn chirp_rate(&self) -> f64 {
        self.w_b / self.t_sym
    }

    /// `T_s = 1 / f_s`.
    pub fn sample_period(&self) -> f64 {
        1.0 / self.f_s
    }

    /// Delay whose beat tone advances by `omega` radians per ADC sample.
    pub fn delay_for_beat_phase(&self, omega: f64) -> f64 {
        omega / (self.chirp_rate() * self.sample_period())
    }
}

/// One far-field point target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Angle of arrival (rad), strictly inside `(0, π)`.
    pub theta: f64,
    /// Round-trip delay (s).
    pub tau: f64,
    pub alpha: C64,
}

/// Ground-truth targets of one synthetic frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScene {
    targets: Vec<Target>,
    min_separation: f64,
}

/// Default minimum angular separation: two 0.1° grid cells.
pub const DEFAULT_MIN_SEPARATION: f64 = 2.0 * PI / 1800.0;

impl TargetScene {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        Self::with_min_separation(targets, DEFAULT_MIN_SEPARATION)
    }

    pub fn with_min_separation(targets: Vec<Target>, min_separation: f64) -> Result<Self> {
        if targets.is_empty() {
            return Err(invalid("a scene needs at least one target"));
        }
        if !(min_separation >= 0.0 && min_separation.is_finite()) {
            return Err(invalid(format!("invalid minimum separation {min_separation}")));
        }
        for (k, t) in targets.iter().enumerate() {
            if !(t.theta > 0.0 && t.theta < PI) {
                return Err(invalid(format!("target {k}: theta {} outside (0, pi)", t.theta)));
            }
            if !(t.tau >= 0.0 && t.tau.is_finite()) {
                return Err(invalid(format!("target {k}: delay {} must be >= 0", t.tau)));
            }
            if !(t.alpha.re.is_finite() && t.alpha.im.is_finite()) {
                return Err(invalid(format!("target {k}: non-finite gain")));
            }
        }
        for a in 0..targets.len() {
            for b in (a + 1)..targets.len() {
                let gap = (targets[a].theta - targets[b].theta).abs();
                if gap < min_separation {
                    return Err(invalid(format!(
                        "targets {a} and {b} are {gap:.3e} rad apart, below the {min_separation:.3e} rad minimum"
                    )));
                }
            }
        }
        Ok(Self {
            targets,
            min_separation,
        })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// Ground-truth angles in ascending order.
    pub fn sorted_angles(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.targets.iter().map(|t| t.theta).collect();
        a.sort_by(f64::total_cmp);
        a
    }

    /// Total signal power `Σ_k |α_k|²`.
    pub fn signal_power(&self) -> f64 {
        self.targets.iter().map(|t| t.alpha.norm_sqr()).sum()
    }
}

/// Recipe for a randomly drawn scene.
///
/// Angles are uniform on `angle_range` subject to `min_separation`. Each target
/// gets an equal share of the total power `10^(snr_db/10) · noise_var` with a
/// uniform random phase. Delays are chosen so the beat tones are spaced at
/// least two DFT bins apart, which keeps the sources incoherent over one chirp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecipe {
    pub targets: usize,
    pub snr_db: f64,
    pub noise_var: f64,
    pub angle_range: (f64, f64),
    pub min_separation: f64,
}

impl SceneRecipe {
    /// Targets within `[5°, 85°]`, at least 2° apart, unit noise power.
    pub fn new(targets: usize, snr_db: f64) -> Self {
        Self {
            targets,
            snr_db,
            noise_var: 1.0,
            angle_range: (5f64.to_radians(), 85f64.to_radians()),
            min_separation: 2f64.to_radians(),
        }
    }

    /// Per-target gain magnitude.
    pub fn amplitude(&self) -> f64 {
        (10f64.powf(self.snr_db / 10.0) * self.noise_var / self.targets as f64).sqrt()
    }

    pub fn draw(&self, config: &FmcwConfig, seed: RngSeed) -> Result<TargetScene> {
        let k = self.targets;
        if k == 0 {
            return Err(invalid("scene recipe needs at least one target"));
        }
        let (lo, hi) = self.angle_range;
        if !(lo > 0.0 && hi < PI && lo < hi) {
            return Err(invalid(format!("angle range ({lo}, {hi}) must lie inside (0, pi)")));
        }
        let mut rng = seed.rng();
        let thetas = draw_separated(&mut rng, k, lo, hi, self.min_separation)
            .ok_or_else(|| invalid(format!("cannot place {k} targets {} rad apart in ({lo}, {hi})", self.min_separation)))?;
        let n = config.samples() as f64;
        let bin = 2.0 * PI / n;
        let tones = draw_separated(&mut rng, k, 0.05 * PI, 0.95 * PI, 2.0 * bin)
            .ok_or_else(|| invalid(format!("cannot separate {k} beat tones with N = {n}")))?;
        let amp = self.amplitude();
        let targets = thetas
            .into_iter()
            .zip(tones)
            .map(|(theta, omega)| Target {
                theta,
                tau: config.delay_for_beat_phase(omega),
                alpha: C64::from_polar(amp, rng.random_range(0.0..2.0 * PI)),
            })
            .collect();
        TargetScene::with_min_separation(targets, self.min_separation)
    }
}

/// `k` values uniform on `(lo, hi)` with pairwise gaps of at least `sep`,
/// by rejection. `None` when placement keeps failing.
fn draw_separated<R: Rng>(rng: &mut R, k: usize, lo: f64, hi: f64, sep: f64) -> Option<Vec<f64>> {
    for _attempt in 0..1000 {
        let mut picked: Vec<f64> = Vec::with_capacity(k);
        let mut tries = 0;
        while picked.len() < k && tries < 100 * k {
            tries += 1;
            let x = rng.random_range(lo..hi);
            if picked.iter().all(|&y| (x - y).abs() >= sep) {
                picked.push(x);
            }
        }
        if picked.len() == k {
            return Some(picked);
        }
    }
    None
}

/// Unit-modulus phase constants of one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPhases {
    /// Angle-induced phase shift between adjacent elements.
    pub vartheta: C64,
    /// Delay-induced phase shift accumulated over one chirp, `exp(j μ τ T_sym)`.
    pub kappa: C64,
    /// Delay-induced constant phase `exp(j(w_s τ − μτ²/2))`.
    pub rho: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConstants {
    pub per_target: Vec<TargetPhases>,
}

pub fn phase_constants(config: &FmcwConfig, scene: &TargetScene) -> PhaseConstants {
    let mu = config.chirp_rate();
    let per_target = scene
        .targets()
        .iter()
        .map(|t| TargetPhases {
            vartheta: C64::from_polar(1.0, 2.0 * PI / config.lambda() * config.spacing() * t.theta.sin()),
            kappa: C64::from_polar(1.0, mu * t.tau * config.t_sym()),
            rho: C64::from_polar(1.0, -0.5 * mu * t.tau * t.tau + config.w_s() * t.tau),
        })
        .collect();
    PhaseConstants { per_target }
}

/// ULA steering vector, entry `m` = `exp(j 2π d m sin(θ) / λ)`.
pub fn steering_vector(theta: f64, m: usize, d: f64, lambda: f64) -> Result<ComplexVector> {
    if m == 0 || !(d > 0.0) || !(lambda > 0.0) {
        return Err(invalid(format!("steering vector needs M >= 1, d > 0, lambda > 0 (M={m}, d={d}, lambda={lambda})")));
    }
    Ok(steering_unchecked(theta, m, d, lambda))
}

pub(crate) fn steering_unchecked(theta: f64, m: usize, d: f64, lambda: f64) -> ComplexVector {
    let phase = 2.0 * PI * d * theta.sin() / lambda;
    ComplexVector::from_fn(m, |i, _| C64::from_polar(1.0, phase * i as f64))
}

/// The `M x N` de-chirped signal matrix; row `m` holds antenna `m`'s samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    y: ComplexMatrix,
}

impl SignalMatrix {
    pub fn new(y: ComplexMatrix) -> Result<Self> {
        if y.nrows() == 0 || y.ncols() == 0 {
            return Err(invalid("signal matrix must be at least 1x1"));
        }
        check_finite(&y)?;
        Ok(Self { y })
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.y
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.y
    }

    pub fn antennas(&self) -> usize {
        self.y.nrows()
    }

    pub fn samples(&self) -> usize {
        self.y.ncols()
    }
}

/// Renders the noisy beat-signal matrix
///
/// `Y[m, n] = Σ_k α_k exp(j(μ τ_k n T_s + w_s τ_k − μ τ_k²/2)) a_m(θ_k) + noise[m, n]`
///
/// where the noise is circular complex Gaussian with total variance
/// `noise_var` (real and imaginary parts each `noise_var / 2`), drawn from
/// `seed` in column-major order, real part before imaginary part.
pub fn synthesize_beat_signal(
    config: &FmcwConfig,
    scene: &TargetScene,
    noise_var: f64,
    seed: RngSeed,
) -> Result<SignalMatrix> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(invalid(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let (m, n, k) = (config.antennas(), config.samples(), scene.len());
    let mu = config.chirp_rate();
    let ts = config.sample_period();

    let mut steering = ComplexMatrix::zeros(m, k);
    let mut waveforms = ComplexMatrix::zeros(k, n);
    for (j, t) in scene.targets().iter().enumerate() {
        steering.set_column(j, &steering_unchecked(t.theta, m, config.spacing(), config.lambda()));
        let offset = config.w_s() * t.tau - 0.5 * mu * t.tau * t.tau;
        for s in 0..n {
            let phase = mu * t.tau * s as f64 * ts + offset;
            waveforms[(j, s)] = t.alpha * C64::from_polar(1.0, phase);
        }
    }
    let mut y = steering * waveforms;

    if noise_var > 0.0 {
        let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).map_err(|e| invalid(e.to_string()))?;
        let mut rng = seed.rng();
        for z in y.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *z += C64::new(re, im);
        }
    }
    SignalMatrix::new(y)
}

/// Spatial covariance `S = Y Y^H / N` (`M x M`).
pub fn spatial_covariance(y: &SignalMatrix) -> HermitianMatrix {
    let a = y.as_matrix();
    let s = (a * a.adjoint()).unscale(a.ncols() as f64);
    HermitianMatrix::new(s).expect("finite square product")
}

/// Temporal covariance `T = Y^H Y / M` (`N x N`).
pub fn temporal_covariance(y: &SignalMatrix) -> HermitianMatrix {
    let a = y.as_matrix();
    let t = (a.adjoint() * a).unscale(a.nrows() as f64);
    HermitianMatrix::new(t).expect("finite square product")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxmat::{hermitian_eig, projector, qr_orthonormal, singular_values};

    fn config(m: usize, n: usize) -> FmcwConfig {
        FmcwConfig::automotive_77ghz(m, n).unwrap()
    }

    fn target(theta_deg: f64, omega: f64, cfg: &FmcwConfig, alpha: C64) -> Target {
        Target {
            theta: theta_deg.to_radians(),
            tau: cfg.delay_for_beat_phase(omega),
            alpha,
        }
    }

    #[test]
    fn config_derives_rate_and_samples() {
        let cfg = FmcwConfig::new(2.0 * PI * 77e9, 2.0 * PI * 1e9, 40e-6, 5e6, 0.0039, None, 16).unwrap();
        assert_eq!(cfg.samples(), 200);
        assert!((cfg.chirp_rate() - 2.0 * PI * 1e9 / 40e-6).abs() < 1.0);
        assert!((cfg.spacing() - 0.00195).abs() < 1e-15);
        assert!(FmcwConfig::new(1.0, 1.0, 1.0, 1.0, 1.0, Some(-1.0), 4).is_err());
        assert!(FmcwConfig::new(1.0, 1.0, 1.0, 1.0, 1.0, None, 0).is_err());
        assert!(FmcwConfig::new(1.0, 1.0, 0.1, 1.0, 1.0, None, 2).is_err());
    }

    #[test]
    fn scene_validation() {
        let t = |theta: f64| Target { theta, tau: 0.0, alpha: C64::new(1.0, 0.0) };
        assert!(TargetScene::new(vec![]).is_err());
        assert!(TargetScene::new(vec![t(0.0)]).is_err());
        assert!(TargetScene::new(vec![t(PI)]).is_err());
        assert!(TargetScene::new(vec![t(0.5), t(0.5 + 1e-4)]).is_err());
        assert!(TargetScene::new(vec![t(0.5), t(0.6)]).is_ok());
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let a = steering_vector(0.0, 5, 0.5, 1.0).unwrap();
        for z in a.iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_norm_is_m() {
        for theta in [0.1, 0.7, 1.3, 2.9] {
            let a = steering_vector(theta, 37, 0.5, 1.0).unwrap();
            assert!(((a.adjoint() * &a)[(0, 0)].re - 37.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_endfire_alternates() {
        let a = steering_vector(PI / 2.0, 4, 0.5, 1.0).unwrap();
        for (i, want) in [1.0, -1.0, 1.0, -1.0].iter().enumerate() {
            assert!((a[i] - C64::new(*want, 0.0)).norm() < 1e-12);
        }
        assert!(steering_vector(0.3, 0, 0.5, 1.0).is_err());
        assert!(steering_vector(0.3, 4, 0.0, 1.0).is_err());
    }

    #[test]
    fn phase_constants_trivial_cases() {
        let cfg = config(8, 16);
        let scene = TargetScene::new(vec![Target { theta: 1e-9, tau: 0.0, alpha: C64::new(1.0, 0.0) }]).unwrap();
        let pc = phase_constants(&cfg, &scene);
        let p = pc.per_target[0];
        assert!((p.vartheta - C64::new(1.0, 0.0)).norm() < 1e-8);
        assert!((p.kappa - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((p.rho - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_constants_match_scalar_evaluation() {
        let lambda = SPEED_OF_LIGHT / 77e9;
        let t_sym = 40e-6;
        let w_b = 1e12 * t_sym;
        let cfg = FmcwConfig::new(2.0 * PI * 77e9, w_b, t_sym, 5e6, lambda, None, 8).unwrap();
        assert!((cfg.chirp_rate() - 1e12).abs() < 1e-3);
        let scene = TargetScene::new(vec![Target { theta: 0.4, tau: 1e-7, alpha: C64::new(1.0, 0.0) }]).unwrap();
        let p = phase_constants(&cfg, &scene).per_target[0];
        // Independent scalar evaluation.
        let vt = (2.0 * PI / lambda * (lambda / 2.0) * 0.4f64.sin()).rem_euclid(2.0 * PI);
        let ka = (1e12 * 1e-7 * 40e-6f64).rem_euclid(2.0 * PI);
        let rh = (-0.5 * 1e12 * 1e-14 + 2.0 * PI * 77e9 * 1e-7f64).rem_euclid(2.0 * PI);
        assert!((p.vartheta - C64::new(vt.cos(), vt.sin())).norm() < 1e-9);
        assert!((p.kappa - C64::new(ka.cos(), ka.sin())).norm() < 1e-9);
        assert!((p.rho - C64::new(rh.cos(), rh.sin())).norm() < 1e-9);
        for z in [p.vartheta, p.kappa, p.rho] {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_noiseless_target_is_rank_one() {
        let cfg = config(16, 32);
        let scene = TargetScene::new(vec![target(30.0, 0.7, &cfg, C64::new(1.0, 0.0))]).unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 0.0, RngSeed(0)).unwrap();
        let sv = singular_values(y.as_matrix()).unwrap();
        assert!(sv[1] / sv[0] <= 1e-10);
        let a = steering_vector(30f64.to_radians(), 16, cfg.spacing(), cfg.lambda()).unwrap();
        for col in y.as_matrix().column_iter() {
            let coef = col[0] / a[0];
            assert!((col - &a * coef).norm() < 1e-9);
        }
    }

    #[test]
    fn noise_only_statistics() {
        let cfg = config(200, 200);
        let scene = TargetScene::new(vec![target(30.0, 0.7, &cfg, C64::new(0.0, 0.0))]).unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 1.0, RngSeed(5)).unwrap();
        let n = y.as_matrix().len() as f64;
        let mean: C64 = y.as_matrix().iter().sum::<C64>() / n;
        let var: f64 = y.as_matrix().iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn two_noiseless_targets_span_their_steering_vectors() {
        let cfg = config(12, 40);
        let scene = TargetScene::new(vec![
            target(20.0, 0.5, &cfg, C64::new(1.0, 0.3)),
            target(55.0, 1.9, &cfg, C64::new(-0.4, 0.8)),
        ])
        .unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 0.0, RngSeed(0)).unwrap();
        let mut a = ComplexMatrix::zeros(12, 2);
        for (j, deg) in [20.0f64, 55.0].iter().enumerate() {
            a.set_column(j, &steering_vector(deg.to_radians(), 12, cfg.spacing(), cfg.lambda()).unwrap());
        }
        let q = qr_orthonormal(&a).unwrap();
        let resid = (y.as_matrix() - projector(&q) * y.as_matrix()).norm() / y.as_matrix().norm();
        assert!(resid <= 1e-9);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = config(8, 20);
        let scene = SceneRecipe::new(3, 0.0).draw(&cfg, RngSeed(1)).unwrap();
        let a = synthesize_beat_signal(&cfg, &scene, 1.0, RngSeed(9)).unwrap();
        let b = synthesize_beat_signal(&cfg, &scene, 1.0, RngSeed(9)).unwrap();
        assert_eq!(a, b);
        assert!(synthesize_beat_signal(&cfg, &scene, -1.0, RngSeed(9)).is_err());
    }

    #[test]
    fn recipe_draws_valid_separated_scenes() {
        let cfg = config(200, 200);
        let recipe = SceneRecipe::new(11, 0.0);
        let scene = recipe.draw(&cfg, RngSeed(3)).unwrap();
        assert_eq!(scene.len(), 11);
        let angles = scene.sorted_angles();
        assert!(angles.windows(2).all(|w| w[1] - w[0] >= recipe.min_separation));
        assert!((scene.signal_power() - 1.0).abs() < 1e-12);
        assert_eq!(recipe.draw(&cfg, RngSeed(3)).unwrap(), scene);
    }

    #[test]
    fn covariance_of_identity() {
        let y = SignalMatrix::new(ComplexMatrix::identity(2, 2)).unwrap();
        let s = spatial_covariance(&y);
        let t = temporal_covariance(&y);
        assert_eq!(s.as_matrix(), &(ComplexMatrix::identity(2, 2) * C64::new(0.5, 0.0)));
        assert_eq!(t.as_matrix(), &(ComplexMatrix::identity(2, 2) * C64::new(0.5, 0.0)));
    }

    #[test]
    fn covariance_of_repeated_column_is_outer_product() {
        let x = ComplexVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 3.0)]);
        let y = ComplexMatrix::from_fn(3, 5, |i, _| x[i]);
        let s = spatial_covariance(&SignalMatrix::new(y).unwrap());
        assert!((s.as_matrix() - &x * x.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn temporal_covariance_single_row() {
        let mut y = ComplexMatrix::zeros(3, 4);
        let r = [C64::new(1.0, 1.0), C64::new(2.0, 0.0), C64::new(0.0, -1.0), C64::new(0.5, 0.5)];
        for (j, z) in r.iter().enumerate() {
            y[(1, j)] = *z;
        }
        let t = temporal_covariance(&SignalMatrix::new(y).unwrap());
        for a in 0..4 {
            for b in 0..4 {
                let want = r[a].conj() * r[b] / 3.0;
                assert!((t.as_matrix()[(a, b)] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn spatial_covariance_matches_snapshot_sum() {
        let cfg = config(6, 10);
        let scene = SceneRecipe::new(2, 3.0).draw(&cfg, RngSeed(2)).unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 1.0, RngSeed(4)).unwrap();
        let s = spatial_covariance(&y);
        let mut brute = ComplexMatrix::zeros(6, 6);
        for n in 0..10 {
            for i in 0..6 {
                for j in 0..6 {
                    brute[(i, j)] += y.as_matrix()[(i, n)] * y.as_matrix()[(j, n)].conj();
                }
            }
        }
        brute.unscale_mut(10.0);
        assert!((s.as_matrix() - brute).camax() <= 1e-12);
    }

    #[test]
    fn spatial_and_temporal_share_nonzero_spectrum() {
        let cfg = config(4, 7);
        let scene = SceneRecipe::new(2, 0.0).draw(&cfg, RngSeed(6)).unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 1.0, RngSeed(7)).unwrap();
        let s = hermitian_eig(&spatial_covariance(&y)).unwrap().eigenvalues;
        // T = Y^H Y / M, so (M/N)·T has the nonzero spectrum of S = Y Y^H / N.
        let t = hermitian_eig(&temporal_covariance(&y)).unwrap().eigenvalues;
        for i in 0..4 {
            assert!((s[i] - t[i] * 4.0 / 7.0).abs() < 1e-10 * s[0]);
        }
        assert!(t[4..].iter().all(|x| x.abs() < 1e-10 * t[0]));
    }

    #[test]
    fn noiseless_covariance_has_rank_k_and_spans_steering() {
        let cfg = config(24, 60);
        let recipe = SceneRecipe::new(3, 10.0);
        let scene = recipe.draw(&cfg, RngSeed(8)).unwrap();
        let y = synthesize_beat_signal(&cfg, &scene, 0.0, RngSeed(0)).unwrap();
        let eig = hermitian_eig(&spatial_covariance(&y)).unwrap();
        assert!(eig.eigenvalues[3] / eig.eigenvalues[0] <= 1e-9);
        let u = eig.leading(3);
        for t in scene.targets() {
            let a = steering_vector(t.theta, 24, cfg.spacing(), cfg.lambda()).unwrap();
            assert!((&a - &u * (u.adjoint() * &a)).norm() <= 1e-8 * a.norm());
        }
    }

    #[test]
    fn noise_eigenvalues_cluster_at_large_n() {
        // The white-noise eigenvalue spread tends to ((1+√0.1)/(1−√0.1))² ≈ 3.7
        // as M grows with N = 10M, so the ratio-3 cluster only holds for small M.
        let m = 10;
        let cfg = config(m, 10 * m);
        let recipe = SceneRecipe::new(2, 0.0);
        let mut pass = 0;
        for seed in 0..20 {
            let scene = recipe.draw(&cfg, RngSeed(seed)).unwrap();
            let y = synthesize_beat_signal(&cfg, &scene, 1.0, RngSeed(1000 + seed)).unwrap();
            let ev = hermitian_eig(&spatial_covariance(&y)).unwrap().eigenvalues;
            let tail = &ev[2..];
            if tail[0] / tail[tail.len() - 1] <= 3.0 {
                pass += 1;
            }
        }
        assert!(pass >= 18, "{pass}/20 seeds clustered");
    }
}
