//! One runner per experiment kind.
//!
//! Every seed draws its own scene and noise, so seeds run in parallel on the
//! rayon pool and their rows are concatenated in seed order. Runtime scaling is
//! the exception: it runs on the calling thread so timings are not contended.
//!
//! Seed streams: the scene geometry comes from `RngSeed(seed)`, the noise from
//! `derive(1)`, the column sample from `derive(2)` and the Gaussian sketch from
//! `derive(3)`. Sweeps over SNR or sample count therefore keep the target
//! angles of a seed fixed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use fastmusic_core::bounds::{
    detection_consistency_check, lemma_suite, spectral_gap, sampling_bound, sketch_lower_bound, sketch_upper_bound,
    verify_bound, BoundInputs, BoundKind, BoundReport,
};
use fastmusic_core::cxmat::{coherence, HermitianMatrix, RngSeed};
use fastmusic_core::estimators::{
    block_lanczos_subspace, exact_signal_subspace, fast_music_1, fast_music_2, fft_angle_spectrum,
    matrix_inverse_noise_projector, propagator_subspace, Fast1Params, Fast2Params, Method, SubspaceEstimate,
};
use fastmusic_core::scene::{
    io::parse_scene, spatial_covariance, synthesize_beat_signal, FmcwConfig, SceneRecipe, SignalMatrix, TargetScene,
};
use fastmusic_core::spectrum::{
    aoa_mse, extract_peaks, music_spectrum, normalize_spectrum, spectrum_sq_error, AngleGrid, PeakSet,
    PseudoSpectrum, DEFAULT_MIN_SEPARATION_CELLS,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, SceneParams};
use crate::output::{Artifact, ExperimentOutput, FailureRecord, ResultRow};
use crate::BenchError;

/// Runs the experiment described by `cfg` without touching the filesystem
/// (apart from reading `cfg.scene_file`).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    cfg.validate()?;
    let fixed = match &cfg.scene_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("cannot read scene {}: {e}", path.display())))?;
            Some(parse_scene(&text).map_err(|e| BenchError::Config(format!("scene {}: {e}", path.display())))?)
        }
        None => None,
    };
    let ctx = Context {
        cfg,
        fixed: fixed.as_ref(),
    };
    Ok(match cfg.kind {
        ExperimentKind::RuntimeScaling => runtime_scaling(&ctx),
        ExperimentKind::BoundScatter => bound_scatter(&ctx),
        ExperimentKind::RobustK => robust_k(&ctx),
        ExperimentKind::TuneP | ExperimentKind::TuneT => tune(&ctx),
        ExperimentKind::SpectraCompare => spectra_compare(&ctx),
        ExperimentKind::MseVsSnr => mse_vs_snr(&ctx),
        ExperimentKind::LemmaSuite => lemmas(&ctx),
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    fixed: Option<&'a TargetScene>,
}

impl Context<'_> {
    fn kind(&self) -> &'static str {
        self.cfg.kind.as_str()
    }

    /// Full `[0, π]` grid used for spectrum errors and bound ratios.
    fn full_grid(&self) -> AngleGrid {
        AngleGrid::new(self.cfg.grid_size).expect("validated grid size")
    }

    /// `[0, π/2]` half with the same spacing. `sin θ` makes every spectrum
    /// symmetric about broadside, so peaks are picked on this half only.
    fn fov_grid(&self) -> AngleGrid {
        AngleGrid::field_of_view(self.cfg.grid_size.div_ceil(2)).expect("validated grid size")
    }

    fn seed_map<F>(&self, f: F) -> ExperimentOutput
    where
        F: Fn(u64) -> ExperimentOutput + Sync,
    {
        let parts: Vec<ExperimentOutput> = self.cfg.seeds.par_iter().map(|&s| f(s)).collect();
        let mut out = ExperimentOutput::default();
        for p in parts {
            out.extend(p);
        }
        out
    }
}

/// Row factory for one `(parameter point, seed)`.
struct Point<'a> {
    experiment: &'a str,
    parameter: &'a str,
    value: f64,
    seed: u64,
}

impl Point<'_> {
    fn push(&self, out: &mut ExperimentOutput, method: &str, metric: &str, value: f64, seconds: f64) {
        if value.is_finite() {
            out.rows.push(ResultRow {
                experiment: self.experiment.to_string(),
                method: method.to_string(),
                parameter: self.parameter.to_string(),
                parameter_value: self.value,
                seed: self.seed,
                metric: metric.to_string(),
                value,
                seconds,
            });
        } else {
            self.fail(out, method, format!("metric {metric} is not finite ({value})"));
        }
    }

    fn fail(&self, out: &mut ExperimentOutput, method: &str, error: impl ToString) {
        out.failures.push(FailureRecord {
            experiment: self.experiment.to_string(),
            method: method.to_string(),
            parameter: self.parameter.to_string(),
            parameter_value: self.value,
            seed: self.seed,
            error: error.to_string(),
        });
    }
}

/// A synthesized snapshot matrix and its covariance.
struct Trial {
    fmcw: FmcwConfig,
    scene: TargetScene,
    y: SignalMatrix,
    s: HermitianMatrix,
    seed: u64,
}

impl Trial {
    fn d(&self) -> f64 {
        self.fmcw.spacing()
    }

    fn lambda(&self) -> f64 {
        self.fmcw.lambda()
    }

    fn truth(&self) -> Vec<f64> {
        self.scene.sorted_angles()
    }

    fn spectrum(&self, est: &SubspaceEstimate, grid: &AngleGrid) -> PseudoSpectrum {
        music_spectrum(est, grid, self.d(), self.lambda())
    }
}

/// Unit-power noise with the target gains set by `params.snr_db`. A fixed
/// scene keeps its gains and scales the noise instead.
fn make_trial(
    params: &SceneParams,
    fixed: Option<&TargetScene>,
    seed: u64,
) -> Result<(Trial, f64), fastmusic_core::Error> {
    let start = Instant::now();
    let fmcw = FmcwConfig::automotive_77ghz(params.antennas, params.samples)?;
    let (scene, noise_var) = match fixed {
        Some(scene) => (scene.clone(), scene.signal_power() / 10f64.powf(params.snr_db / 10.0)),
        None => {
            let recipe = SceneRecipe::new(params.targets, params.snr_db);
            (recipe.draw(&fmcw, RngSeed(seed))?, recipe.noise_var)
        }
    };
    let y = synthesize_beat_signal(&fmcw, &scene, noise_var, RngSeed(seed).derive(1))?;
    let s = spatial_covariance(&y);
    Ok((
        Trial {
            fmcw,
            scene,
            y,
            s,
            seed,
        },
        start.elapsed().as_secs_f64(),
    ))
}

fn trial_or_fail(ctx: &Context, params: &SceneParams, pt: &Point, out: &mut ExperimentOutput) -> Option<Trial> {
    match make_trial(params, ctx.fixed, pt.seed) {
        Ok((t, secs)) => {
            pt.push(out, "scene", "targets", t.scene.len() as f64, secs);
            Some(t)
        }
        Err(e) => {
            pt.fail(out, "scene", e);
            None
        }
    }
}

fn fast1_params(seed: u64, p: usize) -> Fast1Params {
    Fast1Params {
        p,
        seed: RngSeed(seed).derive(2),
    }
}

fn fast2_params(seed: u64, p: usize, t: usize) -> Fast2Params {
    Fast2Params {
        p,
        t,
        seed: RngSeed(seed).derive(3),
    }
}

/// Zero-padded FFT length for the beamformer baseline.
fn fft_len(m: usize) -> usize {
    (8 * m).next_power_of_two()
}

/// Krylov steps allowed to block Lanczos: enough to span the whole space.
fn lanczos_steps(m: usize, block: usize) -> usize {
    m.div_ceil(block) + 1
}

/// Estimator settings shared by the spectrum-producing experiments.
#[derive(Clone, Copy)]
struct Knobs {
    k: usize,
    fast1_p: usize,
    fast2_p: usize,
    t: usize,
}

/// Runs `method` on `trial` and evaluates its spectrum on `grid`.
/// Returns the spectrum and the estimator's own cost in seconds.
fn method_spectrum(
    method: Method,
    trial: &Trial,
    knobs: Knobs,
    grid: &AngleGrid,
) -> Result<(PseudoSpectrum, f64), fastmusic_core::Error> {
    let k = knobs.k;
    let sub = |est: SubspaceEstimate| {
        let cost = est.cost;
        (trial.spectrum(&est, grid), cost)
    };
    Ok(match method {
        Method::Exact => sub(exact_signal_subspace(&trial.s, k)?),
        Method::Fast1 => sub(fast_music_1(&trial.s, k, fast1_params(trial.seed, knobs.fast1_p))?),
        Method::Fast2 => sub(fast_music_2(&trial.s, k, fast2_params(trial.seed, knobs.fast2_p, knobs.t))?),
        Method::Lanczos => sub(block_lanczos_subspace(
            &trial.s,
            k,
            k,
            lanczos_steps(trial.s.dim(), k),
        )?),
        Method::Propagator => sub(propagator_subspace(&trial.y, k)?),
        Method::MatrixInverse => {
            let est = matrix_inverse_noise_projector(&trial.s, k)?;
            (est.spectrum(grid, trial.d(), trial.lambda()), est.cost)
        }
        Method::Fft => {
            let start = Instant::now();
            let p = fft_angle_spectrum(&trial.y, grid, fft_len(trial.s.dim()), trial.d(), trial.lambda())?;
            (p, start.elapsed().as_secs_f64())
        }
    })
}

/// Records the detection check of `approx` against the exact spectrum's peaks.
fn push_detection(
    out: &mut ExperimentOutput,
    pt: &Point,
    method: &str,
    exact: &PseudoSpectrum,
    approx: &PseudoSpectrum,
    peaks: &PeakSet,
    kappa_l: f64,
) {
    match detection_consistency_check(exact, approx, peaks, kappa_l) {
        Ok(r) => {
            let retained = r.peaks.iter().filter(|p| p.retained()).count();
            pt.push(out, method, "detection_passed", f64::from(u8::from(r.passed())), 0.0);
            pt.push(out, method, "peaks_retained", retained as f64, 0.0);
            pt.push(out, method, "spurious_peaks", r.spurious.len() as f64, 0.0);
            pt.push(out, method, "gamma_hat", r.gamma_hat, 0.0);
            pt.push(out, method, "no_miss_condition", f64::from(u8::from(r.no_miss_condition)), 0.0);
        }
        Err(e) => pt.fail(out, method, e),
    }
}

/// Gap and coherence of a trial, the inputs shared by all three bounds.
fn bound_inputs(trial: &Trial, exact: &SubspaceEstimate, p: usize, t: usize, delta: f64) -> Result<BoundInputs, fastmusic_core::Error> {
    let inputs = BoundInputs {
        m: trial.s.dim(),
        k: exact.rank(),
        p,
        t,
        delta,
        gap: spectral_gap(&trial.s, exact.rank())?,
        mu: coherence(&exact.basis)?,
    };
    inputs.validate()?;
    Ok(inputs)
}

fn bound_scatter(ctx: &Context) -> ExperimentOutput {
    let cfg = ctx.cfg;
    let (full, fov) = (ctx.full_grid(), ctx.fov_grid());
    let k = cfg.scene.targets;
    let mut out = ExperimentOutput::default();
    for &snr in &cfg.sweep {
        let params = SceneParams { snr_db: snr, ..cfg.scene };
        let per_seed: Vec<(ExperimentOutput, Vec<BoundReport>)> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let pt = Point {
                    experiment: ctx.kind(),
                    parameter: "snr_db",
                    value: snr,
                    seed,
                };
                let mut o = ExperimentOutput::default();
                let mut reports = Vec::new();
                let Some(trial) = trial_or_fail(ctx, &params, &pt, &mut o) else {
                    return (o, reports);
                };
                let run = || -> Result<_, fastmusic_core::Error> {
                    let exact = exact_signal_subspace(&trial.s, k)?;
                    let f1 = fast_music_1(&trial.s, k, fast1_params(seed, cfg.fast1_p))?;
                    let f2 = fast_music_2(&trial.s, k, fast2_params(seed, cfg.fast2_p, cfg.power_iterations))?;
                    let inputs = bound_inputs(&trial, &exact, cfg.fast1_p, cfg.power_iterations, cfg.delta)?;
                    Ok((exact, f1, f2, inputs))
                };
                let (exact, f1, f2, inputs) = match run() {
                    Ok(v) => v,
                    Err(e) => {
                        pt.fail(&mut o, "exact", e);
                        return (o, reports);
                    }
                };
                let sampling = sampling_bound(&inputs);
                let sketch_lower = sketch_lower_bound(&BoundInputs { p: cfg.fast2_p, ..inputs });
                let sketch_upper = sketch_upper_bound(&BoundInputs { p: cfg.fast2_p, ..inputs });
                pt.push(&mut o, "exact", "gap", inputs.gap, exact.cost);
                pt.push(&mut o, "exact", "coherence", inputs.mu, 0.0);
                pt.push(&mut o, "fast1", "sampling_condition_met", f64::from(u8::from(sampling.sampling_condition_met)), f1.cost);
                pt.push(&mut o, "fast2", "sketch_upper_vacuous", f64::from(u8::from(sketch_upper.vacuous)), f2.cost);

                let p_exact = trial.spectrum(&exact, &full);
                let p1 = trial.spectrum(&f1, &full);
                let p2 = trial.spectrum(&f2, &full);
                let checks = [
                    ("fast1", &p1, sampling.kappa, BoundKind::SamplingLower),
                    ("fast2", &p2, sketch_lower, BoundKind::SketchLower),
                    ("fast2", &p2, sketch_upper.constant, BoundKind::SketchUpper),
                ];
                for (method, approx, bound, kind) in checks {
                    match verify_bound(&p_exact, approx, bound, kind) {
                        Ok(r) => {
                            let name = kind.as_str();
                            pt.push(&mut o, method, &format!("{name}_bound"), bound, 0.0);
                            pt.push(&mut o, method, &format!("{name}_violation_fraction"), r.violation_fraction(), 0.0);
                            pt.push(&mut o, method, &format!("{name}_violations"), r.n_violations as f64, 0.0);
                            pt.push(&mut o, method, &format!("{name}_max_excess"), r.max_excess, 0.0);
                            reports.push(r);
                        }
                        Err(e) => pt.fail(&mut o, method, e),
                    }
                }

                let e_fov = trial.spectrum(&exact, &fov);
                match extract_peaks(&e_fov, k, DEFAULT_MIN_SEPARATION_CELLS) {
                    Ok(peaks) => {
                        push_detection(&mut o, &pt, "fast1", &e_fov, &trial.spectrum(&f1, &fov), &peaks, sampling.kappa);
                        push_detection(&mut o, &pt, "fast2", &e_fov, &trial.spectrum(&f2, &fov), &peaks, sketch_lower);
                    }
                    Err(e) => pt.fail(&mut o, "exact", e),
                }
                (o, reports)
            })
            .collect();

        let mut merged: BTreeMap<&'static str, BoundReport> = BTreeMap::new();
        for (o, reports) in per_seed {
            out.extend(o);
            for r in reports {
                // The bound varies per seed, so the merged report keeps each
                // seed's points and violations but only the first κ.
                match merged.get_mut(r.kind.as_str()) {
                    Some(m) => {
                        m.n_violations += r.n_violations;
                        m.max_excess = m.max_excess.max(r.max_excess);
                        m.points.extend(r.points);
                    }
                    None => {
                        merged.insert(r.kind.as_str(), r);
                    }
                }
            }
        }
        for (name, report) in merged {
            let mut csv = Vec::new();
            if report.write_scatter_csv(&mut csv).is_ok() {
                out.artifacts.push(Artifact {
                    file_name: format!("bound_scatter_{name}_snr{snr}.csv"),
                    contents: csv,
                });
            }
            if let Ok(json) = serde_json::to_vec_pretty(&report.summary(20)) {
                out.artifacts.push(Artifact {
                    file_name: format!("bound_summary_{name}_snr{snr}.json"),
                    contents: json,
                });
            }
        }
    }
    out
}

fn tune(ctx: &Context) -> ExperimentOutput {
    let cfg = ctx.cfg;
    let (full, fov) = (ctx.full_grid(), ctx.fov_grid());
    let k = cfg.scene.targets;
    let sweep_p = cfg.kind == ExperimentKind::TuneP;
    let param = cfg.kind.sweep_parameter();
    let mut out = ctx.seed_map(|seed| {
        let mut o = ExperimentOutput::default();
        let base = Point {
            experiment: ctx.kind(),
            parameter: param,
            value: f64::NAN,
            seed,
        };
        let Some(trial) = trial_or_fail(ctx, &cfg.scene, &Point { value: 0.0, ..base }, &mut o) else {
            return o;
        };
        let prepared = (|| -> Result<_, fastmusic_core::Error> {
            let exact = exact_signal_subspace(&trial.s, k)?;
            let e_full = trial.spectrum(&exact, &full);
            let e_fov = trial.spectrum(&exact, &fov);
            let peaks = extract_peaks(&e_fov, k, DEFAULT_MIN_SEPARATION_CELLS)?;
            let inputs = bound_inputs(&trial, &exact, cfg.fast1_p, cfg.power_iterations, cfg.delta)?;
            Ok((e_full, e_fov, peaks, inputs))
        })();
        let (e_full, e_fov, peaks, inputs) = match prepared {
            Ok(v) => v,
            Err(e) => {
                Point { value: 0.0, ..base }.fail(&mut o, "exact", e);
                return o;
            }
        };
        let e_norm = normalize_spectrum(&e_full).spectrum;
        for &v in &cfg.sweep {
            let pt = Point { value: v, ..base };
            let n = v as usize;
            let (method, est, kappa_l) = if sweep_p {
                let b = sampling_bound(&BoundInputs { p: n, ..inputs }).kappa;
                ("fast1", fast_music_1(&trial.s, k, fast1_params(seed, n)), b)
            } else {
                let b = sketch_lower_bound(&BoundInputs { p: cfg.fast2_p, t: n, ..inputs });
                ("fast2", fast_music_2(&trial.s, k, fast2_params(seed, cfg.fast2_p, n)), b)
            };
            let est = match est {
                Ok(e) => e,
                Err(e) => {
                    pt.fail(&mut o, method, e);
                    continue;
                }
            };
            let a_full = trial.spectrum(&est, &full);
            match spectrum_sq_error(&a_full, &e_full) {
                Ok(err) => pt.push(&mut o, method, "spectrum_sq_error", err, est.cost),
                Err(e) => pt.fail(&mut o, method, e),
            }
            match spectrum_sq_error(&normalize_spectrum(&a_full).spectrum, &e_norm) {
                Ok(err) => pt.push(&mut o, method, "normalized_sq_error", err, est.cost),
                Err(e) => pt.fail(&mut o, method, e),
            }
            push_detection(&mut o, &pt, method, &e_fov, &trial.spectrum(&est, &fov), &peaks, kappa_l);
        }
        o
    });
    let table = summary_table(&out.rows, &["spectrum_sq_error", "normalized_sq_error"]);
    out.artifacts.push(Artifact {
        file_name: format!("{}_summary.csv", cfg.kind),
        contents: table.into_bytes(),
    });
    out
}

/// Indices of `truth` angles on `grid`.
fn nearest_indices(grid: &AngleGrid, angles: &[f64]) -> Vec<usize> {
    angles.iter().map(|&a| grid.nearest_index(a)).collect()
}

/// How many `reference` indices have a selected peak within `cells`.
fn retained_within(reference: &[usize], peaks: &PeakSet, cells: usize) -> usize {
    reference
        .iter()
        .filter(|&&r| peaks.peaks.iter().any(|p| p.index.abs_diff(r) <= cells))
        .count()
}

fn robust_k(ctx: &Context) -> ExperimentOutput {
    let cfg = ctx.cfg;
    let (full, fov) = (ctx.full_grid(), ctx.fov_grid());
    let k = cfg.scene.targets;
    let mut out = ctx.seed_map(|seed| {
        let mut o = ExperimentOutput::default();
        let base = Point {
            experiment: ctx.kind(),
            parameter: "guessed_k",
            value: k as f64,
            seed,
        };
        let Some(trial) = trial_or_fail(ctx, &cfg.scene, &base, &mut o) else {
            return o;
        };
        let prepared = (|| -> Result<_, fastmusic_core::Error> {
            let exact = exact_signal_subspace(&trial.s, k)?;
            let e_fov = trial.spectrum(&exact, &fov);
            let peaks = extract_peaks(&e_fov, k, DEFAULT_MIN_SEPARATION_CELLS)?;
            Ok((trial.spectrum(&exact, &full), peaks))
        })();
        let (e_full, exact_peaks) = match prepared {
            Ok(v) => v,
            Err(e) => {
                base.fail(&mut o, "exact", e);
                return o;
            }
        };
        let reference: Vec<usize> = exact_peaks.peaks.iter().map(|p| p.index).collect();
        let truth_idx = nearest_indices(&fov, &trial.truth());
        base.push(&mut o, "exact", "peaks_on_truth", retained_within(&truth_idx, &exact_peaks, 1) as f64, 0.0);
        for &v in &cfg.sweep {
            let guess = v as usize;
            let pt = Point { value: v, ..base };
            if guess >= trial.s.dim() {
                pt.fail(&mut o, "fast1", format!("guessed K={guess} needs fewer than M antennas"));
                continue;
            }
            let p = ((1.2 * guess as f64).round() as usize).clamp(guess, trial.s.dim());
            let est = match fast_music_1(&trial.s, guess, fast1_params(seed, p)) {
                Ok(e) => e,
                Err(e) => {
                    pt.fail(&mut o, "fast1", e);
                    continue;
                }
            };
            let a_full = trial.spectrum(&est, &full);
            match spectrum_sq_error(&a_full, &e_full) {
                Ok(err) => pt.push(&mut o, "fast1", "spectrum_sq_error", err, est.cost),
                Err(e) => pt.fail(&mut o, "fast1", e),
            }
            match extract_peaks(&trial.spectrum(&est, &fov), guess, DEFAULT_MIN_SEPARATION_CELLS) {
                Ok(peaks) => {
                    let kept = retained_within(&reference, &peaks, 1);
                    pt.push(&mut o, "fast1", "sketch_width", p as f64, 0.0);
                    pt.push(&mut o, "fast1", "peaks_retained", kept as f64, est.cost);
                    pt.push(&mut o, "fast1", "all_retained", f64::from(u8::from(kept == reference.len())), 0.0);
                    pt.push(&mut o, "fast1", "shortfall", f64::from(u8::from(peaks.len() < k)), 0.0);
                }
                Err(e) => pt.fail(&mut o, "fast1", e),
            }
        }
        o
    });
    let table = summary_table(&out.rows, &["peaks_retained", "all_retained", "spectrum_sq_error"]);
    out.artifacts.push(Artifact {
        file_name: "robust_k_summary.csv".into(),
        contents: table.into_bytes(),
    });
    out
}

/// The truth pair with the smallest separation, as sorted angles.
fn closest_pair(truth: &[f64]) -> Option<(f64, f64)> {
    truth
        .windows(2)
        .min_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])))
        .map(|w| (w[0], w[1]))
}

/// Both members of a pair are resolved when each has its own peak closer
/// than half their separation.
fn pair_resolved(peaks: &PeakSet, (a, b): (f64, f64)) -> bool {
    let half = 0.5 * (b - a);
    let near = |x: f64| peaks.peaks.iter().position(|p| (p.theta - x).abs() < half);
    matches!((near(a), near(b)), (Some(i), Some(j)) if i != j)
}

/// One seed's rows, its exact-MUSIC peak cells and its per-method spectra.
type SeedSpectra = (ExperimentOutput, Option<Vec<usize>>, Vec<(Method, PseudoSpectrum)>);

fn spectra_compare(ctx: &Context) -> ExperimentOutput {
    let cfg = ctx.cfg;
    let fov = ctx.fov_grid();
    let k = cfg.scene.targets;
    let knobs = Knobs {
        k,
        fast1_p: cfg.fast1_p,
        fast2_p: cfg.fast2_p,
        t: cfg.power_iterations,
    };
    let mut out = ExperimentOutput::default();
    let mut csv = String::from("samples,method,theta_deg,normalized_value\n");
    // Exact peak indices per seed at the first sample count.
    let mut first_peaks: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (n_idx, &n) in cfg.sweep.iter().enumerate() {
        let params = SceneParams {
            samples: n as usize,
            ..cfg.scene
        };
        let parts: Vec<SeedSpectra> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let pt = Point {
                    experiment: ctx.kind(),
                    parameter: "samples",
                    value: n,
                    seed,
                };
                let mut o = ExperimentOutput::default();
                let Some(trial) = trial_or_fail(ctx, &params, &pt, &mut o) else {
                    return (o, None, Vec::new());
                };
                let truth = trial.truth();
                let pair = closest_pair(&truth);
                let mut exact_norm = None;
                let mut exact_peaks = None;
                let mut spectra = Vec::new();
                let methods = std::iter::once(Method::Exact).chain(cfg.estimators.iter().copied().filter(|m| *m != Method::Exact));
                for method in methods {
                    let name = method.as_str();
                    let (spec, cost) = match method_spectrum(method, &trial, knobs, &fov) {
                        Ok(v) => v,
                        Err(e) => {
                            pt.fail(&mut o, name, e);
                            continue;
                        }
                    };
                    let norm = normalize_spectrum(&spec).spectrum;
                    let peaks = match extract_peaks(&spec, k, DEFAULT_MIN_SEPARATION_CELLS) {
                        Ok(p) => p,
                        Err(e) => {
                            pt.fail(&mut o, name, e);
                            continue;
                        }
                    };
                    pt.push(&mut o, name, "aoa_mse", aoa_mse(&truth, &peaks), cost);
                    pt.push(&mut o, name, "peaks_found", peaks.len() as f64, 0.0);
                    if let Some(pair) = pair {
                        pt.push(&mut o, name, "closest_pair_resolved", f64::from(u8::from(pair_resolved(&peaks, pair))), 0.0);
                    }
                    if method == Method::Exact {
                        exact_peaks = Some(peaks.peaks.iter().map(|p| p.index).collect::<Vec<_>>());
                        exact_norm = Some(norm.clone());
                    } else if let (Some(reference), Some(idx)) = (&exact_norm, &exact_peaks) {
                        let diff = idx
                            .iter()
                            .map(|&i| (norm.values[i] - reference.values[i]).abs())
                            .fold(0.0, f64::max);
                        pt.push(&mut o, name, "peak_max_abs_diff", diff, 0.0);
                    }
                    if cfg.estimators.contains(&method) {
                        spectra.push((method, norm));
                    }
                }
                (o, exact_peaks, spectra)
            })
            .collect();
        for ((mut o, peaks, spectra), &seed) in parts.into_iter().zip(&cfg.seeds) {
            if let Some(peaks) = peaks {
                if n_idx == 0 {
                    first_peaks.insert(seed, peaks);
                } else if let Some(first) = first_peaks.get(&seed) {
                    if first.len() == peaks.len() {
                        let shift = first.iter().zip(&peaks).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
                        let pt = Point {
                            experiment: ctx.kind(),
                            parameter: "samples",
                            value: n,
                            seed,
                        };
                        pt.push(&mut o, "exact", "peak_shift_cells_vs_first", shift as f64, 0.0);
                    }
                }
            }
            if seed == cfg.seeds[0] {
                for (method, spec) in spectra {
                    for (theta, v) in spec.grid.thetas().into_iter().zip(&spec.values) {
                        let _ = writeln!(csv, "{n},{method},{:.6},{v:.9e}", theta.to_degrees());
                    }
                }
            }
            out.extend(o);
        }
    }
    out.artifacts.push(Artifact {
        file_name: "spectra_compare_spectra.csv".into(),
        contents: csv.into_bytes(),
    });
    let table = summary_table(&out.rows, &["aoa_mse", "peak_max_abs_diff", "closest_pair_resolved"]);
    out.artifacts.push(Artifact {
        file_name: "spectra_compare_summary.csv".into(),
        contents: table.into_bytes(),
    });
    out
}

fn mse_vs_snr(ctx: &Context) -> ExperimentOutput {
    let cfg = ctx.cfg;
    let fov = ctx.fov_grid();
    let k = cfg.scene.targets;
    let knobs = Knobs {
        k,
        fast1_p: cfg.fast1_p,
        fast2_p: cfg.fast2_p,
        t: cfg.power_iterations,
    };
    let mut out = ExperimentOutput::default();
    for &snr in &cfg.sweep {
        let params = SceneParams { snr_db: snr, ..cfg.scene };
        out.extend(ctx.seed_map(|seed| {
            let pt = Point {
                experiment: ctx.kind(),
                parameter: "snr_db",
                value: snr,
                seed,
            };
            let mut o = ExperimentOutput::default();
            let Some(trial) = trial_or_fail(ctx, &params, &pt, &mut o) else {
                return o;
            };
            let truth = trial.truth();
            let mut exact: Option<(PseudoSpectrum, PeakSet)> = None;
            let mut fast = Vec::new();
            let methods = std::iter::once(Method::Exact).chain(cfg.estimators.iter().copied().filter(|m| *m != Method::Exact));
            for method in methods {
                let name = method.as_str();
                let result = method_spectrum(method, &trial, knobs, &fov)
                    .and_then(|(spec, cost)| Ok((extract_peaks(&spec, k, DEFAULT_MIN_SEPARATION_CELLS)?, spec, cost)));
                let (peaks, spec, cost) = match result {
                    Ok(v) => v,
                    Err(e) => {
                        pt.fail(&mut o, name, e);
                        continue;
                    }
                };
                if cfg.estimators.contains(&method) {
                    pt.push(&mut o, name, "aoa_mse", aoa_mse(&truth, &peaks), cost);
                }
                match method {
                    Method::Exact => exact = Some((spec, peaks)),
                    Method::Fast1 | Method::Fast2 => fast.push((method, spec)),
                    _ => {}
                }
            }
            if let Some((e_spec, e_peaks)) = &exact {
                let kappa = exact_signal_subspace(&trial.s, k)
                    .and_then(|ex| bound_inputs(&trial, &ex, cfg.fast1_p, cfg.power_iterations, cfg.delta));
                for (method, spec) in &fast {
                    let kappa_l = match (&kappa, method) {
                        (Ok(inp), Method::Fast1) => sampling_bound(inp).kappa,
                        (Ok(inp), _) => sketch_lower_bound(&BoundInputs { p: cfg.fast2_p, ..*inp }),
                        (Err(_), _) => f64::INFINITY,
                    };
                    push_detection(&mut o, &pt, method.as_str(), e_spec, spec, e_peaks, kappa_l);
                }
            }
            o
        }));
    }
    let table = summary_table(&out.rows, &["aoa_mse"]);
    out.artifacts.push(Artifact {
        file_name: "mse_vs_snr_summary.csv".into(),
        contents: table.into_bytes(),
    });
    out
}

/// Methods timed by the runtime experiment, one subspace extraction each.
fn time_method(method: Method, trial: &Trial, knobs: Knobs, rep: u64) -> Result<f64, fastmusic_core::Error> {
    let seed = RngSeed(trial.seed).derive(100 + rep).0;
    let (s, k) = (&trial.s, knobs.k);
    Ok(match method {
        Method::Exact => exact_signal_subspace(s, k)?.cost,
        Method::Fast1 => fast_music_1(s, k, fast1_params(seed, knobs.fast1_p))?.cost,
        Method::Fast2 => fast_music_2(s, k, fast2_params(seed, knobs.fast2_p, knobs.t))?.cost,
        Method::Lanczos => block_lanczos_subspace(s, k, k, lanczos_steps(s.dim(), k))?.cost,
        Method::Propagator => propagator_subspace(&trial.y, k)?.cost,
        Method::MatrixInverse => matrix_inverse_noise_projector(s, k)?.cost,
        Method::Fft => {
            let grid = AngleGrid::field_of_view(2).expect("two-point grid");
            let start = Instant::now();
            fft_angle_spectrum(&trial.y, &grid, fft_len(s.dim()), trial.d(), trial.lambda())?;
            start.elapsed().as_secs_f64()
        }
    })
}

/// Default repetition count: 100, cut to 20 at the largest arrays.
fn default_repetitions(m: usize) -> usize {
    if m >= 2000 {
        20
    } else {
        100
    }
}

fn runtime_scaling(ctx: &Context) -> ExperimentOutput {
    let cfg = ctx.cfg;
    let mut out = ExperimentOutput::default();
    for &v in &cfg.sweep {
        let m = v as usize;
        let params = SceneParams {
            antennas: m,
            samples: m,
            ..cfg.scene
        };
        let knobs = Knobs {
            k: params.targets,
            fast1_p: cfg.fast1_p,
            fast2_p: cfg.fast2_p,
            t: cfg.power_iterations,
        };
        let trials: Vec<Trial> = cfg
            .seeds
            .iter()
            .filter_map(|&seed| {
                let pt = Point {
                    experiment: ctx.kind(),
                    parameter: "antennas",
                    value: v,
                    seed,
                };
                trial_or_fail(ctx, &params, &pt, &mut out)
            })
            .collect();
        if trials.is_empty() {
            continue;
        }
        let reps = cfg.repetitions.unwrap_or_else(|| default_repetitions(m));
        for &method in &cfg.estimators {
            // One untimed warm-up, on a sketch seed no timed repetition uses,
            // so allocator and cache effects stay out of the first sample.
            let _ = time_method(method, &trials[0], knobs, reps as u64);
            for rep in 0..reps {
                let trial = &trials[rep % trials.len()];
                let pt = Point {
                    experiment: ctx.kind(),
                    parameter: "antennas",
                    value: v,
                    seed: trial.seed,
                };
                match time_method(method, trial, knobs, rep as u64) {
                    Ok(secs) => pt.push(&mut out, method.as_str(), "subspace_seconds", secs, secs),
                    Err(e) => pt.fail(&mut out, method.as_str(), e),
                }
            }
        }
    }
    let table = summary_table(&out.rows, &["subspace_seconds"]);
    out.artifacts.push(Artifact {
        file_name: "runtime_scaling_summary.csv".into(),
        contents: table.into_bytes(),
    });
    out
}

fn lemmas(ctx: &Context) -> ExperimentOutput {
    ctx.seed_map(|seed| {
        let pt = Point {
            experiment: ctx.kind(),
            parameter: "none",
            value: 0.0,
            seed,
        };
        let mut o = ExperimentOutput::default();
        let start = Instant::now();
        match lemma_suite(RngSeed(seed)) {
            Ok(report) => {
                let secs = start.elapsed().as_secs_f64();
                for c in &report.checks {
                    pt.push(&mut o, &c.name, "observed_fraction", c.observed_fraction(), secs);
                    pt.push(&mut o, &c.name, "required_fraction", c.required_fraction, 0.0);
                    pt.push(&mut o, &c.name, "trials", c.trials as f64, 0.0);
                    pt.push(&mut o, &c.name, "passed", f64::from(u8::from(c.passed)), 0.0);
                }
                if let Ok(json) = serde_json::to_vec_pretty(&report) {
                    o.artifacts.push(Artifact {
                        file_name: format!("lemma_report_seed{seed}.json"),
                        contents: json,
                    });
                }
            }
            Err(e) => pt.fail(&mut o, "lemma_suite", e),
        }
        o
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Mean and median of `metrics` per `(method, parameter value)`, as CSV.
fn summary_table(rows: &[ResultRow], metrics: &[&str]) -> String {
    let mut groups: BTreeMap<(String, String, String, u64), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| metrics.contains(&r.metric.as_str())) {
        // Key on the bit pattern so groups sort deterministically.
        let key = (r.metric.clone(), r.method.clone(), r.parameter.clone(), order_key(r.parameter_value));
        groups.entry(key).or_default().push(r.value);
    }
    let mut s = String::from("metric,method,parameter,parameter_value,count,mean,median\n");
    for ((metric, method, parameter, key), values) in groups {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let _ = writeln!(
            s,
            "{metric},{method},{parameter},{},{n},{mean:.9e},{:.9e}",
            from_order_key(key),
            median(values)
        );
    }
    s
}

/// Monotone map from finite `f64` to `u64`.
fn order_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_order_key(k: u64) -> f64 {
    if k >> 63 == 1 {
        f64::from_bits(k & !(1 << 63))
    } else {
        f64::from_bits(!k)
    }
}
