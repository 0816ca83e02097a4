//! Experiment configuration: published study defaults per experiment kind,
//! overridden by a TOML file and then by command-line flags.
//!
//! A config file holds top-level keys shared by every experiment plus optional
//! tables named after an experiment kind (`[tune_p]`, `[mse_vs_snr]`, ...)
//! whose keys apply to that kind only. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fastmusic_core::estimators::Method;
use fastmusic_core::spectrum::DEFAULT_GRID_SIZE;
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RuntimeScaling,
    BoundScatter,
    RobustK,
    TuneP,
    TuneT,
    SpectraCompare,
    MseVsSnr,
    LemmaSuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::RuntimeScaling,
        ExperimentKind::BoundScatter,
        ExperimentKind::RobustK,
        ExperimentKind::TuneP,
        ExperimentKind::TuneT,
        ExperimentKind::SpectraCompare,
        ExperimentKind::MseVsSnr,
        ExperimentKind::LemmaSuite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::RuntimeScaling => "runtime_scaling",
            ExperimentKind::BoundScatter => "bound_scatter",
            ExperimentKind::RobustK => "robust_k",
            ExperimentKind::TuneP => "tune_p",
            ExperimentKind::TuneT => "tune_t",
            ExperimentKind::SpectraCompare => "spectra_compare",
            ExperimentKind::MseVsSnr => "mse_vs_snr",
            ExperimentKind::LemmaSuite => "lemma_suite",
        }
    }

    /// What the `sweep` values mean for this kind.
    pub fn sweep_parameter(self) -> &'static str {
        match self {
            ExperimentKind::RuntimeScaling => "antennas",
            ExperimentKind::BoundScatter | ExperimentKind::MseVsSnr => "snr_db",
            ExperimentKind::RobustK => "guessed_k",
            ExperimentKind::TuneP => "p",
            ExperimentKind::TuneT => "t",
            ExperimentKind::SpectraCompare => "samples",
            ExperimentKind::LemmaSuite => "none",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| BenchError::Config(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub antennas: usize,
    pub samples: usize,
    pub targets: usize,
    pub snr_db: f64,
}

/// Fully resolved settings of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub scene: SceneParams,
    pub estimators: Vec<Method>,
    /// Meaning given by [`ExperimentKind::sweep_parameter`].
    pub sweep: Vec<f64>,
    pub seeds: Vec<u64>,
    pub grid_size: usize,
    pub out_dir: PathBuf,
    /// Column-sampling sketch width.
    pub fast1_p: usize,
    /// Gaussian sketch width.
    pub fast2_p: usize,
    pub power_iterations: usize,
    /// Failure probability used by the bounds.
    pub delta: f64,
    /// Timed repetitions per method and sweep point; `None` picks 100, or 20
    /// from 2000 antennas up.
    pub repetitions: Option<usize>,
    /// Fixed target geometry instead of seeded draws.
    pub scene_file: Option<PathBuf>,
}

fn seed_range(start: u64, count: u64) -> Vec<u64> {
    (start..start + count).collect()
}

impl ExperimentConfig {
    /// The published study settings for `kind`.
    pub fn study_default(kind: ExperimentKind) -> Self {
        let scene = |antennas, samples, targets, snr_db| SceneParams {
            antennas,
            samples,
            targets,
            snr_db,
        };
        use ExperimentKind::*;
        use Method::*;
        let (scene, estimators, sweep, seeds): (SceneParams, Vec<Method>, Vec<f64>, Vec<u64>) = match kind {
            RuntimeScaling => (
                scene(1000, 1000, 10, 0.0),
                vec![Exact, Fast1, Fast2, Lanczos, Propagator, MatrixInverse],
                vec![250.0, 500.0, 1000.0, 2000.0],
                vec![0],
            ),
            BoundScatter => (scene(200, 200, 11, 1.0), vec![Fast1, Fast2], vec![1.0], seed_range(0, 100)),
            RobustK => (
                scene(200, 400, 14, 0.0),
                vec![Fast1],
                vec![10.0, 12.0, 14.0, 16.0, 18.0],
                seed_range(0, 50),
            ),
            TuneP => (scene(200, 200, 11, 0.0), vec![Fast1], vec![11.0, 22.0, 33.0], seed_range(0, 50)),
            TuneT => (scene(200, 200, 11, 0.0), vec![Fast2], vec![1.0, 2.0, 3.0], seed_range(0, 50)),
            SpectraCompare => (
                scene(200, 200, 9, 0.0),
                vec![Exact, Fast1, Lanczos, Propagator, MatrixInverse, Fft],
                vec![800.0, 200.0],
                seed_range(0, 50),
            ),
            MseVsSnr => (
                scene(200, 200, 9, 0.0),
                vec![Exact, Fast1, Fast2, Lanczos, Propagator, MatrixInverse, Fft],
                vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
                seed_range(0, 100),
            ),
            LemmaSuite => (scene(1, 1, 1, 0.0), vec![], vec![], vec![0]),
        };
        let fast2_p = if kind == TuneT { scene.targets } else { 12 };
        ExperimentConfig {
            kind,
            scene,
            estimators,
            sweep,
            seeds,
            grid_size: DEFAULT_GRID_SIZE,
            out_dir: PathBuf::from("results").join(kind.as_str()),
            fast1_p: 12,
            fast2_p,
            power_iterations: 2,
            delta: 0.2,
            repetitions: None,
            scene_file: None,
        }
    }

    /// Paper defaults for `kind`, overridden by `file` when given.
    pub fn load(kind: ExperimentKind, file: Option<&Path>) -> Result<Self, BenchError> {
        let mut cfg = Self::study_default(kind);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_toml(&text)?;
            if let Some(scene) = cfg.scene_file.as_mut() {
                if scene.is_relative() {
                    *scene = path.parent().unwrap_or(Path::new(".")).join(&*scene);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the shared keys and then the `[<kind>]` table of `text`.
    pub fn apply_toml(&mut self, text: &str) -> Result<(), BenchError> {
        let table: toml::Table = text.parse().map_err(|e| BenchError::Config(format!("{e}")))?;
        let mut shared = toml::Table::new();
        let mut own = None;
        for (key, value) in table {
            match key.parse::<ExperimentKind>() {
                Ok(k) => {
                    let toml::Value::Table(t) = value else {
                        return Err(BenchError::Config(format!("[{key}] must be a table")));
                    };
                    if k == self.kind {
                        own = Some(t);
                    }
                }
                Err(_) => {
                    shared.insert(key, value);
                }
            }
        }
        self.apply(parse_overrides(shared, "top level")?);
        if let Some(t) = own {
            self.apply(parse_overrides(t, self.kind.as_str())?);
        }
        Ok(())
    }

    fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.antennas {
            self.scene.antennas = v;
        }
        if let Some(v) = o.samples {
            self.scene.samples = v;
        }
        if let Some(v) = o.targets {
            self.scene.targets = v;
            if self.kind == ExperimentKind::TuneP && o.sweep.is_none() {
                self.sweep = [1.0, 2.0, 3.0].iter().map(|f| f * v as f64).collect();
            }
            if self.kind == ExperimentKind::TuneT && o.fast2_p.is_none() {
                self.fast2_p = v;
            }
        }
        if let Some(v) = o.snr_db {
            self.scene.snr_db = v;
        }
        if let Some(v) = o.estimators {
            self.estimators = v;
        }
        if let Some(v) = o.sweep {
            self.sweep = v;
        }
        if let Some(v) = o.seeds {
            self.seeds = v.into_list();
        }
        if let Some(v) = o.grid_size {
            self.grid_size = v;
        }
        if let Some(v) = o.out_dir {
            self.out_dir = v;
        }
        if let Some(v) = o.fast1_p {
            self.fast1_p = v;
        }
        if let Some(v) = o.fast2_p {
            self.fast2_p = v;
        }
        if let Some(v) = o.power_iterations {
            self.power_iterations = v;
        }
        if let Some(v) = o.delta {
            self.delta = v;
        }
        if let Some(v) = o.repetitions {
            self.repetitions = Some(v);
        }
        if let Some(v) = o.scene_file {
            self.scene_file = Some(v);
        }
    }

    /// Replaces the seed list by `base, base + 1, ...` keeping its length.
    pub fn rebase_seeds(&mut self, base: u64) {
        self.seeds = seed_range(base, self.seeds.len() as u64);
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.kind == ExperimentKind::LemmaSuite {
            return Ok(());
        }
        if self.sweep.is_empty() {
            return bad(format!("{} sweep is empty", self.kind));
        }
        if let Some(v) = self.sweep.iter().find(|v| !v.is_finite()) {
            return bad(format!("non-finite sweep value {v}"));
        }
        if self.estimators.is_empty() {
            return bad("estimator list is empty".into());
        }
        if self.grid_size < 3 || self.grid_size.is_multiple_of(2) {
            return bad(format!(
                "grid_size must be odd and >= 3 so the field-of-view half shares its spacing, got {}",
                self.grid_size
            ));
        }
        let s = &self.scene;
        if s.antennas < 2 || s.samples < 1 || s.targets < 1 || s.targets >= s.antennas {
            return bad(format!(
                "scene needs antennas >= 2, samples >= 1 and 1 <= targets < antennas (got {s:?})"
            ));
        }
        if !s.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta={} must lie in (0, 1)", self.delta));
        }
        if self.power_iterations == 0 {
            return bad("power_iterations must be >= 1".into());
        }
        if self.repetitions == Some(0) {
            return bad("repetitions must be >= 1".into());
        }
        let integral = |name: &str| -> Result<(), BenchError> {
            match self.sweep.iter().find(|v| v.fract() != 0.0 || **v < 1.0) {
                Some(v) => bad(format!("{name} sweep needs positive integers, got {v}")),
                None => Ok(()),
            }
        };
        match self.kind {
            ExperimentKind::RuntimeScaling => integral("antenna")?,
            ExperimentKind::RobustK => integral("guessed K")?,
            ExperimentKind::TuneP => integral("p")?,
            ExperimentKind::TuneT => integral("t")?,
            ExperimentKind::SpectraCompare => integral("sample")?,
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSpec {
    fn into_list(self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v,
            SeedSpec::Range { start, count } => seed_range(start, count),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overrides {
    antennas: Option<usize>,
    samples: Option<usize>,
    targets: Option<usize>,
    snr_db: Option<f64>,
    estimators: Option<Vec<Method>>,
    sweep: Option<Vec<f64>>,
    seeds: Option<SeedSpec>,
    grid_size: Option<usize>,
    out_dir: Option<PathBuf>,
    fast1_p: Option<usize>,
    fast2_p: Option<usize>,
    power_iterations: Option<usize>,
    delta: Option<f64>,
    repetitions: Option<usize>,
    scene_file: Option<PathBuf>,
}

fn parse_overrides(table: toml::Table, at: &str) -> Result<Overrides, BenchError> {
    Overrides::deserialize(toml::Value::Table(table)).map_err(|e| BenchError::Config(format!("{at}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_is_valid() {
        for kind in ExperimentKind::ALL {
            ExperimentConfig::study_default(kind).validate().unwrap();
        }
    }

    #[test]
    fn kind_names_round_trip_through_dashes() {
        assert_eq!("robust-k".parse::<ExperimentKind>().unwrap(), ExperimentKind::RobustK);
        assert_eq!("mse_vs_snr".parse::<ExperimentKind>().unwrap(), ExperimentKind::MseVsSnr);
        assert!("tune".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn kind_table_overrides_shared_keys() {
        let mut cfg = ExperimentConfig::study_default(ExperimentKind::TuneT);
        cfg.apply_toml(
            "snr_db = 3.0\nseeds = { start = 10, count = 3 }\n[tune_t]\nsnr_db = -2\nsweep = [1, 4]\n[tune_p]\nsnr_db = 9.0\n",
        )
        .unwrap();
        assert_eq!(cfg.scene.snr_db, -2.0);
        assert_eq!(cfg.sweep, vec![1.0, 4.0]);
        assert_eq!(cfg.seeds, vec![10, 11, 12]);
    }

    #[test]
    fn tune_p_sweep_follows_target_count() {
        let mut cfg = ExperimentConfig::study_default(ExperimentKind::TuneP);
        cfg.apply_toml("targets = 5").unwrap();
        assert_eq!(cfg.sweep, vec![5.0, 10.0, 15.0]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut cfg = ExperimentConfig::study_default(ExperimentKind::TuneP);
        assert!(cfg.apply_toml("antenas = 3").is_err());
        assert!(cfg.apply_toml("[tune_p]\nfoo = 1").is_err());
        assert!(cfg.apply_toml("estimators = [\"esprit\"]").is_err());

        let mut cfg = ExperimentConfig::study_default(ExperimentKind::TuneP);
        cfg.seeds = vec![1, 1];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::study_default(ExperimentKind::TuneP);
        cfg.sweep = vec![11.5];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::study_default(ExperimentKind::TuneP);
        cfg.grid_size = 1800;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rebase_keeps_count() {
        let mut cfg = ExperimentConfig::study_default(ExperimentKind::RobustK);
        cfg.rebase_seeds(42);
        assert_eq!(cfg.seeds.len(), 50);
        assert_eq!(cfg.seeds[0], 42);
        assert_eq!(cfg.seeds[49], 91);
    }
}
