//! JSON run configurations.
//!
//! Configs are validated and resolved into core types before anything is
//! computed. Raw units are converted to `d_a = d / w0` during resolution
//! only; the config itself keeps what the user wrote, so its echo can be fed
//! back to reproduce a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spade_core::simulate::{ExperimentProtocol, FixedWindowConfig, PhotonBudget};
use spade_core::testing::ThresholdSource;
use spade_core::{Alignment, Crosstalk, Formulation, Scene};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

/// A scalar, an explicit list, or `steps` evenly spaced values from `start`
/// to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Single(f64),
    List(Vec<f64>),
    Range(LinearRange),
}

impl Grid {
    pub fn values(&self, field: &str) -> CliResult<Vec<f64>> {
        let values = match self {
            Grid::Single(v) => vec![*v],
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                if r.steps == 0 {
                    return Err(CliError::Config(format!("{field}: steps must be >= 1")));
                }
                if r.steps == 1 {
                    vec![r.start]
                } else {
                    let h = (r.stop - r.start) / (r.steps - 1) as f64;
                    (0..r.steps)
                        .map(|i| if i + 1 == r.steps { r.stop } else { r.start + h * i as f64 })
                        .collect()
                }
            }
        };
        if values.is_empty() {
            return Err(CliError::Config(format!("{field}: empty grid")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("{field}: non-finite value {v}")));
        }
        Ok(values)
    }
}

/// Separation and beam waist in micrometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawUnits {
    pub separation_um: Grid,
    pub waist_um: f64,
}

fn separations(d_a: &Option<Grid>, raw: &Option<RawUnits>, field: &str) -> CliResult<Vec<f64>> {
    match (d_a, raw) {
        (Some(g), None) => g.values(&format!("{field}.d_a")),
        (None, Some(r)) => {
            if !(r.waist_um > 0.0 && r.waist_um.is_finite()) {
                return Err(CliError::Config(format!("{field}.raw_units.waist_um must be positive")));
            }
            Ok(r.separation_um
                .values(&format!("{field}.raw_units.separation_um"))?
                .into_iter()
                .map(|d| d / r.waist_um)
                .collect())
        }
        (Some(_), Some(_)) => Err(CliError::Config(format!("{field}: give d_a or raw_units, not both"))),
        (None, None) => Err(CliError::Config(format!("{field}: missing d_a (or raw_units)"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationName {
    #[default]
    StarFixed,
    CentroidFixed,
}

impl From<FormulationName> for Formulation {
    fn from(f: FormulationName) -> Self {
        match f {
            FormulationName::StarFixed => Formulation::StarFixed,
            FormulationName::CentroidFixed => Formulation::CentroidFixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentName {
    #[default]
    Star,
    Centroid,
}

impl From<AlignmentName> for Alignment {
    fn from(a: AlignmentName) -> Self {
        match a {
            AlignmentName::Star => Alignment::Star,
            AlignmentName::Centroid => Alignment::Centroid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdName {
    #[default]
    Calibrated,
    Analytic,
}

impl From<ThresholdName> for ThresholdSource {
    fn from(t: ThresholdName) -> Self {
        match t {
            ThresholdName::Calibrated => ThresholdSource::Calibrated,
            ThresholdName::Analytic => ThresholdSource::Analytic,
        }
    }
}

/// Leakages; `c01` defaults to `c10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkConfig {
    pub c10: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c01: Option<f64>,
}

impl CrosstalkConfig {
    pub fn matrix(&self) -> CliResult<Crosstalk> {
        Ok(Crosstalk::from_leakage(self.c10, self.c01.unwrap_or(self.c10))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PhotonsConfig {
    FixedN {
        n_total: u64,
    },
    FixedWindow {
        intensity_rate: f64,
        window: f64,
        mode_time: f64,
        #[serde(default)]
        planet_adds_intensity: bool,
    },
}

impl PhotonsConfig {
    pub fn budget(&self) -> CliResult<PhotonBudget> {
        match *self {
            PhotonsConfig::FixedN { n_total } => {
                if n_total == 0 {
                    return Err(CliError::Config("photons.fixed_n.n_total must be >= 1".into()));
                }
                Ok(PhotonBudget::FixedN(n_total))
            }
            PhotonsConfig::FixedWindow {
                intensity_rate,
                window,
                mode_time,
                planet_adds_intensity,
            } => Ok(PhotonBudget::FixedWindow {
                config: FixedWindowConfig::new(intensity_rate, window, mode_time)?,
                planet_adds_intensity,
            }),
        }
    }
}

/// Cartesian product of an intensity-ratio grid and a separation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilon: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_a: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_units: Option<RawUnits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOutputs {
    pub results: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub repetitions: usize,
    /// Defaults to `repetitions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_repetitions: Option<usize>,
    pub crosstalk: CrosstalkConfig,
    pub photons: PhotonsConfig,
    #[serde(default)]
    pub formulation: FormulationName,
    #[serde(default)]
    pub alignment: AlignmentName,
    #[serde(default)]
    pub threshold: ThresholdName,
    pub sweeps: Vec<SweepConfig>,
    pub output: SimulateOutputs,
    /// Command-line overrides already folded into the fields above.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<String>,
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(CliError::Config(format!("alpha = {alpha} must lie in (0, 1/2]")));
    }
    Ok(())
}

impl SimulateConfig {
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.overrides.push(format!("seed={seed}"));
    }

    pub fn override_repetitions(&mut self, repetitions: usize) {
        self.repetitions = repetitions;
        self.overrides.push(format!("repetitions={repetitions}"));
    }

    pub fn override_results(&mut self, path: PathBuf) {
        self.overrides.push(format!("output.results={}", path.display()));
        self.output.results = path;
    }

    /// Validates everything and builds the core protocol.
    pub fn resolve(&self) -> CliResult<ExperimentProtocol> {
        check_alpha(self.alpha)?;
        if self.repetitions == 0 {
            return Err(CliError::Config("repetitions must be >= 1".into()));
        }
        let calibration_repetitions = self.calibration_repetitions.unwrap_or(self.repetitions);
        if calibration_repetitions == 0 && self.threshold == ThresholdName::Calibrated {
            return Err(CliError::Config("calibration_repetitions must be >= 1".into()));
        }
        if self.sweeps.is_empty() {
            return Err(CliError::Config("sweeps: at least one sweep is required".into()));
        }
        let formulation = self.formulation.into();
        let alignment = self.alignment.into();
        let mut grid = Vec::new();
        for (i, sweep) in self.sweeps.iter().enumerate() {
            let field = format!("sweeps[{i}]");
            let eps = sweep.epsilon.values(&format!("{field}.epsilon"))?;
            let ds = separations(&sweep.d_a, &sweep.raw_units, &field)?;
            for &e in &eps {
                for &d in &ds {
                    Scene::new(e, d, 0.0, formulation, alignment)
                        .map_err(|err| CliError::Config(format!("{field}: {err}")))?;
                    grid.push((e, d));
                }
            }
        }
        Ok(ExperimentProtocol {
            seed: self.seed,
            alpha: self.alpha,
            repetitions: self.repetitions,
            calibration_repetitions,
            crosstalk: self.crosstalk.matrix()?,
            photons: self.photons.budget()?,
            formulation,
            alignment,
            grid,
            threshold_mode: self.threshold.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySweepConfig {
    pub epsilon: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_a: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_units: Option<RawUnits>,
    pub c10: Grid,
    /// Defaults to the symmetric case `c01 = c10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c01: Option<Grid>,
    #[serde(default)]
    pub formulation: FormulationName,
    #[serde(default)]
    pub alignment: AlignmentName,
    pub output: PathBuf,
    /// Where to write the `advantage_ratio = 1` curve `C01(C10)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_output: Option<PathBuf>,
}

pub struct ResolvedEntropySweep {
    pub epsilon: Vec<f64>,
    pub d_a: Vec<f64>,
    pub c10: Vec<f64>,
    pub c01: Option<Vec<f64>>,
    pub formulation: Formulation,
    pub alignment: Alignment,
}

impl EntropySweepConfig {
    pub fn resolve(&self) -> CliResult<ResolvedEntropySweep> {
        let epsilon = self.epsilon.values("epsilon")?;
        let d_a = separations(&self.d_a, &self.raw_units, "sweep")?;
        let c10 = self.c10.values("c10")?;
        let c01 = self.c01.as_ref().map(|g| g.values("c01")).transpose()?;
        let formulation = self.formulation.into();
        let alignment = self.alignment.into();
        for &e in &epsilon {
            for &d in &d_a {
                Scene::new(e, d, 0.0, formulation, alignment)?;
            }
        }
        for &a in &c10 {
            for &b in c01.as_deref().unwrap_or(&[a]) {
                Crosstalk::from_leakage(a, b)?;
            }
        }
        Ok(ResolvedEntropySweep {
            epsilon,
            d_a,
            c10,
            c01,
            formulation,
            alignment,
        })
    }
}

/// Reads and parses a JSON config; syntax and schema errors carry the line
/// and column.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
