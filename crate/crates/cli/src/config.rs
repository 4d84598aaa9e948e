//! Run configuration: presets plus a list of `[[scenario]]` tables.
//!
//! Every table rejects unknown keys, so a typo fails before any
//! computation starts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fmto_core::lockin::SweepReadout;
use fmto_core::optics::{JitterKind, TrackerSettings};
use fmto_core::presets::{MaterialPreset, OscillatorPreset, PresetFile};
use fmto_core::spectral::Window;
use fmto_core::{Error, MaterialProperties, OscillatorParams, ReadoutGeometry, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub material: BTreeMap<String, MaterialPreset>,
    #[serde(default)]
    pub oscillator: BTreeMap<String, OscillatorPreset>,
    #[serde(default)]
    pub scenario: Vec<Scenario>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    /// User presets with the built-ins filled in underneath.
    pub fn presets(&self) -> PresetFile {
        PresetFile {
            material: self.material.clone(),
            oscillator: self.oscillator.clone(),
        }
        .with_builtins()
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.scenario {
            if s.name.is_empty()
                || !s
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                return Err(Error::Config(format!(
                    "scenario name '{}' must be non-empty and use only letters, digits, '-' and '_'",
                    s.name
                )));
            }
            if !seen.insert(&s.name) {
                return Err(Error::Config(format!(
                    "duplicate scenario name '{}'",
                    s.name
                )));
            }
        }
        let presets = self.presets();
        for s in &self.scenario {
            s.oscillator(&presets)?;
            presets.material(&s.material)?;
            s.geometry.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Analyze,
    Calibrate,
    Sensitivity,
    Bounds,
    Coils,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Calibrate => "calibrate",
            Command::Sensitivity => "sensitivity",
            Command::Bounds => "bounds",
            Command::Coils => "coils",
            Command::Sweep => "sweep",
        }
    }
}

/// A preset name or an inline oscillator table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OscillatorRef {
    Named(String),
    Inline(OscillatorPreset),
}

impl Default for OscillatorRef {
    fn default() -> Self {
        OscillatorRef::Named("reference".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub oscillator: OscillatorRef,
    /// Material of the sensing magnet, by preset name.
    #[serde(default = "default_material")]
    pub material: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub geometry: ReadoutGeometry,
    #[serde(default)]
    pub tracker: TrackerSettings,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub coils: CoilsSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_material() -> String {
    "ndfeb".into()
}

fn default_temperature() -> f64 {
    300.0
}

impl Scenario {
    pub fn oscillator(&self, presets: &PresetFile) -> Result<OscillatorParams<f64>> {
        match &self.oscillator {
            OscillatorRef::Named(n) => presets.oscillator(n),
            OscillatorRef::Inline(p) => presets.build_oscillator(p),
        }
    }

    pub fn material(&self, presets: &PresetFile) -> Result<MaterialProperties<f64>> {
        presets.material(&self.material)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSpec {
    /// T.
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterSpec {
    /// Standard deviation of the frame delay, s.
    pub sigma: f64,
    pub kind: JitterKind,
}

impl Default for JitterSpec {
    fn default() -> Self {
        Self {
            sigma: 2e-3,
            kind: JitterKind::Gaussian,
        }
    }
}

impl JitterSpec {
    pub fn jitter(&self) -> fmto_core::optics::Jitter {
        match self.kind {
            JitterKind::Gaussian => fmto_core::optics::Jitter::gaussian(self.sigma),
            JitterKind::Uniform => fmto_core::optics::Jitter::uniform(self.sigma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub dt: f64,
    pub duration: f64,
    /// Leading time dropped from every output, s.
    pub settle_time: f64,
    pub drive: Vec<ToneSpec>,
    /// Render and track camera frames as well.
    pub render: bool,
    /// Also write every frame as an image (large).
    pub write_frames: bool,
    pub photon_noise: bool,
    pub jitter: JitterSpec,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 100.0,
            settle_time: 0.0,
            drive: Vec::new(),
            render: false,
            write_frames: false,
            photon_noise: true,
            jitter: JitterSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Spot track CSV (`time_s,position_px,quality`).
    #[default]
    Track,
    /// Angle series CSV as written by `simulate`.
    Angles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    /// Input file; relative paths resolve against the config file.
    pub input: PathBuf,
    pub kind: InputKind,
    pub segment_length: f64,
    pub overlap: f64,
    pub window: Window,
    /// Lorentzian fit band; defaults to `f_r +- 10 f_r / Q`.
    pub fit_band: Option<[f64; 2]>,
    /// Lock-in reference frequencies, Hz.
    pub lock_in: Vec<f64>,
    pub use_actual_timestamps: bool,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            kind: InputKind::Track,
            segment_length: 100.0,
            overlap: 0.5,
            window: Window::Hann,
            fit_band: None,
            lock_in: Vec::new(),
            use_actual_timestamps: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    X,
    Y,
    #[default]
    Z,
}

impl From<AxisName> for fmto_core::coils::Axis {
    fn from(a: AxisName) -> Self {
        match a {
            AxisName::X => fmto_core::coils::Axis::X,
            AxisName::Y => fmto_core::coils::Axis::Y,
            AxisName::Z => fmto_core::coils::Axis::Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilSpec {
    pub name: String,
    pub turns: u32,
    /// m.
    pub diameter: f64,
    /// m.
    pub separation: f64,
    #[serde(default)]
    pub axis: AxisName,
    /// Measured-over-theory factor applied to the field.
    #[serde(default = "one")]
    pub deviation_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl CoilSpec {
    pub fn ac_signal() -> Self {
        Self {
            name: "ac".into(),
            turns: 5,
            diameter: 50e-3,
            separation: 65e-3,
            axis: AxisName::X,
            deviation_factor: 1.0,
        }
    }

    pub fn dc_bias() -> Self {
        Self {
            name: "dc".into(),
            turns: 80,
            diameter: 60e-3,
            separation: 38e-3,
            axis: AxisName::Z,
            deviation_factor: 1.0,
        }
    }

    pub fn pair(&self) -> Result<fmto_core::CoilPair<f64>> {
        fmto_core::CoilPair::new(self.turns, self.diameter, self.separation, self.axis.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub dt: f64,
    pub segment_length: f64,
    pub n_segments: usize,
    pub top_n: usize,
    /// Calibration tone frequency, Hz.
    pub cal_frequency: f64,
    /// Calibration current amplitude, A.
    pub cal_current: f64,
    pub coil: CoilSpec,
    /// Relative 1-sigma uncertainty of the calibration field.
    pub field_uncertainty: f64,
    /// 1-sigma uncertainty of Q carried into C_T(f).
    pub q_sigma: Option<f64>,
    pub halfwidth_bins: usize,
    pub jitter: JitterSpec,
    pub photon_noise: bool,
    /// Resonance sweep before the calibration run.
    pub sweep: SweepGrid,
    /// Duration of the clamped-spot record for the measurement floor, s;
    /// zero skips it.
    pub floor_duration: f64,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            segment_length: 100.0,
            n_segments: 60,
            top_n: 50,
            cal_frequency: 0.1,
            cal_current: 2e-6,
            coil: CoilSpec::ac_signal(),
            field_uncertainty: 0.15,
            q_sigma: None,
            halfwidth_bins: 3,
            jitter: JitterSpec::default(),
            photon_noise: true,
            sweep: SweepGrid::default(),
            floor_duration: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub f_min: f64,
    pub f_max: f64,
    pub step: f64,
    /// Drive current amplitude through the calibration coil, A.
    pub current: f64,
    pub measure_time: f64,
    pub settle_time: Option<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            f_min: 4.5,
            f_max: 5.5,
            step: 0.01,
            current: 2e-7,
            measure_time: 40.0,
            settle_time: None,
        }
    }
}

impl SweepGrid {
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        grid(self.f_min, self.f_max, self.step)
    }
}

/// `f_min, f_min + step, ..` up to `f_max` inclusive (within step/1000).
pub fn grid(f_min: f64, f_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_max >= f_min && step > 0.0) {
        return Err(Error::Config(format!(
            "invalid grid {f_min}..{f_max} step {step}"
        )));
    }
    let n = ((f_max - f_min) / step + 1e-3).floor() as usize + 1;
    Ok((0..n).map(|i| f_min + step * i as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    /// Sphere radii for the thermal-limit scan, m.
    pub radii: Vec<f64>,
    /// Bias fields for the scan, T.
    pub bias_fields: Vec<f64>,
    pub temperature: f64,
    pub q_factor: f64,
    /// Frequency grid for the oscillator's thermal-limit curve, Hz.
    pub f_min: f64,
    pub f_max: f64,
    pub n_freq: usize,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self {
            radii: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
            bias_fields: vec![1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6],
            temperature: 0.05,
            q_factor: 1e5,
            f_min: 0.01,
            f_max: 25.0,
            n_freq: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    /// Magnetometer sensitivity, T/sqrt(Hz).
    pub eta: f64,
    pub t_mea: f64,
    pub f_n: f64,
    pub l0: f64,
    pub lm: f64,
    pub amplitude: f64,
    pub solid_angle: f64,
    /// Source material preset.
    pub source_material: String,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    /// Also evaluate the pseudo-field by quadrature at each point.
    pub numeric: bool,
    /// Thermal-limit curves, one per entry.
    pub thermal: Vec<ThermalCurveSpec>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            eta: 55e-15,
            t_mea: 1e4,
            f_n: 4.99,
            l0: 7.5e-3,
            lm: 1.0,
            amplitude: 1.5e-3,
            solid_angle: 1e-2,
            source_material: "bgo".into(),
            lambda_min: 1e-4,
            lambda_max: 1e-1,
            n_lambda: 200,
            numeric: false,
            thermal: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalCurveSpec {
    pub label: String,
    pub bias_field: f64,
    pub temperature: f64,
    pub q_factor: f64,
    #[serde(default = "eps_default")]
    pub eps_a: f64,
    #[serde(default = "omega_default")]
    pub solid_angle: f64,
}

fn eps_default() -> f64 {
    0.2
}

fn omega_default() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoilsSection {
    pub pairs: Vec<CoilSpec>,
    /// Half-span of the uniformity table, m.
    pub half_span: f64,
    pub samples: usize,
    /// Currents for the field table, A.
    pub currents: Vec<f64>,
}

impl Default for CoilsSection {
    fn default() -> Self {
        Self {
            pairs: vec![
                CoilSpec {
                    deviation_factor: fmto_core::coils::DC_PAIR_DEVIATION,
                    ..CoilSpec::dc_bias()
                },
                CoilSpec::ac_signal(),
            ],
            half_span: 10e-3,
            samples: 21,
            currents: vec![1e-6, 2e-6, 1e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub f_min: f64,
    pub f_max: f64,
    pub step: f64,
    /// Drive field amplitude, T.
    pub drive_amplitude: f64,
    pub dt: f64,
    pub measure_time: f64,
    pub settle_time: Option<f64>,
    pub readout: SweepReadout,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            f_min: 4.5,
            f_max: 5.5,
            step: 0.01,
            drive_amplitude: 11.39e-12,
            dt: 1e-3,
            measure_time: 40.0,
            settle_time: None,
            readout: SweepReadout::Angle,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert!(c.scenario.is_empty());
    }

    #[test]
    fn minimal_scenario_gets_defaults() {
        let c =
            RunConfig::from_toml_str("[[scenario]]\nname = \"a\"\ncommand = \"coils\"\n").unwrap();
        let s = &c.scenario[0];
        assert_eq!(s.command, Command::Coils);
        assert_eq!(s.oscillator, OscillatorRef::Named("reference".into()));
        assert_eq!(s.calibrate.n_segments, 60);
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for text in [
            "colour = 1",
            "[[scenario]]\nname = \"a\"\ncommand = \"coils\"\nextra = 1\n",
            "[[scenario]]\nname = \"a\"\ncommand = \"coils\"\n[scenario.bounds]\netta = 1.0\n",
            "[[scenario]]\nname = \"a\"\ncommand = \"coils\"\n[scenario.geometry]\nfocal = 1.0\n",
            "[[scenario]]\nname = \"a\"\ncommand = \"fly\"\n",
        ] {
            assert!(RunConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn bad_references_fail_validation() {
        assert!(RunConfig::from_toml_str(
            "[[scenario]]\nname = \"a\"\ncommand = \"coils\"\noscillator = \"nope\"\n"
        )
        .is_err());
        assert!(
            RunConfig::from_toml_str("[[scenario]]\nname = \"a/b\"\ncommand = \"coils\"\n")
                .is_err()
        );
        let dup = "[[scenario]]\nname = \"a\"\ncommand = \"coils\"\n[[scenario]]\nname = \"a\"\ncommand = \"bounds\"\n";
        assert!(RunConfig::from_toml_str(dup).is_err());
    }

    #[test]
    fn inline_oscillator() {
        let text = "[[scenario]]\nname = \"a\"\ncommand = \"sweep\"\n[scenario.oscillator]\nq_factor = 20.0\ninertia = 3e-10\nmoment = 8e-3\nf_res = 3.0\n";
        let c = RunConfig::from_toml_str(text).unwrap();
        let p = c.scenario[0].oscillator(&c.presets()).unwrap();
        assert!((p.f_res() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_inclusive() {
        let g = grid(4.5, 5.5, 0.01).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g[100] - 5.5).abs() < 1e-9);
        assert!(grid(1.0, 0.5, 0.1).is_err());
    }
}
