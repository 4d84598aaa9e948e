//! Named material and oscillator presets from a TOML file.
//!
//! ```toml
//! [material.ndfeb]
//! rho_m = 7430.0
//! rho_e = 6e28
//! magnetization = { kind = "spin_density" }
//!
//! [oscillator.reference]
//! q_factor = 39.0
//! f_res = 4.99
//! inertia = 3e-10
//! cylinder = { diameter = 1e-3, height = 20e-3, material = "ndfeb" }
//! ```
//!
//! An oscillator needs `q_factor`, an inertia (`inertia`, or a `cylinder`
//! plus optional `extra_inertia`), a moment (`moment` or `cylinder`) and
//! exactly one of `f_res` and `bias_field`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::material::MagnetizationSource;
use crate::oscillator::{cylinder_inertia_and_moment, RotationAxis};
use crate::{Error, MaterialProperties, OscillatorParams, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialPreset {
    pub rho_m: f64,
    #[serde(default)]
    pub rho_e: f64,
    #[serde(default)]
    pub rho_n: f64,
    #[serde(default = "spin_density")]
    pub magnetization: MagnetizationSource,
}

fn spin_density() -> MagnetizationSource {
    MagnetizationSource::SpinDensity
}

impl MaterialPreset {
    pub fn build(&self) -> Result<MaterialProperties<f64>> {
        Ok(MaterialProperties::new(self.rho_m, self.rho_e, self.rho_n)?
            .with_magnetization(self.magnetization))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    #[default]
    Longitudinal,
    Transverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderPreset {
    pub diameter: f64,
    pub height: f64,
    /// Name of a material in the same file or a built-in material.
    pub material: String,
    #[serde(default)]
    pub axis: AxisName,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorPreset {
    pub q_factor: f64,
    pub inertia: Option<f64>,
    pub moment: Option<f64>,
    pub f_res: Option<f64>,
    pub bias_field: Option<f64>,
    #[serde(default)]
    pub k_offset: f64,
    #[serde(default)]
    pub extra_inertia: f64,
    pub cylinder: Option<CylinderPreset>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetFile {
    #[serde(default)]
    pub material: BTreeMap<String, MaterialPreset>,
    #[serde(default)]
    pub oscillator: BTreeMap<String, OscillatorPreset>,
}

/// Presets available without a file.
pub const BUILTIN: &str = r#"
[material.ndfeb]
rho_m = 7430.0
rho_e = 6e28

[material.ndfeb-remanence]
rho_m = 7430.0
rho_e = 6e28
magnetization = { kind = "remanence", value = 0.71 }

[material.bgo]
rho_m = 7130.0
rho_n = 4e30

[oscillator.reference]
q_factor = 39.0
f_res = 4.99
inertia = 3e-10
cylinder = { diameter = 1e-3, height = 20e-3, material = "ndfeb" }
"#;

impl PresetFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN).expect("built-in presets parse")
    }

    /// Built-in presets overlaid with this file's entries.
    pub fn with_builtins(mut self) -> Self {
        let base = Self::builtin();
        for (k, v) in base.material {
            self.material.entry(k).or_insert(v);
        }
        for (k, v) in base.oscillator {
            self.oscillator.entry(k).or_insert(v);
        }
        self
    }

    pub fn material(&self, name: &str) -> Result<MaterialProperties<f64>> {
        self.material
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown material '{name}'")))?
            .build()
    }

    pub fn oscillator(&self, name: &str) -> Result<OscillatorParams<f64>> {
        let p = self
            .oscillator
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown oscillator '{name}'")))?;
        self.build_oscillator(p)
    }

    pub fn build_oscillator(&self, p: &OscillatorPreset) -> Result<OscillatorParams<f64>> {
        let from_cylinder = match &p.cylinder {
            Some(c) => {
                let axis = match c.axis {
                    AxisName::Longitudinal => RotationAxis::Longitudinal,
                    AxisName::Transverse => RotationAxis::Transverse,
                };
                Some(cylinder_inertia_and_moment(
                    c.diameter,
                    c.height,
                    &self.material(&c.material)?,
                    p.extra_inertia,
                    axis,
                )?)
            }
            None => None,
        };
        let inertia = p
            .inertia
            .or(from_cylinder.map(|c| c.0))
            .ok_or_else(|| Error::Config("oscillator needs `inertia` or `cylinder`".into()))?;
        let moment = p
            .moment
            .or(from_cylinder.map(|c| c.1))
            .ok_or_else(|| Error::Config("oscillator needs `moment` or `cylinder`".into()))?;
        match (p.f_res, p.bias_field) {
            (Some(f), None) => {
                OscillatorParams::from_resonance(inertia, moment, p.q_factor, f, p.k_offset)
            }
            (None, Some(b)) => {
                OscillatorParams::from_bias(inertia, moment, p.q_factor, b, p.k_offset)
            }
            _ => Err(Error::Config(
                "give exactly one of `f_res` and `bias_field`".into(),
            )),
        }
    }
}
