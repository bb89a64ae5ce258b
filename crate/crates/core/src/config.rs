//! Pipeline configuration, read from TOML.

use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::MassBounds;
use crate::error::{Error, Result};
use crate::mechanism::MechanismModel;
use crate::optimize::GaConfig;
use crate::reference::{make_cosine_reference, make_scurve_reference_with, ReferenceTrajectory, DEFAULT_SMOOTHING};

/// Link data block. Units: m, kg, kg m^2, m/s^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub j4: f64,
    pub base: [f64; 2],
    #[serde(default)]
    pub anchor: [f64; 2],
    pub gravity: f64,
}

impl MechanismConfig {
    pub fn model(&self) -> Result<MechanismModel> {
        let model = MechanismModel {
            lengths: [self.l1, self.l2, self.l3, self.l4],
            masses: [self.m1, self.m2, self.m3, self.m4],
            inertias: [self.j1, self.j2, self.j3, self.j4],
            base: Vector2::from(self.base),
            anchor: Vector2::from(self.anchor),
            gravity: self.gravity,
            ..MechanismModel::table_one()
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<&MechanismModel> for MechanismConfig {
    fn from(m: &MechanismModel) -> Self {
        Self {
            l1: m.lengths[0],
            l2: m.lengths[1],
            l3: m.lengths[2],
            l4: m.lengths[3],
            m1: m.masses[0],
            m2: m.masses[1],
            m3: m.masses[2],
            m4: m.masses[3],
            j1: m.inertias[0],
            j2: m.inertias[1],
            j3: m.inertias[2],
            j4: m.inertias[3],
            base: [m.base.x, m.base.y],
            anchor: [m.anchor.x, m.anchor.y],
            gravity: m.gravity,
        }
    }
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineParams {
    /// m
    pub c0: f64,
    /// `c_k` of `cos(k w t)`, k = 1, 2, ... (m)
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SCurveParams {
    /// m
    pub x_min: f64,
    /// m
    pub x_max: f64,
    /// Fraction of each half period spent at constant velocity.
    pub cruise: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

/// Timing plus exactly one waveform table, `[reference.cosine]` or `[reference.s-curve]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// s
    pub period: f64,
    /// m
    pub height: f64,
    /// Knots per period.
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine: Option<CosineParams>,
    #[serde(default, rename = "s-curve", skip_serializing_if = "Option::is_none")]
    pub s_curve: Option<SCurveParams>,
}

impl ReferenceConfig {
    pub fn build(&self) -> Result<ReferenceTrajectory> {
        match (&self.cosine, &self.s_curve) {
            (Some(c), None) => make_cosine_reference(c.c0, &c.coefficients, self.period, self.height),
            (None, Some(s)) => make_scurve_reference_with(s.x_min, s.x_max, s.cruise, s.smoothing, self.period, self.height),
            _ => Err(Error::Config("reference: give exactly one of [reference.cosine], [reference.s-curve]".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringConfig {
    /// Slope bound (N m/rad).
    pub k_max: f64,
    /// Sub-spring pair counts to fit.
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// s
    pub dt: f64,
    /// s
    pub horizon: f64,
    /// Height-hold gains; zero means the plain linearizing torque.
    pub kp: f64,
    pub kd: f64,
    /// Escape window for `x` (m).
    pub window: [f64; 2],
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 5e-5,
            horizon: 0.75,
            kp: 0.0,
            kd: 0.0,
            window: [-0.035, 0.11],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub mass_bounds: MassBounds,
    pub reference: ReferenceConfig,
    pub spring: SpringConfig,
    /// Mass-distribution search.
    #[serde(default)]
    pub ga: GaConfig,
    /// Spring fits.
    #[serde(default)]
    pub spring_ga: GaConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.mechanism.model().map_err(|e| Error::Config(format!("mechanism: {e}")))?;
        self.mass_bounds.validate().map_err(|e| Error::Config(format!("mass_bounds: {e}")))?;
        self.ga.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.spring_ga.validate().map_err(|e| Error::Config(format!("spring_{e}")))?;
        let r = &self.reference;
        if !(r.period > 0.0) || r.samples < 2 {
            return bad("reference: period must be positive and samples >= 2".into());
        }
        if r.cosine.is_some() == r.s_curve.is_some() {
            return bad("reference: give exactly one of [reference.cosine], [reference.s-curve]".into());
        }
        if !(self.spring.k_max > 0.0) {
            return bad("spring: k_max must be positive".into());
        }
        if self.spring.n.is_empty() {
            return bad("spring: n must list at least one pair count".into());
        }
        let s = &self.simulation;
        if !(s.dt > 0.0 && s.horizon > 0.0) || s.window[0] >= s.window[1] {
            return bad("simulation: dt, horizon must be positive and window ordered".into());
        }
        Ok(())
    }

    /// GA settings with seeds derived from the run seed.
    pub fn mass_ga(&self) -> GaConfig {
        self.ga.with_seed(self.seed)
    }

    pub fn spring_ga(&self) -> GaConfig {
        self.spring_ga.with_seed(spring_seed(self.seed))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Seed of the spring fits in a run with the given seed.
pub fn spring_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_5EED_5EED_5EED
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[mechanism]
l1 = 0.080
l2 = 0.235
l3 = 0.052
l4 = 0.135
m1 = 0.071
m2 = 0.195
m3 = 0.049
m4 = 0.115
j1 = 0.747e-4
j2 = 10.413e-4
j3 = 0.345e-4
j4 = 2.430e-4
base = [-0.19, 0.15]
gravity = 9.81

[reference]
period = 0.5
height = 0.15
samples = 200

[reference.cosine]
c0 = 0.03
coefficients = [0.05, 0.008]

[spring]
k_max = 10.0
n = [1]
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = PipelineConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.mechanism.model().unwrap(), MechanismModel::table_one());
        assert_eq!(cfg.ga, GaConfig::default());
        assert_eq!(cfg.mass_bounds, MassBounds::default());
        assert_eq!(cfg.out_dir(), PathBuf::from("out"));
        let r = cfg.reference.build().unwrap();
        assert!((r.stroke() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn missing_length_is_named() {
        let text = MINIMAL.replace("l2 = 0.235\n", "");
        let err = PipelineConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("l2"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("[spring]\n", "[spring]\nstiffness = 3\n");
        assert!(matches!(PipelineConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn scurve_family_parses() {
        let text = MINIMAL.replace(
            "[reference.cosine]\nc0 = 0.03\ncoefficients = [0.05, 0.008]",
            "[reference.s-curve]\nx_min = -0.01\nx_max = 0.09\ncruise = 0.3",
        );
        let cfg = PipelineConfig::parse(&text).unwrap();
        let r = cfg.reference.build().unwrap();
        assert!((r.x_min() + 0.01).abs() < 1e-12 && (r.x_max() - 0.09).abs() < 1e-12);
    }

    #[test]
    fn bad_ga_block_rejected() {
        let text = format!("{MINIMAL}\n[spring_ga]\nmutation_rate = 1.5\n");
        let err = PipelineConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("mutation_rate"), "{err}");
    }

    #[test]
    fn echo_round_trips() {
        let cfg = PipelineConfig::parse(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
    }
}
